#ifndef HOMOG_COEFF_HPP
#define HOMOG_COEFF_HPP

// Y-periodic matrix coefficients A(y). Every sample goes through the
// componentwise fractional part of y, so fields are periodic by construction.

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <type_traits>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "homog/types.hpp"

namespace homog {

/// {v} in [0, 1).
inline double fractional_part(double v) {
  double f = v - std::floor(v);
  if (f >= 1.0) f = 0.0;
  return f;
}

struct Ellipticity {
  double lower = 0.0;
  double upper = 0.0;
};

namespace kinds {

template <int Dim>
struct Constant {
  Mat<Dim> matrix;
};

/// α·I where {y_axis} < fraction, β·I elsewhere.
struct Laminate {
  int axis = 0;
  double alpha = 1.0;
  double beta = 1.0;
  double fraction = 0.5;
};

/// α·I on the cells where {y_0} < 1/2 and {y_1} < 1/2 agree, β·I elsewhere.
struct Checkerboard {
  double alpha = 1.0;
  double beta = 1.0;
};

/// (a0 + a1 cos 2π y_axis)·I
struct ScalarCosine {
  double a0 = 2.0;
  double a1 = 1.0;
  int axis = 0;
};

/// k^n piecewise-constant matrices on the cells [j/k, (j+1)/k) of Y, stored
/// lexicographically (first axis fastest). Entries may be non-symmetric.
template <int Dim>
struct GridTable {
  int k = 1;
  std::vector<Mat<Dim>> cells;
};

}  // namespace kinds

template <int Dim>
class CoefficientField {
 public:
  using Kind = std::variant<kinds::Constant<Dim>, kinds::Laminate, kinds::Checkerboard,
                            kinds::ScalarCosine, kinds::GridTable<Dim>>;

  explicit CoefficientField(Kind kind) : kind_(std::move(kind)) { check(); }

  static CoefficientField constant(const Mat<Dim>& m) { return CoefficientField(kinds::Constant<Dim>{m}); }
  static CoefficientField laminate(int axis, double alpha, double beta, double fraction) {
    return CoefficientField(kinds::Laminate{axis, alpha, beta, fraction});
  }
  static CoefficientField checkerboard(double alpha, double beta) {
    return CoefficientField(kinds::Checkerboard{alpha, beta});
  }
  static CoefficientField scalar_cosine(double a0, double a1, int axis) {
    return CoefficientField(kinds::ScalarCosine{a0, a1, axis});
  }
  static CoefficientField grid_table(int k, std::vector<Mat<Dim>> cells) {
    return CoefficientField(kinds::GridTable<Dim>{k, std::move(cells)});
  }

  const Kind& kind() const { return kind_; }

  std::string kind_name() const {
    return std::visit(
        [](const auto& k) -> std::string {
          using K = std::decay_t<decltype(k)>;
          if constexpr (std::is_same_v<K, kinds::Constant<Dim>>) return "constant";
          else if constexpr (std::is_same_v<K, kinds::Laminate>) return "laminate";
          else if constexpr (std::is_same_v<K, kinds::Checkerboard>) return "checkerboard";
          else if constexpr (std::is_same_v<K, kinds::ScalarCosine>) return "scalar_cosine";
          else return "grid_table";
        },
        kind_);
  }

  /// True when every sample is exactly symmetric.
  bool symmetric() const {
    if (const auto* c = std::get_if<kinds::Constant<Dim>>(&kind_)) return max_asymmetry<Dim>(c->matrix) == 0.0;
    if (const auto* g = std::get_if<kinds::GridTable<Dim>>(&kind_)) {
      for (const auto& m : g->cells)
        if (max_asymmetry<Dim>(m) != 0.0) return false;
    }
    return true;
  }

  /// True when A does not depend on y.
  bool is_constant() const { return std::holds_alternative<kinds::Constant<Dim>>(kind_); }

  /// A({y}).
  Mat<Dim> sample(const Vec<Dim>& y) const {
    Vec<Dim> f{};
    for (int k = 0; k < Dim; ++k) f[k] = fractional_part(y[k]);
    return sample_cell(f);
  }

  /// A(y) for y already in [0,1)^n.
  Mat<Dim> sample_cell(const Vec<Dim>& f) const {
    return std::visit(
        [&](const auto& k) -> Mat<Dim> {
          using K = std::decay_t<decltype(k)>;
          if constexpr (std::is_same_v<K, kinds::Constant<Dim>>) {
            return k.matrix;
          } else if constexpr (std::is_same_v<K, kinds::Laminate>) {
            return identity_matrix<Dim>(f[k.axis] < k.fraction ? k.alpha : k.beta);
          } else if constexpr (std::is_same_v<K, kinds::Checkerboard>) {
            bool same = true;
            if constexpr (Dim == 2) same = (f[0] < 0.5) == (f[1] < 0.5);
            else same = f[0] < 0.5;
            return identity_matrix<Dim>(same ? k.alpha : k.beta);
          } else if constexpr (std::is_same_v<K, kinds::ScalarCosine>) {
            return identity_matrix<Dim>(k.a0 + k.a1 * std::cos(2.0 * std::numbers::pi * f[k.axis]));
          } else {
            std::size_t idx = 0;
            std::size_t stride = 1;
            for (int d = 0; d < Dim; ++d) {
              int j = static_cast<int>(std::floor(f[d] * k.k));
              j = std::clamp(j, 0, k.k - 1);
              idx += stride * static_cast<std::size_t>(j);
              stride *= static_cast<std::size_t>(k.k);
            }
            return k.cells[idx];
          }
        },
        kind_);
  }

 private:
  void check() const {
    std::visit(
        [](const auto& k) {
          using K = std::decay_t<decltype(k)>;
          if constexpr (std::is_same_v<K, kinds::Laminate>) {
            if (k.axis < 0 || k.axis >= Dim) throw Error("laminate axis out of range");
            if (!(k.fraction > 0.0 && k.fraction < 1.0))
              throw Error("laminate volume fraction must lie in (0, 1)");
          } else if constexpr (std::is_same_v<K, kinds::ScalarCosine>) {
            if (k.axis < 0 || k.axis >= Dim) throw Error("scalar_cosine axis out of range");
          } else if constexpr (std::is_same_v<K, kinds::GridTable<Dim>>) {
            std::size_t expected = 1;
            for (int d = 0; d < Dim; ++d) expected *= static_cast<std::size_t>(k.k);
            if (k.k < 1 || k.cells.size() != expected)
              throw Error("grid_table needs k^n cell matrices");
          }
        },
        kind_);
  }

  Kind kind_;
};

/// Min/max eigenvalue of sym(A) over the lattice {j/s}^n, j = 0..s-1.
/// Throws if the field is not uniformly elliptic at the samples, or if a
/// kind declared symmetric produces an asymmetric sample.
template <int Dim>
Ellipticity validate_ellipticity(const CoefficientField<Dim>& field, int samples_per_axis = 32) {
  if (samples_per_axis < 2) throw Error("validate_ellipticity needs at least 2 samples per axis");
  const bool declared_symmetric = field.symmetric();
  Ellipticity out{std::numeric_limits<double>::infinity(), -std::numeric_limits<double>::infinity()};
  int total = 1;
  for (int k = 0; k < Dim; ++k) total *= samples_per_axis;
  for (int s = 0; s < total; ++s) {
    Vec<Dim> y{};
    int rem = s;
    for (int k = 0; k < Dim; ++k) {
      y[k] = static_cast<double>(rem % samples_per_axis) / samples_per_axis;
      rem /= samples_per_axis;
    }
    const auto a = field.sample(y);
    if (!all_finite<Dim>(a)) throw Error("coefficient has non-finite entries");
    if (declared_symmetric && max_asymmetry<Dim>(a) > 0.0)
      throw Error("coefficient declared symmetric returned an asymmetric sample");
    const auto [lo, hi] = symmetric_eigen_range<Dim>(a);
    out.lower = std::min(out.lower, lo);
    out.upper = std::max(out.upper, hi);
  }
  if (!(out.lower > 0.0))
    throw Error("coefficient is not elliptic: minimum eigenvalue " + format_number(out.lower));
  return out;
}

}  // namespace homog

#endif  // HOMOG_COEFF_HPP
