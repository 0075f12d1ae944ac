#ifndef HOMOG_TYPES_HPP
#define HOMOG_TYPES_HPP

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdio>
#include <stdexcept>
#include <string>

namespace homog {

// The extents are written as expressions so that Dim is never deduced from
// these aliases; it always comes from a mesh or field argument.
template <int Dim>
using Vec = std::array<double, static_cast<std::size_t>(Dim)>;

template <int Dim>
using Mat = std::array<std::array<double, static_cast<std::size_t>(Dim)>, static_cast<std::size_t>(Dim)>;

template <int Dim>
using Index = std::array<int, static_cast<std::size_t>(Dim)>;

/// Number of corners of a Dim-dimensional box element.
template <int Dim>
inline constexpr int corner_count = 1 << Dim;

// ----------------------------------------------------------------------------
//                                 Errors
// ----------------------------------------------------------------------------

/// %.6g text for diagnostics.
inline std::string format_number(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Precondition on the ε-lattice / fine mesh nesting violated.
class AlignmentError : public Error {
 public:
  using Error::Error;
};

/// Point outside the active region of a mesh.
class DomainError : public Error {
 public:
  using Error::Error;
};

class SolverError : public Error {
 public:
  SolverError(const std::string& what, int iterations, double residual)
      : Error(what + " (iterations " + std::to_string(iterations) + ", relative residual " +
              format_number(residual) + ")"),
        iterations_(iterations),
        residual_(residual) {}

  int iterations() const { return iterations_; }
  double residual() const { return residual_; }

 private:
  int iterations_;
  double residual_;
};

// ----------------------------------------------------------------------------
//                          Small fixed-size algebra
// ----------------------------------------------------------------------------

template <int Dim>
constexpr Mat<Dim> identity_matrix(double scale = 1.0) {
  Mat<Dim> m{};
  for (int i = 0; i < Dim; ++i) m[i][i] = scale;
  return m;
}

template <int Dim>
constexpr Mat<Dim> transpose(const Mat<Dim>& a) {
  Mat<Dim> t{};
  for (int i = 0; i < Dim; ++i)
    for (int j = 0; j < Dim; ++j) t[i][j] = a[j][i];
  return t;
}

template <int Dim>
constexpr Vec<Dim> apply(const Mat<Dim>& a, const Vec<Dim>& v) {
  Vec<Dim> r{};
  for (int i = 0; i < Dim; ++i)
    for (int j = 0; j < Dim; ++j) r[i] += a[i][j] * v[j];
  return r;
}

template <int Dim>
constexpr double dot(const Vec<Dim>& a, const Vec<Dim>& b) {
  double s = 0.0;
  for (int i = 0; i < Dim; ++i) s += a[i] * b[i];
  return s;
}

template <int Dim>
double max_asymmetry(const Mat<Dim>& a) {
  double m = 0.0;
  for (int i = 0; i < Dim; ++i)
    for (int j = 0; j < Dim; ++j) m = std::max(m, std::abs(a[i][j] - a[j][i]));
  return m;
}

/// Eigenvalue range (min, max) of the symmetric part of a 1x1 or 2x2 matrix.
template <int Dim>
std::array<double, 2> symmetric_eigen_range(const Mat<Dim>& a) {
  static_assert(Dim == 1 || Dim == 2, "only n = 1, 2 supported");
  if constexpr (Dim == 1) {
    return {a[0][0], a[0][0]};
  } else {
    const double p = a[0][0];
    const double q = a[1][1];
    const double r = 0.5 * (a[0][1] + a[1][0]);
    const double mean = 0.5 * (p + q);
    const double radius = std::hypot(0.5 * (p - q), r);
    return {mean - radius, mean + radius};
  }
}

template <int Dim>
bool all_finite(const Mat<Dim>& a) {
  for (const auto& row : a)
    for (double v : row)
      if (!std::isfinite(v)) return false;
  return true;
}

}  // namespace homog

#endif  // HOMOG_TYPES_HPP
