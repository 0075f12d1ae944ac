#ifndef HOMOG_GRID_HPP
#define HOMOG_GRID_HPP

// Structured axis-aligned meshes with Q1 (multilinear) elements and
// tensor-product Gauss quadrature.
//
// Nodes and elements are numbered lexicographically, first axis fastest:
//   node(i_0, i_1)    = i_0 + (d_0 + 1) * i_1
//   element(e_0, e_1) = e_0 + d_0 * e_1
// Local corner a of an element has offset bit k of a along axis k.

#include <cmath>
#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "homog/types.hpp"

namespace homog {

enum class Shape { box, l_shape };

inline std::string to_string(Shape s) { return s == Shape::box ? "box" : "l_shape"; }

inline Shape shape_from_string(const std::string& s) {
  if (s == "box") return Shape::box;
  if (s == "l_shape") return Shape::l_shape;
  throw Error("unknown domain shape '" + s + "'");
}

template <int Dim>
class StructuredMesh {
  static_assert(Dim == 1 || Dim == 2, "only n = 1, 2 supported");

 public:
  static constexpr int dim = Dim;

  StructuredMesh(Vec<Dim> origin, Vec<Dim> extent, Index<Dim> divisions,
                 Shape shape = Shape::box)
      : origin_(origin), extent_(extent), divisions_(divisions), shape_(shape) {
    for (int k = 0; k < Dim; ++k) {
      if (divisions_[k] < 1)
        throw Error("mesh divisions must be positive, got " +
                    std::to_string(divisions_[k]) + " on axis " + std::to_string(k));
      if (!(extent_[k] > 0.0) || !std::isfinite(extent_[k]))
        throw Error("mesh extent must be positive and finite");
      if (!std::isfinite(origin_[k])) throw Error("mesh origin must be finite");
      h_[k] = extent_[k] / divisions_[k];
    }
    node_count_ = 1;
    element_count_ = 1;
    for (int k = 0; k < Dim; ++k) {
      node_count_ *= divisions_[k] + 1;
      element_count_ *= divisions_[k];
    }
    if (shape_ == Shape::l_shape) {
      if constexpr (Dim != 2) {
        throw Error("l_shape requires n = 2");
      } else {
        if (divisions_[0] % 2 != 0 || divisions_[1] % 2 != 0)
          throw Error("l_shape requires even divisions on every axis");
        auto mask = std::make_shared<std::vector<std::uint8_t>>(element_count_, 1);
        for (int e1 = divisions_[1] / 2; e1 < divisions_[1]; ++e1)
          for (int e0 = divisions_[0] / 2; e0 < divisions_[0]; ++e0)
            (*mask)[e0 + divisions_[0] * e1] = 0;
        active_ = std::move(mask);
      }
    }
  }

  const Vec<Dim>& origin() const { return origin_; }
  const Vec<Dim>& extent() const { return extent_; }
  const Index<Dim>& divisions() const { return divisions_; }
  Shape shape() const { return shape_; }
  double h(int axis) const { return h_[axis]; }
  const Vec<Dim>& spacing() const { return h_; }

  double element_volume() const {
    double v = 1.0;
    for (int k = 0; k < Dim; ++k) v *= h_[k];
    return v;
  }

  std::size_t node_count() const { return node_count_; }
  std::size_t element_count() const { return element_count_; }

  bool has_mask() const { return static_cast<bool>(active_); }

  bool element_active(std::size_t e) const { return !active_ || (*active_)[e] != 0; }

  bool element_active(const Index<Dim>& e) const {
    for (int k = 0; k < Dim; ++k)
      if (e[k] < 0 || e[k] >= divisions_[k]) return false;
    return element_active(element_index(e));
  }

  std::size_t active_element_count() const {
    if (!active_) return element_count_;
    std::size_t c = 0;
    for (auto f : *active_) c += f;
    return c;
  }

  std::size_t node_index(const Index<Dim>& i) const {
    std::size_t idx = 0;
    std::size_t stride = 1;
    for (int k = 0; k < Dim; ++k) {
      idx += stride * static_cast<std::size_t>(i[k]);
      stride *= static_cast<std::size_t>(divisions_[k] + 1);
    }
    return idx;
  }

  Index<Dim> node_multi(std::size_t n) const {
    Index<Dim> i{};
    for (int k = 0; k < Dim; ++k) {
      const auto w = static_cast<std::size_t>(divisions_[k] + 1);
      i[k] = static_cast<int>(n % w);
      n /= w;
    }
    return i;
  }

  std::size_t element_index(const Index<Dim>& e) const {
    std::size_t idx = 0;
    std::size_t stride = 1;
    for (int k = 0; k < Dim; ++k) {
      idx += stride * static_cast<std::size_t>(e[k]);
      stride *= static_cast<std::size_t>(divisions_[k]);
    }
    return idx;
  }

  Index<Dim> element_multi(std::size_t e) const {
    Index<Dim> i{};
    for (int k = 0; k < Dim; ++k) {
      const auto w = static_cast<std::size_t>(divisions_[k]);
      i[k] = static_cast<int>(e % w);
      e /= w;
    }
    return i;
  }

  Vec<Dim> node_coord(const Index<Dim>& i) const {
    Vec<Dim> x{};
    for (int k = 0; k < Dim; ++k) x[k] = origin_[k] + i[k] * extent_[k] / divisions_[k];
    return x;
  }

  Vec<Dim> node_coord(std::size_t n) const { return node_coord(node_multi(n)); }

  /// Physical point of reference coordinate `ref` in element `e`.
  Vec<Dim> element_point(const Index<Dim>& e, const Vec<Dim>& ref) const {
    Vec<Dim> x{};
    for (int k = 0; k < Dim; ++k) x[k] = origin_[k] + (e[k] + ref[k]) * h_[k];
    return x;
  }

  Vec<Dim> element_center(const Index<Dim>& e) const {
    Vec<Dim> half{};
    half.fill(0.5);
    return element_point(e, half);
  }

  std::array<std::size_t, corner_count<Dim>> element_nodes(const Index<Dim>& e) const {
    std::array<std::size_t, corner_count<Dim>> nodes{};
    for (int a = 0; a < corner_count<Dim>; ++a) {
      Index<Dim> i = e;
      for (int k = 0; k < Dim; ++k) i[k] += (a >> k) & 1;
      nodes[a] = node_index(i);
    }
    return nodes;
  }

  /// A node is active when it is a corner of at least one active element.
  bool node_active(const Index<Dim>& i) const {
    if (!active_) return true;
    for (int a = 0; a < corner_count<Dim>; ++a) {
      Index<Dim> e = i;
      for (int k = 0; k < Dim; ++k) e[k] -= (a >> k) & 1;
      if (element_active(e)) return true;
    }
    return false;
  }

  /// Active node lying on the boundary of the active region.
  bool node_on_boundary(const Index<Dim>& i) const {
    bool any = false;
    bool all = true;
    for (int a = 0; a < corner_count<Dim>; ++a) {
      Index<Dim> e = i;
      for (int k = 0; k < Dim; ++k) e[k] -= (a >> k) & 1;
      const bool act = element_active(e);
      any = any || act;
      all = all && act;
    }
    return any && !all;
  }

  /// Locates an active element whose closed box contains x. Returns the
  /// element and the reference coordinates of x inside it.
  std::optional<std::pair<Index<Dim>, Vec<Dim>>> locate(const Vec<Dim>& x) const {
    constexpr double slack = 1e-10;
    Index<Dim> base{};
    Vec<Dim> t{};
    for (int k = 0; k < Dim; ++k) {
      t[k] = (x[k] - origin_[k]) / h_[k];
      if (!std::isfinite(t[k])) return std::nullopt;
      if (t[k] < -slack || t[k] > divisions_[k] + slack) return std::nullopt;
      base[k] = std::clamp(static_cast<int>(std::floor(t[k])), 0, divisions_[k] - 1);
    }
    // Points on element faces may belong to the neighbour on either side.
    for (int a = 0; a < (1 << (2 * Dim)); ++a) {
      Index<Dim> e = base;
      bool ok = true;
      for (int k = 0; k < Dim; ++k) {
        const int shift = (a >> (2 * k)) & 3;  // 0: stay, 1: -1, 2: +1
        if (shift == 3) {
          ok = false;
          break;
        }
        e[k] += shift == 1 ? -1 : (shift == 2 ? 1 : 0);
      }
      if (!ok || !element_active(e)) continue;
      Vec<Dim> ref{};
      bool inside = true;
      for (int k = 0; k < Dim; ++k) {
        ref[k] = t[k] - e[k];
        if (ref[k] < -slack || ref[k] > 1.0 + slack) {
          inside = false;
          break;
        }
        ref[k] = std::clamp(ref[k], 0.0, 1.0);
      }
      if (inside) return std::make_pair(e, ref);
    }
    return std::nullopt;
  }

  bool same_layout(const StructuredMesh& o) const {
    return origin_ == o.origin_ && extent_ == o.extent_ && divisions_ == o.divisions_ &&
           shape_ == o.shape_;
  }

 private:
  Vec<Dim> origin_;
  Vec<Dim> extent_;
  Index<Dim> divisions_;
  Shape shape_;
  Vec<Dim> h_{};
  std::size_t node_count_ = 0;
  std::size_t element_count_ = 0;
  std::shared_ptr<const std::vector<std::uint8_t>> active_;
};

template <int Dim>
StructuredMesh<Dim> build_mesh(const Vec<Dim>& origin, const Vec<Dim>& extent,
                               const Index<Dim>& divisions, Shape shape = Shape::box) {
  return StructuredMesh<Dim>(origin, extent, divisions, shape);
}

/// Unit box (0,1)^n with `d` elements per axis.
template <int Dim>
StructuredMesh<Dim> unit_mesh(int d, Shape shape = Shape::box) {
  Vec<Dim> o{};
  Vec<Dim> l{};
  Index<Dim> div{};
  l.fill(1.0);
  div.fill(d);
  return StructuredMesh<Dim>(o, l, div, shape);
}

// ----------------------------------------------------------------------------
//                             Q1 shape functions
// ----------------------------------------------------------------------------

template <int Dim>
std::array<double, corner_count<Dim>> q1_values(const Vec<Dim>& ref) {
  std::array<double, corner_count<Dim>> n{};
  for (int a = 0; a < corner_count<Dim>; ++a) {
    double v = 1.0;
    for (int k = 0; k < Dim; ++k) v *= ((a >> k) & 1) ? ref[k] : 1.0 - ref[k];
    n[a] = v;
  }
  return n;
}

/// Gradients with respect to reference coordinates.
template <int Dim>
std::array<Vec<Dim>, corner_count<Dim>> q1_ref_gradients(const Vec<Dim>& ref) {
  std::array<Vec<Dim>, corner_count<Dim>> g{};
  for (int a = 0; a < corner_count<Dim>; ++a) {
    for (int d = 0; d < Dim; ++d) {
      double v = 1.0;
      for (int k = 0; k < Dim; ++k) {
        const bool upper = (a >> k) & 1;
        if (k == d)
          v *= upper ? 1.0 : -1.0;
        else
          v *= upper ? ref[k] : 1.0 - ref[k];
      }
      g[a][d] = v;
    }
  }
  return g;
}

// ----------------------------------------------------------------------------
//                                ScalarField
// ----------------------------------------------------------------------------

/// Nodal values of a Q1 function, lexicographic node order. Inactive nodes of
/// masked meshes carry 0 and are never read.
template <int Dim>
class ScalarField {
 public:
  ScalarField(StructuredMesh<Dim> mesh, std::vector<double> values)
      : mesh_(std::move(mesh)), values_(std::move(values)) {
    if (values_.size() != mesh_.node_count())
      throw Error("field length " + std::to_string(values_.size()) +
                  " does not match node count " + std::to_string(mesh_.node_count()));
    for (double v : values_)
      if (!std::isfinite(v)) throw Error("field values must be finite");
  }

  explicit ScalarField(StructuredMesh<Dim> mesh, double value = 0.0)
      : mesh_(std::move(mesh)), values_(mesh_.node_count(), value) {}

  const StructuredMesh<Dim>& mesh() const { return mesh_; }
  const std::vector<double>& values() const { return values_; }
  std::vector<double>& values() { return values_; }
  double operator[](std::size_t n) const { return values_[n]; }
  double& operator[](std::size_t n) { return values_[n]; }

  std::array<double, corner_count<Dim>> element_values(const Index<Dim>& e) const {
    std::array<double, corner_count<Dim>> v{};
    const auto nodes = mesh_.element_nodes(e);
    for (int a = 0; a < corner_count<Dim>; ++a) v[a] = values_[nodes[a]];
    return v;
  }

 private:
  StructuredMesh<Dim> mesh_;
  std::vector<double> values_;
};

/// Nodal interpolant of f on the active nodes of mesh.
template <int Dim, class F>
ScalarField<Dim> interpolate(const StructuredMesh<Dim>& mesh, F&& f) {
  ScalarField<Dim> field(mesh);
  for (std::size_t n = 0; n < mesh.node_count(); ++n) {
    const auto i = mesh.node_multi(n);
    if (mesh.node_active(i)) field[n] = f(mesh.node_coord(i));
  }
  return field;
}

template <int Dim>
double element_value(const std::array<double, corner_count<Dim>>& corner_values,
                     const Vec<Dim>& ref) {
  const auto n = q1_values<Dim>(ref);
  double v = 0.0;
  for (int a = 0; a < corner_count<Dim>; ++a) v += n[a] * corner_values[a];
  return v;
}

template <int Dim>
Vec<Dim> element_gradient(const std::array<double, corner_count<Dim>>& corner_values,
                          const Vec<Dim>& ref, const Vec<Dim>& h) {
  const auto g = q1_ref_gradients<Dim>(ref);
  Vec<Dim> out{};
  for (int a = 0; a < corner_count<Dim>; ++a)
    for (int k = 0; k < Dim; ++k) out[k] += g[a][k] * corner_values[a];
  for (int k = 0; k < Dim; ++k) out[k] /= h[k];
  return out;
}

template <int Dim>
double eval_field(const ScalarField<Dim>& field, const Vec<Dim>& x) {
  const auto loc = field.mesh().locate(x);
  if (!loc) throw DomainError("point outside the active region of the mesh");
  return element_value<Dim>(field.element_values(loc->first), loc->second);
}

template <int Dim>
Vec<Dim> eval_gradient(const ScalarField<Dim>& field, const Vec<Dim>& x) {
  const auto loc = field.mesh().locate(x);
  if (!loc) throw DomainError("point outside the active region of the mesh");
  return element_gradient<Dim>(field.element_values(loc->first), loc->second,
                               field.mesh().spacing());
}

// ----------------------------------------------------------------------------
//                                Quadrature
// ----------------------------------------------------------------------------

/// Tensor-product rule on the reference element [0,1]^n, weights summing to 1.
template <int Dim>
struct QuadratureRule {
  std::vector<Vec<Dim>> points;
  std::vector<double> weights;

  std::size_t size() const { return points.size(); }
};

/// Gauss-Legendre points on [0,1], 1 to 4 points per axis.
inline std::pair<std::vector<double>, std::vector<double>> gauss_1d(int n) {
  std::vector<double> x;
  std::vector<double> w;
  switch (n) {
    case 1:
      x = {0.0};
      w = {2.0};
      break;
    case 2: {
      const double a = 1.0 / std::sqrt(3.0);
      x = {-a, a};
      w = {1.0, 1.0};
      break;
    }
    case 3: {
      const double a = std::sqrt(0.6);
      x = {-a, 0.0, a};
      w = {5.0 / 9.0, 8.0 / 9.0, 5.0 / 9.0};
      break;
    }
    case 4: {
      const double a = std::sqrt(3.0 / 7.0 - 2.0 / 7.0 * std::sqrt(1.2));
      const double b = std::sqrt(3.0 / 7.0 + 2.0 / 7.0 * std::sqrt(1.2));
      const double wa = (18.0 + std::sqrt(30.0)) / 36.0;
      const double wb = (18.0 - std::sqrt(30.0)) / 36.0;
      x = {-b, -a, a, b};
      w = {wb, wa, wa, wb};
      break;
    }
    default:
      throw Error("Gauss rule supports 1 to 4 points per axis");
  }
  for (auto& v : x) v = 0.5 * (v + 1.0);
  for (auto& v : w) v *= 0.5;
  return {x, w};
}

template <int Dim>
QuadratureRule<Dim> gauss_rule(int points_per_axis = 2) {
  const auto [x, w] = gauss_1d(points_per_axis);
  QuadratureRule<Dim> rule;
  int total = 1;
  for (int k = 0; k < Dim; ++k) total *= points_per_axis;
  for (int q = 0; q < total; ++q) {
    Vec<Dim> p{};
    double wt = 1.0;
    int rem = q;
    for (int k = 0; k < Dim; ++k) {
      const int j = rem % points_per_axis;
      rem /= points_per_axis;
      p[k] = x[j];
      wt *= w[j];
    }
    rule.points.push_back(p);
    rule.weights.push_back(wt);
  }
  return rule;
}

/// Shape function values and reference gradients tabulated at rule points.
template <int Dim>
struct TabulatedRule {
  QuadratureRule<Dim> rule;
  std::vector<std::array<double, corner_count<Dim>>> values;
  std::vector<std::array<Vec<Dim>, corner_count<Dim>>> ref_gradients;

  explicit TabulatedRule(QuadratureRule<Dim> r) : rule(std::move(r)) {
    for (const auto& p : rule.points) {
      values.push_back(q1_values<Dim>(p));
      ref_gradients.push_back(q1_ref_gradients<Dim>(p));
    }
  }
};

/// Sum over active elements of volume x weighted integrand samples; the
/// reduction runs in element order.
template <int Dim, class F>
double integrate(const StructuredMesh<Dim>& mesh, F&& integrand,
                 const QuadratureRule<Dim>& rule = gauss_rule<Dim>(2)) {
  const double vol = mesh.element_volume();
  double total = 0.0;
  for (std::size_t e = 0; e < mesh.element_count(); ++e) {
    if (!mesh.element_active(e)) continue;
    const auto ei = mesh.element_multi(e);
    double local = 0.0;
    for (std::size_t q = 0; q < rule.size(); ++q) {
      const double v = integrand(mesh.element_point(ei, rule.points[q]));
      if (!std::isfinite(v)) throw Error("non-finite integrand sample");
      local += rule.weights[q] * v;
    }
    total += vol * local;
  }
  return total;
}

/// ∫ of a Q1 field, exact.
template <int Dim>
double field_integral(const ScalarField<Dim>& f) {
  const auto& mesh = f.mesh();
  const double vol = mesh.element_volume();
  double total = 0.0;
  for (std::size_t e = 0; e < mesh.element_count(); ++e) {
    if (!mesh.element_active(e)) continue;
    const auto v = f.element_values(mesh.element_multi(e));
    double s = 0.0;
    for (double c : v) s += c;
    total += vol * s / corner_count<Dim>;
  }
  return total;
}

template <int Dim>
double active_volume(const StructuredMesh<Dim>& mesh) {
  return mesh.element_volume() * static_cast<double>(mesh.active_element_count());
}

}  // namespace homog

#endif  // HOMOG_GRID_HPP
