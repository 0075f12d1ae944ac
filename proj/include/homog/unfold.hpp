#ifndef HOMOG_UNFOLD_HPP
#define HOMOG_UNFOLD_HPP

// Two-scale operators on ε-lattices nested in a structured fine mesh:
// integer/fractional splitting, unfolding T_ε, averaging U_ε, cell means,
// scale splitting Q_ε / R_ε, boundary layers and distance weights.
//
// ε is restricted to 1/N with the fine mesh refining the lattice, so every
// fine element lies in exactly one ε-cell and Ω_ε = Ω.

#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <string>
#include <utility>
#include <vector>

#include "homog/grid.hpp"

namespace homog {

/// x = ε·ξ + ε·y with ξ integer and y in [0,1)^n.
template <int Dim>
std::pair<Index<Dim>, Vec<Dim>> split_point(const Vec<Dim>& x, double epsilon) {
  if (!(epsilon > 0.0)) throw Error("epsilon must be positive");
  Index<Dim> xi{};
  Vec<Dim> y{};
  for (int k = 0; k < Dim; ++k) {
    const double t = x[k] / epsilon;
    double f = std::floor(t);
    double frac = t - f;
    if (frac >= 1.0) {
      f += 1.0;
      frac = 0.0;
    }
    xi[k] = static_cast<int>(f);
    y[k] = frac;
  }
  return {xi, y};
}

// ----------------------------------------------------------------------------
//                               CellIndexMap
// ----------------------------------------------------------------------------

template <int Dim>
class CellIndexMap {
 public:
  CellIndexMap(const StructuredMesh<Dim>& mesh, double epsilon) : mesh_(mesh), epsilon_(epsilon) {
    if (!(epsilon > 0.0) || !std::isfinite(epsilon)) throw AlignmentError("epsilon must be positive");
    const double inv = 1.0 / epsilon;
    periods_ = static_cast<int>(std::lround(inv));
    if (periods_ < 1 || std::abs(inv - periods_) > 1e-9 * std::max(1.0, inv))
      throw AlignmentError("epsilon = " + format_number(epsilon) + " is not of the form 1/N");
    cell_total_ = 1;
    for (int k = 0; k < Dim; ++k) {
      const double o = mesh.origin()[k] * periods_;
      const double l = mesh.extent()[k] * periods_;
      if (std::abs(o - std::round(o)) > 1e-9 || std::abs(l - std::round(l)) > 1e-9 || std::round(l) < 1)
        throw AlignmentError("domain is not a union of ε-cells for ε = 1/" + std::to_string(periods_));
      first_[k] = static_cast<int>(std::lround(o));
      cells_[k] = static_cast<int>(std::lround(l));
      if (mesh.divisions()[k] % cells_[k] != 0)
        throw AlignmentError("fine mesh is not nested in the ε-lattice (" +
                             std::to_string(mesh.divisions()[k]) + " divisions, " +
                             std::to_string(cells_[k]) + " cells on axis " + std::to_string(k) + ")");
      per_cell_[k] = mesh.divisions()[k] / cells_[k];
      cell_total_ *= static_cast<std::size_t>(cells_[k]);
    }
    active_.assign(cell_total_, 0);
    for (std::size_t c = 0; c < cell_total_; ++c) {
      const auto ci = cell_multi(c);
      std::size_t on = 0;
      std::size_t count = 0;
      for_each_fine_element(ci, [&](const Index<Dim>& e) {
        on += mesh.element_active(e) ? 1 : 0;
        ++count;
      });
      if (on != 0 && on != count)
        throw AlignmentError("active region is not a union of ε-cells");
      active_[c] = on == count ? 1 : 0;
    }
  }

  double epsilon() const { return epsilon_; }
  /// N with ε = 1/N.
  int periods() const { return periods_; }
  const StructuredMesh<Dim>& mesh() const { return mesh_; }
  const Index<Dim>& cells() const { return cells_; }
  /// Fine elements per ε-cell along each axis.
  const Index<Dim>& per_cell() const { return per_cell_; }
  std::size_t cell_count() const { return cell_total_; }
  bool cell_active(std::size_t c) const { return active_[c] != 0; }

  bool cell_active(const Index<Dim>& c) const {
    for (int k = 0; k < Dim; ++k)
      if (c[k] < 0 || c[k] >= cells_[k]) return false;
    return cell_active(cell_index(c));
  }

  /// Global lattice index ξ of a local cell index.
  Index<Dim> lattice_index(const Index<Dim>& c) const {
    Index<Dim> xi{};
    for (int k = 0; k < Dim; ++k) xi[k] = first_[k] + c[k];
    return xi;
  }

  /// Physical lattice point εξ for local lattice node c.
  Vec<Dim> lattice_point(const Index<Dim>& c) const {
    Vec<Dim> x{};
    for (int k = 0; k < Dim; ++k) x[k] = static_cast<double>(first_[k] + c[k]) / periods_;
    return x;
  }

  std::size_t cell_index(const Index<Dim>& c) const {
    std::size_t idx = 0;
    std::size_t stride = 1;
    for (int k = 0; k < Dim; ++k) {
      idx += stride * static_cast<std::size_t>(c[k]);
      stride *= static_cast<std::size_t>(cells_[k]);
    }
    return idx;
  }

  Index<Dim> cell_multi(std::size_t c) const {
    Index<Dim> i{};
    for (int k = 0; k < Dim; ++k) {
      i[k] = static_cast<int>(c % static_cast<std::size_t>(cells_[k]));
      c /= static_cast<std::size_t>(cells_[k]);
    }
    return i;
  }

  /// Cell containing fine element e (integer arithmetic).
  Index<Dim> cell_of_element(const Index<Dim>& e) const {
    Index<Dim> c{};
    for (int k = 0; k < Dim; ++k) c[k] = e[k] / per_cell_[k];
    return c;
  }

  template <class F>
  void for_each_fine_element(const Index<Dim>& c, F&& f) const {
    Index<Dim> local{};
    while (true) {
      Index<Dim> e{};
      for (int k = 0; k < Dim; ++k) e[k] = c[k] * per_cell_[k] + local[k];
      f(e);
      int k = 0;
      while (k < Dim && ++local[k] == per_cell_[k]) local[k++] = 0;
      if (k == Dim) break;
    }
  }

  /// For a fine node: an active ε-cell containing it, and its local Y
  /// coordinate there. The forward cell is preferred; nodes on the far side
  /// of the lattice or next to inactive cells fall back to a neighbour with
  /// y_k = 1. Returns false when no active cell contains the node.
  bool locate_node(const Index<Dim>& node, Index<Dim>& cell, Vec<Dim>& y) const {
    Index<Dim> base{};
    Index<Dim> rem{};
    for (int k = 0; k < Dim; ++k) {
      base[k] = node[k] / per_cell_[k];
      rem[k] = node[k] % per_cell_[k];
    }
    for (int a = 0; a < corner_count<Dim>; ++a) {
      Index<Dim> c = base;
      bool ok = true;
      for (int k = 0; k < Dim; ++k) {
        if ((a >> k) & 1) {
          if (rem[k] != 0) {
            ok = false;
            break;
          }
          c[k] -= 1;
        }
      }
      if (!ok || !cell_active(c)) continue;
      cell = c;
      for (int k = 0; k < Dim; ++k)
        y[k] = ((a >> k) & 1) ? 1.0 : static_cast<double>(rem[k]) / per_cell_[k];
      return true;
    }
    return false;
  }

 private:
  StructuredMesh<Dim> mesh_;
  double epsilon_;
  int periods_ = 1;
  Index<Dim> first_{};
  Index<Dim> cells_{};
  Index<Dim> per_cell_{};
  std::size_t cell_total_ = 0;
  std::vector<std::uint8_t> active_;
};

// ----------------------------------------------------------------------------
//                          Unfolding and averaging
// ----------------------------------------------------------------------------

/// Per-cell Y-grids (resolution r, (r+1)^n nodes each) holding (ξ, y) ↦ value.
/// Inactive cells hold zeros.
template <int Dim>
class UnfoldedField {
 public:
  UnfoldedField(CellIndexMap<Dim> map, int resolution)
      : map_(std::move(map)), resolution_(resolution) {
    if (resolution_ < 1) throw Error("unfolded Y-grid resolution must be positive");
    per_cell_ = 1;
    for (int k = 0; k < Dim; ++k) per_cell_ *= static_cast<std::size_t>(resolution_ + 1);
    values_.assign(per_cell_ * map_.cell_count(), 0.0);
  }

  /// V(ξ, y) = g(ξ, y) sampled on the Y-grid of every active cell.
  template <class G>
  static UnfoldedField from_function(CellIndexMap<Dim> map, int resolution, G&& g) {
    UnfoldedField u(std::move(map), resolution);
    for (std::size_t c = 0; c < u.map_.cell_count(); ++c) {
      if (!u.map_.cell_active(c)) continue;
      const auto ci = u.map_.cell_multi(c);
      for (std::size_t j = 0; j < u.per_cell_; ++j) u.values_[c * u.per_cell_ + j] = g(ci, u.grid_point(j));
    }
    return u;
  }

  const CellIndexMap<Dim>& map() const { return map_; }
  int resolution() const { return resolution_; }
  std::size_t nodes_per_cell() const { return per_cell_; }

  Vec<Dim> grid_point(std::size_t j) const {
    Vec<Dim> y{};
    for (int k = 0; k < Dim; ++k) {
      y[k] = static_cast<double>(j % static_cast<std::size_t>(resolution_ + 1)) / resolution_;
      j /= static_cast<std::size_t>(resolution_ + 1);
    }
    return y;
  }

  double grid_value(std::size_t cell, std::size_t j) const { return values_[cell * per_cell_ + j]; }
  double& grid_value(std::size_t cell, std::size_t j) { return values_[cell * per_cell_ + j]; }

  /// Q1 interpolation on the Y-grid of `cell`, y in [0,1]^n.
  double value(const Index<Dim>& cell, const Vec<Dim>& y) const {
    Index<Dim> g{};
    Vec<Dim> ref{};
    local_element(y, g, ref);
    return element_value<Dim>(corner_values(cell, g), ref);
  }

  /// ∇_y of the Y-grid interpolant.
  Vec<Dim> gradient(const Index<Dim>& cell, const Vec<Dim>& y) const {
    Index<Dim> g{};
    Vec<Dim> ref{};
    local_element(y, g, ref);
    Vec<Dim> h{};
    h.fill(1.0 / resolution_);
    return element_gradient<Dim>(corner_values(cell, g), ref, h);
  }

  /// ∫_Y of the Y-grid interpolant of one cell (exact for Q1).
  double cell_integral(std::size_t cell) const {
    const auto r = static_cast<std::size_t>(resolution_);
    std::size_t elems = 1;
    for (int k = 0; k < Dim; ++k) elems *= r;
    double vol = 1.0;
    for (int k = 0; k < Dim; ++k) vol /= resolution_;
    double total = 0.0;
    for (std::size_t e = 0; e < elems; ++e) {
      Index<Dim> g{};
      std::size_t rem = e;
      for (int k = 0; k < Dim; ++k) {
        g[k] = static_cast<int>(rem % r);
        rem /= r;
      }
      const auto cv = corner_values(map_.cell_multi(cell), g);
      double s = 0.0;
      for (double v : cv) s += v;
      total += vol * s / corner_count<Dim>;
    }
    return total;
  }

 private:
  void local_element(const Vec<Dim>& y, Index<Dim>& g, Vec<Dim>& ref) const {
    for (int k = 0; k < Dim; ++k) {
      const double t = y[k] * resolution_;
      g[k] = std::clamp(static_cast<int>(std::floor(t)), 0, resolution_ - 1);
      ref[k] = std::clamp(t - g[k], 0.0, 1.0);
    }
  }

  std::array<double, corner_count<Dim>> corner_values(const Index<Dim>& cell, const Index<Dim>& g) const {
    const std::size_t c = map_.cell_index(cell);
    std::array<double, corner_count<Dim>> v{};
    for (int a = 0; a < corner_count<Dim>; ++a) {
      std::size_t j = 0;
      std::size_t stride = 1;
      for (int k = 0; k < Dim; ++k) {
        j += stride * static_cast<std::size_t>(g[k] + ((a >> k) & 1));
        stride *= static_cast<std::size_t>(resolution_ + 1);
      }
      v[a] = values_[c * per_cell_ + j];
    }
    return v;
  }

  CellIndexMap<Dim> map_;
  int resolution_;
  std::size_t per_cell_ = 1;
  std::vector<double> values_;
};

/// T_ε(φ)(ξ, y) = φ(εξ + εy), sampled on the Y-grid of every active cell.
template <int Dim>
UnfoldedField<Dim> unfold(const ScalarField<Dim>& field, const CellIndexMap<Dim>& map,
                          int y_resolution) {
  if (!field.mesh().same_layout(map.mesh()))
    throw AlignmentError("field does not live on the mesh of the cell index map");
  return UnfoldedField<Dim>::from_function(map, y_resolution, [&](const Index<Dim>& c, const Vec<Dim>& y) {
    const auto corner = map.lattice_point(c);
    Vec<Dim> x{};
    for (int k = 0; k < Dim; ++k) x[k] = corner[k] + map.epsilon() * y[k];
    return eval_field(field, x);
  });
}

/// U_ε(V)(x) = V(cell of x, {x/ε}) for x-independent-per-cell V, at every
/// active fine node.
template <int Dim>
ScalarField<Dim> average(const UnfoldedField<Dim>& ufield) {
  const auto& map = ufield.map();
  const auto& mesh = map.mesh();
  ScalarField<Dim> out(mesh);
  Index<Dim> cell{};
  Vec<Dim> y{};
  for (std::size_t n = 0; n < mesh.node_count(); ++n) {
    const auto i = mesh.node_multi(n);
    if (!mesh.node_active(i)) continue;
    if (!map.locate_node(i, cell, y)) continue;
    out[n] = ufield.value(cell, y);
  }
  return out;
}

/// M_Y^ε(φ): exact mean of the Q1 field over each ε-cell (0 on inactive cells).
template <int Dim>
std::vector<double> cell_means(const ScalarField<Dim>& field, const CellIndexMap<Dim>& map) {
  if (!field.mesh().same_layout(map.mesh()))
    throw AlignmentError("field does not live on the mesh of the cell index map");
  std::vector<double> means(map.cell_count(), 0.0);
  for (std::size_t c = 0; c < map.cell_count(); ++c) {
    if (!map.cell_active(c)) continue;
    double s = 0.0;
    std::size_t count = 0;
    map.for_each_fine_element(map.cell_multi(c), [&](const Index<Dim>& e) {
      const auto v = field.element_values(e);
      double es = 0.0;
      for (double x : v) es += x;
      s += es / corner_count<Dim>;
      ++count;
    });
    means[c] = s / static_cast<double>(count);
  }
  return means;
}

template <int Dim>
struct ScaleSplit {
  ScalarField<Dim> q_part;
  ScalarField<Dim> r_part;
};

/// Q_ε(φ): Q1 interpolation over the ε-lattice of the node values
/// εξ ↦ mean of φ over the forward cell ε(ξ+Y). Lattice nodes whose forward
/// cell leaves Ω take the mean of the first active cell among ξ − {0,1}^n
/// (the componentwise index clamp on boxes). R_ε(φ) = φ − Q_ε(φ).
template <int Dim>
ScaleSplit<Dim> scale_split(const ScalarField<Dim>& field, const CellIndexMap<Dim>& map) {
  const auto means = cell_means(field, map);
  const auto& cells = map.cells();
  Index<Dim> lattice_dims{};
  std::size_t lattice_total = 1;
  for (int k = 0; k < Dim; ++k) {
    lattice_dims[k] = cells[k] + 1;
    lattice_total *= static_cast<std::size_t>(lattice_dims[k]);
  }
  auto lattice_index = [&](const Index<Dim>& p) {
    std::size_t idx = 0;
    std::size_t stride = 1;
    for (int k = 0; k < Dim; ++k) {
      idx += stride * static_cast<std::size_t>(p[k]);
      stride *= static_cast<std::size_t>(lattice_dims[k]);
    }
    return idx;
  };
  std::vector<double> nodal(lattice_total, 0.0);
  for (std::size_t l = 0; l < lattice_total; ++l) {
    Index<Dim> p{};
    std::size_t rem = l;
    for (int k = 0; k < Dim; ++k) {
      p[k] = static_cast<int>(rem % static_cast<std::size_t>(lattice_dims[k]));
      rem /= static_cast<std::size_t>(lattice_dims[k]);
    }
    for (int a = 0; a < corner_count<Dim>; ++a) {
      Index<Dim> c = p;
      for (int k = 0; k < Dim; ++k) c[k] -= (a >> k) & 1;
      if (map.cell_active(c)) {
        nodal[l] = means[map.cell_index(c)];
        break;
      }
    }
  }

  const auto& mesh = map.mesh();
  ScalarField<Dim> q(mesh);
  ScalarField<Dim> r(mesh);
  Index<Dim> cell{};
  Vec<Dim> y{};
  for (std::size_t n = 0; n < mesh.node_count(); ++n) {
    const auto i = mesh.node_multi(n);
    if (!mesh.node_active(i) || !map.locate_node(i, cell, y)) continue;
    std::array<double, corner_count<Dim>> cv{};
    for (int a = 0; a < corner_count<Dim>; ++a) {
      Index<Dim> p = cell;
      for (int k = 0; k < Dim; ++k) p[k] += (a >> k) & 1;
      cv[a] = nodal[lattice_index(p)];
    }
    q[n] = element_value<Dim>(cv, y);
    r[n] = field[n] - q[n];
  }
  return {std::move(q), std::move(r)};
}

// ----------------------------------------------------------------------------
//                       Distance to ∂Ω and boundary layers
// ----------------------------------------------------------------------------

/// Euclidean distance from a point of the closed active region to its boundary.
template <int Dim>
double boundary_distance(const StructuredMesh<Dim>& mesh, const Vec<Dim>& x) {
  const auto& o = mesh.origin();
  const auto& l = mesh.extent();
  if (mesh.shape() == Shape::box) {
    double d = std::numeric_limits<double>::infinity();
    for (int k = 0; k < Dim; ++k) d = std::min({d, x[k] - o[k], o[k] + l[k] - x[k]});
    return std::max(d, 0.0);
  }
  if constexpr (Dim == 2) {
    const double x0 = o[0], y0 = o[1], x1 = o[0] + l[0], y1 = o[1] + l[1];
    const double xm = o[0] + 0.5 * l[0], ym = o[1] + 0.5 * l[1];
    const std::array<Vec<2>, 6> v{{{x0, y0}, {x1, y0}, {x1, ym}, {xm, ym}, {xm, y1}, {x0, y1}}};
    double d = std::numeric_limits<double>::infinity();
    for (std::size_t s = 0; s < v.size(); ++s) {
      const auto& a = v[s];
      const auto& b = v[(s + 1) % v.size()];
      const double dx = b[0] - a[0], dy = b[1] - a[1];
      double t = ((x[0] - a[0]) * dx + (x[1] - a[1]) * dy) / (dx * dx + dy * dy);
      t = std::clamp(t, 0.0, 1.0);
      d = std::min(d, std::hypot(x[0] - a[0] - t * dx, x[1] - a[1] - t * dy));
    }
    return d;
  }
  return 0.0;
}

/// Ω̂_{ε,k}: active fine elements whose centre lies within k√n·ε of ∂Ω.
template <int Dim>
std::vector<std::uint8_t> layer_indicator(const CellIndexMap<Dim>& map, int k) {
  if (k < 1 || k > 4) throw Error("layer index k must be in {1,2,3,4}");
  const auto& mesh = map.mesh();
  const double width = k * std::sqrt(static_cast<double>(Dim)) * map.epsilon();
  std::vector<std::uint8_t> mask(mesh.element_count(), 0);
  for (std::size_t e = 0; e < mesh.element_count(); ++e) {
    if (!mesh.element_active(e)) continue;
    mask[e] = boundary_distance(mesh, mesh.element_center(mesh.element_multi(e))) < width ? 1 : 0;
  }
  return mask;
}

enum class WeightKind { rho, rho_eps };

/// Nodal ρ(x) = dist(x, ∂Ω), or ρ_ε = min(ρ/ε, 1).
template <int Dim>
ScalarField<Dim> distance_weight(const StructuredMesh<Dim>& mesh, WeightKind kind,
                                 double epsilon = 1.0) {
  if (kind == WeightKind::rho_eps && !(epsilon > 0.0)) throw Error("epsilon must be positive");
  return interpolate(mesh, [&](const Vec<Dim>& x) {
    const double rho = boundary_distance(mesh, x);
    return kind == WeightKind::rho ? rho : std::min(rho / epsilon, 1.0);
  });
}

}  // namespace homog

#endif  // HOMOG_UNFOLD_HPP
