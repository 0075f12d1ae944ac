#ifndef HOMOG_SOLVE_HPP
#define HOMOG_SOLVE_HPP

// Oscillating fine-scale solver, homogenized solver and the first-order
// two-scale reconstruction Φ + ε Σ Q_ε(∂_iΦ) χ_i({·/ε}).

#include <array>
#include <functional>
#include <string>
#include <type_traits>
#include <utility>
#include <variant>

#include "homog/cell.hpp"
#include "homog/coeff.hpp"
#include "homog/grid.hpp"
#include "homog/sparse.hpp"
#include "homog/unfold.hpp"

namespace homog {

enum class BoundaryKind { dirichlet_full, neumann_full };

inline std::string to_string(BoundaryKind b) {
  return b == BoundaryKind::dirichlet_full ? "dirichlet_full" : "neumann_full";
}

inline BoundaryKind boundary_from_string(const std::string& s) {
  if (s == "dirichlet_full") return BoundaryKind::dirichlet_full;
  if (s == "neumann_full") return BoundaryKind::neumann_full;
  throw Error("unknown boundary condition '" + s + "'");
}

/// Right-hand side: analytic (sampled at quadrature points) or a nodal field
/// (interpolated).
template <int Dim>
using Source = std::variant<std::function<double(const Vec<Dim>&)>, ScalarField<Dim>>;

template <int Dim>
struct Domain {
  Vec<Dim> origin{};
  Vec<Dim> extent = [] {
    Vec<Dim> l{};
    l.fill(1.0);
    return l;
  }();
  Shape shape = Shape::box;
};

template <int Dim>
struct ProblemInstance {
  Domain<Dim> domain;
  CoefficientField<Dim> coefficient;
  Source<Dim> rhs;
  BoundaryKind bc = BoundaryKind::dirichlet_full;
  /// ε = 1/periods.
  int periods = 1;

  double epsilon() const { return 1.0 / periods; }
};

struct SolveInfo {
  int iterations = 0;
  double relative_residual = 0.0;
  int dofs = 0;
};

/// Fine mesh with m elements per ε-period along each axis.
template <int Dim>
StructuredMesh<Dim> fine_mesh(const Domain<Dim>& domain, int periods, int points_per_period) {
  if (points_per_period < 1) throw Error("points per period must be positive");
  Index<Dim> div{};
  for (int k = 0; k < Dim; ++k) {
    const double cells = domain.extent[k] * periods;
    if (std::abs(cells - std::round(cells)) > 1e-9)
      throw AlignmentError("domain extent is not a multiple of ε");
    div[k] = static_cast<int>(std::lround(cells)) * points_per_period;
  }
  return StructuredMesh<Dim>(domain.origin, domain.extent, div, domain.shape);
}

namespace detail {

template <int Dim>
auto source_integrand(const std::type_identity_t<Source<Dim>>& f, const StructuredMesh<Dim>& mesh,
                      const QuadratureRule<Dim>& rule) {
  const auto* field = std::get_if<ScalarField<Dim>>(&f);
  const bool same = field && field->mesh().same_layout(mesh);
  return [&f, field, same, &rule](const Index<Dim>& e, std::size_t q, const Vec<Dim>& x) {
    if (!field) return std::get<0>(f)(x);
    if (same) return element_value<Dim>(field->element_values(e), rule.points[q]);
    return eval_field(*field, x);
  };
}

template <int Dim, class Sampler>
ScalarField<Dim> solve_elliptic(const StructuredMesh<Dim>& mesh, Sampler&& sampler,
                                const std::type_identity_t<Source<Dim>>& f, BoundaryKind bc, double rel_tol,
                                SolveInfo* info) {
  const auto rule = gauss_rule<Dim>(2);
  auto fsample = source_integrand(f, mesh, rule);
  DofMap dofs = bc == BoundaryKind::dirichlet_full ? DofMap::dirichlet_boundary(mesh)
                                                   : DofMap::zero_mean(mesh);
  if (bc == BoundaryKind::neumann_full) {
    const TabulatedRule<Dim> tab(rule);
    double total = 0.0;
    for (std::size_t e = 0; e < mesh.element_count(); ++e) {
      if (!mesh.element_active(e)) continue;
      const auto ei = mesh.element_multi(e);
      double local = 0.0;
      for (std::size_t q = 0; q < rule.size(); ++q)
        local += rule.weights[q] * fsample(ei, q, mesh.element_point(ei, rule.points[q]));
      total += mesh.element_volume() * local;
    }
    if (std::abs(total) > 1e-10)
      throw Error("neumann_full requires a zero-mean right-hand side, got ∫f = " + format_number(total));
  }
  const auto system = assemble_stiffness(mesh, sampler, std::move(dofs), rule);
  const auto rhs = assemble_load(mesh, system.dofs, [&](const Index<Dim>& e, std::size_t q, const Vec<Dim>& x) {
    return std::make_pair(fsample(e, q, x), Vec<Dim>{});
  }, rule);
  int widest = 1;
  for (int k = 0; k < Dim; ++k) widest = std::max(widest, mesh.divisions()[k]);
  auto result = cg_solve(system, rhs, rel_tol, structured_max_iterations(system.dimension(), widest));
  if (info) *info = SolveInfo{result.iterations, result.relative_residual, system.dimension()};
  ScalarField<Dim> u(mesh, system.dofs.scatter(result.x));
  if (bc == BoundaryKind::neumann_full) {
    const double mean = field_integral(u) / active_volume(mesh);
    for (std::size_t n = 0; n < mesh.node_count(); ++n)
      if (system.dofs.node_to_dof[n] >= 0) u[n] -= mean;
  }
  return u;
}

}  // namespace detail

/// Q1 solution of ∫ A({x/ε}) ∇φ·∇u = ∫ f u on the fine mesh with m
/// elements per period.
template <int Dim>
ScalarField<Dim> solve_fine(const ProblemInstance<Dim>& instance, int points_per_period,
                            double rel_tol = 1e-10, SolveInfo* info = nullptr) {
  if (points_per_period < 4) throw Error("solve_fine needs at least 4 points per period");
  const auto mesh = fine_mesh(instance.domain, instance.periods, points_per_period);
  const double n = instance.periods;
  const auto& a = instance.coefficient;
  auto sampler = [&](const Vec<Dim>& x) {
    Vec<Dim> y{};
    for (int k = 0; k < Dim; ++k) y[k] = x[k] * n;
    return a.sample(y);
  };
  return detail::solve_elliptic(mesh, sampler, instance.rhs, instance.bc, rel_tol, info);
}

/// Q1 solution of ∫ 𝒜 ∇Φ·∇U = ∫ f U; zero mean under neumann_full.
template <int Dim>
ScalarField<Dim> solve_homogenized(const HomogenizedTensor<Dim>& tensor,
                                   const std::type_identity_t<Source<Dim>>& f,
                                   BoundaryKind bc, const StructuredMesh<Dim>& mesh,
                                   double rel_tol = 1e-10, SolveInfo* info = nullptr) {
  const Mat<Dim> m = tensor.matrix;
  return detail::solve_elliptic(mesh, [&](const Vec<Dim>&) { return m; }, f, bc, rel_tol, info);
}

/// Nodal ∂Φ/∂x_i: average of the centre gradients of the adjacent active
/// elements (uniform mesh, so volume weights are equal).
template <int Dim>
std::array<ScalarField<Dim>, Dim> nodal_gradient(const ScalarField<Dim>& phi) {
  const auto& mesh = phi.mesh();
  auto out = detail::zero_fields(mesh);
  std::vector<int> count(mesh.node_count(), 0);
  Vec<Dim> center{};
  center.fill(0.5);
  for (std::size_t e = 0; e < mesh.element_count(); ++e) {
    if (!mesh.element_active(e)) continue;
    const auto ei = mesh.element_multi(e);
    const auto g = element_gradient<Dim>(phi.element_values(ei), center, mesh.spacing());
    for (auto n : mesh.element_nodes(ei)) {
      for (int k = 0; k < Dim; ++k) out[k][n] += g[k];
      ++count[n];
    }
  }
  for (std::size_t n = 0; n < mesh.node_count(); ++n)
    if (count[n] > 0)
      for (int k = 0; k < Dim; ++k) out[k][n] /= count[n];
  return out;
}

template <int Dim>
class Reconstruction {
 public:
  Reconstruction(ScalarField<Dim> base, CorrectorSet<Dim> correctors, CellIndexMap<Dim> map,
                 std::array<ScalarField<Dim>, Dim> q_derivatives)
      : base_(std::move(base)),
        correctors_(std::move(correctors)),
        map_(std::move(map)),
        q_derivatives_(std::move(q_derivatives)) {}

  const ScalarField<Dim>& base() const { return base_; }
  const CorrectorSet<Dim>& correctors() const { return correctors_; }
  const CellIndexMap<Dim>& map() const { return map_; }
  double epsilon() const { return map_.epsilon(); }
  const std::array<ScalarField<Dim>, Dim>& q_derivatives() const { return q_derivatives_; }

  /// Φ(x) + ε Σ_i Q_ε(∂_iΦ)(x) χ_i({x/ε})
  double value(const Vec<Dim>& x) const {
    const auto y = split_point<Dim>(x, epsilon()).second;
    double v = eval_field(base_, x);
    for (int i = 0; i < Dim; ++i)
      v += epsilon() * eval_field(q_derivatives_[i], x) * eval_field(correctors_.chi[i], y);
    return v;
  }

  /// ∇Φ(x) + Σ_i Q_ε(∂_iΦ)(x) ∇_yχ_i({x/ε})
  Vec<Dim> corrected_gradient(const Vec<Dim>& x) const {
    const auto y = split_point<Dim>(x, epsilon()).second;
    Vec<Dim> g = eval_gradient(base_, x);
    for (int i = 0; i < Dim; ++i) {
      const double q = eval_field(q_derivatives_[i], x);
      const auto gy = eval_gradient(correctors_.chi[i], y);
      for (int k = 0; k < Dim; ++k) g[k] += q * gy[k];
    }
    return g;
  }

 private:
  ScalarField<Dim> base_;
  CorrectorSet<Dim> correctors_;
  CellIndexMap<Dim> map_;
  std::array<ScalarField<Dim>, Dim> q_derivatives_;
};

template <int Dim>
Reconstruction<Dim> reconstruct(const ScalarField<Dim>& phi0, const CorrectorSet<Dim>& correctors,
                                const CellIndexMap<Dim>& map) {
  for (int k = 0; k < Dim; ++k)
    if (correctors.cell_mesh.divisions()[k] != map.per_cell()[k])
      throw Error("corrector cell mesh has " + std::to_string(correctors.cell_mesh.divisions()[k]) +
                  " divisions but the fine mesh has " + std::to_string(map.per_cell()[k]) +
                  " elements per period");
  ScalarField<Dim> base = phi0.mesh().same_layout(map.mesh())
                              ? phi0
                              : interpolate(map.mesh(), [&](const Vec<Dim>& x) { return eval_field(phi0, x); });
  const auto grads = nodal_gradient(base);
  auto q = detail::zero_fields(map.mesh());
  for (int i = 0; i < Dim; ++i) q[i] = scale_split(grads[i], map).q_part;
  return Reconstruction<Dim>(std::move(base), correctors, map, std::move(q));
}

}  // namespace homog

#endif  // HOMOG_SOLVE_HPP
