#ifndef HOMOG_CELL_HPP
#define HOMOG_CELL_HPP

// Periodic corrector cell problems on Y = (0,1)^n and the homogenized tensor.

#include <array>
#include <string>
#include <utility>

#include "homog/coeff.hpp"
#include "homog/grid.hpp"
#include "homog/sparse.hpp"

namespace homog {

template <int Dim>
struct CorrectorSet {
  StructuredMesh<Dim> cell_mesh;
  std::array<ScalarField<Dim>, Dim> chi;
  std::array<ScalarField<Dim>, Dim> chi_adjoint;
  CoefficientField<Dim> coefficient;
  Ellipticity ellipticity;
};

template <int Dim>
struct HomogenizedTensor {
  Mat<Dim> matrix{};
  Ellipticity ellipticity;
};

namespace detail {

template <int Dim>
std::array<ScalarField<Dim>, Dim> zero_fields(const StructuredMesh<Dim>& mesh) {
  if constexpr (Dim == 1) {
    return {ScalarField<Dim>(mesh)};
  } else {
    return {ScalarField<Dim>(mesh), ScalarField<Dim>(mesh)};
  }
}

/// Solves ∫_Y B ∇(χ + y_i)·∇ψ = 0 for every i with B the given sampler,
/// returning zero-mean periodic nodal fields.
template <int Dim, class Sampler>
std::array<ScalarField<Dim>, Dim> solve_cell_problems(const StructuredMesh<Dim>& cell_mesh,
                                                     Sampler&& sampler, double rel_tol,
                                                     int max_iter) {
  const auto system = assemble_stiffness(cell_mesh, sampler, DofMap::periodic(cell_mesh));
  auto out = zero_fields(cell_mesh);
  for (int i = 0; i < Dim; ++i) {
    // rhs_a = −∫ B e_i · ∇N_a
    const auto rhs = assemble_load(cell_mesh, system.dofs, [&](const Index<Dim>&, std::size_t,
                                                               const Vec<Dim>& y) {
      const Mat<Dim> b = sampler(y);
      Vec<Dim> flux{};
      for (int k = 0; k < Dim; ++k) flux[k] = -b[k][i];
      return std::make_pair(0.0, flux);
    });
    auto result = cg_solve(system, rhs, rel_tol, max_iter);
    // On a uniform periodic mesh every unknown carries weight |Y|/dofs, so
    // the nodal mean of the unknowns is the integral mean of the Q1 field.
    detail::remove_mean(result.x);
    out[i] = ScalarField<Dim>(cell_mesh, system.dofs.scatter(result.x));
  }
  return out;
}

}  // namespace detail

/// Default iteration cap for cell solves.
inline int cell_max_iterations(int dof_count, int divisions_per_axis) {
  return structured_max_iterations(dof_count, divisions_per_axis);
}

template <int Dim>
CorrectorSet<Dim> solve_correctors(const CoefficientField<Dim>& field,
                                   const StructuredMesh<Dim>& cell_mesh,
                                   double rel_tol = 1e-10) {
  for (int k = 0; k < Dim; ++k)
    if (cell_mesh.origin()[k] != 0.0 || cell_mesh.extent()[k] != 1.0 || cell_mesh.has_mask())
      throw Error("cell mesh must cover Y = (0,1)^n");
  const Ellipticity ell = validate_ellipticity(field);
  int dofs = 1;
  int widest = 1;
  for (int k = 0; k < Dim; ++k) {
    dofs *= cell_mesh.divisions()[k];
    widest = std::max(widest, cell_mesh.divisions()[k]);
  }
  const int max_iter = cell_max_iterations(dofs, widest);

  auto direct = [&](const Vec<Dim>& y) { return field.sample(y); };
  auto chi = detail::solve_cell_problems(cell_mesh, direct, rel_tol, max_iter);
  auto chi_adjoint = chi;
  if (!field.symmetric()) {
    auto transposed = [&](const Vec<Dim>& y) { return transpose<Dim>(field.sample(y)); };
    chi_adjoint = detail::solve_cell_problems(cell_mesh, transposed, rel_tol, max_iter);
  }
  return CorrectorSet<Dim>{cell_mesh, std::move(chi), std::move(chi_adjoint), field, ell};
}

/// 𝒜_ij = (1/|Y|) ∫_Y (e_i + ∇χ_i) · A (e_j + ∇χ_j), |Y| = 1.
template <int Dim>
HomogenizedTensor<Dim> homogenized_tensor(const CoefficientField<Dim>& field,
                                          const CorrectorSet<Dim>& correctors,
                                          const QuadratureRule<Dim>& rule = gauss_rule<Dim>(2)) {
  const auto& mesh = correctors.cell_mesh;
  for (int i = 0; i < Dim; ++i)
    if (!correctors.chi[i].mesh().same_layout(mesh))
      throw Error("corrector fields do not live on the corrector cell mesh");
  const TabulatedRule<Dim> tab(rule);
  const double vol = mesh.element_volume();
  Mat<Dim> total{};
  for (std::size_t e = 0; e < mesh.element_count(); ++e) {
    const auto ei = mesh.element_multi(e);
    std::array<std::array<double, corner_count<Dim>>, Dim> cv{};
    for (int i = 0; i < Dim; ++i) cv[i] = correctors.chi[i].element_values(ei);
    Mat<Dim> local{};
    for (std::size_t q = 0; q < rule.size(); ++q) {
      const Mat<Dim> a = field.sample(mesh.element_point(ei, rule.points[q]));
      std::array<Vec<Dim>, Dim> g{};
      for (int i = 0; i < Dim; ++i) {
        g[i] = element_gradient<Dim>(cv[i], rule.points[q], mesh.spacing());
        g[i][i] += 1.0;
      }
      for (int i = 0; i < Dim; ++i)
        for (int j = 0; j < Dim; ++j)
          local[i][j] += tab.rule.weights[q] * dot<Dim>(g[i], apply<Dim>(a, g[j]));
    }
    for (int i = 0; i < Dim; ++i)
      for (int j = 0; j < Dim; ++j) total[i][j] += vol * local[i][j];
  }
  return HomogenizedTensor<Dim>{total, correctors.ellipticity};
}

/// Flux form 𝒜_ij = ∫_Y e_i · A (e_j + ∇χ_j); agrees with the energy form up
/// to the Galerkin orthogonality of the corrector solve.
template <int Dim>
Mat<Dim> homogenized_tensor_flux_form(const CoefficientField<Dim>& field,
                                      const CorrectorSet<Dim>& correctors) {
  const auto& mesh = correctors.cell_mesh;
  const auto rule = gauss_rule<Dim>(2);
  const double vol = mesh.element_volume();
  Mat<Dim> total{};
  for (std::size_t e = 0; e < mesh.element_count(); ++e) {
    const auto ei = mesh.element_multi(e);
    for (std::size_t q = 0; q < rule.size(); ++q) {
      const Mat<Dim> a = field.sample(mesh.element_point(ei, rule.points[q]));
      for (int j = 0; j < Dim; ++j) {
        Vec<Dim> g = element_gradient<Dim>(correctors.chi[j].element_values(ei), rule.points[q],
                                           mesh.spacing());
        g[j] += 1.0;
        const Vec<Dim> flux = apply<Dim>(a, g);
        for (int i = 0; i < Dim; ++i) total[i][j] += vol * rule.weights[q] * flux[i];
      }
    }
  }
  return total;
}

}  // namespace homog

#endif  // HOMOG_CELL_HPP
