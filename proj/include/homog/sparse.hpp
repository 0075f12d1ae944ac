#ifndef HOMOG_SPARSE_HPP
#define HOMOG_SPARSE_HPP

// Stiffness assembly on structured meshes and a Jacobi-preconditioned
// conjugate gradient solver.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "homog/grid.hpp"

namespace homog {

enum class ConstraintKind { none, dirichlet, zero_mean, periodic };

/// Node -> unknown map. Eliminated nodes map to -1; periodic slaves map to
/// the unknown of their master. `singular` systems carry the constant mode in
/// their kernel, which the solver projects out.
struct DofMap {
  ConstraintKind kind = ConstraintKind::none;
  std::vector<int> node_to_dof;
  int dof_count = 0;
  bool singular = false;

  template <int Dim>
  static DofMap none(const StructuredMesh<Dim>& mesh) {
    DofMap m;
    m.node_to_dof.assign(mesh.node_count(), -1);
    for (std::size_t n = 0; n < mesh.node_count(); ++n)
      if (mesh.node_active(mesh.node_multi(n))) m.node_to_dof[n] = m.dof_count++;
    return m;
  }

  template <int Dim>
  static DofMap zero_mean(const StructuredMesh<Dim>& mesh) {
    DofMap m = none(mesh);
    m.kind = ConstraintKind::zero_mean;
    m.singular = true;
    return m;
  }

  /// Homogeneous Dirichlet on an explicit node set.
  template <int Dim>
  static DofMap dirichlet(const StructuredMesh<Dim>& mesh, const std::vector<std::size_t>& nodes) {
    std::vector<std::uint8_t> fixed(mesh.node_count(), 0);
    for (auto n : nodes) {
      if (n >= mesh.node_count()) throw Error("dirichlet node index out of range");
      fixed[n] = 1;
    }
    DofMap m;
    m.kind = ConstraintKind::dirichlet;
    m.node_to_dof.assign(mesh.node_count(), -1);
    for (std::size_t n = 0; n < mesh.node_count(); ++n)
      if (!fixed[n] && mesh.node_active(mesh.node_multi(n))) m.node_to_dof[n] = m.dof_count++;
    return m;
  }

  /// Homogeneous Dirichlet on the whole boundary of the active region.
  template <int Dim>
  static DofMap dirichlet_boundary(const StructuredMesh<Dim>& mesh) {
    std::vector<std::size_t> nodes;
    for (std::size_t n = 0; n < mesh.node_count(); ++n)
      if (mesh.node_on_boundary(mesh.node_multi(n))) nodes.push_back(n);
    return dirichlet(mesh, nodes);
  }

  /// Identifies opposite faces: node i maps to (i_k mod d_k). Box meshes only.
  template <int Dim>
  static DofMap periodic(const StructuredMesh<Dim>& mesh) {
    if (mesh.has_mask()) throw Error("periodic constraint requires a box mesh");
    DofMap m;
    m.kind = ConstraintKind::periodic;
    m.singular = true;
    m.node_to_dof.assign(mesh.node_count(), -1);
    const auto& d = mesh.divisions();
    for (std::size_t n = 0; n < mesh.node_count(); ++n) {
      auto i = mesh.node_multi(n);
      int dof = 0;
      int stride = 1;
      for (int k = 0; k < Dim; ++k) {
        dof += stride * (i[k] % d[k]);
        stride *= d[k];
      }
      m.node_to_dof[n] = dof;
    }
    m.dof_count = 1;
    for (int k = 0; k < Dim; ++k) m.dof_count *= d[k];
    return m;
  }

  /// Expands an unknown vector to nodal values (eliminated nodes get 0).
  std::vector<double> scatter(const std::vector<double>& x) const {
    std::vector<double> out(node_to_dof.size(), 0.0);
    for (std::size_t n = 0; n < node_to_dof.size(); ++n)
      if (node_to_dof[n] >= 0) out[n] = x[static_cast<std::size_t>(node_to_dof[n])];
    return out;
  }

  std::vector<double> gather(const std::vector<double>& nodal) const {
    std::vector<double> x(static_cast<std::size_t>(dof_count), 0.0);
    for (std::size_t n = 0; n < node_to_dof.size(); ++n)
      if (node_to_dof[n] >= 0) x[static_cast<std::size_t>(node_to_dof[n])] = nodal[n];
    return x;
  }
};

struct CsrMatrix {
  int rows = 0;
  std::vector<std::size_t> row_offsets{0};
  std::vector<int> cols;
  std::vector<double> vals;

  std::size_t nnz() const { return vals.size(); }

  /// Entry (i, j), 0 when structurally absent.
  double at(int i, int j) const {
    const auto b = cols.begin() + static_cast<std::ptrdiff_t>(row_offsets[i]);
    const auto e = cols.begin() + static_cast<std::ptrdiff_t>(row_offsets[i + 1]);
    const auto it = std::lower_bound(b, e, j);
    if (it == e || *it != j) return 0.0;
    return vals[static_cast<std::size_t>(it - cols.begin())];
  }

  void multiply(const std::vector<double>& x, std::vector<double>& y) const {
    y.resize(static_cast<std::size_t>(rows));
    for (int i = 0; i < rows; ++i) {
      double s = 0.0;
      for (std::size_t p = row_offsets[i]; p < row_offsets[i + 1]; ++p)
        s += vals[p] * x[static_cast<std::size_t>(cols[p])];
      y[static_cast<std::size_t>(i)] = s;
    }
  }

  /// r = b − K x with extended-precision row sums; the recursive CG residual
  /// drifts above the attainable floor on badly conditioned 1D systems.
  void residual(const std::vector<double>& x, const std::vector<double>& b, std::vector<double>& r) const {
    r.resize(static_cast<std::size_t>(rows));
    for (int i = 0; i < rows; ++i) {
      long double s = b[static_cast<std::size_t>(i)];
      for (std::size_t p = row_offsets[i]; p < row_offsets[i + 1]; ++p)
        s -= static_cast<long double>(vals[p]) * x[static_cast<std::size_t>(cols[p])];
      r[static_cast<std::size_t>(i)] = static_cast<double>(s);
    }
  }

  double max_abs() const {
    double m = 0.0;
    for (double v : vals) m = std::max(m, std::abs(v));
    return m;
  }

  double max_asymmetry() const {
    double m = 0.0;
    for (int i = 0; i < rows; ++i)
      for (std::size_t p = row_offsets[i]; p < row_offsets[i + 1]; ++p)
        m = std::max(m, std::abs(vals[p] - at(cols[p], i)));
    return m;
  }
};

struct SparseSystem {
  CsrMatrix matrix;
  DofMap dofs;

  int dimension() const { return matrix.rows; }
};

namespace detail {

/// Sparsity pattern from element connectivity; at most 3^n distinct
/// neighbours per unknown on structured grids.
template <int Dim>
CsrMatrix build_pattern(const StructuredMesh<Dim>& mesh, const DofMap& dofs) {
  constexpr int cap = Dim == 1 ? 3 : 9;
  const auto ndof = static_cast<std::size_t>(dofs.dof_count);
  std::vector<int> slots(ndof * cap, -1);
  std::vector<std::uint8_t> used(ndof, 0);
  auto insert = [&](int r, int c) {
    int* row = &slots[static_cast<std::size_t>(r) * cap];
    auto& u = used[static_cast<std::size_t>(r)];
    for (int s = 0; s < u; ++s)
      if (row[s] == c) return;
    if (u == cap) throw Error("sparsity pattern overflow");
    row[u++] = c;
  };
  for (std::size_t e = 0; e < mesh.element_count(); ++e) {
    if (!mesh.element_active(e)) continue;
    const auto nodes = mesh.element_nodes(mesh.element_multi(e));
    for (int a = 0; a < corner_count<Dim>; ++a) {
      const int r = dofs.node_to_dof[nodes[a]];
      if (r < 0) continue;
      for (int b = 0; b < corner_count<Dim>; ++b) {
        const int c = dofs.node_to_dof[nodes[b]];
        if (c >= 0) insert(r, c);
      }
    }
  }
  CsrMatrix m;
  m.rows = dofs.dof_count;
  m.row_offsets.assign(ndof + 1, 0);
  for (std::size_t r = 0; r < ndof; ++r) m.row_offsets[r + 1] = m.row_offsets[r] + used[r];
  m.cols.resize(m.row_offsets[ndof]);
  m.vals.assign(m.row_offsets[ndof], 0.0);
  for (std::size_t r = 0; r < ndof; ++r) {
    auto* dst = &m.cols[m.row_offsets[r]];
    std::copy_n(&slots[r * cap], used[r], dst);
    std::sort(dst, dst + used[r]);
  }
  return m;
}

inline std::size_t find_entry(const CsrMatrix& m, int r, int c) {
  const auto b = m.cols.begin() + static_cast<std::ptrdiff_t>(m.row_offsets[r]);
  const auto e = m.cols.begin() + static_cast<std::ptrdiff_t>(m.row_offsets[r + 1]);
  return static_cast<std::size_t>(std::lower_bound(b, e, c) - m.cols.begin());
}

}  // namespace detail

/// Discrete form ∫ A ∇u·∇v with A sampled at quadrature points.
///
/// The sampler may return non-symmetric matrices whose skew part integrates
/// to zero against the trial space (e.g. a skew part constant on a periodic
/// cell); the assembled matrix itself must be symmetric. The symmetric part
/// must be positive definite at every quadrature point.
template <int Dim, class Sampler>
SparseSystem assemble_stiffness(const StructuredMesh<Dim>& mesh, Sampler&& sampler,
                                DofMap dofs,
                                const QuadratureRule<Dim>& rule = gauss_rule<Dim>(2)) {
  SparseSystem sys;
  sys.matrix = detail::build_pattern(mesh, dofs);
  const TabulatedRule<Dim> tab(rule);
  const auto& h = mesh.spacing();
  const double vol = mesh.element_volume();
  std::array<std::array<double, corner_count<Dim>>, corner_count<Dim>> local{};
  for (std::size_t e = 0; e < mesh.element_count(); ++e) {
    if (!mesh.element_active(e)) continue;
    const auto ei = mesh.element_multi(e);
    for (auto& row : local) row.fill(0.0);
    for (std::size_t q = 0; q < rule.size(); ++q) {
      const Mat<Dim> a = sampler(mesh.element_point(ei, rule.points[q]));
      if (!all_finite<Dim>(a)) throw Error("coefficient sampler returned non-finite entries");
      if (symmetric_eigen_range<Dim>(a)[0] <= 0.0)
        throw Error("coefficient sampler returned a non-elliptic matrix");
      std::array<Vec<Dim>, corner_count<Dim>> grads{};
      for (int c = 0; c < corner_count<Dim>; ++c)
        for (int k = 0; k < Dim; ++k) grads[c][k] = tab.ref_gradients[q][c][k] / h[k];
      const double w = tab.rule.weights[q] * vol;
      for (int i = 0; i < corner_count<Dim>; ++i) {
        // row i is the test function: ∫ A ∇N_j · ∇N_i
        for (int j = 0; j < corner_count<Dim>; ++j) {
          const Vec<Dim> flux = apply<Dim>(a, grads[j]);
          local[i][j] += w * dot<Dim>(flux, grads[i]);
        }
      }
    }
    const auto nodes = mesh.element_nodes(ei);
    for (int i = 0; i < corner_count<Dim>; ++i) {
      const int r = dofs.node_to_dof[nodes[i]];
      if (r < 0) continue;
      for (int j = 0; j < corner_count<Dim>; ++j) {
        const int c = dofs.node_to_dof[nodes[j]];
        if (c < 0) continue;
        sys.matrix.vals[detail::find_entry(sys.matrix, r, c)] += local[i][j];
      }
    }
  }
  const double scale = sys.matrix.max_abs();
  if (sys.matrix.max_asymmetry() > 1e-13 * scale)
    throw Error("assembled stiffness matrix is not symmetric");
  sys.dofs = std::move(dofs);
  return sys;
}

/// Load vector of  ∫ g_a  with g a per-point vector integrand paired with
/// basis values and gradients: ∫ (s N_a + v·∇N_a).
template <int Dim, class Integrand>
std::vector<double> assemble_load(const StructuredMesh<Dim>& mesh, const DofMap& dofs,
                                  Integrand&& integrand,
                                  const QuadratureRule<Dim>& rule = gauss_rule<Dim>(2)) {
  std::vector<double> b(static_cast<std::size_t>(dofs.dof_count), 0.0);
  const TabulatedRule<Dim> tab(rule);
  const auto& h = mesh.spacing();
  const double vol = mesh.element_volume();
  for (std::size_t e = 0; e < mesh.element_count(); ++e) {
    if (!mesh.element_active(e)) continue;
    const auto ei = mesh.element_multi(e);
    std::array<double, corner_count<Dim>> local{};
    for (std::size_t q = 0; q < rule.size(); ++q) {
      const auto [s, v] = integrand(ei, q, mesh.element_point(ei, rule.points[q]));
      const double w = tab.rule.weights[q] * vol;
      for (int a = 0; a < corner_count<Dim>; ++a) {
        double g = 0.0;
        for (int k = 0; k < Dim; ++k) g += v[k] * tab.ref_gradients[q][a][k] / h[k];
        local[a] += w * (s * tab.values[q][a] + g);
      }
    }
    const auto nodes = mesh.element_nodes(ei);
    for (int a = 0; a < corner_count<Dim>; ++a) {
      const int r = dofs.node_to_dof[nodes[a]];
      if (r >= 0) b[static_cast<std::size_t>(r)] += local[a];
    }
  }
  return b;
}

// ----------------------------------------------------------------------------
//                            Conjugate gradient
// ----------------------------------------------------------------------------

struct CgResult {
  std::vector<double> x;
  int iterations = 0;
  double relative_residual = 0.0;
};

inline int default_max_iterations(int dimension) {
  return static_cast<int>(50.0 * std::sqrt(static_cast<double>(dimension))) + 1000;
}

/// Cap for structured meshes. The generic cap tracks divisions per axis only
/// in 2D; a 1D system of N unknowns needs O(N) iterations.
inline int structured_max_iterations(int dof_count, int divisions_per_axis) {
  return std::max(default_max_iterations(dof_count), 4 * divisions_per_axis + 1000);
}

namespace detail {

inline double dot(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

inline double norm(const std::vector<double>& a) { return std::sqrt(dot(a, a)); }

inline void remove_mean(std::vector<double>& v) {
  if (v.empty()) return;
  double s = 0.0;
  for (double x : v) s += x;
  const double mean = s / static_cast<double>(v.size());
  for (double& x : v) x -= mean;
}

inline double mean_component_norm(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return std::abs(s) / std::sqrt(static_cast<double>(v.size()));
}

}  // namespace detail

/// Solves K x = b to ‖Kx − b‖₂ ≤ rel_tol·‖b‖₂ (residual recomputed from
/// scratch before returning). For singular systems the constant mode is
/// projected out of b and every iterate, and the zero-mean representative
/// is returned.
inline CgResult cg_solve(const SparseSystem& system, std::vector<double> rhs,
                         double rel_tol = 1e-10, int max_iter = -1,
                         std::optional<std::vector<double>> initial = std::nullopt) {
  const auto& K = system.matrix;
  const auto n = static_cast<std::size_t>(K.rows);
  if (rhs.size() != n)
    throw Error("rhs length " + std::to_string(rhs.size()) + " does not match system dimension " +
                std::to_string(n));
  if (max_iter < 0) max_iter = default_max_iterations(K.rows);
  const bool singular = system.dofs.singular;

  CgResult out;
  if (n == 0) return out;
  if (singular) {
    // A load that vanishes in exact arithmetic is pure round-off; its mean is
    // judged against the operator scale instead of its own norm.
    const double bn = detail::norm(rhs);
    const double floor = 1e-13 * K.max_abs() * std::sqrt(static_cast<double>(n));
    if (detail::mean_component_norm(rhs) > 1e-8 * bn + floor)
      throw SolverError("incompatible right-hand side for singular system", 0,
                        detail::mean_component_norm(rhs) / bn);
    detail::remove_mean(rhs);
  }
  const double bnorm = detail::norm(rhs);
  std::vector<double> x = initial ? std::move(*initial) : std::vector<double>(n, 0.0);
  if (x.size() != n) throw Error("initial guess has wrong length");
  if (bnorm == 0.0) {
    out.x.assign(n, 0.0);
    return out;
  }

  std::vector<double> diag(n, 1.0);
  for (std::size_t i = 0; i < n; ++i) {
    const double d = K.at(static_cast<int>(i), static_cast<int>(i));
    if (!(d > 0.0)) throw Error("non-positive diagonal entry in SPD system");
    diag[i] = 1.0 / d;
  }

  std::vector<double> r(n);
  std::vector<double> z(n);
  std::vector<double> p(n);
  std::vector<double> q(n);
  const double target = rel_tol * bnorm;
  int it = 0;
  double achieved = std::numeric_limits<double>::infinity();

  // Outer loop restarts from the true residual when the recursive residual
  // has drifted below tolerance but the true one has not.
  while (true) {
    if (singular) detail::remove_mean(x);
    K.residual(x, rhs, r);
    if (singular) detail::remove_mean(r);
    achieved = detail::norm(r);
    if (achieved <= target) break;
    if (it >= max_iter)
      throw SolverError("conjugate gradient did not converge", it, achieved / bnorm);

    for (std::size_t i = 0; i < n; ++i) z[i] = diag[i] * r[i];
    if (singular) detail::remove_mean(z);
    p = z;
    double rz = detail::dot(r, z);
    const int restart_at = it;
    while (it < max_iter) {
      K.multiply(p, q);
      const double pq = detail::dot(p, q);
      if (!(pq > 0.0)) break;
      const double alpha = rz / pq;
      for (std::size_t i = 0; i < n; ++i) {
        x[i] += alpha * p[i];
        r[i] -= alpha * q[i];
      }
      ++it;
      if (detail::norm(r) <= 0.5 * target) break;
      for (std::size_t i = 0; i < n; ++i) z[i] = diag[i] * r[i];
      if (singular) detail::remove_mean(z);
      const double rz_new = detail::dot(r, z);
      const double beta = rz_new / rz;
      rz = rz_new;
      for (std::size_t i = 0; i < n; ++i) p[i] = z[i] + beta * p[i];
    }
    if (it == restart_at)
      throw SolverError("conjugate gradient breakdown", it, achieved / bnorm);
  }
  if (singular) detail::remove_mean(x);
  out.x = std::move(x);
  out.iterations = it;
  out.relative_residual = achieved / bnorm;
  return out;
}

}  // namespace homog

#endif  // HOMOG_SPARSE_HPP
