#ifndef HOMOG_METRICS_HPP
#define HOMOG_METRICS_HPP

// Error functionals bounded by the homogenization estimates, and log-log
// convergence-rate fits.

#include <cmath>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "homog/solve.hpp"
#include "homog/unfold.hpp"

namespace homog {

template <int Dim>
struct Box {
  Vec<Dim> lower{};
  Vec<Dim> upper{};

  bool contains(const Vec<Dim>& x) const {
    for (int k = 0; k < Dim; ++k)
      if (!(x[k] > lower[k] && x[k] < upper[k])) return false;
    return true;
  }
};

struct ErrorReport {
  double epsilon = 0.0;
  /// ‖φ^ε − Φ‖_{L²(Ω)}
  double e_l2 = 0.0;
  /// ‖∇φ^ε − G‖_{L²(Ω)}, G the corrected gradient
  double e_h1_corr = 0.0;
  /// ‖ρ (∇φ^ε − G)‖_{L²(Ω)}
  double e_weighted = 0.0;
  /// H¹(Ω′) norm of φ^ε − reconstruction, with G as its gradient
  double e_interior = 0.0;
  /// ‖∇φ^ε‖_{L²(Ω̂_{ε,3})}
  double e_layer = 0.0;
  /// Distance from Ω′ to ∂Ω, and whether it meets the 4√n·ε requirement.
  double interior_margin = 0.0;
  bool interior_margin_ok = true;
  /// max ρ over Ω, for the e_weighted ≤ max ρ · e_h1_corr consistency check.
  double max_rho = 0.0;

  static std::string csv_header() { return "epsilon,e_l2,e_h1_corr,e_weighted,e_interior,e_layer"; }

  std::string csv_row() const {
    std::ostringstream os;
    os.precision(17);
    os << epsilon << ',' << e_l2 << ',' << e_h1_corr << ',' << e_weighted << ',' << e_interior << ','
       << e_layer;
    return os.str();
  }
};

inline constexpr std::array<const char*, 5> functional_names{"e_l2", "e_h1_corr", "e_weighted",
                                                             "e_interior", "e_layer"};

inline double functional_value(const ErrorReport& r, const std::string& name) {
  if (name == "e_l2") return r.e_l2;
  if (name == "e_h1_corr") return r.e_h1_corr;
  if (name == "e_weighted") return r.e_weighted;
  if (name == "e_interior") return r.e_interior;
  if (name == "e_layer") return r.e_layer;
  throw Error("unknown error functional '" + name + "'");
}

/// ‖u‖_{L²} and |u|_{H¹} of a Q1 field by element quadrature (exact for
/// the 2-point rule).
template <int Dim>
std::pair<double, double> field_norms(const ScalarField<Dim>& u,
                                      const QuadratureRule<Dim>& rule = gauss_rule<Dim>(2)) {
  const auto& mesh = u.mesh();
  const double vol = mesh.element_volume();
  double l2 = 0.0, h1 = 0.0;
  for (std::size_t e = 0; e < mesh.element_count(); ++e) {
    if (!mesh.element_active(e)) continue;
    const auto cv = u.element_values(mesh.element_multi(e));
    for (std::size_t q = 0; q < rule.size(); ++q) {
      const double v = element_value<Dim>(cv, rule.points[q]);
      const auto g = element_gradient<Dim>(cv, rule.points[q], mesh.spacing());
      l2 += vol * rule.weights[q] * v * v;
      h1 += vol * rule.weights[q] * dot<Dim>(g, g);
    }
  }
  return {std::sqrt(l2), std::sqrt(h1)};
}

/// Distance from an axis-aligned box to ∂Ω.
template <int Dim>
double box_margin(const StructuredMesh<Dim>& mesh, const Box<Dim>& box) {
  double m = std::numeric_limits<double>::infinity();
  for (int a = 0; a < corner_count<Dim>; ++a) {
    Vec<Dim> c{};
    for (int k = 0; k < Dim; ++k) c[k] = ((a >> k) & 1) ? box.upper[k] : box.lower[k];
    if (!mesh.locate(c)) return 0.0;
    m = std::min(m, boundary_distance(mesh, c));
  }
  if constexpr (Dim == 2) {
    if (mesh.shape() == Shape::l_shape) {
      // The reentrant corner is the only vertex that can sit beside the box.
      const Vec<2> v{mesh.origin()[0] + 0.5 * mesh.extent()[0], mesh.origin()[1] + 0.5 * mesh.extent()[1]};
      const double dx = std::max({box.lower[0] - v[0], 0.0, v[0] - box.upper[0]});
      const double dy = std::max({box.lower[1] - v[1], 0.0, v[1] - box.upper[1]});
      if (dx == 0.0 && dy == 0.0) return 0.0;
      m = std::min(m, std::hypot(dx, dy));
    }
  }
  return m;
}

/// All norms by element quadrature on the shared fine mesh. Fine elements
/// coincide with cell-mesh elements of the correctors, so the correctors are
/// evaluated element-locally at the same reference points.
template <int Dim>
ErrorReport error_report(const ScalarField<Dim>& fine, const Reconstruction<Dim>& recon,
                         const Box<Dim>& interior_box,
                         const QuadratureRule<Dim>& rule = gauss_rule<Dim>(2)) {
  const auto& map = recon.map();
  const auto& mesh = map.mesh();
  if (!fine.mesh().same_layout(mesh) || !recon.base().mesh().same_layout(mesh))
    throw Error("fine solution and reconstruction must share the fine mesh");
  const auto& chi = recon.correctors().chi;
  const auto& cell_mesh = recon.correctors().cell_mesh;
  const auto& per = map.per_cell();
  const double eps = map.epsilon();

  ErrorReport rep;
  rep.epsilon = eps;
  rep.interior_margin = box_margin(mesh, interior_box);
  rep.interior_margin_ok = rep.interior_margin >= 4.0 * std::sqrt(static_cast<double>(Dim)) * eps - 1e-12;
  const auto layer = layer_indicator(map, 3);

  const TabulatedRule<Dim> tab(rule);
  const double vol = mesh.element_volume();
  const auto& h = mesh.spacing();
  const auto& hy = cell_mesh.spacing();
  double l2 = 0.0, h1 = 0.0, weighted = 0.0, interior = 0.0, lay = 0.0;

  for (std::size_t e = 0; e < mesh.element_count(); ++e) {
    if (!mesh.element_active(e)) continue;
    const auto ei = mesh.element_multi(e);
    Index<Dim> ce{};
    for (int k = 0; k < Dim; ++k) ce[k] = ei[k] % per[k];
    const auto fv = fine.element_values(ei);
    const auto bv = recon.base().element_values(ei);
    std::array<std::array<double, corner_count<Dim>>, Dim> qv{};
    std::array<std::array<double, corner_count<Dim>>, Dim> cv{};
    for (int i = 0; i < Dim; ++i) {
      qv[i] = recon.q_derivatives()[i].element_values(ei);
      cv[i] = chi[i].element_values(ce);
    }
    const bool in_interior = interior_box.contains(mesh.element_center(ei));
    const bool in_layer = layer[e] != 0;
    for (std::size_t q = 0; q < rule.size(); ++q) {
      const auto& ref = rule.points[q];
      const double w = vol * rule.weights[q];
      const double uf = element_value<Dim>(fv, ref);
      const double ub = element_value<Dim>(bv, ref);
      const Vec<Dim> gf = element_gradient<Dim>(fv, ref, h);
      Vec<Dim> g = element_gradient<Dim>(bv, ref, h);
      double v = ub;
      for (int i = 0; i < Dim; ++i) {
        const double qi = element_value<Dim>(qv[i], ref);
        const double ci = element_value<Dim>(cv[i], ref);
        const Vec<Dim> gy = element_gradient<Dim>(cv[i], ref, hy);
        v += eps * qi * ci;
        for (int k = 0; k < Dim; ++k) g[k] += qi * gy[k];
      }
      double d2 = 0.0;
      double gf2 = 0.0;
      for (int k = 0; k < Dim; ++k) {
        d2 += (gf[k] - g[k]) * (gf[k] - g[k]);
        gf2 += gf[k] * gf[k];
      }
      const double rho = boundary_distance(mesh, mesh.element_point(ei, ref));
      rep.max_rho = std::max(rep.max_rho, rho);
      l2 += w * (uf - ub) * (uf - ub);
      h1 += w * d2;
      weighted += w * rho * rho * d2;
      if (in_interior) interior += w * ((uf - v) * (uf - v) + d2);
      if (in_layer) lay += w * gf2;
    }
  }
  rep.e_l2 = std::sqrt(l2);
  rep.e_h1_corr = std::sqrt(h1);
  rep.e_weighted = std::sqrt(weighted);
  rep.e_interior = std::sqrt(interior);
  rep.e_layer = std::sqrt(lay);
  return rep;
}

/// Splits every reference element into parts^n sub-boxes carrying `rule`.
template <int Dim>
QuadratureRule<Dim> refined_rule(const QuadratureRule<Dim>& rule, int parts) {
  QuadratureRule<Dim> out;
  int sub = 1;
  for (int k = 0; k < Dim; ++k) sub *= parts;
  for (int s = 0; s < sub; ++s) {
    Index<Dim> o{};
    int rem = s;
    for (int k = 0; k < Dim; ++k) {
      o[k] = rem % parts;
      rem /= parts;
    }
    for (std::size_t q = 0; q < rule.size(); ++q) {
      Vec<Dim> p{};
      for (int k = 0; k < Dim; ++k) p[k] = (o[k] + rule.points[q][k]) / parts;
      out.points.push_back(p);
      out.weights.push_back(rule.weights[q] / sub);
    }
  }
  return out;
}

// ----------------------------------------------------------------------------
//                                 Rate fits
// ----------------------------------------------------------------------------

struct RateFit {
  double slope = 0.0;
  double intercept = 0.0;
  double r_squared = 0.0;
  std::vector<std::pair<double, double>> points;
};

/// Least squares of log(error) against log(ε).
inline RateFit fit_rate(const std::vector<std::pair<double, double>>& points, int min_points = 3) {
  if (static_cast<int>(points.size()) < min_points || points.size() < 2)
    throw Error("rate fit needs at least " + std::to_string(std::max(min_points, 2)) + " points, got " +
                std::to_string(points.size()));
  for (std::size_t i = 0; i < points.size(); ++i) {
    if (!(points[i].first > 0.0)) throw Error("rate fit: epsilon must be positive");
    if (!(points[i].second > 0.0) || !std::isfinite(points[i].second))
      throw Error("rate fit: error values must be positive and finite");
    for (std::size_t j = 0; j < i; ++j)
      if (points[j].first == points[i].first) throw Error("rate fit: epsilon values must be distinct");
  }
  const auto n = static_cast<double>(points.size());
  double sx = 0.0, sy = 0.0;
  for (const auto& [e, v] : points) {
    sx += std::log(e);
    sy += std::log(v);
  }
  const double mx = sx / n, my = sy / n;
  double sxx = 0.0, sxy = 0.0, syy = 0.0;
  for (const auto& [e, v] : points) {
    const double dx = std::log(e) - mx, dy = std::log(v) - my;
    sxx += dx * dx;
    sxy += dx * dy;
    syy += dy * dy;
  }
  RateFit fit;
  fit.points = points;
  fit.slope = sxy / sxx;
  fit.intercept = my - fit.slope * mx;
  double ss_res = 0.0;
  for (const auto& [e, v] : points) {
    const double r = std::log(v) - (fit.intercept + fit.slope * std::log(e));
    ss_res += r * r;
  }
  fit.r_squared = syy > 0.0 ? std::clamp(1.0 - ss_res / syy, 0.0, 1.0) : 1.0;
  return fit;
}

}  // namespace homog

#endif  // HOMOG_METRICS_HPP
