#ifndef HOMOG_CHECKS_HPP
#define HOMOG_CHECKS_HPP

// Residual checks of the unfolding operator toolbox, reported as data.

#include <cmath>
#include <functional>
#include <numbers>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "homog/metrics.hpp"
#include "homog/unfold.hpp"

namespace homog {

struct CheckParams {
  /// Fine elements per ε-period.
  int points_per_period = 8;
  /// Y-grid resolution for T_ε; a multiple of points_per_period keeps the
  /// Y-grid interpolant equal to the Q1 field.
  int y_resolution = 8;
  std::vector<int> ladder{4, 8, 16, 32};
};

struct Check {
  std::string name;
  double residual = 0.0;
  double tolerance = 0.0;
  bool pass = false;
  std::string detail;
};

struct CheckReport {
  std::vector<Check> checks;

  bool pass() const {
    for (const auto& c : checks)
      if (!c.pass) return false;
    return !checks.empty();
  }

  nlohmann::json to_json() const {
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& c : checks)
      arr.push_back({{"name", c.name},
                     {"residual", c.residual},
                     {"tolerance", c.tolerance},
                     {"pass", c.pass},
                     {"detail", c.detail}});
    return {{"pass", pass()}, {"checks", arr}};
  }
};

namespace detail {

template <int Dim>
double smooth_test_function(const Vec<Dim>& x) {
  double v = 1.0;
  for (int k = 0; k < Dim; ++k) v *= std::sin(std::numbers::pi * x[k]);
  return v + 0.5 * x[0] * x[0] + 0.25 * x[Dim - 1];
}

template <int Dim>
double sine_product(const Vec<Dim>& x) {
  double v = 1.0;
  for (int k = 0; k < Dim; ++k) v *= std::sin(std::numbers::pi * x[k]);
  return v;
}

inline Check make_check(std::string name, double residual, double tolerance, std::string detail = {}) {
  return Check{std::move(name), residual, tolerance, residual <= tolerance, std::move(detail)};
}

template <int Dim>
std::string tag(const char* what, int periods, Shape shape) {
  return std::string(what) + " (n=" + std::to_string(Dim) + ", " + to_string(shape) + ", eps=1/" +
         std::to_string(periods) + ")";
}

/// Σ_ξ ε^n ∫_Y T_ε(φ)(ξ,·) against ∫_Ω φ.
template <int Dim>
Check integration_check(const ScalarField<Dim>& phi, const CellIndexMap<Dim>& map, int y_res) {
  const auto u = unfold(phi, map, y_res);
  const double cell_vol = std::pow(map.epsilon(), Dim);
  double sum = 0.0;
  for (std::size_t c = 0; c < map.cell_count(); ++c)
    if (map.cell_active(c)) sum += cell_vol * u.cell_integral(c);
  const double exact = field_integral(phi);
  return make_check(tag<Dim>("unfolding integration identity", map.periods(), map.mesh().shape()),
                    std::abs(sum - exact) / std::max(std::abs(exact), 1.0), 1e-12);
}

template <int Dim>
Check identity_check(const ScalarField<Dim>& phi, const CellIndexMap<Dim>& map, int y_res) {
  const auto back = average(unfold(phi, map, y_res));
  double dev = 0.0;
  const auto& mesh = map.mesh();
  for (std::size_t n = 0; n < mesh.node_count(); ++n)
    if (mesh.node_active(mesh.node_multi(n))) dev = std::max(dev, std::abs(back[n] - phi[n]));
  return make_check(tag<Dim>("averaging of unfolding is identity", map.periods(), mesh.shape()), dev, 1e-13);
}

/// ∇_y T_ε(φ)(ξ, y) = ε T_ε(∇φ)(ξ, y) at Y-grid element centres.
template <int Dim>
Check gradient_exchange_check(const ScalarField<Dim>& phi, const CellIndexMap<Dim>& map, int y_res) {
  const auto u = unfold(phi, map, y_res);
  const double eps = map.epsilon();
  double dev = 0.0;
  std::size_t elems = 1;
  for (int k = 0; k < Dim; ++k) elems *= static_cast<std::size_t>(y_res);
  for (std::size_t c = 0; c < map.cell_count(); ++c) {
    if (!map.cell_active(c)) continue;
    const auto ci = map.cell_multi(c);
    const auto corner = map.lattice_point(ci);
    for (std::size_t e = 0; e < elems; ++e) {
      Vec<Dim> y{};
      std::size_t rem = e;
      for (int k = 0; k < Dim; ++k) {
        y[k] = (static_cast<double>(rem % static_cast<std::size_t>(y_res)) + 0.5) / y_res;
        rem /= static_cast<std::size_t>(y_res);
      }
      Vec<Dim> x{};
      for (int k = 0; k < Dim; ++k) x[k] = corner[k] + eps * y[k];
      const auto gy = u.gradient(ci, y);
      const auto gx = eval_gradient(phi, x);
      for (int k = 0; k < Dim; ++k) dev = std::max(dev, std::abs(gy[k] - eps * gx[k]));
    }
  }
  return make_check(tag<Dim>("gradient exchange", map.periods(), map.mesh().shape()), dev, 1e-12);
}

template <int Dim>
Check constant_split_check(const CellIndexMap<Dim>& map) {
  const double c = 1.75;
  const auto phi = interpolate(map.mesh(), [&](const Vec<Dim>&) { return c; });
  const auto s = scale_split(phi, map);
  double dev = 0.0;
  const auto& mesh = map.mesh();
  for (std::size_t n = 0; n < mesh.node_count(); ++n) {
    if (!mesh.node_active(mesh.node_multi(n))) continue;
    dev = std::max({dev, std::abs(s.q_part[n] - c), std::abs(s.r_part[n])});
  }
  return make_check(tag<Dim>("scale split reproduces constants", map.periods(), mesh.shape()), dev, 1e-13);
}

/// Gradient of Q_ε(a·x + b) equals a on elements whose ε-cell is not in the
/// last lattice layer (those use clamped neighbour means).
template <int Dim>
Check affine_split_check(const CellIndexMap<Dim>& map) {
  Vec<Dim> a{};
  for (int k = 0; k < Dim; ++k) a[k] = 0.75 - 1.5 * k;
  const auto phi = interpolate(map.mesh(), [&](const Vec<Dim>& x) { return homog::dot<Dim>(a, x) + 0.3; });
  const auto s = scale_split(phi, map);
  const auto& mesh = map.mesh();
  Vec<Dim> centre{};
  centre.fill(0.5);
  double dev = 0.0;
  for (std::size_t e = 0; e < mesh.element_count(); ++e) {
    if (!mesh.element_active(e)) continue;
    const auto ei = mesh.element_multi(e);
    const auto cell = map.cell_of_element(ei);
    bool interior = true;
    for (int k = 0; k < Dim; ++k) {
      auto next = cell;
      next[k] += 1;
      if (next[k] >= map.cells()[k] || !map.cell_active(next)) interior = false;
    }
    if constexpr (Dim == 2) {
      auto diag = cell;
      diag[0] += 1;
      diag[1] += 1;
      if (diag[0] >= map.cells()[0] || diag[1] >= map.cells()[1] || !map.cell_active(diag)) interior = false;
    }
    if (!interior) continue;
    const auto g = element_gradient<Dim>(s.q_part.element_values(ei), centre, mesh.spacing());
    for (int k = 0; k < Dim; ++k) dev = std::max(dev, std::abs(g[k] - a[k]));
  }
  return make_check(tag<Dim>("scale split keeps affine gradients", map.periods(), mesh.shape()), dev, 1e-12);
}

template <int Dim>
Check layer_volume_check(const CellIndexMap<Dim>& map, int k) {
  const auto mask = layer_indicator(map, k);
  const auto& mesh = map.mesh();
  double area = 0.0;
  for (std::size_t e = 0; e < mesh.element_count(); ++e)
    if (mask[e]) area += mesh.element_volume();
  const double eps = map.epsilon();
  const double bound = 4.0 * k * std::sqrt(2.0) * eps + 16.0 * eps * eps;
  Check c = make_check("layer volume k=" + std::to_string(k) + " (eps=1/" + std::to_string(map.periods()) + ")",
                       area, bound, "area of marked elements against 4k√2·ε + 16ε²");
  return c;
}

}  // namespace detail

/// ‖R_ε(φ)‖_{L²} and Q_ε stability ratios for φ = sin(πx₁)sin(πx₂) over the
/// ladder, on the unit square.
struct SplitLadder {
  std::vector<double> epsilons;
  std::vector<double> r_l2;
  /// ‖R_ε φ‖ / (ε‖∇φ‖)
  std::vector<double> r_constant;
  /// ‖Q_ε φ‖_{H¹} / ‖φ‖_{H¹}
  std::vector<double> q_ratio;
  RateFit fit;
};

inline SplitLadder split_ladder(const std::vector<int>& ladder, int points_per_period) {
  SplitLadder out;
  std::vector<std::pair<double, double>> pts;
  for (int n : ladder) {
    const auto mesh = unit_mesh<2>(n * points_per_period);
    const auto phi = interpolate(mesh, detail::sine_product<2>);
    const CellIndexMap<2> map(mesh, 1.0 / n);
    const auto s = scale_split(phi, map);
    const auto [r_l2, r_h1] = field_norms(s.r_part);
    const auto [q_l2, q_h1] = field_norms(s.q_part);
    const auto [p_l2, p_h1] = field_norms(phi);
    (void)r_h1;
    const double eps = 1.0 / n;
    out.epsilons.push_back(eps);
    out.r_l2.push_back(r_l2);
    out.r_constant.push_back(r_l2 / (eps * p_h1));
    out.q_ratio.push_back(std::sqrt(q_l2 * q_l2 + q_h1 * q_h1) / std::sqrt(p_l2 * p_l2 + p_h1 * p_h1));
    pts.emplace_back(eps, r_l2);
  }
  out.fit = fit_rate(pts);
  return out;
}

inline CheckReport run_operator_checks(const CheckParams& p = {}) {
  if (p.points_per_period < 1 || p.y_resolution < 1 || p.y_resolution % p.points_per_period != 0)
    throw Error("y_resolution must be a positive multiple of points_per_period");
  CheckReport report;
  auto& out = report.checks;
  const int m = p.points_per_period;
  const int yr = p.y_resolution;

  for (int n : {4, 8}) {
    const auto mesh = unit_mesh<1>(n * m);
    const CellIndexMap<1> map(mesh, 1.0 / n);
    const auto phi = interpolate(mesh, detail::smooth_test_function<1>);
    out.push_back(detail::integration_check(phi, map, yr));
    out.push_back(detail::identity_check(phi, map, yr));
    out.push_back(detail::gradient_exchange_check(phi, map, yr));
    out.push_back(detail::constant_split_check(map));
    out.push_back(detail::affine_split_check(map));
  }
  for (Shape shape : {Shape::box, Shape::l_shape}) {
    for (int n : {4, 8}) {
      const auto mesh = unit_mesh<2>(n * m, shape);
      const CellIndexMap<2> map(mesh, 1.0 / n);
      const auto phi = interpolate(mesh, detail::smooth_test_function<2>);
      out.push_back(detail::integration_check(phi, map, yr));
      out.push_back(detail::identity_check(phi, map, yr));
      out.push_back(detail::gradient_exchange_check(phi, map, yr));
      out.push_back(detail::constant_split_check(map));
      out.push_back(detail::affine_split_check(map));
    }
  }

  const auto ladder = split_ladder(p.ladder, m);
  out.push_back(detail::make_check("remainder L2 slope", std::abs(ladder.fit.slope - 1.0), 0.1,
                                   "measured slope " + format_number(ladder.fit.slope)));
  const auto spread = [](const std::vector<double>& v) {
    return *std::max_element(v.begin(), v.end()) / *std::min_element(v.begin(), v.end());
  };
  out.push_back(detail::make_check("remainder constant stable across eps", spread(ladder.r_constant), 1.5,
                                   "max/min of ‖R_ε φ‖/(ε‖∇φ‖)"));
  out.push_back(detail::make_check("Q_eps H1 stability", *std::max_element(ladder.q_ratio.begin(), ladder.q_ratio.end()),
                                   1.5, "max ‖Q_ε φ‖_{H¹}/‖φ‖_{H¹}"));

  for (int n : {8, 16, 32}) {
    const CellIndexMap<2> map(unit_mesh<2>(n * 4), 1.0 / n);
    for (int k = 1; k <= 4; ++k) out.push_back(detail::layer_volume_check(map, k));
  }

  {
    Check c{"unaligned epsilon 0.3 rejected", 1.0, 0.0, false, "no alignment error raised"};
    try {
      const CellIndexMap<2> map(unit_mesh<2>(40), 0.3);
    } catch (const AlignmentError& e) {
      c = Check{c.name, 0.0, 0.0, true, e.what()};
    }
    out.push_back(c);
  }
  return report;
}

}  // namespace homog

#endif  // HOMOG_CHECKS_HPP
