#include <gtest/gtest.h>

#include <cmath>

#include "homog/metrics.hpp"
#include "homog/unfold.hpp"

using namespace homog;

TEST(SplitPoint, HandArithmetic) {
  const auto [xi, y] = split_point<2>(Vec<2>{0.3, 0.7}, 0.25);
  EXPECT_EQ(xi[0], 1);
  EXPECT_EQ(xi[1], 2);
  EXPECT_NEAR(y[0], 0.2, 1e-15);
  EXPECT_NEAR(y[1], 0.8, 1e-15);
}

TEST(SplitPoint, OriginAndRightEndpoint) {
  const auto [xi0, y0] = split_point<2>(Vec<2>{0.0, 0.0}, 1.0 / 8.0);
  EXPECT_EQ(xi0, (Index<2>{0, 0}));
  EXPECT_EQ(y0, (Vec<2>{0.0, 0.0}));
  const auto [xi1, y1] = split_point<1>(Vec<1>{1.0}, 0.25);
  EXPECT_EQ(xi1[0], 4);
  EXPECT_EQ(y1[0], 0.0);
}

TEST(SplitPoint, Reassembles) {
  const double eps = 1.0 / 7.0;
  for (double x : {-0.93, -0.2, 0.0, 0.31, 0.999, 4.56}) {
    const auto [xi, y] = split_point<1>(Vec<1>{x}, eps);
    EXPECT_GE(y[0], 0.0);
    EXPECT_LT(y[0], 1.0);
    EXPECT_NEAR(eps * xi[0] + eps * y[0], x, 4e-16 * std::max(1.0, std::abs(x)));
  }
  EXPECT_THROW(split_point<1>(Vec<1>{0.5}, 0.0), Error);
}

TEST(CellMap, Counts) {
  const CellIndexMap<2> map(unit_mesh<2>(32), 0.125);
  EXPECT_EQ(map.periods(), 8);
  EXPECT_EQ(map.cell_count(), 64u);
  EXPECT_EQ(map.per_cell(), (Index<2>{4, 4}));
  EXPECT_EQ(map.cell_of_element({5, 30}), (Index<2>{1, 7}));
}

TEST(CellMap, LShapeInactiveCells) {
  const CellIndexMap<2> map(unit_mesh<2>(16, Shape::l_shape), 0.25);
  std::size_t active = 0;
  for (std::size_t c = 0; c < map.cell_count(); ++c) active += map.cell_active(c) ? 1 : 0;
  EXPECT_EQ(active, 12u);
  EXPECT_FALSE(map.cell_active(Index<2>{3, 3}));
  EXPECT_TRUE(map.cell_active(Index<2>{1, 3}));
}

TEST(CellMap, AlignmentErrors) {
  EXPECT_THROW(CellIndexMap<2>(unit_mesh<2>(40), 0.3), AlignmentError);
  EXPECT_THROW(CellIndexMap<2>(unit_mesh<2>(10), 0.25), AlignmentError);
  EXPECT_THROW(CellIndexMap<1>(unit_mesh<1>(8), -0.5), AlignmentError);
  // The reentrant corner sits at 1/2, off the lattice for odd N.
  EXPECT_THROW(CellIndexMap<2>(unit_mesh<2>(18, Shape::l_shape), 1.0 / 3.0), AlignmentError);
  EXPECT_THROW(CellIndexMap<1>(build_mesh<1>({0.1}, {1.0}, {8}), 0.25), AlignmentError);
}

TEST(Unfold, ConstantField) {
  const auto mesh = unit_mesh<2>(8);
  const CellIndexMap<2> map(mesh, 0.25);
  const auto u = unfold(ScalarField<2>(mesh, 2.5), map, 4);
  for (std::size_t c = 0; c < map.cell_count(); ++c)
    for (std::size_t j = 0; j < u.nodes_per_cell(); ++j) EXPECT_EQ(u.grid_value(c, j), 2.5);
}

TEST(Unfold, HandValue) {
  const auto mesh = unit_mesh<2>(8);
  const CellIndexMap<2> map(mesh, 0.5);
  const auto phi = interpolate(mesh, [](const Vec<2>& x) { return x[0]; });
  const auto u = unfold(phi, map, 4);
  EXPECT_NEAR(u.value(Index<2>{1, 0}, Vec<2>{0.5, 0.3}), 0.75, 1e-15);
  EXPECT_NEAR(u.value(Index<2>{1, 0}, Vec<2>{0.5, 0.9}), 0.75, 1e-15);
}

TEST(Unfold, IntegrationIdentity) {
  for (Shape shape : {Shape::box, Shape::l_shape}) {
    const auto mesh = unit_mesh<2>(24, shape);
    const CellIndexMap<2> map(mesh, 1.0 / 6.0);
    const auto phi = interpolate(mesh, [](const Vec<2>& x) { return std::exp(x[0]) * std::cos(3.0 * x[1]); });
    const auto u = unfold(phi, map, 4);
    double sum = 0.0;
    for (std::size_t c = 0; c < map.cell_count(); ++c)
      if (map.cell_active(c)) sum += map.epsilon() * map.epsilon() * u.cell_integral(c);
    EXPECT_NEAR(sum, integrate(mesh, [&](const Vec<2>& x) { return eval_field(phi, x); }), 1e-12);
  }
}

TEST(Unfold, RejectsForeignField) {
  const CellIndexMap<2> map(unit_mesh<2>(8), 0.25);
  EXPECT_THROW(unfold(ScalarField<2>(unit_mesh<2>(16)), map, 2), AlignmentError);
  EXPECT_THROW(cell_means(ScalarField<2>(unit_mesh<2>(16)), map), AlignmentError);
}

TEST(Average, InvertsUnfold) {
  const auto mesh = unit_mesh<2>(20, Shape::l_shape);
  const CellIndexMap<2> map(mesh, 0.1);
  const auto phi = interpolate(mesh, [](const Vec<2>& x) { return std::sin(5.0 * x[0] + x[1] * x[1]); });
  const auto back = average(unfold(phi, map, 2));
  for (std::size_t n = 0; n < mesh.node_count(); ++n)
    if (mesh.node_active(mesh.node_multi(n))) {
      EXPECT_NEAR(back[n], phi[n], 1e-13);
    }
}

TEST(Average, PeriodicProfile) {
  const auto mesh = unit_mesh<1>(16);
  const CellIndexMap<1> map(mesh, 0.25);
  const auto g = [](const Vec<1>& y) { return y[0] * (1.0 - y[0]); };
  const auto u = UnfoldedField<1>::from_function(map, 4, [&](const Index<1>&, const Vec<1>& y) { return g(y); });
  const auto f = average(u);
  for (std::size_t n = 0; n < mesh.node_count(); ++n) {
    const double x = mesh.node_coord(mesh.node_multi(n))[0];
    EXPECT_NEAR(f[n], g(split_point<1>(Vec<1>{x}, 0.25).second), 1e-15);
  }
}

TEST(Average, ZeroField) {
  const CellIndexMap<2> map(unit_mesh<2>(8), 0.25);
  const auto f = average(UnfoldedField<2>(map, 3));
  for (double v : f.values()) EXPECT_EQ(v, 0.0);
}

TEST(CellMeans, ConstantAndLinear) {
  const auto mesh = unit_mesh<2>(16);
  const CellIndexMap<2> map(mesh, 0.25);
  for (double m : cell_means(ScalarField<2>(mesh, -3.0), map)) EXPECT_DOUBLE_EQ(m, -3.0);
  const auto means = cell_means(interpolate(mesh, [](const Vec<2>& x) { return x[0]; }), map);
  EXPECT_NEAR(means[map.cell_index({0, 0})], 0.125, 1e-15);
  EXPECT_NEAR(means[map.cell_index({2, 3})], 0.625, 1e-15);
}

TEST(CellMeans, QuadraticAgainstInterpolantMean) {
  // The Q1 interpolant of x² on an element of width h overshoots the mean of
  // x² by h²/6, so the cell mean over [0, 1/2] is 1/12 + h²/6.
  for (int d : {4, 16, 64}) {
    const auto mesh = unit_mesh<2>(d);
    const CellIndexMap<2> map(mesh, 0.5);
    const auto means = cell_means(interpolate(mesh, [](const Vec<2>& x) { return x[0] * x[0]; }), map);
    const double h = 1.0 / d;
    for (int j = 0; j < 2; ++j) EXPECT_NEAR(means[map.cell_index({0, j})], 1.0 / 12.0 + h * h / 6.0, 1e-14);
  }
}

TEST(ScaleSplit, ReproducesConstants) {
  for (Shape shape : {Shape::box, Shape::l_shape}) {
    const auto mesh = unit_mesh<2>(16, shape);
    const CellIndexMap<2> map(mesh, 0.125);
    const auto s = scale_split(ScalarField<2>(mesh, 4.0), map);
    for (std::size_t n = 0; n < mesh.node_count(); ++n) {
      if (!mesh.node_active(mesh.node_multi(n))) continue;
      EXPECT_NEAR(s.q_part[n], 4.0, 1e-14);
      EXPECT_NEAR(s.r_part[n], 0.0, 1e-14);
    }
  }
}

TEST(ScaleSplit, AffineGradientAwayFromLastLayer) {
  const auto mesh = unit_mesh<2>(32);
  const CellIndexMap<2> map(mesh, 0.125);
  const auto phi = interpolate(mesh, [](const Vec<2>& x) { return 1.5 * x[0] - 0.5 * x[1] + 2.0; });
  const auto s = scale_split(phi, map);
  Vec<2> centre{0.5, 0.5};
  for (std::size_t e = 0; e < mesh.element_count(); ++e) {
    const auto ei = mesh.element_multi(e);
    const auto c = map.cell_of_element(ei);
    if (c[0] >= 7 || c[1] >= 7) continue;
    const auto g = element_gradient<2>(s.q_part.element_values(ei), centre, mesh.spacing());
    EXPECT_NEAR(g[0], 1.5, 1e-12);
    EXPECT_NEAR(g[1], -0.5, 1e-12);
  }
  // The forward-cell convention shifts Q_ε(affine) by half a cell: Q_ε φ(εξ) = φ(εξ + ε/2).
  const auto n = mesh.node_index({8, 8});
  EXPECT_NEAR(s.q_part[n], 1.5 * (0.25 + 0.0625) - 0.5 * (0.25 + 0.0625) + 2.0, 1e-13);
}

TEST(ScaleSplit, RemainderShrinksWithEpsilon) {
  std::vector<double> r;
  for (int n : {4, 8, 16, 32}) {
    const auto mesh = unit_mesh<2>(8 * n);
    const auto phi = interpolate(mesh, [](const Vec<2>& x) { return std::sin(M_PI * x[0]) * std::sin(M_PI * x[1]); });
    r.push_back(field_norms(scale_split(phi, CellIndexMap<2>(mesh, 1.0 / n)).r_part).first);
  }
  for (std::size_t k = 1; k < r.size(); ++k) {
    EXPECT_LT(r[k], r[k - 1]);
    // Successive ratios approach 2 from below.
    EXPECT_GT(r[k - 1] / r[k], 1.6);
    EXPECT_LT(r[k - 1] / r[k], 2.05);
  }
}

TEST(Layer, WideLayerMarksEverything) {
  const CellIndexMap<2> map(unit_mesh<2>(8), 0.25);
  // 4·√2·0.25 > 1/2
  const auto mask = layer_indicator(map, 4);
  for (auto v : mask) EXPECT_EQ(v, 1);
}

TEST(Layer, HandDistances) {
  const auto mesh = unit_mesh<2>(16);
  const CellIndexMap<2> map(mesh, 0.125);
  // Element (7,7) has centre (15/32, 15/32), distance 15/32 > √2/8.
  EXPECT_EQ(layer_indicator(map, 1)[mesh.element_index({7, 7})], 0);
  // Element (0, 8) has centre (1/32, 17/32): distance below ε for every k.
  for (int k = 1; k <= 4; ++k) EXPECT_EQ(layer_indicator(map, k)[mesh.element_index({0, 8})], 1);
  EXPECT_THROW(layer_indicator(map, 0), Error);
  EXPECT_THROW(layer_indicator(map, 5), Error);
}

TEST(Layer, LShapeCountsReentrantEdges) {
  const auto mesh = unit_mesh<2>(32, Shape::l_shape);
  const CellIndexMap<2> map(mesh, 1.0 / 32.0);
  const auto mask = layer_indicator(map, 1);
  // Centre (31/64, 33/64) sits 1/64 from the edge x₁ = 1/2, x₂ ≥ 1/2.
  EXPECT_EQ(mask[mesh.element_index({15, 16})], 1);
  // Centre (29/64, 33/64) sits 3/64 > √2/32 from it.
  EXPECT_EQ(mask[mesh.element_index({14, 16})], 0);
  EXPECT_EQ(mask[mesh.element_index({8, 8})], 0);
  EXPECT_EQ(mask[mesh.element_index({20, 20})], 0);  // inactive
}

TEST(Weights, BoxDistances) {
  const auto mesh = unit_mesh<2>(8);
  const auto rho = distance_weight(mesh, WeightKind::rho);
  EXPECT_DOUBLE_EQ(rho[mesh.node_index({4, 4})], 0.5);
  EXPECT_DOUBLE_EQ(rho[mesh.node_index({0, 5})], 0.0);
  EXPECT_DOUBLE_EQ(rho[mesh.node_index({2, 7})], 0.125);
  const auto re = distance_weight(mesh, WeightKind::rho_eps, 0.125);
  EXPECT_DOUBLE_EQ(re[mesh.node_index({8, 3})], 0.0);
  // ρ = 2ε clamps to 1.
  EXPECT_DOUBLE_EQ(re[mesh.node_index({2, 3})], 1.0);
  EXPECT_DOUBLE_EQ(re[mesh.node_index({1, 3})], 1.0);
  EXPECT_THROW(distance_weight(mesh, WeightKind::rho_eps, 0.0), Error);
}

TEST(Weights, LShapeReentrantCorner) {
  const auto mesh = unit_mesh<2>(8, Shape::l_shape);
  EXPECT_DOUBLE_EQ(boundary_distance(mesh, Vec<2>{0.5, 0.5}), 0.0);
  EXPECT_NEAR(boundary_distance(mesh, Vec<2>{0.375, 0.375}), std::sqrt(2.0) / 8.0, 1e-15);
  EXPECT_NEAR(boundary_distance(mesh, Vec<2>{0.25, 0.75}), 0.25, 1e-15);
  EXPECT_NEAR(boundary_distance(mesh, Vec<2>{0.4, 0.6}), 0.1, 1e-15);
}

TEST(Weights, OneDimensional) {
  const auto mesh = unit_mesh<1>(10);
  const auto rho = distance_weight(mesh, WeightKind::rho);
  EXPECT_NEAR(rho[3], 0.3, 1e-15);
  EXPECT_NEAR(rho[8], 0.2, 1e-15);
}
