#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "homog/cell.hpp"

using namespace homog;

namespace {

constexpr double pi = std::numbers::pi;

/// χ for a(y) = 2 + cos 2πy: χ′ = √3/a − 1 integrates to G(y) − y with
/// G(y) = atan2(sin πy, √3 cos πy)/π. G(1−y) = 1 − G(y), so G − y has zero mean.
double cosine_corrector(double y) {
  return std::atan2(std::sin(pi * y), std::sqrt(3.0) * std::cos(pi * y)) / pi - y;
}

template <int Dim>
double mean_of(const ScalarField<Dim>& f) {
  return field_integral(f);
}

}  // namespace

TEST(Correctors, ConstantCoefficientGivesZero) {
  Mat<2> m{{{3.0, 1.0}, {1.0, 2.0}}};
  const auto field = CoefficientField<2>::constant(m);
  const auto c = solve_correctors(field, unit_mesh<2>(12));
  for (int i = 0; i < 2; ++i)
    for (double v : c.chi[i].values()) EXPECT_LE(std::abs(v), 1e-10);
  const auto t = homogenized_tensor(field, c);
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j) EXPECT_NEAR(t.matrix[i][j], m[i][j], 1e-12);
}

TEST(Correctors, OneDimensionalCosineClosedForm) {
  const auto field = CoefficientField<1>::scalar_cosine(2.0, 1.0, 0);
  const auto mesh = unit_mesh<1>(256);
  const auto c = solve_correctors(field, mesh, 1e-12);
  double worst = 0.0;
  for (std::size_t n = 0; n < mesh.node_count(); ++n)
    worst = std::max(worst, std::abs(c.chi[0][n] - cosine_corrector(mesh.node_coord(mesh.node_multi(n))[0])));
  EXPECT_LE(worst, 1e-6);
}

TEST(Correctors, OneDimensionalHarmonicMean) {
  const auto field = CoefficientField<1>::scalar_cosine(2.0, 1.0, 0);
  const auto t = homogenized_tensor(field, solve_correctors(field, unit_mesh<1>(1024)));
  EXPECT_NEAR(t.matrix[0][0], std::sqrt(3.0), 1e-6);
}

TEST(Correctors, LaminateReducesToOneDimension) {
  const auto field = CoefficientField<2>::laminate(0, 1.0, 4.0, 0.5);
  const auto mesh = unit_mesh<2>(16);
  const auto c = solve_correctors(field, mesh);
  for (double v : c.chi[1].values()) EXPECT_LE(std::abs(v), 1e-10);
  // χ₁ does not depend on y₂.
  for (int i = 0; i <= 16; ++i)
    for (int j = 1; j <= 16; ++j)
      EXPECT_NEAR(c.chi[0][mesh.node_index({i, j})], c.chi[0][mesh.node_index({i, 0})], 1e-10);
  // Piecewise linear: slope ā/α − 1 = 0.6 on the α layer, ā/β − 1 = −0.6 on the β layer.
  const double h = 1.0 / 16.0;
  for (int i = 0; i < 16; ++i) {
    const double slope = (c.chi[0][mesh.node_index({i + 1, 3})] - c.chi[0][mesh.node_index({i, 3})]) / h;
    EXPECT_NEAR(slope, i < 8 ? 0.6 : -0.6, 1e-8) << "element " << i;
  }
}

TEST(Tensor, LaminateHarmonicAndArithmeticMeans) {
  const auto field = CoefficientField<2>::laminate(0, 1.0, 4.0, 0.5);
  const auto t = homogenized_tensor(field, solve_correctors(field, unit_mesh<2>(64)));
  // 2αβ/(α+β) across layers, (α+β)/2 along them.
  EXPECT_NEAR(t.matrix[0][0], 1.6, 1e-8);
  EXPECT_NEAR(t.matrix[1][1], 2.5, 1e-8);
  EXPECT_NEAR(t.matrix[0][1], 0.0, 1e-8);
  EXPECT_NEAR(t.matrix[1][0], 0.0, 1e-8);
}

TEST(Tensor, LaminateAlongSecondAxis) {
  const auto field = CoefficientField<2>::laminate(1, 2.0, 3.0, 0.25);
  const auto t = homogenized_tensor(field, solve_correctors(field, unit_mesh<2>(16)));
  const double harmonic = 1.0 / (0.25 / 2.0 + 0.75 / 3.0);
  const double arithmetic = 0.25 * 2.0 + 0.75 * 3.0;
  EXPECT_NEAR(t.matrix[1][1], harmonic, 1e-8);
  EXPECT_NEAR(t.matrix[0][0], arithmetic, 1e-8);
}

TEST(Tensor, CheckerboardApproachesGeometricMean) {
  const auto field = CoefficientField<2>::checkerboard(1.0, 4.0);
  const auto t64 = homogenized_tensor(field, solve_correctors(field, unit_mesh<2>(64)));
  const auto t128 = homogenized_tensor(field, solve_correctors(field, unit_mesh<2>(128)));
  double d64 = 0.0, d128 = 0.0;
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j) {
      const double target = i == j ? 2.0 : 0.0;
      d64 = std::max(d64, std::abs(t64.matrix[i][j] - target));
      d128 = std::max(d128, std::abs(t128.matrix[i][j] - target));
    }
  EXPECT_LE(d128, 0.05);
  EXPECT_LT(d128, d64);
  // Q1 energy is an upper bound on the exact tensor along each axis.
  EXPECT_GT(t128.matrix[0][0], 2.0);
  EXPECT_LT(t128.matrix[0][0], t64.matrix[0][0]);
}

TEST(Tensor, RejectsCorrectorsOnForeignMesh) {
  const auto field = CoefficientField<2>::scalar_cosine(2.0, 1.0, 0);
  auto c = solve_correctors(field, unit_mesh<2>(8));
  c.chi[0] = ScalarField<2>(unit_mesh<2>(4));
  EXPECT_THROW(homogenized_tensor(field, c), Error);
}

TEST(Correctors, RejectsNonCellMesh) {
  const auto field = CoefficientField<2>::scalar_cosine(2.0, 1.0, 0);
  EXPECT_THROW(solve_correctors(field, build_mesh<2>({0.0, 0.0}, {2.0, 1.0}, {8, 4})), Error);
  EXPECT_THROW(solve_correctors(field, unit_mesh<2>(8, Shape::l_shape)), Error);
}

TEST(Correctors, RejectsNonElliptic) {
  EXPECT_THROW(solve_correctors(CoefficientField<1>::scalar_cosine(0.5, 1.0, 0), unit_mesh<1>(8)), Error);
}

TEST(Correctors, ZeroMeanAndPeriodic) {
  const auto field = CoefficientField<2>::checkerboard(1.0, 10.0);
  const auto mesh = unit_mesh<2>(24);
  const auto c = solve_correctors(field, mesh);
  for (int i = 0; i < 2; ++i) {
    EXPECT_LE(std::abs(mean_of(c.chi[i])), 1e-10);
    for (int j = 0; j <= 24; ++j) {
      EXPECT_EQ(c.chi[i][mesh.node_index({0, j})], c.chi[i][mesh.node_index({24, j})]);
      EXPECT_EQ(c.chi[i][mesh.node_index({j, 0})], c.chi[i][mesh.node_index({j, 24})]);
    }
  }
}

TEST(Tensor, EnergyAndFluxFormsAgree) {
  for (const auto& field : {CoefficientField<2>::scalar_cosine(2.0, 1.0, 1), CoefficientField<2>::checkerboard(1.0, 4.0),
                            CoefficientField<2>::laminate(0, 1.0, 9.0, 0.375)}) {
    const auto c = solve_correctors(field, unit_mesh<2>(32), 1e-12);
    const auto energy = homogenized_tensor(field, c).matrix;
    const auto flux = homogenized_tensor_flux_form(field, c);
    for (int i = 0; i < 2; ++i)
      for (int j = 0; j < 2; ++j) EXPECT_NEAR(energy[i][j], flux[i][j], 1e-10) << field.kind_name();
  }
}

TEST(Tensor, SymmetricAndInsideEllipticityInterval) {
  const auto field = CoefficientField<2>::checkerboard(1.0, 4.0);
  const auto c = solve_correctors(field, unit_mesh<2>(32));
  const auto t = homogenized_tensor(field, c);
  EXPECT_LE(max_asymmetry<2>(t.matrix), 1e-10);
  const auto [lo, hi] = symmetric_eigen_range<2>(t.matrix);
  EXPECT_GE(lo, t.ellipticity.lower - 1e-8);
  EXPECT_LE(hi, t.ellipticity.upper + 1e-8);
}

TEST(Correctors, SymmetricAdjointsCoincide) {
  const auto field = CoefficientField<2>::scalar_cosine(2.0, 1.0, 0);
  const auto c = solve_correctors(field, unit_mesh<2>(16));
  for (int i = 0; i < 2; ++i) EXPECT_EQ(c.chi_adjoint[i].values(), c.chi[i].values());
}

TEST(Correctors, ConstantSkewPartLeavesCorrectorsAndShiftsTensor) {
  // A = S(y) + K with K constant and skew: ∫_Y K e_i·∇ψ vanishes for periodic ψ,
  // so χ and χ̄ are the correctors of S, and 𝒜 = 𝒜(S) + K.
  std::vector<Mat<2>> sym_cells, cells;
  const double values[4] = {1.0, 3.0, 2.0, 5.0};
  for (double v : values) {
    sym_cells.push_back(identity_matrix<2>(v));
    Mat<2> m = identity_matrix<2>(v);
    m[0][1] = 0.4;
    m[1][0] = -0.4;
    cells.push_back(m);
  }
  const auto sym = CoefficientField<2>::grid_table(2, sym_cells);
  const auto skew = CoefficientField<2>::grid_table(2, cells);
  const auto mesh = unit_mesh<2>(16);
  const auto cs = solve_correctors(sym, mesh, 1e-12);
  const auto ck = solve_correctors(skew, mesh, 1e-12);
  for (int i = 0; i < 2; ++i) {
    double scale = 0.0;
    for (double v : cs.chi[i].values()) scale = std::max(scale, std::abs(v));
    for (std::size_t n = 0; n < mesh.node_count(); ++n) {
      EXPECT_NEAR(ck.chi[i][n], cs.chi[i][n], 1e-9 * scale);
      EXPECT_NEAR(ck.chi_adjoint[i][n], ck.chi[i][n], 1e-9 * scale);
    }
  }
  const auto ts = homogenized_tensor(sym, cs).matrix;
  const auto tk = homogenized_tensor(skew, ck).matrix;
  EXPECT_NEAR(tk[0][0], ts[0][0], 1e-9);
  EXPECT_NEAR(tk[1][1], ts[1][1], 1e-9);
  EXPECT_NEAR(tk[0][1] - ts[0][1], 0.4, 1e-9);
  EXPECT_NEAR(tk[1][0] - ts[1][0], -0.4, 1e-9);
}

TEST(Tensor, MeshConvergenceIsMonotone) {
  const auto field = CoefficientField<2>::scalar_cosine(2.0, 1.0, 0);
  std::vector<Mat<2>> t;
  for (int d : {16, 32, 64, 128, 256})
    t.push_back(homogenized_tensor(field, solve_correctors(field, unit_mesh<2>(d), 1e-12)).matrix);
  std::vector<double> diffs;
  for (std::size_t k = 0; k + 1 < t.size(); ++k) {
    double d = 0.0;
    for (int i = 0; i < 2; ++i)
      for (int j = 0; j < 2; ++j) d = std::max(d, std::abs(t[k][i][j] - t[k + 1][i][j]));
    diffs.push_back(d);
  }
  for (std::size_t k = 0; k + 1 < diffs.size(); ++k) EXPECT_LT(diffs[k + 1], diffs[k]) << "step " << k;
  EXPECT_NEAR(t.back()[0][0], std::sqrt(3.0), 1e-4);
  EXPECT_NEAR(t.back()[1][1], 2.0, 1e-12);
}
