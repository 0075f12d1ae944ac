#include <gtest/gtest.h>

#include <cmath>

#include "homog/sparse.hpp"

using namespace homog;

namespace {

auto identity2 = [](const Vec<2>&) { return identity_matrix<2>(1.0); };

SparseSystem identity_system(int n) {
  SparseSystem s;
  s.matrix.rows = n;
  s.matrix.row_offsets.clear();
  s.matrix.row_offsets.push_back(0);
  for (int i = 0; i < n; ++i) {
    s.matrix.cols.push_back(i);
    s.matrix.vals.push_back(1.0);
    s.matrix.row_offsets.push_back(s.matrix.cols.size());
  }
  s.dofs.dof_count = n;
  s.dofs.node_to_dof.resize(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) s.dofs.node_to_dof[static_cast<std::size_t>(i)] = i;
  return s;
}

}  // namespace

TEST(Stiffness, HandOneDimensional) {
  const auto s = assemble_stiffness(unit_mesh<1>(2), [](const Vec<1>&) { return identity_matrix<1>(1.0); },
                                    DofMap::none(unit_mesh<1>(2)));
  ASSERT_EQ(s.dimension(), 3);
  const double expected[3][3] = {{2, -2, 0}, {-2, 4, -2}, {0, -2, 2}};
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) EXPECT_NEAR(s.matrix.at(i, j), expected[i][j], 1e-14);
}

TEST(Stiffness, RowSumsVanish) {
  const auto mesh = unit_mesh<2>(6, Shape::l_shape);
  const auto s = assemble_stiffness(mesh, identity2, DofMap::none(mesh));
  std::vector<double> ones(static_cast<std::size_t>(s.dimension()), 1.0), y;
  s.matrix.multiply(ones, y);
  for (double v : y) EXPECT_NEAR(v, 0.0, 1e-13);
}

TEST(Stiffness, SymmetricWithSortedColumns) {
  const auto mesh = unit_mesh<2>(6);
  const auto s = assemble_stiffness(
      mesh, [](const Vec<2>& x) { return identity_matrix<2>(2.0 + std::sin(7.0 * x[0] * x[1])); },
      DofMap::dirichlet_boundary(mesh));
  EXPECT_LE(s.matrix.max_asymmetry(), 1e-13 * s.matrix.max_abs());
  for (int i = 0; i < s.matrix.rows; ++i)
    for (std::size_t k = s.matrix.row_offsets[i] + 1; k < s.matrix.row_offsets[i + 1]; ++k)
      EXPECT_LT(s.matrix.cols[k - 1], s.matrix.cols[k]);
}

TEST(Stiffness, PeriodicFoldingCounts) {
  const auto mesh = unit_mesh<2>(8);
  const auto d = DofMap::periodic(mesh);
  EXPECT_EQ(d.dof_count, 64);
  EXPECT_TRUE(d.singular);
  // Opposite faces and all four corners share unknowns.
  EXPECT_EQ(d.node_to_dof[mesh.node_index({0, 3})], d.node_to_dof[mesh.node_index({8, 3})]);
  EXPECT_EQ(d.node_to_dof[mesh.node_index({0, 0})], d.node_to_dof[mesh.node_index({8, 8})]);
  const auto one = DofMap::periodic(unit_mesh<1>(5));
  EXPECT_EQ(one.dof_count, 5);
}

TEST(Stiffness, PeriodicRequiresBox) {
  EXPECT_THROW(DofMap::periodic(unit_mesh<2>(4, Shape::l_shape)), Error);
}

TEST(Stiffness, RejectsNonElliptic) {
  const auto mesh = unit_mesh<2>(2);
  Mat<2> bad{{{1.0, 2.0}, {2.0, 1.0}}};
  EXPECT_THROW(assemble_stiffness(mesh, [&](const Vec<2>&) { return bad; }, DofMap::none(mesh)), Error);
  EXPECT_THROW(assemble_stiffness(mesh, [](const Vec<2>&) { return identity_matrix<2>(NAN); }, DofMap::none(mesh)),
               Error);
}

TEST(Stiffness, NonSymmetricSamplerYieldingAsymmetricMatrixThrows) {
  const auto mesh = unit_mesh<2>(4);
  // A skew part that varies in space does not cancel in assembly.
  const auto sampler = [](const Vec<2>& x) {
    Mat<2> a = identity_matrix<2>(2.0);
    a[0][1] = x[0];
    a[1][0] = -x[0];
    return a;
  };
  EXPECT_THROW(assemble_stiffness(mesh, sampler, DofMap::dirichlet_boundary(mesh)), Error);
}

TEST(Cg, IdentitySystem) {
  const auto s = identity_system(5);
  const std::vector<double> r{1.0, -2.0, 3.0, 0.5, 0.0};
  const auto res = cg_solve(s, r);
  for (std::size_t i = 0; i < r.size(); ++i) EXPECT_NEAR(res.x[i], r[i], 1e-14);
  EXPECT_LE(res.relative_residual, 1e-10);
}

TEST(Cg, DirichletLaplacianMidpoint) {
  const auto mesh = unit_mesh<1>(2);
  const auto s = assemble_stiffness(mesh, [](const Vec<1>&) { return identity_matrix<1>(1.0); },
                                    DofMap::dirichlet_boundary(mesh));
  ASSERT_EQ(s.dimension(), 1);
  const auto rhs = assemble_load(mesh, s.dofs, [](const Index<1>&, std::size_t, const Vec<1>&) {
    return std::make_pair(1.0, Vec<1>{});
  });
  const auto res = cg_solve(s, rhs);
  EXPECT_NEAR(res.x[0], 0.125, 1e-14);
}

TEST(Cg, ZeroMeanZeroRhs) {
  const auto mesh = unit_mesh<2>(4);
  const auto s = assemble_stiffness(mesh, identity2, DofMap::zero_mean(mesh));
  const auto res = cg_solve(s, std::vector<double>(static_cast<std::size_t>(s.dimension()), 0.0));
  for (double v : res.x) EXPECT_EQ(v, 0.0);
}

TEST(Cg, ZeroMeanReturnsMeanFreeSolution) {
  const auto mesh = unit_mesh<2>(8);
  const auto s = assemble_stiffness(mesh, identity2, DofMap::zero_mean(mesh));
  const auto rhs = assemble_load(mesh, s.dofs, [](const Index<2>&, std::size_t, const Vec<2>& x) {
    return std::make_pair(std::cos(M_PI * x[0]), Vec<2>{});
  });
  const auto res = cg_solve(s, rhs);
  double mean = 0.0;
  for (double v : res.x) mean += v;
  EXPECT_NEAR(mean / static_cast<double>(res.x.size()), 0.0, 1e-13);
  std::vector<double> ax;
  s.matrix.multiply(res.x, ax);
  double r2 = 0.0, b2 = 0.0;
  for (std::size_t i = 0; i < ax.size(); ++i) {
    r2 += (ax[i] - rhs[i]) * (ax[i] - rhs[i]);
    b2 += rhs[i] * rhs[i];
  }
  EXPECT_LE(std::sqrt(r2 / b2), 1e-10);
}

TEST(Cg, IncompatibleRhsForSingularSystemThrows) {
  const auto mesh = unit_mesh<2>(4);
  const auto s = assemble_stiffness(mesh, identity2, DofMap::zero_mean(mesh));
  EXPECT_THROW(cg_solve(s, std::vector<double>(static_cast<std::size_t>(s.dimension()), 1.0)), SolverError);
}

TEST(Cg, IterationCapReported) {
  const auto mesh = unit_mesh<2>(32);
  const auto s = assemble_stiffness(mesh, identity2, DofMap::dirichlet_boundary(mesh));
  const std::vector<double> rhs(static_cast<std::size_t>(s.dimension()), 1.0);
  try {
    cg_solve(s, rhs, 1e-12, 3);
    FAIL() << "expected SolverError";
  } catch (const SolverError& e) {
    EXPECT_GE(e.iterations(), 3);
    EXPECT_GT(e.residual(), 1e-12);
  }
}

TEST(Cg, ResidualContractAndDeterminism) {
  const auto mesh = unit_mesh<2>(20);
  const auto sampler = [](const Vec<2>& x) {
    return identity_matrix<2>(1.0 + 0.9 * std::cos(2.0 * M_PI * 5.0 * x[1]));
  };
  const auto s = assemble_stiffness(mesh, sampler, DofMap::dirichlet_boundary(mesh));
  const auto rhs = assemble_load(mesh, s.dofs, [](const Index<2>&, std::size_t, const Vec<2>& x) {
    return std::make_pair(x[0] + 1.0, Vec<2>{});
  });
  const auto a = cg_solve(s, rhs, 1e-10);
  const auto b = cg_solve(s, rhs, 1e-10);
  EXPECT_LE(a.relative_residual, 1e-10);
  EXPECT_EQ(a.x, b.x);
  EXPECT_EQ(a.iterations, b.iterations);
  EXPECT_EQ(default_max_iterations(10000), 50 * 100 + 1000);
}
