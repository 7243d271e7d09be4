#include <gtest/gtest.h>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <random>

#include "fixtures.hpp"

using namespace netchemo;
using fixtures::ArcParams;
using fixtures::make_arc;

namespace {

ValidatedNetwork single_arc(const ArcParams& p = {}) {
  NetworkSpec s;
  s.arcs = {make_arc(1, 0, 1, p)};
  return validate_network(s);
}

Eigen::MatrixXd dense(const EllipticSystem& sys) { return Eigen::MatrixXd(sys.matrix()); }

double weighted_sum(const NetworkField& f, const ValidatedNetwork& net, bool use_b) {
  double s = 0.0;
  const auto per = integrate(f).per_arc;
  for (ArcIndex i = 0; i < net.arc_count(); ++i) s += (use_b ? net.arc(i).degradation : 1.0) * per[i];
  return s;
}

NetworkField random_nonnegative(std::mt19937& rng, const Grid& g) {
  std::uniform_real_distribution<double> d(0.0, 1.0);
  std::bernoulli_distribution sparse(0.2);
  return NetworkField::sample(g, Centering::vertex, [&](ArcIndex, double) { return sparse(rng) ? 0.0 : d(rng); });
}

}  // namespace

TEST(AssembleOperator, SingleArcIsNeumannReactionDiffusion) {
  ArcParams p;
  p.diffusion = 2.0;
  p.degradation = 3.0;
  const auto net = single_arc(p);
  const auto g = build_grid_uniform(net, 4);
  const Eigen::MatrixXd m = dense(assemble_operator(net, g));
  const double dx = 0.25, d = 2.0 / dx, r = 3.0 * dx;
  Eigen::MatrixXd expect = Eigen::MatrixXd::Zero(5, 5);
  for (int k = 0; k < 5; ++k) {
    const bool end = k == 0 || k == 4;
    expect(k, k) = end ? d + r / 2 : 2 * d + r;
    if (k > 0) expect(k, k - 1) = -d;
    if (k < 4) expect(k, k + 1) = -d;
  }
  EXPECT_LT((m - expect).cwiseAbs().maxCoeff(), 1e-14);
}

TEST(AssembleOperator, ZeroAlphaDecouplesArcs) {
  const auto net = validate_network(fixtures::two_arc_spec({}, {}, 0.0, 1.0));
  const Eigen::MatrixXd m = dense(assemble_operator(net, build_grid_uniform(net, 4)));
  EXPECT_EQ(m.block(0, 5, 5, 5).cwiseAbs().maxCoeff(), 0.0);
  EXPECT_EQ(m.block(5, 0, 5, 5).cwiseAbs().maxCoeff(), 0.0);
}

TEST(AssembleOperator, CouplingRowsMatchHandAssembly) {
  // Arc 1: 1 -> 0 (node at its head, row 4); arc 2: 0 -> 2 (node at its tail, row 5).
  const double alpha = 1.0;
  const auto net = validate_network(fixtures::two_arc_spec({}, {}, alpha, 1.0));
  const Eigen::MatrixXd m = dense(assemble_operator(net, build_grid_uniform(net, 4)));
  const double dx = 0.25, d = 1.0 / dx, r = 1.0 * dx;
  // Half-cell balance at the node for arc 1:
  //   D (phi_4 - phi_3)/dx + alpha (phi_4 - phi_5) + b dx/2 phi_4 = dx/2 F_4
  EXPECT_DOUBLE_EQ(m(4, 4), d + r / 2 + alpha);
  EXPECT_DOUBLE_EQ(m(4, 3), -d);
  EXPECT_DOUBLE_EQ(m(4, 5), -alpha);
  EXPECT_DOUBLE_EQ(m(5, 5), d + r / 2 + alpha);
  EXPECT_DOUBLE_EQ(m(5, 6), -d);
  EXPECT_DOUBLE_EQ(m(5, 4), -alpha);
  // Outer rows untouched by the coupling.
  EXPECT_DOUBLE_EQ(m(0, 0), d + r / 2);
  EXPECT_DOUBLE_EQ(m(9, 9), d + r / 2);
}

TEST(AssembleOperator, SymmetricExactlyAndPositiveDefinite) {
  std::mt19937 rng(5);
  for (int trial = 0; trial < 10; ++trial) {
    const auto net = validate_network(fixtures::random_tree_spec(rng, 2 + trial));
    const Eigen::MatrixXd m = dense(assemble_operator(net, build_grid(net, 0.1)));
    EXPECT_EQ((m - m.transpose()).cwiseAbs().maxCoeff(), 0.0);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(m);
    EXPECT_GT(eig.eigenvalues().minCoeff(), 0.0);
  }
}

TEST(SolveElliptic, ConstantAndZeroSources) {
  ArcParams p;
  p.degradation = 2.5;
  const auto net = fixtures::y_graph(p, 0.7, 1.0);
  const auto g = build_grid_uniform(net, 32);
  const auto sys = assemble_operator(net, g);
  const auto phi = solve_elliptic(sys, NetworkField::constant(g, Centering::vertex, 5.0));
  for (const auto& a : phi.arcs)
    for (double v : a.values) EXPECT_NEAR(v, 2.0, 1e-13);
  EXPECT_EQ(solve_elliptic(sys, NetworkField::zeros(g, Centering::vertex)).max_abs(), 0.0);
}

TEST(SolveElliptic, ManufacturedCosineSecondOrder) {
  const auto net = single_arc();
  double prev = 0.0;
  for (std::size_t n : {16, 32, 64, 128}) {
    const auto g = build_grid_uniform(net, n);
    const auto f = NetworkField::sample(g, Centering::vertex,
                                        [](ArcIndex, double x) { return (1.0 + M_PI * M_PI) * std::cos(M_PI * x); });
    const auto phi = solve_elliptic(assemble_operator(net, g), f);
    double err = 0.0;
    for (std::size_t k = 0; k <= n; ++k) err = std::max(err, std::abs(phi[0].values[k] - std::cos(M_PI * phi[0].x(k))));
    if (prev > 0.0) { EXPECT_GT(std::log2(prev / err), 1.9) << "n = " << n; }
    prev = err;
  }
}

TEST(SolveElliptic, ResidualAndIntegralIdentity) {
  std::mt19937 rng(17);
  for (int trial = 0; trial < 20; ++trial) {
    const auto net = validate_network(fixtures::random_tree_spec(rng, 1 + trial % 7));
    const auto g = build_grid(net, 0.05);
    const auto sys = assemble_operator(net, g);
    const auto f = random_nonnegative(rng, g);
    const auto phi = solve_elliptic(sys, f);
    EXPECT_LE(sys.relative_residual(phi, f), 1e-10);
    const double lhs = weighted_sum(phi, net, true);
    const double rhs = weighted_sum(f, net, false);
    EXPECT_NEAR(lhs, rhs, 1e-11 * rhs);
  }
}

TEST(SolveElliptic, IntegralIndependentOfCoupling) {
  std::mt19937 rng(23);
  ArcParams p1, p2;
  p2.degradation = 3.0;
  p2.length = 0.6;
  for (double alpha : {0.0, 0.5, 5.0, 500.0}) {
    const auto net = validate_network(fixtures::two_arc_spec(p1, p2, alpha, 1.0));
    const auto g = build_grid(net, 0.02);
    std::mt19937 local(1);
    const auto f = random_nonnegative(local, g);
    const auto phi = solve_elliptic(assemble_operator(net, g), f);
    EXPECT_NEAR(weighted_sum(phi, net, true), weighted_sum(f, net, false), 1e-11);
  }
}

TEST(CheckPositivity, RandomNonnegativeSourcesOnRandomTrees) {
  std::mt19937 rng(31);
  for (int graph = 0; graph < 3; ++graph) {
    const auto net = validate_network(fixtures::random_tree_spec(rng, 4 + 2 * graph));
    const auto g = build_grid(net, 0.05);
    const auto sys = assemble_operator(net, g);
    for (int trial = 0; trial < 100; ++trial) {
      const auto phi = solve_elliptic(sys, random_nonnegative(rng, g));
      const auto c = check_positivity(phi);
      EXPECT_TRUE(c.nonnegative) << c.min_value;
    }
  }
  const auto net = fixtures::y_graph();
  const auto g = build_grid_uniform(net, 8);
  const auto z = check_positivity(solve_elliptic(assemble_operator(net, g), NetworkField::zeros(g, Centering::vertex)));
  EXPECT_TRUE(z.nonnegative);
  EXPECT_EQ(z.min_value, 0.0);
}

TEST(CheckPositivity, NegativeSpikeIsReported) {
  const auto net = fixtures::y_graph();
  const auto g = build_grid_uniform(net, 16);
  auto f = NetworkField::constant(g, Centering::vertex, 0.01);
  f[1].values[8] = -1e3;
  const auto c = check_positivity(solve_elliptic(assemble_operator(net, g), f));
  EXPECT_FALSE(c.nonnegative);
  EXPECT_LT(c.min_value, 0.0);
}

TEST(NodeFluxResidual, ConstantFieldIsBalanced) {
  const auto net = fixtures::y_graph();
  const auto g = build_grid_uniform(net, 16);
  const auto r = node_flux_residual(NetworkField::constant(g, Centering::vertex, 4.2), net, g);
  // Only round-off of the one-sided stencils remains.
  EXPECT_LE(r.max_balance(), 1e-12);
  EXPECT_LE(r.max_violation(), 1e-12);
}

TEST(NodeFluxResidual, SolverOutputSatisfiesTransmission) {
  std::mt19937 rng(41);
  for (int trial = 0; trial < 10; ++trial) {
    const auto net = validate_network(fixtures::random_tree_spec(rng, 2 + trial % 6));
    const auto g = build_grid(net, 0.05);
    const auto f = random_nonnegative(rng, g);
    const auto phi = solve_elliptic(assemble_operator(net, g), f);
    const auto r = node_flux_residual(phi, net, g, f);
    EXPECT_LE(r.max_balance(), 1e-8 * f.max_abs());
    EXPECT_LE(r.max_violation(), 1e-8 * f.max_abs());
  }
}

TEST(NodeFluxResidual, SmoothSolutionConvergesWithOneSidedStencil) {
  // Without the source the check uses the one-sided derivative; for a smooth
  // source its violation shrinks under refinement.
  const auto net = fixtures::y_graph({}, 2.0, 1.0);
  double prev = 0.0;
  for (std::size_t n : {32, 64, 128}) {
    const auto g = build_grid_uniform(net, n);
    const auto f = NetworkField::sample(g, Centering::vertex, [](ArcIndex i, double x) {
      return 1.0 + static_cast<double>(i) * std::cos(M_PI * x);
    });
    const auto phi = solve_elliptic(assemble_operator(net, g), f);
    const double v = node_flux_residual(phi, net, g).max_violation();
    if (prev > 0.0) { EXPECT_LT(v, 0.6 * prev); }
    prev = v;
  }
}

TEST(NodeFluxResidual, LinearInEndpointPerturbation) {
  const auto net = fixtures::y_graph();
  const auto g = build_grid_uniform(net, 16);
  const auto base = NetworkField::constant(g, Centering::vertex, 1.0);
  auto perturbed = [&](double eps) {
    auto f = base;
    f[0].values.back() += eps;
    return node_flux_residual(f, net, g).max_balance();
  };
  const double r1 = perturbed(1e-3), r2 = perturbed(2e-3), r4 = perturbed(4e-3);
  EXPECT_GT(r1, 0.0);
  EXPECT_NEAR(r2, 2 * r1, 1e-12);
  EXPECT_NEAR(r4, 4 * r1, 1e-12);
}

TEST(EllipticSystem, MatrixMarketDump) {
  const auto net = fixtures::y_graph();
  const auto sys = assemble_operator(net, build_grid_uniform(net, 4));
  const std::string path = ::testing::TempDir() + "netchemo_matrix.mtx";
  sys.write_matrix_market(path);
  std::ifstream in(path);
  std::string header;
  std::getline(in, header);
  EXPECT_EQ(header, "%%MatrixMarket matrix coordinate real general");
  std::size_t rows = 0, cols = 0, nnz = 0;
  in >> rows >> cols >> nnz;
  EXPECT_EQ(rows, 15u);
  EXPECT_EQ(nnz, static_cast<std::size_t>(sys.matrix().nonZeros()));
  std::remove(path.c_str());
}
