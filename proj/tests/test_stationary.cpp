#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "fixtures.hpp"
#include "oracles/newton_oracle.hpp"

using namespace netchemo;
using fixtures::ArcParams;

namespace {

ArcParams with_ab(double a, double b) {
  ArcParams p;
  p.production = a;
  p.degradation = b;
  return p;
}

StationaryProblem two_arc_problem(double mass, std::size_t n = 64) {
  const auto net = validate_network(fixtures::two_arc_spec(with_ab(1, 1), with_ab(2, 1)));
  return {net, build_grid_uniform(net, n), mass};
}

NetworkField random_phi(std::mt19937& rng, const Grid& g, double scale) {
  std::uniform_real_distribution<double> d(0.0, scale);
  return NetworkField::sample(g, Centering::vertex, [&](ArcIndex, double) { return d(rng); });
}

/// max over inner nodes and star pairs of |ratio - 1| with
/// ratio = C_j exp(phi_j(N)/lambda_j) / (C_i exp(phi_i(N)/lambda_i)).
double node_ratio_defect(const ValidatedNetwork& net, const NetworkField& phi, const std::vector<double>& c) {
  double worst = 0.0;
  for (const auto& star : net.inner_nodes()) {
    auto u_at = [&](std::size_t p) {
      const ArcIndex i = star.arcs[p];
      return c[i] * std::exp(phi[i].trace(star.end(p)) / net.arc(i).lambda);
    };
    for (std::size_t p = 1; p < star.size(); ++p) worst = std::max(worst, std::abs(u_at(p) / u_at(0) - 1.0));
  }
  return worst;
}

double mass_of(const ValidatedNetwork& net, const NetworkField& phi, const std::vector<double>& c) {
  double m = 0.0;
  for (ArcIndex i = 0; i < net.arc_count(); ++i) {
    std::vector<double> e;
    for (double p : phi[i].values) e.push_back(std::exp(p / net.arc(i).lambda));
    m += c[i] * quadrature(e, Centering::vertex, phi[i].dx());
  }
  return m;
}

}  // namespace

TEST(BuildConstants, ZeroIterateOnTwoUnitArcs) {
  const auto net = validate_network(fixtures::two_arc_spec({}, {}));
  const StationaryProblem prob{net, build_grid_uniform(net, 16), 2.0};
  const auto c = build_constants(NetworkField::zeros(prob.grid, Centering::vertex), prob);
  EXPECT_NEAR(c[0], 1.0, 1e-15);
  EXPECT_NEAR(c[1], 1.0, 1e-15);
}

TEST(BuildConstants, ZeroMassGivesZeroConstants) {
  const auto net = fixtures::y_graph();
  const StationaryProblem prob{net, build_grid_uniform(net, 16), 0.0};
  std::mt19937 rng(1);
  for (double c : build_constants(random_phi(rng, prob.grid, 1.0), prob)) EXPECT_EQ(c, 0.0);
}

TEST(BuildConstants, NodeRatiosAndMassOnRandomIterates) {
  std::mt19937 rng(2024);
  for (int trial = 0; trial < 30; ++trial) {
    const auto net = trial < 10 ? fixtures::y_graph() : validate_network(fixtures::random_tree_spec(rng, 2 + trial % 8));
    const StationaryProblem prob{net, build_grid(net, 0.05), 0.7};
    const auto phi = random_phi(rng, prob.grid, 3.0);
    const auto c = build_constants(phi, prob);
    EXPECT_LE(node_ratio_defect(net, phi, c), 1e-12);
    EXPECT_NEAR(mass_of(net, phi, c), 0.7, 1e-12);
  }
}

TEST(BuildConstants, RejectsNegativeIterateAndCycles) {
  const auto net = fixtures::y_graph();
  const StationaryProblem prob{net, build_grid_uniform(net, 8), 0.1};
  auto phi = NetworkField::constant(prob.grid, Centering::vertex, 1.0);
  phi[2].values[3] = -0.5;
  try {
    build_constants(phi, prob);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::negative_phi);
  }

  NetworkSpec tri;
  tri.arcs = {fixtures::make_arc(1, 0, 1, {}), fixtures::make_arc(2, 1, 2, {}), fixtures::make_arc(3, 2, 0, {})};
  fixtures::couple_all(tri, 1, 1);
  const auto cyc = validate_network(tri);
  const StationaryProblem cp{cyc, build_grid_uniform(cyc, 8), 0.1};
  try {
    solve_stationary(cp);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::cyclic_graph);
  }
}

TEST(FixedPointStep, ZeroMassAndConstantState) {
  const auto net = fixtures::y_graph();
  const auto g = build_grid_uniform(net, 32);
  std::mt19937 rng(9);
  EXPECT_EQ(fixed_point_step(random_phi(rng, g, 1.0), {net, g, 0.0}).max_abs(), 0.0);

  const double mass = 0.3;
  const auto phi0 = NetworkField::constant(g, Centering::vertex, 2.0 * mass / 3.0);
  const auto phi1 = fixed_point_step(phi0, {net, g, mass});
  EXPECT_LE(fixtures::sup_diff(phi0, phi1), 1e-13);
}

TEST(FixedPointStep, ComposesConstantsAndEllipticSolve) {
  const auto prob = two_arc_problem(0.05, 32);
  std::mt19937 rng(4);
  const auto phi0 = random_phi(rng, prob.grid, 0.2);
  const auto c = build_constants(phi0, prob);
  auto f = phi0;
  for (ArcIndex i = 0; i < 2; ++i)
    for (double& v : f[i].values) v = prob.net.arc(i).production * c[i] * std::exp(v / prob.net.arc(i).lambda);
  const auto expect = solve_elliptic(assemble_operator(prob.net, prob.grid), f);
  EXPECT_LE(fixtures::sup_diff(fixed_point_step(phi0, prob), expect), 1e-15);
}

TEST(SolveStationary, ConstantSolutionOnYGraph) {
  const auto net = fixtures::y_graph();
  const StationaryProblem prob{net, build_grid_uniform(net, 64), 0.3};
  const auto sol = solve_stationary(prob);
  EXPECT_TRUE(sol.converged);
  EXPECT_LE(sol.iterations, 50u);
  for (const auto& a : sol.u.arcs)
    for (double v : a.values) EXPECT_NEAR(v, 0.1, 1e-9);
  for (const auto& a : sol.phi.arcs)
    for (double v : a.values) EXPECT_NEAR(v, 0.2, 2e-9);
  EXPECT_EQ(sol.velocity(prob.grid).max_abs(), 0.0);
  EXPECT_TRUE(verify_stationary(sol, prob).passed());
}

TEST(SolveStationary, ZeroMassConvergesImmediately) {
  const auto net = fixtures::y_graph();
  const auto sol = solve_stationary({net, build_grid_uniform(net, 16), 0.0});
  EXPECT_EQ(sol.iterations, 1u);
  EXPECT_EQ(sol.phi.max_abs(), 0.0);
  EXPECT_EQ(sol.u.max_abs(), 0.0);
}

TEST(SolveStationary, TwoArcMatchesNewtonOracle) {
  const auto prob = two_arc_problem(0.05);
  const auto sol = solve_stationary(prob);
  const auto ref = oracle::newton_stationary(prob.net, prob.grid, prob.mass);
  ASSERT_LT(ref.residual, 1e-12);
  double err = 0.0;
  for (ArcIndex i = 0; i < 2; ++i)
    for (std::size_t k = 0; k < ref.phi[i].size(); ++k) err = std::max(err, std::abs(sol.phi[i].values[k] - ref.phi[i][k]));
  EXPECT_LE(err, 1e-8);
  for (ArcIndex i = 0; i < 2; ++i) EXPECT_NEAR(sol.constants[i], ref.constants[i], 1e-8 * ref.constants[i]);
}

TEST(SolveStationary, RandomTreesMatchNewtonOracle) {
  std::mt19937 rng(77);
  for (int trial = 0; trial < 4; ++trial) {
    const auto net = validate_network(fixtures::random_tree_spec(rng, 3 + trial));
    const StationaryProblem prob{net, build_grid(net, 0.05), 0.02};
    const auto sol = solve_stationary(prob);
    const auto ref = oracle::newton_stationary(net, prob.grid, prob.mass);
    double err = 0.0;
    for (ArcIndex i = 0; i < net.arc_count(); ++i)
      for (std::size_t k = 0; k < ref.phi[i].size(); ++k)
        err = std::max(err, std::abs(sol.phi[i].values[k] - ref.phi[i][k]));
    EXPECT_LE(err, 1e-8) << "trial " << trial;
  }
}

TEST(SolveStationary, TwoArcSolutionIsNotConstant) {
  const auto prob = two_arc_problem(0.05);
  const auto sol = solve_stationary(prob);
  double phix = 0.0;
  for (const auto& a : derivative(sol.phi).arcs)
    for (double v : a.values) phix = std::max(phix, std::abs(v));
  EXPECT_GT(phix, 100 * prob.tol);
  EXPECT_LE(node_jump(sol.u, prob.net), 1e-8 * sol.u.max_abs());
  const auto rep = verify_stationary(sol, prob);
  EXPECT_TRUE(rep.passed());
  EXPECT_LT(rep.get("gradient_bound").value, rep.get("gradient_bound").bound);
}

TEST(SolveStationary, RootIndependence) {
  std::mt19937 rng(8);
  const auto net = validate_network(fixtures::random_tree_spec(rng, 6));
  StationaryProblem prob{net, build_grid(net, 0.05), 0.05};
  const auto base = solve_stationary(prob);
  for (ArcIndex r = 1; r < net.arc_count(); ++r) {
    prob.root_arc = r;
    EXPECT_LE(h2_distance(solve_stationary(prob).phi, base.phi), 10 * prob.tol);
  }
}

TEST(SolveStationary, IdempotentAtFixedPoint) {
  const auto prob = two_arc_problem(0.05);
  const auto sol = solve_stationary(prob);
  EXPECT_LE(h2_distance(fixed_point_step(sol.phi, prob), sol.phi), prob.tol);
}

TEST(SolveStationary, ContractionRatioShrinksWithMass) {
  double prev = 1.0;
  for (double mass : {0.2, 0.05, 0.01}) {
    const auto prob = two_arc_problem(mass, 32);
    const auto sol = StationaryMap(prob).iterate();
    ASSERT_GE(sol.increments.size(), 3u);
    const double ratio = sol.increments[2] / sol.increments[1];
    EXPECT_LT(ratio, prev) << "mass " << mass;
    prev = ratio;
  }
}

TEST(SolveStationary, NoConvergenceReportsRatio) {
  auto prob = two_arc_problem(0.05, 32);
  prob.max_iter = 2;
  try {
    solve_stationary(prob);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::no_convergence);
    EXPECT_NE(std::string(e.what()).find("contraction ratio"), std::string::npos);
  }
}

TEST(VerifyStationary, TruncatedIterationFailsResidualCheck) {
  auto prob = two_arc_problem(0.05);
  prob.max_iter = 1;
  const auto sol = StationaryMap(prob).iterate();
  const auto rep = verify_stationary(sol, prob);
  EXPECT_FALSE(rep.get("fixed_point_residual").passed);
  EXPECT_FALSE(rep.passed());
}

TEST(VerifyStationary, GradientBoundOnParameterMatrix) {
  std::mt19937 rng(123);
  int checked = 0;
  for (int trial = 0; trial < 12; ++trial) {
    const auto net = validate_network(fixtures::random_tree_spec(rng, 2 + trial % 5));
    const StationaryProblem prob{net, build_grid(net, 0.05), 0.01 + 0.01 * (trial % 4)};
    const auto sol = solve_stationary(prob);
    const auto& c = verify_stationary(sol, prob).get("gradient_bound");
    EXPECT_TRUE(c.passed) << c.value << " vs " << c.bound;
    ++checked;
  }
  EXPECT_GE(checked, 10);
}

TEST(Rigidity, SmallMassOnYGraphIsConstant) {
  const auto net = fixtures::y_graph();
  const auto g = build_grid_uniform(net, 32);
  EXPECT_TRUE(small_solution_rigidity_test(net, g, 0.01).constant);
  EXPECT_TRUE(small_solution_rigidity_test(net, g, 0.0).constant);
}

TEST(Rigidity, RefusesNonUniformRatio) {
  const auto prob = two_arc_problem(0.05, 16);
  try {
    small_solution_rigidity_test(prob.net, prob.grid, 0.05);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::uniform_ratio_required);
  }
}

TEST(ConstantState, ExistsOnCyclicNetworks) {
  NetworkSpec tri;
  tri.arcs = {fixtures::make_arc(1, 0, 1, {}), fixtures::make_arc(2, 1, 2, {}), fixtures::make_arc(3, 2, 0, {})};
  fixtures::couple_all(tri, 1, 1);
  const auto net = validate_network(tri);
  const auto c = ConstantState::from_mass(net, 0.6);
  EXPECT_DOUBLE_EQ(c.ubar, 0.2);
  EXPECT_DOUBLE_EQ(c.phibar, 0.4);
}
