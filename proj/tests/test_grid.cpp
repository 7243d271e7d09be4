#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "fixtures.hpp"

using namespace netchemo;
using fixtures::ArcParams;
using fixtures::make_arc;

namespace {

ValidatedNetwork two_arcs_with_lengths(double l1, double l2) {
  ArcParams p1, p2;
  p1.length = l1;
  p2.length = l2;
  return validate_network(fixtures::two_arc_spec(p1, p2));
}

ValidatedNetwork single_arc(double length = 1.0) {
  NetworkSpec s;
  ArcParams p;
  p.length = length;
  s.arcs = {make_arc(1, 0, 1, p)};
  return validate_network(s);
}

NetworkField random_field(std::mt19937& rng, const Grid& g, Centering c) {
  std::uniform_real_distribution<double> d(-1.0, 1.0);
  return NetworkField::sample(g, c, [&](ArcIndex, double) { return d(rng); });
}

}  // namespace

TEST(BuildGrid, TargetSpacing) {
  const auto g = build_grid(two_arcs_with_lengths(1, 1), 0.25);
  EXPECT_EQ(g.cells, (std::vector<std::size_t>{4, 4}));

  try {
    build_grid(two_arcs_with_lengths(1, 0.5), 0.25);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::resolution_too_coarse);
    EXPECT_NE(std::string(e.what()).find("arc 2"), std::string::npos) << e.what();
  }

  const auto g2 = build_grid(two_arcs_with_lengths(2, 3), 0.1);
  EXPECT_EQ(g2.cells, (std::vector<std::size_t>{20, 30}));
  EXPECT_NEAR(g2.total_length(), 5.0, 1e-14);
}

TEST(BuildGrid, CountsAndShapes) {
  const auto net = fixtures::y_graph();
  EXPECT_THROW(build_grid(net, std::vector<std::size_t>{8, 8}), Error);
  EXPECT_THROW(build_grid(net, std::vector<std::size_t>{8, 3, 8}), Error);
  const auto g = build_grid(net, std::vector<std::size_t>{8, 16, 32});
  double total = 0.0;
  for (ArcIndex i = 0; i < 3; ++i) total += static_cast<double>(g.cells[i]) * g.dx(i);
  EXPECT_NEAR(total, 3.0, 1e-14);
}

TEST(Integrate, ConstantsZeroAndLinear) {
  const auto net = fixtures::y_graph();
  const auto g = build_grid_uniform(net, 16);
  EXPECT_NEAR(integrate(NetworkField::constant(g, Centering::cell, 1.0)).total, 3.0, 1e-14);
  EXPECT_NEAR(integrate(NetworkField::constant(g, Centering::vertex, 1.0)).total, 3.0, 1e-14);
  EXPECT_EQ(integrate(NetworkField::zeros(g, Centering::cell)).total, 0.0);

  const auto one = single_arc();
  const auto g1 = build_grid_uniform(one, 64);
  for (Centering c : {Centering::cell, Centering::vertex}) {
    const auto f = NetworkField::sample(g1, c, [](ArcIndex, double x) { return x; });
    EXPECT_NEAR(integrate(f).total, 0.5, 1e-14);  // both rules are exact for linear data
  }
}

TEST(Integrate, Linearity) {
  std::mt19937 rng(3);
  const auto net = validate_network(fixtures::random_tree_spec(rng, 5));
  const auto g = build_grid(net, 0.05);
  std::uniform_real_distribution<double> coef(-3.0, 3.0);
  for (int trial = 0; trial < 50; ++trial) {
    for (Centering c : {Centering::cell, Centering::vertex}) {
      const auto f = random_field(rng, g, c);
      const auto h = random_field(rng, g, c);
      const double a = coef(rng), b = coef(rng);
      const double lhs = integrate(combine(a, f, b, h)).total;
      const double rhs = a * integrate(f).total + b * integrate(h).total;
      EXPECT_NEAR(lhs, rhs, 1e-12 * (1.0 + std::abs(lhs)));
    }
  }
}

TEST(DiscreteNorms, ZeroAndConstant) {
  const auto net = two_arcs_with_lengths(0.5, 1.5);
  const auto g = build_grid(net, 0.05);
  const auto z = discrete_norms(NetworkField::zeros(g, Centering::vertex));
  EXPECT_EQ(z.l2, 0.0);
  EXPECT_EQ(z.linf, 0.0);
  EXPECT_EQ(z.h1, 0.0);
  EXPECT_EQ(*z.h2, 0.0);
  EXPECT_EQ(*z.w21, 0.0);

  const double c = 3.0;
  const auto n = discrete_norms(NetworkField::constant(g, Centering::vertex, c));
  EXPECT_NEAR(n.l2, c * std::sqrt(0.5) + c * std::sqrt(1.5), 1e-13);
  EXPECT_NEAR(n.h1, n.l2, 1e-13);
  EXPECT_NEAR(*n.h2, n.l2, 1e-13);
  EXPECT_NEAR(n.linf, c, 0.0);
}

TEST(DiscreteNorms, SineMatchesClosedForm) {
  const auto g = build_grid_uniform(single_arc(), 128);
  const auto f = NetworkField::sample(g, Centering::vertex, [](ArcIndex, double x) { return std::sin(M_PI * x); });
  const auto n = discrete_norms(f);
  // int sin^2 = 1/2, int (pi cos)^2 = pi^2/2, int (pi^2 sin)^2 = pi^4/2
  const double l2 = std::sqrt(0.5);
  const double h1 = std::sqrt(0.5 + M_PI * M_PI / 2);
  const double h2 = std::sqrt(0.5 + M_PI * M_PI / 2 + std::pow(M_PI, 4) / 2);
  EXPECT_NEAR(n.l2, l2, 0.01 * l2);
  EXPECT_NEAR(n.h1, h1, 0.01 * h1);
  EXPECT_NEAR(*n.h2, h2, 0.01 * h2);
  // W^{2,1}: 2/pi + 2 + 2 pi
  const double w21 = 2 / M_PI + 2 + 2 * M_PI;
  EXPECT_NEAR(*n.w21, w21, 0.01 * w21);
}

TEST(DiscreteNorms, RefinementConvergesAtLeastFirstOrder) {
  const double h1 = std::sqrt(0.5 + M_PI * M_PI / 2);
  double prev = 0.0;
  for (std::size_t n : {16, 32, 64, 128}) {
    const auto g = build_grid_uniform(single_arc(), n);
    const auto f = NetworkField::sample(g, Centering::vertex, [](ArcIndex, double x) { return std::sin(M_PI * x); });
    const double err = std::abs(discrete_norms(f).h1 - h1);
    if (prev > 0.0) { EXPECT_GE(std::log2(prev / err), 0.9) << "n = " << n; }
    prev = err;
  }
}

TEST(DiscreteNorms, DerivativeNeedsSamples) {
  EXPECT_THROW(derivative(std::vector<double>{1.0, 2.0}, 0.1), Error);
  EXPECT_THROW(second_derivative(std::vector<double>{1.0, 2.0, 3.0}, 0.1), Error);
}

TEST(DiscreteNorms, SeminormPropertiesOnRandomFields) {
  std::mt19937 rng(99);
  const auto net = validate_network(fixtures::random_tree_spec(rng, 4));
  const auto g = build_grid(net, 0.1);
  for (int trial = 0; trial < 100; ++trial) {
    const auto f = random_field(rng, g, Centering::vertex);
    const auto h = random_field(rng, g, Centering::vertex);
    const auto nf = discrete_norms(f), nh = discrete_norms(h), ns = discrete_norms(f + h);
    EXPECT_GT(nf.l2, 0.0);
    EXPECT_LE(ns.l1, nf.l1 + nh.l1 + 1e-12);
    EXPECT_LE(ns.l2, nf.l2 + nh.l2 + 1e-12);
    EXPECT_LE(ns.linf, nf.linf + nh.linf + 1e-12);
    EXPECT_LE(ns.h1, nf.h1 + nh.h1 + 1e-12);
    EXPECT_LE(*ns.h2, *nf.h2 + *nh.h2 + 1e-9);
    EXPECT_LE(*ns.w21, *nf.w21 + *nh.w21 + 1e-9);
  }
}
