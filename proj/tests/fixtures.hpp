// Network builders and random generators shared by the test binaries.
#pragma once

#include <cmath>
#include <random>
#include <vector>

#include "netchemo/netchemo.hpp"

namespace fixtures {

using namespace netchemo;

struct ArcParams {
  double length = 1.0;
  double lambda = 1.0;
  double beta = 1.0;
  double diffusion = 1.0;
  double production = 2.0;
  double degradation = 1.0;
};

inline ArcSpec make_arc(int id, NodeId tail, NodeId head, const ArcParams& p) {
  return {id, tail, head, p.length, p.lambda, p.beta, p.diffusion, p.production, p.degradation};
}

/// Coupling block with every off-diagonal entry equal to `value`.
inline Eigen::MatrixXd full_coupling(std::size_t n, double value) {
  Eigen::MatrixXd m = Eigen::MatrixXd::Constant(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n), value);
  m.diagonal().setZero();
  return m;
}

/// Adds uniform coupling blocks for every node of degree >= 2.
inline void couple_all(NetworkSpec& spec, double alpha, double kappa) {
  std::map<NodeId, std::size_t> degree;
  for (const auto& a : spec.arcs) {
    ++degree[a.tail];
    ++degree[a.head];
  }
  for (const auto& [node, d] : degree) {
    if (d >= 2) spec.inner_nodes.push_back({node, {}, full_coupling(d, alpha), full_coupling(d, kappa)});
  }
}

/// Three arcs meeting at node 0: arc 1 comes in (1 -> 0), arcs 2 and 3 leave.
inline NetworkSpec y_graph_spec(const ArcParams& p = {}, double alpha = 1.0, double kappa = 1.0) {
  NetworkSpec s;
  s.arcs = {make_arc(1, 1, 0, p), make_arc(2, 0, 2, p), make_arc(3, 0, 3, p)};
  couple_all(s, alpha, kappa);
  return s;
}

inline ValidatedNetwork y_graph(const ArcParams& p = {}, double alpha = 1.0, double kappa = 1.0) {
  return validate_network(y_graph_spec(p, alpha, kappa));
}

/// Two arcs in a line 1 -> 0 -> 2.
inline NetworkSpec two_arc_spec(const ArcParams& p1, const ArcParams& p2, double alpha = 1.0, double kappa = 1.0) {
  NetworkSpec s;
  s.arcs = {make_arc(1, 1, 0, p1), make_arc(2, 0, 2, p2)};
  couple_all(s, alpha, kappa);
  return s;
}

/// Random tree with `arcs` arcs, random orientations and parameters.
/// With `uniform_ratio` every arc has a_i / b_i = 2.
inline NetworkSpec random_tree_spec(std::mt19937& rng, std::size_t arcs, bool uniform_ratio = false) {
  std::uniform_real_distribution<double> len(0.5, 2.0), par(0.5, 2.0), coup(0.2, 3.0);
  std::bernoulli_distribution flip(0.5);
  NetworkSpec s;
  for (std::size_t k = 0; k < arcs; ++k) {
    std::uniform_int_distribution<int> parent(0, static_cast<int>(k));
    const NodeId child = static_cast<NodeId>(k + 1);
    const NodeId anchor = parent(rng);
    ArcParams p{len(rng), par(rng), par(rng), par(rng), par(rng), par(rng)};
    if (uniform_ratio) p.production = 2.0 * p.degradation;
    s.arcs.push_back(flip(rng) ? make_arc(static_cast<int>(k + 1), anchor, child, p)
                               : make_arc(static_cast<int>(k + 1), child, anchor, p));
  }
  std::map<NodeId, std::size_t> degree;
  for (const auto& a : s.arcs) {
    ++degree[a.tail];
    ++degree[a.head];
  }
  for (const auto& [node, d] : degree) {
    if (d < 2) continue;
    Eigen::MatrixXd al = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(d));
    Eigen::MatrixXd ka = al;
    for (Eigen::Index i = 0; i < al.rows(); ++i) {
      for (Eigen::Index j = i + 1; j < al.cols(); ++j) {
        al(i, j) = al(j, i) = coup(rng);
        ka(i, j) = ka(j, i) = coup(rng);
      }
    }
    s.inner_nodes.push_back({node, {}, al, ka});
  }
  return s;
}

/// Sup-norm distance between two fields of the same shape.
inline double sup_diff(const NetworkField& a, const NetworkField& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.arc_count(); ++i)
    for (std::size_t k = 0; k < a[i].values.size(); ++k) m = std::max(m, std::abs(a[i].values[k] - b[i].values[k]));
  return m;
}

inline double sup_diff(const NetworkState& a, const NetworkState& b) {
  return std::max({sup_diff(a.u, b.u), sup_diff(a.v, b.v), sup_diff(a.phi, b.phi)});
}

/// ubar + eps cos(pi x / L_i) for u, compatible v, phi = Q ubar.
inline NetworkState perturbed_state(const ValidatedNetwork& net, const Grid& grid, double ubar, double eps) {
  InitialData d;
  for (ArcIndex i = 0; i < net.arc_count(); ++i) {
    const double len = net.arc(i).length;
    d.u.push_back([=](double x) { return ubar + eps * std::cos(M_PI * x / len); });
    d.phi.push_back([q = net.ratios().q, ubar](double) { return q * ubar; });
  }
  d.v = compatible_velocity(net, d.u);
  return initialize_state(d, net, grid).state;
}

}  // namespace fixtures
