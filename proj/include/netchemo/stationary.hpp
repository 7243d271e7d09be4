/**
 * @file stationary.hpp
 * @brief Stationary solutions with prescribed mass on acyclic networks.
 *
 * A stationary solution has v = 0 and u_i = C_i exp(phi_i / lambda_i). Given
 * an iterate phi0 the constants are fixed by continuity of u at every inner
 * node plus the mass constraint. Walking the tree from a root arc, the ratio
 * between the constant of arc h and the root constant is the product, along
 * the unique arc chain, of exp(phi_p(N)/lambda_p - phi_q(N)/lambda_q) over
 * consecutive arcs p, q sharing node N. The next iterate solves
 * A phi1 = a u0. Iteration starts from phi0 = 0 and stops on the discrete H^2
 * distance between iterates.
 */
#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include "netchemo/elliptic.hpp"
#include "netchemo/error.hpp"
#include "netchemo/grid.hpp"
#include "netchemo/network.hpp"

namespace netchemo {

struct StationaryProblem {
  ValidatedNetwork net;
  Grid grid;
  double mass = 0.0;
  double tol = 1e-10;
  std::size_t max_iter = 200;
  ArcIndex root_arc = 0;
};

struct StationarySolution {
  std::vector<double> constants;
  NetworkField phi;
  /// u_i = C_i exp(phi_i / lambda_i) on the vertices of phi.
  NetworkField u;
  std::size_t iterations = 0;
  bool converged = false;
  /// H^2 distance between consecutive iterates.
  std::vector<double> increments;

  /// Ratio of the last two increments; 0 when fewer than two are available.
  double contraction_ratio() const {
    if (increments.size() < 2 || increments[increments.size() - 2] == 0.0) return 0.0;
    return increments.back() / increments[increments.size() - 2];
  }

  /// The flux of a stationary solution on an acyclic network vanishes.
  NetworkField velocity(const Grid& grid) const { return NetworkField::zeros(grid, Centering::cell); }
};

/// Fixed-point map G with the elliptic factorisation and tree walk cached.
class StationaryMap {
 public:
  explicit StationaryMap(const StationaryProblem& prob)
      : prob_(prob), system_(prob.net, prob.grid), traversal_(checked_traversal(prob)) {
    if (!(prob.mass >= 0.0) || !std::isfinite(prob.mass)) {
      throw Error(ErrorCode::bad_parameter, "mass must be non-negative");
    }
  }

  const StationaryProblem& problem() const { return prob_; }
  const EllipticSystem& system() const { return system_; }
  const Traversal& traversal() const { return traversal_; }

  /// Constants C_i for the iterate phi0.
  std::vector<double> constants(const NetworkField& phi0) const {
    check_iterate(phi0);
    const auto& net = prob_.net;
    const std::size_t m = net.arc_count();

    // log of the chain products, relative to the root arc.
    std::vector<double> log_e(m, 0.0);
    for (ArcIndex h = 0; h < m; ++h) {
      const ArcPath& path = traversal_.paths[h];
      double s = 0.0;
      for (std::size_t k = 0; k < path.junctions.size(); ++k) {
        const NodeId node = path.junctions[k];
        const ArcIndex p = path.arcs[k];
        const ArcIndex q = path.arcs[k + 1];
        s += trace_at(phi0, p, node) / net.arc(p).lambda - trace_at(phi0, q, node) / net.arc(q).lambda;
      }
      log_e[h] = s;
    }
    const double shift = *std::max_element(log_e.begin(), log_e.end());

    std::vector<double> e(m);
    double denom = 0.0;
    for (ArcIndex i = 0; i < m; ++i) {
      e[i] = std::exp(log_e[i] - shift);
      denom += e[i] * exp_integral(phi0[i], net.arc(i).lambda);
    }
    std::vector<double> c(m, 0.0);
    if (prob_.mass == 0.0) return c;
    for (ArcIndex i = 0; i < m; ++i) c[i] = prob_.mass * e[i] / denom;
    return c;
  }

  NetworkField density(const NetworkField& phi, const std::vector<double>& c) const {
    NetworkField u = phi;
    for (ArcIndex i = 0; i < u.arc_count(); ++i) {
      const double lambda = prob_.net.arc(i).lambda;
      for (double& val : u[i].values) val = c[i] * std::exp(val / lambda);
    }
    return u;
  }

  /// a_i C_i exp(phi_i / lambda_i)
  NetworkField source(const NetworkField& phi, const std::vector<double>& c) const {
    NetworkField f = density(phi, c);
    for (ArcIndex i = 0; i < f.arc_count(); ++i) {
      for (double& val : f[i].values) val *= prob_.net.arc(i).production;
    }
    return f;
  }

  NetworkField step(const NetworkField& phi0) const { return solve_elliptic(system_, source(phi0, constants(phi0))); }

  /// Runs the iteration without throwing on non-convergence.
  StationarySolution iterate() const {
    StationarySolution sol;
    NetworkField phi = NetworkField::zeros(prob_.grid, Centering::vertex);
    for (std::size_t it = 1; it <= prob_.max_iter; ++it) {
      NetworkField next = step(phi);
      if (!next.all_finite()) break;
      const double d = h2_distance(next, phi);
      sol.increments.push_back(d);
      sol.iterations = it;
      phi = std::move(next);
      if (d <= prob_.tol) {
        sol.converged = true;
        break;
      }
    }
    sol.constants = constants(phi);
    sol.u = density(phi, sol.constants);
    sol.phi = std::move(phi);
    return sol;
  }

 private:
  static Traversal checked_traversal(const StationaryProblem& prob) {
    if (!is_acyclic(prob.net)) {
      throw Error(ErrorCode::cyclic_graph, "stationary construction needs an acyclic network");
    }
    return spanning_enumeration(prob.net, prob.root_arc);
  }

  void check_iterate(const NetworkField& phi0) const {
    if (!matches_grid(phi0, prob_.grid, Centering::vertex)) {
      throw Error(ErrorCode::shape_mismatch, "iterate must be a vertex field on the problem grid");
    }
    const double floor = -1e-12 * std::max(1.0, phi0.max_abs());
    if (phi0.min_value() < floor) {
      throw Error(ErrorCode::negative_phi, "iterate has minimum " + std::to_string(phi0.min_value()));
    }
  }

  double trace_at(const NetworkField& phi, ArcIndex i, NodeId node) const {
    return phi[i].trace(prob_.net.arc(i).tail == node ? End::tail : End::head);
  }

  static double exp_integral(const ArcField& phi, double lambda) {
    std::vector<double> e(phi.values.size());
    std::transform(phi.values.begin(), phi.values.end(), e.begin(), [&](double p) { return std::exp(p / lambda); });
    return quadrature(e, Centering::vertex, phi.dx());
  }

  StationaryProblem prob_;
  EllipticSystem system_;
  Traversal traversal_;
};

inline std::vector<double> build_constants(const NetworkField& phi0, const StationaryProblem& prob) {
  return StationaryMap(prob).constants(phi0);
}

inline NetworkField fixed_point_step(const NetworkField& phi0, const StationaryProblem& prob) {
  return StationaryMap(prob).step(phi0);
}

inline StationarySolution solve_stationary(const StationaryProblem& prob) {
  StationarySolution sol = StationaryMap(prob).iterate();
  if (!sol.converged) {
    std::ostringstream msg;
    msg << "no convergence after " << sol.iterations << " iterations (last increment "
        << (sol.increments.empty() ? 0.0 : sol.increments.back()) << ", contraction ratio "
        << sol.contraction_ratio() << "); the mass may exceed the contraction regime";
    throw Error(ErrorCode::no_convergence, msg.str());
  }
  return sol;
}

// ---------------------------------------------------------------------------
// Verification
// ---------------------------------------------------------------------------

struct Check {
  std::string name;
  double value = 0.0;
  double bound = 0.0;
  bool passed = false;
  /// Informational checks are reported but do not affect passed().
  bool informational = false;
};

struct VerificationReport {
  std::vector<Check> checks;

  bool passed() const {
    return std::all_of(checks.begin(), checks.end(), [](const Check& c) { return c.informational || c.passed; });
  }

  const Check& get(const std::string& name) const {
    for (const auto& c : checks)
      if (c.name == name) return c;
    throw Error(ErrorCode::bad_parameter, "no check named " + name);
  }
};

/// Largest |u_j(N) - u_k(N)| over inner nodes and pairs of incident arcs.
inline double node_jump(const NetworkField& u_vertex, const ValidatedNetwork& net) {
  double jump = 0.0;
  for (const auto& star : net.inner_nodes()) {
    double lo = std::numeric_limits<double>::infinity();
    double hi = -lo;
    for (std::size_t p = 0; p < star.size(); ++p) {
      const double val = u_vertex[star.arcs[p]].trace(star.end(p));
      lo = std::min(lo, val);
      hi = std::max(hi, val);
    }
    jump = std::max(jump, hi - lo);
  }
  return jump;
}

inline double max_a_over_min_d(const ValidatedNetwork& net) {
  double amax = 0.0;
  double dmin = std::numeric_limits<double>::infinity();
  for (const auto& a : net.arcs()) {
    amax = std::max(amax, a.production);
    dmin = std::min(dmin, a.diffusion);
  }
  return amax / dmin;
}

/// Gradient sup bound 2 max(a) / min(D) * mass.
inline double gradient_bound(const ValidatedNetwork& net, double mass) { return 2.0 * max_a_over_min_d(net) * mass; }

inline VerificationReport verify_stationary(const StationarySolution& sol, const StationaryProblem& prob) {
  const auto& net = prob.net;
  const StationaryMap map(prob);
  VerificationReport rep;
  const double mass = prob.mass;
  const double bound = gradient_bound(net, mass);
  const double total = net.total_length();

  const NetworkField phix = derivative(sol.phi);
  const double phix_sup = phix.max_abs();
  rep.checks.push_back({"gradient_bound", phix_sup, 1.05 * bound, phix_sup <= 1.05 * bound});

  const auto phi_pos = check_positivity(sol.phi);
  rep.checks.push_back({"phi_nonnegative", phi_pos.min_value, 0.0, phi_pos.nonnegative});
  const auto u_pos = check_positivity(sol.u);
  rep.checks.push_back({"u_nonnegative", u_pos.min_value, 0.0, u_pos.nonnegative});

  const double jump = node_jump(sol.u, net);
  const double jump_tol = 1e-8 * sol.u.max_abs();
  rep.checks.push_back({"node_continuity", jump, jump_tol, jump <= jump_tol});

  const double m = integrate(sol.u).total;
  const double mass_tol = 1e-12 * std::max(mass, 1.0);
  rep.checks.push_back({"mass", std::abs(m - mass), mass_tol, std::abs(m - mass) <= mass_tol});

  const NetworkField f = map.source(sol.phi, sol.constants);
  const auto flux = node_flux_residual(sol.phi, net, prob.grid, f);
  const double flux_value = std::max(flux.max_balance(), flux.max_violation());
  const double flux_tol = 1e-8 * std::max(f.max_abs(), std::numeric_limits<double>::min());
  rep.checks.push_back({"node_flux", flux_value, flux_tol, flux_value <= flux_tol});

  const double fp = h2_distance(map.step(sol.phi), sol.phi);
  rep.checks.push_back({"fixed_point_residual", fp, prob.tol, fp <= prob.tol});

  // Integrated bounds; reported only since they carry discretisation slack.
  double amax = 0.0;
  double bmin = std::numeric_limits<double>::infinity();
  for (const auto& a : net.arcs()) {
    amax = std::max(amax, a.production);
    bmin = std::min(bmin, a.degradation);
  }
  const auto phi_norms = discrete_norms(sol.phi);
  const auto phix_norms = discrete_norms(phix);
  const double l1_bound = amax / bmin * mass;
  rep.checks.push_back({"phi_l1_bound", phi_norms.l1, l1_bound, phi_norms.l1 <= 1.05 * l1_bound, true});
  const double x1_bound = bound * total;
  rep.checks.push_back({"phi_x_l1_bound", phix_norms.l1, x1_bound, phix_norms.l1 <= 1.05 * x1_bound, true});
  const double x2_bound = bound * std::sqrt(total);
  double phix_l2_global = 0.0;
  for (const auto& a : phix.arcs) phix_l2_global += l2_squared(a);
  phix_l2_global = std::sqrt(phix_l2_global);
  rep.checks.push_back({"phi_x_l2_bound", phix_l2_global, x2_bound, phix_l2_global <= 1.05 * x2_bound, true});
  rep.checks.push_back({"phi_h2_norm", phi_norms.h2.value_or(0.0), 0.0, true, true});
  rep.checks.push_back({"phi_w21_norm", phi_norms.w21.value_or(0.0), 0.0, true, true});
  return rep;
}

// ---------------------------------------------------------------------------
// Small-solution rigidity
// ---------------------------------------------------------------------------

struct RigidityResult {
  bool constant = false;
  double v_l2 = 0.0;
  double ux_l2 = 0.0;
  double tolerance = 0.0;
};

/// Checks that a supplied stationary candidate is the constant state:
/// ||v||_2 and ||u_x||_2 vanish to `rel_tol` relative to ||u||_inf.
inline RigidityResult rigidity_check(const ValidatedNetwork& net, const NetworkField& u, const NetworkField& v,
                                     double rel_tol = 1e-8) {
  if (!net.ratios().uniform) {
    throw Error(ErrorCode::uniform_ratio_required, "rigidity holds only for a uniform ratio a_i/b_i");
  }
  RigidityResult r;
  r.v_l2 = discrete_norms(v).l2;
  r.ux_l2 = discrete_norms(derivative(u)).l2;
  r.tolerance = rel_tol * std::max(u.max_abs(), std::numeric_limits<double>::min());
  r.constant = r.v_l2 <= r.tolerance && r.ux_l2 <= r.tolerance;
  return r;
}

/// Solves the stationary problem for `mass` and checks the result is constant.
inline RigidityResult small_solution_rigidity_test(const ValidatedNetwork& net, const Grid& grid, double mass) {
  if (!net.ratios().uniform) {
    throw Error(ErrorCode::uniform_ratio_required, "rigidity holds only for a uniform ratio a_i/b_i");
  }
  StationaryProblem prob{net, grid, mass};
  const StationarySolution sol = solve_stationary(prob);
  return rigidity_check(net, sol.u, sol.velocity(grid));
}

}  // namespace netchemo
