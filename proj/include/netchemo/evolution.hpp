/**
 * @file evolution.hpp
 * @brief Time integration of the hyperbolic-parabolic chemotaxis system on a
 *        network.
 *
 * One step is a Lie splitting:
 *
 *  1. (u, v): first-order upwind finite volumes on the Riemann invariants
 *     w+- = (u +- v)/2 travelling at +-lambda_i. Interior faces take w+ from
 *     the left and w- from the right. At an inner node the characteristic that
 *     leaves each arc is read from the adjacent cell and the remaining traces
 *     come from the kappa transmission conditions (node_boundary_solve). Outer
 *     vertices reflect (v = 0). The friction term is integrated exactly and the
 *     chemotactic term u phi_x is explicit, with phi_x the centred difference
 *     of the vertex values around each cell.
 *  2. phi: implicit Euler with the elliptic operator shifted by 1/dt.
 *
 * Mass of u is conserved to round-off because the node solve returns traces
 * whose fluxes balance at every node. Constant states (ubar, 0, Q ubar) are
 * fixed points of both sub-steps.
 */
#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <map>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "netchemo/diagnostics.hpp"
#include "netchemo/elliptic.hpp"
#include "netchemo/error.hpp"
#include "netchemo/grid.hpp"
#include "netchemo/network.hpp"
#include "netchemo/state.hpp"

namespace netchemo {

// ---------------------------------------------------------------------------
// Node boundary solve
// ---------------------------------------------------------------------------

/// Traces u_i(N), v_i(N) for every arc of a star, in star order.
struct NodeTraces {
  std::vector<double> u;
  std::vector<double> v;
};

/// Signature shared by the default node solver and test fixtures.
/// `outgoing[p]` is the characteristic leaving arc p into the node: w+ when the
/// node is the arc's head, w- when it is the tail.
using NodeSolver = std::function<NodeTraces(const NodeStar&, std::span<const double> lambda,
                                            std::span<const double> outgoing)>;

namespace detail {

/// Lambda + L_K where L_K is the graph Laplacian of kappa (diagonal ignored).
inline Eigen::MatrixXd node_matrix(const NodeStar& star, std::span<const double> lambda) {
  const auto n = static_cast<Eigen::Index>(star.size());
  Eigen::MatrixXd m = Eigen::MatrixXd::Zero(n, n);
  for (Eigen::Index p = 0; p < n; ++p) {
    m(p, p) += lambda[static_cast<std::size_t>(p)];
    for (Eigen::Index q = 0; q < n; ++q) {
      if (p == q) continue;
      m(p, p) += star.kappa(p, q);
      m(p, q) -= star.kappa(p, q);
    }
  }
  return m;
}

inline NodeTraces traces_from_density(const NodeStar& star, std::span<const double> outgoing,
                                      const Eigen::VectorXd& u) {
  NodeTraces t;
  for (std::size_t p = 0; p < star.size(); ++p) {
    const double up = u[static_cast<Eigen::Index>(p)];
    t.u.push_back(up);
    // u + sign v = 2 c  for the known characteristic.
    t.v.push_back(star.sign[p] * (2.0 * outgoing[p] - up));
  }
  return t;
}

}  // namespace detail

/// Combines the known characteristic of every arc with the transmission
/// conditions  sign_i lambda_i v_i = sum_j K_ij (u_i - u_j).  Substituting
/// sign_i v_i = 2 c_i - u_i gives the SPD system (Lambda + L_K) u = 2 Lambda c.
inline NodeTraces node_boundary_solve(const NodeStar& star, std::span<const double> lambda,
                                      std::span<const double> outgoing) {
  if (lambda.size() != star.size() || outgoing.size() != star.size()) {
    throw Error(ErrorCode::shape_mismatch, "node solve needs one lambda and one characteristic per arc");
  }
  const Eigen::MatrixXd m = detail::node_matrix(star, lambda);
  Eigen::VectorXd rhs(static_cast<Eigen::Index>(star.size()));
  for (std::size_t p = 0; p < star.size(); ++p) rhs[static_cast<Eigen::Index>(p)] = 2.0 * lambda[p] * outgoing[p];
  Eigen::LDLT<Eigen::MatrixXd> ldlt(m);
  if (ldlt.info() != Eigen::Success || !ldlt.isPositive()) {
    throw Error(ErrorCode::singular_node_system, "node " + std::to_string(star.node) + " system is singular");
  }
  const Eigen::VectorXd u = ldlt.solve(rhs);
  if (!u.allFinite()) {
    throw Error(ErrorCode::singular_node_system, "node " + std::to_string(star.node) + " system is singular");
  }
  return detail::traces_from_density(star, outgoing, u);
}

/// sum_in lambda v - sum_out lambda v for one star.
inline double node_flux_imbalance(const NodeStar& star, std::span<const double> lambda, const NodeTraces& t) {
  double s = 0.0;
  for (std::size_t p = 0; p < star.size(); ++p) s += star.sign[p] * lambda[p] * t.v[p];
  return s;
}

// ---------------------------------------------------------------------------
// Initial data and compatibility
// ---------------------------------------------------------------------------

using Profile = std::function<double(double)>;

/// One profile per arc and field; x runs over [0, L_i].
struct InitialData {
  std::vector<Profile> u;
  std::vector<Profile> v;
  std::vector<Profile> phi;
};

struct CompatibilityReport {
  std::vector<NodeId> nodes;
  /// Per inner node: largest violation of the kappa and alpha conditions.
  std::vector<double> velocity;
  std::vector<double> chemo;
  /// Per outer vertex: |v| and |phi_x|.
  std::vector<double> outer_v;
  std::vector<double> outer_phix;

  double max() const {
    double m = 0.0;
    for (const auto* vec : {&velocity, &chemo, &outer_v, &outer_phix})
      for (double x : *vec) m = std::max(m, x);
    return m;
  }
  bool compatible(double tol = 1e-10) const { return max() <= tol; }
};

struct EndpointData {
  double u = 0.0;
  double v = 0.0;
  double phi = 0.0;
  double phix = 0.0;
};

namespace detail {

inline CompatibilityReport compatibility(const ValidatedNetwork& net,
                                         const std::function<EndpointData(ArcIndex, End)>& at) {
  CompatibilityReport r;
  for (const auto& star : net.inner_nodes()) {
    r.nodes.push_back(star.node);
    double worst_v = 0.0;
    double worst_phi = 0.0;
    for (std::size_t p = 0; p < star.size(); ++p) {
      const ArcIndex i = star.arcs[p];
      const EndpointData e = at(i, star.end(p));
      double ku = 0.0;
      double ap = 0.0;
      for (std::size_t q = 0; q < star.size(); ++q) {
        if (q == p) continue;
        const EndpointData o = at(star.arcs[q], star.end(q));
        ku += star.kappa(p, q) * (o.u - e.u);
        ap += star.alpha(p, q) * (o.phi - e.phi);
      }
      const auto& a = net.arc(i);
      // incoming: -lambda v = ku, D phi_x = ap; outgoing: lambda v = ku, -D phi_x = ap
      worst_v = std::max(worst_v, std::abs(-star.sign[p] * a.lambda * e.v - ku));
      worst_phi = std::max(worst_phi, std::abs(star.sign[p] * a.diffusion * e.phix - ap));
    }
    r.velocity.push_back(worst_v);
    r.chemo.push_back(worst_phi);
  }
  for (const auto& o : net.outer_nodes()) {
    const EndpointData e = at(o.arc, o.end);
    r.outer_v.push_back(std::abs(e.v));
    r.outer_phix.push_back(std::abs(e.phix));
  }
  return r;
}

inline double one_sided_slope(const Profile& f, double x0, double h) {
  return (-3.0 * f(x0) + 4.0 * f(x0 + h) - f(x0 + 2.0 * h)) / (2.0 * h);
}

}  // namespace detail

/// Compatibility residuals of analytic initial data (exact traces).
inline CompatibilityReport compatibility_report(const ValidatedNetwork& net, const InitialData& data) {
  return detail::compatibility(net, [&](ArcIndex i, End e) {
    const double len = net.arc(i).length;
    const double x = e == End::tail ? 0.0 : len;
    const double h = 1e-5 * len;
    EndpointData d{data.u[i](x), data.v[i](x), data.phi[i](x), 0.0};
    d.phix = e == End::tail ? detail::one_sided_slope(data.phi[i], 0.0, h)
                            : -detail::one_sided_slope(data.phi[i], len, -h);
    return d;
  });
}

/// Compatibility residuals of sampled data; cell traces are extrapolated
/// linearly from the two cells next to the endpoint.
inline CompatibilityReport compatibility_report(const ValidatedNetwork& net, const NetworkState& s) {
  auto cell_trace = [](const ArcField& f, End e) {
    const auto& v = f.values;
    const std::size_t n = v.size();
    return e == End::tail ? 1.5 * v[0] - 0.5 * v[1] : 1.5 * v[n - 1] - 0.5 * v[n - 2];
  };
  return detail::compatibility(net, [&](ArcIndex i, End e) {
    EndpointData d;
    d.u = cell_trace(s.u[i], e);
    d.v = cell_trace(s.v[i], e);
    d.phi = s.phi[i].trace(e);
    d.phix = endpoint_flux(s.phi[i], 1.0, e);
    return d;
  });
}

/// Linear-in-x velocity profiles whose endpoint values satisfy the kappa
/// transmission conditions for the given density profiles (0 at outer ends).
inline std::vector<Profile> compatible_velocity(const ValidatedNetwork& net, const std::vector<Profile>& u) {
  const std::size_t m = net.arc_count();
  std::vector<double> v0(m, 0.0), v1(m, 0.0);
  for (const auto& star : net.inner_nodes()) {
    for (std::size_t p = 0; p < star.size(); ++p) {
      const ArcIndex i = star.arcs[p];
      auto trace = [&](std::size_t q) {
        const ArcIndex j = star.arcs[q];
        return u[j](star.end(q) == End::tail ? 0.0 : net.arc(j).length);
      };
      double lk = 0.0;
      for (std::size_t q = 0; q < star.size(); ++q) {
        if (q != p) lk += star.kappa(p, q) * (trace(p) - trace(q));
      }
      const double v = star.sign[p] * lk / net.arc(i).lambda;
      (star.end(p) == End::tail ? v0[i] : v1[i]) = v;
    }
  }
  std::vector<Profile> out;
  for (ArcIndex i = 0; i < m; ++i) {
    const double len = net.arc(i).length;
    const double a = v0[i];
    const double b = v1[i];
    out.push_back([a, b, len](double x) { return a + (b - a) * x / len; });
  }
  return out;
}

struct InitializedState {
  NetworkState state;
  CompatibilityReport compatibility;
  /// Non-empty when the data violate the boundary/transmission conditions;
  /// the scheme relaxes such data within one step.
  std::vector<std::string> warnings;
};

namespace detail {

inline std::vector<std::string> compatibility_warnings(const CompatibilityReport& r, double tol) {
  std::vector<std::string> w;
  for (std::size_t k = 0; k < r.nodes.size(); ++k) {
    if (r.velocity[k] > tol || r.chemo[k] > tol) {
      std::ostringstream s;
      s << "node " << r.nodes[k] << ": transmission residual u/v " << r.velocity[k] << ", phi " << r.chemo[k];
      w.push_back(s.str());
    }
  }
  for (std::size_t k = 0; k < r.outer_v.size(); ++k) {
    if (r.outer_v[k] > tol || r.outer_phix[k] > tol) {
      std::ostringstream s;
      s << "outer vertex " << k << ": |v| " << r.outer_v[k] << ", |phi_x| " << r.outer_phix[k];
      w.push_back(s.str());
    }
  }
  return w;
}

}  // namespace detail

inline InitializedState initialize_state(const InitialData& data, const ValidatedNetwork& net, const Grid& grid,
                                         double tol = 1e-10) {
  const std::size_t m = net.arc_count();
  if (data.u.size() != m || data.v.size() != m || data.phi.size() != m) {
    throw Error(ErrorCode::shape_mismatch, "initial data need one profile per arc for u, v and phi");
  }
  InitializedState out;
  out.state.t = 0.0;
  out.state.u = NetworkField::sample(grid, Centering::cell, [&](ArcIndex i, double x) { return data.u[i](x); });
  out.state.v = NetworkField::sample(grid, Centering::cell, [&](ArcIndex i, double x) { return data.v[i](x); });
  out.state.phi = NetworkField::sample(grid, Centering::vertex, [&](ArcIndex i, double x) { return data.phi[i](x); });
  if (!out.state.all_finite()) throw Error(ErrorCode::bad_parameter, "initial data are not finite");
  out.compatibility = compatibility_report(net, data);
  out.warnings = detail::compatibility_warnings(out.compatibility, tol);
  return out;
}

inline InitializedState initialize_state(const NetworkState& sampled, const ValidatedNetwork& net, const Grid& grid,
                                         double tol = 1e-10) {
  if (!matches_grid(sampled.u, grid, Centering::cell) || !matches_grid(sampled.v, grid, Centering::cell) ||
      !matches_grid(sampled.phi, grid, Centering::vertex)) {
    throw Error(ErrorCode::shape_mismatch, "sampled initial data do not match the grid");
  }
  if (!sampled.all_finite()) throw Error(ErrorCode::bad_parameter, "initial data are not finite");
  InitializedState out;
  out.state = sampled;
  out.compatibility = compatibility_report(net, sampled);
  out.warnings = detail::compatibility_warnings(out.compatibility, tol);
  return out;
}

// ---------------------------------------------------------------------------
// Stepping
// ---------------------------------------------------------------------------

/// Largest stable step: min_i dx_i / lambda_i.
inline double max_stable_step(const ValidatedNetwork& net, const Grid& grid) {
  double m = std::numeric_limits<double>::infinity();
  for (ArcIndex i = 0; i < net.arc_count(); ++i) m = std::min(m, grid.dx(i) / net.arc(i).lambda);
  return m;
}

struct StepStats {
  /// max over inner nodes of |sum_in lambda v - sum_out lambda v|
  double node_flux_residual = 0.0;
};

/// Fixed-step integrator; caches the node systems and the implicit operator.
class Evolver {
 public:
  Evolver(const ValidatedNetwork& net, const Grid& grid, double dt, NodeSolver node_solver = {})
      : net_(net), grid_(grid), dt_(dt), parabolic_(net, grid, 1.0 / dt), custom_(std::move(node_solver)) {
    if (!(dt > 0.0) || !std::isfinite(dt)) throw Error(ErrorCode::bad_parameter, "time step must be positive");
    const double limit = max_stable_step(net, grid);
    if (dt > limit * (1.0 + 1e-12)) {
      std::ostringstream s;
      s << "dt = " << dt << " exceeds min dx/lambda = " << limit;
      throw Error(ErrorCode::cfl_violation, s.str());
    }
    for (const auto& star : net.inner_nodes()) {
      std::vector<double> lambda;
      for (ArcIndex i : star.arcs) lambda.push_back(net.arc(i).lambda);
      Eigen::LDLT<Eigen::MatrixXd> ldlt(detail::node_matrix(star, lambda));
      if (ldlt.info() != Eigen::Success || !ldlt.isPositive()) {
        throw Error(ErrorCode::singular_node_system, "node " + std::to_string(star.node) + " system is singular");
      }
      lambdas_.push_back(std::move(lambda));
      node_factors_.push_back(std::move(ldlt));
    }
  }

  double dt() const { return dt_; }
  const ValidatedNetwork& network() const { return net_; }
  const Grid& grid() const { return grid_; }

  /// Transport, friction and chemotactic drift for (u, v); phi is read only.
  StepStats hyperbolic_step(NetworkState& s) const {
    const std::size_t m = net_.arc_count();
    // Face traces at the two ends of every arc.
    std::vector<double> tail_u(m), tail_v(m), head_u(m), head_v(m);
    auto outgoing = [&](ArcIndex i, End e) {
      const auto& u = s.u[i].values;
      const auto& v = s.v[i].values;
      return e == End::head ? 0.5 * (u.back() + v.back()) : 0.5 * (u.front() - v.front());
    };

    StepStats stats;
    for (std::size_t k = 0; k < net_.inner_nodes().size(); ++k) {
      const NodeStar& star = net_.inner_nodes()[k];
      std::vector<double> c;
      for (std::size_t p = 0; p < star.size(); ++p) c.push_back(outgoing(star.arcs[p], star.end(p)));
      NodeTraces t;
      if (custom_) {
        t = custom_(star, lambdas_[k], c);
      } else {
        Eigen::VectorXd rhs(static_cast<Eigen::Index>(star.size()));
        for (std::size_t p = 0; p < star.size(); ++p) rhs[static_cast<Eigen::Index>(p)] = 2.0 * lambdas_[k][p] * c[p];
        t = detail::traces_from_density(star, c, node_factors_[k].solve(rhs));
      }
      stats.node_flux_residual =
          std::max(stats.node_flux_residual, std::abs(node_flux_imbalance(star, lambdas_[k], t)));
      for (std::size_t p = 0; p < star.size(); ++p) {
        const ArcIndex i = star.arcs[p];
        if (star.end(p) == End::tail) {
          tail_u[i] = t.u[p];
          tail_v[i] = t.v[p];
        } else {
          head_u[i] = t.u[p];
          head_v[i] = t.v[p];
        }
      }
    }
    for (const auto& o : net_.outer_nodes()) {
      // Reflecting ghost: u unchanged, v mirrored, so the face carries v = 0.
      const double u = 2.0 * outgoing(o.arc, o.end);
      (o.end == End::tail ? tail_u : head_u)[o.arc] = u;
      (o.end == End::tail ? tail_v : head_v)[o.arc] = 0.0;
    }

    std::vector<double> fu, fv;
    for (ArcIndex i = 0; i < m; ++i) {
      const auto& a = net_.arc(i);
      auto& u = s.u[i].values;
      auto& v = s.v[i].values;
      const auto& phi = s.phi[i].values;
      const std::size_t n = u.size();
      const double dx = grid_.dx(i);

      fu.assign(n + 1, 0.0);
      fv.assign(n + 1, 0.0);
      fu[0] = tail_u[i];
      fv[0] = tail_v[i];
      fu[n] = head_u[i];
      fv[n] = head_v[i];
      for (std::size_t f = 1; f < n; ++f) {
        const double wp = 0.5 * (u[f - 1] + v[f - 1]);
        const double wm = 0.5 * (u[f] - v[f]);
        fu[f] = wp + wm;
        fv[f] = wp - wm;
      }

      const double nu = dt_ * a.lambda / dx;
      const double decay = std::exp(-a.beta * dt_);
      const double gain = -std::expm1(-a.beta * dt_) / a.beta;
      for (std::size_t k = 0; k < n; ++k) {
        const double drift = u[k] * (phi[k + 1] - phi[k]) / dx;
        const double un = u[k] - nu * (fv[k + 1] - fv[k]);
        const double vs = v[k] - nu * (fu[k + 1] - fu[k]);
        u[k] = un;
        v[k] = decay * vs + gain * drift;
      }
    }
    return stats;
  }

  /// Implicit Euler for phi with the already updated u.
  void parabolic_step(NetworkState& s) const {
    NetworkField rhs = NetworkField::zeros(grid_, Centering::vertex);
    for (ArcIndex i = 0; i < net_.arc_count(); ++i) {
      const double a = net_.arc(i).production;
      const auto& u = s.u[i].values;
      const auto& phi = s.phi[i].values;
      auto& r = rhs[i].values;
      const std::size_t n = u.size();
      for (std::size_t k = 0; k <= n; ++k) {
        const double uv = k == 0 ? u.front() : (k == n ? u.back() : 0.5 * (u[k - 1] + u[k]));
        r[k] = phi[k] / dt_ + a * uv;
      }
    }
    s.phi = parabolic_.solve(rhs);
  }

  StepStats advance(NetworkState& s) const {
    const StepStats stats = hyperbolic_step(s);
    parabolic_step(s);
    s.t += dt_;
    return stats;
  }

 private:
  ValidatedNetwork net_;
  Grid grid_;
  double dt_;
  EllipticSystem parabolic_;
  NodeSolver custom_;
  std::vector<std::vector<double>> lambdas_;
  std::vector<Eigen::LDLT<Eigen::MatrixXd>> node_factors_;
};

struct HyperbolicResult {
  NetworkField u;
  NetworkField v;
  double node_flux_residual = 0.0;
};

inline HyperbolicResult hyperbolic_step(const ValidatedNetwork& net, const Grid& grid, const NetworkState& s,
                                        double dt) {
  NetworkState next = s;
  const StepStats st = Evolver(net, grid, dt).hyperbolic_step(next);
  return {std::move(next.u), std::move(next.v), st.node_flux_residual};
}

inline NetworkField parabolic_step(const ValidatedNetwork& net, const Grid& grid, const NetworkState& s, double dt) {
  NetworkState next = s;
  Evolver(net, grid, dt).parabolic_step(next);
  return std::move(next.phi);
}

// ---------------------------------------------------------------------------
// Runs
// ---------------------------------------------------------------------------

struct EvolutionConfig {
  double cfl = 0.9;
  double t_end = 0.0;
  /// Time between stored snapshots and diagnostics rows; 0 stores only the
  /// initial and final states. The step is shrunk so that it divides this
  /// interval.
  double output_every = 0.0;
  double dt_max = std::numeric_limits<double>::infinity();
  /// Steps between F_T samples (at most 10).
  std::size_t diagnostics_every = 1;
  /// NumericalBlowup is raised when any |u|, |v| or |phi| exceeds this.
  double blowup_guard = 1e6;
};

inline double advance(NetworkState& s, const Evolver& evolver) { return evolver.advance(s).node_flux_residual; }

/// One step with the CFL step of `config`.
inline NetworkState advance(const NetworkState& s, const ValidatedNetwork& net, const Grid& grid,
                            const EvolutionConfig& config) {
  const double dt = std::min(config.cfl * max_stable_step(net, grid), config.dt_max);
  NetworkState next = s;
  Evolver(net, grid, dt).advance(next);
  return next;
}

struct EvolutionProblem {
  ValidatedNetwork net;
  Grid grid;
  NetworkState initial;
  EvolutionConfig config;
};

struct Trajectory {
  std::vector<NetworkState> snapshots;
  DiagnosticsRecord diagnostics;
  double dt = 0.0;
  std::size_t steps = 0;
};

namespace detail {

inline void check_guard(const NetworkState& s, double guard) {
  const double m = std::max({s.u.max_abs(), s.v.max_abs(), s.phi.max_abs()});
  if (!s.all_finite() || m > guard) {
    std::ostringstream msg;
    msg << "solution left the guard " << guard << " at t = " << s.t;
    throw Error(ErrorCode::numerical_blowup, msg.str());
  }
}

}  // namespace detail

/// Integrates to config.t_end. `node_solver` replaces the default node solve
/// (test fixtures only).
inline Trajectory run(const EvolutionProblem& prob, const NodeSolver& node_solver = {}) {
  const auto& cfg = prob.config;
  const auto& net = prob.net;
  if (!(cfg.cfl > 0.0 && cfg.cfl <= 1.0)) throw Error(ErrorCode::bad_parameter, "cfl must lie in (0, 1]");
  if (!(cfg.t_end >= 0.0)) throw Error(ErrorCode::bad_parameter, "t_end must be non-negative");
  if (!(cfg.output_every >= 0.0)) throw Error(ErrorCode::bad_parameter, "output_every must be non-negative");
  if (cfg.diagnostics_every < 1 || cfg.diagnostics_every > 10) {
    throw Error(ErrorCode::insufficient_cadence, "diagnostics_every must lie in [1, 10]");
  }
  if (!matches_grid(prob.initial.u, prob.grid, Centering::cell) ||
      !matches_grid(prob.initial.v, prob.grid, Centering::cell) ||
      !matches_grid(prob.initial.phi, prob.grid, Centering::vertex)) {
    throw Error(ErrorCode::shape_mismatch, "initial state does not match the grid");
  }

  const double cap = std::min(cfg.cfl * max_stable_step(net, prob.grid), cfg.dt_max);
  const double interval = cfg.output_every > 0.0 ? std::min(cfg.output_every, std::max(cfg.t_end, 0.0)) : cfg.t_end;

  Trajectory traj;
  NetworkState s = prob.initial;
  const double mass0 = integrate(s.u).total;
  const double ubar = mass0 / net.total_length();
  std::optional<ConstantState> cstate;
  if (net.ratios().uniform) cstate = ConstantState::from_density(net, ubar);

  double dt = cap;
  if (interval > 0.0) dt = interval / std::ceil(interval / cap * (1.0 - 1e-12));
  traj.dt = dt;

  FtAccumulator ft(ubar, 10.0 * dt * (1.0 + 1e-9));
  double flux_since_row = 0.0;
  double last_push = -1.0;

  auto push_ft = [&](const NetworkState& st) {
    if (st.t > last_push) {
      ft.push(st);
      last_push = st.t;
    }
  };
  auto record = [&](const NetworkState& st) {
    push_ft(st);
    auto& d = traj.diagnostics;
    d.times.push_back(st.t);
    d.mass.push_back(integrate(st.u).total);
    d.node_flux_residual.push_back(flux_since_row);
    flux_since_row = 0.0;
    double us = 0.0, vs = 0.0, ps = 0.0, pxs = 0.0;
    const double phibar = cstate ? cstate->phibar : 0.0;
    for (ArcIndex i = 0; i < st.u.arc_count(); ++i) {
      for (double x : st.u[i].values) us = std::max(us, std::abs(x - ubar));
      for (double x : st.v[i].values) vs = std::max(vs, std::abs(x));
      for (double x : st.phi[i].values) ps = std::max(ps, std::abs(x - phibar));
      for (double x : derivative(st.phi[i].values, st.phi[i].dx())) pxs = std::max(pxs, std::abs(x));
    }
    d.u_sup.push_back(us);
    d.v_sup.push_back(vs);
    d.phi_sup.push_back(ps);
    d.phix_sup.push_back(pxs);
    if (cstate) d.distances.push_back(distance_to_constant(net, st, *cstate));
    d.ft.push_back(ft.value());
    d.ft_terms.push_back(ft.terms());
    traj.snapshots.push_back(st);
  };

  record(s);
  if (cfg.t_end <= 0.0) return traj;

  const double rows = interval > 0.0 ? cfg.t_end / interval : 1.0;
  const auto full_rows = static_cast<std::size_t>(std::floor(rows * (1.0 + 1e-12)));
  const auto steps_per_row = static_cast<std::size_t>(std::llround(interval / dt));
  const Evolver evolver(net, prob.grid, dt, node_solver);

  std::size_t since_ft = 0;
  auto step_with = [&](const Evolver& ev) {
    flux_since_row = std::max(flux_since_row, advance(s, ev));
    detail::check_guard(s, cfg.blowup_guard);
    ++traj.steps;
    if (++since_ft >= cfg.diagnostics_every) {
      push_ft(s);
      since_ft = 0;
    }
  };

  for (std::size_t r = 0; r < full_rows; ++r) {
    for (std::size_t k = 0; k < steps_per_row; ++k) step_with(evolver);
    // Snap accumulated round-off in t to the nominal output time.
    s.t = interval * static_cast<double>(r + 1);
    record(s);
  }
  const double remaining = cfg.t_end - s.t;
  if (remaining > 1e-12 * cfg.t_end) {
    const auto n = static_cast<std::size_t>(std::ceil(remaining / cap * (1.0 - 1e-12)));
    const Evolver tail(net, prob.grid, remaining / static_cast<double>(n), node_solver);
    for (std::size_t k = 0; k < n; ++k) step_with(tail);
    s.t = cfg.t_end;
    record(s);
  }
  return traj;
}

}  // namespace netchemo
