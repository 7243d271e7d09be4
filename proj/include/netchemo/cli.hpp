/**
 * @file cli.hpp
 * @brief Command-line front end shared by the `netchemo` tool and the tests.
 *
 * Exit codes: 0 success, 1 usage or configuration error, 2 NoConvergence,
 * 3 NumericalBlowup, 4 verification checks failed.
 */
#pragma once

#include <cstdlib>
#include <iostream>
#include <optional>
#include <ostream>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "netchemo/config.hpp"
#include "netchemo/diagnostics.hpp"
#include "netchemo/error.hpp"
#include "netchemo/evolution.hpp"
#include "netchemo/io.hpp"
#include "netchemo/stationary.hpp"

namespace netchemo::cli {

enum ExitCode : int {
  kSuccess = 0,
  kUsage = 1,
  kNoConvergence = 2,
  kBlowup = 3,
  kVerifyFailed = 4,
};

struct Options {
  std::string mode;
  std::string config;
  std::string out;
  std::optional<unsigned> seed;
  bool quiet = false;
};

/// Parallelism cap from NETCHEMO_THREADS (>= 1). The solvers are sequential,
/// so values above one change nothing.
inline unsigned thread_cap() {
  const char* env = std::getenv("NETCHEMO_THREADS");
  if (env == nullptr) return 1;
  const long v = std::strtol(env, nullptr, 10);
  return v >= 1 ? static_cast<unsigned>(v) : 1u;
}

namespace detail {

inline json run_header(const RunConfig& cfg, Mode mode, const Options& opt) {
  json j{{"mode", to_string(mode)}, {"config", cfg.source}, {"grid", grid_json(cfg.net, cfg.grid)}};
  if (opt.seed) j["seed"] = *opt.seed;
  return j;
}

inline VerificationReport stationary_outputs(StagedOutput& out, const RunConfig& cfg, Mode mode, const Options& opt,
                                             std::ostream& log) {
  const StationaryProblem prob = stationary_problem(cfg);
  const StationarySolution sol = solve_stationary(prob);
  VerificationReport rep = verify_stationary(sol, prob);

  json manifest = run_header(cfg, mode, opt);
  manifest["fields"] = json::array({dump_field(out, "", "phi", sol.phi, cfg.net), dump_field(out, "", "u", sol.u, cfg.net)});
  manifest["iterations"] = sol.iterations;
  out.write_json("manifest.json", manifest);

  json report = report_json(rep);
  json constants = json::object();
  for (ArcIndex i = 0; i < cfg.net.arc_count(); ++i) constants[std::to_string(cfg.net.arc(i).id)] = sol.constants[i];
  report["constants"] = constants;
  report["iterations"] = sol.iterations;
  report["increments"] = sol.increments;
  report["contraction_ratio"] = sol.contraction_ratio();
  report["mass"] = prob.mass;
  report["u_range"] = {sol.u.min_value(), sol.u.max_abs()};
  report["phi_range"] = {sol.phi.min_value(), sol.phi.max_abs()};
  if (cfg.net.ratios().uniform) {
    const ConstantState c = ConstantState::from_mass(cfg.net, prob.mass);
    double du = 0.0, dp = 0.0;
    for (const auto& a : sol.u.arcs)
      for (double x : a.values) du = std::max(du, std::abs(x - c.ubar));
    for (const auto& a : sol.phi.arcs)
      for (double x : a.values) dp = std::max(dp, std::abs(x - c.phibar));
    report["constant_state"] = {{"ubar", c.ubar}, {"phibar", c.phibar}, {"sup_u_error", du}, {"sup_phi_error", dp}};
  }
  out.write_json("report.json", report);

  log << "stationary: " << sol.iterations << " iterations, checks " << (rep.passed() ? "passed" : "FAILED") << "\n";
  return rep;
}

inline VerificationReport evolution_outputs(StagedOutput& out, const std::string& prefix, const RunConfig& cfg,
                                            Mode mode, const Options& opt, std::ostream& log, std::ostream& warn) {
  const InitializedState init = initial_state(cfg);
  for (const auto& w : init.warnings) warn << "warning: incompatible initial data, " << w << "\n";
  const Trajectory traj = run({cfg.net, cfg.grid, init.state, cfg.evolution->config});

  json manifest = run_header(cfg, mode, opt);
  manifest["dt"] = traj.dt;
  manifest["steps"] = traj.steps;
  json snaps = json::array();
  for (std::size_t k = 0; k < traj.snapshots.size(); ++k) {
    const auto& s = traj.snapshots[k];
    const std::string dir = prefix + "snapshots/" + std::to_string(k);
    snaps.push_back({{"index", k},
                     {"t", s.t},
                     {"fields",
                      {dump_field(out, dir, "u", s.u, cfg.net), dump_field(out, dir, "v", s.v, cfg.net),
                       dump_field(out, dir, "phi", s.phi, cfg.net)}}});
  }
  manifest["snapshots"] = snaps;
  manifest["compatibility_max_residual"] = init.compatibility.max();
  out.write_json(prefix + "manifest.json", manifest);
  out.write_json(prefix + "diagnostics.json", diagnostics_json(traj.diagnostics));
  out.write(prefix + "diagnostics.csv", diagnostics_csv(traj.diagnostics));

  const ConservationReport c = conservation_report(traj.diagnostics);
  VerificationReport rep;
  rep.checks.push_back({"mass_conservation", c.max_mass_residual(), 1e-12, c.max_mass_residual() <= 1e-12, false});
  rep.checks.push_back(
      {"node_flux_balance", c.max_node_flux_residual(), 1e-12, c.max_node_flux_residual() <= 1e-12, false});
  const auto& d = traj.diagnostics;
  if (!d.distances.empty()) {
    bool decreasing = true;
    for (std::size_t k = 1; k < d.size(); ++k) {
      decreasing = decreasing && d.distances[k].max_u() <= d.distances[k - 1].max_u() * (1.0 + 1e-12);
    }
    rep.checks.push_back({"distance_to_constant_final", d.distances.back().max_u(), 0.0, decreasing, true});
  }
  log << "evolve: " << traj.steps << " steps of dt = " << traj.dt << ", mass residual " << c.max_mass_residual()
      << "\n";
  return rep;
}

}  // namespace detail

/// Runs the front end on argv and returns the exit code.
inline int run(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  CLI::App app{"Hyperbolic-parabolic chemotaxis on networks: stationary solutions and time evolution"};
  Options opt;
  unsigned seed = 0;
  app.add_option("--mode", opt.mode, "stationary, evolve or verify (overrides the config)")
      ->check(CLI::IsMember({"stationary", "evolve", "verify"}));
  app.add_option("--config", opt.config, "JSON run configuration")->required();
  app.add_option("--out", opt.out, "output directory (overrides the config)");
  auto* seed_opt = app.add_option("--seed", seed, "seed recorded in the run manifest");
  app.add_flag("--quiet", opt.quiet, "suppress progress output");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kSuccess : kUsage;
  }
  if (seed_opt->count() > 0) opt.seed = seed;

  std::ostringstream sink;
  std::ostream& log = opt.quiet ? static_cast<std::ostream&>(sink) : out;
  std::ostream& warn = opt.quiet ? static_cast<std::ostream&>(sink) : err;

  try {
    const RunConfig cfg = parse_config(opt.config);
    std::optional<Mode> mode = opt.mode.empty() ? cfg.mode : parse_mode(opt.mode);
    if (!mode) {
      err << "error: no mode given (use --mode or the config's \"mode\" key)\n";
      return kUsage;
    }
    const std::string target = opt.out.empty() ? cfg.output : opt.out;
    (void)thread_cap();

    StagedOutput staged(target);
    VerificationReport rep;
    switch (*mode) {
      case Mode::stationary:
        rep = detail::stationary_outputs(staged, cfg, *mode, opt, log);
        break;
      case Mode::evolve:
        rep = detail::evolution_outputs(staged, "", cfg, *mode, opt, log, warn);
        break;
      case Mode::verify: {
        if (!cfg.stationary && !cfg.evolution) {
          err << "error: verify mode needs a stationary or evolution section\n";
          return kUsage;
        }
        if (cfg.stationary) {
          const auto r = detail::stationary_outputs(staged, cfg, *mode, opt, log);
          rep.checks.insert(rep.checks.end(), r.checks.begin(), r.checks.end());
        }
        if (cfg.evolution) {
          const auto r = detail::evolution_outputs(staged, cfg.stationary ? "evolution/" : "", cfg, *mode, opt, log, warn);
          rep.checks.insert(rep.checks.end(), r.checks.begin(), r.checks.end());
        }
        staged.write_json("verification.json", report_json(rep));
        staged.commit();
        for (const auto& c : rep.checks) {
          log << (c.informational ? "INFO " : (c.passed ? "PASS " : "FAIL ")) << c.name << " = " << c.value;
          if (!c.informational) log << " (bound " << c.bound << ")";
          log << "\n";
        }
        return rep.passed() ? kSuccess : kVerifyFailed;
      }
    }
    staged.commit();
    return kSuccess;
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    switch (e.code()) {
      case ErrorCode::no_convergence: return kNoConvergence;
      case ErrorCode::numerical_blowup: return kBlowup;
      default: return kUsage;
    }
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kUsage;
  }
}

}  // namespace netchemo::cli
