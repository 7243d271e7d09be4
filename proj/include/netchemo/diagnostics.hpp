/**
 * @file diagnostics.hpp
 * @brief Monitored quantities along a trajectory: the energy functional F_T,
 *        distance to the constant state and conservation residuals.
 *
 * F_T is evaluated on the perturbation (u - ubar, v, phi - phibar):
 *
 *   F_T^2 = sum_i ( sup_t |u_i|_H1^2 + sup_t |v_i|_H1^2 + sup_t |phi_ix|_H1^2 )
 *         + int_0^T ( |u_x|^2 + |v|_H1^2 + |v_t|^2 + |phi_x|_H1^2 + |phi_xt|^2 ) dt
 *
 * with squared network norms taken as sums of squared arc norms. Only phi_x
 * enters, so phibar never matters. Time derivatives come from differences of
 * consecutive snapshots; the snapshot spacing must not exceed ten steps.
 */
#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "netchemo/error.hpp"
#include "netchemo/grid.hpp"
#include "netchemo/network.hpp"
#include "netchemo/state.hpp"

namespace netchemo {

struct FtTerms {
  double sup_u = 0.0;
  double sup_v = 0.0;
  double sup_phix = 0.0;
  double int_ux = 0.0;
  double int_v = 0.0;
  double int_vt = 0.0;
  double int_phix = 0.0;
  double int_phixt = 0.0;

  double sup_part() const { return sup_u + sup_v + sup_phix; }
  double integral_part() const { return int_ux + int_v + int_vt + int_phix + int_phixt; }
  double value() const { return std::sqrt(sup_part() + integral_part()); }
};

/// Incremental evaluation of F_T over a stream of snapshots.
class FtAccumulator {
 public:
  /// `max_gap` is the largest admissible time between snapshots.
  FtAccumulator(double ubar, double max_gap) : ubar_(ubar), max_gap_(max_gap) {}

  /// Adds a snapshot and returns F_T at its time.
  double push(const NetworkState& s) {
    Sample cur = measure(s);
    const std::size_t m = cur.u_h1_arc.size();
    if (!prev_) {
      sup_u_.assign(m, 0.0);
      sup_v_.assign(m, 0.0);
      sup_phix_.assign(m, 0.0);
    } else {
      const double dt = s.t - prev_->t;
      if (!(dt > 0.0)) throw Error(ErrorCode::insufficient_cadence, "snapshot times must increase");
      if (dt > max_gap_ * (1.0 + 1e-9)) {
        throw Error(ErrorCode::insufficient_cadence, "snapshot gap " + std::to_string(dt) + " exceeds " +
                                                         std::to_string(max_gap_));
      }
      terms_.int_ux += 0.5 * dt * (prev_->ux2 + cur.ux2);
      terms_.int_v += 0.5 * dt * (prev_->v_h1 + cur.v_h1);
      terms_.int_phix += 0.5 * dt * (prev_->phix_h1 + cur.phix_h1);
      // |(f1 - f0)/dt|^2 dt
      double vt = 0.0;
      double phixt = 0.0;
      for (ArcIndex i = 0; i < m; ++i) {
        vt += l2_squared(difference(s.v[i], prev_state_v_[i]));
        phixt += l2_squared(difference(cur.phix[i], prev_->phix[i]));
      }
      terms_.int_vt += vt / dt;
      terms_.int_phixt += phixt / dt;
    }
    terms_.sup_u = terms_.sup_v = terms_.sup_phix = 0.0;
    for (ArcIndex i = 0; i < m; ++i) {
      sup_u_[i] = std::max(sup_u_[i], cur.u_h1_arc[i]);
      sup_v_[i] = std::max(sup_v_[i], cur.v_h1_arc[i]);
      sup_phix_[i] = std::max(sup_phix_[i], cur.phix_h1_arc[i]);
      terms_.sup_u += sup_u_[i];
      terms_.sup_v += sup_v_[i];
      terms_.sup_phix += sup_phix_[i];
    }
    prev_state_v_ = s.v.arcs;
    prev_ = std::move(cur);
    return terms_.value();
  }

  const FtTerms& terms() const { return terms_; }
  double value() const { return terms_.value(); }

 private:
  struct Sample {
    double t = 0.0;
    std::vector<double> u_h1_arc;
    std::vector<double> v_h1_arc;
    std::vector<double> phix_h1_arc;
    std::vector<ArcField> phix;
    double ux2 = 0.0;
    double v_h1 = 0.0;
    double phix_h1 = 0.0;
  };

  static ArcField difference(const ArcField& a, const ArcField& b) {
    ArcField d = a;
    for (std::size_t k = 0; k < d.values.size(); ++k) d.values[k] -= b.values[k];
    return d;
  }

  Sample measure(const NetworkState& s) const {
    Sample out;
    out.t = s.t;
    for (ArcIndex i = 0; i < s.u.arc_count(); ++i) {
      ArcField up = s.u[i];
      for (double& x : up.values) x -= ubar_;
      const double u_l2 = l2_squared(up);
      const double u_h1 = h1_squared(up);
      const double v_h1 = h1_squared(s.v[i]);
      ArcField px = derivative(s.phi[i]);
      const double px_h1 = h1_squared(px);
      out.u_h1_arc.push_back(u_h1);
      out.v_h1_arc.push_back(v_h1);
      out.phix_h1_arc.push_back(px_h1);
      out.ux2 += u_h1 - u_l2;
      out.v_h1 += v_h1;
      out.phix_h1 += px_h1;
      out.phix.push_back(std::move(px));
    }
    return out;
  }

  double ubar_;
  double max_gap_;
  FtTerms terms_;
  std::vector<double> sup_u_, sup_v_, sup_phix_;
  std::optional<Sample> prev_;
  std::vector<ArcField> prev_state_v_;
};

/// F_T at every snapshot of a trajectory window.
inline std::vector<double> functional_ft(std::span<const NetworkState> snapshots, double ubar, double step) {
  FtAccumulator acc(ubar, 10.0 * step);
  std::vector<double> out;
  out.reserve(snapshots.size());
  for (const auto& s : snapshots) out.push_back(acc.push(s));
  return out;
}

// ---------------------------------------------------------------------------

struct DistanceReport {
  std::vector<double> u;    ///< sup |u - ubar| per arc
  std::vector<double> v;    ///< sup |v| per arc
  std::vector<double> phi;  ///< sup |phi - phibar| + sup |phi_x| per arc
  std::vector<double> phix; ///< sup |phi_x| per arc

  static double max_of(const std::vector<double>& x) {
    double m = 0.0;
    for (double e : x) m = std::max(m, e);
    return m;
  }
  double max_u() const { return max_of(u); }
  double max_v() const { return max_of(v); }
  double max_phi() const { return max_of(phi); }
};

inline DistanceReport distance_to_constant(const ValidatedNetwork& net, const NetworkState& s,
                                           const ConstantState& c) {
  if (!net.ratios().uniform) {
    throw Error(ErrorCode::uniform_ratio_required, "distance to a constant state needs a uniform ratio");
  }
  DistanceReport d;
  for (ArcIndex i = 0; i < s.u.arc_count(); ++i) {
    double du = 0.0, dv = 0.0, dp = 0.0;
    for (double x : s.u[i].values) du = std::max(du, std::abs(x - c.ubar));
    for (double x : s.v[i].values) dv = std::max(dv, std::abs(x));
    for (double x : s.phi[i].values) dp = std::max(dp, std::abs(x - c.phibar));
    double dpx = 0.0;
    for (double x : derivative(s.phi[i].values, s.phi[i].dx())) dpx = std::max(dpx, std::abs(x));
    d.u.push_back(du);
    d.v.push_back(dv);
    d.phi.push_back(dp + dpx);
    d.phix.push_back(dpx);
  }
  return d;
}

// ---------------------------------------------------------------------------

/// One row per recorded output time.
struct DiagnosticsRecord {
  std::vector<double> times;
  std::vector<double> mass;
  /// Largest |sum_in lambda v - sum_out lambda v| over inner nodes and over the
  /// steps since the previous row.
  std::vector<double> node_flux_residual;
  std::vector<double> u_sup;     ///< max_i sup |u - ubar|
  std::vector<double> v_sup;     ///< max_i sup |v|
  std::vector<double> phi_sup;   ///< max_i sup |phi - phibar|
  std::vector<double> phix_sup;  ///< max_i sup |phi_x|
  std::vector<DistanceReport> distances;
  std::vector<double> ft;
  std::vector<FtTerms> ft_terms;

  std::size_t size() const { return times.size(); }

  /// Index of the row closest to t.
  std::size_t row_at(double t) const {
    std::size_t best = 0;
    for (std::size_t k = 1; k < times.size(); ++k) {
      if (std::abs(times[k] - t) < std::abs(times[best] - t)) best = k;
    }
    return best;
  }
};

struct ConservationReport {
  std::vector<double> mass_residual;
  std::vector<double> node_flux_residual;

  double max_mass_residual() const { return DistanceReport::max_of(mass_residual); }
  double max_node_flux_residual() const { return DistanceReport::max_of(node_flux_residual); }
};

inline ConservationReport conservation_report(const DiagnosticsRecord& rec) {
  ConservationReport r;
  if (rec.mass.empty()) return r;
  const double m0 = rec.mass.front();
  const double scale = std::max(std::abs(m0), std::numeric_limits<double>::epsilon());
  for (double m : rec.mass) r.mass_residual.push_back(std::abs(m - m0) / scale);
  r.node_flux_residual = rec.node_flux_residual;
  return r;
}

}  // namespace netchemo
