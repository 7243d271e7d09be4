#pragma once

#include <string>

#include "netchemo/error.hpp"
#include "netchemo/grid.hpp"
#include "netchemo/network.hpp"

namespace netchemo {

/// Solution snapshot: u and v cell-centred, phi on vertices.
struct NetworkState {
  double t = 0.0;
  NetworkField u;
  NetworkField v;
  NetworkField phi;

  bool all_finite() const { return u.all_finite() && v.all_finite() && phi.all_finite(); }
};

/// Riemann invariants w+ = (u + v)/2 and w- = (u - v)/2 of the hyperbolic pair.
struct CharacteristicPair {
  NetworkField wplus;
  NetworkField wminus;
};

inline CharacteristicPair to_characteristics(const NetworkField& u, const NetworkField& v) {
  return {combine(0.5, u, 0.5, v), combine(0.5, u, -0.5, v)};
}

/// Returns {u, v}.
inline std::pair<NetworkField, NetworkField> from_characteristics(const CharacteristicPair& w) {
  return {w.wplus + w.wminus, w.wplus - w.wminus};
}

/// The triple (ubar, 0, Q ubar). Exists for any network with a uniform ratio
/// a_i / b_i = Q, whatever its topology and mass.
struct ConstantState {
  double ubar = 0.0;
  double phibar = 0.0;
  double mass = 0.0;

  static ConstantState from_density(const ValidatedNetwork& net, double ubar) {
    if (!net.ratios().uniform) {
      throw Error(ErrorCode::uniform_ratio_required, "constant states need a_i/b_i equal on every arc");
    }
    return {ubar, net.ratios().q * ubar, ubar * net.total_length()};
  }

  static ConstantState from_mass(const ValidatedNetwork& net, double mass) {
    return from_density(net, mass / net.total_length());
  }

  NetworkState as_state(const Grid& grid, double t = 0.0) const {
    return {t, NetworkField::constant(grid, Centering::cell, ubar), NetworkField::zeros(grid, Centering::cell),
            NetworkField::constant(grid, Centering::vertex, phibar)};
  }
};

}  // namespace netchemo
