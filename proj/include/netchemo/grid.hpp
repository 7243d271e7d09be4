/**
 * @file grid.hpp
 * @brief Uniform per-arc grids, sampled network fields, quadrature and the
 *        discrete norms used by bounds and stopping tests.
 *
 * Two samplings coexist on the same grid. Cell-centred fields (u, v) hold one
 * value per cell at x = (k + 1/2) dx. Vertex fields (phi) hold n + 1 values at
 * x = k dx including both arc endpoints, so traces and one-sided derivatives
 * at nodes are available directly.
 *
 * Network norms follow the per-arc-then-sum convention: ||f|| = sum_i ||f_i||,
 * except the sup norm which is the maximum over arcs.
 */
#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "netchemo/error.hpp"
#include "netchemo/network.hpp"

namespace netchemo {

inline constexpr std::size_t kMinCells = 4;

struct Grid {
  std::vector<double> lengths;
  std::vector<std::size_t> cells;

  std::size_t arc_count() const { return cells.size(); }
  double dx(ArcIndex i) const { return lengths[i] / static_cast<double>(cells[i]); }
  double total_length() const {
    double s = 0.0;
    for (double l : lengths) s += l;
    return s;
  }
  double min_dx() const {
    double m = dx(0);
    for (ArcIndex i = 1; i < arc_count(); ++i) m = std::min(m, dx(i));
    return m;
  }
};

inline Grid build_grid(const ValidatedNetwork& net, const std::vector<std::size_t>& cells) {
  if (cells.size() != net.arc_count()) {
    throw Error(ErrorCode::shape_mismatch, "expected " + std::to_string(net.arc_count()) + " cell counts, got " +
                                               std::to_string(cells.size()));
  }
  Grid g;
  for (ArcIndex i = 0; i < net.arc_count(); ++i) {
    if (cells[i] < kMinCells) {
      throw Error(ErrorCode::resolution_too_coarse, "arc " + std::to_string(net.arc(i).id) + " has " +
                                                        std::to_string(cells[i]) + " cells (minimum 4)");
    }
    g.lengths.push_back(net.arc(i).length);
    g.cells.push_back(cells[i]);
  }
  return g;
}

/// Smallest cell counts with dx_i <= target_dx.
inline Grid build_grid(const ValidatedNetwork& net, double target_dx) {
  if (!(target_dx > 0.0)) throw Error(ErrorCode::bad_parameter, "target dx must be positive");
  std::vector<std::size_t> cells;
  for (const auto& a : net.arcs()) {
    // Guard against L/dx landing a hair above an integer through rounding.
    const double ratio = a.length / target_dx;
    cells.push_back(static_cast<std::size_t>(std::ceil(ratio * (1.0 - 1e-12))));
  }
  return build_grid(net, cells);
}

inline Grid build_grid_uniform(const ValidatedNetwork& net, std::size_t cells_per_arc) {
  return build_grid(net, std::vector<std::size_t>(net.arc_count(), cells_per_arc));
}

enum class Centering { cell, vertex };

struct ArcField {
  double length = 1.0;
  Centering centering = Centering::cell;
  std::vector<double> values;

  std::size_t cells() const { return centering == Centering::cell ? values.size() : values.size() - 1; }
  double dx() const { return length / static_cast<double>(cells()); }
  double x(std::size_t k) const {
    return centering == Centering::cell ? (static_cast<double>(k) + 0.5) * dx() : static_cast<double>(k) * dx();
  }
  /// Endpoint value; for cell fields the adjacent cell value.
  double trace(End e) const { return e == End::tail ? values.front() : values.back(); }
};

struct NetworkField {
  std::vector<ArcField> arcs;

  Centering centering() const { return arcs.empty() ? Centering::cell : arcs.front().centering; }
  std::size_t arc_count() const { return arcs.size(); }
  ArcField& operator[](ArcIndex i) { return arcs[i]; }
  const ArcField& operator[](ArcIndex i) const { return arcs[i]; }

  static NetworkField constant(const Grid& g, Centering c, double value) {
    NetworkField f;
    for (ArcIndex i = 0; i < g.arc_count(); ++i) {
      const std::size_t n = c == Centering::cell ? g.cells[i] : g.cells[i] + 1;
      f.arcs.push_back({g.lengths[i], c, std::vector<double>(n, value)});
    }
    return f;
  }

  static NetworkField zeros(const Grid& g, Centering c) { return constant(g, c, 0.0); }

  /// Point samples of fn(arc, x).
  static NetworkField sample(const Grid& g, Centering c, const std::function<double(ArcIndex, double)>& fn) {
    NetworkField f = zeros(g, c);
    for (ArcIndex i = 0; i < g.arc_count(); ++i) {
      auto& a = f.arcs[i];
      for (std::size_t k = 0; k < a.values.size(); ++k) a.values[k] = fn(i, a.x(k));
    }
    return f;
  }

  double max_abs() const {
    double m = 0.0;
    for (const auto& a : arcs)
      for (double v : a.values) m = std::max(m, std::abs(v));
    return m;
  }

  double min_value() const {
    double m = arcs.front().values.front();
    for (const auto& a : arcs)
      for (double v : a.values) m = std::min(m, v);
    return m;
  }

  bool all_finite() const {
    for (const auto& a : arcs)
      for (double v : a.values)
        if (!std::isfinite(v)) return false;
    return true;
  }
};

inline bool same_shape(const NetworkField& f, const NetworkField& g) {
  if (f.arc_count() != g.arc_count()) return false;
  for (ArcIndex i = 0; i < f.arc_count(); ++i) {
    if (f[i].centering != g[i].centering || f[i].values.size() != g[i].values.size()) return false;
  }
  return true;
}

inline bool matches_grid(const NetworkField& f, const Grid& g, Centering c) {
  if (f.arc_count() != g.arc_count()) return false;
  for (ArcIndex i = 0; i < g.arc_count(); ++i) {
    const std::size_t n = c == Centering::cell ? g.cells[i] : g.cells[i] + 1;
    if (f[i].centering != c || f[i].values.size() != n) return false;
  }
  return true;
}

/// a * f + b * g
inline NetworkField combine(double a, const NetworkField& f, double b, const NetworkField& g) {
  if (!same_shape(f, g)) throw Error(ErrorCode::shape_mismatch, "fields live on different grids");
  NetworkField r = f;
  for (ArcIndex i = 0; i < r.arc_count(); ++i) {
    for (std::size_t k = 0; k < r[i].values.size(); ++k) r[i].values[k] = a * f[i].values[k] + b * g[i].values[k];
  }
  return r;
}

inline NetworkField operator-(const NetworkField& f, const NetworkField& g) { return combine(1.0, f, -1.0, g); }
inline NetworkField operator+(const NetworkField& f, const NetworkField& g) { return combine(1.0, f, 1.0, g); }
inline NetworkField operator*(double s, const NetworkField& f) { return combine(s, f, 0.0, f); }

inline NetworkField shifted(const NetworkField& f, double offset) {
  NetworkField r = f;
  for (auto& a : r.arcs)
    for (double& v : a.values) v += offset;
  return r;
}

// ---------------------------------------------------------------------------
// Quadrature
// ---------------------------------------------------------------------------

/// Midpoint rule for cell samples, trapezoid rule for vertex samples.
inline double quadrature(const std::vector<double>& values, Centering c, double dx) {
  if (values.empty()) return 0.0;
  double s = 0.0;
  if (c == Centering::cell) {
    for (double v : values) s += v;
    return s * dx;
  }
  for (std::size_t k = 1; k + 1 < values.size(); ++k) s += values[k];
  s += 0.5 * (values.front() + values.back());
  return s * dx;
}

inline double integrate(const ArcField& f) { return quadrature(f.values, f.centering, f.dx()); }

struct Integrals {
  std::vector<double> per_arc;
  double total = 0.0;
};

inline Integrals integrate(const NetworkField& f) {
  Integrals r;
  for (const auto& a : f.arcs) {
    r.per_arc.push_back(integrate(a));
    r.total += r.per_arc.back();
  }
  return r;
}

// ---------------------------------------------------------------------------
// Derivatives
// ---------------------------------------------------------------------------

/// First derivative at every sample: centred inside, second-order one-sided
/// at both ends. Needs at least three samples.
inline std::vector<double> derivative(const std::vector<double>& f, double dx) {
  const std::size_t n = f.size();
  if (n < 3) throw Error(ErrorCode::insufficient_samples, "first derivative needs at least 3 samples");
  std::vector<double> d(n);
  for (std::size_t k = 1; k + 1 < n; ++k) d[k] = (f[k + 1] - f[k - 1]) / (2.0 * dx);
  d[0] = (-3.0 * f[0] + 4.0 * f[1] - f[2]) / (2.0 * dx);
  d[n - 1] = (3.0 * f[n - 1] - 4.0 * f[n - 2] + f[n - 3]) / (2.0 * dx);
  return d;
}

/// Second derivative at every sample: centred inside, second-order one-sided
/// at both ends. Needs at least four samples.
inline std::vector<double> second_derivative(const std::vector<double>& f, double dx) {
  const std::size_t n = f.size();
  if (n < 4) throw Error(ErrorCode::insufficient_samples, "second derivative needs at least 4 samples");
  const double h2 = dx * dx;
  std::vector<double> d(n);
  for (std::size_t k = 1; k + 1 < n; ++k) d[k] = (f[k - 1] - 2.0 * f[k] + f[k + 1]) / h2;
  d[0] = (2.0 * f[0] - 5.0 * f[1] + 4.0 * f[2] - f[3]) / h2;
  d[n - 1] = (2.0 * f[n - 1] - 5.0 * f[n - 2] + 4.0 * f[n - 3] - f[n - 4]) / h2;
  return d;
}

inline ArcField derivative(const ArcField& f) { return {f.length, f.centering, derivative(f.values, f.dx())}; }
inline ArcField second_derivative(const ArcField& f) {
  return {f.length, f.centering, second_derivative(f.values, f.dx())};
}

inline NetworkField derivative(const NetworkField& f) {
  NetworkField r;
  for (const auto& a : f.arcs) r.arcs.push_back(derivative(a));
  return r;
}

// ---------------------------------------------------------------------------
// Norms
// ---------------------------------------------------------------------------

struct NormTable {
  double l1 = 0.0;
  double l2 = 0.0;
  double linf = 0.0;
  double h1 = 0.0;
  /// Only for vertex sampling.
  std::optional<double> h2;
  std::optional<double> w21;
};

namespace detail {

inline double sum_abs(const std::vector<double>& v, Centering c, double dx) {
  std::vector<double> a(v.size());
  std::transform(v.begin(), v.end(), a.begin(), [](double x) { return std::abs(x); });
  return quadrature(a, c, dx);
}

inline double sum_sq(const std::vector<double>& v, Centering c, double dx) {
  std::vector<double> a(v.size());
  std::transform(v.begin(), v.end(), a.begin(), [](double x) { return x * x; });
  return quadrature(a, c, dx);
}

}  // namespace detail

/// Squared L2 norm of one arc.
inline double l2_squared(const ArcField& f) { return detail::sum_sq(f.values, f.centering, f.dx()); }

/// Squared H1 norm of one arc: ||f||^2 + ||f_x||^2.
inline double h1_squared(const ArcField& f) {
  return l2_squared(f) + detail::sum_sq(derivative(f.values, f.dx()), f.centering, f.dx());
}

inline NormTable arc_norms(const ArcField& f) {
  const double dx = f.dx();
  const auto c = f.centering;
  NormTable t;
  const auto d1 = derivative(f.values, dx);
  const double f2 = detail::sum_sq(f.values, c, dx);
  const double d2 = detail::sum_sq(d1, c, dx);
  t.l1 = detail::sum_abs(f.values, c, dx);
  t.l2 = std::sqrt(f2);
  for (double v : f.values) t.linf = std::max(t.linf, std::abs(v));
  t.h1 = std::sqrt(f2 + d2);
  if (c == Centering::vertex) {
    const auto dd = second_derivative(f.values, dx);
    t.h2 = std::sqrt(f2 + d2 + detail::sum_sq(dd, c, dx));
    t.w21 = t.l1 + detail::sum_abs(d1, c, dx) + detail::sum_abs(dd, c, dx);
  }
  return t;
}

inline NormTable discrete_norms(const NetworkField& f) {
  NormTable t;
  if (f.centering() == Centering::vertex) {
    t.h2 = 0.0;
    t.w21 = 0.0;
  }
  for (const auto& a : f.arcs) {
    const NormTable n = arc_norms(a);
    t.l1 += n.l1;
    t.l2 += n.l2;
    t.linf = std::max(t.linf, n.linf);
    t.h1 += n.h1;
    if (n.h2) *t.h2 += *n.h2;
    if (n.w21) *t.w21 += *n.w21;
  }
  return t;
}

/// Discrete H^2 distance between two vertex fields (the fixed-point metric).
inline double h2_distance(const NetworkField& f, const NetworkField& g) {
  const auto n = discrete_norms(f - g);
  if (!n.h2) throw Error(ErrorCode::insufficient_samples, "H2 distance needs vertex sampling");
  return *n.h2;
}

}  // namespace netchemo
