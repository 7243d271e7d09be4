/**
 * @file elliptic.hpp
 * @brief The network elliptic operator  -D_i phi_xx + b_i phi  with homogeneous
 *        Neumann data at outer vertices and the alpha transmission conditions
 *        at inner nodes.
 *
 * Discretisation is vertex-centred. Interior rows are the usual three-point
 * stencil multiplied by dx. Endpoint rows come from balancing the equation on
 * the half cell next to the node,
 *
 *     D (phi_0 - phi_1)/dx + sum_j alpha_ij (phi_i - phi_j) + b dx/2 phi_0 = dx/2 F_0,
 *
 * where the node flux has been replaced by the transmission condition (the
 * orientation signs cancel against the outward normal). The resulting matrix
 * is symmetric, strictly diagonally dominant and an M-matrix: it is positive
 * definite and its inverse is non-negative.
 */
#pragma once

#include <cmath>
#include <cstddef>
#include <fstream>
#include <memory>
#include <string>
#include <vector>

#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>

#include "netchemo/error.hpp"
#include "netchemo/grid.hpp"
#include "netchemo/network.hpp"

namespace netchemo {

class EllipticSystem {
 public:
  using SparseMatrix = Eigen::SparseMatrix<double>;

  /// `reaction_shift` is added to every b_i; the implicit Euler step of the
  /// chemoattractant equation uses shift = 1/dt.
  EllipticSystem(const ValidatedNetwork& net, const Grid& grid, double reaction_shift = 0.0)
      : grid_(grid), shift_(reaction_shift) {
    if (grid.arc_count() != net.arc_count()) throw Error(ErrorCode::shape_mismatch, "grid does not match network");
    std::size_t off = 0;
    for (ArcIndex i = 0; i < net.arc_count(); ++i) {
      offsets_.push_back(off);
      off += grid.cells[i] + 1;
    }
    size_ = off;

    std::vector<Eigen::Triplet<double>> entries;
    for (ArcIndex i = 0; i < net.arc_count(); ++i) {
      const auto& a = net.arc(i);
      const std::size_t n = grid.cells[i];
      const double dx = grid.dx(i);
      const double diff = a.diffusion / dx;
      const double react = (a.degradation + reaction_shift) * dx;
      const std::size_t o = offsets_[i];
      for (std::size_t k = 0; k <= n; ++k) {
        const bool end = (k == 0 || k == n);
        entries.emplace_back(o + k, o + k, end ? diff + 0.5 * react : 2.0 * diff + react);
        if (k > 0) entries.emplace_back(o + k, o + k - 1, -diff);
        if (k < n) entries.emplace_back(o + k, o + k + 1, -diff);
        weights_.push_back(end ? 0.5 * dx : dx);
      }
    }
    for (const auto& star : net.inner_nodes()) {
      for (std::size_t p = 0; p < star.size(); ++p) {
        const std::size_t rp = endpoint_row(star.arcs[p], star.end(p));
        for (std::size_t q = 0; q < star.size(); ++q) {
          if (p == q) continue;
          const double alpha = star.alpha(p, q);
          if (alpha == 0.0) continue;
          entries.emplace_back(rp, rp, alpha);
          entries.emplace_back(rp, endpoint_row(star.arcs[q], star.end(q)), -alpha);
        }
      }
    }
    matrix_.resize(static_cast<Eigen::Index>(size_), static_cast<Eigen::Index>(size_));
    matrix_.setFromTriplets(entries.begin(), entries.end());
    matrix_.makeCompressed();

    auto solver = std::make_shared<Eigen::SimplicialLDLT<SparseMatrix>>();
    solver->compute(matrix_);
    if (solver->info() != Eigen::Success) {
      throw Error(ErrorCode::singular_system, "factorisation of the elliptic operator failed");
    }
    solver_ = std::move(solver);
  }

  const SparseMatrix& matrix() const { return matrix_; }
  const Grid& grid() const { return grid_; }
  std::size_t size() const { return size_; }
  double reaction_shift() const { return shift_; }

  std::size_t offset(ArcIndex i) const { return offsets_[i]; }
  std::size_t endpoint_row(ArcIndex i, End e) const {
    return offsets_[i] + (e == End::tail ? 0 : grid_.cells[i]);
  }
  /// Quadrature weight of every unknown (dx/2 at arc ends, dx inside).
  const std::vector<double>& weights() const { return weights_; }

  Eigen::VectorXd flatten(const NetworkField& f) const {
    check_vertex_field(f);
    Eigen::VectorXd v(static_cast<Eigen::Index>(size_));
    for (ArcIndex i = 0; i < f.arc_count(); ++i) {
      for (std::size_t k = 0; k < f[i].values.size(); ++k) v[static_cast<Eigen::Index>(offsets_[i] + k)] = f[i].values[k];
    }
    return v;
  }

  NetworkField unflatten(const Eigen::VectorXd& v) const {
    NetworkField f = NetworkField::zeros(grid_, Centering::vertex);
    for (ArcIndex i = 0; i < f.arc_count(); ++i) {
      for (std::size_t k = 0; k < f[i].values.size(); ++k) f[i].values[k] = v[static_cast<Eigen::Index>(offsets_[i] + k)];
    }
    return f;
  }

  /// A(phi) in equation units, i.e. rows divided by their quadrature weight.
  NetworkField apply(const NetworkField& phi) const {
    Eigen::VectorXd y = matrix_ * flatten(phi);
    for (std::size_t r = 0; r < size_; ++r) y[static_cast<Eigen::Index>(r)] /= weights_[r];
    return unflatten(y);
  }

  /// Solves A phi = F for a vertex-sampled right-hand side.
  NetworkField solve(const NetworkField& rhs) const {
    Eigen::VectorXd b = flatten(rhs);
    for (std::size_t r = 0; r < size_; ++r) b[static_cast<Eigen::Index>(r)] *= weights_[r];
    Eigen::VectorXd x = solver_->solve(b);
    if (solver_->info() != Eigen::Success || !x.allFinite()) {
      throw Error(ErrorCode::singular_system, "elliptic back-substitution failed");
    }
    // One step of iterative refinement keeps the relative residual at
    // round-off level for badly scaled parameter sets.
    Eigen::VectorXd r = b - matrix_ * x;
    x += solver_->solve(r);
    return unflatten(x);
  }

  /// max_k |A phi - F| / max(|F|_inf, tiny)
  double relative_residual(const NetworkField& phi, const NetworkField& rhs) const {
    const NetworkField r = apply(phi) - rhs;
    const double scale = rhs.max_abs();
    return scale > 0.0 ? r.max_abs() / scale : r.max_abs();
  }

  /// Coordinate text dump (Matrix Market layout, 1-based indices).
  void write_matrix_market(const std::string& path) const {
    std::ofstream out(path);
    if (!out) throw Error(ErrorCode::file_not_found, "cannot open " + path);
    out << "%%MatrixMarket matrix coordinate real general\n";
    out << size_ << ' ' << size_ << ' ' << matrix_.nonZeros() << '\n';
    out.precision(17);
    for (Eigen::Index c = 0; c < matrix_.outerSize(); ++c) {
      for (SparseMatrix::InnerIterator it(matrix_, c); it; ++it) {
        out << it.row() + 1 << ' ' << it.col() + 1 << ' ' << it.value() << '\n';
      }
    }
  }

 private:
  void check_vertex_field(const NetworkField& f) const {
    if (!matches_grid(f, grid_, Centering::vertex)) {
      throw Error(ErrorCode::shape_mismatch, "elliptic operator expects a vertex field on its grid");
    }
  }

  Grid grid_;
  double shift_ = 0.0;
  std::size_t size_ = 0;
  std::vector<std::size_t> offsets_;
  std::vector<double> weights_;
  SparseMatrix matrix_;
  std::shared_ptr<const Eigen::SimplicialLDLT<SparseMatrix>> solver_;
};

inline EllipticSystem assemble_operator(const ValidatedNetwork& net, const Grid& grid) {
  return EllipticSystem(net, grid);
}

/// Solves A phi = F; throws SingularSystem if the residual misses 1e-10 relative.
inline NetworkField solve_elliptic(const EllipticSystem& sys, const NetworkField& rhs) {
  if (!rhs.all_finite()) throw Error(ErrorCode::bad_parameter, "right-hand side is not finite");
  NetworkField phi = sys.solve(rhs);
  const double res = sys.relative_residual(phi, rhs);
  if (!(res <= 1e-10)) {
    throw Error(ErrorCode::singular_system, "elliptic residual " + std::to_string(res) + " exceeds 1e-10");
  }
  return phi;
}

// ---------------------------------------------------------------------------
// Node flux checks
// ---------------------------------------------------------------------------

/// D phi_x at an arc endpoint. Without a source this is the second-order
/// one-sided difference. With the source F of  -D phi_xx + b phi = F  the
/// half-cell balance gives a reconstruction that the discrete solution of
/// EllipticSystem satisfies to round-off.
inline double endpoint_flux(const ArcField& phi, double diffusion, End end, const ArcField* source = nullptr,
                            double reaction = 0.0) {
  const auto& f = phi.values;
  const std::size_t n = f.size() - 1;
  const double dx = phi.dx();
  if (source == nullptr) {
    if (end == End::tail) return diffusion * (-3.0 * f[0] + 4.0 * f[1] - f[2]) / (2.0 * dx);
    return diffusion * (3.0 * f[n] - 4.0 * f[n - 1] + f[n - 2]) / (2.0 * dx);
  }
  const auto& s = source->values;
  if (end == End::tail) return diffusion * (f[1] - f[0]) / dx - 0.5 * dx * (reaction * f[0] - s[0]);
  return diffusion * (f[n] - f[n - 1]) / dx + 0.5 * dx * (reaction * f[n] - s[n]);
}

struct NodeFluxReport {
  std::vector<NodeId> nodes;
  /// |sum_in D phi_x - sum_out D phi_x| per inner node.
  std::vector<double> balance;
  /// Per inner node, per star arc: violation of the alpha transmission condition.
  std::vector<std::vector<double>> transmission;
  /// |D phi_x| at each outer vertex.
  std::vector<double> outer;

  double max_balance() const {
    double m = 0.0;
    for (double b : balance) m = std::max(m, b);
    return m;
  }
  double max_violation() const {
    double m = 0.0;
    for (const auto& row : transmission)
      for (double v : row) m = std::max(m, v);
    for (double v : outer) m = std::max(m, v);
    return m;
  }
};

namespace detail {

inline NodeFluxReport node_flux_report(const NetworkField& phi, const ValidatedNetwork& net, const Grid& grid,
                                       const NetworkField* source, double reaction_shift) {
  if (!matches_grid(phi, grid, Centering::vertex)) {
    throw Error(ErrorCode::shape_mismatch, "node flux residual needs a vertex field on the grid");
  }
  auto flux = [&](ArcIndex i, End e) {
    const auto& a = net.arc(i);
    return endpoint_flux(phi[i], a.diffusion, e, source ? &(*source)[i] : nullptr, a.degradation + reaction_shift);
  };
  NodeFluxReport r;
  for (const auto& star : net.inner_nodes()) {
    r.nodes.push_back(star.node);
    double balance = 0.0;
    std::vector<double> violation;
    for (std::size_t p = 0; p < star.size(); ++p) {
      const ArcIndex i = star.arcs[p];
      const double fx = flux(i, star.end(p));
      balance += star.sign[p] * fx;
      double coupling = 0.0;
      const double pi = phi[i].trace(star.end(p));
      for (std::size_t q = 0; q < star.size(); ++q) {
        if (q != p) coupling += star.alpha(p, q) * (phi[star.arcs[q]].trace(star.end(q)) - pi);
      }
      // Incoming: D phi_x = coupling; outgoing: -D phi_x = coupling.
      violation.push_back(std::abs(star.sign[p] * fx - coupling));
    }
    r.balance.push_back(std::abs(balance));
    r.transmission.push_back(std::move(violation));
  }
  for (const auto& o : net.outer_nodes()) r.outer.push_back(std::abs(flux(o.arc, o.end)));
  return r;
}

}  // namespace detail

inline NodeFluxReport node_flux_residual(const NetworkField& phi, const ValidatedNetwork& net, const Grid& grid) {
  return detail::node_flux_report(phi, net, grid, nullptr, 0.0);
}

/// Variant using the equation's source for the endpoint flux reconstruction.
inline NodeFluxReport node_flux_residual(const NetworkField& phi, const ValidatedNetwork& net, const Grid& grid,
                                         const NetworkField& source, double reaction_shift = 0.0) {
  return detail::node_flux_report(phi, net, grid, &source, reaction_shift);
}

struct PositivityCheck {
  bool nonnegative = true;
  double min_value = 0.0;
};

inline PositivityCheck check_positivity(const NetworkField& phi) {
  PositivityCheck c;
  c.min_value = phi.min_value();
  c.nonnegative = c.min_value >= -1e-12 * phi.max_abs();
  return c;
}

}  // namespace netchemo
