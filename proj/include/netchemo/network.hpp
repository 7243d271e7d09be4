/**
 * @file network.hpp
 * @brief Oriented network description, validation and graph queries.
 *
 * Arcs are segments [0, L_i]; x = 0 sits at the tail node and x = L_i at the
 * head node. An arc is incoming at node v when v is its head. Nodes with one
 * incident arc are outer (boundary) vertices, all others are inner nodes and
 * carry two symmetric coupling matrices indexed by their incident arcs:
 * alpha couples the chemoattractant traces, kappa the cell density traces.
 *
 * All query functions refer to arcs by their position in NetworkSpec::arcs
 * (0-based index) and to nodes by the user-supplied integer id.
 */
#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <map>
#include <optional>
#include <queue>
#include <set>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "netchemo/error.hpp"

namespace netchemo {

using ArcIndex = std::size_t;
using NodeId = int;

enum class End { tail, head };

struct ArcSpec {
  int id = 0;
  NodeId tail = 0;
  NodeId head = 0;
  double length = 1.0;
  double lambda = 1.0;
  double beta = 1.0;
  double diffusion = 1.0;
  double production = 0.0;
  double degradation = 1.0;
};

struct NodeCoupling {
  NodeId node = 0;
  /// Arc ids giving the row/column order of alpha and kappa. Empty means
  /// "incident arcs in ascending id order".
  std::vector<int> arcs;
  Eigen::MatrixXd alpha;
  Eigen::MatrixXd kappa;
};

struct NetworkSpec {
  std::vector<ArcSpec> arcs;
  std::vector<NodeCoupling> inner_nodes;
};

struct RatioReport {
  std::vector<double> ratios;
  bool uniform = false;
  double q = 0.0;
};

/// Star of an inner node: incident arcs, their orientation relative to the
/// node and the coupling matrices in the same order.
struct NodeStar {
  NodeId node = 0;
  std::vector<ArcIndex> arcs;
  /// +1 when the node is the arc's head (incoming), -1 when it is the tail.
  std::vector<int> sign;
  Eigen::MatrixXd alpha;
  Eigen::MatrixXd kappa;

  std::size_t size() const { return arcs.size(); }
  End end(std::size_t local) const { return sign[local] > 0 ? End::head : End::tail; }
};

struct OuterNode {
  NodeId node = 0;
  ArcIndex arc = 0;
  End end = End::tail;
};

/// Network that passed validate_network. Immutable.
class ValidatedNetwork {
 public:
  const std::vector<ArcSpec>& arcs() const { return arcs_; }
  const ArcSpec& arc(ArcIndex i) const { return arcs_.at(i); }
  std::size_t arc_count() const { return arcs_.size(); }

  const std::vector<NodeStar>& inner_nodes() const { return inner_; }
  const std::vector<OuterNode>& outer_nodes() const { return outer_; }
  const std::vector<NodeId>& nodes() const { return nodes_; }
  const RatioReport& ratios() const { return ratios_; }

  bool is_inner(NodeId node) const { return inner_lookup_.count(node) > 0; }

  const NodeStar& star(NodeId node) const {
    auto it = inner_lookup_.find(node);
    if (it == inner_lookup_.end()) {
      throw Error(ErrorCode::bad_parameter, "node " + std::to_string(node) + " is not an inner node");
    }
    return inner_[it->second];
  }

  /// Arcs touching a node, ascending index.
  const std::vector<ArcIndex>& incident(NodeId node) const { return incidence_.at(node); }

  ArcIndex arc_index(int arc_id) const {
    for (ArcIndex i = 0; i < arcs_.size(); ++i) {
      if (arcs_[i].id == arc_id) return i;
    }
    throw Error(ErrorCode::bad_parameter, "unknown arc id " + std::to_string(arc_id));
  }

  NodeId endpoint(ArcIndex i, End e) const { return e == End::tail ? arcs_[i].tail : arcs_[i].head; }

  /// The other endpoint of arc i seen from node.
  NodeId opposite(ArcIndex i, NodeId node) const {
    return arcs_[i].tail == node ? arcs_[i].head : arcs_[i].tail;
  }

  double total_length() const {
    double s = 0.0;
    for (const auto& a : arcs_) s += a.length;
    return s;
  }

 private:
  friend ValidatedNetwork validate_network(const NetworkSpec&, double);

  std::vector<ArcSpec> arcs_;
  std::vector<NodeStar> inner_;
  std::vector<OuterNode> outer_;
  std::vector<NodeId> nodes_;
  std::map<NodeId, std::size_t> inner_lookup_;
  std::map<NodeId, std::vector<ArcIndex>> incidence_;
  RatioReport ratios_;
};

namespace detail {

inline std::string arc_name(const ArcSpec& a) { return "arc " + std::to_string(a.id); }
inline std::string node_name(NodeId n) { return "node " + std::to_string(n); }

inline void require_positive(const ArcSpec& a, double value, const char* field) {
  if (!(value > 0.0) || !std::isfinite(value)) {
    throw Error(ErrorCode::bad_parameter, arc_name(a) + ": " + field + " must be positive and finite");
  }
}

/// Condition (2.8) of the model: some arc k of the star is coupled to every
/// other arc through kappa.
inline bool is_dissipative(const Eigen::MatrixXd& kappa) {
  const auto n = kappa.rows();
  for (Eigen::Index k = 0; k < n; ++k) {
    bool ok = true;
    for (Eigen::Index i = 0; i < n && ok; ++i) {
      if (i != k && kappa(i, k) == 0.0) ok = false;
    }
    if (ok) return true;
  }
  return false;
}

inline void check_coupling_matrix(const Eigen::MatrixXd& m, const char* name, NodeId node, std::size_t size) {
  if (static_cast<std::size_t>(m.rows()) != size || static_cast<std::size_t>(m.cols()) != size) {
    throw Error(ErrorCode::bad_parameter, node_name(node) + ": " + name + " must be " + std::to_string(size) +
                                              "x" + std::to_string(size) + " (one row per incident arc)");
  }
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      if (!std::isfinite(m(i, j))) {
        throw Error(ErrorCode::bad_parameter, node_name(node) + ": " + name + " has a non-finite entry");
      }
      if (m(i, j) < 0.0) {
        throw Error(ErrorCode::negative_coupling_entry,
                    node_name(node) + ": " + name + "(" + std::to_string(i) + "," + std::to_string(j) + ") < 0");
      }
    }
  }
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = i + 1; j < m.cols(); ++j) {
      if (m(i, j) != m(j, i)) {
        throw Error(ErrorCode::asymmetric_coupling,
                    node_name(node) + ": " + name + "(" + std::to_string(i) + "," + std::to_string(j) + ") != " +
                        name + "(" + std::to_string(j) + "," + std::to_string(i) + ")");
      }
    }
  }
}

}  // namespace detail

/// Ratios a_i / b_i. `tolerance` is the allowed spread max - min; 0 means exact.
inline RatioReport ratio_report(const std::vector<ArcSpec>& arcs, double tolerance = 0.0) {
  RatioReport r;
  r.ratios.reserve(arcs.size());
  for (const auto& a : arcs) r.ratios.push_back(a.production / a.degradation);
  if (r.ratios.empty()) return r;
  const auto [lo, hi] = std::minmax_element(r.ratios.begin(), r.ratios.end());
  r.uniform = (*hi - *lo) <= tolerance;
  r.q = r.uniform ? r.ratios.front() : 0.0;
  return r;
}

inline ValidatedNetwork validate_network(const NetworkSpec& spec, double ratio_tolerance = 0.0) {
  if (spec.arcs.empty()) throw Error(ErrorCode::bad_parameter, "network has no arcs");

  ValidatedNetwork net;
  net.arcs_ = spec.arcs;

  std::set<int> ids;
  for (const auto& a : spec.arcs) {
    if (!ids.insert(a.id).second) {
      throw Error(ErrorCode::bad_parameter, "duplicate arc id " + std::to_string(a.id));
    }
    if (a.tail == a.head) throw Error(ErrorCode::bad_parameter, detail::arc_name(a) + ": tail equals head");
    detail::require_positive(a, a.length, "length");
    detail::require_positive(a, a.lambda, "lambda");
    detail::require_positive(a, a.beta, "beta");
    detail::require_positive(a, a.diffusion, "diffusion");
    detail::require_positive(a, a.degradation, "degradation");
    if (!(a.production >= 0.0) || !std::isfinite(a.production)) {
      throw Error(ErrorCode::bad_parameter, detail::arc_name(a) + ": production must be non-negative and finite");
    }
  }

  for (ArcIndex i = 0; i < spec.arcs.size(); ++i) {
    net.incidence_[spec.arcs[i].tail].push_back(i);
    net.incidence_[spec.arcs[i].head].push_back(i);
  }
  for (const auto& [node, arcs] : net.incidence_) net.nodes_.push_back(node);

  // Connectivity over the undirected graph.
  {
    std::set<NodeId> seen{net.nodes_.front()};
    std::queue<NodeId> todo;
    todo.push(net.nodes_.front());
    while (!todo.empty()) {
      const NodeId n = todo.front();
      todo.pop();
      for (ArcIndex i : net.incidence_[n]) {
        const NodeId o = net.opposite(i, n);
        if (seen.insert(o).second) todo.push(o);
      }
    }
    if (seen.size() != net.nodes_.size()) {
      for (NodeId n : net.nodes_) {
        if (!seen.count(n)) {
          throw Error(ErrorCode::disconnected_graph, detail::node_name(n) + " is not reachable from " +
                                                         detail::node_name(net.nodes_.front()));
        }
      }
    }
  }

  std::map<NodeId, const NodeCoupling*> couplings;
  for (const auto& c : spec.inner_nodes) {
    if (!net.incidence_.count(c.node)) {
      throw Error(ErrorCode::bad_parameter, "coupling given for unknown " + detail::node_name(c.node));
    }
    if (net.incidence_[c.node].size() < 2) {
      throw Error(ErrorCode::bad_parameter, "coupling given for outer " + detail::node_name(c.node));
    }
    if (!couplings.emplace(c.node, &c).second) {
      throw Error(ErrorCode::bad_parameter, "duplicate coupling block for " + detail::node_name(c.node));
    }
  }

  for (NodeId n : net.nodes_) {
    const auto& inc = net.incidence_[n];
    if (inc.size() == 1) {
      const ArcIndex i = inc.front();
      net.outer_.push_back({n, i, spec.arcs[i].tail == n ? End::tail : End::head});
      continue;
    }
    auto it = couplings.find(n);
    if (it == couplings.end()) {
      throw Error(ErrorCode::missing_coupling, "inner " + detail::node_name(n) + " has no coupling block");
    }
    const NodeCoupling& c = *it->second;

    NodeStar star;
    star.node = n;
    if (c.arcs.empty()) {
      star.arcs = inc;
      std::sort(star.arcs.begin(), star.arcs.end(),
                [&](ArcIndex x, ArcIndex y) { return spec.arcs[x].id < spec.arcs[y].id; });
    } else {
      for (int id : c.arcs) {
        const ArcIndex i = net.arc_index(id);
        if (std::find(inc.begin(), inc.end(), i) == inc.end()) {
          throw Error(ErrorCode::bad_parameter,
                      detail::node_name(n) + ": coupling lists arc " + std::to_string(id) + " which is not incident");
        }
        star.arcs.push_back(i);
      }
      std::vector<ArcIndex> sorted = star.arcs;
      std::sort(sorted.begin(), sorted.end());
      if (sorted.size() != inc.size() || std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end()) {
        throw Error(ErrorCode::bad_parameter, detail::node_name(n) + ": coupling arc list must name every incident arc once");
      }
    }
    for (ArcIndex i : star.arcs) star.sign.push_back(spec.arcs[i].head == n ? +1 : -1);

    detail::check_coupling_matrix(c.alpha, "alpha", n, star.size());
    detail::check_coupling_matrix(c.kappa, "kappa", n, star.size());
    if (!detail::is_dissipative(c.kappa)) {
      throw Error(ErrorCode::dissipativity_violation,
                  detail::node_name(n) + ": no arc k with kappa(i,k) != 0 for all i != k");
    }
    star.alpha = c.alpha;
    star.kappa = c.kappa;
    net.inner_lookup_[n] = net.inner_.size();
    net.inner_.push_back(std::move(star));
  }

  net.ratios_ = ratio_report(net.arcs_, ratio_tolerance);
  return net;
}

/// True iff the undirected graph is a tree (parallel arcs count as a cycle).
inline bool is_acyclic(const ValidatedNetwork& net) {
  return net.arc_count() + 1 == net.nodes().size();
}

/// Inner nodes reachable from `node` without traversing arc `arc`, excluding
/// `node` itself.
inline std::set<NodeId> reachable_node_set(const ValidatedNetwork& net, ArcIndex arc, NodeId node) {
  if (arc >= net.arc_count()) throw Error(ErrorCode::bad_parameter, "arc index out of range");
  if (net.arc(arc).tail != node && net.arc(arc).head != node) {
    throw Error(ErrorCode::node_not_on_arc, "node " + std::to_string(node) + " is not an endpoint of arc " +
                                                std::to_string(net.arc(arc).id));
  }
  std::set<NodeId> seen{node};
  std::queue<NodeId> todo;
  todo.push(node);
  while (!todo.empty()) {
    const NodeId n = todo.front();
    todo.pop();
    for (ArcIndex i : net.incident(n)) {
      if (i == arc) continue;
      const NodeId o = net.opposite(i, n);
      if (seen.insert(o).second) todo.push(o);
    }
  }
  std::set<NodeId> q;
  for (NodeId n : seen) {
    if (n != node && net.is_inner(n)) q.insert(n);
  }
  return q;
}

/// Arcs incident with any node of q or with `node`, excluding `arc`.
inline std::set<ArcIndex> incident_arc_set(const ValidatedNetwork& net, const std::set<NodeId>& q, ArcIndex arc,
                                           NodeId node) {
  std::set<ArcIndex> s;
  auto add = [&](NodeId n) {
    for (ArcIndex i : net.incident(n)) {
      if (i != arc) s.insert(i);
    }
  };
  for (NodeId n : q) add(n);
  add(node);
  return s;
}

/// Unique chain of arcs from the root to one arc of a tree.
/// `arcs.front()` is the root and `arcs.back()` the target; `junctions[s]` is
/// the node shared by `arcs[s]` and `arcs[s + 1]`.
struct ArcPath {
  std::vector<ArcIndex> arcs;
  std::vector<NodeId> junctions;
};

struct Traversal {
  ArcIndex root = 0;
  /// Breadth-first arc order starting at the root.
  std::vector<ArcIndex> order;
  /// Indexed by arc.
  std::vector<ArcPath> paths;
};

inline Traversal spanning_enumeration(const ValidatedNetwork& net, ArcIndex root) {
  if (!is_acyclic(net)) throw Error(ErrorCode::cyclic_graph, "network contains a cycle");
  if (root >= net.arc_count()) throw Error(ErrorCode::bad_parameter, "root arc index out of range");

  Traversal t;
  t.root = root;
  t.paths.resize(net.arc_count());
  std::vector<bool> visited(net.arc_count(), false);
  visited[root] = true;
  t.paths[root].arcs = {root};

  std::queue<ArcIndex> todo;
  todo.push(root);
  while (!todo.empty()) {
    const ArcIndex a = todo.front();
    todo.pop();
    t.order.push_back(a);
    for (End e : {End::tail, End::head}) {
      const NodeId n = net.endpoint(a, e);
      for (ArcIndex b : net.incident(n)) {
        if (visited[b]) continue;
        visited[b] = true;
        t.paths[b] = t.paths[a];
        t.paths[b].arcs.push_back(b);
        t.paths[b].junctions.push_back(n);
        todo.push(b);
      }
    }
  }
  return t;
}

}  // namespace netchemo
