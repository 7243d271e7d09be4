/**
 * @file config.hpp
 * @brief JSON run configuration: network, grid and the stationary/evolution
 *        sections.
 *
 * Layout (see configs/ for complete files):
 *
 *   {
 *     "mode": "stationary" | "evolve" | "verify",          (optional)
 *     "network": {
 *       "arcs": [{"id", "tail", "head", "L", "lambda", "beta", "D", "a", "b"}],
 *       "inner_nodes": [{"node", "arcs" (optional), "alpha": [[..]], "kappa": [[..]]}]
 *     },
 *     "grid": {"dx": h} | {"cells": n} | {"cells": [n_1, ..]},
 *     "stationary": {"mass", "tol", "max_iter", "root_arc"},
 *     "evolution": {
 *       "initial_data": {"u": F, "v": F | "compatible", "phi": F},
 *       "cfl", "t_end", "output_every", "dt_max", "blowup_guard", "diagnostics_every"
 *     },
 *     "output": "directory"
 *   }
 *
 * A field F is a number, an expression in x and L, or an object keyed by arc
 * id whose values are numbers, expressions or sample arrays (n_i values for
 * u and v, n_i + 1 for phi).
 *
 * Errors carry the JSON pointer of the offending key and its line.
 */
#pragma once

#include <cstddef>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "netchemo/error.hpp"
#include "netchemo/evolution.hpp"
#include "netchemo/expression.hpp"
#include "netchemo/grid.hpp"
#include "netchemo/network.hpp"
#include "netchemo/stationary.hpp"

namespace netchemo {

enum class Mode { stationary, evolve, verify };

inline std::optional<Mode> parse_mode(const std::string& s) {
  if (s == "stationary") return Mode::stationary;
  if (s == "evolve") return Mode::evolve;
  if (s == "verify") return Mode::verify;
  return std::nullopt;
}

inline const char* to_string(Mode m) {
  switch (m) {
    case Mode::stationary: return "stationary";
    case Mode::evolve: return "evolve";
    case Mode::verify: return "verify";
  }
  return "?";
}

/// Source of one initial field on one arc: an expression or raw samples.
struct ArcSource {
  std::optional<Expression> expr;
  std::vector<double> samples;
};

struct FieldSource {
  /// Only for v: take the linear profile that satisfies the node conditions.
  bool compatible = false;
  std::vector<ArcSource> arcs;

  bool analytic() const {
    for (const auto& a : arcs)
      if (!a.expr) return false;
    return true;
  }
};

struct StationarySection {
  double mass = 0.0;
  double tol = 1e-10;
  std::size_t max_iter = 200;
  ArcIndex root_arc = 0;
};

struct EvolutionSection {
  FieldSource u, v, phi;
  EvolutionConfig config;
};

struct RunConfig {
  std::optional<Mode> mode;
  NetworkSpec spec;
  ValidatedNetwork net;
  Grid grid;
  std::optional<StationarySection> stationary;
  std::optional<EvolutionSection> evolution;
  std::string output = "out";
  std::string source;
};

namespace detail {

/// JSON pointer -> line of the value it designates.
class LineIndex {
 public:
  explicit LineIndex(const std::string& text) : s_(text) {
    skip();
    value("");
  }
  int line(const std::string& pointer) const {
    std::string p = pointer;
    for (;;) {
      auto it = lines_.find(p);
      if (it != lines_.end()) return it->second;
      const auto cut = p.rfind('/');
      if (cut == std::string::npos) return 1;
      p = p.substr(0, cut);
    }
  }

 private:
  void skip() {
    while (pos_ < s_.size() && std::isspace(static_cast<unsigned char>(s_[pos_]))) {
      if (s_[pos_] == '\n') ++line_;
      ++pos_;
    }
  }
  std::string string() {
    std::string out;
    ++pos_;
    while (pos_ < s_.size() && s_[pos_] != '"') {
      if (s_[pos_] == '\\') ++pos_;
      out += s_[pos_++];
    }
    ++pos_;
    return out;
  }
  static std::string escape(const std::string& key) {
    std::string r;
    for (char c : key) {
      if (c == '~') r += "~0";
      else if (c == '/') r += "~1";
      else r += c;
    }
    return r;
  }
  void value(const std::string& path) {
    lines_[path] = line_;
    if (pos_ >= s_.size()) return;
    const char c = s_[pos_];
    if (c == '{') {
      ++pos_;
      skip();
      while (pos_ < s_.size() && s_[pos_] != '}') {
        const std::string key = string();
        skip();
        ++pos_;  // ':'
        skip();
        value(path + "/" + escape(key));
        skip();
        if (s_[pos_] == ',') {
          ++pos_;
          skip();
        }
      }
      ++pos_;
    } else if (c == '[') {
      ++pos_;
      skip();
      std::size_t k = 0;
      while (pos_ < s_.size() && s_[pos_] != ']') {
        value(path + "/" + std::to_string(k++));
        skip();
        if (s_[pos_] == ',') {
          ++pos_;
          skip();
        }
      }
      ++pos_;
    } else if (c == '"') {
      string();
    } else {
      while (pos_ < s_.size() && s_[pos_] != ',' && s_[pos_] != ']' && s_[pos_] != '}' &&
             !std::isspace(static_cast<unsigned char>(s_[pos_])))
        ++pos_;
    }
  }

  const std::string& s_;
  std::size_t pos_ = 0;
  int line_ = 1;
  std::map<std::string, int> lines_;
};

using nlohmann::json;

/// Walks the document and raises SchemaError with pointer and line.
class Reader {
 public:
  Reader(const json& root, const LineIndex& lines) : root_(root), lines_(lines) {}

  [[noreturn]] void fail(const std::string& pointer, const std::string& what) const {
    throw Error(ErrorCode::schema_error,
                (pointer.empty() ? std::string("/") : pointer) + " (line " + std::to_string(lines_.line(pointer)) +
                    "): " + what);
  }

  const json& object(const json& j, const std::string& p, std::initializer_list<const char*> allowed) const {
    if (!j.is_object()) fail(p, "expected an object");
    for (auto it = j.begin(); it != j.end(); ++it) {
      bool ok = false;
      for (const char* a : allowed) ok = ok || it.key() == a;
      if (!ok) fail(p + "/" + it.key(), "unknown key '" + it.key() + "'");
    }
    return j;
  }

  const json& array(const json& j, const std::string& p) const {
    if (!j.is_array()) fail(p, "expected an array");
    return j;
  }

  double number(const json& obj, const std::string& p, const char* key) const {
    if (!obj.contains(key)) fail(p, std::string("missing key '") + key + "'");
    return number(obj.at(key), p + "/" + key);
  }
  double number(const json& j, const std::string& p) const {
    if (!j.is_number()) fail(p, "expected a number");
    return j.get<double>();
  }
  double number_or(const json& obj, const std::string& p, const char* key, double fallback) const {
    return obj.contains(key) ? number(obj.at(key), p + "/" + key) : fallback;
  }

  long long integer(const json& obj, const std::string& p, const char* key) const {
    if (!obj.contains(key)) fail(p, std::string("missing key '") + key + "'");
    return integer(obj.at(key), p + "/" + key);
  }
  long long integer(const json& j, const std::string& p) const {
    if (!j.is_number_integer()) fail(p, "expected an integer");
    return j.get<long long>();
  }

  Eigen::MatrixXd matrix(const json& obj, const std::string& p, const char* key, NodeId node) const {
    if (!obj.contains(key)) fail(p, std::string("node ") + std::to_string(node) + ": missing " + key + " block");
    const std::string q = p + "/" + key;
    const json& rows = array(obj.at(key), q);
    const auto n = static_cast<Eigen::Index>(rows.size());
    Eigen::MatrixXd m(n, n);
    for (Eigen::Index r = 0; r < n; ++r) {
      const std::string qr = q + "/" + std::to_string(r);
      const json& row = array(rows[static_cast<std::size_t>(r)], qr);
      if (static_cast<Eigen::Index>(row.size()) != n) fail(qr, "matrix must be square");
      for (Eigen::Index c = 0; c < n; ++c) {
        m(r, c) = number(row[static_cast<std::size_t>(c)], qr + "/" + std::to_string(c));
      }
    }
    return m;
  }

  const json& root() const { return root_; }

 private:
  const json& root_;
  const LineIndex& lines_;
};

inline NetworkSpec read_network(const Reader& rd, const json& j) {
  const std::string p = "/network";
  rd.object(j, p, {"arcs", "inner_nodes"});
  if (!j.contains("arcs")) rd.fail(p, "missing key 'arcs'");
  const json& arcs = rd.array(j.at("arcs"), p + "/arcs");
  if (arcs.empty()) rd.fail(p + "/arcs", "at least one arc is required");

  NetworkSpec spec;
  std::map<NodeId, int> degree;
  for (std::size_t k = 0; k < arcs.size(); ++k) {
    const std::string q = p + "/arcs/" + std::to_string(k);
    const json& a = rd.object(arcs[k], q, {"id", "tail", "head", "L", "lambda", "beta", "D", "a", "b"});
    ArcSpec s;
    s.id = static_cast<int>(rd.integer(a, q, "id"));
    s.tail = static_cast<NodeId>(rd.integer(a, q, "tail"));
    s.head = static_cast<NodeId>(rd.integer(a, q, "head"));
    s.length = rd.number(a, q, "L");
    s.lambda = rd.number(a, q, "lambda");
    s.beta = rd.number(a, q, "beta");
    s.diffusion = rd.number(a, q, "D");
    s.production = rd.number(a, q, "a");
    s.degradation = rd.number(a, q, "b");
    ++degree[s.tail];
    ++degree[s.head];
    spec.arcs.push_back(s);
  }

  std::set<NodeId> given;
  if (j.contains("inner_nodes")) {
    const json& nodes = rd.array(j.at("inner_nodes"), p + "/inner_nodes");
    for (std::size_t k = 0; k < nodes.size(); ++k) {
      const std::string q = p + "/inner_nodes/" + std::to_string(k);
      const json& c = rd.object(nodes[k], q, {"node", "arcs", "alpha", "kappa"});
      NodeCoupling nc;
      nc.node = static_cast<NodeId>(rd.integer(c, q, "node"));
      if (c.contains("arcs")) {
        const json& ids = rd.array(c.at("arcs"), q + "/arcs");
        for (std::size_t r = 0; r < ids.size(); ++r) {
          nc.arcs.push_back(static_cast<int>(rd.integer(ids[r], q + "/arcs/" + std::to_string(r))));
        }
      }
      nc.alpha = rd.matrix(c, q, "alpha", nc.node);
      nc.kappa = rd.matrix(c, q, "kappa", nc.node);
      given.insert(nc.node);
      spec.inner_nodes.push_back(std::move(nc));
    }
  }
  for (const auto& [node, deg] : degree) {
    if (deg >= 2 && !given.count(node)) {
      rd.fail(p + "/inner_nodes", "node " + std::to_string(node) + ": missing coupling block (alpha, kappa)");
    }
  }
  return spec;
}

inline Grid read_grid(const Reader& rd, const json& j, const ValidatedNetwork& net) {
  const std::string p = "/grid";
  rd.object(j, p, {"dx", "cells"});
  if (j.contains("dx") == j.contains("cells")) rd.fail(p, "give exactly one of 'dx' and 'cells'");
  if (j.contains("dx")) {
    const double dx = rd.number(j, p, "dx");
    if (!(dx > 0.0)) rd.fail(p + "/dx", "dx must be positive");
    return build_grid(net, dx);
  }
  const json& c = j.at("cells");
  if (c.is_array()) {
    std::vector<std::size_t> cells;
    for (std::size_t k = 0; k < c.size(); ++k) {
      const long long n = rd.integer(c[k], p + "/cells/" + std::to_string(k));
      if (n <= 0) rd.fail(p + "/cells/" + std::to_string(k), "cell counts must be positive");
      cells.push_back(static_cast<std::size_t>(n));
    }
    return build_grid(net, cells);
  }
  const long long n = rd.integer(c, p + "/cells");
  if (n <= 0) rd.fail(p + "/cells", "cell counts must be positive");
  return build_grid_uniform(net, static_cast<std::size_t>(n));
}

inline StationarySection read_stationary(const Reader& rd, const json& j, const ValidatedNetwork& net) {
  const std::string p = "/stationary";
  rd.object(j, p, {"mass", "tol", "max_iter", "root_arc"});
  StationarySection s;
  s.mass = rd.number(j, p, "mass");
  if (!(s.mass >= 0.0)) rd.fail(p + "/mass", "mass must be non-negative");
  s.tol = rd.number_or(j, p, "tol", s.tol);
  if (!(s.tol > 0.0)) rd.fail(p + "/tol", "tol must be positive");
  if (j.contains("max_iter")) {
    const long long m = rd.integer(j, p, "max_iter");
    if (m < 1) rd.fail(p + "/max_iter", "max_iter must be at least 1");
    s.max_iter = static_cast<std::size_t>(m);
  }
  if (j.contains("root_arc")) {
    const int id = static_cast<int>(rd.integer(j, p, "root_arc"));
    try {
      s.root_arc = net.arc_index(id);
    } catch (const Error&) {
      rd.fail(p + "/root_arc", "unknown arc id " + std::to_string(id));
    }
  }
  return s;
}

inline ArcSource read_arc_source(const Reader& rd, const json& j, const std::string& p) {
  ArcSource s;
  if (j.is_number()) {
    s.expr = Expression::parse(j.dump());
  } else if (j.is_string()) {
    try {
      s.expr = Expression::parse(j.get<std::string>());
    } catch (const Error& e) {
      rd.fail(p, e.what());
    }
  } else if (j.is_array()) {
    for (std::size_t k = 0; k < j.size(); ++k) s.samples.push_back(rd.number(j[k], p + "/" + std::to_string(k)));
  } else {
    rd.fail(p, "expected a number, an expression or a sample array");
  }
  return s;
}

inline FieldSource read_field(const Reader& rd, const json& parent, const std::string& pp, const char* key,
                              const ValidatedNetwork& net, const Grid& grid, bool vertex, bool allow_compatible) {
  const std::string p = pp + "/" + key;
  if (!parent.contains(key)) rd.fail(pp, std::string("missing key '") + key + "'");
  const json& j = parent.at(key);
  FieldSource f;
  if (j.is_string() && j.get<std::string>() == "compatible") {
    if (!allow_compatible) rd.fail(p, "'compatible' is only accepted for v");
    f.compatible = true;
    return f;
  }
  if (j.is_object()) {
    f.arcs.resize(net.arc_count());
    std::vector<bool> seen(net.arc_count(), false);
    for (auto it = j.begin(); it != j.end(); ++it) {
      const std::string q = p + "/" + it.key();
      ArcIndex i = 0;
      try {
        std::size_t used = 0;
        const int id = std::stoi(it.key(), &used);
        if (used != it.key().size()) throw std::invalid_argument(it.key());
        i = net.arc_index(id);
      } catch (const std::exception&) {
        rd.fail(q, "keys must be arc ids");
      }
      f.arcs[i] = read_arc_source(rd, it.value(), q);
      seen[i] = true;
    }
    for (ArcIndex i = 0; i < net.arc_count(); ++i) {
      if (!seen[i]) rd.fail(p, "no data for arc " + std::to_string(net.arc(i).id));
    }
  } else {
    const ArcSource s = read_arc_source(rd, j, p);
    if (!s.expr) rd.fail(p, "a sample array must be given per arc");
    f.arcs.assign(net.arc_count(), s);
  }
  for (ArcIndex i = 0; i < net.arc_count(); ++i) {
    if (f.arcs[i].expr) continue;
    const std::size_t want = grid.cells[i] + (vertex ? 1 : 0);
    if (f.arcs[i].samples.size() != want) {
      rd.fail(p + "/" + std::to_string(net.arc(i).id),
              "expected " + std::to_string(want) + " samples, got " + std::to_string(f.arcs[i].samples.size()));
    }
  }
  return f;
}

inline EvolutionSection read_evolution(const Reader& rd, const json& j, const ValidatedNetwork& net,
                                       const Grid& grid) {
  const std::string p = "/evolution";
  rd.object(j, p, {"initial_data", "cfl", "t_end", "output_every", "dt_max", "blowup_guard", "diagnostics_every"});
  EvolutionSection e;
  if (!j.contains("initial_data")) rd.fail(p, "missing key 'initial_data'");
  const std::string q = p + "/initial_data";
  const json& init = rd.object(j.at("initial_data"), q, {"u", "v", "phi"});
  e.u = read_field(rd, init, q, "u", net, grid, false, false);
  e.v = read_field(rd, init, q, "v", net, grid, false, true);
  e.phi = read_field(rd, init, q, "phi", net, grid, true, false);
  if (e.v.compatible && !e.u.analytic()) rd.fail(q + "/v", "'compatible' needs u given by expressions");

  auto& c = e.config;
  c.cfl = rd.number_or(j, p, "cfl", c.cfl);
  if (!(c.cfl > 0.0 && c.cfl <= 1.0)) rd.fail(p + "/cfl", "cfl must lie in (0, 1]");
  c.t_end = rd.number(j, p, "t_end");
  if (!(c.t_end >= 0.0)) rd.fail(p + "/t_end", "t_end must be non-negative");
  c.output_every = rd.number_or(j, p, "output_every", c.output_every);
  if (!(c.output_every >= 0.0)) rd.fail(p + "/output_every", "output_every must be non-negative");
  c.dt_max = rd.number_or(j, p, "dt_max", c.dt_max);
  if (!(c.dt_max > 0.0)) rd.fail(p + "/dt_max", "dt_max must be positive");
  c.blowup_guard = rd.number_or(j, p, "blowup_guard", c.blowup_guard);
  if (!(c.blowup_guard > 0.0)) rd.fail(p + "/blowup_guard", "blowup_guard must be positive");
  if (j.contains("diagnostics_every")) {
    const long long d = rd.integer(j, p, "diagnostics_every");
    if (d < 1 || d > 10) rd.fail(p + "/diagnostics_every", "diagnostics_every must lie in [1, 10]");
    c.diagnostics_every = static_cast<std::size_t>(d);
  }
  return e;
}

/// Line and column of a byte offset.
inline std::pair<std::size_t, std::size_t> line_column(const std::string& text, std::size_t offset) {
  std::size_t line = 1, col = 1;
  for (std::size_t k = 0; k < offset && k < text.size(); ++k) {
    if (text[k] == '\n') {
      ++line;
      col = 1;
    } else {
      ++col;
    }
  }
  return {line, col};
}

}  // namespace detail

/// Parses and validates configuration text. `source` only labels messages.
inline RunConfig parse_config_text(const std::string& text, const std::string& source = "<config>") {
  using nlohmann::json;
  json root;
  try {
    root = json::parse(text);
  } catch (const json::parse_error& e) {
    const auto [line, col] = detail::line_column(text, e.byte > 0 ? e.byte - 1 : 0);
    throw Error(ErrorCode::parse_error, source + ":" + std::to_string(line) + ":" + std::to_string(col) +
                                            ": malformed JSON");
  }
  const detail::LineIndex lines(text);
  const detail::Reader rd(root, lines);
  rd.object(root, "", {"mode", "network", "grid", "stationary", "evolution", "output"});

  RunConfig cfg;
  cfg.source = source;
  if (root.contains("mode")) {
    const json& m = root.at("mode");
    if (!m.is_string() || !parse_mode(m.get<std::string>())) {
      rd.fail("/mode", "mode must be one of stationary, evolve, verify");
    }
    cfg.mode = parse_mode(m.get<std::string>());
  }
  if (!root.contains("network")) rd.fail("", "missing key 'network'");
  if (!root.contains("grid")) rd.fail("", "missing key 'grid'");
  cfg.spec = detail::read_network(rd, root.at("network"));
  cfg.net = validate_network(cfg.spec);
  cfg.grid = detail::read_grid(rd, root.at("grid"), cfg.net);
  if (root.contains("stationary")) cfg.stationary = detail::read_stationary(rd, root.at("stationary"), cfg.net);
  if (root.contains("evolution")) {
    cfg.evolution = detail::read_evolution(rd, root.at("evolution"), cfg.net, cfg.grid);
  }
  if (root.contains("output")) {
    const json& o = root.at("output");
    if (!o.is_string() || o.get<std::string>().empty()) rd.fail("/output", "output must be a non-empty string");
    cfg.output = o.get<std::string>();
  }
  return cfg;
}

inline RunConfig parse_config(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::file_not_found, path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config_text(ss.str(), path);
}

inline StationaryProblem stationary_problem(const RunConfig& cfg) {
  if (!cfg.stationary) throw Error(ErrorCode::schema_error, "/stationary: section required for this mode");
  const auto& s = *cfg.stationary;
  return {cfg.net, cfg.grid, s.mass, s.tol, s.max_iter, s.root_arc};
}

/// Samples the configured initial data and reports their compatibility.
inline InitializedState initial_state(const RunConfig& cfg) {
  if (!cfg.evolution) throw Error(ErrorCode::schema_error, "/evolution: section required for this mode");
  const auto& e = *cfg.evolution;
  const auto& net = cfg.net;

  auto profiles = [&](const FieldSource& f) {
    std::vector<Profile> out;
    for (ArcIndex i = 0; i < net.arc_count(); ++i) {
      const Expression ex = *f.arcs[i].expr;
      const double len = net.arc(i).length;
      out.push_back([ex, len](double x) { return ex(x, len); });
    }
    return out;
  };

  const bool analytic = e.u.analytic() && e.phi.analytic() && (e.v.compatible || e.v.analytic());
  if (analytic) {
    InitialData data;
    data.u = profiles(e.u);
    data.v = e.v.compatible ? compatible_velocity(net, data.u) : profiles(e.v);
    data.phi = profiles(e.phi);
    return initialize_state(data, net, cfg.grid);
  }

  auto sample = [&](const FieldSource& f, Centering c) {
    NetworkField out = NetworkField::zeros(cfg.grid, c);
    for (ArcIndex i = 0; i < net.arc_count(); ++i) {
      if (f.arcs[i].expr) {
        const double len = net.arc(i).length;
        for (std::size_t k = 0; k < out[i].values.size(); ++k) out[i].values[k] = (*f.arcs[i].expr)(out[i].x(k), len);
      } else {
        out[i].values = f.arcs[i].samples;
      }
    }
    return out;
  };
  NetworkState s;
  s.u = sample(e.u, Centering::cell);
  if (e.v.compatible) {
    const auto prof = compatible_velocity(net, profiles(e.u));
    s.v = NetworkField::sample(cfg.grid, Centering::cell, [&](ArcIndex i, double x) { return prof[i](x); });
  } else {
    s.v = sample(e.v, Centering::cell);
  }
  s.phi = sample(e.phi, Centering::vertex);
  return initialize_state(s, net, cfg.grid);
}

}  // namespace netchemo
