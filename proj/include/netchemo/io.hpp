/**
 * @file io.hpp
 * @brief Result files: per-arc CSV dumps, JSON manifests and reports, written
 *        through a staging directory so a failed run leaves nothing behind.
 */
#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <system_error>
#include <vector>

#include <json.hpp>

#include "netchemo/diagnostics.hpp"
#include "netchemo/error.hpp"
#include "netchemo/grid.hpp"
#include "netchemo/network.hpp"
#include "netchemo/stationary.hpp"

namespace netchemo {

namespace fs = std::filesystem;
using nlohmann::json;

/// Shortest round-trip representation is not needed; %.17g is exact and stable.
inline std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

/// Files are written below a hidden sibling of the target directory and moved
/// into place by commit(). Dropping an uncommitted stage deletes it.
class StagedOutput {
 public:
  explicit StagedOutput(fs::path target) : target_(std::move(target)) {
    const fs::path parent = target_.has_parent_path() ? target_.parent_path() : fs::path(".");
    fs::create_directories(parent);
    const std::string base = "." + target_.filename().string() + ".staging";
    for (int k = 0;; ++k) {
      stage_ = parent / (base + std::to_string(k));
      std::error_code ec;
      if (fs::create_directory(stage_, ec)) break;
      if (ec) throw Error(ErrorCode::bad_parameter, "cannot create " + stage_.string() + ": " + ec.message());
    }
  }
  StagedOutput(const StagedOutput&) = delete;
  StagedOutput& operator=(const StagedOutput&) = delete;
  ~StagedOutput() {
    std::error_code ec;
    fs::remove_all(stage_, ec);
  }

  void write(const std::string& relative, const std::string& content) {
    const fs::path p = stage_ / relative;
    fs::create_directories(p.parent_path());
    std::ofstream out(p, std::ios::binary);
    out << content;
    if (!out) throw Error(ErrorCode::bad_parameter, "cannot write " + p.string());
    files_.push_back(relative);
  }

  void write_json(const std::string& relative, const json& j) { write(relative, j.dump(2) + "\n"); }

  /// Moves every staged file to its final place (one rename per file).
  void commit() {
    for (const auto& rel : files_) {
      const fs::path dst = target_ / rel;
      fs::create_directories(dst.parent_path());
      fs::rename(stage_ / rel, dst);
    }
    files_.clear();
  }

  const fs::path& target() const { return target_; }

 private:
  fs::path target_;
  fs::path stage_;
  std::vector<std::string> files_;
};

// ---------------------------------------------------------------------------

inline std::string field_csv(const ArcField& f) {
  std::string s = "x,value\n";
  for (std::size_t k = 0; k < f.values.size(); ++k) {
    s += format_double(f.x(k));
    s += ',';
    s += format_double(f.values[k]);
    s += '\n';
  }
  return s;
}

inline json norms_json(const NormTable& n) {
  json j{{"L1", n.l1}, {"L2", n.l2}, {"Linf", n.linf}, {"H1", n.h1}};
  if (n.h2) j["H2"] = *n.h2;
  if (n.w21) j["W21"] = *n.w21;
  return j;
}

inline json grid_json(const ValidatedNetwork& net, const Grid& grid) {
  json arcs = json::array();
  for (ArcIndex i = 0; i < net.arc_count(); ++i) {
    const auto& a = net.arc(i);
    arcs.push_back({{"id", a.id}, {"tail", a.tail}, {"head", a.head}, {"L", a.length}, {"cells", grid.cells[i]},
                    {"dx", grid.dx(i)}});
  }
  return {{"arcs", arcs}, {"total_length", grid.total_length()}};
}

/// Writes `<dir>/<name>_arc<id>.csv` for every arc; returns the manifest entry.
inline json dump_field(StagedOutput& out, const std::string& dir, const std::string& name, const NetworkField& f,
                       const ValidatedNetwork& net) {
  json files = json::array();
  for (ArcIndex i = 0; i < f.arc_count(); ++i) {
    const std::string rel = (dir.empty() ? "" : dir + "/") + name + "_arc" + std::to_string(net.arc(i).id) + ".csv";
    out.write(rel, field_csv(f[i]));
    files.push_back({{"arc", net.arc(i).id}, {"file", rel}});
  }
  return {{"name", name},
          {"centering", f.centering() == Centering::cell ? "cell" : "vertex"},
          {"files", files},
          {"norms", norms_json(discrete_norms(f))}};
}

inline json report_json(const VerificationReport& r) {
  json checks = json::array();
  for (const auto& c : r.checks) {
    checks.push_back({{"name", c.name},
                      {"value", c.value},
                      {"bound", c.bound},
                      {"passed", c.passed},
                      {"informational", c.informational}});
  }
  return {{"passed", r.passed()}, {"checks", checks}};
}

inline json diagnostics_json(const DiagnosticsRecord& d) {
  json rows = json::array();
  for (std::size_t k = 0; k < d.size(); ++k) {
    const auto& t = d.ft_terms[k];
    json row{{"t", d.times[k]},
             {"mass", d.mass[k]},
             {"node_flux_residual", d.node_flux_residual[k]},
             {"u_sup", d.u_sup[k]},
             {"v_sup", d.v_sup[k]},
             {"phi_sup", d.phi_sup[k]},
             {"phix_sup", d.phix_sup[k]},
             {"F_T", d.ft[k]},
             {"F_T_terms",
              {{"sup_u", t.sup_u},
               {"sup_v", t.sup_v},
               {"sup_phix", t.sup_phix},
               {"int_ux", t.int_ux},
               {"int_v", t.int_v},
               {"int_vt", t.int_vt},
               {"int_phix", t.int_phix},
               {"int_phixt", t.int_phixt}}}};
    if (k < d.distances.size()) {
      const auto& dist = d.distances[k];
      row["distance"] = {{"u", dist.u}, {"v", dist.v}, {"phi_C1", dist.phi}};
    }
    rows.push_back(std::move(row));
  }
  const ConservationReport c = conservation_report(d);
  return {{"rows", rows},
          {"max_mass_residual", c.max_mass_residual()},
          {"max_node_flux_residual", c.max_node_flux_residual()}};
}

inline std::string diagnostics_csv(const DiagnosticsRecord& d) {
  std::string s = "t,mass,node_flux_residual,u_sup,v_sup,phi_sup,phix_sup,F_T\n";
  for (std::size_t k = 0; k < d.size(); ++k) {
    for (double v : {d.times[k], d.mass[k], d.node_flux_residual[k], d.u_sup[k], d.v_sup[k], d.phi_sup[k],
                     d.phix_sup[k], d.ft[k]}) {
      s += format_double(v);
      s += ',';
    }
    s.back() = '\n';
  }
  return s;
}

}  // namespace netchemo
