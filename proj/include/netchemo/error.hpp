#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace netchemo {

enum class ErrorCode {
  bad_parameter,
  asymmetric_coupling,
  negative_coupling_entry,
  dissipativity_violation,
  disconnected_graph,
  missing_coupling,
  node_not_on_arc,
  cyclic_graph,
  resolution_too_coarse,
  insufficient_samples,
  shape_mismatch,
  singular_system,
  negative_phi,
  no_convergence,
  uniform_ratio_required,
  singular_node_system,
  cfl_violation,
  numerical_blowup,
  insufficient_cadence,
  parse_error,
  schema_error,
  file_not_found,
};

inline constexpr std::string_view to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::bad_parameter: return "BadParameter";
    case ErrorCode::asymmetric_coupling: return "AsymmetricCoupling";
    case ErrorCode::negative_coupling_entry: return "NegativeCouplingEntry";
    case ErrorCode::dissipativity_violation: return "DissipativityViolation";
    case ErrorCode::disconnected_graph: return "DisconnectedGraph";
    case ErrorCode::missing_coupling: return "MissingCoupling";
    case ErrorCode::node_not_on_arc: return "NodeNotOnArc";
    case ErrorCode::cyclic_graph: return "CyclicGraph";
    case ErrorCode::resolution_too_coarse: return "ResolutionTooCoarse";
    case ErrorCode::insufficient_samples: return "InsufficientSamples";
    case ErrorCode::shape_mismatch: return "ShapeMismatch";
    case ErrorCode::singular_system: return "SingularSystem";
    case ErrorCode::negative_phi: return "NegativePhi";
    case ErrorCode::no_convergence: return "NoConvergence";
    case ErrorCode::uniform_ratio_required: return "UniformRatioRequired";
    case ErrorCode::singular_node_system: return "SingularNodeSystem";
    case ErrorCode::cfl_violation: return "CFLViolation";
    case ErrorCode::numerical_blowup: return "NumericalBlowup";
    case ErrorCode::insufficient_cadence: return "InsufficientCadence";
    case ErrorCode::parse_error: return "ParseError";
    case ErrorCode::schema_error: return "SchemaError";
    case ErrorCode::file_not_found: return "FileNotFound";
  }
  return "Unknown";
}

/// Every failure raised by the library carries a machine-readable code; the
/// message always starts with the code name so CLI output stays greppable.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& detail)
      : std::runtime_error(std::string(to_string(code)) + ": " + detail), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace netchemo
