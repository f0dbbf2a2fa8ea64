#pragma once

#include <string>
#include <utility>
#include <vector>

#include "mcef/ce_optimal.hpp"
#include "mcef/design_model.hpp"
#include "mcef/monotoniser.hpp"
#include "mcef/numerics.hpp"
#include "mcef/type1_audit.hpp"

namespace mcef {

struct ParsedConfig {
  DesignSpec spec;
  Tolerance tol;
};

/// Reads a design configuration: `key = value` lines, `#` comments, and an
/// optional `[tolerances]` section (abs_tol, rel_tol, max_iter). Required
/// keys: alpha, alpha0, alpha1, beta_c, n1, delta_a, delta_min; optional:
/// estimate_rule (fixed | truncated-observed, default truncated-observed).
/// Unknown, duplicate, malformed, or missing keys raise ValidationError with
/// the offending line number; an unreadable file raises IoError.
ParsedConfig parse_config(const std::string& path);
ParsedConfig parse_config_text(const std::string& text,
                               const std::string& origin = "<config>");

std::vector<double> default_type1_deltas();
std::vector<double> default_ess_effects(const DesignSpec& spec);

struct RunOptions {
  std::vector<double> type1_deltas = default_type1_deltas();
  bool skip_type1 = false;
  std::vector<double> ess_effects;  // empty -> default_ess_effects(spec)
  Tolerance tol;
};

struct DesignReport {
  DesignSpec spec;
  ContinuationRegion region;
  std::vector<DecreasingInterval> decreasing_intervals;
  std::vector<Plateau> plateaus;
  double c_alpha = 0.0;
  double achieved_level = 0.0;
  int calibration_iterations = 0;
  double objective_monotone = 0.0;
  double objective_unconstrained = 0.0;
  std::vector<std::pair<double, double>> ess_at_effects;  // (effect, ess)
  std::vector<Type1Row> type1_table;
  std::string tool_version;
  std::string timestamp;  // ISO 8601 UTC
};

/// Full design computation: flattening, calibration, objectives, expected
/// sample sizes, and the type-one scan, plus the calibrated functions for
/// further evaluation.
struct DesignRun {
  DesignReport report;
  MonotoneQ mono_q;
  CEFunction monotone_ce;
  CEFunction unconstrained_ce;
};

DesignRun run_design(const DesignSpec& spec, const RunOptions& options = {});

/// JSON serialization of a report (two-space indent, key order fixed, the
/// timestamp on a line of its own so reports are comparable after dropping
/// it). parse_report accepts exactly what emit_report produces and
/// round-trips every field bit-for-bit.
std::string emit_report(const DesignReport& report);
DesignReport parse_report(const std::string& text);
void write_report(const DesignReport& report, const std::string& path);

/// CSV table of the design curves on the grid z_lo, z_lo + step, ... within
/// the continuation region. Columns:
///   z1, Q, Q_tilde, alpha2_unconstrained, alpha2_monotone, n2
void write_curves(const DesignRun& run, double grid_step,
                  const std::string& path);
std::string emit_curves(const DesignRun& run, double grid_step);

}  // namespace mcef
