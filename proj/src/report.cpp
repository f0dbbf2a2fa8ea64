#include "mcef/report.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <ctime>
#include <fstream>
#include <set>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "mcef/errors.hpp"
#include "mcef/nu_psi.hpp"
#include "mcef/version.hpp"

namespace mcef {

namespace {

using ordered_json = nlohmann::ordered_json;

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

[[noreturn]] void config_error(const std::string& origin, int line,
                               const std::string& what) {
  throw ValidationError(origin + " line " + std::to_string(line) + ": " +
                        what);
}

double parse_number(const std::string& value, const std::string& origin,
                    int line) {
  const std::string v = trim(value);
  if (v.empty()) config_error(origin, line, "empty value");
  const char* begin = v.c_str();
  char* end = nullptr;
  const double parsed = std::strtod(begin, &end);
  if (end != begin + v.size()) {
    config_error(origin, line, "cannot parse number '" + v + "'");
  }
  if (!std::isfinite(parsed)) {
    config_error(origin, line, "value '" + v + "' is not finite");
  }
  return parsed;
}

int parse_int(const std::string& value, const std::string& origin, int line) {
  const double parsed = parse_number(value, origin, line);
  const double rounded = std::nearbyint(parsed);
  if (parsed != rounded || std::abs(parsed) > 1e9) {
    config_error(origin, line, "expected an integer, got '" + trim(value) +
                                   "'");
  }
  return static_cast<int>(rounded);
}

std::string format_double(double v) {
  char buf[48];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string iso_utc_now() {
  const std::time_t now = std::time(nullptr);
  std::tm parts{};
  gmtime_r(&now, &parts);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &parts);
  return buf;
}

void require_keys(const ordered_json& obj,
                  const std::vector<std::string>& keys,
                  const std::string& where) {
  if (!obj.is_object()) {
    throw ValidationError("report: '" + where + "' must be an object");
  }
  for (const auto& key : keys) {
    if (!obj.contains(key)) {
      throw ValidationError("report: '" + where + "' is missing key '" + key +
                            "'");
    }
  }
  if (obj.size() != keys.size()) {
    for (const auto& item : obj.items()) {
      if (std::find(keys.begin(), keys.end(), item.key()) == keys.end()) {
        throw ValidationError("report: '" + where + "' has unexpected key '" +
                              item.key() + "'");
      }
    }
  }
}

double get_number(const ordered_json& obj, const std::string& key,
                  const std::string& where) {
  const auto& v = obj.at(key);
  if (!v.is_number()) {
    throw ValidationError("report: '" + where + "." + key +
                          "' must be a number");
  }
  return v.get<double>();
}

int get_int(const ordered_json& obj, const std::string& key,
            const std::string& where) {
  const auto& v = obj.at(key);
  if (!v.is_number_integer()) {
    throw ValidationError("report: '" + where + "." + key +
                          "' must be an integer");
  }
  return v.get<int>();
}

std::string get_string(const ordered_json& obj, const std::string& key,
                       const std::string& where) {
  const auto& v = obj.at(key);
  if (!v.is_string()) {
    throw ValidationError("report: '" + where + "." + key +
                          "' must be a string");
  }
  return v.get<std::string>();
}

}  // namespace

ParsedConfig parse_config_text(const std::string& text,
                               const std::string& origin) {
  ParsedConfig out;
  enum class Scope { design, tolerances } scope = Scope::design;
  const std::set<std::string> design_keys = {
      "alpha",   "alpha0",    "alpha1",       "beta_c",
      "n1",      "delta_a",   "delta_min",    "estimate_rule"};
  const std::set<std::string> tol_keys = {"abs_tol", "rel_tol", "max_iter"};
  std::set<std::string> seen_design;
  std::set<std::string> seen_tol;

  std::istringstream stream(text);
  std::string raw;
  int line_no = 0;
  while (std::getline(stream, raw)) {
    ++line_no;
    const auto hash = raw.find('#');
    if (hash != std::string::npos) raw.erase(hash);
    const std::string line = trim(raw);
    if (line.empty()) continue;

    if (line.front() == '[') {
      if (line.back() != ']') {
        config_error(origin, line_no, "unterminated section header");
      }
      const std::string section = trim(line.substr(1, line.size() - 2));
      if (section != "tolerances") {
        config_error(origin, line_no, "unknown section [" + section + "]");
      }
      scope = Scope::tolerances;
      continue;
    }

    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      config_error(origin, line_no, "expected 'key = value'");
    }
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty()) config_error(origin, line_no, "empty key");
    if (value.empty()) {
      config_error(origin, line_no, "empty value for key '" + key + "'");
    }

    if (scope == Scope::design) {
      if (!design_keys.count(key)) {
        config_error(origin, line_no, "unknown key '" + key + "'");
      }
      if (!seen_design.insert(key).second) {
        config_error(origin, line_no, "duplicate key '" + key + "'");
      }
      if (key == "alpha") {
        out.spec.alpha = parse_number(value, origin, line_no);
      } else if (key == "alpha0") {
        out.spec.alpha0 = parse_number(value, origin, line_no);
      } else if (key == "alpha1") {
        out.spec.alpha1 = parse_number(value, origin, line_no);
      } else if (key == "beta_c") {
        out.spec.beta_c = parse_number(value, origin, line_no);
      } else if (key == "n1") {
        out.spec.n1 = parse_number(value, origin, line_no);
      } else if (key == "delta_a") {
        out.spec.delta_a = parse_number(value, origin, line_no);
      } else if (key == "delta_min") {
        out.spec.delta_min = parse_number(value, origin, line_no);
      } else {
        try {
          out.spec.estimate_rule = estimate_rule_from_string(value);
        } catch (const ValidationError& e) {
          config_error(origin, line_no, e.what());
        }
      }
    } else {
      if (!tol_keys.count(key)) {
        config_error(origin, line_no,
                     "unknown key '" + key + "' in [tolerances]");
      }
      if (!seen_tol.insert(key).second) {
        config_error(origin, line_no,
                     "duplicate key '" + key + "' in [tolerances]");
      }
      if (key == "abs_tol") {
        out.tol.abs_tol = parse_number(value, origin, line_no);
      } else if (key == "rel_tol") {
        out.tol.rel_tol = parse_number(value, origin, line_no);
      } else {
        out.tol.max_iter = parse_int(value, origin, line_no);
      }
    }
  }

  std::string missing;
  for (const auto& key : design_keys) {
    if (key != "estimate_rule" && !seen_design.count(key)) {
      missing += missing.empty() ? key : ", " + key;
    }
  }
  if (!missing.empty()) {
    throw ValidationError(origin + ": missing required keys: " + missing);
  }

  try {
    out.spec.validate();
    out.tol.validate();
  } catch (const ValidationError& e) {
    throw ValidationError(origin + ": " + e.what());
  }
  return out;
}

ParsedConfig parse_config(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read config file: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  if (in.bad()) throw IoError("error while reading config file: " + path);
  return parse_config_text(buf.str(), path);
}

std::vector<double> default_type1_deltas() {
  return {-1.0, -0.5, -0.2, -0.1, -0.05, 0.0};
}

std::vector<double> default_ess_effects(const DesignSpec& spec) {
  std::vector<double> effects = {0.0, spec.delta_min, spec.delta_a};
  std::vector<double> unique;
  for (double e : effects) {
    const bool dup = std::any_of(unique.begin(), unique.end(), [&](double u) {
      return std::abs(u - e) <= 1e-12;
    });
    if (!dup) unique.push_back(e);
  }
  return unique;
}

DesignRun run_design(const DesignSpec& spec, const RunOptions& options) {
  spec.validate();
  options.tol.validate();
  const Tolerance& tol = options.tol;
  const ContinuationRegion region = continuation_region(spec);

  MonotoneQ mono = monotonise(spec, region, tol);
  const Curve mono_curve = mono.as_curve();
  const CalibrationResult cal = calibrate(mono_curve, spec, tol);
  CEFunction mono_ce{mono_curve, cal.c_alpha, make_psi_context(spec.beta_c),
                     region};
  CEFunction unconstrained = unconstrained_ce(spec, tol);

  DesignReport report;
  report.spec = spec;
  report.region = region;
  report.decreasing_intervals = find_decreasing_intervals(spec, region);
  report.plateaus = mono.plateaus();
  report.c_alpha = cal.c_alpha;
  report.achieved_level = cal.achieved_level;
  report.calibration_iterations = cal.iterations;
  report.objective_monotone = objective(mono_ce, spec, tol);
  report.objective_unconstrained = objective(unconstrained, spec, tol);
  if (!(report.objective_unconstrained <=
        report.objective_monotone + 1e-9)) {
    throw NumericalError(
        "run_design: dropping the monotonicity constraint must not worsen "
        "the objective (unconstrained " +
        format_double(report.objective_unconstrained) + " vs monotone " +
        format_double(report.objective_monotone) + ")");
  }

  const std::vector<double> effects = options.ess_effects.empty()
                                          ? default_ess_effects(spec)
                                          : options.ess_effects;
  report.ess_at_effects.reserve(effects.size());
  for (double effect : effects) {
    report.ess_at_effects.emplace_back(
        effect, expected_sample_size(mono_ce, spec, effect, tol));
  }
  if (!options.skip_type1) {
    report.type1_table = type1_scan(mono_ce, spec, options.type1_deltas, tol);
  }
  report.tool_version = kVersion;
  report.timestamp = iso_utc_now();

  return DesignRun{std::move(report), std::move(mono), std::move(mono_ce),
                   std::move(unconstrained)};
}

std::string emit_report(const DesignReport& report) {
  ordered_json j;
  j["tool"] = "mcef";
  j["version"] = report.tool_version;
  j["generated_at"] = report.timestamp;

  ordered_json design;
  design["alpha"] = report.spec.alpha;
  design["alpha0"] = report.spec.alpha0;
  design["alpha1"] = report.spec.alpha1;
  design["beta_c"] = report.spec.beta_c;
  design["n1"] = report.spec.n1;
  design["delta_a"] = report.spec.delta_a;
  design["delta_min"] = report.spec.delta_min;
  design["estimate_rule"] = to_string(report.spec.estimate_rule);
  j["design"] = design;

  ordered_json region;
  region["z_lo"] = report.region.z_lo;
  region["z_hi"] = report.region.z_hi;
  j["continuation_region"] = region;

  ordered_json intervals = ordered_json::array();
  for (const auto& d : report.decreasing_intervals) {
    ordered_json item;
    item["lower"] = d.d_l;
    item["upper"] = d.d_u;
    intervals.push_back(item);
  }
  j["decreasing_intervals"] = intervals;

  ordered_json plateaus = ordered_json::array();
  for (const auto& p : report.plateaus) {
    ordered_json item;
    item["lower"] = p.lo;
    item["upper"] = p.hi;
    item["level"] = p.level;
    plateaus.push_back(item);
  }
  j["plateaus"] = plateaus;

  ordered_json calibration;
  calibration["c_alpha"] = report.c_alpha;
  calibration["achieved_level"] = report.achieved_level;
  calibration["target_level"] = report.spec.alpha - report.spec.alpha1;
  calibration["iterations"] = report.calibration_iterations;
  j["calibration"] = calibration;

  ordered_json objectives;
  objectives["monotone"] = report.objective_monotone;
  objectives["unconstrained"] = report.objective_unconstrained;
  j["objectives"] = objectives;

  ordered_json ess = ordered_json::array();
  for (const auto& [effect, value] : report.ess_at_effects) {
    ordered_json item;
    item["effect"] = effect;
    item["ess"] = value;
    ess.push_back(item);
  }
  j["expected_sample_size"] = ess;

  ordered_json type1 = ordered_json::array();
  for (const auto& row : report.type1_table) {
    ordered_json item;
    item["delta"] = row.delta;
    item["first_stage_reject"] = row.first_stage_reject;
    item["second_stage_mass"] = row.second_stage_mass;
    item["exact_total"] = row.exact_total;
    item["bound_total"] = row.bound_total;
    type1.push_back(item);
  }
  j["type1"] = type1;

  return j.dump(2) + "\n";
}

DesignReport parse_report(const std::string& text) {
  ordered_json j;
  try {
    j = ordered_json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("report parse error: ") + e.what());
  }

  require_keys(j,
               {"tool", "version", "generated_at", "design",
                "continuation_region", "decreasing_intervals", "plateaus",
                "calibration", "objectives", "expected_sample_size", "type1"},
               "report");
  if (get_string(j, "tool", "report") != "mcef") {
    throw ValidationError("report: unexpected tool name");
  }

  DesignReport report;
  report.tool_version = get_string(j, "version", "report");
  report.timestamp = get_string(j, "generated_at", "report");

  const auto& design = j.at("design");
  require_keys(design,
               {"alpha", "alpha0", "alpha1", "beta_c", "n1", "delta_a",
                "delta_min", "estimate_rule"},
               "design");
  report.spec.alpha = get_number(design, "alpha", "design");
  report.spec.alpha0 = get_number(design, "alpha0", "design");
  report.spec.alpha1 = get_number(design, "alpha1", "design");
  report.spec.beta_c = get_number(design, "beta_c", "design");
  report.spec.n1 = get_number(design, "n1", "design");
  report.spec.delta_a = get_number(design, "delta_a", "design");
  report.spec.delta_min = get_number(design, "delta_min", "design");
  report.spec.estimate_rule = estimate_rule_from_string(
      get_string(design, "estimate_rule", "design"));
  report.spec.validate();

  const auto& region = j.at("continuation_region");
  require_keys(region, {"z_lo", "z_hi"}, "continuation_region");
  report.region.z_lo = get_number(region, "z_lo", "continuation_region");
  report.region.z_hi = get_number(region, "z_hi", "continuation_region");

  const auto& intervals = j.at("decreasing_intervals");
  if (!intervals.is_array()) {
    throw ValidationError("report: 'decreasing_intervals' must be an array");
  }
  for (const auto& item : intervals) {
    require_keys(item, {"lower", "upper"}, "decreasing_intervals[]");
    DecreasingInterval d;
    d.d_l = get_number(item, "lower", "decreasing_intervals[]");
    d.d_u = get_number(item, "upper", "decreasing_intervals[]");
    report.decreasing_intervals.push_back(d);
  }

  const auto& plateaus = j.at("plateaus");
  if (!plateaus.is_array()) {
    throw ValidationError("report: 'plateaus' must be an array");
  }
  for (const auto& item : plateaus) {
    require_keys(item, {"lower", "upper", "level"}, "plateaus[]");
    Plateau p;
    p.lo = get_number(item, "lower", "plateaus[]");
    p.hi = get_number(item, "upper", "plateaus[]");
    p.level = get_number(item, "level", "plateaus[]");
    report.plateaus.push_back(p);
  }

  const auto& calibration = j.at("calibration");
  require_keys(calibration,
               {"c_alpha", "achieved_level", "target_level", "iterations"},
               "calibration");
  report.c_alpha = get_number(calibration, "c_alpha", "calibration");
  report.achieved_level =
      get_number(calibration, "achieved_level", "calibration");
  report.calibration_iterations =
      get_int(calibration, "iterations", "calibration");

  const auto& objectives = j.at("objectives");
  require_keys(objectives, {"monotone", "unconstrained"}, "objectives");
  report.objective_monotone = get_number(objectives, "monotone", "objectives");
  report.objective_unconstrained =
      get_number(objectives, "unconstrained", "objectives");

  const auto& ess = j.at("expected_sample_size");
  if (!ess.is_array()) {
    throw ValidationError("report: 'expected_sample_size' must be an array");
  }
  for (const auto& item : ess) {
    require_keys(item, {"effect", "ess"}, "expected_sample_size[]");
    report.ess_at_effects.emplace_back(
        get_number(item, "effect", "expected_sample_size[]"),
        get_number(item, "ess", "expected_sample_size[]"));
  }

  const auto& type1 = j.at("type1");
  if (!type1.is_array()) {
    throw ValidationError("report: 'type1' must be an array");
  }
  for (const auto& item : type1) {
    require_keys(item,
                 {"delta", "first_stage_reject", "second_stage_mass",
                  "exact_total", "bound_total"},
                 "type1[]");
    Type1Row row;
    row.delta = get_number(item, "delta", "type1[]");
    row.first_stage_reject =
        get_number(item, "first_stage_reject", "type1[]");
    row.second_stage_mass =
        get_number(item, "second_stage_mass", "type1[]");
    row.exact_total = get_number(item, "exact_total", "type1[]");
    row.bound_total = get_number(item, "bound_total", "type1[]");
    report.type1_table.push_back(row);
  }

  return report;
}

void write_report(const DesignReport& report, const std::string& path) {
  const std::string text = emit_report(report);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open output file: " + path);
  out << text;
  out.flush();
  if (!out) throw IoError("error while writing file: " + path);
}

std::string emit_curves(const DesignRun& run, double grid_step) {
  if (!std::isfinite(grid_step) || grid_step <= 0.0) {
    throw ValidationError("grid step must be positive and finite");
  }
  const DesignSpec& spec = run.report.spec;
  const ContinuationRegion& region = run.report.region;
  const double rows_estimate = region.width() / grid_step;
  if (rows_estimate > 5e6) {
    throw ValidationError("grid step " + format_double(grid_step) +
                          " yields more than 5000000 rows");
  }
  std::string out =
      "z1,Q,Q_tilde,alpha2_unconstrained,alpha2_monotone,n2\n";
  for (long long k = 0;; ++k) {
    const double z = region.z_lo + static_cast<double>(k) * grid_step;
    if (z > region.z_hi + 1e-12) break;
    // A grid node may land a rounding error past z_hi; evaluate at the edge
    // so every printed row reflects the curves on their actual domain.
    const double ze = std::min(z, region.z_hi);
    out += format_double(z);
    out += ',';
    out += format_double(q_function(ze, spec));
    out += ',';
    out += format_double(run.mono_q(ze));
    out += ',';
    out += format_double(run.unconstrained_ce(ze));
    out += ',';
    out += format_double(run.monotone_ce(ze));
    out += ',';
    out += format_double(second_stage_n(run.monotone_ce, ze, spec));
    out += '\n';
  }
  return out;
}

void write_curves(const DesignRun& run, double grid_step,
                  const std::string& path) {
  const std::string text = emit_curves(run, grid_step);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open output file: " + path);
  out << text;
  out.flush();
  if (!out) throw IoError("error while writing file: " + path);
}

}  // namespace mcef
