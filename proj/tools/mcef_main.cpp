#include <cstdlib>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "mcef/ce_optimal.hpp"
#include "mcef/design_model.hpp"
#include "mcef/errors.hpp"
#include "mcef/monotoniser.hpp"
#include "mcef/report.hpp"
#include "mcef/type1_audit.hpp"
#include "mcef/version.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 2;      // bad input or invalid configuration
constexpr int kExitNumerical = 3;  // computation failed to converge
constexpr int kExitIo = 4;         // file system problem

// Relative --out paths are resolved against MCEF_OUT_DIR when it is set, so
// wrappers can redirect tool output without rewriting every path.
std::string resolve_out(const std::string& path) {
  if (path.empty() || path.front() == '/') return path;
  const char* base = std::getenv("MCEF_OUT_DIR");
  if (base == nullptr || *base == '\0') return path;
  std::string resolved(base);
  if (resolved.back() != '/') resolved += '/';
  return resolved + path;
}

void deliver(const std::string& text, const std::string& out_path) {
  if (out_path.empty()) {
    std::cout << text;
    return;
  }
  const std::string path = resolve_out(out_path);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw mcef::IoError("cannot open output file: " + path);
  out << text;
  out.flush();
  if (!out) throw mcef::IoError("error while writing file: " + path);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{
      "Optimal monotone conditional error functions for two-stage adaptive "
      "designs with sample-size recalculation"};
  app.set_version_flag("--version", std::string(mcef::kVersion));
  app.require_subcommand(1);

  std::string config_path;
  std::string out_path;
  std::vector<double> deltas;
  std::vector<double> effects;
  bool skip_type1 = false;
  double grid_step = 0.01;

  CLI::App* design = app.add_subcommand(
      "design", "Flatten, calibrate, and audit a design; emit a JSON report");
  design->add_option("config", config_path, "design configuration file")
      ->required();
  design->add_option("--out", out_path, "write the report here (default: stdout)");
  design->add_option("--deltas", deltas,
                     "true effects for the type-one scan, e.g. "
                     "--deltas=-0.5,-0.1,0")
      ->delimiter(',');
  design->add_option("--ess-effects", effects,
                     "effects at which to report expected sample size")
      ->delimiter(',');
  design->add_flag("--skip-type1", skip_type1, "omit the type-one scan");

  CLI::App* curves = app.add_subcommand(
      "curves", "Tabulate Q, its flattening, both conditional error "
                "functions, and n2 as CSV");
  curves->add_option("config", config_path, "design configuration file")
      ->required();
  curves->add_option("--grid-step", grid_step, "z1 grid spacing")
      ->capture_default_str();
  curves->add_option("--out", out_path, "write the CSV here (default: stdout)");

  CLI::App* type1 = app.add_subcommand(
      "type1", "Exact rejection probabilities and bounds under null-side "
               "effects");
  type1->add_option("config", config_path, "design configuration file")
      ->required();
  type1->add_option("--deltas", deltas,
                    "true effects to audit, e.g. --deltas=-0.5,-0.1,0")
      ->delimiter(',');
  type1->add_option("--out", out_path, "write the JSON here (default: stdout)");

  CLI::App* compare = app.add_subcommand(
      "compare", "Objective of the monotone optimum vs the unconstrained "
                 "optimum and the flat conditional error function");
  compare->add_option("config", config_path, "design configuration file")
      ->required();
  compare->add_option("--out", out_path, "write the JSON here (default: stdout)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    const mcef::ParsedConfig cfg = mcef::parse_config(config_path);

    if (app.got_subcommand(design)) {
      mcef::RunOptions options;
      options.tol = cfg.tol;
      options.skip_type1 = skip_type1;
      if (!deltas.empty()) options.type1_deltas = deltas;
      options.ess_effects = effects;
      const mcef::DesignRun run = mcef::run_design(cfg.spec, options);
      deliver(mcef::emit_report(run.report), out_path);
    } else if (app.got_subcommand(curves)) {
      mcef::RunOptions options;
      options.tol = cfg.tol;
      options.skip_type1 = true;
      const mcef::DesignRun run = mcef::run_design(cfg.spec, options);
      deliver(mcef::emit_curves(run, grid_step), out_path);
    } else if (app.got_subcommand(type1)) {
      const mcef::ContinuationRegion region =
          mcef::continuation_region(cfg.spec);
      const mcef::MonotoneQ mono =
          mcef::monotonise(cfg.spec, region, cfg.tol);
      const mcef::CEFunction ce =
          mcef::make_ce(mono.as_curve(), cfg.spec, cfg.tol);
      const std::vector<double> scan_deltas =
          deltas.empty() ? mcef::default_type1_deltas() : deltas;
      const std::vector<mcef::Type1Row> rows =
          mcef::type1_scan(ce, cfg.spec, scan_deltas, cfg.tol);
      nlohmann::ordered_json j;
      j["tool"] = "mcef";
      j["version"] = mcef::kVersion;
      nlohmann::ordered_json table = nlohmann::ordered_json::array();
      for (const auto& row : rows) {
        nlohmann::ordered_json item;
        item["delta"] = row.delta;
        item["first_stage_reject"] = row.first_stage_reject;
        item["second_stage_mass"] = row.second_stage_mass;
        item["exact_total"] = row.exact_total;
        item["bound_total"] = row.bound_total;
        table.push_back(item);
      }
      j["type1"] = table;
      deliver(j.dump(2) + "\n", out_path);
    } else if (app.got_subcommand(compare)) {
      const mcef::ContinuationRegion region =
          mcef::continuation_region(cfg.spec);
      const mcef::MonotoneQ mono =
          mcef::monotonise(cfg.spec, region, cfg.tol);
      const mcef::CEFunction mono_ce =
          mcef::make_ce(mono.as_curve(), cfg.spec, cfg.tol);
      const mcef::CEFunction unconstrained =
          mcef::unconstrained_ce(cfg.spec, cfg.tol);
      const double flat_level = (cfg.spec.alpha - cfg.spec.alpha1) /
                                (cfg.spec.alpha0 - cfg.spec.alpha1);
      const double obj_mono = mcef::objective(mono_ce, cfg.spec, cfg.tol);
      const double obj_unc = mcef::objective(unconstrained, cfg.spec, cfg.tol);
      const double obj_flat = mcef::objective(
          [flat_level](double) { return flat_level; }, {}, cfg.spec, cfg.tol);
      nlohmann::ordered_json j;
      j["tool"] = "mcef";
      j["version"] = mcef::kVersion;
      nlohmann::ordered_json objectives;
      objectives["monotone"] = obj_mono;
      objectives["unconstrained"] = obj_unc;
      objectives["flat"] = obj_flat;
      j["objectives"] = objectives;
      nlohmann::ordered_json savings;
      savings["monotone_vs_flat"] = (obj_flat - obj_mono) / obj_flat;
      savings["unconstrained_vs_flat"] = (obj_flat - obj_unc) / obj_flat;
      j["relative_savings"] = savings;
      deliver(j.dump(2) + "\n", out_path);
    }
    return kExitOk;
  } catch (const mcef::ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const mcef::IoError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitIo;
  } catch (const mcef::NumericalError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitNumerical;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitNumerical;
  }
}
