#include <catch2/catch_amalgamated.hpp>

#include <unistd.h>

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <regex>
#include <sstream>
#include <string>
#include <vector>

#include "mcef/errors.hpp"
#include "mcef/report.hpp"
#include "mcef/version.hpp"

using namespace mcef;

namespace {

const std::string kSampleConfig =
    "# two-stage design\n"
    "alpha = 0.025\n"
    "alpha0 = 0.5\n"
    "alpha1 = 0.01\n"
    "beta_c = 0.2\n"
    "n1 = 50\n"
    "delta_a = 0.3\n"
    "delta_min = 0.15   # smallest effect worth pursuing\n"
    "\n"
    "[tolerances]\n"
    "abs_tol = 1e-10\n"
    "rel_tol = 1e-10\n"
    "max_iter = 200\n";

std::string with_line_replaced(const std::string& text, int line_no,
                               const std::string& replacement) {
  std::vector<std::string> lines;
  std::string cur;
  for (char ch : text) {
    if (ch == '\n') {
      lines.push_back(cur);
      cur.clear();
    } else {
      cur += ch;
    }
  }
  lines.at(static_cast<std::size_t>(line_no) - 1) = replacement;
  std::string out;
  for (const std::string& l : lines) out += l + "\n";
  return out;
}

std::string message_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const std::exception& e) {
    return e.what();
  }
  return {};
}

struct TempDir {
  std::string path;
  TempDir() {
    char tmpl[] = "/tmp/mcef_test_XXXXXX";
    if (mkdtemp(tmpl) == nullptr) throw std::runtime_error("mkdtemp failed");
    path = tmpl;
  }
  ~TempDir() {
    // contents are small and known; remove files then the directory
    std::remove((path + "/report.json").c_str());
    std::remove((path + "/curves.csv").c_str());
    std::remove((path + "/config.cfg").c_str());
    rmdir(path.c_str());
  }
};

}  // namespace

TEST_CASE("config parsing reads every field", "[cli_reporting]") {
  const ParsedConfig cfg = parse_config_text(kSampleConfig);
  REQUIRE(cfg.spec.alpha == 0.025);
  REQUIRE(cfg.spec.alpha0 == 0.5);
  REQUIRE(cfg.spec.alpha1 == 0.01);
  REQUIRE(cfg.spec.beta_c == 0.2);
  REQUIRE(cfg.spec.n1 == 50.0);
  REQUIRE(cfg.spec.delta_a == 0.3);
  REQUIRE(cfg.spec.delta_min == 0.15);
  REQUIRE(cfg.spec.estimate_rule == EstimateRule::truncated_observed);
  REQUIRE(cfg.tol.abs_tol == 1e-10);
  REQUIRE(cfg.tol.rel_tol == 1e-10);
  REQUIRE(cfg.tol.max_iter == 200);
}

TEST_CASE("config parsing applies defaults", "[cli_reporting]") {
  const ParsedConfig cfg = parse_config_text(
      "alpha = 0.025\nalpha0 = 0.5\nalpha1 = 0.01\nbeta_c = 0.2\n"
      "n1 = 50\ndelta_a = 0.3\ndelta_min = 0.15\n");
  REQUIRE(cfg.spec.estimate_rule == EstimateRule::truncated_observed);
  REQUIRE(cfg.tol.abs_tol == 1e-10);
  REQUIRE(cfg.tol.rel_tol == 1e-10);
  REQUIRE(cfg.tol.max_iter == 200);

  const ParsedConfig fixed = parse_config_text(
      "alpha = 0.025\nalpha0 = 0.5\nalpha1 = 0.01\nbeta_c = 0.2\n"
      "n1 = 50\ndelta_a = 0.3\ndelta_min = 0.15\nestimate_rule = fixed\n");
  REQUIRE(fixed.spec.estimate_rule == EstimateRule::fixed);
}

TEST_CASE("config diagnostics carry the line number", "[cli_reporting]") {
  struct Case {
    int line;
    std::string replacement;
    std::string needle;
  };
  const std::vector<Case> cases{
      {3, "alpha0 = 0.5 extra", "line 3"},        // trailing garbage
      {3, "alpha0relay = 0.5", "line 3"},         // unknown key
      {4, "alpha1 0.01", "line 4"},               // missing '='
      {7, "delta_a = 0.3x", "line 7"},            // malformed number
      {8, "delta_min =", "line 8"},               // empty value
      {10, "[limits]", "line 10"},                // unknown section
      {13, "max_iter = 1.5", "line 13"},          // non-integer count
      {13, "speed = fast", "line 13"},            // unknown tolerance key
      {9, "beta_c = 0.2", "line 9"},              // duplicate key, second wins
  };
  for (const Case& c : cases) {
    INFO("replacing line " << c.line << " with: " << c.replacement);
    const std::string text =
        with_line_replaced(kSampleConfig, c.line, c.replacement);
    REQUIRE_THROWS_AS(parse_config_text(text), ValidationError);
    const std::string msg =
        message_of([&] { parse_config_text(text); });
    REQUIRE(msg.find(c.needle) != std::string::npos);
  }

  const std::string missing = message_of([] {
    parse_config_text("alpha = 0.025\nalpha0 = 0.5\n");
  });
  REQUIRE(missing.find("alpha1") != std::string::npos);
  REQUIRE(missing.find("beta_c") != std::string::npos);

  const std::string bad_rule = message_of([] {
    parse_config_text(
        "alpha = 0.025\nalpha0 = 0.5\nalpha1 = 0.01\nbeta_c = 0.2\n"
        "n1 = 50\ndelta_a = 0.3\ndelta_min = 0.15\nestimate_rule = median\n");
  });
  REQUIRE(bad_rule.find("line 8") != std::string::npos);

  // invalid values are reported with the config origin, not thrown raw
  const std::string out_of_band = message_of([] {
    parse_config_text(
        "alpha = 0.025\nalpha0 = 0.5\nalpha1 = 0.01\nbeta_c = 0.001\n"
        "n1 = 50\ndelta_a = 0.3\ndelta_min = 0.15\n");
  });
  REQUIRE(out_of_band.find("<config>") != std::string::npos);
}

TEST_CASE("config files are read from disk", "[cli_reporting]") {
  REQUIRE_THROWS_AS(parse_config("/nonexistent/mcef/design.cfg"), IoError);
  TempDir dir;
  const std::string path = dir.path + "/config.cfg";
  std::ofstream(path) << kSampleConfig;
  const ParsedConfig cfg = parse_config(path);
  REQUIRE(cfg.spec.n1 == 50.0);
}

TEST_CASE("default audit grids", "[cli_reporting]") {
  REQUIRE(default_type1_deltas() ==
          std::vector<double>{-1.0, -0.5, -0.2, -0.1, -0.05, 0.0});
  DesignSpec spec;
  REQUIRE(default_ess_effects(spec) ==
          std::vector<double>{0.0, 0.15, 0.3});
  spec.delta_min = 0.3;  // collides with delta_a: deduplicated
  REQUIRE(default_ess_effects(spec) == std::vector<double>{0.0, 0.3});
  spec.delta_a = 0.0;  // collides with the null point
  REQUIRE(default_ess_effects(spec) == std::vector<double>{0.0, 0.3});
}

TEST_CASE("full run produces a coherent report", "[cli_reporting]") {
  DesignSpec spec;
  const DesignRun run = run_design(spec);
  const DesignReport& r = run.report;
  REQUIRE(std::abs(r.achieved_level - 0.015) <= 1e-10);
  REQUIRE(r.calibration_iterations > 0);
  REQUIRE(std::abs(r.objective_monotone - r.objective_unconstrained) <=
          1e-9 * std::max(1.0, r.objective_monotone));
  REQUIRE(r.ess_at_effects.size() == 3);
  for (const auto& [effect, ess] : r.ess_at_effects) {
    REQUIRE(ess > spec.n1);
    REQUIRE(std::abs(expected_sample_size(run.monotone_ce, spec, effect) -
                     ess) <= 1e-9 * ess);
  }
  REQUIRE(r.type1_table.size() == 6);
  REQUIRE(r.tool_version == kVersion);
  REQUIRE(std::regex_match(
      r.timestamp,
      std::regex(R"(\d{4}-\d{2}-\d{2}T\d{2}:\d{2}:\d{2}Z)")));
  REQUIRE(r.c_alpha == run.monotone_ce.c);
  // the monotone function the run hands back is the calibrated one
  REQUIRE(std::abs(level(run.monotone_ce) - 0.015) <= 1e-10);
}

TEST_CASE("run options tailor the audit grids", "[cli_reporting]") {
  DesignSpec spec;
  RunOptions opt;
  opt.type1_deltas = {-0.3, 0.0};
  opt.ess_effects = {0.1, 0.2};
  const DesignRun run = run_design(spec, opt);
  REQUIRE(run.report.type1_table.size() == 2);
  REQUIRE(run.report.type1_table[0].delta == -0.3);
  REQUIRE(run.report.ess_at_effects.size() == 2);
  REQUIRE(run.report.ess_at_effects[0].first == 0.1);

  RunOptions skip;
  skip.skip_type1 = true;
  REQUIRE(run_design(spec, skip).report.type1_table.empty());
}

TEST_CASE("reports round-trip through JSON bit-for-bit", "[cli_reporting]") {
  DesignSpec spec;
  spec.estimate_rule = EstimateRule::fixed;
  const DesignRun run = run_design(spec);
  const std::string text = emit_report(run.report);
  const DesignReport back = parse_report(text);
  REQUIRE(emit_report(back) == text);

  REQUIRE(back.spec.alpha == run.report.spec.alpha);
  REQUIRE(back.spec.estimate_rule == run.report.spec.estimate_rule);
  REQUIRE(back.region.z_lo == run.report.region.z_lo);
  REQUIRE(back.region.z_hi == run.report.region.z_hi);
  REQUIRE(back.c_alpha == run.report.c_alpha);
  REQUIRE(back.achieved_level == run.report.achieved_level);
  REQUIRE(back.objective_monotone == run.report.objective_monotone);
  REQUIRE(back.objective_unconstrained == run.report.objective_unconstrained);
  REQUIRE(back.ess_at_effects == run.report.ess_at_effects);
  REQUIRE(back.plateaus.size() == run.report.plateaus.size());
  REQUIRE(back.decreasing_intervals.size() ==
          run.report.decreasing_intervals.size());
  REQUIRE(back.type1_table.size() == run.report.type1_table.size());
  for (std::size_t i = 0; i < back.type1_table.size(); ++i) {
    REQUIRE(back.type1_table[i].delta == run.report.type1_table[i].delta);
    REQUIRE(back.type1_table[i].exact_total ==
            run.report.type1_table[i].exact_total);
    REQUIRE(back.type1_table[i].bound_total ==
            run.report.type1_table[i].bound_total);
  }
  REQUIRE(back.timestamp == run.report.timestamp);
  REQUIRE(back.tool_version == run.report.tool_version);
}

TEST_CASE("report parsing is strict", "[cli_reporting]") {
  const DesignRun run = run_design(DesignSpec{});
  const std::string text = emit_report(run.report);

  REQUIRE_THROWS_AS(parse_report("not json"), ValidationError);
  REQUIRE_THROWS_AS(parse_report("{}"), ValidationError);

  // wrong tool name
  std::string wrong_tool = text;
  const auto pos = wrong_tool.find("\"mcef\"");
  REQUIRE(pos != std::string::npos);
  wrong_tool.replace(pos, 6, "\"vcef\"");
  REQUIRE_THROWS_AS(parse_report(wrong_tool), ValidationError);

  // a removed key is noticed
  std::string missing = text;
  const auto apos = missing.find("\"achieved_level\"");
  REQUIRE(apos != std::string::npos);
  const auto eol = missing.find('\n', apos);
  missing.erase(apos, eol - apos + 1);
  REQUIRE_THROWS_AS(parse_report(missing), ValidationError);

  // a type error is noticed
  std::string retyped = text;
  const auto ipos = retyped.find("\"iterations\": ");
  REQUIRE(ipos != std::string::npos);
  const auto iend = retyped.find_first_of(",\n", ipos + 14);
  retyped.replace(ipos + 14, iend - (ipos + 14), "\"many\"");
  REQUIRE_THROWS_AS(parse_report(retyped), ValidationError);
}

TEST_CASE("curve tables are deterministic and well-formed",
          "[cli_reporting]") {
  DesignSpec spec;
  const DesignRun run = run_design(spec);
  const std::string csv = emit_curves(run, 0.05);
  REQUIRE(csv.rfind("z1,Q,Q_tilde,alpha2_unconstrained,alpha2_monotone,n2\n",
                    0) == 0);
  REQUIRE(csv == emit_curves(run, 0.05));

  // row count: grid from z_lo to z_hi inclusive-of-last-on-grid
  std::size_t rows = 0;
  for (char ch : csv) rows += (ch == '\n');
  const double width = run.report.region.z_hi - run.report.region.z_lo;
  REQUIRE(rows == 2 + static_cast<std::size_t>(std::floor(width / 0.05)));

  // Q_tilde column is non-decreasing down the table
  std::istringstream in(csv);
  std::string line;
  std::getline(in, line);  // header
  double prev_qt = 0.0;
  bool first = true;
  while (std::getline(in, line)) {
    const auto c1 = line.find(',');
    const auto c2 = line.find(',', c1 + 1);
    const auto c3 = line.find(',', c2 + 1);
    const double qt = std::strtod(line.substr(c2 + 1, c3 - c2 - 1).c_str(),
                                  nullptr);
    if (!first) REQUIRE(qt >= prev_qt - 1e-12);
    prev_qt = qt;
    first = false;
  }

  REQUIRE_THROWS_AS(emit_curves(run, 0.0), ValidationError);
  REQUIRE_THROWS_AS(emit_curves(run, -0.1), ValidationError);
  REQUIRE_THROWS_AS(emit_curves(run, 1e-9), ValidationError);  // > 5e6 rows
}

TEST_CASE("reports and curves write to disk", "[cli_reporting]") {
  DesignSpec spec;
  const DesignRun run = run_design(spec);
  TempDir dir;

  const std::string rpath = dir.path + "/report.json";
  write_report(run.report, rpath);
  std::ifstream rin(rpath);
  std::stringstream rbuf;
  rbuf << rin.rdbuf();
  REQUIRE(rbuf.str() == emit_report(run.report));
  REQUIRE(parse_report(rbuf.str()).c_alpha == run.report.c_alpha);

  const std::string cpath = dir.path + "/curves.csv";
  write_curves(run, 0.1, cpath);
  std::ifstream cin_(cpath);
  std::stringstream cbuf;
  cbuf << cin_.rdbuf();
  REQUIRE(cbuf.str() == emit_curves(run, 0.1));

  REQUIRE_THROWS_AS(write_report(run.report, "/nonexistent-dir/x.json"),
                    IoError);
  REQUIRE_THROWS_AS(write_curves(run, 0.1, "/nonexistent-dir/x.csv"),
                    IoError);
}
