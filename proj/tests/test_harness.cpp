#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>

#include "grnm/harness.hpp"
#include "grnm/serialize.hpp"

using namespace grnm;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::path(GRNM_BINARY_DIR) / "test_scratch" / name;
  fs::remove_all(dir);
  return dir;
}

int count_lines(const std::string& s) { return static_cast<int>(std::count(s.begin(), s.end(), '\n')); }

}  // namespace

TEST(ParseConfig, MinimalConfigGetsDefaults) {
  const auto c = parse_config_json(json::parse(R"({"problems":["quadratic_singular_10"],"variants":["cubic_example1"]})"));
  ASSERT_EQ(c.problems.size(), 1u);
  ASSERT_EQ(c.variants.size(), 1u);
  const auto& v = c.variants[0];
  EXPECT_EQ(v.name, "cubic_example1");
  EXPECT_EQ(v.p, 3.0);
  EXPECT_EQ(v.preset, "example1");
  EXPECT_EQ(v.epsilon, 1e-8);
  EXPECT_EQ(v.max_outer, 500);
  EXPECT_EQ(v.c2, 0.5);
  EXPECT_FALSE(v.c1);
  EXPECT_EQ(c.output_dir, fs::path("grnm_out"));
  EXPECT_EQ(c.problems[0].at("name"), "quadratic_singular_10");
}

TEST(ParseConfig, RangeErrors) {
  try {
    parse_config_json(json::parse(R"({"problems":[],"variants":[{"name":"v","preset":"custom","c2":1.5}]})"));
    FAIL();
  } catch (const ConfigError& e) {
    const std::string what = e.what();
    EXPECT_EQ(what.substr(what.size() - 29), "c2 must lie in (0,1) per (A2)");
  }
  EXPECT_THROW(parse_config_json(json::parse(R"({"problems":[],"variants":[{"name":"v","p":3.5}]})")), ConfigError);
  EXPECT_THROW(parse_config_json(json::parse(R"({"problems":[],"variants":[{"name":"v","q":0.1}]})")), ConfigError);
  EXPECT_THROW(parse_config_json(json::parse(R"({"problems":[],"variants":[{"name":"v","colour":1}]})")), ConfigError);
  EXPECT_THROW(parse_config_json(json::parse(R"({"problems":[],"variants":[],"extra":1})")), ConfigError);
  EXPECT_THROW(parse_config_json(json::parse(R"({"problems":["nope"],"variants":[]})")), ConfigError);
  EXPECT_THROW(
      parse_config_json(json::parse(R"({"problems":[],"variants":[{"name":"v","preset":"custom","q":0.1,"theta":0.05}]})")),
      ConfigError);
}

TEST(ParseConfig, DemoConfigHasSixteenCells) {
  const auto c = parse_config(fs::path(GRNM_SOURCE_DIR) / "configs" / "demo.json");
  EXPECT_EQ(c.problems.size() * c.variants.size(), 16u);
  EXPECT_EQ(c.output_dir, fs::path(GRNM_SOURCE_DIR) / "configs" / ".." / "demo_out");
}

TEST(ParseConfig, SeedFillsGeneratedProblems) {
  const auto c = parse_config_json(
      json::parse(R"({"seed":5,"problems":[{"kind":"logsumexp","m":8,"n":3}],"variants":["classical_example1"]})"));
  EXPECT_EQ(c.problems[0].at("seed"), 5);
}

TEST(NamedVariants, Presets) {
  EXPECT_EQ(named_variant("classical_example2").p, 2.0);
  EXPECT_EQ(named_variant("classical_example2").preset, "example2");
  EXPECT_EQ(*certificate_theta(named_variant("cubic_example2")), 0.2);
  EXPECT_EQ(*certificate_theta(named_variant("cubic_example1")), 0.375);
  EXPECT_THROW(named_variant("fancy"), ConfigError);
  VariantSpec custom;
  custom.preset = "custom";
  EXPECT_FALSE(certificate_theta(custom));
}

TEST(SolverConfigFor, DefaultC1) {
  const Problem p = load_problem("quadratic_pd_10");
  const SolverConfig c = solver_config_for(named_variant("cubic_example1"), *p.objective);
  EXPECT_EQ(c.schedule.c1, 1e-3);
  EXPECT_EQ(c.schedule.q, 0.0);
  EXPECT_EQ(c.schedule.n, 10);
}

TEST(RunSuite, EmptyProblemList) {
  RunMatrixConfig c;
  c.variants.push_back(named_variant("cubic_example1"));
  SuiteOptions o;
  o.output_dir = scratch("empty");
  const RunSummary s = run_suite(c, o);
  EXPECT_TRUE(s.cells.empty());
  EXPECT_EQ(exit_code(s), 0);
  EXPECT_EQ(count_lines(slurp(*o.output_dir / "summary.csv")), 1);
}

TEST(RunSuite, UnsafeQIsConfigurationError) {
  auto c = parse_config(fs::path(GRNM_SOURCE_DIR) / "tests" / "data" / "unsafe_q.json");
  SuiteOptions o;
  o.write_artifacts = false;
  const RunSummary s = run_suite(c, o);
  ASSERT_EQ(s.cells.size(), 1u);
  EXPECT_EQ(s.cells[0].status, CellStatus::config_error);
  EXPECT_FALSE(s.cells[0].message.empty());
  EXPECT_EQ(exit_code(s), 2);
}

TEST(RunSuite, SingleCellArtifacts) {
  auto c = parse_config(fs::path(GRNM_SOURCE_DIR) / "tests" / "data" / "small.json");
  SuiteOptions o;
  o.output_dir = scratch("small");
  const RunSummary s = run_suite(c, o);
  ASSERT_EQ(s.cells.size(), 1u);
  EXPECT_EQ(s.cells[0].status, CellStatus::ok);
  EXPECT_EQ(exit_code(s), 0);
  const std::string csv = emit_report(s, "csv");
  EXPECT_EQ(count_lines(csv), 2);
  EXPECT_EQ(csv.substr(0, csv.find('\n')),
            "problem,variant,iters,final_gap,final_grad,cert_pass,cert_fail,local_order,wall_ms");
  EXPECT_EQ(slurp(*o.output_dir / "summary.csv"), csv);
  const fs::path cell = *o.output_dir / s.cells[0].problem;
  for (const char* ext : {".trajectory.csv", ".trajectory.json", ".certificate.json"}) {
    EXPECT_TRUE(fs::exists(cell / ("cubic_example1" + std::string(ext)))) << ext;
  }
  const json traj = json::parse(slurp(cell / "cubic_example1.trajectory.json"));
  EXPECT_EQ(traj.at("variant").at("theta"), 0.375);
}

TEST(RunSuite, RepeatRunsAreByteIdentical) {
  auto c = parse_config(fs::path(GRNM_SOURCE_DIR) / "tests" / "data" / "small.json");
  SuiteOptions a, b;
  a.output_dir = scratch("repeat_a");
  b.output_dir = scratch("repeat_b");
  const RunSummary sa = run_suite(c, a), sb = run_suite(c, b);
  const std::string rel = sa.cells[0].problem + "/cubic_example1.trajectory.csv";
  EXPECT_EQ(slurp(*a.output_dir / rel), slurp(*b.output_dir / rel));
  EXPECT_EQ(slurp(*a.output_dir / "summary.json"), slurp(*b.output_dir / "summary.json"));
}

TEST(Report, JsonRoundTrip) {
  RunSummary s;
  CellResult a;
  a.problem = "p";
  a.variant = "v";
  a.iters = 7;
  a.final_gap = 1.2345678901234567e-17;
  a.final_grad = 3e-9;
  a.cert_pass = 14;
  a.local_order = 1.87;
  a.theorem_margin = std::numeric_limits<double>::infinity();
  CellResult b = a;
  b.variant = "w";
  b.variant_index = 1;
  b.status = CellStatus::solver_failure;
  b.message = "inner failure";
  s.cells = {a, b};
  const RunSummary back = summary_from_json(json::parse(emit_report(s, "json")));
  ASSERT_EQ(back.cells.size(), 2u);
  EXPECT_EQ(back.cells[0].final_gap, a.final_gap);
  EXPECT_EQ(back.cells[0].theorem_margin, a.theorem_margin);
  EXPECT_TRUE(std::isnan(back.cells[1].wall_ms));
  EXPECT_EQ(back.cells[1].status, CellStatus::solver_failure);
  EXPECT_EQ(back.cells[1].message, "inner failure");
  EXPECT_EQ(emit_report(back, "json"), emit_report(s, "json"));
  EXPECT_THROW(emit_report(s, "xml"), std::invalid_argument);
}

TEST(ExitCode, Precedence) {
  RunSummary s;
  s.cells.resize(3);
  EXPECT_EQ(exit_code(s), 0);
  s.cells[0].status = CellStatus::certificate_failure;
  EXPECT_EQ(exit_code(s), 1);
  s.cells[1].status = CellStatus::solver_failure;
  EXPECT_EQ(exit_code(s), 3);
  s.cells[2].status = CellStatus::config_error;
  EXPECT_EQ(exit_code(s), 2);
}

TEST(Serialize, ShortestRoundTripDoubles) {
  for (double v : {0.1, 1.0 / 3.0, 1e-300, 6.02214076e23, -2.5}) {
    EXPECT_EQ(std::stod(format_double(v)), v);
  }
  EXPECT_EQ(format_double(0.1), "0.1");
  EXPECT_EQ(format_double(std::numeric_limits<double>::infinity()), "inf");
  EXPECT_EQ(format_double(-std::numeric_limits<double>::infinity()), "-inf");
  EXPECT_EQ(format_double(std::nan("")), "nan");
  EXPECT_EQ(number_from_json(json_number(-std::numeric_limits<double>::infinity())),
            -std::numeric_limits<double>::infinity());
}

TEST(Serialize, TrajectoryRoundTrip) {
  const Problem p = load_problem("logsumexp_30x10");
  const Trajectory t = run(*p.objective, p.x0, solver_config_for(named_variant("cubic_example2"), *p.objective), p.name);
  const json j = to_json(t);
  const Trajectory back = trajectory_from_json(json::parse(j.dump()));
  ASSERT_EQ(back.records.size(), t.records.size());
  EXPECT_EQ(back.termination, t.termination);
  EXPECT_EQ(back.config.schedule.q, t.config.schedule.q);
  for (std::size_t k = 0; k < t.records.size(); ++k) {
    EXPECT_EQ(back.records[k].x, t.records[k].x);
    EXPECT_EQ(back.records[k].d, t.records[k].d);
    EXPECT_EQ(back.records[k].inner_residual, t.records[k].inner_residual);
  }
  EXPECT_EQ(to_json(back).dump(), j.dump());
  std::ostringstream a, b;
  write_trajectory_csv(a, t);
  write_trajectory_csv(b, back);
  EXPECT_EQ(a.str(), b.str());
  EXPECT_EQ(count_lines(a.str()), static_cast<int>(t.records.size()) + 1);
}

TEST(Certify, StoredTrajectoryMatchesLiveCertificate) {
  const Problem p = load_problem("quadratic_pd_10");
  const Trajectory t = run(*p.objective, p.x0, solver_config_for(named_variant("classical_example2"), *p.objective), p.name);
  const Trajectory back = trajectory_from_json(json::parse(to_json(t).dump()));
  const auto live = certify(t, p, 0.2), stored = certify(back, p, 0.2);
  EXPECT_EQ(to_json(live).dump(), to_json(stored).dump());
  EXPECT_TRUE(live.passed());
  const std::string table = certificate_table(live);
  EXPECT_NE(table.find("rate_bound"), std::string::npos);
}
