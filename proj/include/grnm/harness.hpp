#pragma once

#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "grnm/analysis.hpp"
#include "grnm/problems.hpp"
#include "grnm/solver.hpp"

namespace grnm {

/// Malformed or out-of-range run configuration.
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct VariantSpec {
  std::string name;
  double p{3.0};
  /// "example1", "example2" or "custom".
  std::string preset{"example1"};
  double q{0.0};
  /// Empty for a custom variant without theta: the rate certificate is skipped.
  std::optional<double> theta;
  /// Empty means max(L, 1e-3) of the problem.
  std::optional<double> c1;
  double c2{0.5};
  double epsilon{1e-8};
  int max_outer{500};
};

struct RunMatrixConfig {
  /// Inline descriptions; string entries are resolved (built-in name or file) at parse time.
  std::vector<nlohmann::json> problems;
  std::vector<VariantSpec> variants;
  std::filesystem::path output_dir{"grnm_out"};
  /// 0: one thread per cell, capped at the hardware concurrency.
  int jobs{0};
  std::uint64_t seed{0};
  bool record_wall_time{false};
};

/// Defaults: epsilon 1e-8, max_outer 500, preset example1, p = 3. Names
/// "classical_example1", "cubic_example1", "classical_example2" and
/// "cubic_example2" may stand in for a variant object.
RunMatrixConfig parse_config(const std::filesystem::path& path);
RunMatrixConfig parse_config_json(const nlohmann::json& j, const std::filesystem::path& base_dir = {});

VariantSpec named_variant(const std::string& name);

enum class CellStatus { ok, certificate_failure, solver_failure, config_error };

std::string_view to_string(CellStatus s);
CellStatus cell_status_from_string(std::string_view s);

struct CellResult {
  std::string problem;
  std::string variant;
  int variant_index{0};
  CellStatus status{CellStatus::ok};
  std::string message;
  int iters{0};
  double final_gap{std::numeric_limits<double>::quiet_NaN()};
  double final_grad{std::numeric_limits<double>::quiet_NaN()};
  int cert_pass{0};
  int cert_fail{0};
  double local_order{std::numeric_limits<double>::quiet_NaN()};
  double theorem_margin{std::numeric_limits<double>::quiet_NaN()};
  /// NaN unless timings were requested.
  double wall_ms{std::numeric_limits<double>::quiet_NaN()};
};

struct RunSummary {
  std::vector<CellResult> cells;
};

struct SuiteOptions {
  /// Overrides config.output_dir when set.
  std::optional<std::filesystem::path> output_dir;
  /// Overrides config.jobs when positive.
  int jobs{0};
  bool write_artifacts{true};
};

/// Every cell runs, failures included; artifacts under
/// <out>/<problem>/<variant>.{trajectory.csv,trajectory.json,certificate.json}
/// and <out>/summary.{csv,txt,json}.
RunSummary run_suite(const RunMatrixConfig& config, const SuiteOptions& options = {});

SolverConfig solver_config_for(const VariantSpec& variant, const Objective& objective);

/// Preset theta unless overridden; empty for custom variants without one.
std::optional<double> certificate_theta(const VariantSpec& variant);

/// Step invariants and the global-rate certificate for one trajectory.
CertificateReport certify(const Trajectory& trajectory, const Problem& problem, std::optional<double> theta);

/// Rows ordered by problem name, then by variant position in the config.
std::string emit_report(const RunSummary& summary, const std::string& format);

RunSummary summary_from_json(const nlohmann::json& j);

/// 0 all good, 1 certificate failure, 2 configuration error, 3 solver failure.
int exit_code(const RunSummary& summary);

}  // namespace grnm
