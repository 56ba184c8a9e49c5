#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "grnm/analysis.hpp"
#include "grnm/harness.hpp"
#include "grnm/problems.hpp"
#include "grnm/schedule.hpp"
#include "grnm/serialize.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr int kOk = 0;
constexpr int kCertificateFailure = 1;
constexpr int kConfigError = 2;

int run_command(const std::string& config_path, const std::string& out, int jobs, const std::string& format,
                bool timings) {
  grnm::RunMatrixConfig config;
  try {
    config = grnm::parse_config(config_path);
  } catch (const std::exception& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kConfigError;
  }
  if (timings) config.record_wall_time = true;
  grnm::SuiteOptions options;
  options.jobs = jobs;
  if (!out.empty()) {
    options.output_dir = out;
  } else if (const char* env = std::getenv("GRNM_OUTPUT_DIR"); env && *env) {
    options.output_dir = env;
  }
  const grnm::RunSummary summary = grnm::run_suite(config, options);
  std::cout << grnm::emit_report(summary, format);
  return grnm::exit_code(summary);
}

int validate_command(double p, double q, double theta) {
  grnm::AssumptionReport r;
  try {
    r = grnm::validate_assumptions(p, q, theta);
  } catch (const std::exception& e) {
    std::cerr << "invalid parameters: " << e.what() << '\n';
    return kConfigError;
  }
  const auto flag = [](bool ok) { return ok ? "ok" : "FAIL"; };
  std::cout << "p            " << grnm::format_double(p) << '\n'
            << "q            " << grnm::format_double(q) << '\n'
            << "theta        " << grnm::format_double(theta) << '\n'
            << "s            " << grnm::format_double(r.s) << "  (A4) " << flag(r.ok_a4) << '\n'
            << "gamma        " << grnm::format_double(r.gamma) << "  (A5) " << flag(r.ok_a5) << '\n'
            << "gamma*theta  " << grnm::format_double(r.gamma * theta) << "  (A6) " << flag(r.ok_a6) << '\n';
  if (r.nu) std::cout << "nu           " << grnm::format_double(*r.nu) << "  ell " << r.ell << '\n';
  return r.ok() ? kOk : kConfigError;
}

grnm::Problem load_problem_arg(const std::string& arg) {
  if (fs::exists(arg)) return grnm::load_problem_file(arg);
  const auto& names = grnm::builtin_problem_names();
  if (std::find(names.begin(), names.end(), arg) != names.end()) return grnm::load_problem(json(arg));
  return grnm::load_problem(json::parse(arg));
}

int certify_command(const std::string& trajectory_path, const std::string& problem_arg,
                    std::optional<double> theta, const std::string& format) {
  grnm::Trajectory trajectory;
  grnm::Problem problem;
  json tj;
  try {
    std::ifstream in(trajectory_path);
    if (!in) throw std::invalid_argument("cannot open " + trajectory_path);
    tj = json::parse(in);
    trajectory = grnm::trajectory_from_json(tj);
    problem = load_problem_arg(problem_arg);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kConfigError;
  }
  if (!theta && tj.contains("variant") && tj["variant"].contains("theta") && tj["variant"]["theta"].is_number()) {
    theta = tj["variant"]["theta"].get<double>();
  }
  if (!theta) {
    const auto& s = trajectory.config.schedule;
    if (s.q == 0.0) {
      theta = grnm::preset(1, s.p).theta;
    } else if (s.q == grnm::preset(2, s.p).q) {
      theta = grnm::preset(2, s.p).theta;
    }
  }
  grnm::CertificateReport report;
  grnm::LocalRateEstimate order;
  try {
    report = grnm::certify(trajectory, problem, theta);
    order = grnm::estimate_local_order(trajectory, *problem.objective);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kConfigError;
  }
  if (format == "json") {
    json j = grnm::to_json(report);
    j["local_order"] = grnm::to_json(order);
    std::cout << j.dump(1) << '\n';
  } else {
    std::cout << grnm::certificate_table(report);
    if (!report.note.empty()) std::cout << report.note << '\n';
    std::cout << "local order: "
              << (order.conclusive ? grnm::format_double(order.order) : "inconclusive (" + order.note + ")") << '\n';
  }
  return report.passed() ? kOk : kCertificateFailure;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Generalized regularized Newton method: runs, parameter checks, certificates"};
  app.require_subcommand(1);

  std::string config_path, out, format = "text";
  int jobs = 0;
  bool timings = false;
  auto* run = app.add_subcommand("run", "Run a problem x variant matrix");
  run->add_option("config", config_path, "Run configuration (JSON)")->required();
  run->add_option("--out", out, "Output directory (overrides GRNM_OUTPUT_DIR and the config)");
  run->add_option("--jobs", jobs, "Parallel cells")->check(CLI::NonNegativeNumber);
  run->add_option("--format", format, "Summary format")->check(CLI::IsMember({"text", "csv", "json"}));
  run->add_flag("--timings", timings, "Record per-iteration wall time in trajectories");

  double p = 3.0, q = 0.0, theta = 0.375;
  auto* validate = app.add_subcommand("validate-params", "Check the step-size assumptions for (p, q, theta)");
  validate->add_option("--p", p, "Regularization power in (1,3]")->required();
  validate->add_option("--q", q, "L1 weight factor q >= 0")->required();
  validate->add_option("--theta", theta, "theta in (0,1)")->required();

  std::string trajectory_path, problem_arg, cert_format = "text";
  std::optional<double> cert_theta;
  auto* certify = app.add_subcommand("certify", "Re-run the certificate on a stored trajectory");
  certify->add_option("trajectory", trajectory_path, "Trajectory JSON")->required();
  certify->add_option("--problem", problem_arg, "Problem: file, built-in name or inline JSON")->required();
  certify->add_option("--theta", cert_theta, "theta used for the rate certificate");
  certify->add_option("--format", cert_format, "Output format")->check(CLI::IsMember({"text", "json"}));

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kConfigError;
  }

  if (*run) return run_command(config_path, out, jobs, format, timings);
  if (*validate) return validate_command(p, q, theta);
  return certify_command(trajectory_path, problem_arg, cert_theta, cert_format);
}
