#include "grnm/harness.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <set>
#include <sstream>
#include <thread>

#include "grnm/schedule.hpp"
#include "grnm/serialize.hpp"

namespace grnm {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

void reject_unknown(const json& j, const std::set<std::string>& allowed, const std::string& where) {
  std::string unknown;
  for (const auto& [key, value] : j.items()) {
    if (!allowed.count(key)) unknown += (unknown.empty() ? "" : ", ") + key;
  }
  if (!unknown.empty()) throw ConfigError("unknown keys in " + where + ": " + unknown);
}

double get_number(const json& j, const char* key, const std::string& where) {
  const json& v = j.at(key);
  if (!v.is_number()) throw ConfigError(where + ": " + key + " must be a number");
  return v.get<double>();
}

void validate_variant(const VariantSpec& v) {
  const std::string where = "variant " + v.name + ": ";
  if (!(v.p > 1.0 && v.p <= 3.0)) throw ConfigError(where + "p must lie in (1,3]");
  if (v.c1 && !(*v.c1 > 0.0)) throw ConfigError(where + "c1 must be positive (and at least L) per (A2)");
  if (!(v.c2 > 0.0 && v.c2 < 1.0)) throw ConfigError(where + "c2 must lie in (0,1) per (A2)");
  if (!(v.q >= 0.0)) throw ConfigError(where + "q must be nonnegative per (A2)");
  if (!(descent_constant(v.p, v.q) > 0.0)) {
    throw ConfigError(where + "q violates (A4): 3 - (1+q)^((3-p)/(p-1)) must be positive");
  }
  if (v.theta && !(*v.theta > v.q && *v.theta < 1.0)) throw ConfigError(where + "theta must lie in (q,1) per (A6)");
  if (!(v.epsilon > 0.0)) throw ConfigError(where + "epsilon must be positive");
  if (v.max_outer < 1) throw ConfigError(where + "max_outer must be at least 1");
}

VariantSpec parse_variant(const json& j) {
  if (j.is_string()) return named_variant(j.get<std::string>());
  if (!j.is_object()) throw ConfigError("variant entries must be objects or known names");
  if (!j.contains("name") || !j.at("name").is_string()) throw ConfigError("every variant needs a string name");
  VariantSpec v;
  v.name = j.at("name").get<std::string>();
  const std::string where = "variant " + v.name;
  reject_unknown(j, {"name", "p", "preset", "q", "theta", "c1", "c2", "epsilon", "max_outer"}, where);
  if (j.contains("p")) v.p = get_number(j, "p", where);
  if (!(v.p > 1.0 && v.p <= 3.0)) throw ConfigError(where + ": p must lie in (1,3]");
  if (j.contains("preset")) {
    if (!j.at("preset").is_string()) throw ConfigError(where + ": preset must be a string");
    v.preset = j.at("preset").get<std::string>();
  }
  if (v.preset == "example1" || v.preset == "example2") {
    if (j.contains("q")) throw ConfigError(where + ": q is fixed by preset " + v.preset + "; use preset custom");
    const PresetParams pp = preset(v.preset == "example1" ? 1 : 2, v.p);
    v.q = pp.q;
    v.theta = pp.theta;
  } else if (v.preset == "custom") {
    if (j.contains("q")) v.q = get_number(j, "q", where);
  } else {
    throw ConfigError(where + ": preset must be example1, example2 or custom");
  }
  if (j.contains("theta")) v.theta = get_number(j, "theta", where);
  if (j.contains("c1")) {
    const json& c1 = j.at("c1");
    if (c1.is_string() && c1.get<std::string>() == "auto") {
      v.c1.reset();
    } else if (c1.is_number()) {
      v.c1 = c1.get<double>();
    } else {
      throw ConfigError(where + ": c1 must be a number or \"auto\"");
    }
  }
  if (j.contains("c2")) v.c2 = get_number(j, "c2", where);
  if (j.contains("epsilon")) v.epsilon = get_number(j, "epsilon", where);
  if (j.contains("max_outer")) {
    if (!j.at("max_outer").is_number_integer()) throw ConfigError(where + ": max_outer must be an integer");
    v.max_outer = j.at("max_outer").get<int>();
  }
  validate_variant(v);
  return v;
}

json resolve_problem(const json& entry, const fs::path& base_dir, std::uint64_t seed) {
  json desc;
  if (entry.is_string()) {
    const std::string s = entry.get<std::string>();
    const auto& names = builtin_problem_names();
    if (std::find(names.begin(), names.end(), s) != names.end()) return builtin_problem_spec(s);
    const fs::path path = fs::path(s).is_absolute() ? fs::path(s) : base_dir / s;
    std::ifstream in(path);
    if (!in) throw ConfigError("problem '" + s + "' is neither a built-in name nor a readable file");
    try {
      desc = json::parse(in);
    } catch (const json::parse_error& e) {
      throw ConfigError("invalid JSON in problem file " + path.string() + ": " + e.what());
    }
    if (desc.is_object() && !desc.contains("name")) desc["name"] = path.stem().string();
  } else if (entry.is_object()) {
    desc = entry;
  } else {
    throw ConfigError("problem entries must be objects, built-in names or file paths");
  }
  if (!desc.is_object() || !desc.contains("kind")) throw ConfigError("problem description needs a \"kind\"");
  const bool explicit_data = desc.contains("A") || desc.contains("X");
  if (!explicit_data && !desc.contains("seed")) desc["seed"] = seed;
  return desc;
}

std::string cell_number(double v) { return format_double(v); }

std::string text_number(double v) {
  if (std::isnan(v)) return "-";
  std::ostringstream s;
  s << std::setprecision(4) << v;
  return s.str();
}

void write_file(const fs::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << content;
}

CellResult run_cell(const Problem& problem, const VariantSpec& variant, int variant_index, const fs::path& out,
                    bool write_artifacts, bool record_wall_time) {
  using clock = std::chrono::steady_clock;
  const auto start = clock::now();
  CellResult cell;
  cell.problem = problem.name;
  cell.variant = variant.name;
  cell.variant_index = variant_index;
  const auto finish = [&] {
    cell.wall_ms = record_wall_time ? std::chrono::duration<double, std::milli>(clock::now() - start).count()
                                    : std::numeric_limits<double>::quiet_NaN();
    return cell;
  };

  Trajectory trajectory;
  try {
    SolverConfig config = solver_config_for(variant, *problem.objective);
    config.record_wall_time = record_wall_time;
    trajectory = run(*problem.objective, problem.x0, config, problem.name);
  } catch (const ConfigurationError& e) {
    cell.status = CellStatus::config_error;
    cell.message = e.what();
    return finish();
  } catch (const std::exception& e) {
    cell.status = CellStatus::solver_failure;
    cell.message = e.what();
    return finish();
  }

  const std::optional<double> theta = certificate_theta(variant);
  const CertificateReport cert = certify(trajectory, problem, theta);
  const LocalRateEstimate order = estimate_local_order(trajectory, *problem.objective);

  const ProblemMetadata& meta = problem.objective->metadata();
  const IterationRecord& last = trajectory.records.back();
  cell.iters = static_cast<int>(trajectory.records.size()) - 1;
  cell.final_gap = last.f - meta.f_star;
  cell.final_grad = last.grad_norm;
  cell.cert_pass = cert.pass_count();
  cell.cert_fail = cert.fail_count();
  if (order.conclusive) cell.local_order = order.order;
  cell.theorem_margin = cert.bounds.empty() ? std::numeric_limits<double>::quiet_NaN() : cert.min_bound_margin;
  if (trajectory.termination != Termination::converged) {
    cell.status = CellStatus::solver_failure;
    cell.message = std::string(to_string(trajectory.termination)) +
                   (trajectory.message.empty() ? "" : ": " + trajectory.message);
  } else if (!cert.passed()) {
    cell.status = CellStatus::certificate_failure;
    std::string failed;
    for (const auto& c : cert.checks) {
      if (c.status == CheckStatus::fail) failed += (failed.empty() ? "" : ", ") + c.name;
    }
    cell.message = "failed: " + failed;
  }

  if (write_artifacts) {
    const fs::path dir = out / problem.name;
    fs::create_directories(dir);
    std::ostringstream csv;
    write_trajectory_csv(csv, trajectory);
    write_file(dir / (variant.name + ".trajectory.csv"), csv.str());
    json tj = to_json(trajectory);
    tj["variant"] = {{"name", variant.name},
                     {"preset", variant.preset},
                     {"theta", theta ? json_number(*theta) : json(nullptr)}};
    write_file(dir / (variant.name + ".trajectory.json"), tj.dump(1) + "\n");
    json cj = to_json(cert);
    cj["variant"] = variant.name;
    cj["local_order"] = to_json(order);
    write_file(dir / (variant.name + ".certificate.json"), cj.dump(1) + "\n");
  }
  return finish();
}

}  // namespace

VariantSpec named_variant(const std::string& name) {
  VariantSpec v;
  v.name = name;
  if (name == "classical_example1" || name == "classical_example2") {
    v.p = 2.0;
  } else if (name == "cubic_example1" || name == "cubic_example2") {
    v.p = 3.0;
  } else {
    throw ConfigError("unknown variant name: " + name);
  }
  v.preset = name.back() == '1' ? "example1" : "example2";
  const PresetParams pp = preset(v.preset == "example1" ? 1 : 2, v.p);
  v.q = pp.q;
  v.theta = pp.theta;
  return v;
}

RunMatrixConfig parse_config_json(const json& j, const fs::path& base_dir) {
  if (!j.is_object()) throw ConfigError("config must be a JSON object");
  reject_unknown(j, {"problems", "variants", "output_dir", "jobs", "seed", "timings"}, "config");
  RunMatrixConfig config;
  if (j.contains("seed")) {
    if (!j.at("seed").is_number_unsigned()) throw ConfigError("seed must be a nonnegative integer");
    config.seed = j.at("seed").get<std::uint64_t>();
  }
  if (j.contains("problems")) {
    if (!j.at("problems").is_array()) throw ConfigError("problems must be an array");
    for (const json& p : j.at("problems")) config.problems.push_back(resolve_problem(p, base_dir, config.seed));
  }
  if (j.contains("variants")) {
    if (!j.at("variants").is_array()) throw ConfigError("variants must be an array");
    std::set<std::string> names;
    for (const json& v : j.at("variants")) {
      VariantSpec desc = parse_variant(v);
      if (!names.insert(desc.name).second) throw ConfigError("duplicate variant name: " + desc.name);
      config.variants.push_back(std::move(desc));
    }
  }
  if (j.contains("output_dir")) {
    if (!j.at("output_dir").is_string()) throw ConfigError("output_dir must be a string");
    const fs::path out = j.at("output_dir").get<std::string>();
    config.output_dir = out.is_absolute() || base_dir.empty() ? out : base_dir / out;
  }
  if (j.contains("jobs")) {
    if (!j.at("jobs").is_number_integer() || j.at("jobs").get<int>() < 0) {
      throw ConfigError("jobs must be a nonnegative integer");
    }
    config.jobs = j.at("jobs").get<int>();
  }
  if (j.contains("timings")) {
    if (!j.at("timings").is_boolean()) throw ConfigError("timings must be true or false");
    config.record_wall_time = j.at("timings").get<bool>();
  }
  return config;
}

RunMatrixConfig parse_config(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError("invalid JSON in " + path.string() + ": " + e.what());
  }
  return parse_config_json(j, path.parent_path());
}

std::string_view to_string(CellStatus s) {
  switch (s) {
    case CellStatus::ok:
      return "ok";
    case CellStatus::certificate_failure:
      return "certificate_failure";
    case CellStatus::solver_failure:
      return "solver_failure";
    case CellStatus::config_error:
      return "config_error";
  }
  return "unknown";
}

CellStatus cell_status_from_string(std::string_view s) {
  for (CellStatus c : {CellStatus::ok, CellStatus::certificate_failure, CellStatus::solver_failure,
                       CellStatus::config_error}) {
    if (to_string(c) == s) return c;
  }
  throw std::invalid_argument("unknown cell status: " + std::string(s));
}

SolverConfig solver_config_for(const VariantSpec& variant, const Objective& objective) {
  SolverConfig config;
  config.epsilon = variant.epsilon;
  config.max_outer_iterations = variant.max_outer;
  config.schedule.p = variant.p;
  config.schedule.q = variant.q;
  config.schedule.c2 = variant.c2;
  config.schedule.c1 = variant.c1.value_or(std::max(objective.metadata().L, 1e-3));
  config.schedule.n = objective.dimension();
  return config;
}

std::optional<double> certificate_theta(const VariantSpec& variant) { return variant.theta; }

CertificateReport certify(const Trajectory& trajectory, const Problem& problem, std::optional<double> theta) {
  std::vector<CheckResult> steps = check_step_invariants(trajectory);
  CertificateReport report;
  const ProblemMetadata& meta = problem.objective->metadata();
  if (theta && meta.has_f_star() && !trajectory.records.empty()) {
    const std::optional<double> R = problem.objective->sublevel_radius(trajectory.records.front().f);
    report = check_theorem1(trajectory, trajectory.config.schedule, *theta, meta, R);
  } else {
    report.note = "rate certificate skipped: no theta";
  }
  report.problem = problem.name;
  report.checks.insert(report.checks.begin(), std::make_move_iterator(steps.begin()),
                       std::make_move_iterator(steps.end()));
  return report;
}

RunSummary run_suite(const RunMatrixConfig& config, const SuiteOptions& options) {
  const fs::path out = options.output_dir.value_or(config.output_dir);
  if (options.write_artifacts) fs::create_directories(out);

  struct Loaded {
    std::optional<Problem> problem;
    std::string name;
    std::string error;
  };
  std::vector<Loaded> problems;
  for (std::size_t i = 0; i < config.problems.size(); ++i) {
    const json& desc = config.problems[i];
    Loaded l;
    l.name = desc.contains("name") && desc.at("name").is_string() ? desc.at("name").get<std::string>()
                                                                   : "problem" + std::to_string(i);
    try {
      l.problem = load_problem(desc);
      l.name = l.problem->name;
    } catch (const std::exception& e) {
      l.error = e.what();
    }
    problems.push_back(std::move(l));
  }

  struct Task {
    std::size_t problem;
    int variant;
  };
  std::vector<Task> tasks;
  for (std::size_t p = 0; p < problems.size(); ++p)
    for (int v = 0; v < static_cast<int>(config.variants.size()); ++v) tasks.push_back({p, v});

  std::vector<CellResult> cells(tasks.size());
  std::atomic<std::size_t> next{0};
  const auto worker = [&] {
    for (std::size_t t = next++; t < tasks.size(); t = next++) {
      const Loaded& l = problems[tasks[t].problem];
      const VariantSpec& v = config.variants[static_cast<std::size_t>(tasks[t].variant)];
      if (!l.problem) {
        CellResult c;
        c.problem = l.name;
        c.variant = v.name;
        c.variant_index = tasks[t].variant;
        c.status = CellStatus::config_error;
        c.message = l.error;
        cells[t] = std::move(c);
        continue;
      }
      try {
        cells[t] = run_cell(*l.problem, v, tasks[t].variant, out, options.write_artifacts, config.record_wall_time);
      } catch (const std::exception& e) {
        CellResult c;
        c.problem = l.name;
        c.variant = v.name;
        c.variant_index = tasks[t].variant;
        c.status = CellStatus::solver_failure;
        c.message = e.what();
        cells[t] = std::move(c);
      }
    }
  };
  int jobs = options.jobs > 0 ? options.jobs : config.jobs;
  if (jobs <= 0) jobs = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
  jobs = std::max(1, std::min<int>(jobs, static_cast<int>(tasks.size())));
  if (jobs == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int i = 0; i < jobs; ++i) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }

  RunSummary summary;
  summary.cells = std::move(cells);
  std::stable_sort(summary.cells.begin(), summary.cells.end(), [](const CellResult& a, const CellResult& b) {
    if (a.problem != b.problem) return a.problem < b.problem;
    return a.variant_index < b.variant_index;
  });
  if (options.write_artifacts) {
    write_file(out / "summary.csv", emit_report(summary, "csv"));
    write_file(out / "summary.txt", emit_report(summary, "text"));
    write_file(out / "summary.json", emit_report(summary, "json"));
  }
  return summary;
}

std::string emit_report(const RunSummary& summary, const std::string& format) {
  std::vector<CellResult> cells = summary.cells;
  std::stable_sort(cells.begin(), cells.end(), [](const CellResult& a, const CellResult& b) {
    if (a.problem != b.problem) return a.problem < b.problem;
    return a.variant_index < b.variant_index;
  });
  std::ostringstream out;
  if (format == "csv") {
    out << "problem,variant,iters,final_gap,final_grad,cert_pass,cert_fail,local_order,wall_ms\n";
    for (const auto& c : cells) {
      out << c.problem << ',' << c.variant << ',' << c.iters << ',' << cell_number(c.final_gap) << ','
          << cell_number(c.final_grad) << ',' << c.cert_pass << ',' << c.cert_fail << ','
          << cell_number(c.local_order) << ',' << cell_number(c.wall_ms) << '\n';
    }
  } else if (format == "json") {
    json rows = json::array();
    for (const auto& c : cells) {
      rows.push_back({{"problem", c.problem},
                      {"variant", c.variant},
                      {"variant_index", c.variant_index},
                      {"status", std::string(to_string(c.status))},
                      {"message", c.message},
                      {"iters", c.iters},
                      {"final_gap", json_number(c.final_gap)},
                      {"final_grad", json_number(c.final_grad)},
                      {"cert_pass", c.cert_pass},
                      {"cert_fail", c.cert_fail},
                      {"local_order", json_number(c.local_order)},
                      {"theorem_margin", json_number(c.theorem_margin)},
                      {"wall_ms", json_number(c.wall_ms)}});
    }
    out << json{{"cells", std::move(rows)}}.dump(1) << '\n';
  } else if (format == "text") {
    out << std::left << std::setw(24) << "problem" << std::setw(20) << "variant" << std::setw(21) << "status"
        << std::right << std::setw(6) << "iters" << std::setw(12) << "final_gap" << std::setw(12) << "final_grad"
        << std::setw(6) << "pass" << std::setw(6) << "fail" << std::setw(8) << "order" << std::setw(12)
        << "thm_margin" << std::setw(10) << "wall_ms" << '\n';
    for (const auto& c : cells) {
      out << std::left << std::setw(24) << c.problem << std::setw(20) << c.variant << std::setw(21)
          << to_string(c.status) << std::right << std::setw(6) << c.iters << std::setw(12) << text_number(c.final_gap)
          << std::setw(12) << text_number(c.final_grad) << std::setw(6) << c.cert_pass << std::setw(6) << c.cert_fail
          << std::setw(8) << text_number(c.local_order) << std::setw(12) << text_number(c.theorem_margin)
          << std::setw(10) << text_number(c.wall_ms) << '\n';
    }
    for (const auto& c : cells) {
      if (!c.message.empty()) out << c.problem << '/' << c.variant << ": " << c.message << '\n';
    }
  } else {
    throw std::invalid_argument("format must be text, csv or json");
  }
  return out.str();
}

RunSummary summary_from_json(const json& j) {
  RunSummary s;
  for (const json& r : j.at("cells")) {
    CellResult c;
    c.problem = r.at("problem").get<std::string>();
    c.variant = r.at("variant").get<std::string>();
    c.variant_index = r.at("variant_index").get<int>();
    c.status = cell_status_from_string(r.at("status").get<std::string>());
    c.message = r.at("message").get<std::string>();
    c.iters = r.at("iters").get<int>();
    c.final_gap = number_from_json(r.at("final_gap"));
    c.final_grad = number_from_json(r.at("final_grad"));
    c.cert_pass = r.at("cert_pass").get<int>();
    c.cert_fail = r.at("cert_fail").get<int>();
    c.local_order = number_from_json(r.at("local_order"));
    c.theorem_margin = number_from_json(r.at("theorem_margin"));
    c.wall_ms = number_from_json(r.at("wall_ms"));
    s.cells.push_back(std::move(c));
  }
  return s;
}

int exit_code(const RunSummary& summary) {
  bool config = false, solver = false, cert = false;
  for (const auto& c : summary.cells) {
    config |= c.status == CellStatus::config_error;
    solver |= c.status == CellStatus::solver_failure;
    cert |= c.status == CellStatus::certificate_failure;
  }
  if (config) return 2;
  if (solver) return 3;
  if (cert) return 1;
  return 0;
}

}  // namespace grnm
