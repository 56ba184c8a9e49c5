#include "grnm/serialize.hpp"

#include <charconv>
#include <cmath>
#include <iomanip>
#include <limits>
#include <ostream>
#include <sstream>
#include <stdexcept>

namespace grnm {

using nlohmann::json;

std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

json json_number(double v) {
  if (std::isfinite(v)) return v;
  return format_double(v);
}

double number_from_json(const json& j) {
  if (j.is_number()) return j.get<double>();
  if (j.is_string()) {
    const auto& s = j.get_ref<const std::string&>();
    if (s == "inf") return std::numeric_limits<double>::infinity();
    if (s == "-inf") return -std::numeric_limits<double>::infinity();
    if (s == "nan") return std::numeric_limits<double>::quiet_NaN();
  }
  if (j.is_null()) return std::numeric_limits<double>::quiet_NaN();
  throw std::invalid_argument("expected a number, got " + j.dump());
}

namespace {

json vector_json(const VectorXd& v) {
  json a = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(json_number(v(i)));
  return a;
}

VectorXd vector_from(const json& j) {
  VectorXd v(static_cast<Eigen::Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) v(static_cast<Eigen::Index>(i)) = number_from_json(j[i]);
  return v;
}

std::string cell(double v) { return format_double(v); }

}  // namespace

json to_json(const SolverConfig& c) {
  return {{"epsilon", json_number(c.epsilon)},
          {"max_outer_iterations", c.max_outer_iterations},
          {"schedule",
           {{"p", c.schedule.p}, {"c1", c.schedule.c1}, {"c2", c.schedule.c2}, {"q", c.schedule.q}, {"n", c.schedule.n}}},
          {"inner_tolerance_cap", c.inner_tolerance_cap},
          {"inner_tolerance_scale", c.inner_tolerance_scale},
          {"max_inner_iterations", c.max_inner_iterations},
          {"allow_c1_below_L", c.allow_c1_below_L},
          {"allow_unsafe_q", c.allow_unsafe_q},
          {"record_wall_time", c.record_wall_time}};
}

SolverConfig solver_config_from_json(const json& j) {
  SolverConfig c;
  c.epsilon = number_from_json(j.at("epsilon"));
  c.max_outer_iterations = j.at("max_outer_iterations").get<int>();
  const json& s = j.at("schedule");
  c.schedule.p = number_from_json(s.at("p"));
  c.schedule.c1 = number_from_json(s.at("c1"));
  c.schedule.c2 = number_from_json(s.at("c2"));
  c.schedule.q = number_from_json(s.at("q"));
  c.schedule.n = s.at("n").get<Eigen::Index>();
  c.inner_tolerance_cap = number_from_json(j.at("inner_tolerance_cap"));
  c.inner_tolerance_scale = number_from_json(j.at("inner_tolerance_scale"));
  c.max_inner_iterations = j.at("max_inner_iterations").get<int>();
  c.allow_c1_below_L = j.value("allow_c1_below_L", false);
  c.allow_unsafe_q = j.value("allow_unsafe_q", false);
  c.record_wall_time = j.value("record_wall_time", false);
  return c;
}

json to_json(const Trajectory& t) {
  json records = json::array();
  for (const auto& r : t.records) {
    records.push_back({{"k", r.k},
                       {"x", vector_json(r.x)},
                       {"f", json_number(r.f)},
                       {"grad_norm", json_number(r.grad_norm)},
                       {"grad_inf_norm", json_number(r.grad_inf_norm)},
                       {"noise", {{"value", json_number(r.noise.value)}, {"gradient", json_number(r.noise.gradient)}}},
                       {"has_step", r.has_step},
                       {"mu", json_number(r.mu)},
                       {"rho", json_number(r.rho)},
                       {"d", vector_json(r.d)},
                       {"d_norm", json_number(r.d_norm)},
                       {"directional_derivative", json_number(r.directional_derivative)},
                       {"inner_residual", json_number(r.inner_residual)},
                       {"inner_tolerance", json_number(r.inner_tolerance)},
                       {"inner_iterations", r.inner_iterations},
                       {"subproblem_objective", json_number(r.subproblem_objective)},
                       {"wall_time_ms", json_number(r.wall_time_ms)}});
  }
  return {{"problem", t.problem},
          {"termination", std::string(to_string(t.termination))},
          {"message", t.message},
          {"config", to_json(t.config)},
          {"records", std::move(records)}};
}

Trajectory trajectory_from_json(const json& j) {
  Trajectory t;
  t.problem = j.value("problem", std::string{});
  t.termination = termination_from_string(j.at("termination").get<std::string>());
  t.message = j.value("message", std::string{});
  t.config = solver_config_from_json(j.at("config"));
  for (const json& r : j.at("records")) {
    IterationRecord rec;
    rec.k = r.at("k").get<int>();
    rec.x = vector_from(r.at("x"));
    rec.f = number_from_json(r.at("f"));
    rec.grad_norm = number_from_json(r.at("grad_norm"));
    rec.grad_inf_norm = number_from_json(r.at("grad_inf_norm"));
    rec.noise.value = number_from_json(r.at("noise").at("value"));
    rec.noise.gradient = number_from_json(r.at("noise").at("gradient"));
    rec.has_step = r.at("has_step").get<bool>();
    rec.mu = number_from_json(r.at("mu"));
    rec.rho = number_from_json(r.at("rho"));
    rec.d = vector_from(r.at("d"));
    rec.d_norm = number_from_json(r.at("d_norm"));
    rec.directional_derivative = number_from_json(r.at("directional_derivative"));
    rec.inner_residual = number_from_json(r.at("inner_residual"));
    rec.inner_tolerance = number_from_json(r.at("inner_tolerance"));
    rec.inner_iterations = r.at("inner_iterations").get<int>();
    rec.subproblem_objective = number_from_json(r.at("subproblem_objective"));
    rec.wall_time_ms = number_from_json(r.at("wall_time_ms"));
    t.records.push_back(std::move(rec));
  }
  return t;
}

void write_trajectory_csv(std::ostream& out, const Trajectory& t) {
  out << "k,f,grad_norm,mu,rho,d_norm,inner_residual,wall_time_ms\n";
  for (const auto& r : t.records) {
    out << r.k << ',' << cell(r.f) << ',' << cell(r.grad_norm) << ',';
    if (r.has_step) {
      out << cell(r.mu) << ',' << cell(r.rho) << ',' << cell(r.d_norm) << ',' << cell(r.inner_residual);
    } else {
      out << ",,,";
    }
    out << ',' << cell(r.wall_time_ms) << '\n';
  }
}

json to_json(const CheckResult& c) {
  json j = {{"name", c.name},
            {"status", std::string(to_string(c.status))},
            {"checked", c.checked},
            {"violations", c.violations},
            {"first_violation", c.first_violation ? json(*c.first_violation) : json(nullptr)},
            {"margin", json_number(c.margin)}};
  if (!c.note.empty()) j["note"] = c.note;
  return j;
}

json to_json(const CertificateReport& r) {
  json checks = json::array();
  for (const auto& c : r.checks) checks.push_back(to_json(c));
  json bounds = json::array();
  for (const auto& b : r.bounds) {
    bounds.push_back({{"k", b.k}, {"gap", json_number(b.gap)}, {"bound", json_number(b.bound)}, {"ok", b.ok}});
  }
  return {{"problem", r.problem},
          {"passed", r.passed()},
          {"pass_count", r.pass_count()},
          {"fail_count", r.fail_count()},
          {"theta", json_number(r.theta)},
          {"constants",
           {{"gamma", json_number(r.gamma)},
            {"delta", json_number(r.delta)},
            {"tau", json_number(r.tau)},
            {"nu", json_number(r.nu)},
            {"ell", r.ell},
            {"R", json_number(r.R)},
            {"D", json_number(r.D)}}},
          {"empirical_R", r.empirical_R},
          {"I_theta", r.I_theta},
          {"case", std::string(1, r.bound_case)},
          {"i_hat", r.i_hat},
          {"min_bound_margin", json_number(r.min_bound_margin)},
          {"note", r.note},
          {"checks", std::move(checks)},
          {"bounds", std::move(bounds)}};
}

json to_json(const LocalRateEstimate& e) {
  json errors = json::array();
  for (double v : e.errors) errors.push_back(json_number(v));
  json ratios = json::array();
  for (double v : e.ratios) ratios.push_back(json_number(v));
  return {{"conclusive", e.conclusive},
          {"order", json_number(e.order)},
          {"window", {e.window_begin, e.window_end}},
          {"ratios", std::move(ratios)},
          {"errors", std::move(errors)},
          {"note", e.note}};
}

std::string certificate_table(const CertificateReport& r) {
  std::ostringstream out;
  out << std::left << std::setw(36) << "check" << std::setw(8) << "status" << std::setw(20) << "first-violation-k"
      << "margin\n";
  for (const auto& c : r.checks) {
    out << std::setw(36) << c.name << std::setw(8) << to_string(c.status) << std::setw(20)
        << (c.first_violation ? std::to_string(*c.first_violation) : std::string("-"))
        << (std::isinf(c.margin) ? std::string("-") : format_double(c.margin)) << '\n';
  }
  return out.str();
}

}  // namespace grnm
