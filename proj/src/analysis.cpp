#include "grnm/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace grnm {

namespace {

constexpr double kEps = std::numeric_limits<double>::epsilon();

double ratio_of(double allowed, double observed) {
  if (!(observed > 0.0)) return std::numeric_limits<double>::infinity();
  return allowed / observed;
}

double positive_gap(double f, double f_star) { return std::max(f - f_star, 0.0); }

}  // namespace

std::string_view to_string(CheckStatus s) {
  switch (s) {
    case CheckStatus::pass:
      return "pass";
    case CheckStatus::fail:
      return "fail";
    case CheckStatus::skip:
      return "skip";
  }
  return "unknown";
}

void CheckResult::record(int k, bool ok, double ratio) {
  ++checked;
  if (!ok) {
    ++violations;
    if (!first_violation) first_violation = k;
  }
  if (!std::isnan(ratio)) margin = std::min(margin, ratio);
}

void CheckResult::finish() {
  status = violations > 0 ? CheckStatus::fail : (checked > 0 ? CheckStatus::pass : CheckStatus::skip);
}

int CertificateReport::pass_count() const {
  return static_cast<int>(std::count_if(checks.begin(), checks.end(),
                                        [](const CheckResult& c) { return c.status == CheckStatus::pass; }));
}

int CertificateReport::fail_count() const {
  return static_cast<int>(std::count_if(checks.begin(), checks.end(),
                                        [](const CheckResult& c) { return c.status == CheckStatus::fail; }));
}

std::vector<int> index_set_I(const Trajectory& trajectory, double theta) {
  std::vector<int> out;
  const auto& r = trajectory.records;
  for (std::size_t i = 0; i + 1 < r.size(); ++i) {
    if (theta * r[i].grad_norm <= r[i + 1].grad_norm) out.push_back(static_cast<int>(i));
  }
  return out;
}

CertificateReport check_proposition1(const Trajectory& trajectory, double theta, double gamma, double delta,
                                     double tau, double f_star) {
  if (!std::isfinite(f_star)) throw std::invalid_argument("f_star is required");
  if (!(theta > 0.0 && theta < 1.0)) throw std::invalid_argument("theta must lie in (0,1)");
  if (!(delta > 0.0) || !(tau > 0.0) || !(gamma > 0.0)) {
    throw std::invalid_argument("gamma, delta and tau must be positive");
  }
  const auto& r = trajectory.records;
  const int N = static_cast<int>(r.size());

  CertificateReport rep;
  rep.problem = trajectory.problem;
  rep.theta = theta;
  rep.gamma = gamma;
  rep.delta = delta;
  rep.tau = tau;
  rep.I_theta = index_set_I(trajectory, theta);

  CheckResult monotone("hypothesis_i_monotone"), growth("hypothesis_ii_growth"),
      gap_bound("hypothesis_iii_gap_vs_gradient"), nu_check("hypothesis_iv_nu"),
      decrease("hypothesis_v_sufficient_decrease"), bound("rate_bound");

  for (int k = 0; k + 1 < N; ++k) {
    const double floor_v = r[k].noise.value + r[k + 1].noise.value;
    const double floor_g = r[k].noise.gradient + r[k + 1].noise.gradient;
    monotone.record(k, within_slack(r[k + 1].f, r[k].f, floor_v), std::numeric_limits<double>::quiet_NaN());
    const double allowed = gamma * r[k].grad_norm;
    growth.record(k, within_slack(r[k + 1].grad_norm, allowed, floor_g), ratio_of(allowed, r[k + 1].grad_norm));
  }
  for (int k = 0; k < N; ++k) {
    const double gap = positive_gap(r[k].f, f_star);
    const double allowed = delta * r[k].grad_norm;
    const double floor = 2.0 * r[k].noise.value + delta * r[k].noise.gradient;
    gap_bound.record(k, within_slack(gap, allowed, floor), ratio_of(allowed, gap));
  }

  const std::optional<double> nu = minimal_nu(theta, gamma);
  nu_check.record(0, nu.has_value(), std::numeric_limits<double>::quiet_NaN());
  if (!nu) nu_check.note = "no finite nu: need gamma * theta < 1";
  rep.nu = nu.value_or(std::numeric_limits<double>::quiet_NaN());
  rep.ell = 1;

  for (const int k : rep.I_theta) {
    const double gap = positive_gap(r[k].f, f_star);
    const double required = tau * std::pow(gap, 1.5);
    const double floor_v = r[k].noise.value + r[k + 1].noise.value;
    decrease.record(k, within_slack(r[k + 1].f - r[k].f, -required, floor_v), ratio_of(r[k].f - r[k + 1].f, required));
  }

  rep.i_hat = rep.I_theta.empty() ? -1 : rep.I_theta.back();
  const int a_start = std::max(rep.ell, rep.i_hat + 2);
  rep.bound_case = a_start <= N - 1 ? 'a' : 'b';
  if (nu) {
    const int start = rep.bound_case == 'a' ? a_start : rep.ell;
    const double g_anchor = rep.bound_case == 'a' ? r[rep.i_hat + 1].grad_norm : r[0].grad_norm;
    for (int k = start; k < N; ++k) {
      const double kk = static_cast<double>(k);
      double b;
      if (rep.bound_case == 'a') {
        b = std::pow(theta, -(rep.i_hat + 1.0)) * *nu * delta * g_anchor / (kk * kk);
      } else {
        b = std::max(36.0 / (tau * tau * (kk + 4.0) * (kk + 4.0)), *nu * delta * g_anchor / (kk * kk));
      }
      const double gap = positive_gap(r[k].f, f_star);
      const bool ok = within_slack(gap, b, 2.0 * r[k].noise.value);
      rep.bounds.push_back({k, gap, b, ok});
      bound.record(k, ok, ratio_of(b, gap));
      if (gap > 0.0) rep.min_bound_margin = std::min(rep.min_bound_margin, b / gap);
    }
  } else {
    bound.note = "no finite nu";
  }

  for (CheckResult* c : {&monotone, &growth, &gap_bound, &nu_check, &decrease, &bound}) {
    c->finish();
    rep.checks.push_back(std::move(*c));
  }
  if (rep.checks.back().status == CheckStatus::skip && !nu) rep.checks.back().status = CheckStatus::fail;
  return rep;
}

CertificateReport check_theorem1(const Trajectory& trajectory, const ScheduleConfig& schedule, double theta,
                                 const ProblemMetadata& metadata, std::optional<double> R) {
  if (!metadata.has_f_star()) throw std::invalid_argument("f_star is required");
  if (trajectory.records.empty()) throw std::invalid_argument("empty trajectory");
  const double p = schedule.p, q = schedule.q;

  bool empirical = false;
  double radius = 0.0;
  if (R) {
    radius = *R;
  } else {
    empirical = true;
    for (const auto& rec : trajectory.records) radius = std::max(radius, rec.x.norm());
    radius = std::max(radius, 1e-12);
  }

  CheckResult assumptions("assumptions_A4_A6");
  const AssumptionReport a = validate_assumptions(p, q, theta);
  assumptions.record(0, a.ok(), std::numeric_limits<double>::quiet_NaN());
  if (!a.ok()) {
    assumptions.note = std::string(a.ok_a4 ? "" : "(A4) fails; ") + (a.ok_a6 ? "" : "(A6) fails");
  }
  assumptions.finish();

  if (!a.ok_a4 || !(theta > q)) {
    CertificateReport rep;
    rep.problem = trajectory.problem;
    rep.theta = theta;
    rep.R = radius;
    rep.empirical_R = empirical;
    rep.note = "constants undefined for these parameters";
    rep.checks.push_back(std::move(assumptions));
    return rep;
  }

  const TheoremConstants tc = theorem1_constants(p, q, theta, schedule.c1, radius, metadata.x_star);
  CertificateReport rep = check_proposition1(trajectory, theta, growth_constant(p, q), tc.D, tc.tau, metadata.f_star);
  rep.R = radius;
  rep.D = tc.D;
  rep.empirical_R = empirical;
  if (empirical) rep.note = "empirical-R: necessary-condition check only";
  rep.checks.insert(rep.checks.begin(), std::move(assumptions));
  if (!empirical) {
    CheckResult inside("sublevel_radius");
    for (const auto& rec : trajectory.records) {
      const double norm = rec.x.norm();
      inside.record(rec.k, within_slack(norm, radius, 0.0), ratio_of(radius, norm));
    }
    inside.finish();
    rep.checks.push_back(std::move(inside));
  }
  return rep;
}

std::vector<CheckResult> check_step_invariants(const Trajectory& trajectory) {
  const auto& r = trajectory.records;
  const ScheduleConfig& schedule = trajectory.config.schedule;
  CheckResult nonzero("lemma1_nonzero_step"), descent("lemma1_descent_direction"), residual("inner_residual"),
      a("lemma2_a_decrease"), b("lemma2_b_gradient"), c("lemma2_c_growth"), step("step_norm_bound");
  const bool a4 = descent_constant(schedule.p, schedule.q) > 0.0;
  const auto nan = std::numeric_limits<double>::quiet_NaN();
  for (std::size_t i = 0; i < r.size(); ++i) {
    const IterationRecord& rec = r[i];
    if (!rec.has_step) continue;
    nonzero.record(rec.k, rec.d_norm > 0.0, nan);
    descent.record(rec.k, rec.directional_derivative < 0.0, nan);
    residual.record(rec.k, rec.inner_residual <= rec.inner_tolerance,
                    ratio_of(rec.inner_tolerance, rec.inner_residual));
    if (i + 1 >= r.size() || !a4) continue;
    const Lemma2Report l = assert_lemma2(rec, r[i + 1], schedule);
    a.record(rec.k, l.decrease_ok, ratio_of(-l.decrease, -l.decrease_bound));
    b.record(rec.k, l.gradient_bound_ok, ratio_of(l.gradient_bound, l.gradient));
    c.record(rec.k, l.growth_ok, ratio_of(l.growth_bound, l.gradient));
    step.record(rec.k, l.step_norm_ok, ratio_of(l.step_norm_bound, l.step_norm));
  }
  std::vector<CheckResult> out;
  for (CheckResult* x : {&nonzero, &descent, &residual, &a, &b, &c, &step}) {
    x->finish();
    out.push_back(std::move(*x));
  }
  if (!a4) {
    for (auto& x : out) {
      if (x.name.rfind("lemma2", 0) == 0 || x.name == "step_norm_bound") x.note = "q violates (A4)";
    }
  }
  return out;
}

LocalRateEstimate estimate_local_order(std::span<const double> errors) {
  LocalRateEstimate est;
  est.errors.assign(errors.begin(), errors.end());
  const double lo = 100.0 * kEps, hi = 1e-2 * (1.0 + 1e-9);
  const auto usable = [&](double e) { return std::isfinite(e) && e > lo && e <= hi; };
  int end = static_cast<int>(errors.size()) - 1;
  while (end >= 0 && !usable(errors[end])) --end;
  int begin = end;
  while (begin - 1 >= 0 && usable(errors[begin - 1]) && end - (begin - 1) < 7) --begin;
  if (end < 0 || end - begin + 1 < 3) {
    est.note = "fewer than three consecutive errors in (100 eps, 1e-2]";
    return est;
  }
  est.window_begin = begin;
  est.window_end = end;
  for (int k = begin; k + 2 <= end; ++k) {
    const double den = std::log(errors[k + 1] / errors[k]);
    if (den == 0.0) continue;
    est.ratios.push_back(std::log(errors[k + 2] / errors[k + 1]) / den);
  }
  if (est.ratios.empty()) {
    est.note = "errors stalled inside the window";
    return est;
  }
  std::vector<double> sorted = est.ratios;
  std::sort(sorted.begin(), sorted.end());
  const std::size_t m = sorted.size();
  est.order = m % 2 == 1 ? sorted[m / 2] : 0.5 * (sorted[m / 2 - 1] + sorted[m / 2]);
  est.conclusive = true;
  return est;
}

LocalRateEstimate estimate_local_order(const Trajectory& trajectory, const Objective& objective) {
  std::vector<double> errors;
  errors.reserve(trajectory.records.size());
  for (const auto& rec : trajectory.records) errors.push_back(objective.distance_to_solutions(rec.x));
  LocalRateEstimate est = estimate_local_order(errors);
  if (trajectory.records.empty() || !(trajectory.records.back().grad_norm <= 1e-8)) {
    est.conclusive = false;
    est.note = "run did not reach ||grad f|| <= 1e-8";
  }
  return est;
}

Lemma3Report check_lemma3_constants(const Trajectory& trajectory, const Objective& objective, int tail) {
  Lemma3Report rep;
  const auto& r = trajectory.records;
  const double floor = 100.0 * kEps * std::max(1.0, objective.metadata().x_star.norm());
  int taken = 0;
  for (auto it = r.rbegin(); it != r.rend() && taken < tail; ++it) {
    if (!it->has_step) continue;
    ++taken;
    const double dist = objective.distance_to_solutions(it->x);
    if (!(dist > floor)) continue;
    const double ratio = it->d_norm / dist;
    ++rep.samples;
    rep.min_ratio = std::min(rep.min_ratio, ratio);
    rep.max_ratio = std::max(rep.max_ratio, ratio);
  }
  rep.lower_ok = rep.samples > 0 && rep.min_ratio > 0.0;
  rep.upper_ok = rep.samples > 0 && std::isfinite(rep.max_ratio);
  return rep;
}

}  // namespace grnm
