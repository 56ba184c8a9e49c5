#include "grnm/schedule.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace grnm {

namespace {

constexpr double kRangeTol = 1e-12;

double example2_q1(double p) { return 0.1 * (std::pow(2.0, (p - 1.0) / (3.0 - p)) - 1.0); }
double example2_q2(double p) { return 0.05 * std::pow(2.0, (3.0 - p) / (p - 1.0)); }

void require_p(double p) {
  if (!(p > 1.0 && p <= 3.0)) throw std::invalid_argument("p must lie in (1,3]");
}

// max over integers k >= 1 of k^2 a^k, a in (0,1); unimodal with its real
// maximizer at 2 / ln(1/a).
double max_k2_power(double a) {
  const double peak = 2.0 / std::log(1.0 / a);
  const auto term = [a](double k) { return std::exp(2.0 * std::log(k) + k * std::log(a)); };
  if (peak > 1e7) {
    const double lo = std::max(1.0, std::floor(peak));
    return std::max(term(lo), term(lo + 1.0));
  }
  double best = 0.0, prev = 0.0;
  int decreases = 0;
  for (double k = 1.0;; k += 1.0) {
    const double v = term(k);
    best = std::max(best, v);
    decreases = (k > 1.0 && v < prev) ? decreases + 1 : 0;
    if (k > peak && decreases >= 2) break;
    prev = v;
  }
  return best;
}

}  // namespace

MuRho mu_rho(double grad_norm, const ScheduleConfig& config) {
  if (!(grad_norm > 0.0)) throw std::invalid_argument("mu_rho needs a positive gradient norm");
  if (config.n <= 0) throw std::invalid_argument("schedule dimension n must be positive");
  const double p = config.p;
  MuRho out;
  out.mu = std::pow(config.c1, (p - 1.0) / 2.0) * std::pow(grad_norm, (3.0 - p) / 2.0);
  const double linear = config.q / std::sqrt(static_cast<double>(config.n)) * grad_norm;
  const double power = config.c2 * std::pow(grad_norm, (p + 1.0) / 2.0);
  out.rho = std::min(linear, power);
  return out;
}

void validate_schedule(const ScheduleConfig& config) {
  require_p(config.p);
  if (!(config.c1 > 0.0)) throw std::invalid_argument("c1 must be positive (and at least L) per (A2)");
  if (!(config.c2 > 0.0 && config.c2 < 1.0)) throw std::invalid_argument("c2 must lie in (0,1) per (A2)");
  if (!(config.q >= 0.0)) throw std::invalid_argument("q must be nonnegative per (A2)");
}

PresetParams preset(int example, double p) {
  require_p(p);
  switch (example) {
    case 1:
      return {0.0, 3.0 / 8.0};
    case 2: {
      const double q = p == 3.0 ? 1.0 / 20.0 : std::min(example2_q1(p), example2_q2(p));
      return {q, 1.0 / 5.0};
    }
    default:
      throw std::invalid_argument("preset example must be 1 or 2");
  }
}

double descent_constant(double p, double q) { return 3.0 - std::pow(1.0 + q, (3.0 - p) / (p - 1.0)); }

double growth_constant(double p, double q) { return 1.0 + 2.0 * q + std::pow(1.0 + q, 2.0 / (p - 1.0)); }

double gradient_bound_factor(double p, double q) { return 1.0 + std::pow(1.0 + q, (3.0 - p) / (p - 1.0)); }

std::optional<double> minimal_nu(double theta, double gamma) {
  if (!(theta > 0.0 && theta < 1.0) || !(gamma * theta < 1.0) || !(gamma > 0.0)) return std::nullopt;
  return std::max(max_k2_power(theta), max_k2_power(std::sqrt(gamma * theta)));
}

AssumptionReport validate_assumptions(double p, double q, double theta) {
  require_p(p);
  if (!(q >= 0.0)) throw std::invalid_argument("q must be nonnegative");
  if (!(theta > 0.0 && theta < 1.0)) throw std::invalid_argument("theta must lie in (0,1)");
  AssumptionReport r;
  r.s = descent_constant(p, q);
  r.gamma = growth_constant(p, q);
  r.ok_a4 = r.s > 0.0;
  r.ok_a5 = r.gamma >= 1.0;
  if (theta > q && r.gamma * theta < 1.0) {
    r.nu = minimal_nu(theta, r.gamma);
    r.ok_a6 = r.nu.has_value();
  }
  return r;
}

double tau_constant(double p, double q, double theta, double c1, double D) {
  require_p(p);
  if (!(theta > q)) throw std::invalid_argument("theta must exceed q");
  if (!(theta < 1.0)) throw std::invalid_argument("theta must be below 1");
  if (!(c1 > 0.0)) throw std::invalid_argument("c1 must be positive");
  if (!(D > 0.0)) throw std::invalid_argument("D must be positive");
  const double s = descent_constant(p, q);
  if (!(s > 0.0)) throw std::invalid_argument("q violates (A4): 3 - (1+q)^((3-p)/(p-1)) must be positive");
  const double e = p / (p - 1.0);
  return std::pow(theta - q, e) * s /
         (3.0 * std::sqrt(c1) * std::pow(D, 1.5) * std::pow(gradient_bound_factor(p, q), e));
}

TheoremConstants theorem1_constants(double p, double q, double theta, double c1, double R,
                                    const VectorXd& x_star) {
  if (!(R > 0.0)) throw std::invalid_argument("R must be positive");
  TheoremConstants c;
  c.D = R + x_star.norm();
  c.tau = tau_constant(p, q, theta, c1, c.D);
  return c;
}

std::vector<double> default_p_grid() {
  std::vector<double> grid;
  for (int i = 101; i <= 300; ++i) grid.push_back(i / 100.0);
  return grid;
}

MonotonicityReport monotonicity_scan(std::span<const double> p_grid) {
  MonotonicityReport r;
  const double theta = 0.2;
  r.s_min = std::numeric_limits<double>::infinity();
  r.theta_t_min = std::numeric_limits<double>::infinity();
  r.theta_t_max = -std::numeric_limits<double>::infinity();
  double prev_q1 = 0, prev_q2 = 0, prev_t1 = 0, prev_t2 = 0;
  bool have_1 = false, have_2 = false;
  for (const double p : p_grid) {
    require_p(p);
    ++r.points;
    const double q = preset(2, p).q;
    const double s = descent_constant(p, q);
    const double t = growth_constant(p, q);
    if (p <= 2.0) {
      const double q1 = example2_q1(p), t1 = growth_constant(p, q1);
      if (have_1 && !(q1 > prev_q1)) r.q1_increasing = false;
      if (have_1 && !(t1 > prev_t1)) r.t1_increasing = false;
      if (q != q1) r.q_branches_consistent = false;
      prev_q1 = q1;
      prev_t1 = t1;
      have_1 = true;
    } else {
      const double q2 = example2_q2(p), t2 = growth_constant(p, q2);
      if (have_2 && !(q2 < prev_q2)) r.q2_decreasing = false;
      if (have_2 && !(t2 < prev_t2)) r.t2_decreasing = false;
      if (q != q2) r.q_branches_consistent = false;
      prev_q2 = q2;
      prev_t2 = t2;
      have_2 = true;
    }
    if (!(q > 0.0 && q <= 0.1 * (1.0 + kRangeTol))) r.q_positive_and_bounded = false;
    if (q > r.q_max) {
      r.q_max = q;
      r.q_max_at = p;
    }
    if (!(s > 1.0)) r.s_above_one = false;
    r.s_min = std::min(r.s_min, s);
    const double tt = theta * t;
    if (!(tt >= 0.2 * (1.0 - kRangeTol) && tt <= 241.0 / 500.0 * (1.0 + kRangeTol))) r.theta_t_in_range = false;
    r.theta_t_min = std::min(r.theta_t_min, tt);
    r.theta_t_max = std::max(r.theta_t_max, tt);
  }
  return r;
}

}  // namespace grnm
