#pragma once

#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "grnm/oracle.hpp"
#include "grnm/schedule.hpp"
#include "grnm/solver.hpp"

namespace grnm {

enum class CheckStatus { pass, fail, skip };

std::string_view to_string(CheckStatus s);

/// One named inequality evaluated over a range of iterations.
struct CheckResult {
  std::string name;
  CheckStatus status{CheckStatus::skip};
  int checked{0};
  int violations{0};
  std::optional<int> first_violation;
  /// Smallest allowed/observed ratio over the checked iterations; >= 1 when
  /// the inequality holds without slack. Infinite when nothing was measured.
  double margin{std::numeric_limits<double>::infinity()};
  std::string note;

  explicit CheckResult(std::string n = {}) : name(std::move(n)) {}
  void record(int k, bool ok, double ratio);
  void finish();
};

struct BoundPoint {
  int k{0};
  double gap{0};
  double bound{0};
  bool ok{false};
};

struct CertificateReport {
  std::string problem;
  double theta{0};
  double gamma{0};
  double delta{0};
  double tau{0};
  double nu{0};
  int ell{1};
  std::vector<int> I_theta;
  /// 'a': bound anchored after the last index of I(theta); 'b': the other.
  char bound_case{'b'};
  int i_hat{-1};
  std::vector<CheckResult> checks;
  std::vector<BoundPoint> bounds;
  /// min_k bound_k / (f(x_k) - f*) over points with a positive gap.
  double min_bound_margin{std::numeric_limits<double>::infinity()};
  double R{0};
  double D{0};
  bool empirical_R{false};
  std::string note;

  int pass_count() const;
  int fail_count() const;
  bool passed() const { return fail_count() == 0; }
};

/// {i : theta ||g_i|| <= ||g_{i+1}||} over consecutive records.
std::vector<int> index_set_I(const Trajectory& trajectory, double theta);

/// Hypotheses (i)-(v) and the rate bound of the applicable case. nu is the
/// minimal value for ell = 1; delta bounds f(x_k) - f* <= delta ||g_k||.
CertificateReport check_proposition1(const Trajectory& trajectory, double theta, double gamma, double delta,
                                     double tau, double f_star);

/// R defaults to sup_k ||x_k|| when not given; the report is then marked
/// empirical and only checks a necessary condition.
CertificateReport check_theorem1(const Trajectory& trajectory, const ScheduleConfig& schedule, double theta,
                                 const ProblemMetadata& metadata, std::optional<double> R);

/// Per-iteration step properties: d_k != 0, <g_k, d_k> < 0, inner residual,
/// the four descent/growth inequalities.
std::vector<CheckResult> check_step_invariants(const Trajectory& trajectory);

struct LocalRateEstimate {
  bool conclusive{false};
  double order{std::numeric_limits<double>::quiet_NaN()};
  /// Record indices [begin, end] whose errors were used.
  int window_begin{-1};
  int window_end{-1};
  std::vector<double> errors;
  std::vector<double> ratios;
  std::string note;
};

/// Median of log(e_{k+2}/e_{k+1}) / log(e_{k+1}/e_k) over the last usable
/// errors in (100 eps, 1e-2]; inconclusive below three consecutive ones.
LocalRateEstimate estimate_local_order(std::span<const double> errors);

/// Errors are dist(x_k, X*) from the objective.
LocalRateEstimate estimate_local_order(const Trajectory& trajectory, const Objective& objective);

struct Lemma3Report {
  int samples{0};
  double min_ratio{std::numeric_limits<double>::infinity()};
  double max_ratio{0};
  bool lower_ok{false};
  bool upper_ok{false};
  bool ok() const { return lower_ok && upper_ok; }
};

/// ||d_k|| / dist(x_k, X*) over the last `tail` steps.
Lemma3Report check_lemma3_constants(const Trajectory& trajectory, const Objective& objective, int tail = 10);

}  // namespace grnm
