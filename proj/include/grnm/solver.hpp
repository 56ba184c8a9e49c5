#pragma once

#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "grnm/oracle.hpp"
#include "grnm/schedule.hpp"
#include "grnm/types.hpp"

namespace grnm {

struct SolverConfig {
  /// Stop once ||grad f(x_k)|| <= epsilon.
  double epsilon{1e-8};
  int max_outer_iterations{500};
  ScheduleConfig schedule;
  /// Inner tolerance min(cap, scale * ||g||^{(p+1)/2}).
  double inner_tolerance_cap{1e-10};
  double inner_tolerance_scale{1e-3};
  int max_inner_iterations{100000};
  /// Check the per-step descent/growth inequalities while iterating and throw
  /// std::logic_error on a violation.
  bool debug_assertions{false};
  bool allow_c1_below_L{false};
  /// q >= 1 can push rho_k up to ||g||_inf; refused unless set.
  bool allow_unsafe_q{false};
  /// Off by default so that trajectories are byte-reproducible.
  bool record_wall_time{false};
};

double inner_tolerance(const SolverConfig& config, double grad_norm);

struct IterationRecord {
  int k{0};
  VectorXd x;
  double f{0};
  double grad_norm{0};
  double grad_inf_norm{0};
  EvaluationNoise noise;

  /// False on the final record, where no subproblem was solved.
  bool has_step{false};
  double mu{0};
  double rho{0};
  VectorXd d;
  double d_norm{0};
  /// <grad f(x_k), d_k>
  double directional_derivative{0};
  double inner_residual{0};
  double inner_tolerance{0};
  int inner_iterations{0};
  double subproblem_objective{0};
  double wall_time_ms{0};
};

enum class Termination { converged, max_iter, inner_failure };

std::string_view to_string(Termination t);
Termination termination_from_string(std::string_view s);

struct Trajectory {
  std::string problem;
  SolverConfig config;
  std::vector<IterationRecord> records;
  Termination termination{Termination::max_iter};
  std::string message;
};

/// Invalid or unsafe solver configuration.
class ConfigurationError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Generalized regularized Newton iteration with unit steps x_{k+1} = x_k + d_k.
/// Inner-solver failures end the run with Termination::inner_failure and keep
/// the trajectory; configuration problems throw ConfigurationError.
Trajectory run(const Objective& objective, const VectorXd& x0, const SolverConfig& config,
               std::string problem = {});

struct Lemma2Report {
  /// f(x_{k+1}) - f(x_k) <= -(s/3) mu_k ||d_k||^p
  bool decrease_ok{false};
  /// ||g_{k+1}|| <= (1 + (1+q)^{(3-p)/(p-1)}) mu_k ||d_k||^{p-1}
  ///               + min{q ||g_k||, sqrt(n) c2 ||g_k||^{(p+1)/2}}
  bool gradient_bound_ok{false};
  /// ||g_{k+1}|| <= gamma ||g_k||
  bool growth_ok{false};
  /// ||d_k|| <= (1+q)^{1/(p-1)} sqrt(||g_k||) / sqrt(c1)
  bool step_norm_ok{false};

  double decrease{0}, decrease_bound{0};
  double gradient{0}, gradient_bound{0};
  double growth_bound{0};
  double step_norm{0}, step_norm_bound{0};

  bool ok() const { return decrease_ok && gradient_bound_ok && growth_ok && step_norm_ok; }
};

/// Relative slack 1e-6 plus the evaluation noise of the two records and the
/// inner stationarity residual.
Lemma2Report assert_lemma2(const IterationRecord& current, const IterationRecord& next,
                           const ScheduleConfig& schedule);

/// lhs <= rhs up to a relative slack and an absolute floor.
bool within_slack(double lhs, double rhs, double floor, double relative = 1e-6);

}  // namespace grnm
