#pragma once

#include <optional>
#include <span>
#include <vector>

#include "grnm/types.hpp"

namespace grnm {

/// Parameter rule
///   mu_k  = c1^{(p-1)/2} ||g_k||^{(3-p)/2}
///   rho_k = min{ (q / sqrt(n)) ||g_k||, c2 ||g_k||^{(p+1)/2} }
/// with c1 >= L, c2 in (0,1), q >= 0.
struct ScheduleConfig {
  double p{3.0};
  double c1{1.0};
  double c2{0.5};
  double q{0.0};
  /// Problem dimension; 0 means "take it from the objective".
  Eigen::Index n{0};
};

struct MuRho {
  double mu{0};
  double rho{0};
};

MuRho mu_rho(double grad_norm, const ScheduleConfig& config);

/// Throws std::invalid_argument naming the violated range.
void validate_schedule(const ScheduleConfig& config);

struct PresetParams {
  double q{0};
  double theta{0};
};

/// Example 1: (q, theta) = (0, 3/8).
/// Example 2: q = min{(2^{(p-1)/(3-p)} - 1)/10, 2^{(3-p)/(p-1)}/20}, theta = 1/5;
/// at p = 3 the first branch diverges and q = 1/20.
PresetParams preset(int example, double p);

/// 3 - (1+q)^{(3-p)/(p-1)}
double descent_constant(double p, double q);
/// 1 + 2q + (1+q)^{2/(p-1)}
double growth_constant(double p, double q);
/// 1 + (1+q)^{(3-p)/(p-1)}
double gradient_bound_factor(double p, double q);

/// Smallest nu such that theta^k <= nu k^-2 and (gamma theta)^{k/2} <= nu k^-2
/// for every k >= 1. Empty unless theta in (0,1) and gamma * theta < 1.
std::optional<double> minimal_nu(double theta, double gamma);

struct AssumptionReport {
  double s{0};
  double gamma{0};
  bool ok_a4{false};
  bool ok_a5{false};
  bool ok_a6{false};
  std::optional<double> nu;
  int ell{1};

  bool ok() const { return ok_a4 && ok_a5 && ok_a6; }
};

AssumptionReport validate_assumptions(double p, double q, double theta);

struct TheoremConstants {
  double D{0};
  double tau{0};
};

double tau_constant(double p, double q, double theta, double c1, double D);

/// D = R + ||x_star|| and the sufficient-decrease constant tau.
TheoremConstants theorem1_constants(double p, double q, double theta, double c1, double R,
                                    const VectorXd& x_star);

/// Everything the global certificate needs, derived from (p, q, theta, c1, D).
struct AnalysisParams {
  double theta{0};
  double nu{0};
  int ell{1};
  double gamma{0};
  double s{0};
  double tau{0};
  double D{0};
};

struct MonotonicityReport {
  int points{0};
  bool q1_increasing{true};
  bool q2_decreasing{true};
  bool t1_increasing{true};
  bool t2_decreasing{true};
  bool q_positive_and_bounded{true};
  bool q_branches_consistent{true};
  bool s_above_one{true};
  bool theta_t_in_range{true};
  double q_max{0};
  double q_max_at{0};
  double s_min{0};
  double theta_t_min{0};
  double theta_t_max{0};

  bool ok() const {
    return q1_increasing && q2_decreasing && t1_increasing && t2_decreasing && q_positive_and_bounded &&
           q_branches_consistent && s_above_one && theta_t_in_range;
  }
};

/// p = 1.01, 1.02, ..., 3.00 (each point computed as an integer / 100).
std::vector<double> default_p_grid();

MonotonicityReport monotonicity_scan(std::span<const double> p_grid);

}  // namespace grnm
