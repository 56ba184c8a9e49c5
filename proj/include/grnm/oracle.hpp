#pragma once

#include <cstdint>
#include <limits>
#include <memory>
#include <optional>
#include <span>
#include <string_view>
#include <utility>
#include <vector>

#include "grnm/types.hpp"

namespace grnm {

/// Constants of a convex test problem.
struct ProblemMetadata {
  /// Bound in  ||grad f(x) - grad f(y) - hess f(y)(x-y)|| <= L ||x-y||^2  and
  /// |f(x) - f(y) - <grad f(y), x-y> - 1/2 <hess f(y)(x-y), x-y>| <= (L/3) ||x-y||^3.
  double L{0};
  double f_star{std::numeric_limits<double>::quiet_NaN()};
  VectorXd x_star;
  /// Error-bound constant: dist(x, X*) <= m1 ||grad f(x)|| near X*.
  std::optional<double> m1;

  bool has_f_star() const { return f_star == f_star; }
};

/// Rounding-level uncertainty of one evaluation; comparisons of computed
/// values below these magnitudes are not meaningful.
struct EvaluationNoise {
  double value{0};
  double gradient{0};
};

/// Twice continuously differentiable convex objective. Immutable once
/// constructed; every evaluation is a pure function of x.
class Objective {
 public:
  virtual ~Objective() = default;

  virtual std::string_view kind() const = 0;
  virtual Eigen::Index dimension() const = 0;
  virtual double value(const VectorXd& x) const = 0;
  virtual VectorXd gradient(const VectorXd& x) const = 0;
  virtual MatrixXd hessian(const VectorXd& x) const = 0;
  virtual EvaluationNoise noise(const VectorXd& x) const = 0;

  /// A radius R with {x : f(x) <= level} contained in B(0, R), when one can be
  /// certified.
  virtual std::optional<double> sublevel_radius(double /*level*/) const { return std::nullopt; }

  /// dist(x, X*). Exact when exact_solution_set(), else ||x - x_star||.
  virtual double distance_to_solutions(const VectorXd& x) const { return (x - metadata_.x_star).norm(); }
  virtual bool exact_solution_set() const { return false; }

  const ProblemMetadata& metadata() const { return metadata_; }

 protected:
  ProblemMetadata metadata_;
};

using ObjectivePtr = std::shared_ptr<const Objective>;

/// f(x) = 1/2 <Ax, x> - <b, x> with A symmetric PSD and b in range(A).
/// x_star is the minimum-norm minimizer; L = 0.
ObjectivePtr make_quadratic(const MatrixXd& A, const VectorXd& b);

/// f(w) = (1/m) sum_i log(1 + exp(-y_i <x_i, w>)), rows of X are the x_i,
/// labels in {-1, +1}. L = max_i ||x_i||^3 / (12 sqrt(3)).
ObjectivePtr make_logistic(const MatrixXd& X, const VectorXd& y);

/// f(x) = log sum_i exp(<a_i, x> + b_i), rows of A are the a_i.
/// L = max_i ||a_i||^3.
ObjectivePtr make_logsumexp(const MatrixXd& A, const VectorXd& b);

struct A1Report {
  int pairs{0};
  double max_gradient_residual{0};
  double max_value_residual{0};
  /// max over pairs of residual / (L ||x-y||^2), resp. residual / ((L/3) ||x-y||^3)
  double gradient_ratio{0};
  double value_ratio{0};

  bool ok() const { return gradient_ratio <= 1.0 && value_ratio <= 1.0; }
};

/// Residuals below 1e-12 (relative to the evaluated magnitudes) count as zero,
/// so L = 0 is accepted for quadratics.
A1Report check_a1(const Objective& objective, double L, std::span<const std::pair<VectorXd, VectorXd>> pairs);

/// Pairs drawn uniformly from the box [-half_width, half_width]^n.
std::vector<std::pair<VectorXd, VectorXd>> sample_pairs(Eigen::Index n, int count, double half_width,
                                                        std::uint64_t seed);

}  // namespace grnm
