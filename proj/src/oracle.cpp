#include "grnm/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <stdexcept>

#include <Eigen/Eigenvalues>
#include <Eigen/QR>

#include "grnm/random.hpp"
#include "grnm/solver.hpp"

namespace grnm {

namespace {

constexpr double kEps = std::numeric_limits<double>::epsilon();

double softplus(double t) { return std::max(t, 0.0) + std::log1p(std::exp(-std::abs(t))); }

double sigmoid(double t) {
  if (t >= 0.0) return 1.0 / (1.0 + std::exp(-t));
  const double e = std::exp(t);
  return e / (1.0 + e);
}

void require_finite(const MatrixXd& M, const char* what) {
  if (!M.allFinite()) throw std::invalid_argument(std::string(what) + " has non-finite entries");
}

// Smallest r with  LB(r) - gnorm * r > gap, where LB(r) = int_0^r (r - t) lambda(t) dt
// and lambda is nonincreasing; lambda is sampled at the right end of each cell
// of a geometric grid, which keeps LB a lower bound.
std::optional<double> certified_distance(const std::function<double(double)>& lambda, double gnorm, double gap) {
  gap = std::max(gap, 0.0);
  double t_prev = 0.0, t = 1e-6;
  double slope = 0.0, offset = 0.0;  // LB(r) = slope * r - offset for r >= t
  while (t <= 1e8) {
    const double lam = std::max(lambda(t), 0.0);
    const double width = t - t_prev;
    slope += lam * width;
    offset += lam * width * 0.5 * (t + t_prev);
    if (slope * t - offset - gnorm * t > gap) return t;
    t_prev = t;
    t *= 1.02;
  }
  return std::nullopt;
}

double min_eigenvalue(const MatrixXd& M) {
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(M, Eigen::EigenvaluesOnly);
  return es.eigenvalues()(0);
}

// Cubic regularized Newton to ||grad|| <= 1e-12, then up to three Newton
// polishing steps kept only while the gradient norm drops.
std::optional<VectorXd> presolve(const Objective& f, const VectorXd& x0, double L) {
  SolverConfig config;
  config.epsilon = 1e-12;
  config.max_outer_iterations = 2000;
  config.schedule.p = 3.0;
  config.schedule.q = 0.0;
  config.schedule.c1 = std::max(L, 1e-3);
  Trajectory t;
  try {
    t = run(f, x0, config, "presolve");
  } catch (const std::exception&) {
    return std::nullopt;
  }
  VectorXd x = t.records.back().x;
  VectorXd g = f.gradient(x);
  for (int i = 0; i < 3 && g.norm() > 0.0; ++i) {
    const VectorXd candidate = x - f.hessian(x).completeOrthogonalDecomposition().solve(g);
    const VectorXd gc = f.gradient(candidate);
    if (!gc.allFinite() || !(gc.norm() < g.norm())) break;
    x = candidate;
    g = gc;
  }
  if (!(g.norm() <= 1e-12)) return std::nullopt;
  return x;
}

class Quadratic final : public Objective {
 public:
  Quadratic(const MatrixXd& A, const VectorXd& b) : A_(A), b_(b) {
    const auto n = A.rows();
    if (n == 0 || A.cols() != n) throw std::invalid_argument("quadratic: A must be square and nonempty");
    if (b.size() != n) throw std::invalid_argument("quadratic: b has the wrong length");
    require_finite(A, "quadratic: A");
    require_finite(b, "quadratic: b");
    const double scale = std::max(1.0, A.cwiseAbs().maxCoeff());
    if ((A - A.transpose()).cwiseAbs().maxCoeff() > 1e-12 * scale) {
      throw std::invalid_argument("quadratic: A must be symmetric");
    }
    A_ = 0.5 * (A + A.transpose());
    Eigen::SelfAdjointEigenSolver<MatrixXd> es(A_);
    const VectorXd& lambda = es.eigenvalues();
    const double lambda_max = lambda.cwiseAbs().maxCoeff();
    if (lambda(0) < -1e-10 * std::max(lambda_max, 1.0)) throw std::invalid_argument("quadratic: A must be PSD");
    norm_A_ = std::max(lambda_max, 0.0);
    const double cutoff = 1e-12 * lambda_max;
    std::vector<Eigen::Index> range;
    for (Eigen::Index i = 0; i < n; ++i) {
      if (lambda(i) > cutoff) range.push_back(i);
    }
    range_basis_.resize(n, static_cast<Eigen::Index>(range.size()));
    VectorXd x_star = VectorXd::Zero(n);
    double lambda_min_pos = std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < range.size(); ++j) {
      const auto i = range[j];
      const VectorXd u = es.eigenvectors().col(i);
      range_basis_.col(static_cast<Eigen::Index>(j)) = u;
      x_star += (u.dot(b) / lambda(i)) * u;
      lambda_min_pos = std::min(lambda_min_pos, lambda(i));
    }
    if ((A_ * x_star - b).norm() > 1e-9 * std::max(1.0, b.norm())) {
      throw std::invalid_argument("quadratic: b is not in range(A), f is unbounded below");
    }
    full_rank_ = static_cast<Eigen::Index>(range.size()) == n;
    lambda_min_pos_ = lambda_min_pos;
    metadata_.L = 0.0;
    metadata_.x_star = x_star;
    metadata_.f_star = value(x_star);
    if (!range.empty()) metadata_.m1 = 1.0 / lambda_min_pos;
  }

  std::string_view kind() const override { return "quadratic"; }
  Eigen::Index dimension() const override { return A_.rows(); }
  double value(const VectorXd& x) const override { return 0.5 * x.dot(A_ * x) - b_.dot(x); }
  VectorXd gradient(const VectorXd& x) const override { return A_ * x - b_; }
  MatrixXd hessian(const VectorXd&) const override { return A_; }

  EvaluationNoise noise(const VectorXd& x) const override {
    const double n = static_cast<double>(dimension()), r = x.norm(), bn = b_.norm();
    return {4.0 * n * kEps * (0.5 * norm_A_ * r * r + bn * r), 4.0 * n * kEps * (norm_A_ * r + bn)};
  }

  std::optional<double> sublevel_radius(double level) const override {
    if (!full_rank_) return std::nullopt;
    const double gap = std::max(level - metadata_.f_star, 0.0);
    return metadata_.x_star.norm() + std::sqrt(2.0 * gap / lambda_min_pos_);
  }

  double distance_to_solutions(const VectorXd& x) const override {
    return (range_basis_.transpose() * (x - metadata_.x_star)).norm();
  }
  bool exact_solution_set() const override { return true; }

 private:
  MatrixXd A_;
  VectorXd b_;
  MatrixXd range_basis_;
  double norm_A_{0};
  double lambda_min_pos_{0};
  bool full_rank_{false};
};

class Logistic final : public Objective {
 public:
  Logistic(const MatrixXd& X, const VectorXd& y) : X_(X), y_(y) {
    if (X.rows() < 1 || X.cols() < 1) throw std::invalid_argument("logistic: need m >= 1 and n >= 1");
    if (y.size() != X.rows()) throw std::invalid_argument("logistic: y has the wrong length");
    require_finite(X, "logistic: X");
    for (Eigen::Index i = 0; i < y.size(); ++i) {
      if (y(i) != 1.0 && y(i) != -1.0) throw std::invalid_argument("logistic: labels must be -1 or +1");
    }
    row_norms_ = X.rowwise().norm();
    x_max_ = row_norms_.maxCoeff();
    metadata_.L = std::pow(x_max_, 3) / (12.0 * std::sqrt(3.0));
  }

  void solve() {
    const VectorXd zero = VectorXd::Zero(dimension());
    std::optional<VectorXd> x = gradient(zero).norm() == 0.0 ? std::optional<VectorXd>(zero)
                                                              : presolve(*this, zero, metadata_.L);
    if (!x) throw std::invalid_argument("logistic: no finite minimizer found (data separable?)");
    const VectorXd margins = y_.cwiseProduct(X_ * *x);
    if (margins.minCoeff() > 0.0) throw std::invalid_argument("logistic: data are separable, no finite minimizer");
    metadata_.x_star = *x;
    metadata_.f_star = value(*x);
    const VectorXd g = gradient(*x);
    const MatrixXd Hs = hessian(*x);
    if (min_eigenvalue(Hs) > 0.0) metadata_.m1 = 1.0 / min_eigenvalue(Hs);
    g_star_norm_ = g.norm();
    abs_margins_ = margins.cwiseAbs();
  }

  std::string_view kind() const override { return "logistic"; }
  Eigen::Index dimension() const override { return X_.cols(); }

  double value(const VectorXd& w) const override {
    const VectorXd z = y_.cwiseProduct(X_ * w);
    double s = 0.0;
    for (Eigen::Index i = 0; i < z.size(); ++i) s += softplus(-z(i));
    return s / static_cast<double>(z.size());
  }

  VectorXd gradient(const VectorXd& w) const override {
    const VectorXd z = y_.cwiseProduct(X_ * w);
    VectorXd coef(z.size());
    for (Eigen::Index i = 0; i < z.size(); ++i) coef(i) = -y_(i) * sigmoid(-z(i));
    return X_.transpose() * coef / static_cast<double>(z.size());
  }

  MatrixXd hessian(const VectorXd& w) const override {
    const VectorXd z = y_.cwiseProduct(X_ * w);
    VectorXd weight(z.size());
    for (Eigen::Index i = 0; i < z.size(); ++i) weight(i) = sigmoid(z(i)) * sigmoid(-z(i));
    return weighted_gram(weight);
  }

  EvaluationNoise noise(const VectorXd& w) const override {
    const double n = static_cast<double>(dimension()), t = x_max_ * w.norm();
    return {4.0 * n * kEps * (std::log(2.0) + t), 4.0 * n * kEps * x_max_ * (1.0 + t)};
  }

  // lambda(t) bounds the Hessian from below on B(x_star, t): sigma' is
  // decreasing in |z| and |z_i| <= |z_i*| + ||x_i|| t there.
  std::optional<double> sublevel_radius(double level) const override {
    const auto lambda = [this](double t) {
      VectorXd weight(abs_margins_.size());
      for (Eigen::Index i = 0; i < weight.size(); ++i) {
        const double z = abs_margins_(i) + row_norms_(i) * t;
        weight(i) = sigmoid(z) * sigmoid(-z);
      }
      return min_eigenvalue(weighted_gram(weight));
    };
    const auto r = certified_distance(lambda, g_star_norm_, level - metadata_.f_star);
    if (!r) return std::nullopt;
    return metadata_.x_star.norm() + *r;
  }

 private:
  MatrixXd weighted_gram(const VectorXd& weight) const {
    return X_.transpose() * weight.asDiagonal() * X_ / static_cast<double>(X_.rows());
  }

  MatrixXd X_;
  VectorXd y_;
  VectorXd row_norms_;
  VectorXd abs_margins_;
  double x_max_{0};
  double g_star_norm_{0};
};

class LogSumExp final : public Objective {
 public:
  LogSumExp(const MatrixXd& A, const VectorXd& b) : A_(A), b_(b) {
    if (A.rows() == 0) throw std::invalid_argument("logsumexp: m must be positive");
    if (A.cols() < 1) throw std::invalid_argument("logsumexp: n must be positive");
    if (b.size() != A.rows()) throw std::invalid_argument("logsumexp: b has the wrong length");
    if (A.rows() == 1) throw std::invalid_argument("logsumexp: m = 1 gives an affine function, unbounded below");
    require_finite(A, "logsumexp: A");
    require_finite(b, "logsumexp: b");
    a_max_ = A.rowwise().norm().maxCoeff();
    b_max_ = b.cwiseAbs().maxCoeff();
    metadata_.L = std::pow(a_max_, 3);
  }

  void solve() {
    const VectorXd zero = VectorXd::Zero(dimension());
    std::optional<VectorXd> x = gradient(zero).norm() == 0.0 ? std::optional<VectorXd>(zero)
                                                              : presolve(*this, zero, metadata_.L);
    if (!x) throw std::invalid_argument("logsumexp: no finite minimizer found (unbounded below?)");
    metadata_.x_star = *x;
    metadata_.f_star = value(*x);
    lambda_star_ = min_eigenvalue(hessian(*x));
    if (lambda_star_ > 0.0) metadata_.m1 = 1.0 / lambda_star_;
    g_star_norm_ = gradient(*x).norm();
  }

  std::string_view kind() const override { return "logsumexp"; }
  Eigen::Index dimension() const override { return A_.cols(); }

  double value(const VectorXd& x) const override {
    const VectorXd l = A_ * x + b_;
    const double top = l.maxCoeff();
    return top + std::log((l.array() - top).exp().sum());
  }

  VectorXd gradient(const VectorXd& x) const override { return A_.transpose() * softmax(x); }

  MatrixXd hessian(const VectorXd& x) const override {
    const VectorXd pi = softmax(x);
    const VectorXd mean = A_.transpose() * pi;
    MatrixXd H = A_.transpose() * pi.asDiagonal() * A_;
    H.noalias() -= mean * mean.transpose();
    return 0.5 * (H + H.transpose());
  }

  EvaluationNoise noise(const VectorXd& x) const override {
    const double n = static_cast<double>(dimension());
    const double t = a_max_ * x.norm() + b_max_;
    const double lm = std::log(static_cast<double>(A_.rows()));
    return {4.0 * n * kEps * (1.0 + t + lm), 8.0 * n * kEps * a_max_ * (1.0 + t)};
  }

  // On B(x_star, t) every softmax weight is within a factor exp(2 a_max t) of
  // its value at x_star, so the Hessian (a covariance) is at least
  // exp(-2 a_max t) times the one at x_star.
  std::optional<double> sublevel_radius(double level) const override {
    if (!(lambda_star_ > 0.0)) return std::nullopt;
    const auto lambda = [this](double t) { return std::exp(-2.0 * a_max_ * t) * lambda_star_; };
    const auto r = certified_distance(lambda, g_star_norm_, level - metadata_.f_star);
    if (!r) return std::nullopt;
    return metadata_.x_star.norm() + *r;
  }

 private:
  VectorXd softmax(const VectorXd& x) const {
    const VectorXd l = A_ * x + b_;
    const VectorXd e = (l.array() - l.maxCoeff()).exp().matrix();
    return e / e.sum();
  }

  MatrixXd A_;
  VectorXd b_;
  double a_max_{0};
  double b_max_{0};
  double lambda_star_{0};
  double g_star_norm_{0};
};

}  // namespace

ObjectivePtr make_quadratic(const MatrixXd& A, const VectorXd& b) { return std::make_shared<Quadratic>(A, b); }

ObjectivePtr make_logistic(const MatrixXd& X, const VectorXd& y) {
  auto f = std::make_shared<Logistic>(X, y);
  f->solve();
  return f;
}

ObjectivePtr make_logsumexp(const MatrixXd& A, const VectorXd& b) {
  auto f = std::make_shared<LogSumExp>(A, b);
  f->solve();
  return f;
}

A1Report check_a1(const Objective& objective, double L, std::span<const std::pair<VectorXd, VectorXd>> pairs) {
  if (!(L >= 0.0)) throw std::invalid_argument("L must be nonnegative");
  A1Report report;
  const auto ratio = [](double residual, double bound) {
    if (residual <= 0.0) return 0.0;
    return bound > 0.0 ? residual / bound : std::numeric_limits<double>::infinity();
  };
  for (const auto& [x, y] : pairs) {
    ++report.pairs;
    const VectorXd h = x - y;
    const double r = h.norm();
    const VectorXd gx = objective.gradient(x), gy = objective.gradient(y);
    const VectorXd Hh = objective.hessian(y) * h;
    const double fx = objective.value(x), fy = objective.value(y);
    const double gres = (gx - gy - Hh).norm();
    const double vres = std::abs(fx - fy - gy.dot(h) - 0.5 * h.dot(Hh));
    const double gfloor = 1e-12 * (gx.norm() + gy.norm() + Hh.norm());
    const double vfloor = 1e-12 * (std::abs(fx) + std::abs(fy) + std::abs(gy.dot(h)) + std::abs(h.dot(Hh)));
    report.max_gradient_residual = std::max(report.max_gradient_residual, gres);
    report.max_value_residual = std::max(report.max_value_residual, vres);
    report.gradient_ratio = std::max(report.gradient_ratio, ratio(gres - gfloor, L * r * r));
    report.value_ratio = std::max(report.value_ratio, ratio(vres - vfloor, L / 3.0 * r * r * r));
  }
  return report;
}

std::vector<std::pair<VectorXd, VectorXd>> sample_pairs(Eigen::Index n, int count, double half_width,
                                                        std::uint64_t seed) {
  Rng rng(seed);
  std::vector<std::pair<VectorXd, VectorXd>> pairs;
  pairs.reserve(static_cast<std::size_t>(std::max(count, 0)));
  for (int c = 0; c < count; ++c) {
    VectorXd x(n), y(n);
    for (Eigen::Index i = 0; i < n; ++i) x(i) = rng.uniform(-half_width, half_width);
    for (Eigen::Index i = 0; i < n; ++i) y(i) = rng.uniform(-half_width, half_width);
    pairs.emplace_back(std::move(x), std::move(y));
  }
  return pairs;
}

}  // namespace grnm
