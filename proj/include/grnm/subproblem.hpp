#pragma once

// Regularized Newton model:
//
//   phi(d) = <g, d> + 1/2 <H d, d> + (mu / p) ||d||^p + rho ||d||_1,
//
// with H symmetric PSD, mu > 0, p in (1, 3], rho >= 0. phi is strictly convex
// and coercive, so it has a unique minimizer, characterized by
//
//   g + (H + mu ||d||^{p-2} I) d + rho * eta = 0,   eta in subdiff ||d||_1.
//
// rho == 0 is solved through the spectrum of H and a scalar equation in
// r = ||d||; rho > 0 uses accelerated proximal gradient, finished by an exact
// solve on the identified support.

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>

#include "grnm/types.hpp"

namespace grnm {

template <typename Scalar>
struct SubproblemInstance {
  Vector<Scalar> g;
  Matrix<Scalar> H;
  Scalar mu{1};
  Scalar p{3};
  Scalar rho{0};
};

enum class SubproblemPath { direct, secular, proximal };

template <typename Scalar>
struct SubproblemSolution {
  Vector<Scalar> d;
  /// Element of the subdifferential of ||.||_1 at d achieving the residual.
  Vector<Scalar> eta;
  Scalar residual{0};
  int inner_iterations{0};
  Scalar objective_value{0};
  SubproblemPath path{SubproblemPath::secular};
};

/// Thrown when the inner solver cannot reach the requested tolerance. Carries
/// the best iterate found.
template <typename Scalar>
class InexactSolveError : public std::runtime_error {
 public:
  InexactSolveError(const std::string& what, SubproblemSolution<Scalar> best)
      : std::runtime_error(what), best_(std::move(best)) {}

  const SubproblemSolution<Scalar>& best() const { return best_; }

 private:
  SubproblemSolution<Scalar> best_;
};

template <typename Scalar>
struct ProxOptions {
  Scalar tolerance{Scalar(1e-10)};
  int max_iterations{100000};
  /// Solve the smooth reduced problem on a stable support and accept it when
  /// it certifies. Disabled only to obtain a purely first-order answer.
  bool support_polish{true};
};

/// Spectrum of a PSD matrix with eigenvalues clamped at zero.
template <typename Scalar>
struct Spectrum {
  Vector<Scalar> eigenvalues;  // ascending
  Matrix<Scalar> eigenvectors;
};

template <typename Scalar>
Spectrum<Scalar> psd_spectrum(const Matrix<Scalar>& H) {
  if (H.rows() != H.cols() || H.rows() == 0) {
    throw std::invalid_argument("matrix must be square and non-empty");
  }
  Eigen::SelfAdjointEigenSolver<Matrix<Scalar>> es(H);
  if (es.info() != Eigen::Success) {
    throw std::runtime_error("eigendecomposition failed");
  }
  const Vector<Scalar>& lambda = es.eigenvalues();
  const Scalar scale = lambda.cwiseAbs().maxCoeff();
  if (lambda(0) < -Scalar(1e-10) * scale) {
    throw std::invalid_argument("matrix is not positive semidefinite");
  }
  return {lambda.cwiseMax(Scalar(0)), es.eigenvectors()};
}

template <typename Scalar>
Scalar soft_threshold(Scalar x, Scalar threshold) {
  using std::abs;
  const Scalar shrunk = abs(x) - threshold;
  if (shrunk <= Scalar(0)) return Scalar(0);
  return x > Scalar(0) ? shrunk : -shrunk;
}

template <typename Derived>
Vector<typename Derived::Scalar> soft_threshold(const Eigen::MatrixBase<Derived>& x,
                                                typename Derived::Scalar threshold) {
  using Scalar = typename Derived::Scalar;
  return x.unaryExpr([threshold](Scalar v) { return soft_threshold(v, threshold); });
}

template <typename Scalar>
void validate_instance(const SubproblemInstance<Scalar>& in) {
  const auto n = in.g.size();
  if (n == 0 || in.H.rows() != n || in.H.cols() != n) {
    throw std::invalid_argument("subproblem dimensions do not match");
  }
  if (!(in.mu > Scalar(0))) throw std::invalid_argument("mu must be positive");
  if (!(in.p > Scalar(1) && in.p <= Scalar(3))) throw std::invalid_argument("p must lie in (1,3]");
  if (!(in.rho >= Scalar(0))) throw std::invalid_argument("rho must be nonnegative");
  if (!in.g.allFinite() || !in.H.allFinite()) throw std::invalid_argument("non-finite subproblem data");
}

/// mu ||d||^{p-2} d, taken as 0 at d = 0 (its continuous extension for p > 1).
template <typename Scalar>
Vector<Scalar> power_term_gradient(const Vector<Scalar>& d, Scalar mu, Scalar p) {
  using std::pow;
  const Scalar r = d.norm();
  if (r == Scalar(0)) return Vector<Scalar>::Zero(d.size());
  return (mu * pow(r, p - Scalar(2))) * d;
}

/// Gradient of the smooth part g + H d + mu ||d||^{p-2} d.
template <typename Scalar>
Vector<Scalar> smooth_gradient(const SubproblemInstance<Scalar>& in, const Vector<Scalar>& d) {
  return in.g + in.H * d + power_term_gradient(d, in.mu, in.p);
}

template <typename Scalar>
Scalar smooth_value(const SubproblemInstance<Scalar>& in, const Vector<Scalar>& d) {
  using std::pow;
  return in.g.dot(d) + Scalar(0.5) * d.dot(in.H * d) + in.mu / in.p * pow(d.norm(), in.p);
}

template <typename Scalar>
Scalar subproblem_objective(const SubproblemInstance<Scalar>& in, const Vector<Scalar>& d) {
  return smooth_value(in, d) + in.rho * d.template lpNorm<1>();
}

/// Norm of the minimal-norm element of the subdifferential of phi at d.
template <typename Scalar>
Scalar optimality_residual(const SubproblemInstance<Scalar>& in, const Vector<Scalar>& d) {
  using std::abs;
  using std::max;
  using std::sqrt;
  const Vector<Scalar> v = smooth_gradient(in, d);
  Scalar sum{0};
  for (Eigen::Index j = 0; j < d.size(); ++j) {
    Scalar e;
    if (d(j) != Scalar(0)) {
      e = v(j) + (d(j) > Scalar(0) ? in.rho : -in.rho);
    } else {
      e = max(Scalar(0), abs(v(j)) - in.rho);
    }
    sum += e * e;
  }
  return sqrt(sum);
}

/// eta with eta_j = sign(d_j) on the support and the residual-minimizing
/// value in [-1, 1] elsewhere.
template <typename Scalar>
Vector<Scalar> l1_subgradient(const SubproblemInstance<Scalar>& in, const Vector<Scalar>& d) {
  const Vector<Scalar> v = smooth_gradient(in, d);
  Vector<Scalar> eta(d.size());
  for (Eigen::Index j = 0; j < d.size(); ++j) {
    if (d(j) > Scalar(0)) {
      eta(j) = Scalar(1);
    } else if (d(j) < Scalar(0)) {
      eta(j) = Scalar(-1);
    } else if (in.rho > Scalar(0)) {
      eta(j) = std::clamp(-v(j) / in.rho, Scalar(-1), Scalar(1));
    } else {
      eta(j) = Scalar(0);
    }
  }
  return eta;
}

template <typename Scalar>
struct SecularRoot {
  Scalar radius{0};
  int iterations{0};
};

/// Root r* > 0 of ||d(r)|| = r, with d(r) = -(Lambda + mu r^{p-2} I)^{-1} ghat.
///
/// Works with G(t) = log ||d(e^t)|| - t, which is strictly decreasing in t with
/// slope in [-max(1, p-1), -min(1, p-1)], by safeguarded Newton inside a bracket.
template <typename Scalar>
SecularRoot<Scalar> secular_root(const Vector<Scalar>& lambda, const Vector<Scalar>& ghat, Scalar mu,
                                 Scalar p, Scalar tol) {
  using std::abs;
  using std::exp;
  using std::log;
  using std::max;
  using std::min;
  using std::pow;
  const Scalar gnorm = ghat.norm();
  if (!(gnorm > Scalar(0))) throw std::invalid_argument("secular equation needs a nonzero gradient");

  // h(r) = ||d(r)||^2 / r^2 = sum ghat_i^2 / (lambda_i r + mu r^{p-1})^2
  const auto h = [&](Scalar r) {
    const Scalar shift = mu * pow(r, p - Scalar(1));
    Scalar s{0};
    for (Eigen::Index i = 0; i < ghat.size(); ++i) {
      const Scalar q = ghat(i) / (lambda(i) * r + shift);
      s += q * q;
    }
    return s;
  };
  // G(t) and dG/dt at r = e^t.
  const auto G = [&](Scalar r, Scalar* slope) {
    const Scalar shift = mu * pow(r, p - Scalar(1));
    Scalar s{0}, ds{0};
    for (Eigen::Index i = 0; i < ghat.size(); ++i) {
      const Scalar D = lambda(i) * r + shift;
      const Scalar q = ghat(i) / D;
      s += q * q;
      ds += q * q * (lambda(i) * r + (p - Scalar(1)) * shift) / D;
    }
    *slope = -ds / s;
    return Scalar(0.5) * log(s);
  };

  constexpr int kMaxExpansions = 200;
  // The H = 0 solution bounds the root from above for PSD H.
  Scalar hi = pow(gnorm / mu, Scalar(1) / (p - Scalar(1)));
  int expansions = 0;
  while (h(hi) > Scalar(1)) {
    if (++expansions > kMaxExpansions) throw std::logic_error("secular equation: no upper bracket");
    hi *= Scalar(2);
  }
  const Scalar lambda_max = lambda.maxCoeff();
  Scalar lo = pow(gnorm / (Scalar(2) * mu), Scalar(1) / (p - Scalar(1)));
  if (lambda_max > Scalar(0)) lo = min(lo, gnorm / (Scalar(2) * lambda_max));
  expansions = 0;
  while (h(lo) < Scalar(1)) {
    if (++expansions > kMaxExpansions) throw std::logic_error("secular equation: no lower bracket");
    lo /= Scalar(2);
  }

  Scalar t_lo = log(lo), t_hi = log(hi);
  Scalar t = t_hi;
  constexpr Scalar eps = std::numeric_limits<Scalar>::epsilon();
  SecularRoot<Scalar> out;
  for (int it = 0; it < 200; ++it) {
    out.iterations = it + 1;
    const Scalar r = exp(t);
    Scalar slope;
    const Scalar value = G(r, &slope);
    // |‖d(r)‖ - r| = r |e^G - 1|
    if (r * abs(exp(value) - Scalar(1)) <= tol * max(Scalar(1), r)) {
      out.radius = r;
      return out;
    }
    if (value > Scalar(0)) {
      t_lo = t;
    } else {
      t_hi = t;
    }
    if (t_hi - t_lo <= Scalar(4) * eps * max(Scalar(1), abs(t))) {
      out.radius = r;
      return out;
    }
    Scalar next = t - value / slope;
    if (!(next > t_lo && next < t_hi)) next = Scalar(0.5) * (t_lo + t_hi);
    t = next;
  }
  out.radius = exp(t);
  return out;
}

/// Minimizer of phi for rho = 0 given the spectrum of H. p = 2 is a direct
/// shifted solve; otherwise the shift comes from the secular root.
template <typename Scalar>
Vector<Scalar> solve_secular(const Spectrum<Scalar>& spectrum, const Vector<Scalar>& g, Scalar mu, Scalar p,
                             Scalar tol, int* iterations = nullptr) {
  using std::pow;
  const Vector<Scalar> ghat = spectrum.eigenvectors.transpose() * g;
  Scalar shift = mu;
  int its = 0;
  if (p != Scalar(2)) {
    const SecularRoot<Scalar> root = secular_root(spectrum.eigenvalues, ghat, mu, p, tol);
    shift = mu * pow(root.radius, p - Scalar(2));
    its = root.iterations;
  }
  if (iterations) *iterations = its;
  const Vector<Scalar> dhat = -(ghat.array() / (spectrum.eigenvalues.array() + shift)).matrix();
  return spectrum.eigenvectors * dhat;
}

namespace detail {

/// Newton refinement of c + H d + mu ||d||^{p-2} d = 0 near a good d. Steps that
/// do not reduce the residual are discarded.
template <typename Scalar>
Vector<Scalar> refine_smooth_stationary(const Matrix<Scalar>& H, const Vector<Scalar>& c, Scalar mu, Scalar p,
                                        Vector<Scalar> d, int rounds) {
  using std::pow;
  const auto F = [&](const Vector<Scalar>& x) -> Vector<Scalar> {
    return c + H * x + power_term_gradient(x, mu, p);
  };
  Vector<Scalar> f = F(d);
  Scalar fn = f.norm();
  for (int i = 0; i < rounds && fn > Scalar(0); ++i) {
    const Scalar r = d.norm();
    if (r == Scalar(0)) break;
    const Scalar w = mu * pow(r, p - Scalar(2));
    Matrix<Scalar> J = H;
    J.diagonal().array() += w;
    J.noalias() += (w * (p - Scalar(2)) / (r * r)) * d * d.transpose();
    const Vector<Scalar> candidate = d - J.ldlt().solve(f);
    const Vector<Scalar> fc = F(candidate);
    const Scalar fcn = fc.norm();
    if (!(fcn < fn)) break;
    d = candidate;
    f = fc;
    fn = fcn;
  }
  return d;
}

template <typename Scalar>
Scalar operator_norm_psd(const Matrix<Scalar>& H) {
  Eigen::SelfAdjointEigenSolver<Matrix<Scalar>> es(H, Eigen::EigenvaluesOnly);
  return es.eigenvalues().cwiseAbs().maxCoeff();
}

/// Exact minimizer of the smooth model restricted to the sign pattern: on
/// S = {j : pattern_j != 0}, phi reduces to a smooth problem with gradient
/// g_S + rho sigma.
template <typename Scalar>
Vector<Scalar> solve_on_pattern(const SubproblemInstance<Scalar>& in, const std::vector<signed char>& pattern) {
  std::vector<Eigen::Index> support;
  for (Eigen::Index j = 0; j < in.g.size(); ++j) {
    if (pattern[j] != 0) support.push_back(j);
  }
  const auto k = static_cast<Eigen::Index>(support.size());
  Vector<Scalar> full = Vector<Scalar>::Zero(in.g.size());
  if (k == 0) return full;
  Matrix<Scalar> Hs(k, k);
  Vector<Scalar> c(k);
  for (Eigen::Index a = 0; a < k; ++a) {
    c(a) = in.g(support[a]) + in.rho * Scalar(pattern[support[a]]);
    for (Eigen::Index b = 0; b < k; ++b) Hs(a, b) = in.H(support[a], support[b]);
  }
  if (c.norm() == Scalar(0)) return full;
  const Spectrum<Scalar> spectrum = psd_spectrum(Hs);
  Vector<Scalar> ds =
      solve_secular(spectrum, c, in.mu, in.p, Scalar(8) * std::numeric_limits<Scalar>::epsilon());
  ds = refine_smooth_stationary(Hs, c, in.mu, in.p, std::move(ds), 2);
  for (Eigen::Index a = 0; a < k; ++a) full(support[a]) = ds(a);
  return full;
}

/// Primal-dual active-set iteration on the sign pattern: coordinates whose
/// reduced solution changes sign leave the support, zero coordinates with
/// |v_j| > rho enter it with sign -sign(v_j). Returns the solution once the
/// pattern is stable.
template <typename Scalar>
std::optional<Vector<Scalar>> polish_on_pattern(const SubproblemInstance<Scalar>& in,
                                                std::vector<signed char> pattern, int rounds) {
  using std::abs;
  const auto n = in.g.size();
  for (int round = 0; round < rounds; ++round) {
    const Vector<Scalar> d = solve_on_pattern(in, pattern);
    const Vector<Scalar> v = smooth_gradient(in, d);
    bool changed = false;
    for (Eigen::Index j = 0; j < n; ++j) {
      if (pattern[j] != 0) {
        if (!(d(j) * Scalar(pattern[j]) > Scalar(0))) {
          pattern[j] = 0;
          changed = true;
        }
      } else if (abs(v(j)) > in.rho) {
        pattern[j] = v(j) > Scalar(0) ? -1 : 1;
        changed = true;
      }
    }
    if (!changed) return d;
  }
  return std::nullopt;
}

template <typename Scalar>
std::vector<signed char> sign_pattern(const Vector<Scalar>& d) {
  std::vector<signed char> out(static_cast<std::size_t>(d.size()));
  for (Eigen::Index j = 0; j < d.size(); ++j) out[j] = d(j) > Scalar(0) ? 1 : (d(j) < Scalar(0) ? -1 : 0);
  return out;
}

template <typename Scalar>
SubproblemSolution<Scalar> finish(const SubproblemInstance<Scalar>& in, Vector<Scalar> d, int iterations,
                                  SubproblemPath path) {
  SubproblemSolution<Scalar> s;
  s.residual = optimality_residual(in, d);
  s.eta = l1_subgradient(in, d);
  s.objective_value = subproblem_objective(in, d);
  s.inner_iterations = iterations;
  s.path = path;
  s.d = std::move(d);
  return s;
}

}  // namespace detail

/// Accelerated proximal gradient (FISTA) with backtracking, function-value
/// restarts and soft-thresholding; stops once optimality_residual <= tolerance.
template <typename Scalar>
SubproblemSolution<Scalar> solve_prox(const SubproblemInstance<Scalar>& in, const ProxOptions<Scalar>& options) {
  using std::abs;
  using std::max;
  using std::pow;
  using std::sqrt;
  validate_instance(in);
  const auto n = in.g.size();
  const Scalar h_norm = detail::operator_norm_psd(in.H);
  constexpr Scalar eps = std::numeric_limits<Scalar>::epsilon();

  Vector<Scalar> x = Vector<Scalar>::Zero(n);
  Vector<Scalar> y = x;
  Scalar phi_x = Scalar(0);
  Scalar momentum{1};

  SubproblemSolution<Scalar> best = detail::finish(in, x, 0, SubproblemPath::proximal);
  if (best.residual <= options.tolerance) return best;
  const int polish_rounds = 2 * static_cast<int>(n) + 10;
  const auto try_polish = [&](const std::vector<signed char>& start, int it) -> bool {
    if (auto polished = detail::polish_on_pattern(in, start, polish_rounds)) {
      SubproblemSolution<Scalar> cand = detail::finish(in, std::move(*polished), it, SubproblemPath::proximal);
      const bool done = cand.residual <= options.tolerance;
      if (done || cand.residual < best.residual) best = std::move(cand);
      return done;
    }
    return false;
  };
  if (options.support_polish) {
    // the rho = 0 minimizer usually carries the right signs when rho is small
    const Vector<Scalar> d0 =
        solve_secular(psd_spectrum(in.H), in.g, in.mu, in.p, Scalar(8) * std::numeric_limits<Scalar>::epsilon());
    if (try_polish(detail::sign_pattern(d0), 0)) return best;
  }

  std::vector<signed char> pattern(n, 0), tried(n, 2);
  int stable = 0;

  for (int it = 1; it <= options.max_iterations; ++it) {
    const Scalar r_hat = max(y.norm(), Scalar(1e-8));
    Scalar step = Scalar(1) / (h_norm + in.mu * pow(r_hat, in.p - Scalar(2)));
    const Vector<Scalar> grad_y = smooth_gradient(in, y);
    const Scalar s_y = smooth_value(in, y);
    Vector<Scalar> z;
    for (int halvings = 0;; ++halvings) {
      z = soft_threshold(y - step * grad_y, step * in.rho);
      const Vector<Scalar> dz = z - y;
      const Scalar model = s_y + grad_y.dot(dz) + dz.squaredNorm() / (Scalar(2) * step);
      const Scalar slack = Scalar(10) * eps * (abs(s_y) + abs(grad_y.dot(dz)));
      if (smooth_value(in, z) <= model + slack || halvings >= 100) break;
      step *= Scalar(0.5);
    }
    const Scalar phi_z = subproblem_objective(in, z);
    const Scalar residual_z = optimality_residual(in, z);
    if (residual_z < best.residual) best = detail::finish(in, z, it, SubproblemPath::proximal);
    if (residual_z <= options.tolerance) return best;
    // near the optimum phi differences sink below rounding; treat those as ties
    const Scalar tie = Scalar(10) * eps * (abs(phi_x) + abs(in.g.dot(z)));
    if (phi_z > phi_x + tie && momentum > Scalar(1)) {
      // restart from the last accepted point without momentum
      y = x;
      momentum = Scalar(1);
      continue;
    }
    const Scalar next_momentum = (Scalar(1) + sqrt(Scalar(1) + Scalar(4) * momentum * momentum)) / Scalar(2);
    y = z + ((momentum - Scalar(1)) / next_momentum) * (z - x);
    momentum = next_momentum;
    if (phi_z <= phi_x + tie) {
      x = z;
      phi_x = std::min(phi_x, phi_z);
    }

    if (!options.support_polish) continue;
    bool same = true;
    for (Eigen::Index j = 0; j < n; ++j) {
      const signed char sj = x(j) > Scalar(0) ? 1 : (x(j) < Scalar(0) ? -1 : 0);
      if (sj != pattern[j]) same = false;
      pattern[j] = sj;
    }
    stable = same ? stable + 1 : 0;
    if (stable >= 3 && pattern != tried) {
      tried = pattern;
      if (try_polish(pattern, it)) return best;
    }
  }
  throw InexactSolveError<Scalar>("proximal subproblem solver did not reach the tolerance", std::move(best));
}

/// Unique global minimizer of phi with residual <= tol_inner. Requires g != 0.
template <typename Scalar>
SubproblemSolution<Scalar> solve(const SubproblemInstance<Scalar>& in, Scalar tol_inner, int max_inner) {
  validate_instance(in);
  if (!(tol_inner > Scalar(0))) throw std::invalid_argument("inner tolerance must be positive");
  if (in.g.isZero(Scalar(0))) {
    throw std::invalid_argument("zero gradient: the outer method should have stopped");
  }
  if (in.rho > Scalar(0)) {
    ProxOptions<Scalar> options;
    options.tolerance = tol_inner;
    options.max_iterations = max_inner;
    return solve_prox(in, options);
  }
  const Spectrum<Scalar> spectrum = psd_spectrum(in.H);
  int iterations = 0;
  Vector<Scalar> d =
      solve_secular(spectrum, in.g, in.mu, in.p, Scalar(8) * std::numeric_limits<Scalar>::epsilon(), &iterations);
  const SubproblemPath path = in.p == Scalar(2) ? SubproblemPath::direct : SubproblemPath::secular;
  if (optimality_residual(in, d) > tol_inner) {
    d = detail::refine_smooth_stationary(in.H, in.g, in.mu, in.p, std::move(d), 3);
  }
  SubproblemSolution<Scalar> s = detail::finish(in, std::move(d), iterations, path);
  if (s.residual > tol_inner) {
    throw InexactSolveError<Scalar>("secular subproblem solve missed the tolerance", std::move(s));
  }
  return s;
}

template <typename Scalar>
struct MatrixBoundsReport {
  /// ||(H + mu ||d||^{p-2} I)^{-1}|| / (mu^{-1} ||d||^{2-p})
  Scalar inverse_ratio{0};
  /// ||(H + mu ||d||^{p-2} I)^{-1} H||
  Scalar product_ratio{0};
  bool ok{false};
};

template <typename Scalar>
MatrixBoundsReport<Scalar> check_matrix_bounds(const Matrix<Scalar>& H, Scalar mu, Scalar p,
                                               const Vector<Scalar>& d) {
  using std::pow;
  if (!(mu > Scalar(0))) throw std::invalid_argument("mu must be positive");
  const Scalar r = d.norm();
  if (!(r > Scalar(0))) throw std::invalid_argument("d must be nonzero");
  const Spectrum<Scalar> spectrum = psd_spectrum(H);
  const Scalar shift = mu * pow(r, p - Scalar(2));
  const auto& lambda = spectrum.eigenvalues.array();
  MatrixBoundsReport<Scalar> report;
  const Scalar inverse_norm = Scalar(1) / (lambda.minCoeff() + shift);
  report.inverse_ratio = inverse_norm / (pow(r, Scalar(2) - p) / mu);
  report.product_ratio = (lambda / (lambda + shift)).maxCoeff();
  const Scalar limit = Scalar(1) + Scalar(1e-10);
  report.ok = report.inverse_ratio <= limit && report.product_ratio <= limit;
  return report;
}

}  // namespace grnm
