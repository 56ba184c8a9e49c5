#pragma once

// Independent reference solvers used only by the tests.

#include <algorithm>
#include <cmath>
#include <functional>

#include <Eigen/Dense>

#include "grnm/oracle.hpp"
#include "grnm/subproblem.hpp"

namespace grnm::reference {

/// Plain (non-accelerated) proximal gradient with backtracking, from d = 0.
inline VectorXd prox_descent(const SubproblemInstance<double>& in, long iterations) {
  const auto n = in.g.size();
  VectorXd d = VectorXd::Zero(n);
  double L = 1.0;
  const auto smooth = [&](const VectorXd& x) {
    return in.g.dot(x) + 0.5 * x.dot(in.H * x) + in.mu / in.p * std::pow(x.norm(), in.p);
  };
  const auto grad = [&](const VectorXd& x) -> VectorXd {
    const double r = x.norm();
    VectorXd v = in.g + in.H * x;
    if (r > 0.0) v += in.mu * std::pow(r, in.p - 2.0) * x;
    return v;
  };
  const auto shrink = [](const VectorXd& x, double t) {
    return x.unaryExpr([t](double v) { return std::copysign(std::max(std::abs(v) - t, 0.0), v); }).eval();
  };
  for (long it = 0; it < iterations; ++it) {
    const VectorXd gd = grad(d);
    const double sd = smooth(d);
    VectorXd z;
    for (int k = 0; k < 200; ++k) {
      z = shrink(d - gd / L, in.rho / L);
      const VectorXd dz = z - d;
      if (smooth(z) <= sd + gd.dot(dz) + 0.5 * L * dz.squaredNorm() + 1e-15 * std::abs(sd)) break;
      L *= 2.0;
    }
    if (z == d) break;
    d = z;
    L = std::max(L * 0.9, 1e-12);
  }
  return d;
}

/// Zooming grid search for n <= 2 around a starting point.
inline VectorXd grid_refine(const SubproblemInstance<double>& in, VectorXd center, double radius, int rounds) {
  const auto n = in.g.size();
  double best = subproblem_objective(in, center);
  for (int r = 0; r < rounds; ++r) {
    const int steps = 20;
    VectorXd trial = center;
    if (n == 1) {
      for (int i = -steps; i <= steps; ++i) {
        trial(0) = center(0) + radius * i / steps;
        const double v = subproblem_objective(in, trial);
        if (v < best) best = v, center = trial;
      }
    } else {
      const VectorXd c0 = center;
      for (int i = -steps; i <= steps; ++i)
        for (int j = -steps; j <= steps; ++j) {
          trial(0) = c0(0) + radius * i / steps;
          trial(1) = c0(1) + radius * j / steps;
          const double v = subproblem_objective(in, trial);
          if (v < best) best = v, center = trial;
        }
    }
    radius *= 0.25;
  }
  return center;
}

/// Long-run reference minimizer of the subproblem.
inline VectorXd brute_force_minimizer(const SubproblemInstance<double>& in, long iterations = 1000000) {
  VectorXd d = prox_descent(in, iterations);
  if (in.g.size() <= 2) d = grid_refine(in, d, 1e-3, 30);
  return d;
}

/// Minimum-norm minimizer of 1/2 x'Ax - b'x through a pseudoinverse.
inline VectorXd pseudoinverse_minimizer(const MatrixXd& A, const VectorXd& b) {
  Eigen::CompleteOrthogonalDecomposition<MatrixXd> cod(A);
  cod.setThreshold(1e-12);
  return cod.pseudoInverse() * b;
}

/// Nesterov accelerated gradient with fixed step 1/Lg; returns the best value seen.
inline double accelerated_gradient_value(const Objective& f, VectorXd x, double Lg, long iterations) {
  VectorXd y = x, prev = x;
  double best = f.value(x);
  for (long k = 1; k <= iterations; ++k) {
    const VectorXd next = y - f.gradient(y) / Lg;
    const double v = f.value(next);
    best = std::min(best, v);
    y = next + (static_cast<double>(k - 1) / static_cast<double>(k + 2)) * (next - prev);
    prev = next;
  }
  return best;
}

}  // namespace grnm::reference
