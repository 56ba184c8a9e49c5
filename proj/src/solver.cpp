#include "grnm/solver.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <sstream>

#include "grnm/subproblem.hpp"

namespace grnm {

double inner_tolerance(const SolverConfig& config, double grad_norm) {
  const double p = config.schedule.p;
  return std::min(config.inner_tolerance_cap, config.inner_tolerance_scale * std::pow(grad_norm, (p + 1.0) / 2.0));
}

std::string_view to_string(Termination t) {
  switch (t) {
    case Termination::converged:
      return "converged";
    case Termination::max_iter:
      return "max_iter";
    case Termination::inner_failure:
      return "inner_failure";
  }
  return "unknown";
}

Termination termination_from_string(std::string_view s) {
  if (s == "converged") return Termination::converged;
  if (s == "max_iter") return Termination::max_iter;
  if (s == "inner_failure") return Termination::inner_failure;
  throw std::invalid_argument("unknown termination reason: " + std::string(s));
}

bool within_slack(double lhs, double rhs, double floor, double relative) {
  return lhs <= rhs + relative * std::abs(rhs) + floor;
}

namespace {

void validate(const Objective& objective, const VectorXd& x0, const SolverConfig& config, ScheduleConfig& schedule) {
  try {
    validate_schedule(config.schedule);
  } catch (const std::invalid_argument& e) {
    throw ConfigurationError(e.what());
  }
  if (!(config.epsilon > 0.0)) throw ConfigurationError("epsilon must be positive");
  if (config.max_outer_iterations < 1) throw ConfigurationError("max_outer_iterations must be at least 1");
  if (!(config.inner_tolerance_cap > 0.0) || !(config.inner_tolerance_scale > 0.0)) {
    throw ConfigurationError("inner tolerances must be positive");
  }
  if (config.max_inner_iterations < 1) throw ConfigurationError("max_inner_iterations must be at least 1");
  const Eigen::Index n = objective.dimension();
  if (x0.size() != n) throw ConfigurationError("x0 has the wrong dimension");
  if (!x0.allFinite()) throw ConfigurationError("x0 has non-finite entries");
  if (schedule.n == 0) schedule.n = n;
  if (schedule.n != n) throw ConfigurationError("schedule dimension does not match the objective");
  if (!config.allow_c1_below_L && schedule.c1 < objective.metadata().L) {
    std::ostringstream msg;
    msg << "c1 = " << schedule.c1 << " is below the problem constant L = " << objective.metadata().L
        << "; c1 >= L is required per (A2)";
    throw ConfigurationError(msg.str());
  }
  if (!config.allow_unsafe_q && schedule.q >= 1.0) {
    throw ConfigurationError("q >= 1 allows rho_k >= ||grad f||_inf, where the step may vanish");
  }
}

}  // namespace

Trajectory run(const Objective& objective, const VectorXd& x0, const SolverConfig& config, std::string problem) {
  ScheduleConfig schedule = config.schedule;
  validate(objective, x0, config, schedule);

  Trajectory trajectory;
  trajectory.problem = std::move(problem);
  trajectory.config = config;
  trajectory.config.schedule = schedule;

  using clock = std::chrono::steady_clock;
  VectorXd x = x0;
  for (int k = 0;; ++k) {
    const auto start = clock::now();
    IterationRecord rec;
    rec.k = k;
    rec.x = x;
    rec.f = objective.value(x);
    const VectorXd g = objective.gradient(x);
    rec.grad_norm = g.norm();
    rec.grad_inf_norm = g.lpNorm<Eigen::Infinity>();
    rec.noise = objective.noise(x);
    if (!std::isfinite(rec.f) || !g.allFinite()) {
      trajectory.records.push_back(std::move(rec));
      trajectory.termination = Termination::inner_failure;
      trajectory.message = "non-finite objective or gradient";
      return trajectory;
    }

    if (config.debug_assertions && !trajectory.records.empty()) {
      const Lemma2Report lemma = assert_lemma2(trajectory.records.back(), rec, schedule);
      if (!lemma.ok()) {
        std::ostringstream msg;
        msg << "descent inequalities violated at k = " << k - 1;
        throw std::logic_error(msg.str());
      }
    }

    if (rec.grad_norm <= config.epsilon || k == config.max_outer_iterations) {
      trajectory.termination = rec.grad_norm <= config.epsilon ? Termination::converged : Termination::max_iter;
      trajectory.records.push_back(std::move(rec));
      return trajectory;
    }

    const MuRho mr = mu_rho(rec.grad_norm, schedule);
    if (!(mr.rho < rec.grad_inf_norm)) {
      std::ostringstream msg;
      msg << "rho_k = " << mr.rho << " >= ||grad f||_inf = " << rec.grad_inf_norm << " at k = " << k;
      throw ConfigurationError(msg.str());
    }
    rec.mu = mr.mu;
    rec.rho = mr.rho;
    rec.inner_tolerance = inner_tolerance(config, rec.grad_norm);

    SubproblemInstance<double> instance{g, objective.hessian(x), mr.mu, schedule.p, mr.rho};
    SubproblemSolution<double> sol;
    bool failed = false;
    try {
      sol = solve(instance, rec.inner_tolerance, config.max_inner_iterations);
    } catch (const InexactSolveError<double>& e) {
      sol = e.best();
      failed = true;
      trajectory.message = e.what();
    } catch (const std::invalid_argument& e) {
      failed = true;
      trajectory.message = e.what();
      sol.d = VectorXd::Zero(x.size());
      sol.residual = std::numeric_limits<double>::infinity();
    }
    rec.has_step = !failed;
    rec.d = sol.d;
    rec.d_norm = sol.d.norm();
    rec.directional_derivative = g.dot(sol.d);
    rec.inner_residual = sol.residual;
    rec.inner_iterations = sol.inner_iterations;
    rec.subproblem_objective = sol.objective_value;
    if (config.record_wall_time) {
      rec.wall_time_ms = std::chrono::duration<double, std::milli>(clock::now() - start).count();
    }
    if (failed) {
      trajectory.records.push_back(std::move(rec));
      trajectory.termination = Termination::inner_failure;
      return trajectory;
    }
    x = rec.x + rec.d;
    trajectory.records.push_back(std::move(rec));
  }
}

Lemma2Report assert_lemma2(const IterationRecord& current, const IterationRecord& next,
                           const ScheduleConfig& schedule) {
  const double p = schedule.p, q = schedule.q;
  if (!(descent_constant(p, q) > 0.0)) {
    throw std::invalid_argument("q violates (A4): 3 - (1+q)^((3-p)/(p-1)) must be positive");
  }
  if (!current.has_step) throw std::invalid_argument("record has no step");
  const double n = static_cast<double>(schedule.n > 0 ? schedule.n : current.x.size());
  const double s = descent_constant(p, q);
  const double g0 = current.grad_norm, g1 = next.grad_norm;
  const double r = current.d_norm;
  const double residual = current.inner_residual;

  Lemma2Report rep;
  rep.decrease = next.f - current.f;
  rep.decrease_bound = -(s / 3.0) * current.mu * std::pow(r, p);
  // The stationarity residual perturbs the model decrease by at most residual * ||d||.
  const double value_floor = current.noise.value + next.noise.value + residual * r;
  rep.decrease_ok = within_slack(rep.decrease, rep.decrease_bound, value_floor) && rep.decrease < value_floor;

  const double gradient_floor = current.noise.gradient + next.noise.gradient + residual;
  rep.gradient = g1;
  rep.gradient_bound = gradient_bound_factor(p, q) * current.mu * std::pow(r, p - 1.0) +
                       std::min(q * g0, std::sqrt(n) * schedule.c2 * std::pow(g0, (p + 1.0) / 2.0));
  rep.gradient_bound_ok = within_slack(g1, rep.gradient_bound, gradient_floor);

  rep.growth_bound = growth_constant(p, q) * g0;
  rep.growth_ok = within_slack(g1, rep.growth_bound, gradient_floor);

  rep.step_norm = r;
  rep.step_norm_bound = std::pow(1.0 + q, 1.0 / (p - 1.0)) * std::sqrt(g0) / std::sqrt(schedule.c1);
  rep.step_norm_ok = within_slack(r, rep.step_norm_bound, 0.0);
  return rep;
}

}  // namespace grnm
