#include <gtest/gtest.h>

#include <cmath>

#include "grnm/oracle.hpp"
#include "grnm/problems.hpp"
#include "grnm/solver.hpp"

using namespace grnm;

namespace {

SolverConfig config_for(const Objective& f, double p, double q, double c1 = 0.0) {
  SolverConfig c;
  c.schedule.p = p;
  c.schedule.q = q;
  c.schedule.c1 = c1 > 0 ? c1 : std::max(f.metadata().L, 1e-3);
  c.debug_assertions = true;
  return c;
}

ObjectivePtr isotropic(Eigen::Index n) { return make_quadratic(MatrixXd::Identity(n, n), VectorXd::Zero(n)); }

VectorXd vec2(double a, double b) {
  VectorXd v(2);
  v << a, b;
  return v;
}

}  // namespace

TEST(Run, IsotropicQuadraticClosedForm) {
  const auto f = isotropic(2);
  const Trajectory t = run(*f, vec2(1, 0), config_for(*f, 2.0, 0.0, 1.0));
  ASSERT_GE(t.records.size(), 2u);
  EXPECT_NEAR(t.records[0].d(0), -0.5, 1e-15);
  EXPECT_EQ(t.records[0].d(1), 0.0);
  EXPECT_NEAR(t.records[1].x(0), 0.5, 1e-15);
  for (std::size_t k = 0; k + 1 < t.records.size(); ++k) {
    const double xk = t.records[k].x(0), mu = std::sqrt(std::abs(xk));
    EXPECT_NEAR(t.records[k].mu, mu, 1e-15);
    EXPECT_NEAR(t.records[k + 1].x(0), xk - xk / (1 + mu), 1e-15 * (1 + std::abs(xk)));
  }
  EXPECT_EQ(t.termination, Termination::converged);
  EXPECT_LE(t.records.back().grad_norm, 1e-8);
}

TEST(Run, ImmediateConvergence) {
  const auto f = isotropic(2);
  const Trajectory t = run(*f, vec2(1e-9, 0), config_for(*f, 3.0, 0.0, 1.0));
  ASSERT_EQ(t.records.size(), 1u);
  EXPECT_EQ(t.termination, Termination::converged);
  EXPECT_FALSE(t.records[0].has_step);
}

TEST(Run, CubicLogisticConverges) {
  const Problem p = load_problem("logistic_100x20");
  const Trajectory t = run(*p.objective, p.x0, config_for(*p.objective, 3.0, 0.0), p.name);
  EXPECT_EQ(t.termination, Termination::converged);
  EXPECT_LE(t.records.back().grad_norm, 1e-8);
  EXPECT_LE(t.records.size(), 101u);
  EXPECT_EQ(t.records.size(), 52u);
  EXPECT_EQ(t.problem, "logistic_100x20");
}

TEST(Run, MaxIterations) {
  const Problem p = load_problem("logistic_100x20");
  SolverConfig c = config_for(*p.objective, 3.0, 0.0);
  c.max_outer_iterations = 5;
  const Trajectory t = run(*p.objective, p.x0, c);
  EXPECT_EQ(t.termination, Termination::max_iter);
  EXPECT_EQ(t.records.size(), 6u);
  EXPECT_FALSE(t.records.back().has_step);
}

TEST(Run, InnerFailureKeepsTrajectory) {
  const Problem p = load_problem("logsumexp_30x10");
  SolverConfig c = config_for(*p.objective, 2.0, preset(2, 2.0).q);
  c.inner_tolerance_cap = 1e-300;
  c.inner_tolerance_scale = 1e-300;
  c.max_inner_iterations = 50;
  const Trajectory t = run(*p.objective, p.x0, c);
  EXPECT_EQ(t.termination, Termination::inner_failure);
  ASSERT_FALSE(t.records.empty());
  EXPECT_FALSE(t.records.back().has_step);
  EXPECT_EQ(t.records.back().d.size(), 10);
  EXPECT_FALSE(t.message.empty());
}

TEST(Run, RefusesC1BelowL) {
  const Problem p = load_problem("logsumexp_30x10");
  SolverConfig c = config_for(*p.objective, 3.0, 0.0, 0.5 * p.objective->metadata().L);
  EXPECT_THROW(run(*p.objective, p.x0, c), ConfigurationError);
  c.allow_c1_below_L = true;
  c.debug_assertions = false;
  EXPECT_NO_THROW(run(*p.objective, p.x0, c));
}

TEST(Run, RefusesUnsafeQ) {
  const auto f = isotropic(1);
  SolverConfig c = config_for(*f, 2.0, 1.2, 1.0);
  VectorXd x0(1);
  x0 << 10.0;
  EXPECT_THROW(run(*f, x0, c), ConfigurationError);
  c.allow_unsafe_q = true;
  EXPECT_THROW(run(*f, x0, c), ConfigurationError);
}

TEST(Run, RejectsBadInputs) {
  const auto f = isotropic(2);
  SolverConfig c = config_for(*f, 2.0, 0.0, 1.0);
  EXPECT_THROW(run(*f, VectorXd::Ones(3), c), ConfigurationError);
  EXPECT_THROW(run(*f, vec2(NAN, 0), c), ConfigurationError);
  c.epsilon = 0.0;
  EXPECT_THROW(run(*f, vec2(1, 0), c), ConfigurationError);
  c = config_for(*f, 2.0, 0.0, 1.0);
  c.schedule.c2 = 1.5;
  EXPECT_THROW(run(*f, vec2(1, 0), c), ConfigurationError);
}

TEST(Run, Deterministic) {
  const Problem p = load_problem("logsumexp_30x10");
  const SolverConfig c = config_for(*p.objective, 2.5, 0.05);
  const Trajectory a = run(*p.objective, p.x0, c), b = run(*p.objective, p.x0, c);
  ASSERT_EQ(a.records.size(), b.records.size());
  for (std::size_t k = 0; k < a.records.size(); ++k) {
    EXPECT_EQ(a.records[k].x, b.records[k].x);
    EXPECT_EQ(a.records[k].f, b.records[k].f);
  }
}

TEST(Run, SuiteInvariants) {
  for (const auto& name : builtin_problem_names()) {
    const Problem p = load_problem(name);
    const double f0 = p.objective->value(p.x0);
    for (double pw : {2.0, 3.0}) {
      for (int ex : {1, 2}) {
        const Trajectory t = run(*p.objective, p.x0, config_for(*p.objective, pw, preset(ex, pw).q));
        SCOPED_TRACE(name + " p=" + std::to_string(pw) + " example " + std::to_string(ex));
        EXPECT_EQ(t.termination, Termination::converged);
        for (std::size_t k = 0; k + 1 < t.records.size(); ++k) {
          const auto& r = t.records[k];
          EXPECT_TRUE(r.has_step);
          EXPECT_GT(r.d_norm, 0.0);
          EXPECT_LT(r.directional_derivative, 0.0);
          EXPECT_LE(r.inner_residual, r.inner_tolerance);
          EXPECT_LT(t.records[k + 1].f, r.f + r.noise.value);
          EXPECT_LE(t.records[k + 1].f, f0 + t.records[k + 1].noise.value);
          EXPECT_TRUE(assert_lemma2(r, t.records[k + 1], t.config.schedule).ok());
        }
      }
    }
  }
}

TEST(AssertLemma2, ClassicalGrowthFactor) {
  const auto f = isotropic(2);
  const Trajectory t = run(*f, vec2(1, 0), config_for(*f, 2.0, 0.0, 1.0));
  const auto rep = assert_lemma2(t.records[0], t.records[1], t.config.schedule);
  EXPECT_TRUE(rep.ok());
  EXPECT_EQ(rep.growth_bound, 2.0);

  IterationRecord forged = t.records[1];
  forged.grad_norm = 3.0 * t.records[0].grad_norm;
  forged.f = t.records[0].f + 1.0;
  const auto bad = assert_lemma2(t.records[0], forged, t.config.schedule);
  EXPECT_FALSE(bad.growth_ok);
  EXPECT_FALSE(bad.decrease_ok);
}

TEST(AssertLemma2, StrictDecreaseForQuadratic) {
  const Problem p = load_problem("quadratic_pd_10");
  const Trajectory t = run(*p.objective, p.x0, config_for(*p.objective, 3.0, 0.0));
  for (std::size_t k = 0; k + 1 < t.records.size(); ++k) {
    const auto rep = assert_lemma2(t.records[k], t.records[k + 1], t.config.schedule);
    EXPECT_LT(rep.decrease, rep.decrease_bound);
    // with L = 0 the decrease is at least mu ||d||^p, i.e. the bound with s = 3
    const auto& r = t.records[k];
    EXPECT_TRUE(within_slack(t.records[k + 1].f - r.f, -r.mu * std::pow(r.d_norm, 3.0), r.noise.value));
  }
}

TEST(AssertLemma2, RequiresAStep) {
  const auto f = isotropic(2);
  const Trajectory t = run(*f, vec2(1, 0), config_for(*f, 2.0, 0.0, 1.0));
  EXPECT_THROW(assert_lemma2(t.records.back(), t.records.back(), t.config.schedule), std::invalid_argument);
}

TEST(InnerTolerance, Formula) {
  SolverConfig c;
  c.schedule.p = 3.0;
  EXPECT_EQ(inner_tolerance(c, 1.0), 1e-10);
  EXPECT_NEAR(inner_tolerance(c, 1e-4), 1e-3 * 1e-8, 1e-25);
}

TEST(WithinSlack, Basics) {
  EXPECT_TRUE(within_slack(1.0 + 1e-7, 1.0, 0.0));
  EXPECT_FALSE(within_slack(1.0 + 1e-5, 1.0, 0.0));
  EXPECT_TRUE(within_slack(1e-20, 0.0, 1e-19));
}

TEST(Termination, RoundTrip) {
  for (auto t : {Termination::converged, Termination::max_iter, Termination::inner_failure}) {
    EXPECT_EQ(termination_from_string(to_string(t)), t);
  }
  EXPECT_THROW(termination_from_string("bogus"), std::invalid_argument);
}
