#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "brute_force.hpp"
#include "grnm/oracle.hpp"
#include "grnm/problems.hpp"
#include "grnm/random.hpp"

using namespace grnm;

namespace {

MatrixXd mat(std::initializer_list<std::initializer_list<double>> rows) {
  MatrixXd m(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(rows.begin()->size()));
  Eigen::Index i = 0;
  for (auto row : rows) {
    Eigen::Index j = 0;
    for (double v : row) m(i, j++) = v;
    ++i;
  }
  return m;
}

void expect_derivatives_consistent(const Objective& f, std::uint64_t seed, double scale) {
  Rng rng(seed);
  const Eigen::Index n = f.dimension();
  const double h = 1e-5;
  for (int t = 0; t < 100; ++t) {
    const VectorXd x = scale * rng.normal_vector(n);
    const VectorXd u = rng.normal_vector(n).normalized();
    const double fd_value = (f.value(x + h * u) - f.value(x - h * u)) / (2 * h);
    const VectorXd g = f.gradient(x);
    EXPECT_NEAR(fd_value, g.dot(u), 1e-6 * (1 + g.norm()));
    const VectorXd fd_grad = (f.gradient(x + h * u) - f.gradient(x - h * u)) / (2 * h);
    const VectorXd Hu = f.hessian(x) * u;
    EXPECT_LE((fd_grad - Hu).norm(), 1e-6 * (1 + Hu.norm()));
  }
}

}  // namespace

TEST(Quadratic, MinNormSolutionOfSingularMatrix) {
  const auto f = make_quadratic(mat({{1, 0}, {0, 0}}), VectorXd::Unit(2, 0));
  const auto& md = f->metadata();
  EXPECT_NEAR(md.x_star(0), 1.0, 1e-15);
  EXPECT_EQ(md.x_star(1), 0.0);
  EXPECT_NEAR(md.f_star, -0.5, 1e-15);
  EXPECT_EQ(md.L, 0.0);
  ASSERT_TRUE(md.m1);
  EXPECT_NEAR(*md.m1, 1.0, 1e-14);
  EXPECT_TRUE(f->exact_solution_set());
  VectorXd x(2);
  x << 1.0, 7.0;
  EXPECT_NEAR(f->distance_to_solutions(x), 0.0, 1e-15);
  EXPECT_FALSE(f->sublevel_radius(0.0));
}

TEST(Quadratic, Rejections) {
  EXPECT_THROW(make_quadratic(mat({{1, 0}, {0, 0}}), VectorXd::Unit(2, 1)), std::invalid_argument);
  EXPECT_THROW(make_quadratic(mat({{1, 2}, {0, 1}}), VectorXd::Zero(2)), std::invalid_argument);
  EXPECT_THROW(make_quadratic(mat({{-1, 0}, {0, 1}}), VectorXd::Zero(2)), std::invalid_argument);
  EXPECT_THROW(make_quadratic(mat({{1, 0}, {0, 1}}), VectorXd::Zero(3)), std::invalid_argument);
}

TEST(Quadratic, SublevelRadiusContainsSublevelSet) {
  const auto f = make_quadratic(mat({{2, 0}, {0, 0.5}}), VectorXd::Ones(2));
  const double level = f->metadata().f_star + 3.0;
  const double R = *f->sublevel_radius(level);
  Rng rng(3);
  for (int t = 0; t < 2000; ++t) {
    const VectorXd x = 10.0 * rng.normal_vector(2);
    if (f->value(x) <= level) {
      EXPECT_LE(x.norm(), R);
    }
  }
}

TEST(LogSumExp, SymmetricPair) {
  const auto f = make_logsumexp(mat({{1}, {-1}}), VectorXd::Zero(2));
  EXPECT_NEAR(f->metadata().x_star(0), 0.0, 1e-12);
  EXPECT_NEAR(f->metadata().f_star, std::numbers::ln2, 1e-15);
  EXPECT_EQ(f->metadata().L, 1.0);
}

TEST(LogSumExp, AffineRejected) {
  EXPECT_THROW(make_logsumexp(mat({{1, 2}}), VectorXd::Zero(1)), std::invalid_argument);
}

TEST(LogSumExp, PreSolveAgreesWithAcceleratedGradient) {
  const Problem p = load_problem("logsumexp_30x10");
  const auto& md = p.objective->metadata();
  EXPECT_LE(p.objective->gradient(md.x_star).norm(), 1e-12);
  const double Lg = std::pow(std::cbrt(md.L), 2);
  const double best = reference::accelerated_gradient_value(*p.objective, VectorXd::Zero(10), Lg, 200000);
  EXPECT_NEAR(best, md.f_star, 1e-9);
}

TEST(Logistic, SeparableDataRejected) {
  VectorXd y(2);
  y << 1.0, -1.0;
  EXPECT_THROW(make_logistic(mat({{1}, {-1}}), y), std::invalid_argument);
}

TEST(Logistic, LabelsValidated) {
  EXPECT_THROW(make_logistic(mat({{1}, {2}}), VectorXd::Zero(2)), std::invalid_argument);
}

TEST(Logistic, PreSolveAgreesWithAcceleratedGradient) {
  const Problem p = load_problem("logistic_100x20");
  const auto& md = p.objective->metadata();
  EXPECT_LE(p.objective->gradient(md.x_star).norm(), 1e-12);
  const MatrixXd H0 = p.objective->hessian(VectorXd::Zero(20));
  const double Lg = Eigen::SelfAdjointEigenSolver<MatrixXd>(H0).eigenvalues().maxCoeff();
  const double best = reference::accelerated_gradient_value(*p.objective, VectorXd::Zero(20), Lg, 200000);
  EXPECT_NEAR(best, md.f_star, 1e-9);
}

TEST(CheckA1, QuadraticResidualsVanish) {
  const Problem p = load_problem("quadratic_pd_10");
  const auto pairs = sample_pairs(10, 200, 5.0, 1);
  const auto rep = check_a1(*p.objective, 0.0, pairs);
  EXPECT_EQ(rep.pairs, 200);
  EXPECT_EQ(rep.gradient_ratio, 0.0);
  EXPECT_EQ(rep.value_ratio, 0.0);
  EXPECT_TRUE(rep.ok());
}

TEST(CheckA1, SuiteConstantsHold) {
  for (const char* name : {"logistic_100x20", "logsumexp_30x10"}) {
    const Problem p = load_problem(name);
    const auto pairs = sample_pairs(p.objective->dimension(), 300, 3.0, 2);
    const auto rep = check_a1(*p.objective, p.objective->metadata().L, pairs);
    EXPECT_TRUE(rep.ok()) << name << " " << rep.gradient_ratio << " " << rep.value_ratio;
    EXPECT_GT(rep.gradient_ratio, 0.0) << name;
  }
}

TEST(CheckA1, IdenticalPointsGiveZero) {
  const Problem p = load_problem("logsumexp_30x10");
  const VectorXd x = VectorXd::Constant(10, 0.3);
  const std::vector<std::pair<VectorXd, VectorXd>> pairs{{x, x}};
  const auto rep = check_a1(*p.objective, p.objective->metadata().L, pairs);
  EXPECT_EQ(rep.max_gradient_residual, 0.0);
  EXPECT_EQ(rep.max_value_residual, 0.0);
}

TEST(CheckA1, TooSmallConstantDetected) {
  const Problem p = load_problem("logsumexp_30x10");
  const auto pairs = sample_pairs(10, 100, 3.0, 4);
  EXPECT_FALSE(check_a1(*p.objective, 1e-6, pairs).ok());
}

TEST(SuiteProblems, DerivativesConsistent) {
  std::uint64_t seed = 50;
  for (const auto& name : builtin_problem_names()) {
    const Problem p = load_problem(name);
    SCOPED_TRACE(name);
    expect_derivatives_consistent(*p.objective, seed++, 1.0);
  }
}

TEST(SuiteProblems, OptimalValueIsGlobalLowerBound) {
  Rng rng(60);
  for (const auto& name : builtin_problem_names()) {
    const Problem p = load_problem(name);
    const auto& md = p.objective->metadata();
    for (int t = 0; t < 1000; ++t) {
      const VectorXd x = md.x_star + (t % 2 ? 0.01 : 3.0) * rng.normal_vector(p.objective->dimension());
      EXPECT_GE(p.objective->value(x), md.f_star - p.objective->noise(x).value) << name;
    }
  }
}

TEST(SuiteProblems, SingularQuadraticErrorBound) {
  const Problem p = load_problem("quadratic_singular_10");
  const double m1 = *p.objective->metadata().m1;
  const VectorXd x_star = p.objective->metadata().x_star;
  ASSERT_NEAR(m1, 2.0, 1e-10);
  Rng rng(61);
  for (int t = 0; t < 1000; ++t) {
    const double scale = rng.uniform(0.001, 5.0);
    const VectorXd x = x_star + scale * rng.normal_vector(10);
    const double dist = p.objective->distance_to_solutions(x);
    EXPECT_LE(dist, m1 * p.objective->gradient(x).norm() * (1 + 1e-10) + 1e-14);
  }
}

TEST(SuiteProblems, CertifiedRadiiContainSublevelSets) {
  Rng rng(62);
  for (const char* name : {"logistic_100x20", "logsumexp_30x10", "quadratic_pd_10"}) {
    const Problem p = load_problem(name);
    const double level = p.objective->value(p.x0);
    const auto R = p.objective->sublevel_radius(level);
    ASSERT_TRUE(R) << name;
    EXPECT_GE(*R, p.x0.norm()) << name;
    const VectorXd& xs = p.objective->metadata().x_star;
    for (int t = 0; t < 500; ++t) {
      const VectorXd u = rng.normal_vector(xs.size()).normalized();
      // walk out along the ray until the level is exceeded
      double s = 0.0, step = 0.05 * (*R);
      while (s < 2.0 * (*R) && p.objective->value(xs + (s + step) * u) <= level) s += step;
      EXPECT_LE((xs + s * u).norm(), *R) << name;
    }
  }
}

TEST(Problems, BuiltinsAreDeterministic) {
  for (const auto& name : builtin_problem_names()) {
    const Problem a = load_problem(name), b = load_problem(name);
    EXPECT_EQ(a.x0, b.x0);
    EXPECT_EQ(a.objective->metadata().x_star, b.objective->metadata().x_star);
    EXPECT_EQ(a.name, name);
  }
}

TEST(Problems, InlineDescriptions) {
  const Problem p = load_problem(nlohmann::json::parse(
      R"({"kind":"quadratic","name":"tiny","A":[1,0,0,4],"n":2,"b":[1,2],"x0":[0,1]})"));
  EXPECT_EQ(p.name, "tiny");
  EXPECT_NEAR(p.objective->metadata().x_star(1), 0.5, 1e-15);
  EXPECT_EQ(p.x0(1), 1.0);
}

TEST(Problems, DescriptionErrors) {
  using nlohmann::json;
  EXPECT_THROW(load_problem(json("no_such_problem")), std::invalid_argument);
  EXPECT_THROW(load_problem(json::parse(R"({"kind":"cone"})")), std::invalid_argument);
  EXPECT_THROW(load_problem(json::parse(R"({"kind":"quadratic","n":3})")), std::invalid_argument);
  EXPECT_THROW(load_problem(json::parse(R"({"kind":"quadratic","n":3,"seed":1,"colour":2})")),
               std::invalid_argument);
  EXPECT_THROW(load_problem(json::parse(R"({"kind":"quadratic","A":[[1,0],[0,1]],"x0":[1]})")),
               std::invalid_argument);
}
