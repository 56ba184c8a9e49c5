#include "grnm/problems.hpp"

#include <cmath>
#include <fstream>
#include <set>
#include <stdexcept>

#include <Eigen/QR>

#include "grnm/random.hpp"

namespace grnm {

using nlohmann::json;

namespace {

constexpr std::uint64_t kStartStream = 0x9E3779B97F4A7C15ULL;

void check_keys(const json& desc, const std::set<std::string>& allowed) {
  std::string unknown;
  for (const auto& [key, value] : desc.items()) {
    if (!allowed.count(key)) unknown += (unknown.empty() ? "" : ", ") + key;
  }
  if (!unknown.empty()) throw std::invalid_argument("unknown problem keys: " + unknown);
}

double number(const json& v, const char* what) {
  if (!v.is_number()) throw std::invalid_argument(std::string(what) + " must be a number");
  return v.get<double>();
}

Eigen::Index size_field(const json& desc, const char* key) {
  if (!desc.contains(key) || !desc.at(key).is_number_integer() || desc.at(key).get<long long>() < 1) {
    throw std::invalid_argument(std::string("problem field '") + key + "' must be a positive integer");
  }
  return static_cast<Eigen::Index>(desc.at(key).get<long long>());
}

VectorXd read_vector(const json& v, const char* what) {
  if (!v.is_array()) throw std::invalid_argument(std::string(what) + " must be an array");
  VectorXd out(static_cast<Eigen::Index>(v.size()));
  for (std::size_t i = 0; i < v.size(); ++i) out(static_cast<Eigen::Index>(i)) = number(v[i], what);
  return out;
}

// Nested rows, or a flat row-major array shaped by the given columns.
MatrixXd read_matrix(const json& v, const char* what, std::optional<Eigen::Index> cols) {
  if (!v.is_array() || v.empty()) throw std::invalid_argument(std::string(what) + " must be a nonempty array");
  if (v.front().is_array()) {
    const auto rows = static_cast<Eigen::Index>(v.size());
    const auto c = static_cast<Eigen::Index>(v.front().size());
    MatrixXd out(rows, c);
    for (Eigen::Index i = 0; i < rows; ++i) {
      const json& row = v[static_cast<std::size_t>(i)];
      if (!row.is_array() || static_cast<Eigen::Index>(row.size()) != c) {
        throw std::invalid_argument(std::string(what) + " rows must have equal length");
      }
      for (Eigen::Index j = 0; j < c; ++j) out(i, j) = number(row[static_cast<std::size_t>(j)], what);
    }
    return out;
  }
  if (!cols) throw std::invalid_argument(std::string(what) + " given flat needs \"n\"");
  const auto total = static_cast<Eigen::Index>(v.size());
  if (total % *cols != 0) throw std::invalid_argument(std::string(what) + " length is not a multiple of n");
  const VectorXd flat = read_vector(v, what);
  MatrixXd out(total / *cols, *cols);
  for (Eigen::Index i = 0; i < out.rows(); ++i)
    for (Eigen::Index j = 0; j < *cols; ++j) out(i, j) = flat(i * *cols + j);
  return out;
}

std::optional<Eigen::Index> optional_n(const json& desc) {
  if (desc.contains("n")) return size_field(desc, "n");
  return std::nullopt;
}

std::uint64_t seed_of(const json& desc) {
  const json& s = desc.at("seed");
  if (!s.is_number_integer() || s.get<long long>() < 0) throw std::invalid_argument("seed must be a nonnegative integer");
  return s.get<std::uint64_t>();
}

MatrixXd random_psd(Rng& rng, Eigen::Index n, Eigen::Index rank, double eig_min, double eig_max) {
  const MatrixXd G = rng.normal_matrix(n, n);
  const MatrixXd Q = Eigen::HouseholderQR<MatrixXd>(G).householderQ();
  VectorXd lambda = VectorXd::Zero(n);
  for (Eigen::Index i = 0; i < rank; ++i) {
    const double t = rank == 1 ? 0.0 : static_cast<double>(i) / static_cast<double>(rank - 1);
    lambda(i) = eig_min * std::pow(eig_max / eig_min, t);
  }
  const MatrixXd A = Q * lambda.asDiagonal() * Q.transpose();
  return 0.5 * (A + A.transpose());
}

ObjectivePtr build_quadratic(const json& desc) {
  if (desc.contains("A")) {
    check_keys(desc, {"kind", "name", "A", "b", "n", "x0", "seed"});
    const MatrixXd A = read_matrix(desc.at("A"), "A", optional_n(desc));
    const VectorXd b = desc.contains("b") ? read_vector(desc.at("b"), "b") : VectorXd::Zero(A.rows());
    return make_quadratic(A, b);
  }
  check_keys(desc, {"kind", "name", "n", "rank", "eig_min", "eig_max", "seed", "x0"});
  const Eigen::Index n = size_field(desc, "n");
  const Eigen::Index rank = desc.contains("rank") ? size_field(desc, "rank") : n;
  if (rank > n) throw std::invalid_argument("rank must not exceed n");
  const double eig_min = desc.contains("eig_min") ? number(desc.at("eig_min"), "eig_min") : 1.0;
  const double eig_max = desc.contains("eig_max") ? number(desc.at("eig_max"), "eig_max") : 10.0;
  if (!(eig_min > 0.0 && eig_max >= eig_min)) throw std::invalid_argument("need 0 < eig_min <= eig_max");
  if (!desc.contains("seed")) throw std::invalid_argument("generated problems need a seed");
  Rng rng(seed_of(desc));
  const MatrixXd A = random_psd(rng, n, rank, eig_min, eig_max);
  const VectorXd z = rng.normal_vector(n);
  return make_quadratic(A, A * z);
}

ObjectivePtr build_logistic(const json& desc) {
  if (desc.contains("X")) {
    check_keys(desc, {"kind", "name", "X", "y", "n", "x0", "seed"});
    const MatrixXd X = read_matrix(desc.at("X"), "X", optional_n(desc));
    if (!desc.contains("y")) throw std::invalid_argument("logistic needs labels \"y\"");
    return make_logistic(X, read_vector(desc.at("y"), "y"));
  }
  check_keys(desc, {"kind", "name", "m", "n", "seed", "x0"});
  const Eigen::Index m = size_field(desc, "m"), n = size_field(desc, "n");
  if (!desc.contains("seed")) throw std::invalid_argument("generated problems need a seed");
  Rng rng(seed_of(desc));
  const MatrixXd X = rng.normal_matrix(m, n) / std::sqrt(static_cast<double>(n));
  const VectorXd w_true = rng.normal_vector(n);
  VectorXd y(m);
  for (Eigen::Index i = 0; i < m; ++i) {
    const double prob = 1.0 / (1.0 + std::exp(-X.row(i).dot(w_true)));
    y(i) = rng.uniform() < prob ? 1.0 : -1.0;
  }
  return make_logistic(X, y);
}

ObjectivePtr build_logsumexp(const json& desc) {
  if (desc.contains("A")) {
    check_keys(desc, {"kind", "name", "A", "b", "n", "x0", "seed"});
    const MatrixXd A = read_matrix(desc.at("A"), "A", optional_n(desc));
    const VectorXd b = desc.contains("b") ? read_vector(desc.at("b"), "b") : VectorXd::Zero(A.rows());
    return make_logsumexp(A, b);
  }
  check_keys(desc, {"kind", "name", "m", "n", "seed", "x0"});
  const Eigen::Index m = size_field(desc, "m"), n = size_field(desc, "n");
  if (!desc.contains("seed")) throw std::invalid_argument("generated problems need a seed");
  Rng rng(seed_of(desc));
  const MatrixXd A = rng.normal_matrix(m, n) / std::sqrt(static_cast<double>(n));
  const VectorXd b = rng.normal_vector(m);
  return make_logsumexp(A, b);
}

std::string default_name(const json& desc) {
  std::string name = desc.at("kind").get<std::string>();
  if (desc.contains("m")) name += "_" + desc.at("m").dump() + "x" + desc.at("n").dump();
  else if (desc.contains("n")) name += "_" + desc.at("n").dump();
  if (desc.contains("seed")) name += "_s" + desc.at("seed").dump();
  return name;
}

const std::vector<std::pair<std::string, json>>& builtins() {
  static const std::vector<std::pair<std::string, json>> table = {
      {"logistic_100x20", {{"kind", "logistic"}, {"m", 100}, {"n", 20}, {"seed", 13}}},
      {"logsumexp_30x10", {{"kind", "logsumexp"}, {"m", 30}, {"n", 10}, {"seed", 14}}},
      {"quadratic_pd_10",
       {{"kind", "quadratic"}, {"n", 10}, {"rank", 10}, {"eig_min", 0.1}, {"eig_max", 10.0}, {"seed", 11}}},
      {"quadratic_singular_10",
       {{"kind", "quadratic"}, {"n", 10}, {"rank", 6}, {"eig_min", 0.5}, {"eig_max", 5.0}, {"seed", 12}}},
  };
  return table;
}

}  // namespace

const std::vector<std::string>& builtin_problem_names() {
  static const std::vector<std::string> names = [] {
    std::vector<std::string> out;
    for (const auto& [name, desc] : builtins()) out.push_back(name);
    return out;
  }();
  return names;
}

json builtin_problem_spec(const std::string& name) {
  for (const auto& [key, desc] : builtins()) {
    if (key == name) {
      json out = desc;
      out["name"] = name;
      return out;
    }
  }
  throw std::invalid_argument("unknown built-in problem: " + name);
}

Problem load_problem(const json& input) {
  const json desc = input.is_string() ? builtin_problem_spec(input.get<std::string>()) : input;
  if (!desc.is_object()) throw std::invalid_argument("problem desc must be an object or a built-in name");
  if (!desc.contains("kind") || !desc.at("kind").is_string()) {
    throw std::invalid_argument("problem description needs a string \"kind\"");
  }
  const std::string kind = desc.at("kind").get<std::string>();
  Problem problem;
  problem.desc = desc;
  if (kind == "quadratic") {
    problem.objective = build_quadratic(desc);
  } else if (kind == "logistic") {
    problem.objective = build_logistic(desc);
  } else if (kind == "logsumexp") {
    problem.objective = build_logsumexp(desc);
  } else {
    throw std::invalid_argument("unknown problem kind: " + kind);
  }
  if (desc.contains("name")) {
    if (!desc.at("name").is_string()) throw std::invalid_argument("problem name must be a string");
    problem.name = desc.at("name").get<std::string>();
  } else {
    problem.name = default_name(desc);
  }
  const Eigen::Index n = problem.objective->dimension();
  if (desc.contains("x0")) {
    problem.x0 = read_vector(desc.at("x0"), "x0");
    if (problem.x0.size() != n) throw std::invalid_argument("x0 has the wrong dimension");
  } else if (desc.contains("seed")) {
    Rng rng(seed_of(desc) ^ kStartStream);
    problem.x0 = rng.normal_vector(n);
  } else {
    problem.x0 = VectorXd::Zero(n);
  }
  return problem;
}

Problem load_problem_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot open problem file: " + path.string());
  json desc;
  try {
    desc = json::parse(in);
  } catch (const json::parse_error& e) {
    throw std::invalid_argument("invalid JSON in " + path.string() + ": " + e.what());
  }
  return load_problem(desc);
}

}  // namespace grnm
