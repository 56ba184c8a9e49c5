#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "grnm/oracle.hpp"

namespace grnm {

struct Problem {
  std::string name;
  nlohmann::json desc;
  ObjectivePtr objective;
  VectorXd x0;
};

/// Builds a problem from a JSON description:
///   {"kind": "quadratic", "A": [[...], ...], "b": [...]}
///   {"kind": "quadratic", "n": 10, "rank": 6, "eig_min": 0.5, "eig_max": 5, "seed": 12}
///   {"kind": "logistic", "X": [[...]], "y": [...]}       or {"kind": "logistic", "m", "n", "seed"}
///   {"kind": "logsumexp", "A": [[...]], "b": [...]}      or {"kind": "logsumexp", "m", "n", "seed"}
/// Matrices are arrays of rows, or flat row-major arrays next to "m"/"n".
/// Optional "name" and "x0"; without "x0" the start is N(0, I) drawn from the
/// seed (zero when there is no seed). A string is looked up among the
/// built-in problems.
Problem load_problem(const nlohmann::json& desc);

Problem load_problem_file(const std::filesystem::path& path);

const std::vector<std::string>& builtin_problem_names();

/// Throws std::invalid_argument for unknown names.
nlohmann::json builtin_problem_spec(const std::string& name);

}  // namespace grnm
