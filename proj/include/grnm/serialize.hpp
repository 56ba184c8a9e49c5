#pragma once

#include <iosfwd>
#include <string>

#include <json.hpp>

#include "grnm/analysis.hpp"
#include "grnm/solver.hpp"

namespace grnm {

/// Shortest decimal that reads back to the same double; "inf", "-inf", "nan"
/// otherwise.
std::string format_double(double v);

/// Finite values as numbers, the rest as the strings above.
nlohmann::json json_number(double v);
double number_from_json(const nlohmann::json& j);

nlohmann::json to_json(const SolverConfig& config);
SolverConfig solver_config_from_json(const nlohmann::json& j);

nlohmann::json to_json(const Trajectory& trajectory);
Trajectory trajectory_from_json(const nlohmann::json& j);

/// Columns k,f,grad_norm,mu,rho,d_norm,inner_residual,wall_time_ms; the final
/// record (no step) leaves the step columns empty.
void write_trajectory_csv(std::ostream& out, const Trajectory& trajectory);

nlohmann::json to_json(const CheckResult& check);
nlohmann::json to_json(const CertificateReport& report);
nlohmann::json to_json(const LocalRateEstimate& estimate);

/// Columns check, status, first-violation-k, margin.
std::string certificate_table(const CertificateReport& report);

}  // namespace grnm
