#pragma once

// Serialization of policies, solve reports and the CSV outputs.

#include "json.hpp"

#include <iosfwd>
#include <string>
#include <vector>

#include "covsteer/bench.hpp"
#include "covsteer/simulate.hpp"
#include "covsteer/solve_report.hpp"

namespace covsteer {

/// "%.17g".
std::string format_number(double v);

nlohmann::json matrix_to_json(const Eigen::MatrixXd& m);  // array of rows
Eigen::MatrixXd matrix_from_json(const nlohmann::json& j, const std::string& field);
nlohmann::json gaussian_to_json(const GaussianD& g);

/// History policies store the Theta gain plus its K form; memoryless ones a
/// gain per stage. Doubles round-trip exactly.
nlohmann::json policy_to_json(const Policy& policy, const BlockOperators& ops);
/// Throws DimMismatch if the file does not fit `ops`.
Policy policy_from_json(const nlohmann::json& doc, const BlockOperators& ops);

nlohmann::json report_to_json(const SolveReport& report, const std::string& solver, const std::string& cost,
                              const std::vector<GaussianD>& stages);

void write_json_file(const std::string& path, const nlohmann::json& doc);
nlohmann::json read_json_file(const std::string& path);

/// stage,point_index,x,y over the first two state coordinates.
void write_ellipses_csv(std::ostream& os, const std::vector<GaussianD>& stages, double n_sigma = 2.0,
                        int n_points = 65);
/// iter,objective,delta,wall_ms with delta = previous - current (0 on row 0).
void write_trace_csv(std::ostream& os, const SolveReport& report);
/// path_id,stage,x1..x_nx for the first `max_paths` paths.
void write_paths_csv(std::ostream& os, const RolloutBatch& batch, int max_paths);
/// stage,n,mean_1..,cov_1_1,cov_1_2,.. (row-major covariance).
void write_empirical_csv(std::ostream& os, const RolloutBatch& batch);

}  // namespace covsteer
