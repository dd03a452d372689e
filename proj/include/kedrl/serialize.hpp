#pragma once

#include <string>

#include <Eigen/Core>
#include <json.hpp>

#include "kedrl/kernel.hpp"

namespace kedrl {

nlohmann::json vector_to_json(const Eigen::VectorXd& v);
Eigen::VectorXd vector_from_json(const nlohmann::json& j);

/// Row-major nested arrays.
nlohmann::json matrix_to_json(const Eigen::MatrixXd& m);
Eigen::MatrixXd matrix_from_json(const nlohmann::json& j);

/// Accepts either "variance" or "sigma" (not both); always writes variance.
nlohmann::json params_to_json(const MaternParams& p);
MaternParams params_from_json(const nlohmann::json& j);

/// Plain numeric CSV, optional header row, full double precision.
void write_matrix_csv(const std::string& path, const Eigen::MatrixXd& m, const std::string& header = {});
Eigen::MatrixXd read_matrix_csv(const std::string& path);

nlohmann::json read_json_file(const std::string& path);
void write_json_file(const std::string& path, const nlohmann::json& j);

}  // namespace kedrl
