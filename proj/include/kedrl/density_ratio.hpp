#pragma once

#include <string>

#include <Eigen/Core>
#include <json.hpp>

#include "kedrl/kernel.hpp"

namespace kedrl {

/// eta(x) = max(0, sum_j alpha_j k(center_j, x)), fitted by uLSIF.
struct RatioModel {
    Eigen::VectorXd alpha;
    Eigen::MatrixXd centers;  // n_beta x (p + q)
    MaternParams params;
    double lambda_ulsif = 1e-3;
};

/// Centers are the behavior samples. Solves (K_bb K_bb^T / n_b + lambda I) alpha = K_bp 1 / n_p
/// by Cholesky.
RatioModel fit_ulsif(const Eigen::MatrixXd& x_beta, const Eigen::MatrixXd& x_pi, const MaternParams& params,
                     double lambda_ulsif = 1e-3);

double eval_ratio(const RatioModel& model, const Eigen::VectorXd& query);
Eigen::VectorXd eval_ratio(const RatioModel& model, const Eigen::MatrixXd& queries);

nlohmann::json ratio_to_json(const RatioModel& model);
RatioModel ratio_from_json(const nlohmann::json& j);

}  // namespace kedrl
