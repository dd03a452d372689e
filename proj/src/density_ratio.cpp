#include "kedrl/density_ratio.hpp"

#include <algorithm>
#include <cmath>

#include <Eigen/Cholesky>

#include "kedrl/errors.hpp"
#include "kedrl/serialize.hpp"

namespace kedrl {

RatioModel fit_ulsif(const Eigen::MatrixXd& x_beta, const Eigen::MatrixXd& x_pi, const MaternParams& params,
                     double lambda_ulsif) {
    detail::require(x_beta.rows() >= 1 && x_pi.rows() >= 1, "fit_ulsif: both samples must be nonempty");
    detail::require(x_beta.cols() == x_pi.cols(), "fit_ulsif: sample dimensions differ");
    detail::require(std::isfinite(lambda_ulsif) && lambda_ulsif > 0.0, "fit_ulsif: lambda must be > 0");
    params.validate();

    const double nb = static_cast<double>(x_beta.rows());
    const double np = static_cast<double>(x_pi.rows());
    const Eigen::MatrixXd k_bb = gram(x_beta, params);
    const Eigen::MatrixXd k_bp = gram(x_beta, x_pi, params);

    Eigen::MatrixXd system(k_bb.rows(), k_bb.rows());
    system.setZero();
    system.selfadjointView<Eigen::Lower>().rankUpdate(k_bb, 1.0 / nb);
    system = system.selfadjointView<Eigen::Lower>();
    system.diagonal().array() += lambda_ulsif;
    const Eigen::VectorXd v = k_bp.rowwise().sum() / np;

    Eigen::LLT<Eigen::MatrixXd> llt(system);
    if (llt.info() != Eigen::Success) {
        throw NumericalError("fit_ulsif: Cholesky of (V + lambda I) failed (n_beta=" +
                             std::to_string(x_beta.rows()) + ", lambda=" + std::to_string(lambda_ulsif) + ")");
    }
    Eigen::VectorXd alpha = llt.solve(v);
    alpha += llt.solve(Eigen::VectorXd(v - system * alpha));
    if (!alpha.allFinite()) throw NumericalError("fit_ulsif: non-finite coefficients");
    return {alpha, x_beta, params, lambda_ulsif};
}

double eval_ratio(const RatioModel& model, const Eigen::VectorXd& query) {
    detail::require(query.size() == model.centers.cols(), "eval_ratio: query dimension mismatch");
    return std::max(0.0, kernel_vector(model.centers, query, model.params).dot(model.alpha));
}

Eigen::VectorXd eval_ratio(const RatioModel& model, const Eigen::MatrixXd& queries) {
    detail::require(queries.rows() == 0 || queries.cols() == model.centers.cols(),
                    "eval_ratio: query dimension mismatch");
    Eigen::VectorXd raw = gram(queries, model.centers, model.params) * model.alpha;
    return raw.cwiseMax(0.0);
}

nlohmann::json ratio_to_json(const RatioModel& model) {
    return {{"alpha", vector_to_json(model.alpha)},
            {"centers", matrix_to_json(model.centers)},
            {"params", params_to_json(model.params)},
            {"lambda_ulsif", model.lambda_ulsif}};
}

RatioModel ratio_from_json(const nlohmann::json& j) {
    RatioModel m;
    m.alpha = vector_from_json(j.at("alpha"));
    m.centers = matrix_from_json(j.at("centers"));
    m.params = params_from_json(j.at("params"));
    m.lambda_ulsif = j.at("lambda_ulsif").get<double>();
    detail::require(m.alpha.size() == m.centers.rows(), "ratio model: alpha/centers length mismatch");
    return m;
}

}  // namespace kedrl
