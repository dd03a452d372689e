#include "kedrl/cme.hpp"

#include <cmath>
#include <limits>
#include <sstream>

#include "kedrl/errors.hpp"

namespace kedrl {
namespace {

constexpr double kClampTol = 1e-12;

}  // namespace

RidgeSolver::RidgeSolver(const Eigen::MatrixXd& gram, double lambda_reg) : lambda_(lambda_reg) {
    detail::require(gram.rows() == gram.cols(), "ridge: gram must be square");
    detail::require(std::isfinite(lambda_reg) && lambda_reg > 0.0, "ridge: lambda_reg must be > 0");
    detail::require(gram.allFinite(), "ridge: gram has non-finite entries");
    const auto n = gram.rows();
    system_ = gram;
    system_.diagonal().array() += lambda_reg;
    llt_.compute(system_);
    if (llt_.info() == Eigen::Success || n == 0) return;

    const double base = 10.0 * std::numeric_limits<double>::epsilon() * gram.trace() / static_cast<double>(n);
    double jitter = base;
    for (int attempt = 0; attempt <= 3; ++attempt, jitter *= 10.0) {
        Eigen::MatrixXd trial = system_;
        trial.diagonal().array() += jitter;
        llt_.compute(trial);
        if (llt_.info() == Eigen::Success) {
            system_ = std::move(trial);
            jitter_ = jitter;
            return;
        }
    }
    std::ostringstream msg;
    msg << "ridge: Cholesky of (K + lambda I) failed after jitter escalation (n=" << n
        << ", lambda=" << lambda_reg << ", trace=" << gram.trace() << ", last jitter=" << jitter / 10.0
        << ")";
    throw NumericalError(msg.str());
}

Eigen::VectorXd RidgeSolver::solve(const Eigen::VectorXd& rhs) const {
    detail::require(rhs.size() == system_.rows(), "ridge: right-hand side length mismatch");
    Eigen::VectorXd x = llt_.solve(rhs);
    // One step of iterative refinement keeps the residual near machine precision.
    const Eigen::VectorXd r = rhs - system_ * x;
    x += llt_.solve(r);
    return x;
}

Eigen::MatrixXd RidgeSolver::solve(const Eigen::MatrixXd& rhs) const {
    detail::require(rhs.rows() == system_.rows(), "ridge: right-hand side row mismatch");
    Eigen::MatrixXd x = llt_.solve(rhs);
    const Eigen::MatrixXd r = rhs - system_ * x;
    x += llt_.solve(r);
    return x;
}

RidgeWeights ridge_weights(const Eigen::MatrixXd& gram, const Eigen::VectorXd& k_vec, double lambda_reg,
                           const Eigen::VectorXd& query) {
    return ridge_weights(RidgeSolver(gram, lambda_reg), k_vec, query);
}

RidgeWeights ridge_weights(const RidgeSolver& solver, const Eigen::VectorXd& k_vec,
                           const Eigen::VectorXd& query) {
    detail::require(k_vec.allFinite(), "ridge_weights: k_vec has non-finite entries");
    RidgeWeights w;
    w.gamma = solver.solve(k_vec);
    w.lambda_reg = solver.lambda_reg();
    w.query = query;
    if (!w.gamma.allFinite()) throw NumericalError("ridge_weights: non-finite solution");
    return w;
}

Eigen::VectorXd embed_eval(const Eigen::VectorXd& weights, const Eigen::MatrixXd& outputs,
                           const Eigen::MatrixXd& query_points, const MaternParams& k_z) {
    detail::require(weights.size() == outputs.rows(), "embed_eval: weights and outputs length mismatch");
    if (outputs.rows() == 0) return Eigen::VectorXd::Zero(query_points.rows());
    detail::require(query_points.rows() == 0 || query_points.cols() == outputs.cols(),
                    "embed_eval: output and query dimension mismatch");
    return gram(query_points, outputs, k_z) * weights;
}

double mmd_sq(const Eigen::VectorXd& omega_p, const Eigen::VectorXd& omega_q, const Eigen::MatrixXd& k_grid) {
    detail::require(omega_p.size() == omega_q.size() && k_grid.rows() == omega_p.size() &&
                        k_grid.cols() == omega_p.size(),
                    "mmd_sq: shape mismatch");
    const Eigen::VectorXd diff = omega_p - omega_q;
    const double v = diff.dot(k_grid * diff);
    if (v >= 0.0) return v;
    if (v >= -kClampTol) return 0.0;
    throw NumericalError("mmd_sq: quadratic form is " + std::to_string(v) + "; Gram matrix is not PSD");
}

double mmd_sq_samples(const Eigen::MatrixXd& x, const Eigen::MatrixXd& y, const MaternParams& params) {
    detail::require(x.rows() > 0 && y.rows() > 0, "mmd_sq_samples: empty sample");
    detail::require(x.cols() == y.cols(), "mmd_sq_samples: dimension mismatch");
    const double nx = static_cast<double>(x.rows());
    const double ny = static_cast<double>(y.rows());
    const double kxx = gram(x, params).sum() / (nx * nx);
    const double kyy = gram(y, params).sum() / (ny * ny);
    const double kxy = gram(x, y, params).sum() / (nx * ny);
    return std::max(0.0, kxx + kyy - 2.0 * kxy);
}

}  // namespace kedrl
