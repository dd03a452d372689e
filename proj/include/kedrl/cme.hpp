#pragma once

#include <Eigen/Cholesky>
#include <Eigen/Core>

#include "kedrl/kernel.hpp"

namespace kedrl {

/// Cholesky factorization of (K + lambda I), built once and shared by every query.
/// Lambda is absolute (not scaled by n).
class RidgeSolver {
public:
    RidgeSolver(const Eigen::MatrixXd& gram, double lambda_reg);

    Eigen::VectorXd solve(const Eigen::VectorXd& rhs) const;
    Eigen::MatrixXd solve(const Eigen::MatrixXd& rhs) const;

    Eigen::Index size() const { return system_.rows(); }
    double lambda_reg() const { return lambda_; }
    /// Extra diagonal added on top of lambda when the plain factorization failed.
    double jitter() const { return jitter_; }

private:
    Eigen::MatrixXd system_;
    Eigen::LLT<Eigen::MatrixXd> llt_;
    double lambda_ = 0.0;
    double jitter_ = 0.0;
};

struct RidgeWeights {
    Eigen::VectorXd gamma;
    double lambda_reg = 0.0;
    Eigen::VectorXd query;
};

RidgeWeights ridge_weights(const Eigen::MatrixXd& gram, const Eigen::VectorXd& k_vec, double lambda_reg,
                           const Eigen::VectorXd& query = {});
RidgeWeights ridge_weights(const RidgeSolver& solver, const Eigen::VectorXd& k_vec,
                           const Eigen::VectorXd& query = {});

/// Value at each query point z of sum_j w_j k_Z(outputs_j, z). Points are rows.
Eigen::VectorXd embed_eval(const Eigen::VectorXd& weights, const Eigen::MatrixXd& outputs,
                           const Eigen::MatrixXd& query_points, const MaternParams& k_z);

/// (p - q)^T K (p - q); tiny negatives from rounding clamp to 0, larger ones throw.
double mmd_sq(const Eigen::VectorXd& omega_p, const Eigen::VectorXd& omega_q, const Eigen::MatrixXd& k_grid);

/// Biased (V-statistic) squared MMD between two equally weighted samples.
double mmd_sq_samples(const Eigen::MatrixXd& x, const Eigen::MatrixXd& y, const MaternParams& params);

}  // namespace kedrl
