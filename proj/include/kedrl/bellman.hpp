#pragma once

#include <string>

#include <Eigen/Core>

#include "kedrl/cme.hpp"
#include "kedrl/kernel.hpp"
#include "kedrl/return_grid.hpp"

namespace kedrl {

/// Fitted finite-dictionary embedding: mu(s, a) = sum_i omega_i(s, a) k_Z(z_i, .),
/// omega(s, a) = B^T k_X(s, a).
struct EmbeddingModel {
    Eigen::MatrixXd coefficients;     // B, n x m
    ReturnGrid grid;
    MaternParams k_z;
    MaternParams k_x;
    double lambda_reg = 5e-4;
    double gamma_discount = 0.9;
    Eigen::MatrixXd training_inputs;  // n x (p + q)
    Eigen::VectorXd query;            // (s*, a*) the objective was built at; may be empty

    void validate() const;
};

/// Per-query objects of the Bellman objective.
struct BellmanOperators {
    Eigen::MatrixXd H;
    Eigen::MatrixXd G;
    Eigen::VectorXd Phi;
    Eigen::VectorXd k_vec;
    RidgeWeights gamma_vec;
};

/// H[i][j] = sum_l Gamma_l k_Z(r_l, z_i - discount z_j).
Eigen::MatrixXd compute_H(const RidgeWeights& gamma_vec, const ReturnGrid& grid, const Eigen::MatrixXd& rewards,
                          double discount, const MaternParams& k_z);

/// G[i][j] = sum_{l,l'} Gamma_l Gamma_l' k_Z(discount z_i + r_l, discount z_j + r_l').
/// Entries depend only on discount (z_i - z_j), so the diagonal is evaluated once and the
/// upper triangle is mirrored. Half-integer smoothness takes a vectorized path.
/// Cost: (m (m - 1) / 2 + 1) n^2 kernel evaluations.
Eigen::MatrixXd compute_G(const RidgeWeights& gamma_vec, const ReturnGrid& grid, const Eigen::MatrixXd& rewards,
                          double discount, const MaternParams& k_z);

/// Phi = K diag(Gamma) K alpha with K the Gram matrix over (s', a').
Eigen::VectorXd compute_Phi(const Eigen::MatrixXd& gram_next, const RidgeWeights& gamma_vec,
                            const Eigen::VectorXd& alpha);

Eigen::VectorXd omega(const EmbeddingModel& model, const Eigen::VectorXd& query);

/// w^T K w - 2 w^T H w_pi + w_pi^T G w_pi, unclamped.
double gamma_sq(const Eigen::VectorXd& omega_v, const Eigen::VectorXd& omega_pi_v, const Eigen::MatrixXd& K_Z,
                const Eigen::MatrixXd& H, const Eigen::MatrixXd& G);

/// Bellman-target embedding at test points: sum_i w_pi_i sum_l Gamma_l k_Z(discount z_i + r_l, z).
/// Same normalization as G, so its squared RKHS norm is w_pi^T G w_pi.
Eigen::VectorXd target_embedding_eval(const Eigen::VectorXd& omega_pi_v, const ReturnGrid& grid,
                                      const RidgeWeights& gamma_vec, const Eigen::MatrixXd& rewards,
                                      double discount, const Eigen::MatrixXd& test_points,
                                      const MaternParams& k_z);

/// Directory layout: model.json plus B.csv, grid.csv, inputs.csv.
void save_model(const std::string& dir, const EmbeddingModel& model);
EmbeddingModel load_model(const std::string& dir);

}  // namespace kedrl
