#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Core>

namespace kedrl {

struct OptimizerConfig {
    int steps = 2000;
    double learning_rate = 1e-2;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon_adam = 1e-8;
    double weight_decay = 1e-4;
    double lambda_fp = 100.0;
    double lambda_mass = 10.0;
    double tol = 0.0;
    /// Return the visited iterate with the lowest objective rather than the last one.
    bool keep_best = true;
    std::uint64_t seed = 0;

    void validate() const;
};

/// The fixed inputs of the objective at one (s, a).
struct ObjectiveTerms {
    Eigen::VectorXd k_vec;  // n
    Eigen::VectorXd Phi;    // n
    Eigen::MatrixXd K_Z;    // m x m
    Eigen::MatrixXd H;      // m x m
    Eigen::MatrixXd G;      // m x m

    void validate() const;
};

struct LossParts {
    double total = 0.0;
    double gamma_sq = 0.0;
    double fp_residual = 0.0;    // ||B^T (k - Phi)||^2
    double mass_residual = 0.0;  // 1^T B^T k - 1
};

LossParts loss_parts(const Eigen::MatrixXd& B, const ObjectiveTerms& terms, const OptimizerConfig& cfg);

/// gamma_sq(B^T k, B^T Phi) + lambda_fp ||B^T (k - Phi)||^2 + lambda_mass (1^T B^T k - 1)^2
double loss(const Eigen::MatrixXd& B, const ObjectiveTerms& terms, const OptimizerConfig& cfg);

/// dL/dB = k g_w^T + Phi g_pi^T + 2 lambda_fp e (e^T B), where e = k - Phi,
/// g_w = (K + K^T) w - 2 H w_pi + 2 lambda_mass (1^T w - 1) 1 and g_pi = (G + G^T) w_pi - 2 H^T w.
Eigen::MatrixXd loss_gradient(const Eigen::MatrixXd& B, const ObjectiveTerms& terms, const OptimizerConfig& cfg);

struct TraceRecord {
    int step = 0;
    double objective = 0.0;
    double gamma_sq = 0.0;
    double fp_residual = 0.0;
    double mass_residual = 0.0;
    double grad_norm = 0.0;
};

struct OptimizationTrace {
    std::vector<TraceRecord> records;
    bool converged = false;  // stopped on tol before the step budget
    int returned_step = 0;   // record index + 1 of the returned iterate; steps + 1 means the final one
};

struct OptimizeResult {
    Eigen::MatrixXd B;
    OptimizationTrace trace;
};

/// i.i.d. U(-1/sqrt(nm), 1/sqrt(nm)) under cfg.seed.
Eigen::MatrixXd initial_coefficients(Eigen::Index n, Eigen::Index m, std::uint64_t seed);

/// Adam steps with bias correction, then B *= (1 - lr * weight_decay). Each trace record holds
/// the objective and gradient at the iterate the step was taken from. With keep_best the
/// lowest-objective iterate (the final one included) is returned.
OptimizeResult optimize(const Eigen::MatrixXd& B_init, const ObjectiveTerms& terms, const OptimizerConfig& cfg);

void write_trace_csv(const std::string& path, const OptimizationTrace& trace);

}  // namespace kedrl
