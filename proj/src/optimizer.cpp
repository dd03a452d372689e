#include "kedrl/optimizer.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <random>

#include "kedrl/bellman.hpp"
#include "kedrl/errors.hpp"

namespace kedrl {

void OptimizerConfig::validate() const {
    detail::require(steps >= 1, "optimizer: steps must be >= 1");
    detail::require(learning_rate > 0.0 && std::isfinite(learning_rate), "optimizer: learning_rate must be > 0");
    detail::require(beta1 > 0.0 && beta1 < 1.0 && beta2 > 0.0 && beta2 < 1.0, "optimizer: betas must lie in (0, 1)");
    detail::require(epsilon_adam > 0.0, "optimizer: epsilon_adam must be > 0");
    detail::require(weight_decay >= 0.0 && lambda_fp >= 0.0 && lambda_mass >= 0.0 && tol >= 0.0,
                    "optimizer: weight_decay, lambda_fp, lambda_mass and tol must be >= 0");
}

void ObjectiveTerms::validate() const {
    const auto n = k_vec.size();
    const auto m = K_Z.rows();
    detail::require(Phi.size() == n, "objective: Phi and k_vec lengths differ");
    detail::require(K_Z.cols() == m && H.rows() == m && H.cols() == m && G.rows() == m && G.cols() == m,
                    "objective: K_Z, H and G must all be m x m");
}

LossParts loss_parts(const Eigen::MatrixXd& B, const ObjectiveTerms& t, const OptimizerConfig& cfg) {
    detail::require(B.rows() == t.k_vec.size() && B.cols() == t.K_Z.rows(), "loss: B must be n x m");
    const Eigen::VectorXd w = B.transpose() * t.k_vec;
    const Eigen::VectorXd wp = B.transpose() * t.Phi;
    const Eigen::VectorXd f = w - wp;
    LossParts parts;
    parts.gamma_sq = gamma_sq(w, wp, t.K_Z, t.H, t.G);
    parts.fp_residual = f.squaredNorm();
    parts.mass_residual = w.sum() - 1.0;
    parts.total = parts.gamma_sq + cfg.lambda_fp * parts.fp_residual +
                  cfg.lambda_mass * parts.mass_residual * parts.mass_residual;
    return parts;
}

double loss(const Eigen::MatrixXd& B, const ObjectiveTerms& terms, const OptimizerConfig& cfg) {
    return loss_parts(B, terms, cfg).total;
}

Eigen::MatrixXd loss_gradient(const Eigen::MatrixXd& B, const ObjectiveTerms& t, const OptimizerConfig& cfg) {
    detail::require(B.rows() == t.k_vec.size() && B.cols() == t.K_Z.rows(), "loss_gradient: B must be n x m");
    const Eigen::VectorXd w = B.transpose() * t.k_vec;
    const Eigen::VectorXd wp = B.transpose() * t.Phi;
    const Eigen::VectorXd e = t.k_vec - t.Phi;
    const Eigen::VectorXd f = B.transpose() * e;  // = w - wp

    Eigen::VectorXd g_w = t.K_Z * w + t.K_Z.transpose() * w - 2.0 * (t.H * wp);
    g_w.array() += 2.0 * cfg.lambda_mass * (w.sum() - 1.0);
    const Eigen::VectorXd g_pi = t.G * wp + t.G.transpose() * wp - 2.0 * (t.H.transpose() * w);

    Eigen::MatrixXd grad = t.k_vec * g_w.transpose();
    grad.noalias() += t.Phi * g_pi.transpose();
    grad.noalias() += (2.0 * cfg.lambda_fp) * e * f.transpose();
    return grad;
}

Eigen::MatrixXd initial_coefficients(Eigen::Index n, Eigen::Index m, std::uint64_t seed) {
    detail::require(n >= 1 && m >= 1, "initial_coefficients: empty shape");
    const double bound = 1.0 / std::sqrt(static_cast<double>(n) * static_cast<double>(m));
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unif(-bound, bound);
    Eigen::MatrixXd B(n, m);
    for (Eigen::Index j = 0; j < m; ++j)
        for (Eigen::Index i = 0; i < n; ++i) B(i, j) = unif(rng);
    return B;
}

OptimizeResult optimize(const Eigen::MatrixXd& B_init, const ObjectiveTerms& terms, const OptimizerConfig& cfg) {
    cfg.validate();
    terms.validate();
    detail::require(B_init.rows() == terms.k_vec.size() && B_init.cols() == terms.K_Z.rows(),
                    "optimize: B_init must be n x m");
    OptimizeResult res;
    res.B = B_init;
    Eigen::MatrixXd m1 = Eigen::MatrixXd::Zero(B_init.rows(), B_init.cols());
    Eigen::MatrixXd m2 = m1;
    double b1t = 1.0, b2t = 1.0;
    const double shrink = 1.0 - cfg.learning_rate * cfg.weight_decay;
    Eigen::MatrixXd best;
    double best_obj = std::numeric_limits<double>::infinity();

    for (int step = 1; step <= cfg.steps; ++step) {
        const auto parts = loss_parts(res.B, terms, cfg);
        const Eigen::MatrixXd grad = loss_gradient(res.B, terms, cfg);
        const double gnorm = grad.norm();
        res.trace.records.push_back(
            {step, parts.total, parts.gamma_sq, parts.fp_residual, parts.mass_residual, gnorm});
        if (!std::isfinite(parts.total) || !std::isfinite(gnorm)) {
            throw NumericalError("optimize: non-finite objective or gradient at step " + std::to_string(step) +
                                 " (objective=" + std::to_string(parts.total) + ")");
        }
        if (cfg.keep_best && parts.total < best_obj) {
            best_obj = parts.total;
            best = res.B;
            res.trace.returned_step = step;
        }
        if (cfg.tol > 0.0 && gnorm < cfg.tol) {
            res.trace.converged = true;
            break;
        }
        b1t *= cfg.beta1;
        b2t *= cfg.beta2;
        m1 = cfg.beta1 * m1 + (1.0 - cfg.beta1) * grad;
        m2 = cfg.beta2 * m2 + (1.0 - cfg.beta2) * grad.cwiseAbs2();
        const double c1 = 1.0 / (1.0 - b1t);
        const double c2 = 1.0 / (1.0 - b2t);
        res.B.array() -= cfg.learning_rate * (m1.array() * c1) / ((m2.array() * c2).sqrt() + cfg.epsilon_adam);
        res.B *= shrink;
    }
    if (!cfg.keep_best) {
        res.trace.returned_step = res.trace.converged ? static_cast<int>(res.trace.records.size()) : cfg.steps + 1;
        return res;
    }
    if (!res.trace.converged) {
        const double final_obj = loss(res.B, terms, cfg);
        if (std::isfinite(final_obj) && final_obj < best_obj) {
            res.trace.returned_step = cfg.steps + 1;
            return res;
        }
    }
    res.B = std::move(best);
    return res;
}

void write_trace_csv(const std::string& path, const OptimizationTrace& trace) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot open " + path + " for writing");
    out << "step,objective,gamma_sq,fp_residual,mass_residual,grad_norm\n" << std::setprecision(17);
    for (const auto& r : trace.records) {
        out << r.step << ',' << r.objective << ',' << r.gamma_sq << ',' << r.fp_residual << ',' << r.mass_residual
            << ',' << r.grad_norm << '\n';
    }
    if (!out) throw IoError("write failed for " + path);
}

}  // namespace kedrl
