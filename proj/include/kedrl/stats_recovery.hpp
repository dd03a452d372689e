#pragma once

#include <functional>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <json.hpp>

#include "kedrl/kernel.hpp"
#include "kedrl/return_grid.hpp"

namespace kedrl {

enum class TestFunctionKind {
    kernel_density,   // k_Z(z, t)
    smooth_cdf,       // prod_c Phi((t_c - z_c) / h)
    tail_sigmoid,     // sigmoid((t - <a, z>) / h)
    tanh_utility,     // tanh(<a, z>)
    sigmoid_utility,  // sigmoid(<a, z>)
    smoothed_moment,  // <a, z>^k exp(-alpha <a, z>^2), k = 1 or 2
    spectral_cvar,    // int_0^1 w(u) Phi((q_u - <a, z>) / h) du, uniform 64-point rule
    custom,
};

/// An RKHS-admissible test function g: R^d -> R.
struct TestFunction {
    TestFunctionKind kind = TestFunctionKind::smooth_cdf;
    Eigen::VectorXd threshold;  // t (kernel_density, smooth_cdf); t[0] for tail_sigmoid
    double bandwidth = 1.0;     // h
    Eigen::VectorXd direction;  // a; empty means the first coordinate
    MaternParams kernel;        // kernel_density only
    double alpha = 1.0;
    int order = 1;              // smoothed_moment power
    std::vector<double> quantiles;  // spectral_cvar: q_u at spectral_nodes()
    std::function<double(double)> spectral_weight;  // w(u); empty means CVaR weight 1{u <= alpha} / alpha
    std::function<double(const Eigen::VectorXd&)> custom_fn;

    double operator()(const Eigen::VectorXd& z) const;
    void validate(Eigen::Index dim) const;
};

/// Kinds outside the admissible class (raw moments, indicators, exact quantiles) raise
/// InvalidInput carrying this explanation.
std::string unsupported_statistic_rationale(const std::string& kind);

TestFunctionKind test_function_kind_from_string(const std::string& kind);
std::string to_string(TestFunctionKind kind);

/// Builds a test function from {"kind": ..., parameters...}; unknown kinds are rejected.
/// For spectral_cvar without explicit quantiles, q_u is read off the clipped smooth CDF of
/// omega_v (pass an empty omega_v to require explicit quantiles).
TestFunction test_function_from_json(const nlohmann::json& j, const ReturnGrid& grid, const MaternParams& k_z,
                                     const Eigen::VectorXd& omega_v = {});

/// Inverse of the clipped smooth CDF of <a, z> at each level u (linear interpolation).
std::vector<double> smooth_quantiles(const Eigen::VectorXd& omega_v, const ReturnGrid& grid,
                                     const Eigen::VectorXd& direction, double h, const std::vector<double>& levels);

/// sum_i omega_i g(z_i)
double recover(const Eigen::VectorXd& omega_v, const ReturnGrid& grid, const TestFunction& g);

struct CdfCurve {
    std::vector<double> thresholds;
    std::vector<double> raw;
    std::vector<double> clipped;  // isotonic (least-squares) fit of raw, clamped to [0, 1]
};

/// Smooth CDF of coordinate `coord` at each threshold.
CdfCurve smooth_cdf_curve(const Eigen::VectorXd& omega_v, const ReturnGrid& grid, const std::vector<double>& thresholds,
                          double h, Eigen::Index coord = 0);

/// Default bandwidth: 0.25 times the grid's range along `coord`.
double default_bandwidth(const ReturnGrid& grid, Eigen::Index coord);

/// c = (K_Z + m lambda_t I)^{-1} g_values
Eigen::VectorXd tikhonov_proxy(const Eigen::VectorXd& g_values, const Eigen::MatrixXd& K_Z, double lambda_t);

/// c^T K_Z omega
double tikhonov_expectation(const Eigen::VectorXd& coeffs, const Eigen::MatrixXd& K_Z, const Eigen::VectorXd& omega_v);

/// omega with negatives zeroed and rescaled to sum to one (the labeled "clipped" variant).
/// An omega with no positive entry maps to zero.
Eigen::VectorXd clip_renormalize(const Eigen::VectorXd& omega_v);

/// Quadrature nodes u_k = (k + 1/2) / 64 used by spectral_cvar.
std::vector<double> spectral_nodes();

}  // namespace kedrl
