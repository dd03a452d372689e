#pragma once

#include <optional>
#include <vector>

#include <Eigen/Core>

namespace kedrl {

/// Matérn kernel hyperparameters. `variance` is sigma^2.
struct MaternParams {
    double nu = 2.5;
    double length_scale = 1.0;
    double variance = 1.0;

    static MaternParams from_sigma(double nu, double length_scale, double sigma) {
        return {nu, length_scale, sigma * sigma};
    }

    double sigma() const;
    void validate() const;

    bool operator==(const MaternParams&) const = default;
};

/// Closed form k(d)/sigma^2 = exp(-x) * sum_j coeffs[j] x^j with x = sqrt(2 nu) d / l,
/// available when nu = p + 1/2.
struct HalfIntegerForm {
    int order = 0;                ///< p
    std::vector<double> coeffs;   ///< polynomial in x, coeffs[0] == 1
    double inv_scale = 0.0;       ///< sqrt(2 nu) / l
};

std::optional<HalfIntegerForm> half_integer_form(const MaternParams& params);

/// Modified Bessel function of the second kind, K_nu(x), for nu >= 0 and x > 0.
/// Temme series below x = 2, Steed's continued fraction above.
double bessel_k(double nu, double x);

/// exp(x) * K_nu(x).
double bessel_k_scaled(double nu, double x);

/// Evaluates k as a function of Euclidean distance. Half-integer smoothness uses
/// the polynomial-times-exponential form; everything else goes through bessel_k.
class Matern {
public:
    explicit Matern(const MaternParams& params);

    const MaternParams& params() const { return params_; }
    const std::optional<HalfIntegerForm>& half_integer() const { return half_; }

    double operator()(double distance) const;
    double from_squared(double squared_distance) const;

    /// sigma^2 - k(d), computed without cancellation for half-integer nu.
    double deficit(double distance) const;

private:
    MaternParams params_;
    std::optional<HalfIntegerForm> half_;
    std::vector<double> deficit_series_;  // Taylor coefficients of 1 - exp(-x) P(x)
    double log_norm_ = 0.0;               // (1 - nu) ln 2 - lgamma(nu)
};

double matern_eval(double distance, const MaternParams& params);

/// u -> sum_l w_l k(|u - p_l|) for a fixed weighted point set (points are rows).
/// Half-integer nu runs as one vectorized pass over the points.
class KernelSum {
public:
    KernelSum(Eigen::VectorXd weights, Eigen::MatrixXd points, const MaternParams& params);

    double operator()(const Eigen::VectorXd& u) const;
    /// One value per query row.
    Eigen::VectorXd operator()(const Eigen::MatrixXd& queries) const;

    Eigen::Index size() const { return points_.rows(); }

private:
    Eigen::VectorXd weights_;
    Eigen::MatrixXd points_;
    Matern kernel_;
    std::vector<double> coeffs_;
    double inv_scale_ = 0.0;
};

/// Points are stored one per row.
Eigen::MatrixXd gram(const Eigen::MatrixXd& points_a, const Eigen::MatrixXd& points_b,
                     const MaternParams& params);

/// Symmetric Gram matrix of a point set with itself; exactly symmetric.
Eigen::MatrixXd gram(const Eigen::MatrixXd& points, const MaternParams& params);

Eigen::VectorXd kernel_vector(const Eigen::MatrixXd& points, const Eigen::VectorXd& query,
                              const MaternParams& params);

/// RKHS Lipschitz constant of z -> k(z, .): (sigma / l) sqrt(nu / (nu - 1)). Requires nu > 1.
double lipschitz_constant(const MaternParams& params);

/// sqrt(2 (sigma^2 - k(d))) / d, the quotient whose supremum is the Lipschitz constant.
double lipschitz_quotient(double distance, const MaternParams& params);

}  // namespace kedrl
