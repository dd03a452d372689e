#pragma once

#include <cmath>
#include <cstdint>
#include <random>

#include <Eigen/Core>

#include "kedrl/kernel.hpp"

namespace testutil {

inline Eigen::MatrixXd normal_matrix(Eigen::Index rows, Eigen::Index cols, std::mt19937_64& rng, double scale = 1.0) {
    std::normal_distribution<double> n(0.0, scale);
    Eigen::MatrixXd m(rows, cols);
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = n(rng);
    return m;
}

inline Eigen::VectorXd normal_vector(Eigen::Index n, std::mt19937_64& rng, double scale = 1.0) {
    return normal_matrix(n, 1, rng, scale);
}

inline double uniform(std::mt19937_64& rng, double lo, double hi) {
    return std::uniform_real_distribution<double>(lo, hi)(rng);
}

// Matérn straight from the Bessel definition, via the standard library.
inline double matern_reference(double d, const kedrl::MaternParams& p) {
    if (d == 0.0) return p.variance;
    const double x = std::sqrt(2.0 * p.nu) * d / p.length_scale;
    return p.variance * std::pow(2.0, 1.0 - p.nu) / std::tgamma(p.nu) * std::pow(x, p.nu) * std::cyl_bessel_k(p.nu, x);
}

inline double kref(const Eigen::VectorXd& a, const Eigen::VectorXd& b, const kedrl::MaternParams& p) {
    return matern_reference((a - b).norm(), p);
}

}  // namespace testutil
