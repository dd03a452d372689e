#include "kedrl/kernel.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "kedrl/errors.hpp"

namespace kedrl {
namespace {

constexpr double kZeroDistance = 1e-12;
constexpr double kDeficitSeriesCutoff = 0.5;
constexpr int kDeficitSeriesTerms = 32;

bool is_half_integer(double nu, int& order) {
    const double p = nu - 0.5;
    const double r = std::round(p);
    if (std::abs(p - r) > 1e-12 || r < 0.0 || r > 60.0) return false;
    order = static_cast<int>(r);
    return true;
}

double horner(const std::vector<double>& c, double x) {
    double acc = 0.0;
    for (auto it = c.rbegin(); it != c.rend(); ++it) acc = acc * x + *it;
    return acc;
}

}  // namespace

double MaternParams::sigma() const { return std::sqrt(variance); }

void MaternParams::validate() const {
    auto positive = [](double v) { return std::isfinite(v) && v > 0.0; };
    if (!positive(nu) || !positive(length_scale) || !positive(variance)) {
        throw InvalidInput("MaternParams: nu, length_scale and variance must be finite and > 0 (nu=" +
                           std::to_string(nu) + ", length_scale=" + std::to_string(length_scale) +
                           ", variance=" + std::to_string(variance) + ")");
    }
}

std::optional<HalfIntegerForm> half_integer_form(const MaternParams& params) {
    int p = 0;
    if (!is_half_integer(params.nu, p)) return std::nullopt;
    HalfIntegerForm form;
    form.order = p;
    form.inv_scale = std::sqrt(2.0 * params.nu) / params.length_scale;
    // a_j = p!/(2p)! * (2p-j)! / ((p-j)! j!) * 2^j, built in log space to survive large p.
    form.coeffs.resize(p + 1);
    const double lead = std::lgamma(p + 1.0) - std::lgamma(2.0 * p + 1.0);
    for (int j = 0; j <= p; ++j) {
        const double lg = lead + std::lgamma(2.0 * p - j + 1.0) - std::lgamma(p - j + 1.0) -
                          std::lgamma(j + 1.0) + j * std::log(2.0);
        form.coeffs[j] = std::exp(lg);
    }
    form.coeffs[0] = 1.0;
    if (p >= 1) form.coeffs[1] = 1.0;
    return form;
}

Matern::Matern(const MaternParams& params) : params_(params) {
    params_.validate();
    half_ = half_integer_form(params_);
    if (half_) {
        // exp(-x) P(x) = sum_k c_k x^k with c_k = sum_{j<=min(k,p)} a_j (-1)^{k-j} / (k-j)!
        const auto& a = half_->coeffs;
        deficit_series_.assign(kDeficitSeriesTerms, 0.0);
        for (int k = 2; k < kDeficitSeriesTerms; ++k) {
            double c = 0.0;
            for (int j = 0; j <= std::min<int>(k, half_->order); ++j) {
                const int e = k - j;
                const double term = a[j] / std::tgamma(e + 1.0);
                c += (e % 2 == 0) ? term : -term;
            }
            deficit_series_[k] = -c;
        }
    }
    log_norm_ = (1.0 - params_.nu) * std::log(2.0) - std::lgamma(params_.nu);
}

double Matern::operator()(double distance) const {
    if (!std::isfinite(distance) || distance < 0.0) {
        throw InvalidInput("matern: distance must be finite and >= 0, got " + std::to_string(distance));
    }
    if (distance < kZeroDistance) return params_.variance;
    if (half_) {
        const double x = half_->inv_scale * distance;
        return params_.variance * std::exp(-x) * horner(half_->coeffs, x);
    }
    const double x = std::sqrt(2.0 * params_.nu) * distance / params_.length_scale;
    if (x > 700.0 + params_.nu * 10.0) return 0.0;
    const double ks = bessel_k_scaled(params_.nu, x);
    if (!(ks > 0.0)) return 0.0;
    return params_.variance * std::exp(log_norm_ + params_.nu * std::log(x) + std::log(ks) - x);
}

double Matern::from_squared(double squared_distance) const {
    return (*this)(std::sqrt(std::max(0.0, squared_distance)));
}

double Matern::deficit(double distance) const {
    if (distance < kZeroDistance) return 0.0;
    if (half_) {
        const double x = half_->inv_scale * distance;
        if (x < kDeficitSeriesCutoff) return params_.variance * horner(deficit_series_, x);
    }
    return params_.variance - (*this)(distance);
}

double matern_eval(double distance, const MaternParams& params) { return Matern(params)(distance); }

KernelSum::KernelSum(Eigen::VectorXd weights, Eigen::MatrixXd points, const MaternParams& params)
    : weights_(std::move(weights)), points_(std::move(points)), kernel_(params) {
    if (weights_.size() != points_.rows()) {
        throw InvalidInput("KernelSum: " + std::to_string(weights_.size()) + " weights for " +
                           std::to_string(points_.rows()) + " points");
    }
    if (kernel_.half_integer()) {
        coeffs_ = kernel_.half_integer()->coeffs;
        inv_scale_ = kernel_.half_integer()->inv_scale;
    }
}

double KernelSum::operator()(const Eigen::VectorXd& u) const {
    const auto n = points_.rows();
    if (n == 0) return 0.0;
    if (u.size() != points_.cols()) throw InvalidInput("KernelSum: query dimension mismatch");
    if (coeffs_.empty()) {
        double acc = 0.0;
        for (Eigen::Index l = 0; l < n; ++l) acc += weights_(l) * kernel_((points_.row(l).transpose() - u).norm());
        return acc;
    }
    thread_local Eigen::ArrayXd x, poly;
    x.resize(n);
    poly.resize(n);
    x = (points_.col(0).array() - u(0)).square();
    for (Eigen::Index c = 1; c < points_.cols(); ++c) x += (points_.col(c).array() - u(c)).square();
    x = x.sqrt() * inv_scale_;
    poly.setConstant(coeffs_.back());
    for (int k = static_cast<int>(coeffs_.size()) - 2; k >= 0; --k) poly = poly * x + coeffs_[k];
    return kernel_.params().variance * (weights_.array() * (-x).exp() * poly).sum();
}

Eigen::VectorXd KernelSum::operator()(const Eigen::MatrixXd& queries) const {
    Eigen::VectorXd out(queries.rows());
    for (Eigen::Index i = 0; i < queries.rows(); ++i) out(i) = (*this)(Eigen::VectorXd(queries.row(i).transpose()));
    return out;
}

Eigen::MatrixXd gram(const Eigen::MatrixXd& points_a, const Eigen::MatrixXd& points_b,
                     const MaternParams& params) {
    if (points_a.rows() > 0 && points_b.rows() > 0 && points_a.cols() != points_b.cols()) {
        throw InvalidInput("gram: dimension mismatch (" + std::to_string(points_a.cols()) + " vs " +
                           std::to_string(points_b.cols()) + ")");
    }
    const Matern k(params);
    Eigen::MatrixXd out(points_a.rows(), points_b.rows());
    for (Eigen::Index j = 0; j < points_b.rows(); ++j) {
        for (Eigen::Index i = 0; i < points_a.rows(); ++i) {
            out(i, j) = k((points_a.row(i) - points_b.row(j)).norm());
        }
    }
    return out;
}

Eigen::MatrixXd gram(const Eigen::MatrixXd& points, const MaternParams& params) {
    const Matern k(params);
    const Eigen::Index n = points.rows();
    Eigen::MatrixXd out(n, n);
    for (Eigen::Index j = 0; j < n; ++j) {
        out(j, j) = params.variance;
        for (Eigen::Index i = 0; i < j; ++i) {
            out(i, j) = k((points.row(i) - points.row(j)).norm());
        }
    }
    for (Eigen::Index j = 0; j < n; ++j) {
        for (Eigen::Index i = j + 1; i < n; ++i) out(i, j) = out(j, i);
    }
    return out;
}

Eigen::VectorXd kernel_vector(const Eigen::MatrixXd& points, const Eigen::VectorXd& query,
                              const MaternParams& params) {
    if (points.rows() > 0 && points.cols() != query.size()) {
        throw InvalidInput("kernel_vector: dimension mismatch (" + std::to_string(points.cols()) +
                           " vs " + std::to_string(query.size()) + ")");
    }
    const Matern k(params);
    Eigen::VectorXd out(points.rows());
    for (Eigen::Index j = 0; j < points.rows(); ++j) {
        out(j) = k((points.row(j).transpose() - query).norm());
    }
    return out;
}

double lipschitz_constant(const MaternParams& params) {
    params.validate();
    if (params.nu <= 1.0) {
        throw DomainError("lipschitz_constant: requires nu > 1 (got nu=" + std::to_string(params.nu) +
                          "); the embedding map is not Lipschitz otherwise");
    }
    return params.sigma() / params.length_scale * std::sqrt(params.nu / (params.nu - 1.0));
}

double lipschitz_quotient(double distance, const MaternParams& params) {
    if (!(distance > 0.0)) throw InvalidInput("lipschitz_quotient: distance must be > 0");
    const Matern k(params);
    return std::sqrt(2.0 * std::max(0.0, k.deficit(distance))) / distance;
}

}  // namespace kedrl
