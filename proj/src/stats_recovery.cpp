#include "kedrl/stats_recovery.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <Eigen/Cholesky>

#include "kedrl/errors.hpp"
#include "kedrl/serialize.hpp"

namespace kedrl {
namespace {

constexpr int kSpectralNodes = 64;

double norm_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

double project(const Eigen::VectorXd& direction, const Eigen::VectorXd& z) {
    return direction.size() ? direction.dot(z) : z(0);
}

Eigen::VectorXd unit_direction(Eigen::Index dim, Eigen::Index coord) {
    Eigen::VectorXd a = Eigen::VectorXd::Zero(dim);
    a(coord) = 1.0;
    return a;
}

// Pool-adjacent-violators: least-squares nondecreasing fit.
std::vector<double> isotonic(const std::vector<double>& y) {
    std::vector<double> level;
    std::vector<std::size_t> width;
    for (double v : y) {
        level.push_back(v);
        width.push_back(1);
        while (level.size() > 1 && level[level.size() - 2] > level.back()) {
            const auto w2 = width.back();
            const double v2 = level.back();
            level.pop_back();
            width.pop_back();
            const auto w1 = width.back();
            level.back() = (level.back() * w1 + v2 * w2) / static_cast<double>(w1 + w2);
            width.back() = w1 + w2;
        }
    }
    std::vector<double> out;
    out.reserve(y.size());
    for (std::size_t b = 0; b < level.size(); ++b) out.insert(out.end(), width[b], level[b]);
    return out;
}

std::vector<double> projected_cdf(const Eigen::VectorXd& w, const ReturnGrid& grid, const Eigen::VectorXd& a,
                                  const std::vector<double>& thresholds, double h) {
    std::vector<double> out;
    out.reserve(thresholds.size());
    const Eigen::VectorXd y = grid.atoms * a;
    for (double t : thresholds) {
        double acc = 0.0;
        for (Eigen::Index i = 0; i < y.size(); ++i) acc += w(i) * norm_cdf((t - y(i)) / h);
        out.push_back(acc);
    }
    return out;
}

}  // namespace

double TestFunction::operator()(const Eigen::VectorXd& z) const {
    switch (kind) {
        case TestFunctionKind::kernel_density:
            return Matern(kernel)((z - threshold).norm());
        case TestFunctionKind::smooth_cdf: {
            double acc = 1.0;
            for (Eigen::Index c = 0; c < z.size(); ++c) acc *= norm_cdf((threshold(c) - z(c)) / bandwidth);
            return acc;
        }
        case TestFunctionKind::tail_sigmoid:
            return sigmoid((threshold(0) - project(direction, z)) / bandwidth);
        case TestFunctionKind::tanh_utility:
            return std::tanh(project(direction, z));
        case TestFunctionKind::sigmoid_utility:
            return sigmoid(project(direction, z));
        case TestFunctionKind::smoothed_moment: {
            const double y = project(direction, z);
            return std::pow(y, order) * std::exp(-alpha * y * y);
        }
        case TestFunctionKind::spectral_cvar: {
            const auto nodes = spectral_nodes();
            const double y = project(direction, z);
            double acc = 0.0;
            for (int k = 0; k < kSpectralNodes; ++k) {
                const double u = nodes[k];
                const double w = spectral_weight ? spectral_weight(u) : (u <= alpha ? 1.0 / alpha : 0.0);
                acc += w * norm_cdf((quantiles[k] - y) / bandwidth);
            }
            return acc / kSpectralNodes;
        }
        case TestFunctionKind::custom:
            return custom_fn(z);
    }
    return 0.0;
}

void TestFunction::validate(Eigen::Index dim) const {
    if (direction.size()) detail::require(direction.size() == dim, "test function: direction has wrong dimension");
    switch (kind) {
        case TestFunctionKind::kernel_density:
            detail::require(threshold.size() == dim, "kernel_density: t must have dimension d");
            kernel.validate();
            break;
        case TestFunctionKind::smooth_cdf:
            detail::require(threshold.size() == dim, "smooth_cdf: t must have dimension d");
            detail::require(bandwidth > 0.0, "smooth_cdf: h must be > 0");
            break;
        case TestFunctionKind::tail_sigmoid:
            detail::require(threshold.size() >= 1, "tail_sigmoid: t required");
            detail::require(bandwidth > 0.0, "tail_sigmoid: h must be > 0");
            break;
        case TestFunctionKind::smoothed_moment:
            detail::require(alpha > 0.0, "smoothed_moment: alpha must be > 0");
            detail::require(order == 1 || order == 2, "smoothed_moment: order must be 1 or 2");
            break;
        case TestFunctionKind::spectral_cvar:
            detail::require(bandwidth > 0.0, "spectral_cvar: h must be > 0");
            detail::require(quantiles.size() == kSpectralNodes, "spectral_cvar: need 64 quantiles");
            detail::require(spectral_weight || (alpha > 0.0 && alpha <= 1.0),
                            "spectral_cvar: level alpha must lie in (0, 1]");
            break;
        case TestFunctionKind::custom:
            detail::require(static_cast<bool>(custom_fn), "custom test function has no callable");
            break;
        default:
            break;
    }
}

std::string unsupported_statistic_rationale(const std::string& kind) {
    return "statistic '" + kind +
           "' is not supported: raw moments, exact CDFs, indicators, unsmoothed densities and truncated "
           "functions lie outside the Matérn RKHS, so they are not bounded linear functionals of the "
           "embedding and their plug-in recovery is ill-posed. Use a smoothed surrogate (smooth_cdf, "
           "tail_sigmoid, smoothed_moment, spectral_cvar) or the Tikhonov proxy instead.";
}

TestFunctionKind test_function_kind_from_string(const std::string& kind) {
    if (kind == "kernel_density") return TestFunctionKind::kernel_density;
    if (kind == "smooth_cdf") return TestFunctionKind::smooth_cdf;
    if (kind == "tail_sigmoid") return TestFunctionKind::tail_sigmoid;
    if (kind == "tanh_utility") return TestFunctionKind::tanh_utility;
    if (kind == "sigmoid_utility") return TestFunctionKind::sigmoid_utility;
    if (kind == "smoothed_moment") return TestFunctionKind::smoothed_moment;
    if (kind == "spectral_cvar") return TestFunctionKind::spectral_cvar;
    if (kind == "mass") return TestFunctionKind::custom;
    static const char* excluded[] = {"raw_moment", "mean", "variance", "moment", "indicator", "exact_cdf",
                                     "cdf", "quantile", "density", "abs", "truncated", "var", "cvar"};
    for (const char* e : excluded)
        if (kind == e) throw InvalidInput(unsupported_statistic_rationale(kind));
    throw InvalidInput("unknown statistic kind '" + kind + "'");
}

std::string to_string(TestFunctionKind kind) {
    switch (kind) {
        case TestFunctionKind::kernel_density: return "kernel_density";
        case TestFunctionKind::smooth_cdf: return "smooth_cdf";
        case TestFunctionKind::tail_sigmoid: return "tail_sigmoid";
        case TestFunctionKind::tanh_utility: return "tanh_utility";
        case TestFunctionKind::sigmoid_utility: return "sigmoid_utility";
        case TestFunctionKind::smoothed_moment: return "smoothed_moment";
        case TestFunctionKind::spectral_cvar: return "spectral_cvar";
        case TestFunctionKind::custom: return "custom";
    }
    return "unknown";
}

std::vector<double> spectral_nodes() {
    std::vector<double> u(kSpectralNodes);
    for (int k = 0; k < kSpectralNodes; ++k) u[k] = (k + 0.5) / kSpectralNodes;
    return u;
}

std::vector<double> smooth_quantiles(const Eigen::VectorXd& omega_v, const ReturnGrid& grid,
                                     const Eigen::VectorXd& direction, double h, const std::vector<double>& levels) {
    detail::require(omega_v.size() == grid.size(), "smooth_quantiles: omega length must equal m");
    const Eigen::VectorXd a = direction.size() ? direction : unit_direction(grid.dim(), 0);
    const Eigen::VectorXd y = grid.atoms * a;
    const double lo = y.minCoeff() - 6.0 * h;
    const double hi = y.maxCoeff() + 6.0 * h;
    constexpr int kPoints = 1024;
    std::vector<double> t(kPoints);
    for (int i = 0; i < kPoints; ++i) t[i] = lo + (hi - lo) * i / (kPoints - 1);
    auto cdf = isotonic(projected_cdf(omega_v, grid, a, t, h));
    for (double& v : cdf) v = std::clamp(v, 0.0, 1.0);
    std::vector<double> out;
    for (double u : levels) {
        const auto it = std::lower_bound(cdf.begin(), cdf.end(), u);
        if (it == cdf.begin()) {
            out.push_back(t.front());
        } else if (it == cdf.end()) {
            out.push_back(t.back());
        } else {
            const auto i = static_cast<std::size_t>(it - cdf.begin());
            const double span = cdf[i] - cdf[i - 1];
            const double frac = span > 0.0 ? (u - cdf[i - 1]) / span : 0.0;
            out.push_back(t[i - 1] + frac * (t[i] - t[i - 1]));
        }
    }
    return out;
}

TestFunction test_function_from_json(const nlohmann::json& j, const ReturnGrid& grid, const MaternParams& k_z,
                                     const Eigen::VectorXd& omega_v) {
    detail::require(j.is_object() && j.contains("kind"), "statistic spec must be an object with a 'kind'");
    const auto kind_name = j.at("kind").get<std::string>();
    static const char* allowed[] = {"kind", "t", "h", "direction", "alpha", "order", "quantiles", "coord"};
    for (const auto& [key, _] : j.items()) {
        if (std::find_if(std::begin(allowed), std::end(allowed), [&](const char* a) { return key == a; }) ==
            std::end(allowed)) {
            throw InvalidInput("statistic: unknown key '" + key + "'");
        }
    }
    TestFunction g;
    g.kind = test_function_kind_from_string(kind_name);
    const auto dim = grid.dim();
    const Eigen::Index coord = j.value("coord", 0);
    detail::require(coord >= 0 && coord < dim, "statistic: coord out of range");
    if (kind_name == "mass") {
        g.custom_fn = [](const Eigen::VectorXd&) { return 1.0; };
        return g;
    }
    if (j.contains("direction")) g.direction = vector_from_json(j.at("direction"));
    else if (j.contains("coord")) g.direction = unit_direction(dim, coord);
    g.bandwidth = j.contains("h") ? j.at("h").get<double>() : default_bandwidth(grid, coord);
    g.alpha = j.value("alpha", g.kind == TestFunctionKind::spectral_cvar ? 0.1 : 1.0);
    g.order = j.value("order", 1);
    g.kernel = k_z;
    if (j.contains("t")) {
        const auto& t = j.at("t");
        g.threshold = t.is_array() ? vector_from_json(t) : Eigen::VectorXd::Constant(1, t.get<double>());
        if (g.kind == TestFunctionKind::smooth_cdf && g.threshold.size() == 1 && dim > 1) {
            // Scalar threshold on one coordinate: other coordinates integrate out (t = +inf).
            Eigen::VectorXd full = Eigen::VectorXd::Constant(dim, std::numeric_limits<double>::infinity());
            full(coord) = g.threshold(0);
            g.threshold = full;
        }
    }
    if (g.kind == TestFunctionKind::spectral_cvar) {
        if (j.contains("quantiles")) {
            g.quantiles = j.at("quantiles").get<std::vector<double>>();
        } else {
            detail::require(omega_v.size() == grid.size(), "spectral_cvar: quantiles required without a fitted omega");
            g.quantiles = smooth_quantiles(omega_v, grid, g.direction, g.bandwidth, spectral_nodes());
        }
    }
    g.validate(dim);
    return g;
}

double recover(const Eigen::VectorXd& omega_v, const ReturnGrid& grid, const TestFunction& g) {
    detail::require(omega_v.size() == grid.size(), "recover: omega length must equal the atom count");
    double acc = 0.0;
    for (Eigen::Index i = 0; i < grid.size(); ++i) acc += omega_v(i) * g(grid.atoms.row(i).transpose());
    return acc;
}

CdfCurve smooth_cdf_curve(const Eigen::VectorXd& omega_v, const ReturnGrid& grid, const std::vector<double>& thresholds,
                          double h, Eigen::Index coord) {
    detail::require(omega_v.size() == grid.size(), "smooth_cdf_curve: omega length must equal the atom count");
    detail::require(h > 0.0, "smooth_cdf_curve: h must be > 0");
    detail::require(coord >= 0 && coord < grid.dim(), "smooth_cdf_curve: coord out of range");
    detail::require(std::is_sorted(thresholds.begin(), thresholds.end()), "smooth_cdf_curve: thresholds must be sorted");
    CdfCurve c;
    c.thresholds = thresholds;
    c.raw = projected_cdf(omega_v, grid, unit_direction(grid.dim(), coord), thresholds, h);
    c.clipped = isotonic(c.raw);
    for (double& v : c.clipped) v = std::clamp(v, 0.0, 1.0);
    return c;
}

double default_bandwidth(const ReturnGrid& grid, Eigen::Index coord) {
    detail::require(grid.size() >= 1 && coord >= 0 && coord < grid.dim(), "default_bandwidth: bad grid/coord");
    const double range = grid.atoms.col(coord).maxCoeff() - grid.atoms.col(coord).minCoeff();
    return range > 0.0 ? 0.25 * range : 1.0;
}

Eigen::VectorXd tikhonov_proxy(const Eigen::VectorXd& g_values, const Eigen::MatrixXd& K_Z, double lambda_t) {
    const auto m = K_Z.rows();
    detail::require(K_Z.cols() == m && g_values.size() == m, "tikhonov_proxy: shape mismatch");
    detail::require(lambda_t > 0.0 && std::isfinite(lambda_t), "tikhonov_proxy: lambda_t must be > 0");
    Eigen::MatrixXd A = K_Z;
    A.diagonal().array() += static_cast<double>(m) * lambda_t;
    Eigen::LLT<Eigen::MatrixXd> llt(A);
    if (llt.info() != Eigen::Success) throw NumericalError("tikhonov_proxy: factorization failed");
    return llt.solve(g_values);
}

double tikhonov_expectation(const Eigen::VectorXd& coeffs, const Eigen::MatrixXd& K_Z, const Eigen::VectorXd& omega_v) {
    detail::require(coeffs.size() == K_Z.rows() && omega_v.size() == K_Z.cols(), "tikhonov_expectation: shape mismatch");
    return coeffs.dot(K_Z * omega_v);
}

Eigen::VectorXd clip_renormalize(const Eigen::VectorXd& omega_v) {
    Eigen::VectorXd w = omega_v.cwiseMax(0.0);
    const double s = w.sum();
    if (s > 0.0) w /= s;
    return w;
}

}  // namespace kedrl
