#include <cmath>
#include <limits>
#include <numbers>
#include <string>

#include "kedrl/errors.hpp"
#include "kedrl/kernel.hpp"

namespace kedrl {
namespace {

constexpr double kEps = 1e-16;
constexpr int kMaxIter = 10000;

// Taylor coefficients of 1/Gamma(1+z), odd orders only.
constexpr double kRecipGammaOdd[] = {
    0.5772156649015329,   // z
    -0.0420026350340952,  // z^3
    -0.0421977345555443,  // z^5
    0.0072189432466630,   // z^7
};

// gam1 = (1/G(1-mu) - 1/G(1+mu)) / (2 mu), gam2 = (1/G(1-mu) + 1/G(1+mu)) / 2
void temme_gammas(double mu, double& gam1, double& gam2, double& gampl, double& gammi) {
    gampl = 1.0 / std::tgamma(1.0 + mu);
    gammi = 1.0 / std::tgamma(1.0 - mu);
    gam2 = 0.5 * (gammi + gampl);
    if (std::abs(mu) < 1e-2) {
        const double mu2 = mu * mu;
        double acc = 0.0;
        double pw = 1.0;
        for (double c : kRecipGammaOdd) {
            acc += c * pw;
            pw *= mu2;
        }
        gam1 = -acc;
    } else {
        gam1 = (gammi - gampl) / (2.0 * mu);
    }
}

// Returns K_mu(x) and K_{mu+1}(x) for |mu| <= 1/2; when `scaled` both carry a factor exp(x).
void bessel_k_pair(double mu, double x, bool scaled, double& kmu, double& kmu1) {
    const double mu2 = mu * mu;
    const double xi = 1.0 / x;
    if (x < 2.0) {
        const double x2 = 0.5 * x;
        const double pimu = std::numbers::pi * mu;
        const double fact = std::abs(pimu) < kEps ? 1.0 : pimu / std::sin(pimu);
        double d = -std::log(x2);
        double e = mu * d;
        const double fact2 = std::abs(e) < kEps ? 1.0 : std::sinh(e) / e;
        double gam1, gam2, gampl, gammi;
        temme_gammas(mu, gam1, gam2, gampl, gammi);
        double ff = fact * (gam1 * std::cosh(e) + gam2 * fact2 * d);
        double sum = ff;
        e = std::exp(e);
        double p = 0.5 * e / gampl;
        double q = 0.5 / (e * gammi);
        double c = 1.0;
        d = x2 * x2;
        double sum1 = p;
        int i = 1;
        for (; i <= kMaxIter; ++i) {
            ff = (i * ff + p + q) / (i * static_cast<double>(i) - mu2);
            c *= d / i;
            p /= (i - mu);
            q /= (i + mu);
            const double del = c * ff;
            sum += del;
            sum1 += c * (p - i * ff);
            if (std::abs(del) < std::abs(sum) * kEps) break;
        }
        if (i > kMaxIter) throw NumericalError("bessel_k: series did not converge");
        kmu = sum;
        kmu1 = sum1 * 2.0 * xi;
        if (scaled) {
            const double ex = std::exp(x);
            kmu *= ex;
            kmu1 *= ex;
        }
        return;
    }
    // Steed's method for the continued fraction CF2.
    double b = 2.0 * (1.0 + x);
    double d = 1.0 / b;
    double h = d;
    double delh = d;
    double q1 = 0.0;
    double q2 = 1.0;
    const double a1 = 0.25 - mu2;
    double q = a1;
    double c = a1;
    double a = -a1;
    double s = 1.0 + q * delh;
    int i = 1;
    for (; i <= kMaxIter; ++i) {
        a -= 2 * i;
        c = -a * c / (i + 1.0);
        const double qnew = (q1 - b * q2) / a;
        q1 = q2;
        q2 = qnew;
        q += c * qnew;
        b += 2.0;
        d = 1.0 / (b + a * d);
        delh = (b * d - 1.0) * delh;
        h += delh;
        const double dels = q * delh;
        s += dels;
        if (std::abs(dels / s) < kEps) break;
    }
    if (i > kMaxIter) throw NumericalError("bessel_k: continued fraction did not converge");
    h *= a1;
    kmu = std::sqrt(std::numbers::pi / (2.0 * x)) / s;
    if (!scaled) kmu *= std::exp(-x);
    kmu1 = kmu * (mu + x + 0.5 - h) * xi;
}

double bessel_k_impl(double nu, double x, bool scaled) {
    if (!(nu >= 0.0) || !std::isfinite(nu)) {
        throw InvalidInput("bessel_k: order must be finite and >= 0, got " + std::to_string(nu));
    }
    if (!(x > 0.0) || !std::isfinite(x)) {
        throw InvalidInput("bessel_k: argument must be finite and > 0, got " + std::to_string(x));
    }
    const int nl = static_cast<int>(nu + 0.5);
    const double mu = nu - nl;
    double kmu, kmu1;
    bessel_k_pair(mu, x, scaled, kmu, kmu1);
    const double xi2 = 2.0 / x;
    for (int i = 1; i <= nl; ++i) {
        const double next = (mu + i) * xi2 * kmu1 + kmu;
        kmu = kmu1;
        kmu1 = next;
    }
    return kmu;
}

}  // namespace

double bessel_k(double nu, double x) { return bessel_k_impl(nu, x, false); }

double bessel_k_scaled(double nu, double x) { return bessel_k_impl(nu, x, true); }

}  // namespace kedrl
