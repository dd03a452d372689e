#include "kedrl/sim_env.hpp"

#include <algorithm>
#include <cmath>

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>

#include "kedrl/errors.hpp"
#include "kedrl/parallel.hpp"
#include "kedrl/serialize.hpp"

namespace kedrl {
namespace {

constexpr double kActionFloor = 1e-15;

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

// Lower factor L with L L^T = S; zero and PSD-singular covariances are allowed.
Eigen::MatrixXd covariance_factor(const Eigen::MatrixXd& S, const char* name) {
    const std::string w = name;
    detail::require(S.rows() == S.cols(), w + " must be square");
    detail::require((S - S.transpose()).cwiseAbs().maxCoeff() <= 1e-12, w + " must be symmetric");
    Eigen::LLT<Eigen::MatrixXd> llt(S);
    if (llt.info() == Eigen::Success) return llt.matrixL();
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(S);
    const double tol = -1e-12 * std::max(1.0, S.cwiseAbs().maxCoeff());
    detail::require(eig.eigenvalues().minCoeff() >= tol, w + " must be positive semidefinite");
    return eig.eigenvectors() * eig.eigenvalues().cwiseMax(0.0).cwiseSqrt().asDiagonal();
}

Eigen::VectorXd std_normal(Eigen::Index k, std::mt19937_64& rng) {
    std::normal_distribution<double> nd(0.0, 1.0);
    Eigen::VectorXd v(k);
    for (Eigen::Index i = 0; i < k; ++i) v(i) = nd(rng);
    return v;
}

}  // namespace

LinearDynamics LinearDynamics::paper_defaults() {
    LinearDynamics d;
    Eigen::MatrixXd ws(5, 6);
    ws << 0.4, -0.2, 0.1, 0.05, 0.3, -0.1,
          0.03, 0.3, -0.2, 0.15, 0.25, 0.1,
          0.15, -0.05, 0.2, 0.1, 0.35, -0.2,
          0.2, 0.05, -0.1, 0.3, -0.15, 0.2,
          0.1, -0.3, 0.25, -0.2, 0.4, 0.15;
    d.W_s = ws.transpose();
    d.b_s.resize(5);
    d.b_s << 0.1, -0.1, 0.05, 0.2, -0.15;
    d.Sigma_s.resize(5, 5);
    d.Sigma_s << 0.1, 0.05, 0.02, 0.01, 0.03,
                 0.05, 0.2, 0.03, 0.02, 0.04,
                 0.02, 0.03, 0.3, 0.05, 0.01,
                 0.01, 0.02, 0.05, 0.25, 0.02,
                 0.03, 0.04, 0.01, 0.02, 0.35;
    Eigen::MatrixXd wr(3, 6);
    wr << 0.02, 0.1, -0.05, 0.3, -0.1, 0.2,
          0.1, -0.3, 0.2, 0.25, -0.2, 0.4,
          0.15, 0.05, -0.1, 0.35, 0.1, -0.25;
    d.W_r = wr.transpose();
    d.b_r.resize(3);
    d.b_r << 0.5, -0.4, 0.3;
    d.Sigma_r.resize(3, 3);
    d.Sigma_r << 0.2, 0.01, 0.03,
                 0.01, 0.25, 0.02,
                 0.03, 0.02, 0.3;
    return d;
}

void LinearDynamics::validate() const {
    const auto p = b_s.size();
    const auto d = b_r.size();
    detail::require(p >= 1 && d >= 1, "dynamics: empty state or reward");
    detail::require(W_s.cols() == p && W_s.rows() > p, "dynamics: W_s must be (p + q) x p");
    detail::require(W_r.rows() == W_s.rows() && W_r.cols() == d, "dynamics: W_r must be (p + q) x d");
    detail::require(Sigma_s.rows() == p && Sigma_r.rows() == d, "dynamics: covariance shapes");
    detail::require(W_s.allFinite() && W_r.allFinite() && b_s.allFinite() && b_r.allFinite() &&
                        Sigma_s.allFinite() && Sigma_r.allFinite(),
                    "dynamics: entries must be finite");
    covariance_factor(Sigma_s, "Sigma_s");
    covariance_factor(Sigma_r, "Sigma_r");
}

PolicyFamily policy_family_from_string(const std::string& name) {
    if (name == "gaussian") return PolicyFamily::gaussian;
    if (name == "uniform") return PolicyFamily::uniform;
    if (name == "logistic") return PolicyFamily::logistic;
    throw InvalidInput("unknown policy family '" + name + "' (expected gaussian, uniform or logistic)");
}

std::string to_string(PolicyFamily family) {
    switch (family) {
        case PolicyFamily::gaussian: return "gaussian";
        case PolicyFamily::uniform: return "uniform";
        case PolicyFamily::logistic: return "logistic";
    }
    return "unknown";
}

PolicySpec PolicySpec::paper(PolicyFamily family) {
    PolicySpec p;
    p.family = family;
    p.theta_a.resize(5);
    p.theta_b.resize(5);
    switch (family) {
        case PolicyFamily::uniform:
            p.theta_a << 0.0, -0.2, -0.2, -0.8, -0.6;
            p.theta_b << 0.2, 0.0, 0.5, -0.1, 0.6;
            break;
        case PolicyFamily::gaussian:
            p.theta_a << 0.8, 0.4, 0.2, 0.3, 0.0;
            p.theta_b << 0.4, 0.3, 0.3, 0.5, 0.1;
            break;
        case PolicyFamily::logistic:
            p.theta_a << 0.0, 0.3, -0.1, 0.1, 0.0;
            p.theta_b << 1.0, 0.8, 0.8, 1.2, 1.0;
            break;
    }
    return p;
}

void PolicySpec::validate(Eigen::Index state_dim) const {
    detail::require(theta_a.size() == state_dim && theta_b.size() == state_dim,
                    "policy: theta vectors must have length p=" + std::to_string(state_dim));
    detail::require(noise >= 0.0 && std::isfinite(noise), "policy: noise must be >= 0");
    detail::require(uniform_shift > 0.0 && loc_clip > 0.0, "policy: uniform_shift and loc_clip must be > 0");
}

std::mt19937_64 stream_rng(std::uint64_t seed, std::uint64_t stream) {
    return std::mt19937_64(splitmix64(splitmix64(seed) ^ splitmix64(stream + 0x632BE59BD9B4E019ULL)));
}

double sample_action(const PolicySpec& pol, const Eigen::VectorXd& s, std::mt19937_64& rng) {
    detail::require(s.allFinite(), "sample_action: state must be finite");
    double a = 0.0;
    switch (pol.family) {
        case PolicyFamily::uniform: {
            std::uniform_real_distribution<double> eps(0.0, pol.noise);
            const double e_lo = pol.noise > 0.0 ? eps(rng) : 0.0;
            const double e_hi = pol.noise > 0.0 ? eps(rng) : 0.0;
            const double lo = sigmoid(s.dot(pol.theta_a) + e_lo);
            double hi = sigmoid(s.dot(pol.theta_b) + e_hi);
            if (hi <= lo) hi = lo + pol.uniform_shift;
            a = std::uniform_real_distribution<double>(lo, hi)(rng);
            break;
        }
        case PolicyFamily::gaussian: {
            std::normal_distribution<double> eps(0.0, 1.0);
            const double mean = s.dot(pol.theta_a) + pol.noise * eps(rng);
            const double sd = std::exp(s.dot(pol.theta_b) + pol.noise * eps(rng));
            a = sigmoid(mean + sd * eps(rng));
            break;
        }
        case PolicyFamily::logistic: {
            std::normal_distribution<double> eps(0.0, 1.0);
            const double loc = std::clamp(s.dot(pol.theta_a) + pol.noise * eps(rng), -pol.loc_clip, pol.loc_clip);
            const double scale = std::exp(s.dot(pol.theta_b) + pol.noise * eps(rng));
            std::uniform_real_distribution<double> unit(0.0, 1.0);
            double u = unit(rng);
            while (u <= 0.0) u = unit(rng);
            a = sigmoid(loc + scale * std::log(u / (1.0 - u)));
            break;
        }
    }
    return std::clamp(a, kActionFloor, 1.0 - kActionFloor);
}

Eigen::MatrixXd sample_actions(const PolicySpec& policy, const Eigen::MatrixXd& states, std::uint64_t seed) {
    policy.validate(states.cols());
    Eigen::MatrixXd out(states.rows(), 1);
    for (Eigen::Index i = 0; i < states.rows(); ++i) {
        auto rng = stream_rng(seed, static_cast<std::uint64_t>(i));
        out(i, 0) = sample_action(policy, states.row(i).transpose(), rng);
    }
    return out;
}

Stepper::Stepper(const LinearDynamics& dyn) : dyn_(dyn) {
    dyn_.validate();
    L_s_ = covariance_factor(dyn_.Sigma_s, "Sigma_s");
    L_r_ = covariance_factor(dyn_.Sigma_r, "Sigma_r");
}

std::pair<Eigen::VectorXd, Eigen::VectorXd> Stepper::operator()(const Eigen::VectorXd& s, const Eigen::VectorXd& a,
                                                                std::mt19937_64& rng) const {
    const auto p = dyn_.state_dim();
    detail::require(s.size() == p && a.size() == dyn_.action_dim(), "step: state/action dimension mismatch");
    Eigen::VectorXd x(p + a.size());
    x << s, a;
    Eigen::VectorXd s_next = dyn_.b_s + dyn_.W_s.transpose() * x;
    Eigen::VectorXd r = dyn_.b_r + dyn_.W_r.transpose() * x;
    s_next += L_s_ * std_normal(p, rng);
    r += L_r_ * std_normal(dyn_.reward_dim(), rng);
    return {s_next, r};
}

std::pair<Eigen::VectorXd, Eigen::VectorXd> step(const LinearDynamics& dyn, const Eigen::VectorXd& s,
                                                 const Eigen::VectorXd& a, std::mt19937_64& rng) {
    return Stepper(dyn)(s, a, rng);
}

std::vector<Trajectory> generate_dataset(const LinearDynamics& dyn, const PolicySpec& policy, int n_traj, int T,
                                         const InitialStateDist& init, std::uint64_t seed) {
    detail::require(n_traj >= 1 && T >= 1, "generate_dataset: n_traj and T must be >= 1");
    const Stepper stepper(dyn);
    const auto p = dyn.state_dim();
    const auto d = dyn.reward_dim();
    detail::require(dyn.action_dim() == 1, "generate_dataset: policies emit scalar actions (q = 1)");
    policy.validate(p);
    const Eigen::VectorXd mean = init.mean.size() ? init.mean : Eigen::VectorXd::Zero(p);
    const Eigen::MatrixXd L0 = init.cov.size() ? covariance_factor(init.cov, "initial covariance")
                                               : Eigen::MatrixXd(Eigen::MatrixXd::Identity(p, p));
    detail::require(mean.size() == p && L0.rows() == p, "generate_dataset: initial distribution dimension");

    std::vector<Trajectory> out(n_traj);
    parallel_for(static_cast<std::size_t>(n_traj), [&](std::size_t i) {
        auto rng = stream_rng(seed, i);
        Trajectory& tr = out[i];
        tr.states.resize(T, p);
        tr.actions.resize(T, 1);
        tr.rewards.resize(T, d);
        Eigen::VectorXd s = mean + L0 * std_normal(p, rng);
        for (int t = 0; t < T; ++t) {
            Eigen::VectorXd a(1);
            a(0) = sample_action(policy, s, rng);
            auto [s_next, r] = stepper(s, a, rng);
            tr.states.row(t) = s.transpose();
            tr.actions(t, 0) = a(0);
            tr.rewards.row(t) = r.transpose();
            s = std::move(s_next);
        }
    });
    return out;
}

Eigen::MatrixXd mc_reference(const LinearDynamics& dyn, const PolicySpec& target, const Eigen::VectorXd& s_star,
                             const Eigen::VectorXd& a_star, int n_traj, int T, double discount, std::uint64_t seed) {
    detail::require(n_traj >= 1 && T >= 1, "mc_reference: n_traj and T must be >= 1");
    detail::require(discount >= 0.0 && discount < 1.0, "mc_reference: discount must lie in [0, 1)");
    const Stepper stepper(dyn);
    target.validate(dyn.state_dim());
    detail::require(s_star.size() == dyn.state_dim() && a_star.size() == dyn.action_dim(),
                    "mc_reference: (s*, a*) dimension mismatch");
    Eigen::MatrixXd Z(n_traj, dyn.reward_dim());
    parallel_for(static_cast<std::size_t>(n_traj), [&](std::size_t i) {
        auto rng = stream_rng(seed, i);
        Eigen::VectorXd s = s_star;
        Eigen::VectorXd a = a_star;
        Eigen::VectorXd acc = Eigen::VectorXd::Zero(dyn.reward_dim());
        double w = 1.0;
        for (int t = 0; t < T; ++t) {
            auto [s_next, r] = stepper(s, a, rng);
            acc += w * r;
            w *= discount;
            s = std::move(s_next);
            if (t + 1 < T) a(0) = sample_action(target, s, rng);
        }
        Z.row(i) = acc.transpose();
    });
    return Z;
}

nlohmann::json dynamics_to_json(const LinearDynamics& d) {
    return {{"W_s", matrix_to_json(d.W_s)},         {"b_s", vector_to_json(d.b_s)},
            {"Sigma_s", matrix_to_json(d.Sigma_s)}, {"W_r", matrix_to_json(d.W_r)},
            {"b_r", vector_to_json(d.b_r)},         {"Sigma_r", matrix_to_json(d.Sigma_r)}};
}

LinearDynamics dynamics_from_json(const nlohmann::json& j) {
    for (const auto& [key, _] : j.items()) {
        if (key != "W_s" && key != "b_s" && key != "Sigma_s" && key != "W_r" && key != "b_r" && key != "Sigma_r") {
            throw InvalidInput("dynamics: unknown key '" + key + "'");
        }
    }
    LinearDynamics d = LinearDynamics::paper_defaults();
    if (j.contains("W_s")) d.W_s = matrix_from_json(j.at("W_s"));
    if (j.contains("b_s")) d.b_s = vector_from_json(j.at("b_s"));
    if (j.contains("Sigma_s")) d.Sigma_s = matrix_from_json(j.at("Sigma_s"));
    if (j.contains("W_r")) d.W_r = matrix_from_json(j.at("W_r"));
    if (j.contains("b_r")) d.b_r = vector_from_json(j.at("b_r"));
    if (j.contains("Sigma_r")) d.Sigma_r = matrix_from_json(j.at("Sigma_r"));
    d.validate();
    return d;
}

nlohmann::json policy_to_json(const PolicySpec& p) {
    return {{"family", to_string(p.family)}, {"theta_a", vector_to_json(p.theta_a)},
            {"theta_b", vector_to_json(p.theta_b)}, {"noise", p.noise},
            {"uniform_shift", p.uniform_shift}, {"loc_clip", p.loc_clip}};
}

PolicySpec policy_from_json(const nlohmann::json& j) {
    if (j.is_string()) return PolicySpec::paper(policy_family_from_string(j.get<std::string>()));
    detail::require(j.is_object(), "policy must be a family name or an object");
    for (const auto& [key, _] : j.items()) {
        if (key != "family" && key != "theta_a" && key != "theta_b" && key != "noise" && key != "uniform_shift" &&
            key != "loc_clip") {
            throw InvalidInput("policy: unknown key '" + key + "'");
        }
    }
    PolicySpec p = PolicySpec::paper(policy_family_from_string(j.at("family").get<std::string>()));
    if (j.contains("theta_a")) p.theta_a = vector_from_json(j.at("theta_a"));
    if (j.contains("theta_b")) p.theta_b = vector_from_json(j.at("theta_b"));
    p.noise = j.value("noise", p.noise);
    p.uniform_shift = j.value("uniform_shift", p.uniform_shift);
    p.loc_clip = j.value("loc_clip", p.loc_clip);
    return p;
}

}  // namespace kedrl
