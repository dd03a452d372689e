#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Core>
#include <json.hpp>

#include "kedrl/data.hpp"

namespace kedrl {

/// s' = b_s + W_s^T [s, a] + eps_s,  r = b_r + W_r^T [s, a] + eps_r.
/// W_s is (p + q) x p and W_r is (p + q) x d.
struct LinearDynamics {
    Eigen::MatrixXd W_s;
    Eigen::VectorXd b_s;
    Eigen::MatrixXd Sigma_s;
    Eigen::MatrixXd W_r;
    Eigen::VectorXd b_r;
    Eigen::MatrixXd Sigma_r;

    /// Appendix values: p = 5, q = 1, d = 3.
    static LinearDynamics paper_defaults();

    Eigen::Index state_dim() const { return b_s.size(); }
    Eigen::Index reward_dim() const { return b_r.size(); }
    Eigen::Index action_dim() const { return W_s.rows() - b_s.size(); }
    void validate() const;
};

enum class PolicyFamily { gaussian, uniform, logistic };

PolicyFamily policy_family_from_string(const std::string& name);
std::string to_string(PolicyFamily family);

/// State-dependent scalar-action policy. theta_a / theta_b are (lower, upper), (mean, std)
/// or (loc, scale) depending on the family. `noise` is the U(0, noise) half-width for the
/// uniform bounds and the N(0, noise^2) scale otherwise.
struct PolicySpec {
    PolicyFamily family = PolicyFamily::gaussian;
    Eigen::VectorXd theta_a;
    Eigen::VectorXd theta_b;
    double noise = 0.05;
    double uniform_shift = 0.05;  // u <- l + shift when u <= l
    double loc_clip = 5.0;        // logistic location clipped to [-clip, clip]

    static PolicySpec paper(PolicyFamily family);
    void validate(Eigen::Index state_dim) const;
};

struct InitialStateDist {
    Eigen::VectorXd mean;  // empty means zero
    Eigen::MatrixXd cov;   // empty means identity
};

/// Independent generator for (seed, stream); streams are hashed with SplitMix64.
std::mt19937_64 stream_rng(std::uint64_t seed, std::uint64_t stream);

double sample_action(const PolicySpec& policy, const Eigen::VectorXd& state, std::mt19937_64& rng);

/// One target action per state row, using stream `row` of `seed` for each.
Eigen::MatrixXd sample_actions(const PolicySpec& policy, const Eigen::MatrixXd& states, std::uint64_t seed);

/// Noise factors are precomputed; reuse one stepper across a rollout.
class Stepper {
public:
    explicit Stepper(const LinearDynamics& dyn);
    std::pair<Eigen::VectorXd, Eigen::VectorXd> operator()(const Eigen::VectorXd& s, const Eigen::VectorXd& a,
                                                          std::mt19937_64& rng) const;
    const LinearDynamics& dynamics() const { return dyn_; }

private:
    LinearDynamics dyn_;
    Eigen::MatrixXd L_s_;
    Eigen::MatrixXd L_r_;
};

std::pair<Eigen::VectorXd, Eigen::VectorXd> step(const LinearDynamics& dyn, const Eigen::VectorXd& s,
                                                 const Eigen::VectorXd& a, std::mt19937_64& rng);

std::vector<Trajectory> generate_dataset(const LinearDynamics& dyn, const PolicySpec& policy, int n_traj, int T,
                                         const InitialStateDist& init, std::uint64_t seed);

/// Rollouts from (s*, a*) under the target policy; returns N x d discounted returns
/// (each row carries weight 1/N).
Eigen::MatrixXd mc_reference(const LinearDynamics& dyn, const PolicySpec& target, const Eigen::VectorXd& s_star,
                             const Eigen::VectorXd& a_star, int n_traj, int T, double discount, std::uint64_t seed);

nlohmann::json dynamics_to_json(const LinearDynamics& dyn);
LinearDynamics dynamics_from_json(const nlohmann::json& j);
nlohmann::json policy_to_json(const PolicySpec& p);
PolicySpec policy_from_json(const nlohmann::json& j);

}  // namespace kedrl
