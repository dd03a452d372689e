#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Core>

namespace kedrl {

/// One logged episode. Row t holds (s_t, a_t, r_t); s_{t+1} is row t+1.
struct Trajectory {
    Eigen::MatrixXd states;   // T x p
    Eigen::MatrixXd actions;  // T x q
    Eigen::MatrixXd rewards;  // T x d

    Eigen::Index length() const { return states.rows(); }
    void validate() const;
};

/// Flattened (s, a, r, s', a') tuples. a' is the logged (behavior) action at s'.
struct TransitionDataset {
    Eigen::MatrixXd states;
    Eigen::MatrixXd actions;
    Eigen::MatrixXd rewards;
    Eigen::MatrixXd next_states;
    Eigen::MatrixXd next_actions;
    std::vector<int> trajectory_ids;
    /// Realized discounted returns from each (s, a); empty unless attached.
    Eigen::MatrixXd returns;

    Eigen::Index size() const { return states.rows(); }
    Eigen::Index state_dim() const { return states.cols(); }
    Eigen::Index action_dim() const { return actions.cols(); }
    Eigen::Index reward_dim() const { return rewards.cols(); }
    bool has_returns() const { return returns.rows() == size() && size() > 0; }

    /// Rows [s, a].
    Eigen::MatrixXd inputs() const;
    /// Rows [s', a'].
    Eigen::MatrixXd next_inputs() const;
    int trajectory_count() const;

    void validate() const;
};

/// Concatenates every observed step; the last step of each trajectory only supplies s'.
/// Trajectory ids are positions in the input list.
TransitionDataset flatten(const std::vector<Trajectory>& trajectories);

/// As flatten, and fills `returns` with truncated discounted returns.
TransitionDataset flatten_with_returns(const std::vector<Trajectory>& trajectories, double gamma);

/// sum_{t=start}^{T-1} gamma^{t-start} r_t
Eigen::VectorXd discounted_return(const Trajectory& traj, Eigen::Index start_index, double gamma);

struct SplitFractions {
    double train = 0.8;
    double val = 0.1;
    double test = 0.1;
};

/// Split label (0 train, 1 val, 2 test) per trajectory.
std::vector<int> assign_splits(int n_trajectories, const SplitFractions& fractions, std::uint64_t seed);

std::array<TransitionDataset, 3> split_by_trajectory(const TransitionDataset& dataset,
                                                     const SplitFractions& fractions,
                                                     std::uint64_t seed);

std::array<std::vector<Trajectory>, 3> split_trajectories(const std::vector<Trajectory>& trajectories,
                                                          const SplitFractions& fractions,
                                                          std::uint64_t seed);

struct DatasetManifest {
    int state_dim = 0;
    int action_dim = 0;
    int reward_dim = 0;
    double gamma = 0.9;
    std::uint64_t seed = 0;
    int n_trajectories = 0;
    std::string csv_file;
};

/// Columns: traj_id, t, s_0..s_{p-1}, a_0..a_{q-1}, r_0..r_{d-1}.
void write_trajectories_csv(const std::string& path, const std::vector<Trajectory>& trajectories);
std::vector<Trajectory> read_trajectories_csv(const std::string& path);

void write_manifest(const std::string& path, const DatasetManifest& manifest);
DatasetManifest read_manifest(const std::string& path);

}  // namespace kedrl
