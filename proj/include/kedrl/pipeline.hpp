#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "kedrl/bellman.hpp"
#include "kedrl/data.hpp"
#include "kedrl/density_ratio.hpp"
#include "kedrl/optimizer.hpp"
#include "kedrl/return_grid.hpp"
#include "kedrl/sim_env.hpp"

namespace kedrl {

enum class GridSource {
    reward_bootstrap,  // discounted sums of pooled training rewards drawn with replacement
    observed_returns,  // the dataset's attached returns
};

GridSource grid_source_from_string(const std::string& name);
std::string to_string(GridSource source);

struct GridConfig {
    int k = 48;
    double expansion = 1.1;
    GridSource source = GridSource::reward_bootstrap;
    int bootstrap_samples = 2000;
    int bootstrap_horizon = 0;  // 0: smallest H with discount^H <= 1e-6
    int max_iter = 300;

    void validate() const;
};

struct FitConfig {
    MaternParams k_z = MaternParams::from_sigma(6.5, 2.0, 0.6);
    MaternParams k_x = MaternParams::from_sigma(6.5, 2.0, 0.6);
    double lambda_reg = 5e-4;
    double discount = 0.9;
    double lambda_ulsif = 1e-3;
    GridConfig grid;
    OptimizerConfig optimizer;
    std::uint64_t seed = 0;

    void validate() const;
};

/// Return samples the grid is clustered from.
Eigen::MatrixXd grid_samples(const TransitionDataset& train, const GridConfig& cfg, double discount,
                             std::uint64_t seed);

struct StageTiming {
    std::string stage;
    double seconds = 0.0;
};

struct FitResult {
    EmbeddingModel model;
    BellmanOperators ops;
    RatioModel ratio;
    Eigen::MatrixXd K_Z;
    OptimizationTrace trace;
    std::vector<StageTiming> timings;
};

/// The full estimator at one query (s*, a*): Gram matrices, ridge weights, uLSIF ratio between
/// (s', a' ~ behavior) and (s', a' ~ target), Phi, grid, H and G, then the optimizer.
/// Any component failure is rethrown with the stage name prefixed.
FitResult fit_kedrl(const TransitionDataset& train, const PolicySpec& target, const Eigen::VectorXd& query,
                    const FitConfig& cfg);

}  // namespace kedrl
