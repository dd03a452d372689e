#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <json.hpp>

#include "kedrl/data.hpp"
#include "kedrl/pipeline.hpp"
#include "kedrl/sim_env.hpp"

namespace kedrl {

struct SimulationConfig {
    LinearDynamics dynamics = LinearDynamics::paper_defaults();
    PolicySpec behavior = PolicySpec::paper(PolicyFamily::uniform);
    PolicySpec target = PolicySpec::paper(PolicyFamily::gaussian);
    InitialStateDist init;
    int n_trajectories = 1000;
    int horizon = 3;
};

struct McConfig {
    int n_trajectories = 10000;
    int horizon = 300;
};

struct EvalConfig {
    int points_per_dim = 25;
    double padding = 0.1;
    int slice_points = 101;
};

/// Cartesian grid for cmd_sweep. A kernel entry sets both k_Z and k_X.
struct SweepConfig {
    std::vector<MaternParams> kernels;
    std::vector<double> lambda_reg;
    std::vector<double> lambda_fp;
};

struct ExperimentConfig {
    SimulationConfig sim;
    FitConfig fit;
    Eigen::VectorXd s_star;
    Eigen::VectorXd a_star;
    McConfig mc;
    EvalConfig eval;
    SplitFractions split{1.0, 0.0, 0.0};
    int replicates = 1;
    SweepConfig sweep;
    std::uint64_t seed = 0;

    Eigen::VectorXd query() const;
    /// Reseeds the fit and optimizer streams from `seed`.
    void set_seed(std::uint64_t s);
    void validate() const;

    /// Uniform behavior, Gaussian target, (nu, l, sigma) = (6.5, 2, 0.6), 20 replicates.
    static ExperimentConfig paper_scenario();
    /// Seconds-scale version of the paper scenario.
    static ExperimentConfig smoke();
};

/// Kernel tuples (nu, l, sigma) used in the figure captions; default sweep presets.
std::vector<MaternParams> kernel_presets();

/// Sections: seed, simulation, fit, grid, optimizer, query, mc, eval, split, replicates,
/// sweep. Missing fields keep the paper-scenario defaults; unknown keys are rejected.
/// A top-level "preset": "paper" | "smoke" selects the base.
ExperimentConfig config_from_json(const nlohmann::json& j);
nlohmann::json config_to_json(const ExperimentConfig& cfg);
ExperimentConfig load_config(const std::string& path);

}  // namespace kedrl
