#pragma once

#include <cstdint>
#include <limits>
#include <map>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <json.hpp>

#include "kedrl/bellman.hpp"
#include "kedrl/config.hpp"
#include "kedrl/data.hpp"

namespace kedrl {

/// Mean over held-out rows of ||k_Z(., z_j) - sum_i omega_ij k_Z(., z_i)||^2 with
/// omega_j = B^T k_X(s_j, a_j) and z_j the realized return. Tiny negatives clamp to 0.
double heldout_risk(const EmbeddingModel& model, const TransitionDataset& test);

struct EmbeddingError {
    double bias = 0.0;
    double rmse = 0.0;
    double mae = 0.0;
    Eigen::VectorXd residuals;  // mu_hat(z) - mu_mc(z) per eval point
    Eigen::VectorXd mu_hat;
    Eigen::VectorXd mu_mc;
};

/// (1/N) sum_i k_Z(mc_i, z) at every eval point.
Eigen::VectorXd mc_embedding(const Eigen::MatrixXd& mc_samples, const Eigen::MatrixXd& eval_points,
                             const MaternParams& k_z);

/// Residual statistics of an embedding given by atom weights.
EmbeddingError embedding_error(const Eigen::VectorXd& omega_v, const ReturnGrid& grid, const MaternParams& k_z,
                               const Eigen::VectorXd& mu_mc, const Eigen::MatrixXd& eval_points);

EmbeddingError embedding_error(const EmbeddingModel& model, const Eigen::MatrixXd& mc_samples,
                               const Eigen::MatrixXd& eval_points, const Eigen::VectorXd& query);

EmbeddingError residual_stats(const Eigen::VectorXd& mu_hat, const Eigen::VectorXd& mu_mc);

/// Regular grid with `per_dim` points per coordinate over the bounding box of `samples`,
/// each side widened by `padding` times its length (split evenly). Rows vary the last
/// coordinate fastest.
Eigen::MatrixXd evaluation_grid(const Eigen::MatrixXd& samples, int per_dim = 25, double padding = 0.1);

/// Mean |a_(i) - b_(i)| over order statistics. Unequal lengths are compared through the
/// quantile functions on the merged level set, which is the exact 1-D W1 distance.
double w1_1d(std::vector<double> a, std::vector<double> b);

struct MetricSummary {
    double mean = 0.0;
    double sd = 0.0;  // sample sd; 0 for a single replicate
};

MetricSummary summarize(const std::vector<double>& values);

struct ReplicateReport {
    int replicate = 0;
    std::uint64_t seed = 0;
    double bias = 0.0;
    double rmse = 0.0;
    double mae = 0.0;
    double heldout_risk = 0.0;  // NaN when no held-out data
    double mass = 0.0;          // 1^T omega
    double seconds = 0.0;
};

struct OPEReport {
    double bias = 0.0;
    double rmse = 0.0;
    double mae = 0.0;
    double heldout_risk = std::numeric_limits<double>::quiet_NaN();
    Eigen::VectorXd residuals;
    nlohmann::json config;
    std::vector<ReplicateReport> replicates;
    std::map<std::string, MetricSummary> summary;  // over replicates: bias, rmse, mae, heldout_risk, mass
};

/// Fills the summary map (and the headline bias/rmse/mae/heldout_risk with the means).
void aggregate(OPEReport& report);

nlohmann::json report_to_json(const OPEReport& report);
OPEReport report_from_json(const nlohmann::json& j);
/// One row per replicate, then mean and sd rows.
void write_report_csv(const std::string& path, const OPEReport& report);

/// Monte Carlo reference shared by every replicate of a scenario.
struct ScenarioReference {
    Eigen::MatrixXd mc_samples;   // N x d discounted returns from (s*, a*)
    Eigen::MatrixXd eval_points;  // evaluation_grid(mc_samples)
    Eigen::VectorXd mu_mc;        // mc_embedding at eval_points
};

/// Rollouts use their own stream of cfg.seed, so the reference does not move with replicates.
ScenarioReference scenario_reference(const ExperimentConfig& cfg);

struct ReplicateRun {
    ReplicateReport report;
    FitResult fit;
    EmbeddingError error;
    TransitionDataset train;
    TransitionDataset heldout;  // validation split, else test split; may be empty
};

/// Replicate r: simulate with stream r of `seed`, split by trajectory, fit, evaluate.
ReplicateRun run_replicate(const ExperimentConfig& cfg, const ScenarioReference& ref, int r, std::uint64_t seed);

/// Repeats run_replicate for r = 0 .. n_replicates-1 and aggregates. Replicates run one
/// after another; each fit parallelizes internally.
OPEReport replicate_study(const ExperimentConfig& cfg, int n_replicates, std::uint64_t seed,
                          const ScenarioReference* ref = nullptr);

/// Figure data: for each coordinate c, a 1-D slice through the MC mean with the other
/// coordinates fixed; columns coord, x, mu_hat, mu_mc.
void write_slice_csv(const std::string& path, const Eigen::VectorXd& omega_v, const ReturnGrid& grid,
                     const MaternParams& k_z, const Eigen::MatrixXd& mc_samples, int points = 101);

}  // namespace kedrl
