#pragma once

#include <string>

#include <json.hpp>

#include "kedrl/config.hpp"
#include "kedrl/evaluation.hpp"

namespace kedrl {

enum ExitCode : int { kExitOk = 0, kExitValidation = 2, kExitNumerical = 3, kExitIo = 4 };

/// Writes <out>/trajectories.csv, <out>/manifest.json and <out>/config.json.
void cmd_simulate(const ExperimentConfig& cfg, const std::string& out_dir);

/// Reads a simulate directory, keeps the training split, fits, and writes the model
/// directory plus trace.csv and fit.json.
FitResult cmd_fit(const ExperimentConfig& cfg, const std::string& data_dir, const std::string& out_dir);

/// Scores a model against MC samples (CSV, N x d) or, when mc_path is empty, a fresh MC
/// reference from the config. Held-out risk uses the data directory's held-out split when
/// data_dir is given. Writes report.json, report.csv, slices.csv and embedding.csv.
OPEReport cmd_evaluate(const ExperimentConfig& cfg, const std::string& model_dir, const std::string& mc_path,
                       const std::string& data_dir, const std::string& out_dir);

/// `spec` is one statistic object or an array of them. Besides the stats_recovery kinds,
/// {"kind": "smooth_cdf_curve", "coord": c, "points": n, "h": h} emits raw and clipped series.
nlohmann::json cmd_recover(const std::string& model_dir, const nlohmann::json& spec);

/// Fits every (kernel, lambda_reg, lambda_fp) combination on the training split and ranks by
/// validation held-out risk. Failed cells keep an error message and sort last.
void cmd_sweep(const ExperimentConfig& cfg, const std::string& data_dir, const std::string& out_csv);

/// Entry point for the kedrl executable; returns the process exit code.
int run_cli(int argc, char** argv);

}  // namespace kedrl
