#include "kedrl/cli.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>

#include <CLI11.hpp>

#include "kedrl/errors.hpp"
#include "kedrl/serialize.hpp"
#include "kedrl/stats_recovery.hpp"

namespace kedrl {
namespace {

namespace fs = std::filesystem;

void ensure_dir(const std::string& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw IoError("cannot create " + dir + ": " + ec.message());
}

std::string join(const std::string& dir, const char* name) { return (fs::path(dir) / name).string(); }

std::vector<Trajectory> load_trajectories(const std::string& data_dir, DatasetManifest* manifest = nullptr) {
    const auto m = read_manifest(join(data_dir, "manifest.json"));
    const auto csv = m.csv_file.empty() ? std::string("trajectories.csv") : m.csv_file;
    auto trajs = read_trajectories_csv((fs::path(data_dir) / csv).string());
    if (static_cast<int>(trajs.size()) != m.n_trajectories) {
        throw InvalidInput(data_dir + ": manifest lists " + std::to_string(m.n_trajectories) + " trajectories, CSV has " +
                           std::to_string(trajs.size()));
    }
    if (manifest) *manifest = m;
    return trajs;
}

// Training and held-out (validation, else test) splits of a simulate directory.
std::pair<TransitionDataset, TransitionDataset> load_splits(const ExperimentConfig& cfg, const std::string& data_dir) {
    DatasetManifest m;
    const auto trajs = load_trajectories(data_dir, &m);
    const auto parts = split_trajectories(trajs, cfg.split, m.seed + 1);
    TransitionDataset held;
    const auto& h = parts[1].empty() ? parts[2] : parts[1];
    if (!h.empty()) held = flatten_with_returns(h, cfg.fit.discount);
    return {flatten_with_returns(parts[0], cfg.fit.discount), held};
}

double recover_value(const Eigen::VectorXd& w, const EmbeddingModel& model, const nlohmann::json& spec) {
    const auto g = test_function_from_json(spec, model.grid, model.k_z, w);
    return recover(w, model.grid, g);
}

nlohmann::json recover_one(const Eigen::VectorXd& w, const EmbeddingModel& model, const nlohmann::json& spec) {
    detail::require(spec.is_object() && spec.contains("kind"), "statistic spec must be an object with a 'kind'");
    const auto kind = spec.at("kind").get<std::string>();
    if (kind == "smooth_cdf_curve") {
        for (const auto& [key, _] : spec.items()) {
            if (key != "kind" && key != "coord" && key != "points" && key != "h" && key != "thresholds") {
                throw InvalidInput("smooth_cdf_curve: unknown key '" + key + "'");
            }
        }
        const Eigen::Index coord = spec.value("coord", 0);
        detail::require(coord >= 0 && coord < model.grid.dim(), "smooth_cdf_curve: coord out of range");
        const double h = spec.contains("h") ? spec.at("h").get<double>() : default_bandwidth(model.grid, coord);
        std::vector<double> t;
        if (spec.contains("thresholds")) {
            t = spec.at("thresholds").get<std::vector<double>>();
        } else {
            const int points = spec.value("points", 101);
            detail::require(points >= 2, "smooth_cdf_curve: points must be >= 2");
            const double lo = model.grid.atoms.col(coord).minCoeff();
            const double hi = model.grid.atoms.col(coord).maxCoeff();
            const double pad = 0.1 * std::max(hi - lo, 1e-9);
            for (int i = 0; i < points; ++i) t.push_back(lo - pad + (hi - lo + 2 * pad) * i / (points - 1));
        }
        const auto c = smooth_cdf_curve(w, model.grid, t, h, coord);
        return {{"kind", kind}, {"coord", coord}, {"h", h}, {"thresholds", c.thresholds}, {"raw", c.raw},
                {"clipped", c.clipped}};
    }
    nlohmann::json out = spec;
    out["value"] = recover_value(w, model, spec);
    return out;
}

template <class F>
int guarded(F&& body) {
    try {
        body();
        return kExitOk;
    } catch (const InvalidInput& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitValidation;
    } catch (const DomainError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitValidation;
    } catch (const nlohmann::json::exception& e) {
        std::cerr << "error: malformed JSON: " << e.what() << '\n';
        return kExitValidation;
    } catch (const NumericalError& e) {
        std::cerr << "numerical error: " << e.what() << '\n';
        return kExitNumerical;
    } catch (const IoError& e) {
        std::cerr << "I/O error: " << e.what() << '\n';
        return kExitIo;
    }
}

}  // namespace

void cmd_simulate(const ExperimentConfig& cfg, const std::string& out_dir) {
    cfg.validate();
    ensure_dir(out_dir);
    const auto trajs = generate_dataset(cfg.sim.dynamics, cfg.sim.behavior, cfg.sim.n_trajectories, cfg.sim.horizon,
                                        cfg.sim.init, cfg.seed);
    write_trajectories_csv(join(out_dir, "trajectories.csv"), trajs);
    DatasetManifest m;
    m.state_dim = static_cast<int>(cfg.sim.dynamics.state_dim());
    m.action_dim = static_cast<int>(cfg.sim.dynamics.action_dim());
    m.reward_dim = static_cast<int>(cfg.sim.dynamics.reward_dim());
    m.gamma = cfg.fit.discount;
    m.seed = cfg.seed;
    m.n_trajectories = cfg.sim.n_trajectories;
    m.csv_file = "trajectories.csv";
    write_manifest(join(out_dir, "manifest.json"), m);
    write_json_file(join(out_dir, "config.json"), config_to_json(cfg));
}

FitResult cmd_fit(const ExperimentConfig& cfg, const std::string& data_dir, const std::string& out_dir) {
    cfg.validate();
    const auto [train, held] = load_splits(cfg, data_dir);
    auto res = fit_kedrl(train, cfg.sim.target, cfg.query(), cfg.fit);
    save_model(out_dir, res.model);
    write_trace_csv(join(out_dir, "trace.csv"), res.trace);
    nlohmann::json timings = nlohmann::json::object();
    for (const auto& t : res.timings) timings[t.stage] = t.seconds;
    const Eigen::VectorXd w = omega(res.model, cfg.query());
    nlohmann::json info = {{"n_train", train.size()},
                           {"m", res.model.grid.size()},
                           {"mass", w.sum()},
                           {"final_objective", res.trace.records.empty() ? 0.0 : res.trace.records.back().objective},
                           {"returned_step", res.trace.returned_step},
                           {"timings_seconds", timings},
                           {"ratio", ratio_to_json(res.ratio)},
                           {"config", config_to_json(cfg)}};
    if (held.size() > 0) info["heldout_risk"] = heldout_risk(res.model, held);
    write_json_file(join(out_dir, "fit.json"), info);
    return res;
}

OPEReport cmd_evaluate(const ExperimentConfig& cfg, const std::string& model_dir, const std::string& mc_path,
                       const std::string& data_dir, const std::string& out_dir) {
    cfg.validate();
    const auto model = load_model(model_dir);
    const Eigen::VectorXd query = model.query.size() ? model.query : cfg.query();
    detail::require(query.size() == model.training_inputs.cols(), "evaluate: model has no usable query point");

    Eigen::MatrixXd mc;
    if (!mc_path.empty()) {
        if (!fs::exists(mc_path)) throw IoError("Monte Carlo reference not found: " + mc_path);
        mc = read_matrix_csv(mc_path);
    } else {
        auto c = cfg;
        c.s_star = query.head(query.size() - 1);
        c.a_star = query.tail(1);
        mc = scenario_reference(c).mc_samples;
    }
    detail::require(mc.rows() >= 1, "evaluate: Monte Carlo reference is empty");
    detail::require(mc.cols() == model.grid.dim(), "evaluate: MC samples have " + std::to_string(mc.cols()) +
                                                       " columns, model returns have " +
                                                       std::to_string(model.grid.dim()));

    const auto points = evaluation_grid(mc, cfg.eval.points_per_dim, cfg.eval.padding);
    const Eigen::VectorXd w = omega(model, query);
    const auto err = embedding_error(w, model.grid, model.k_z, mc_embedding(mc, points, model.k_z), points);

    OPEReport report;
    ReplicateReport rep;
    rep.bias = err.bias;
    rep.rmse = err.rmse;
    rep.mae = err.mae;
    rep.mass = w.sum();
    rep.heldout_risk = std::numeric_limits<double>::quiet_NaN();
    if (!data_dir.empty()) {
        const auto held = load_splits(cfg, data_dir).second;
        if (held.size() > 0) rep.heldout_risk = heldout_risk(model, held);
    }
    report.replicates.push_back(rep);
    aggregate(report);
    report.residuals = err.residuals;
    report.config = config_to_json(cfg);
    report.config["model_dir"] = model_dir;
    report.config["mc_source"] = mc_path.empty() ? std::string("simulated") : mc_path;

    ensure_dir(out_dir);
    write_json_file(join(out_dir, "report.json"), report_to_json(report));
    write_report_csv(join(out_dir, "report.csv"), report);
    write_slice_csv(join(out_dir, "slices.csv"), w, model.grid, model.k_z, mc, cfg.eval.slice_points);
    Eigen::MatrixXd emb(points.rows(), points.cols() + 2);
    emb << points, err.mu_hat, err.mu_mc;
    std::string header;
    for (Eigen::Index c = 0; c < points.cols(); ++c) header += "z_" + std::to_string(c) + ",";
    write_matrix_csv(join(out_dir, "embedding.csv"), emb, header + "mu_hat,mu_mc");
    return report;
}

nlohmann::json cmd_recover(const std::string& model_dir, const nlohmann::json& spec) {
    const auto model = load_model(model_dir);
    detail::require(model.query.size() == model.training_inputs.cols(), "recover: model has no query point");
    const Eigen::VectorXd w = omega(model, model.query);
    nlohmann::json results = nlohmann::json::array();
    if (spec.is_array()) {
        for (const auto& s : spec) results.push_back(recover_one(w, model, s));
    } else {
        results.push_back(recover_one(w, model, spec));
    }
    return {{"model_dir", model_dir}, {"query", vector_to_json(model.query)}, {"omega", vector_to_json(w)},
            {"results", results}};
}

void cmd_sweep(const ExperimentConfig& cfg, const std::string& data_dir, const std::string& out_csv) {
    cfg.validate();
    detail::require(!cfg.sweep.kernels.empty() && !cfg.sweep.lambda_reg.empty() && !cfg.sweep.lambda_fp.empty(),
                    "sweep: every parameter grid must be nonempty");
    const auto [train, held] = load_splits(cfg, data_dir);
    detail::require(held.size() > 0, "sweep: the split leaves no validation or test trajectories to rank on");

    struct Row {
        MaternParams kernel;
        double lambda_reg, lambda_fp;
        double risk = std::numeric_limits<double>::infinity();
        double mass = std::numeric_limits<double>::quiet_NaN();
        std::string error;
    };
    std::vector<Row> rows;
    for (const auto& k : cfg.sweep.kernels)
        for (double lr : cfg.sweep.lambda_reg)
            for (double lf : cfg.sweep.lambda_fp) rows.push_back({k, lr, lf, std::numeric_limits<double>::infinity(),
                                                                   std::numeric_limits<double>::quiet_NaN(), {}});

    for (auto& row : rows) {
        auto fit_cfg = cfg.fit;
        fit_cfg.k_z = fit_cfg.k_x = row.kernel;
        fit_cfg.lambda_reg = row.lambda_reg;
        fit_cfg.optimizer.lambda_fp = row.lambda_fp;
        try {
            const auto res = fit_kedrl(train, cfg.sim.target, cfg.query(), fit_cfg);
            row.risk = heldout_risk(res.model, held);
            row.mass = omega(res.model, cfg.query()).sum();
        } catch (const std::exception& e) {
            row.error = e.what();
        }
    }
    std::stable_sort(rows.begin(), rows.end(), [](const Row& a, const Row& b) {
        if (a.error.empty() != b.error.empty()) return a.error.empty();
        return a.risk < b.risk;
    });

    std::ofstream out(out_csv);
    if (!out) throw IoError("cannot write " + out_csv);
    out << std::setprecision(17) << "rank,nu,length_scale,sigma,lambda_reg,lambda_fp,heldout_risk,mass,error\n";
    int rank = 1;
    for (const auto& r : rows) {
        std::string err = r.error;
        std::replace(err.begin(), err.end(), ',', ';');
        std::replace(err.begin(), err.end(), '\n', ' ');
        out << rank++ << ',' << r.kernel.nu << ',' << r.kernel.length_scale << ',' << r.kernel.sigma() << ','
            << r.lambda_reg << ',' << r.lambda_fp << ',';
        if (r.error.empty()) out << r.risk << ',' << r.mass << ",\n";
        else out << ",," << '"' << err << '"' << '\n';
    }
    if (!out) throw IoError("write failed: " + out_csv);
    write_json_file(out_csv + ".config.json", config_to_json(cfg));
}

int run_cli(int argc, char** argv) {
    CLI::App app{"Kernel-embedding distributional off-policy evaluation"};
    app.require_subcommand(1);

    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::string out = "out";

    auto common = [&](CLI::App* sub, bool need_out = true) {
        sub->add_option("--config", config_path, "experiment config (JSON)");
        sub->add_option("--seed", seed, "override the config seed");
        if (need_out) sub->add_option("--out", out, "output directory")->capture_default_str();
    };
    auto load = [&] {
        ExperimentConfig c = config_path.empty() ? ExperimentConfig::paper_scenario() : load_config(config_path);
        if (seed) c.set_seed(*seed);
        c.validate();
        return c;
    };

    std::string data_dir, model_dir, mc_path, stat_spec;
    int replicates = 0;

    auto* sim = app.add_subcommand("simulate", "generate a logged dataset");
    common(sim);
    auto* fit = app.add_subcommand("fit", "fit the embedding model at the configured query");
    common(fit);
    fit->add_option("--data", data_dir, "simulate output directory")->required();
    auto* ev = app.add_subcommand("evaluate", "score a model against a Monte Carlo reference");
    common(ev);
    ev->add_option("--model", model_dir, "model directory")->required();
    ev->add_option("--mc", mc_path, "MC return samples (CSV, N x d); simulated from the config when absent");
    ev->add_option("--data", data_dir, "dataset directory for held-out risk");
    auto* rec = app.add_subcommand("recover", "recover statistics from a fitted model");
    common(rec);
    rec->add_option("--model", model_dir, "model directory")->required();
    rec->add_option("--stat", stat_spec, "statistic spec: JSON text or a path to a JSON file")->required();
    auto* sw = app.add_subcommand("sweep", "rank hyperparameter combinations by validation risk");
    common(sw);
    sw->add_option("--data", data_dir, "simulate output directory")->required();
    auto* rep = app.add_subcommand("replicate", "repeat simulate, fit and evaluate; aggregate metrics");
    common(rep);
    rep->add_option("--replicates", replicates, "override the config replicate count");
    auto* all = app.add_subcommand("run", "simulate, fit, evaluate and recover from one config");
    common(all);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kExitOk : kExitValidation;
    }

    return guarded([&] {
        const auto cfg = load();
        if (*sim) {
            cmd_simulate(cfg, out);
            std::cout << "wrote " << cfg.sim.n_trajectories << " trajectories to " << out << '\n';
        } else if (*fit) {
            const auto res = cmd_fit(cfg, data_dir, out);
            std::cout << "model (n=" << res.model.coefficients.rows() << ", m=" << res.model.grid.size()
                      << ") written to " << out << '\n';
        } else if (*ev) {
            const auto r = cmd_evaluate(cfg, model_dir, mc_path, data_dir, out);
            std::cout << "bias " << r.bias << "  rmse " << r.rmse << "  mae " << r.mae << '\n';
        } else if (*rec) {
            nlohmann::json spec;
            if (fs::exists(stat_spec)) spec = read_json_file(stat_spec);
            else spec = nlohmann::json::parse(stat_spec);
            const auto res = cmd_recover(model_dir, spec);
            ensure_dir(out);
            write_json_file(join(out, "recover.json"), res);
            std::cout << res.at("results").dump(2) << '\n';
        } else if (*sw) {
            ensure_dir(out);
            cmd_sweep(cfg, data_dir, join(out, "leaderboard.csv"));
            std::cout << "leaderboard written to " << join(out, "leaderboard.csv") << '\n';
        } else if (*rep) {
            const int n = replicates > 0 ? replicates : cfg.replicates;
            const auto r = replicate_study(cfg, n, cfg.seed);
            ensure_dir(out);
            write_json_file(join(out, "report.json"), report_to_json(r));
            write_report_csv(join(out, "report.csv"), r);
            for (const char* k : {"bias", "rmse", "mae", "mass"}) {
                const auto& s = r.summary.at(k);
                std::cout << k << " " << s.mean << " (" << s.sd << ")\n";
            }
        } else if (*all) {
            const auto data = join(out, "data");
            const auto model = join(out, "model");
            cmd_simulate(cfg, data);
            cmd_fit(cfg, data, model);
            const auto r = cmd_evaluate(cfg, model, "", data, join(out, "eval"));
            const nlohmann::json stats = {{{"kind", "mass"}},
                                          {{"kind", "smooth_cdf_curve"}, {"coord", 0}},
                                          {{"kind", "smooth_cdf_curve"}, {"coord", 1}},
                                          {{"kind", "smooth_cdf_curve"}, {"coord", 2}},
                                          {{"kind", "spectral_cvar"}, {"coord", 0}}};
            nlohmann::json wanted = nlohmann::json::array();
            for (const auto& s : stats)
                if (s.value("coord", 0) < static_cast<int>(cfg.sim.dynamics.reward_dim())) wanted.push_back(s);
            write_json_file(join(out, "recover.json"), cmd_recover(model, wanted));
            std::cout << "bias " << r.bias << "  rmse " << r.rmse << "  mae " << r.mae << "\nresults in " << out
                      << '\n';
        }
    });
}

}  // namespace kedrl
