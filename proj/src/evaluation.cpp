#include "kedrl/evaluation.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <iomanip>

#include "kedrl/errors.hpp"
#include "kedrl/serialize.hpp"
#include "kedrl/sim_env.hpp"

namespace kedrl {
namespace {

constexpr std::uint64_t kMcStream = 0x6d632d726566ULL;
constexpr const char* kMetrics[] = {"bias", "rmse", "mae", "heldout_risk", "mass"};

double metric(const ReplicateReport& r, const std::string& name) {
    if (name == "bias") return r.bias;
    if (name == "rmse") return r.rmse;
    if (name == "mae") return r.mae;
    if (name == "heldout_risk") return r.heldout_risk;
    return r.mass;
}

nlohmann::json number_or_null(double v) { return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr); }

double number_from(const nlohmann::json& j) {
    return j.is_null() ? std::numeric_limits<double>::quiet_NaN() : j.get<double>();
}

}  // namespace

double heldout_risk(const EmbeddingModel& model, const TransitionDataset& test) {
    model.validate();
    detail::require(test.size() >= 1, "heldout_risk: empty test set");
    detail::require(test.has_returns(), "heldout_risk: test set has no realized returns attached");
    detail::require(test.returns.cols() == model.grid.dim(), "heldout_risk: return dimension differs from the grid");
    const Eigen::MatrixXd x = test.inputs();
    detail::require(x.cols() == model.training_inputs.cols(), "heldout_risk: input dimension mismatch");

    const Eigen::MatrixXd W = model.coefficients.transpose() * gram(model.training_inputs, x, model.k_x);  // m x t
    const Eigen::MatrixXd K_Z = gram(model.grid.atoms, model.k_z);
    const Eigen::MatrixXd K_gz = gram(model.grid.atoms, test.returns, model.k_z);  // m x t
    const double self = model.k_z.variance;

    double total = 0.0;
    for (Eigen::Index j = 0; j < x.rows(); ++j) {
        const auto w = W.col(j);
        const double quad = w.dot(K_Z * w);
        double r = self - 2.0 * w.dot(K_gz.col(j)) + quad;
        if (r < 0.0) {
            const double scale = self + std::abs(quad);
            if (r < -1e-12 * std::max(1.0, scale)) {
                throw NumericalError("heldout_risk: squared norm " + std::to_string(r) + " at test row " +
                                     std::to_string(j) + " (K_Z not PSD?)");
            }
            r = 0.0;
        }
        total += r;
    }
    return total / static_cast<double>(x.rows());
}

Eigen::VectorXd mc_embedding(const Eigen::MatrixXd& mc_samples, const Eigen::MatrixXd& eval_points,
                             const MaternParams& k_z) {
    detail::require(mc_samples.rows() >= 1, "mc_embedding: no Monte Carlo samples");
    detail::require(eval_points.rows() >= 1, "mc_embedding: empty evaluation grid");
    detail::require(mc_samples.cols() == eval_points.cols(), "mc_embedding: dimension mismatch");
    const auto N = mc_samples.rows();
    const KernelSum sum(Eigen::VectorXd::Constant(N, 1.0 / static_cast<double>(N)), mc_samples, k_z);
    return sum(eval_points);
}

EmbeddingError residual_stats(const Eigen::VectorXd& mu_hat, const Eigen::VectorXd& mu_mc) {
    detail::require(mu_hat.size() >= 1, "embedding_error: empty evaluation grid");
    detail::require(mu_hat.size() == mu_mc.size(), "embedding_error: length mismatch");
    EmbeddingError e;
    e.mu_hat = mu_hat;
    e.mu_mc = mu_mc;
    e.residuals = mu_hat - mu_mc;
    e.bias = e.residuals.mean();
    e.rmse = std::sqrt(e.residuals.squaredNorm() / static_cast<double>(e.residuals.size()));
    e.mae = e.residuals.cwiseAbs().mean();
    return e;
}

EmbeddingError embedding_error(const Eigen::VectorXd& omega_v, const ReturnGrid& grid, const MaternParams& k_z,
                               const Eigen::VectorXd& mu_mc, const Eigen::MatrixXd& eval_points) {
    detail::require(eval_points.rows() >= 1, "embedding_error: empty evaluation grid");
    detail::require(omega_v.size() == grid.size(), "embedding_error: omega length must equal m");
    detail::require(eval_points.cols() == grid.dim(), "embedding_error: eval point dimension mismatch");
    const KernelSum mu(omega_v, grid.atoms, k_z);
    return residual_stats(mu(eval_points), mu_mc);
}

EmbeddingError embedding_error(const EmbeddingModel& model, const Eigen::MatrixXd& mc_samples,
                               const Eigen::MatrixXd& eval_points, const Eigen::VectorXd& query) {
    const Eigen::VectorXd w = omega(model, query);
    return embedding_error(w, model.grid, model.k_z, mc_embedding(mc_samples, eval_points, model.k_z), eval_points);
}

Eigen::MatrixXd evaluation_grid(const Eigen::MatrixXd& samples, int per_dim, double padding) {
    detail::require(samples.rows() >= 1, "evaluation_grid: no samples");
    detail::require(per_dim >= 2 && padding >= 0.0, "evaluation_grid: per_dim >= 2 and padding >= 0 required");
    const auto d = samples.cols();
    const Eigen::RowVectorXd lo0 = samples.colwise().minCoeff();
    const Eigen::RowVectorXd hi0 = samples.colwise().maxCoeff();
    const Eigen::RowVectorXd len = (hi0 - lo0).cwiseMax(1e-9);
    const Eigen::RowVectorXd lo = lo0 - 0.5 * padding * len;
    const Eigen::RowVectorXd step = (1.0 + padding) * len / static_cast<double>(per_dim - 1);

    Eigen::Index total = 1;
    for (Eigen::Index c = 0; c < d; ++c) total *= per_dim;
    Eigen::MatrixXd out(total, d);
    for (Eigen::Index row = 0; row < total; ++row) {
        Eigen::Index rem = row;
        for (Eigen::Index c = d - 1; c >= 0; --c) {
            out(row, c) = lo(c) + step(c) * static_cast<double>(rem % per_dim);
            rem /= per_dim;
        }
    }
    return out;
}

double w1_1d(std::vector<double> a, std::vector<double> b) {
    detail::require(!a.empty() && !b.empty(), "w1_1d: empty sample");
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    const double na = static_cast<double>(a.size());
    const double nb = static_cast<double>(b.size());
    if (a.size() == b.size()) {
        double s = 0.0;
        for (std::size_t i = 0; i < a.size(); ++i) s += std::abs(a[i] - b[i]);
        return s / na;
    }
    // Walk the merged breakpoints of both quantile functions.
    double total = 0.0, u = 0.0;
    std::size_t i = 0, j = 0;
    while (i < a.size() && j < b.size()) {
        const double ua = static_cast<double>(i + 1) / na;
        const double ub = static_cast<double>(j + 1) / nb;
        const double next = std::min(ua, ub);
        total += (next - u) * std::abs(a[i] - b[j]);
        u = next;
        if (ua <= next) ++i;
        if (ub <= next) ++j;
    }
    return total;
}

MetricSummary summarize(const std::vector<double>& values) {
    std::vector<double> v;
    for (double x : values)
        if (std::isfinite(x)) v.push_back(x);
    MetricSummary s;
    if (v.empty()) return {std::numeric_limits<double>::quiet_NaN(), std::numeric_limits<double>::quiet_NaN()};
    double sum = 0.0;
    for (double x : v) sum += x;
    s.mean = sum / static_cast<double>(v.size());
    if (v.size() > 1) {
        double ss = 0.0;
        for (double x : v) ss += (x - s.mean) * (x - s.mean);
        s.sd = std::sqrt(ss / static_cast<double>(v.size() - 1));
    }
    return s;
}

void aggregate(OPEReport& report) {
    detail::require(!report.replicates.empty(), "aggregate: no replicates");
    report.summary.clear();
    for (const char* name : kMetrics) {
        std::vector<double> v;
        for (const auto& r : report.replicates) v.push_back(metric(r, name));
        report.summary[name] = summarize(v);
    }
    report.bias = report.summary["bias"].mean;
    report.rmse = report.summary["rmse"].mean;
    report.mae = report.summary["mae"].mean;
    report.heldout_risk = report.summary["heldout_risk"].mean;
}

nlohmann::json report_to_json(const OPEReport& r) {
    nlohmann::json reps = nlohmann::json::array();
    for (const auto& x : r.replicates) {
        reps.push_back({{"replicate", x.replicate},
                        {"seed", x.seed},
                        {"bias", x.bias},
                        {"rmse", x.rmse},
                        {"mae", x.mae},
                        {"heldout_risk", number_or_null(x.heldout_risk)},
                        {"mass", x.mass},
                        {"seconds", x.seconds}});
    }
    nlohmann::json summary = nlohmann::json::object();
    for (const auto& [k, s] : r.summary) summary[k] = {{"mean", number_or_null(s.mean)}, {"sd", number_or_null(s.sd)}};
    return {{"format", "kedrl-ope-report"},
            {"bias", r.bias},
            {"rmse", r.rmse},
            {"mae", r.mae},
            {"heldout_risk", number_or_null(r.heldout_risk)},
            {"residuals", vector_to_json(r.residuals)},
            {"replicates", reps},
            {"summary", summary},
            {"config", r.config}};
}

OPEReport report_from_json(const nlohmann::json& j) {
    detail::require(j.value("format", std::string{}) == "kedrl-ope-report", "report: missing format tag");
    OPEReport r;
    r.bias = j.at("bias").get<double>();
    r.rmse = j.at("rmse").get<double>();
    r.mae = j.at("mae").get<double>();
    r.heldout_risk = number_from(j.at("heldout_risk"));
    r.residuals = vector_from_json(j.at("residuals"));
    for (const auto& x : j.at("replicates")) {
        ReplicateReport rr;
        rr.replicate = x.at("replicate").get<int>();
        rr.seed = x.at("seed").get<std::uint64_t>();
        rr.bias = x.at("bias").get<double>();
        rr.rmse = x.at("rmse").get<double>();
        rr.mae = x.at("mae").get<double>();
        rr.heldout_risk = number_from(x.at("heldout_risk"));
        rr.mass = x.at("mass").get<double>();
        rr.seconds = x.at("seconds").get<double>();
        r.replicates.push_back(rr);
    }
    for (const auto& [k, s] : j.at("summary").items()) r.summary[k] = {number_from(s.at("mean")), number_from(s.at("sd"))};
    r.config = j.at("config");
    return r;
}

void write_report_csv(const std::string& path, const OPEReport& r) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path);
    out << std::setprecision(17);
    out << "row,seed,bias,rmse,mae,heldout_risk,mass,seconds\n";
    for (const auto& x : r.replicates) {
        out << x.replicate << ',' << x.seed << ',' << x.bias << ',' << x.rmse << ',' << x.mae << ',' << x.heldout_risk
            << ',' << x.mass << ',' << x.seconds << '\n';
    }
    for (const char* stat : {"mean", "sd"}) {
        out << stat << ',';
        for (const char* name : kMetrics) {
            const auto it = r.summary.find(name);
            const double v = it == r.summary.end() ? std::numeric_limits<double>::quiet_NaN()
                                                   : (std::string(stat) == "mean" ? it->second.mean : it->second.sd);
            out << ',' << v;
        }
        out << ",\n";
    }
    if (!out) throw IoError("write failed: " + path);
}

ScenarioReference scenario_reference(const ExperimentConfig& cfg) {
    ScenarioReference ref;
    ref.mc_samples = mc_reference(cfg.sim.dynamics, cfg.sim.target, cfg.s_star, cfg.a_star, cfg.mc.n_trajectories,
                                  cfg.mc.horizon, cfg.fit.discount, stream_rng(cfg.seed, kMcStream)());
    ref.eval_points = evaluation_grid(ref.mc_samples, cfg.eval.points_per_dim, cfg.eval.padding);
    ref.mu_mc = mc_embedding(ref.mc_samples, ref.eval_points, cfg.fit.k_z);
    return ref;
}

ReplicateRun run_replicate(const ExperimentConfig& cfg, const ScenarioReference& ref, int r, std::uint64_t seed) {
    const auto start = std::chrono::steady_clock::now();
    const std::uint64_t rep_seed = stream_rng(seed, static_cast<std::uint64_t>(r))();
    ExperimentConfig c = cfg;
    c.set_seed(rep_seed);

    const auto trajs = generate_dataset(c.sim.dynamics, c.sim.behavior, c.sim.n_trajectories, c.sim.horizon,
                                        c.sim.init, rep_seed);
    const auto parts = split_trajectories(trajs, c.split, rep_seed + 1);

    ReplicateRun run;
    run.train = flatten_with_returns(parts[0], c.fit.discount);
    const auto& held = parts[1].empty() ? parts[2] : parts[1];
    if (!held.empty()) run.heldout = flatten_with_returns(held, c.fit.discount);

    run.fit = fit_kedrl(run.train, c.sim.target, c.query(), c.fit);
    const Eigen::VectorXd w = omega(run.fit.model, c.query());
    run.error = embedding_error(w, run.fit.model.grid, c.fit.k_z, ref.mu_mc, ref.eval_points);

    auto& rep = run.report;
    rep.replicate = r;
    rep.seed = rep_seed;
    rep.bias = run.error.bias;
    rep.rmse = run.error.rmse;
    rep.mae = run.error.mae;
    rep.mass = w.sum();
    rep.heldout_risk = run.heldout.size() > 0 ? heldout_risk(run.fit.model, run.heldout)
                                              : std::numeric_limits<double>::quiet_NaN();
    rep.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return run;
}

OPEReport replicate_study(const ExperimentConfig& cfg, int n_replicates, std::uint64_t seed,
                          const ScenarioReference* ref) {
    detail::require(n_replicates >= 1, "replicate_study: n_replicates must be >= 1");
    cfg.validate();
    ScenarioReference own;
    if (!ref) {
        own = scenario_reference(cfg);
        ref = &own;
    }
    OPEReport report;
    report.config = config_to_json(cfg);
    report.config["replicates"] = n_replicates;
    report.config["seed"] = seed;
    for (int r = 0; r < n_replicates; ++r) {
        auto run = run_replicate(cfg, *ref, r, seed);
        report.replicates.push_back(run.report);
        if (r == 0) report.residuals = run.error.residuals;
    }
    aggregate(report);
    return report;
}

void write_slice_csv(const std::string& path, const Eigen::VectorXd& omega_v, const ReturnGrid& grid,
                     const MaternParams& k_z, const Eigen::MatrixXd& mc_samples, int points) {
    detail::require(points >= 2, "write_slice_csv: points must be >= 2");
    detail::require(mc_samples.rows() >= 1 && mc_samples.cols() == grid.dim(), "write_slice_csv: bad MC samples");
    const auto N = mc_samples.rows();
    const KernelSum mu_hat(omega_v, grid.atoms, k_z);
    const KernelSum mu_mc(Eigen::VectorXd::Constant(N, 1.0 / static_cast<double>(N)), mc_samples, k_z);
    const Eigen::RowVectorXd center = mc_samples.colwise().mean();
    const Eigen::RowVectorXd lo = mc_samples.colwise().minCoeff();
    const Eigen::RowVectorXd hi = mc_samples.colwise().maxCoeff();

    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path);
    out << std::setprecision(17) << "coord,x,mu_hat,mu_mc\n";
    for (Eigen::Index c = 0; c < grid.dim(); ++c) {
        const double len = std::max(hi(c) - lo(c), 1e-9);
        const double a = lo(c) - 0.05 * len;
        const double step = 1.1 * len / (points - 1);
        for (int t = 0; t < points; ++t) {
            Eigen::VectorXd z = center.transpose();
            z(c) = a + step * t;
            out << c << ',' << z(c) << ',' << mu_hat(z) << ',' << mu_mc(z) << '\n';
        }
    }
    if (!out) throw IoError("write failed: " + path);
}

}  // namespace kedrl
