#include "kedrl/config.hpp"

#include <algorithm>
#include <cmath>
#include <initializer_list>

#include "kedrl/errors.hpp"
#include "kedrl/serialize.hpp"

namespace kedrl {
namespace {

using nlohmann::json;

void check_keys(const json& j, const std::string& section, std::initializer_list<const char*> allowed) {
    if (!j.is_object()) throw InvalidInput(section + ": expected a JSON object");
    for (const auto& [key, _] : j.items()) {
        if (std::none_of(allowed.begin(), allowed.end(), [&](const char* a) { return key == a; })) {
            std::string list;
            for (const char* a : allowed) list += (list.empty() ? "" : ", ") + std::string(a);
            throw InvalidInput(section + ": unknown key '" + key + "' (allowed: " + list + ")");
        }
    }
}

template <class T>
void read_if(const json& j, const char* key, T& out, const std::string& section) {
    if (!j.contains(key)) return;
    try {
        out = j.at(key).get<T>();
    } catch (const json::exception& e) {
        throw InvalidInput(section + "." + key + ": " + e.what());
    }
}

// (nu, l, sigma) triple or a {nu, length_scale, sigma|variance} object.
MaternParams kernel_from_json(const json& j, const std::string& section) {
    if (j.is_array()) {
        detail::require(j.size() == 3, section + ": kernel triple must be [nu, length_scale, sigma]");
        return MaternParams::from_sigma(j[0].get<double>(), j[1].get<double>(), j[2].get<double>());
    }
    try {
        return params_from_json(j);
    } catch (const InvalidInput& e) {
        throw InvalidInput(section + ": " + e.what());
    }
}

std::vector<double> doubles(const json& j, const std::string& section) {
    detail::require(j.is_array(), section + ": expected an array");
    return j.get<std::vector<double>>();
}

void apply_simulation(const json& j, SimulationConfig& s) {
    check_keys(j, "simulation", {"dynamics", "behavior", "target", "n_trajectories", "horizon", "init_mean", "init_cov"});
    if (j.contains("dynamics")) {
        const auto& d = j.at("dynamics");
        if (d.is_string()) {
            detail::require(d.get<std::string>() == "paper", "simulation.dynamics: only the \"paper\" preset exists");
            s.dynamics = LinearDynamics::paper_defaults();
        } else {
            s.dynamics = dynamics_from_json(d);
        }
    }
    if (j.contains("behavior")) s.behavior = policy_from_json(j.at("behavior"));
    if (j.contains("target")) s.target = policy_from_json(j.at("target"));
    read_if(j, "n_trajectories", s.n_trajectories, "simulation");
    read_if(j, "horizon", s.horizon, "simulation");
    if (j.contains("init_mean")) s.init.mean = vector_from_json(j.at("init_mean"));
    if (j.contains("init_cov")) s.init.cov = matrix_from_json(j.at("init_cov"));
}

void apply_fit(const json& j, FitConfig& f) {
    check_keys(j, "fit", {"kernel", "k_z", "k_x", "lambda_reg", "discount", "lambda_ulsif"});
    if (j.contains("kernel")) f.k_z = f.k_x = kernel_from_json(j.at("kernel"), "fit.kernel");
    if (j.contains("k_z")) f.k_z = kernel_from_json(j.at("k_z"), "fit.k_z");
    if (j.contains("k_x")) f.k_x = kernel_from_json(j.at("k_x"), "fit.k_x");
    read_if(j, "lambda_reg", f.lambda_reg, "fit");
    read_if(j, "discount", f.discount, "fit");
    read_if(j, "lambda_ulsif", f.lambda_ulsif, "fit");
}

void apply_grid(const json& j, GridConfig& g) {
    check_keys(j, "grid", {"k", "expansion", "source", "bootstrap_samples", "bootstrap_horizon", "max_iter"});
    read_if(j, "k", g.k, "grid");
    read_if(j, "expansion", g.expansion, "grid");
    if (j.contains("source")) g.source = grid_source_from_string(j.at("source").get<std::string>());
    read_if(j, "bootstrap_samples", g.bootstrap_samples, "grid");
    read_if(j, "bootstrap_horizon", g.bootstrap_horizon, "grid");
    read_if(j, "max_iter", g.max_iter, "grid");
}

void apply_optimizer(const json& j, OptimizerConfig& o) {
    check_keys(j, "optimizer", {"steps", "learning_rate", "beta1", "beta2", "epsilon", "weight_decay", "lambda_fp",
                                "lambda_mass", "tol", "keep_best"});
    read_if(j, "steps", o.steps, "optimizer");
    read_if(j, "learning_rate", o.learning_rate, "optimizer");
    read_if(j, "beta1", o.beta1, "optimizer");
    read_if(j, "beta2", o.beta2, "optimizer");
    read_if(j, "epsilon", o.epsilon_adam, "optimizer");
    read_if(j, "weight_decay", o.weight_decay, "optimizer");
    read_if(j, "lambda_fp", o.lambda_fp, "optimizer");
    read_if(j, "lambda_mass", o.lambda_mass, "optimizer");
    read_if(j, "tol", o.tol, "optimizer");
    read_if(j, "keep_best", o.keep_best, "optimizer");
}

}  // namespace

Eigen::VectorXd ExperimentConfig::query() const {
    Eigen::VectorXd q(s_star.size() + a_star.size());
    q << s_star, a_star;
    return q;
}

void ExperimentConfig::set_seed(std::uint64_t s) {
    seed = s;
    fit.seed = s;
    fit.optimizer.seed = s ^ 0x5bd1e995ULL;
}

void ExperimentConfig::validate() const {
    const auto& dyn = sim.dynamics;
    dyn.validate();
    sim.behavior.validate(dyn.state_dim());
    sim.target.validate(dyn.state_dim());
    detail::require(dyn.action_dim() == 1, "simulation: policies emit scalar actions, dynamics expect q = " +
                                               std::to_string(dyn.action_dim()));
    detail::require(sim.n_trajectories >= 1 && sim.horizon >= 1, "simulation: n_trajectories and horizon must be >= 1");
    detail::require(sim.init.mean.size() == 0 || sim.init.mean.size() == dyn.state_dim(),
                    "simulation.init_mean: length must equal p");
    detail::require(sim.init.cov.size() == 0 ||
                        (sim.init.cov.rows() == dyn.state_dim() && sim.init.cov.cols() == dyn.state_dim()),
                    "simulation.init_cov: must be p x p");
    fit.validate();
    detail::require(s_star.size() == dyn.state_dim(), "query.s: length must equal p = " +
                                                          std::to_string(dyn.state_dim()));
    detail::require(a_star.size() == dyn.action_dim(), "query.a: length must equal q");
    detail::require(s_star.allFinite() && a_star.allFinite(), "query: values must be finite");
    detail::require(mc.n_trajectories >= 1 && mc.horizon >= 1, "mc: n_trajectories and horizon must be >= 1");
    detail::require(eval.points_per_dim >= 2 && eval.padding >= 0.0 && eval.slice_points >= 2,
                    "eval: points_per_dim >= 2, padding >= 0, slice_points >= 2");
    detail::require(replicates >= 1, "replicates must be >= 1");
    for (const auto& k : sweep.kernels) k.validate();
    for (double v : sweep.lambda_reg) detail::require(v > 0.0, "sweep.lambda_reg: values must be > 0");
    for (double v : sweep.lambda_fp) detail::require(v >= 0.0, "sweep.lambda_fp: values must be >= 0");
}

ExperimentConfig ExperimentConfig::paper_scenario() {
    ExperimentConfig c;
    c.s_star.resize(5);
    c.s_star << -1.294, -0.917, 0.219, 0.283, 1.466;
    c.a_star.resize(1);
    c.a_star << 0.434;
    c.replicates = 20;
    c.sweep.kernels = {kernel_presets().front()};
    c.sweep.lambda_reg = {c.fit.lambda_reg};
    c.sweep.lambda_fp = {c.fit.optimizer.lambda_fp};
    c.set_seed(0);
    return c;
}

ExperimentConfig ExperimentConfig::smoke() {
    auto c = paper_scenario();
    c.sim.n_trajectories = 40;
    c.fit.grid.k = 12;
    c.fit.grid.bootstrap_samples = 400;
    c.fit.optimizer.steps = 200;
    c.mc.n_trajectories = 500;
    c.mc.horizon = 80;
    c.eval.points_per_dim = 8;
    c.replicates = 2;
    return c;
}

std::vector<MaternParams> kernel_presets() {
    return {MaternParams::from_sigma(6.5, 2.0, 0.6), MaternParams::from_sigma(7.5, 2.0, 0.6),
            MaternParams::from_sigma(6.5, 1.5, 0.8), MaternParams::from_sigma(7.5, 2.0, 0.9),
            MaternParams::from_sigma(5.5, 2.5, 0.9)};
}

ExperimentConfig config_from_json(const json& j) {
    check_keys(j, "config", {"preset", "seed", "simulation", "fit", "grid", "optimizer", "query", "mc", "eval", "split",
                             "replicates", "sweep"});
    ExperimentConfig c = ExperimentConfig::paper_scenario();
    if (j.contains("preset")) {
        const auto name = j.at("preset").get<std::string>();
        if (name == "smoke") {
            c = ExperimentConfig::smoke();
        } else if (name != "paper") {
            throw InvalidInput("config.preset: unknown preset '" + name + "' (expected paper or smoke)");
        }
    }
    if (j.contains("seed")) c.set_seed(j.at("seed").get<std::uint64_t>());
    if (j.contains("simulation")) apply_simulation(j.at("simulation"), c.sim);
    if (j.contains("fit")) apply_fit(j.at("fit"), c.fit);
    if (j.contains("grid")) apply_grid(j.at("grid"), c.fit.grid);
    if (j.contains("optimizer")) apply_optimizer(j.at("optimizer"), c.fit.optimizer);
    if (j.contains("query")) {
        const auto& q = j.at("query");
        check_keys(q, "query", {"s", "a"});
        if (q.contains("s")) c.s_star = vector_from_json(q.at("s"));
        if (q.contains("a")) c.a_star = vector_from_json(q.at("a"));
    }
    if (j.contains("mc")) {
        const auto& m = j.at("mc");
        check_keys(m, "mc", {"n_trajectories", "horizon"});
        read_if(m, "n_trajectories", c.mc.n_trajectories, "mc");
        read_if(m, "horizon", c.mc.horizon, "mc");
    }
    if (j.contains("eval")) {
        const auto& e = j.at("eval");
        check_keys(e, "eval", {"points_per_dim", "padding", "slice_points"});
        read_if(e, "points_per_dim", c.eval.points_per_dim, "eval");
        read_if(e, "padding", c.eval.padding, "eval");
        read_if(e, "slice_points", c.eval.slice_points, "eval");
    }
    if (j.contains("split")) {
        const auto& s = j.at("split");
        check_keys(s, "split", {"train", "val", "test"});
        read_if(s, "train", c.split.train, "split");
        read_if(s, "val", c.split.val, "split");
        read_if(s, "test", c.split.test, "split");
    }
    read_if(j, "replicates", c.replicates, "config");
    if (j.contains("sweep")) {
        const auto& s = j.at("sweep");
        check_keys(s, "sweep", {"kernels", "lambda_reg", "lambda_fp"});
        if (s.contains("kernels")) {
            const auto& k = s.at("kernels");
            c.sweep.kernels.clear();
            if (k.is_string()) {
                detail::require(k.get<std::string>() == "presets", "sweep.kernels: string form must be \"presets\"");
                c.sweep.kernels = kernel_presets();
            } else {
                detail::require(k.is_array(), "sweep.kernels: expected an array or \"presets\"");
                for (const auto& e : k) c.sweep.kernels.push_back(kernel_from_json(e, "sweep.kernels"));
            }
        }
        if (s.contains("lambda_reg")) c.sweep.lambda_reg = doubles(s.at("lambda_reg"), "sweep.lambda_reg");
        if (s.contains("lambda_fp")) c.sweep.lambda_fp = doubles(s.at("lambda_fp"), "sweep.lambda_fp");
    }
    c.validate();
    return c;
}

json config_to_json(const ExperimentConfig& c) {
    json kernels = json::array();
    for (const auto& k : c.sweep.kernels) kernels.push_back(params_to_json(k));
    json sim = {{"dynamics", dynamics_to_json(c.sim.dynamics)},
                {"behavior", policy_to_json(c.sim.behavior)},
                {"target", policy_to_json(c.sim.target)},
                {"n_trajectories", c.sim.n_trajectories},
                {"horizon", c.sim.horizon}};
    if (c.sim.init.mean.size()) sim["init_mean"] = vector_to_json(c.sim.init.mean);
    if (c.sim.init.cov.size()) sim["init_cov"] = matrix_to_json(c.sim.init.cov);
    const auto& o = c.fit.optimizer;
    const auto& g = c.fit.grid;
    return {
        {"seed", c.seed},
        {"simulation", sim},
        {"fit",
         {{"k_z", params_to_json(c.fit.k_z)},
          {"k_x", params_to_json(c.fit.k_x)},
          {"lambda_reg", c.fit.lambda_reg},
          {"discount", c.fit.discount},
          {"lambda_ulsif", c.fit.lambda_ulsif}}},
        {"grid",
         {{"k", g.k},
          {"expansion", g.expansion},
          {"source", to_string(g.source)},
          {"bootstrap_samples", g.bootstrap_samples},
          {"bootstrap_horizon", g.bootstrap_horizon},
          {"max_iter", g.max_iter}}},
        {"optimizer",
         {{"steps", o.steps},
          {"learning_rate", o.learning_rate},
          {"beta1", o.beta1},
          {"beta2", o.beta2},
          {"epsilon", o.epsilon_adam},
          {"weight_decay", o.weight_decay},
          {"lambda_fp", o.lambda_fp},
          {"lambda_mass", o.lambda_mass},
          {"tol", o.tol},
          {"keep_best", o.keep_best}}},
        {"query", {{"s", vector_to_json(c.s_star)}, {"a", vector_to_json(c.a_star)}}},
        {"mc", {{"n_trajectories", c.mc.n_trajectories}, {"horizon", c.mc.horizon}}},
        {"eval",
         {{"points_per_dim", c.eval.points_per_dim},
          {"padding", c.eval.padding},
          {"slice_points", c.eval.slice_points}}},
        {"split", {{"train", c.split.train}, {"val", c.split.val}, {"test", c.split.test}}},
        {"replicates", c.replicates},
        {"sweep", {{"kernels", kernels}, {"lambda_reg", c.sweep.lambda_reg}, {"lambda_fp", c.sweep.lambda_fp}}},
    };
}

ExperimentConfig load_config(const std::string& path) { return config_from_json(read_json_file(path)); }

}  // namespace kedrl
