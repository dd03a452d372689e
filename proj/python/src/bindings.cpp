// Python bindings. JSON crosses the boundary as strings; matrices as numpy arrays.

#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "kedrl/bellman.hpp"
#include "kedrl/cli.hpp"
#include "kedrl/cme.hpp"
#include "kedrl/config.hpp"
#include "kedrl/density_ratio.hpp"
#include "kedrl/errors.hpp"
#include "kedrl/evaluation.hpp"
#include "kedrl/kernel.hpp"
#include "kedrl/pipeline.hpp"
#include "kedrl/return_grid.hpp"
#include "kedrl/sim_env.hpp"
#include "kedrl/stats_recovery.hpp"

namespace py = pybind11;
using namespace kedrl;
using nlohmann::json;

namespace {

ExperimentConfig config_of(const std::string& text) {
    return text.empty() ? ExperimentConfig::paper_scenario() : config_from_json(json::parse(text));
}

ReturnGrid grid_of(const Eigen::MatrixXd& atoms) {
    ReturnGrid g;
    g.atoms = atoms;
    g.k_clusters = static_cast<int>(atoms.rows());
    return g;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "Kernel embedding of return distributions for off-policy evaluation";

    py::register_exception<InvalidInput>(m, "InvalidInput", PyExc_ValueError);
    py::register_exception<DomainError>(m, "DomainError", PyExc_ValueError);
    py::register_exception<NumericalError>(m, "NumericalError", PyExc_ArithmeticError);
    py::register_exception<IoError>(m, "IoError", PyExc_OSError);

    py::class_<MaternParams>(m, "Matern")
        .def(py::init([](double nu, double length_scale, double sigma) {
                 auto p = MaternParams::from_sigma(nu, length_scale, sigma);
                 p.validate();
                 return p;
             }),
             py::arg("nu"), py::arg("length_scale"), py::arg("sigma"))
        .def_readonly("nu", &MaternParams::nu)
        .def_readonly("length_scale", &MaternParams::length_scale)
        .def_readonly("variance", &MaternParams::variance)
        .def("__call__", [](const MaternParams& p, double d) { return matern_eval(d, p); })
        .def("lipschitz", [](const MaternParams& p) { return lipschitz_constant(p); })
        .def("__repr__", [](const MaternParams& p) {
            return "Matern(nu=" + std::to_string(p.nu) + ", length_scale=" + std::to_string(p.length_scale) +
                   ", sigma=" + std::to_string(p.sigma()) + ")";
        });

    m.def("gram", py::overload_cast<const Eigen::MatrixXd&, const MaternParams&>(&gram), py::arg("points"),
          py::arg("kernel"));
    m.def("gram_cross", py::overload_cast<const Eigen::MatrixXd&, const Eigen::MatrixXd&, const MaternParams&>(&gram),
          py::arg("a"), py::arg("b"), py::arg("kernel"));

    m.def(
        "ridge_weights",
        [](const Eigen::MatrixXd& K, const Eigen::VectorXd& k_vec, double lambda_reg) {
            return ridge_weights(K, k_vec, lambda_reg).gamma;
        },
        py::arg("K"), py::arg("k_vec"), py::arg("lambda_reg"));
    m.def("mmd_sq", &mmd_sq, py::arg("p"), py::arg("q"), py::arg("K"));
    m.def("mmd_sq_samples", &mmd_sq_samples, py::arg("x"), py::arg("y"), py::arg("kernel"));

    m.def(
        "density_ratio",
        [](const Eigen::MatrixXd& x_beta, const Eigen::MatrixXd& x_pi, const Eigen::MatrixXd& query,
           const MaternParams& kernel, double lambda_ulsif) {
            return Eigen::VectorXd(eval_ratio(fit_ulsif(x_beta, x_pi, kernel, lambda_ulsif), query));
        },
        py::arg("x_beta"), py::arg("x_pi"), py::arg("query"), py::arg("kernel"), py::arg("lambda_ulsif") = 1e-3);

    m.def(
        "build_grid",
        [](const Eigen::MatrixXd& samples, int k, double expansion, std::uint64_t seed) {
            return build_grid(samples, k, expansion, seed).atoms;
        },
        py::arg("samples"), py::arg("k"), py::arg("expansion") = 1.1, py::arg("seed") = 0);

    m.def(
        "bellman_operators",
        [](const Eigen::VectorXd& gamma, const Eigen::MatrixXd& atoms, const Eigen::MatrixXd& rewards, double discount,
           const MaternParams& k_z) {
            RidgeWeights w;
            w.gamma = gamma;
            const auto g = grid_of(atoms);
            return py::make_tuple(compute_H(w, g, rewards, discount, k_z), compute_G(w, g, rewards, discount, k_z));
        },
        py::arg("gamma"), py::arg("atoms"), py::arg("rewards"), py::arg("discount"), py::arg("k_z"));

    m.def(
        "default_config", [](const std::string& preset) {
            return config_to_json(preset == "smoke" ? ExperimentConfig::smoke() : ExperimentConfig::paper_scenario())
                .dump();
        },
        py::arg("preset") = "paper");

    m.def(
        "simulate",
        [](const std::string& config) {
            const auto cfg = config_of(config);
            const auto d = flatten_with_returns(generate_dataset(cfg.sim.dynamics, cfg.sim.behavior,
                                                                 cfg.sim.n_trajectories, cfg.sim.horizon, cfg.sim.init,
                                                                 cfg.seed),
                                                cfg.fit.discount);
            py::dict out;
            out["states"] = d.states;
            out["actions"] = d.actions;
            out["rewards"] = d.rewards;
            out["next_states"] = d.next_states;
            out["returns"] = d.returns;
            out["trajectory_ids"] = d.trajectory_ids;
            return out;
        },
        py::arg("config") = "");

    m.def(
        "mc_reference",
        [](const std::string& config) {
            const auto cfg = config_of(config);
            return scenario_reference(cfg).mc_samples;
        },
        py::arg("config") = "");

    m.def(
        "fit",
        [](const std::string& config) {
            const auto cfg = config_of(config);
            const auto trajs = generate_dataset(cfg.sim.dynamics, cfg.sim.behavior, cfg.sim.n_trajectories,
                                                cfg.sim.horizon, cfg.sim.init, cfg.seed);
            const auto res = fit_kedrl(flatten(trajs), cfg.sim.target, cfg.query(), cfg.fit);
            py::dict out;
            out["coefficients"] = res.model.coefficients;
            out["atoms"] = res.model.grid.atoms;
            out["omega"] = Eigen::VectorXd(omega(res.model, cfg.query()));
            out["final_objective"] = res.trace.records.empty() ? std::nan("") : res.trace.records.back().objective;
            return out;
        },
        py::arg("config") = "");

    m.def(
        "recover",
        [](const Eigen::VectorXd& omega_v, const Eigen::MatrixXd& atoms, const MaternParams& k_z,
           const std::string& spec) {
            const auto g = grid_of(atoms);
            return recover(omega_v, g, test_function_from_json(json::parse(spec), g, k_z, omega_v));
        },
        py::arg("omega"), py::arg("atoms"), py::arg("k_z"), py::arg("spec"));

    m.def(
        "smooth_cdf",
        [](const Eigen::VectorXd& omega_v, const Eigen::MatrixXd& atoms, const std::vector<double>& thresholds,
           double h, Eigen::Index coord) {
            const auto c = smooth_cdf_curve(omega_v, grid_of(atoms), thresholds, h, coord);
            return py::make_tuple(c.raw, c.clipped);
        },
        py::arg("omega"), py::arg("atoms"), py::arg("thresholds"), py::arg("h"), py::arg("coord") = 0);

    m.def(
        "replicate_study",
        [](const std::string& config, int replicates, std::uint64_t seed) {
            const auto cfg = config_of(config);
            py::gil_scoped_release release;
            return report_to_json(replicate_study(cfg, replicates, seed)).dump();
        },
        py::arg("config") = "", py::arg("replicates") = 1, py::arg("seed") = 0);

    m.def("run_cli", [](std::vector<std::string> args) {
        args.insert(args.begin(), "kedrl");
        std::vector<char*> argv;
        for (auto& a : args) argv.push_back(a.data());
        return run_cli(static_cast<int>(argv.size()), argv.data());
    });
}
