#include "kedrl/bellman.hpp"

#include <filesystem>
#include <vector>

#include "kedrl/errors.hpp"
#include "kedrl/parallel.hpp"
#include "kedrl/serialize.hpp"

namespace kedrl {
namespace {

void check_operator_shapes(const RidgeWeights& gv, const ReturnGrid& grid, const Eigen::MatrixXd& rewards,
                           double discount, const char* who) {
    const std::string w = who;
    detail::require(gv.gamma.size() == rewards.rows(), w + ": Gamma length must equal reward count");
    detail::require(grid.size() >= 1, w + ": empty grid");
    detail::require(rewards.rows() == 0 || rewards.cols() == grid.dim(), w + ": reward and atom dimensions differ");
    detail::require(std::isfinite(discount) && discount >= 0.0 && discount < 1.0, w + ": discount must lie in [0, 1)");
}

}  // namespace

void EmbeddingModel::validate() const {
    detail::require(coefficients.allFinite(), "EmbeddingModel: coefficients must be finite");
    detail::require(coefficients.cols() == grid.size(), "EmbeddingModel: B columns must equal atom count");
    detail::require(coefficients.rows() == training_inputs.rows(),
                    "EmbeddingModel: B rows must equal training input count");
    k_z.validate();
    k_x.validate();
}

Eigen::MatrixXd compute_H(const RidgeWeights& gamma_vec, const ReturnGrid& grid, const Eigen::MatrixXd& rewards,
                          double discount, const MaternParams& k_z) {
    check_operator_shapes(gamma_vec, grid, rewards, discount, "compute_H");
    const auto m = grid.size();
    Eigen::MatrixXd H(m, m);
    const KernelSum sum(gamma_vec.gamma, rewards, k_z);
    parallel_for(static_cast<std::size_t>(m), [&](std::size_t i) {
        for (Eigen::Index j = 0; j < m; ++j) {
            const Eigen::VectorXd u = (grid.atoms.row(i) - discount * grid.atoms.row(j)).transpose();
            H(i, j) = sum(u);
        }
    });
    return H;
}

Eigen::MatrixXd compute_G(const RidgeWeights& gamma_vec, const ReturnGrid& grid, const Eigen::MatrixXd& rewards,
                          double discount, const MaternParams& k_z) {
    check_operator_shapes(gamma_vec, grid, rewards, discount, "compute_G");
    const auto m = grid.size();
    const auto n = rewards.rows();
    const Eigen::VectorXd& g = gamma_vec.gamma;
    const KernelSum sum(g, rewards, k_z);

    // F(delta) = sum_l Gamma_l sum_l' Gamma_l' k(|delta + r_l - r_l'|)
    auto F = [&](const Eigen::VectorXd& delta) {
        double acc = 0.0;
        for (Eigen::Index l = 0; l < n; ++l) {
            if (g(l) == 0.0) continue;
            acc += g(l) * sum(Eigen::VectorXd(delta + rewards.row(l).transpose()));
        }
        return acc;
    };

    std::vector<std::pair<Eigen::Index, Eigen::Index>> pairs;
    pairs.reserve(static_cast<std::size_t>(m * (m - 1) / 2));
    for (Eigen::Index j = 1; j < m; ++j)
        for (Eigen::Index i = 0; i < j; ++i) pairs.emplace_back(i, j);

    Eigen::MatrixXd G(m, m);
    const double diag = F(Eigen::VectorXd::Zero(grid.dim()));
    G.diagonal().setConstant(diag);
    parallel_for(pairs.size(), [&](std::size_t t) {
        const auto [i, j] = pairs[t];
        const Eigen::VectorXd delta = (discount * (grid.atoms.row(i) - grid.atoms.row(j))).transpose();
        G(i, j) = F(delta);
    });
    for (const auto& [i, j] : pairs) G(j, i) = G(i, j);
    return G;
}

Eigen::VectorXd compute_Phi(const Eigen::MatrixXd& gram_next, const RidgeWeights& gamma_vec,
                            const Eigen::VectorXd& alpha) {
    const auto n = gram_next.rows();
    detail::require(gram_next.cols() == n, "compute_Phi: gram must be square");
    detail::require(gamma_vec.gamma.size() == n && alpha.size() == n, "compute_Phi: length mismatch");
    const Eigen::VectorXd eta = gram_next * alpha;
    return gram_next * gamma_vec.gamma.cwiseProduct(eta);
}

Eigen::VectorXd omega(const EmbeddingModel& model, const Eigen::VectorXd& query) {
    detail::require(query.size() == model.training_inputs.cols(), "omega: query has dimension " +
                                                                       std::to_string(query.size()) + ", expected " +
                                                                       std::to_string(model.training_inputs.cols()));
    detail::require(model.coefficients.rows() == model.training_inputs.rows(), "omega: model shape mismatch");
    return model.coefficients.transpose() * kernel_vector(model.training_inputs, query, model.k_x);
}

double gamma_sq(const Eigen::VectorXd& w, const Eigen::VectorXd& wp, const Eigen::MatrixXd& K_Z,
                const Eigen::MatrixXd& H, const Eigen::MatrixXd& G) {
    const auto m = w.size();
    detail::require(wp.size() == m && K_Z.rows() == m && K_Z.cols() == m && H.rows() == m && H.cols() == m &&
                        G.rows() == m && G.cols() == m,
                    "gamma_sq: shape mismatch");
    return w.dot(K_Z * w) - 2.0 * w.dot(H * wp) + wp.dot(G * wp);
}

Eigen::VectorXd target_embedding_eval(const Eigen::VectorXd& omega_pi_v, const ReturnGrid& grid,
                                      const RidgeWeights& gamma_vec, const Eigen::MatrixXd& rewards,
                                      double discount, const Eigen::MatrixXd& test_points,
                                      const MaternParams& k_z) {
    check_operator_shapes(gamma_vec, grid, rewards, discount, "target_embedding_eval");
    detail::require(omega_pi_v.size() == grid.size(), "target_embedding_eval: omega_pi length must equal m");
    detail::require(test_points.rows() == 0 || test_points.cols() == grid.dim(),
                    "target_embedding_eval: test point dimension mismatch");
    const KernelSum sum(gamma_vec.gamma, rewards, k_z);
    Eigen::VectorXd out = Eigen::VectorXd::Zero(test_points.rows());
    for (Eigen::Index t = 0; t < test_points.rows(); ++t) {
        double acc = 0.0;
        for (Eigen::Index i = 0; i < grid.size(); ++i) {
            if (omega_pi_v(i) == 0.0) continue;
            // k(discount z_i + r_l, z) = k(|r_l - (z - discount z_i)|)
            const Eigen::VectorXd u = (test_points.row(t) - discount * grid.atoms.row(i)).transpose();
            acc += omega_pi_v(i) * sum(u);
        }
        out(t) = acc;
    }
    return out;
}

void save_model(const std::string& dir, const EmbeddingModel& model) {
    model.validate();
    namespace fs = std::filesystem;
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw IoError("cannot create " + dir + ": " + ec.message());
    const fs::path root(dir);
    write_matrix_csv((root / "B.csv").string(), model.coefficients);
    write_grid_csv((root / "grid.csv").string(), model.grid);
    write_matrix_csv((root / "inputs.csv").string(), model.training_inputs);
    nlohmann::json j = {
        {"format", "kedrl-embedding-model"},
        {"version", 1},
        {"n", model.coefficients.rows()},
        {"m", model.coefficients.cols()},
        {"k_z", params_to_json(model.k_z)},
        {"k_x", params_to_json(model.k_x)},
        {"lambda_reg", model.lambda_reg},
        {"gamma_discount", model.gamma_discount},
        {"query", vector_to_json(model.query)},
        {"grid", {{"k_clusters", model.grid.k_clusters},
                  {"expansion_factor", model.grid.expansion_factor},
                  {"source_count", model.grid.source_count},
                  {"hull_vertex_count", model.grid.hull_vertex_count}}},
        {"files", {{"coefficients", "B.csv"}, {"grid", "grid.csv"}, {"training_inputs", "inputs.csv"}}},
    };
    write_json_file((root / "model.json").string(), j);
}

EmbeddingModel load_model(const std::string& dir) {
    namespace fs = std::filesystem;
    const fs::path root(dir);
    const auto j = read_json_file((root / "model.json").string());
    if (j.value("format", std::string{}) != "kedrl-embedding-model") {
        throw InvalidInput(dir + ": not a model directory (model.json format tag missing)");
    }
    EmbeddingModel m;
    const auto& files = j.at("files");
    m.coefficients = read_matrix_csv((root / files.at("coefficients").get<std::string>()).string());
    m.grid = read_grid_csv((root / files.at("grid").get<std::string>()).string());
    m.training_inputs = read_matrix_csv((root / files.at("training_inputs").get<std::string>()).string());
    m.k_z = params_from_json(j.at("k_z"));
    m.k_x = params_from_json(j.at("k_x"));
    m.lambda_reg = j.at("lambda_reg").get<double>();
    m.gamma_discount = j.at("gamma_discount").get<double>();
    m.query = vector_from_json(j.at("query"));
    const auto& gm = j.at("grid");
    m.grid.k_clusters = gm.at("k_clusters").get<int>();
    m.grid.expansion_factor = gm.at("expansion_factor").get<double>();
    m.grid.source_count = gm.at("source_count").get<int>();
    m.grid.hull_vertex_count = gm.at("hull_vertex_count").get<int>();
    m.validate();
    return m;
}

}  // namespace kedrl
