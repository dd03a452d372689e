#include "kedrl/pipeline.hpp"

#include <chrono>
#include <cmath>
#include <random>

#include "kedrl/cme.hpp"
#include "kedrl/errors.hpp"

namespace kedrl {
namespace {

// Re-raises a component error with the stage name in front, keeping its category.
template <class F>
auto staged(const char* stage, std::vector<StageTiming>& timings, F&& body) {
    const auto start = std::chrono::steady_clock::now();
    auto finish = [&] {
        timings.push_back(
            {stage, std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count()});
    };
    const std::string prefix = std::string("[") + stage + "] ";
    try {
        if constexpr (std::is_void_v<decltype(body())>) {
            body();
            finish();
        } else {
            auto out = body();
            finish();
            return out;
        }
    } catch (const InvalidInput& e) {
        throw InvalidInput(prefix + e.what());
    } catch (const DomainError& e) {
        throw DomainError(prefix + e.what());
    } catch (const NumericalError& e) {
        throw NumericalError(prefix + e.what());
    } catch (const IoError& e) {
        throw IoError(prefix + e.what());
    }
}

}  // namespace

GridSource grid_source_from_string(const std::string& name) {
    if (name == "reward_bootstrap") return GridSource::reward_bootstrap;
    if (name == "observed_returns") return GridSource::observed_returns;
    throw InvalidInput("unknown grid source '" + name + "' (expected reward_bootstrap or observed_returns)");
}

std::string to_string(GridSource source) {
    return source == GridSource::reward_bootstrap ? "reward_bootstrap" : "observed_returns";
}

void GridConfig::validate() const {
    detail::require(k >= 1, "grid: k must be >= 1");
    detail::require(std::isfinite(expansion) && expansion >= 1.0, "grid: expansion factor must be >= 1");
    detail::require(bootstrap_samples >= 1, "grid: bootstrap_samples must be >= 1");
    detail::require(bootstrap_horizon >= 0, "grid: bootstrap_horizon must be >= 0");
    detail::require(max_iter >= 1, "grid: max_iter must be >= 1");
}

void FitConfig::validate() const {
    k_z.validate();
    k_x.validate();
    detail::require(std::isfinite(lambda_reg) && lambda_reg > 0.0, "fit: lambda_reg must be > 0");
    detail::require(std::isfinite(discount) && discount >= 0.0 && discount < 1.0, "fit: discount must lie in [0, 1)");
    detail::require(std::isfinite(lambda_ulsif) && lambda_ulsif > 0.0, "fit: lambda_ulsif must be > 0");
    grid.validate();
    optimizer.validate();
}

Eigen::MatrixXd grid_samples(const TransitionDataset& train, const GridConfig& cfg, double discount,
                             std::uint64_t seed) {
    if (cfg.source == GridSource::observed_returns) {
        detail::require(train.has_returns(), "grid_samples: observed_returns needs returns attached to the dataset");
        return train.returns;
    }
    const auto n = train.size();
    detail::require(n >= 1, "grid_samples: empty dataset");
    int horizon = cfg.bootstrap_horizon;
    if (horizon == 0) {
        horizon = discount == 0.0 ? 1 : static_cast<int>(std::ceil(std::log(1e-6) / std::log(discount)));
    }
    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<Eigen::Index> pick(0, n - 1);
    Eigen::MatrixXd out = Eigen::MatrixXd::Zero(cfg.bootstrap_samples, train.reward_dim());
    for (int i = 0; i < cfg.bootstrap_samples; ++i) {
        double w = 1.0;
        for (int h = 0; h < horizon; ++h) {
            out.row(i) += w * train.rewards.row(pick(rng));
            w *= discount;
        }
    }
    return out;
}

FitResult fit_kedrl(const TransitionDataset& train, const PolicySpec& target, const Eigen::VectorXd& query,
                    const FitConfig& cfg) {
    FitResult res;
    auto& tm = res.timings;
    staged("validate", tm, [&] {
        cfg.validate();
        train.validate();
        detail::require(train.size() >= 1, "training set is empty");
        detail::require(query.size() == train.inputs().cols(), "query has dimension " + std::to_string(query.size()) +
                                                                   ", expected " +
                                                                   std::to_string(train.inputs().cols()));
        target.validate(train.state_dim());
        detail::require(train.action_dim() == 1, "target policies emit scalar actions; dataset has q = " +
                                                     std::to_string(train.action_dim()));
    });

    const Eigen::MatrixXd x = train.inputs();
    const Eigen::MatrixXd x_next = train.next_inputs();

    const auto gram_x = staged("gram", tm, [&] { return gram(x, cfg.k_x); });
    const auto gram_next = staged("gram_next", tm, [&] { return gram(x_next, cfg.k_x); });

    res.ops.k_vec = kernel_vector(x, query, cfg.k_x);
    res.ops.gamma_vec = staged("ridge", tm, [&] { return ridge_weights(gram_x, res.ops.k_vec, cfg.lambda_reg, query); });

    res.ratio = staged("ulsif", tm, [&] {
        Eigen::MatrixXd x_pi = x_next;
        x_pi.rightCols(1) = sample_actions(target, train.next_states, cfg.seed ^ 0x7a26e7ULL);
        return fit_ulsif(x_next, x_pi, cfg.k_x, cfg.lambda_ulsif);
    });
    res.ops.Phi = staged("phi", tm, [&] { return compute_Phi(gram_next, res.ops.gamma_vec, res.ratio.alpha); });

    const ReturnGrid grid = staged("grid", tm, [&] {
        const auto samples = grid_samples(train, cfg.grid, cfg.discount, cfg.seed + 1);
        detail::require(samples.rows() >= cfg.grid.k, "grid: k = " + std::to_string(cfg.grid.k) + " exceeds the " +
                                                          std::to_string(samples.rows()) + " return samples");
        return build_grid(samples, cfg.grid.k, cfg.grid.expansion, cfg.seed + 2, cfg.grid.max_iter);
    });
    res.K_Z = gram(grid.atoms, cfg.k_z);
    res.ops.H = staged("H", tm, [&] { return compute_H(res.ops.gamma_vec, grid, train.rewards, cfg.discount, cfg.k_z); });
    res.ops.G = staged("G", tm, [&] { return compute_G(res.ops.gamma_vec, grid, train.rewards, cfg.discount, cfg.k_z); });

    const ObjectiveTerms terms{res.ops.k_vec, res.ops.Phi, res.K_Z, res.ops.H, res.ops.G};
    auto opt = staged("optimize", tm, [&] {
        const auto B0 = initial_coefficients(train.size(), grid.size(), cfg.optimizer.seed);
        return optimize(B0, terms, cfg.optimizer);
    });

    res.model.coefficients = std::move(opt.B);
    res.model.grid = grid;
    res.model.k_z = cfg.k_z;
    res.model.k_x = cfg.k_x;
    res.model.lambda_reg = cfg.lambda_reg;
    res.model.gamma_discount = cfg.discount;
    res.model.training_inputs = x;
    res.model.query = query;
    res.trace = std::move(opt.trace);
    return res;
}

}  // namespace kedrl
