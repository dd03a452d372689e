#include <doctest.h>

#include <cstring>

#include "helpers.hpp"
#include "kedrl/bellman.hpp"
#include "kedrl/errors.hpp"
#include "kedrl/optimizer.hpp"

using namespace kedrl;

namespace {

ObjectiveTerms random_terms(std::mt19937_64& rng, int n, int m) {
    ObjectiveTerms t;
    t.k_vec = testutil::normal_vector(n, rng);
    t.Phi = testutil::normal_vector(n, rng);
    const Eigen::MatrixXd A = testutil::normal_matrix(m, m, rng);
    t.K_Z = A * A.transpose();
    t.H = testutil::normal_matrix(m, m, rng);
    const Eigen::MatrixXd C = testutil::normal_matrix(m, m, rng);
    t.G = C * C.transpose();
    return t;
}

double scalar_loss(const Eigen::MatrixXd& B, const ObjectiveTerms& t, double lfp, double lmass) {
    const auto n = B.rows();
    const auto m = B.cols();
    std::vector<double> w(m, 0.0), wp(m, 0.0);
    for (int i = 0; i < m; ++i)
        for (int l = 0; l < n; ++l) {
            w[i] += B(l, i) * t.k_vec(l);
            wp[i] += B(l, i) * t.Phi(l);
        }
    double g = 0.0, fp = 0.0, mass = -1.0;
    for (int i = 0; i < m; ++i) {
        for (int j = 0; j < m; ++j) g += w[i] * t.K_Z(i, j) * w[j] - 2 * w[i] * t.H(i, j) * wp[j] + wp[i] * t.G(i, j) * wp[j];
        fp += (w[i] - wp[i]) * (w[i] - wp[i]);
        mass += w[i];
    }
    return g + lfp * fp + lmass * mass * mass;
}

}  // namespace

TEST_SUITE("optimizer") {

TEST_CASE("loss special cases") {
    std::mt19937_64 rng(1);
    const auto t = random_terms(rng, 5, 3);
    OptimizerConfig cfg;
    const Eigen::MatrixXd zero = Eigen::MatrixXd::Zero(5, 3);
    CHECK(loss(zero, t, cfg) == cfg.lambda_mass);
    cfg.lambda_mass = 0.0;
    cfg.lambda_fp = 0.0;
    CHECK(loss(zero, t, cfg) == 0.0);
}

TEST_CASE("loss matches a scalar recomputation") {
    std::mt19937_64 rng(2);
    for (int trial = 0; trial < 10; ++trial) {
        const auto t = random_terms(rng, 2 + trial % 5, 1 + trial % 4);
        const Eigen::MatrixXd B = testutil::normal_matrix(t.k_vec.size(), t.K_Z.rows(), rng);
        OptimizerConfig cfg;
        const double ref = scalar_loss(B, t, cfg.lambda_fp, cfg.lambda_mass);
        CHECK(std::abs(loss(B, t, cfg) - ref) <= 1e-10 * std::max(1.0, std::abs(ref)));
    }
}

TEST_CASE("gradient at zero and with zero inputs") {
    std::mt19937_64 rng(3);
    const auto t = random_terms(rng, 4, 3);
    OptimizerConfig cfg;
    const Eigen::MatrixXd g = loss_gradient(Eigen::MatrixXd::Zero(4, 3), t, cfg);
    const Eigen::MatrixXd expect = -2.0 * cfg.lambda_mass * t.k_vec * Eigen::RowVectorXd::Ones(3);
    CHECK((g - expect).cwiseAbs().maxCoeff() == 0.0);

    ObjectiveTerms z;
    z.k_vec = Eigen::VectorXd::Zero(4);
    z.Phi = Eigen::VectorXd::Zero(4);
    z.K_Z = z.H = z.G = Eigen::MatrixXd::Zero(3, 3);
    CHECK(loss_gradient(testutil::normal_matrix(4, 3, rng), z, cfg).isZero(0.0));
}

TEST_CASE("gradient matches central differences") {
    std::mt19937_64 rng(4);
    for (int trial = 0; trial < 20; ++trial) {
        const int n = 1 + trial % 10;
        const int m = 1 + trial % 6;
        const auto t = random_terms(rng, n, m);
        OptimizerConfig cfg;
        const Eigen::MatrixXd B = testutil::normal_matrix(n, m, rng, 0.3);
        const Eigen::MatrixXd g = loss_gradient(B, t, cfg);
        const double h = 1e-6;
        const double floor = 1e-3 * g.cwiseAbs().maxCoeff();
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < m; ++j) {
                Eigen::MatrixXd bp = B, bm = B;
                bp(i, j) += h;
                bm(i, j) -= h;
                const double fd = (loss(bp, t, cfg) - loss(bm, t, cfg)) / (2 * h);
                CHECK(std::abs(g(i, j) - fd) / std::max(std::abs(g(i, j)), floor) <= 1e-5);
            }
    }
}

TEST_CASE("fixed-point penalty vanishes when B^T k = B^T Phi") {
    std::mt19937_64 rng(5);
    auto t = random_terms(rng, 4, 3);
    t.Phi = t.k_vec;
    OptimizerConfig cfg;
    cfg.lambda_mass = 0.0;
    const Eigen::MatrixXd B = testutil::normal_matrix(4, 3, rng);
    CHECK(loss_parts(B, t, cfg).fp_residual == 0.0);
    OptimizerConfig no_fp = cfg;
    no_fp.lambda_fp = 0.0;
    CHECK(loss_gradient(B, t, cfg) == loss_gradient(B, t, no_fp));
}

TEST_CASE("zero gradient leaves only decay") {
    ObjectiveTerms z;
    z.k_vec = Eigen::VectorXd::Zero(3);
    z.Phi = Eigen::VectorXd::Zero(3);
    z.K_Z = z.H = z.G = Eigen::MatrixXd::Zero(2, 2);
    OptimizerConfig cfg;
    cfg.steps = 5;
    cfg.lambda_fp = cfg.lambda_mass = 0.0;
    cfg.keep_best = false;
    const Eigen::MatrixXd B0 = initial_coefficients(3, 2, 1);
    const auto r = optimize(B0, z, cfg);
    const double shrink = std::pow(1.0 - cfg.learning_rate * cfg.weight_decay, 5);
    CHECK((r.B - shrink * B0).cwiseAbs().maxCoeff() <= 1e-16);
    CHECK(r.trace.records.size() == 5);
}

TEST_CASE("convex instance decreases monotonically") {
    std::mt19937_64 rng(6);
    ObjectiveTerms t;
    const int n = 6, m = 4;
    t.k_vec = testutil::normal_vector(n, rng).cwiseAbs();
    t.Phi = 0.5 * t.k_vec + 0.1 * testutil::normal_vector(n, rng);
    t.K_Z = Eigen::MatrixXd::Identity(m, m);
    t.H = 0.5 * Eigen::MatrixXd::Identity(m, m);
    t.G = Eigen::MatrixXd::Identity(m, m);
    OptimizerConfig cfg;
    cfg.lambda_fp = 1000.0;
    cfg.learning_rate = 1e-3;
    cfg.steps = 1000;
    cfg.keep_best = false;
    const auto r = optimize(initial_coefficients(n, m, 2), t, cfg);
    const auto& rec = r.trace.records;
    for (std::size_t s = rec.size() / 10 + 1; s < rec.size(); ++s)
        CHECK(rec[s].objective <= rec[s - 1].objective * (1 + 1e-9) + 1e-12);
    CHECK(rec.back().objective < rec.front().objective);
}

TEST_CASE("initialization and determinism") {
    const Eigen::MatrixXd B = initial_coefficients(20, 7, 3);
    const double bound = 1.0 / std::sqrt(140.0);
    CHECK(B.cwiseAbs().maxCoeff() <= bound);
    CHECK(initial_coefficients(20, 7, 3) == B);
    CHECK(initial_coefficients(20, 7, 4) != B);

    std::mt19937_64 rng(7);
    const auto t = random_terms(rng, 8, 5);
    OptimizerConfig cfg;
    cfg.steps = 50;
    const auto a = optimize(B.topLeftCorner(8, 5), t, cfg);
    const auto b = optimize(B.topLeftCorner(8, 5), t, cfg);
    CHECK(std::memcmp(a.B.data(), b.B.data(), sizeof(double) * a.B.size()) == 0);
    REQUIRE(a.trace.records.size() == b.trace.records.size());
    for (std::size_t s = 0; s < a.trace.records.size(); ++s) CHECK(a.trace.records[s].objective == b.trace.records[s].objective);
}

TEST_CASE("keep_best returns the lowest visited objective") {
    std::mt19937_64 rng(8);
    const auto t = random_terms(rng, 6, 4);
    OptimizerConfig cfg;
    cfg.steps = 300;
    cfg.learning_rate = 0.2;
    const Eigen::MatrixXd B0 = initial_coefficients(6, 4, 9);
    const auto r = optimize(B0, t, cfg);
    double best = std::numeric_limits<double>::infinity();
    for (const auto& rec : r.trace.records) best = std::min(best, rec.objective);
    CHECK(loss(r.B, t, cfg) <= best);
    CHECK(r.trace.returned_step >= 1);
    CHECK(r.trace.returned_step <= cfg.steps + 1);

    cfg.keep_best = false;
    CHECK(optimize(B0, t, cfg).trace.returned_step == cfg.steps + 1);
}

TEST_CASE("validation") {
    OptimizerConfig cfg;
    cfg.steps = 0;
    CHECK_THROWS_AS(cfg.validate(), InvalidInput);
    cfg = {};
    cfg.learning_rate = -1;
    CHECK_THROWS_AS(cfg.validate(), InvalidInput);
    std::mt19937_64 rng(9);
    const auto t = random_terms(rng, 3, 2);
    CHECK_THROWS_AS(optimize(Eigen::MatrixXd::Zero(2, 2), t, OptimizerConfig{}), InvalidInput);
    CHECK_THROWS_AS(initial_coefficients(0, 2, 1), InvalidInput);
}

}  // TEST_SUITE
