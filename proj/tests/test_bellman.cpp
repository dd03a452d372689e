#include <doctest.h>

#include <filesystem>

#include <Eigen/Eigenvalues>

#include "helpers.hpp"
#include "kedrl/bellman.hpp"
#include "kedrl/errors.hpp"

using namespace kedrl;
using testutil::kref;

namespace {

struct Instance {
    RidgeWeights gw;
    ReturnGrid grid;
    Eigen::MatrixXd rewards;
    MaternParams kz;
    double discount;
};

Instance random_instance(std::mt19937_64& rng, int n, int m, int d) {
    Instance s;
    s.gw.gamma = testutil::normal_vector(n, rng, 0.5);
    s.gw.lambda_reg = 1e-3;
    s.grid.atoms = testutil::normal_matrix(m, d, rng, 2.0);
    s.rewards = testutil::normal_matrix(n, d, rng);
    s.kz = {testutil::uniform(rng, 0.0, 1.0) < 0.5 ? 2.5 : 1.7, testutil::uniform(rng, 0.5, 2.0),
            testutil::uniform(rng, 0.3, 1.2)};
    s.discount = testutil::uniform(rng, 0.0, 0.99);
    return s;
}

Eigen::MatrixXd naive_H(const Instance& s) {
    const auto m = s.grid.size();
    Eigen::MatrixXd H = Eigen::MatrixXd::Zero(m, m);
    for (int i = 0; i < m; ++i)
        for (int j = 0; j < m; ++j)
            for (int l = 0; l < s.rewards.rows(); ++l) {
                const Eigen::VectorXd u = s.grid.atoms.row(i).transpose() - s.discount * s.grid.atoms.row(j).transpose();
                H(i, j) += s.gw.gamma(l) * kref(s.rewards.row(l).transpose(), u, s.kz);
            }
    return H;
}

Eigen::MatrixXd naive_G(const Instance& s) {
    const auto m = s.grid.size();
    const auto n = s.rewards.rows();
    Eigen::MatrixXd G = Eigen::MatrixXd::Zero(m, m);
    for (int i = 0; i < m; ++i)
        for (int j = 0; j < m; ++j)
            for (int l = 0; l < n; ++l)
                for (int lp = 0; lp < n; ++lp) {
                    const Eigen::VectorXd a = s.discount * s.grid.atoms.row(i).transpose() + s.rewards.row(l).transpose();
                    const Eigen::VectorXd b = s.discount * s.grid.atoms.row(j).transpose() + s.rewards.row(lp).transpose();
                    G(i, j) += s.gw.gamma(l) * s.gw.gamma(lp) * kref(a, b, s.kz);
                }
    return G;
}

}  // namespace

TEST_SUITE("bellman") {

TEST_CASE("H and G match naive loops") {
    std::mt19937_64 rng(1);
    for (int t = 0; t < 20; ++t) {
        const auto s = random_instance(rng, 1 + t % 6, 1 + t % 4, 1 + t % 3);
        const Eigen::MatrixXd H = compute_H(s.gw, s.grid, s.rewards, s.discount, s.kz);
        const Eigen::MatrixXd G = compute_G(s.gw, s.grid, s.rewards, s.discount, s.kz);
        CHECK((H - naive_H(s)).cwiseAbs().maxCoeff() <= 1e-12);
        CHECK((G - naive_G(s)).cwiseAbs().maxCoeff() <= 1e-12);
        CHECK((G - G.transpose()).cwiseAbs().maxCoeff() == 0.0);
    }
}

TEST_CASE("H and G special cases") {
    std::mt19937_64 rng(2);
    auto s = random_instance(rng, 4, 3, 2);
    s.gw.gamma.setZero();
    CHECK(compute_H(s.gw, s.grid, s.rewards, s.discount, s.kz).isZero(0.0));
    CHECK(compute_G(s.gw, s.grid, s.rewards, s.discount, s.kz).isZero(0.0));

    auto one = random_instance(rng, 1, 3, 2);
    one.gw.gamma(0) = 1.0;
    const Eigen::MatrixXd H0 = compute_H(one.gw, one.grid, one.rewards, 0.0, one.kz);
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j)
            CHECK(H0(i, j) == doctest::Approx(kref(one.rewards.row(0).transpose(), one.grid.atoms.row(i).transpose(), one.kz)).epsilon(1e-13));

    auto zero = random_instance(rng, 5, 4, 2);
    const Eigen::MatrixXd G0 = compute_G(zero.gw, zero.grid, zero.rewards, 0.0, zero.kz);
    CHECK((G0.array() - G0(0, 0)).abs().maxCoeff() <= 1e-14 * std::max(1.0, std::abs(G0(0, 0))));
}

TEST_CASE("G is positive semidefinite") {
    std::mt19937_64 rng(3);
    for (int t = 0; t < 20; ++t) {
        const auto s = random_instance(rng, 10, 8, 3);
        const Eigen::MatrixXd G = compute_G(s.gw, s.grid, s.rewards, s.discount, s.kz);
        const double lo = Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(G).eigenvalues().minCoeff();
        CHECK(lo >= -1e-8 * 8 * s.kz.variance);
    }
}

TEST_CASE("Phi") {
    std::mt19937_64 rng(4);
    const MaternParams p{6.5, 2.0, 0.36};
    const Eigen::MatrixXd x = testutil::normal_matrix(4, 3, rng);
    const Eigen::MatrixXd K = gram(x, p);
    RidgeWeights gw;
    gw.gamma = testutil::normal_vector(4, rng);
    const Eigen::VectorXd alpha = testutil::normal_vector(4, rng);
    Eigen::VectorXd ref = Eigen::VectorXd::Zero(4);
    for (int j = 0; j < 4; ++j) ref += gw.gamma(j) * K.col(j) * K.col(j).dot(alpha);
    CHECK((compute_Phi(K, gw, alpha) - ref).cwiseAbs().maxCoeff() <= 1e-12);
    CHECK(compute_Phi(K, gw, Eigen::VectorXd::Zero(4)).isZero(0.0));
    gw.gamma.setOnes();
    CHECK(compute_Phi(Eigen::MatrixXd::Identity(4, 4), gw, alpha) == alpha);
    CHECK_THROWS_AS(compute_Phi(K, gw, Eigen::VectorXd::Zero(3)), InvalidInput);
}

TEST_CASE("gamma_sq") {
    std::mt19937_64 rng(5);
    const int m = 4;
    const Eigen::MatrixXd A = testutil::normal_matrix(m, m, rng);
    const Eigen::MatrixXd Kz = A * A.transpose();
    const Eigen::MatrixXd H = testutil::normal_matrix(m, m, rng);
    const Eigen::MatrixXd G = testutil::normal_matrix(m, m, rng);
    const Eigen::VectorXd w = testutil::normal_vector(m, rng);
    const Eigen::VectorXd wp = testutil::normal_vector(m, rng);
    double ref = 0.0;
    for (int i = 0; i < m; ++i)
        for (int j = 0; j < m; ++j) ref += w(i) * Kz(i, j) * w(j) - 2 * w(i) * H(i, j) * wp(j) + wp(i) * G(i, j) * wp(j);
    CHECK(std::abs(gamma_sq(w, wp, Kz, H, G) - ref) <= 1e-12);
    CHECK(gamma_sq(Eigen::VectorXd::Zero(m), Eigen::VectorXd::Zero(m), Kz, H, G) == 0.0);
    CHECK(std::abs(gamma_sq(w, w, Kz, Kz, Kz)) <= 1e-12);
}

TEST_CASE("gamma_sq is a squared RKHS norm when built from one instance") {
    std::mt19937_64 rng(6);
    for (int t = 0; t < 10; ++t) {
        auto s = random_instance(rng, 6, 5, 2);
        s.gw.gamma = s.gw.gamma.cwiseAbs();
        const Eigen::MatrixXd Kz = gram(s.grid.atoms, s.kz);
        const Eigen::MatrixXd H = compute_H(s.gw, s.grid, s.rewards, s.discount, s.kz);
        const Eigen::MatrixXd G = compute_G(s.gw, s.grid, s.rewards, s.discount, s.kz);
        const Eigen::VectorXd w = testutil::normal_vector(5, rng);
        const Eigen::VectorXd wp = testutil::normal_vector(5, rng);
        CHECK(gamma_sq(w, wp, Kz, H, G) >= -1e-10);
    }
}

TEST_CASE("target embedding") {
    std::mt19937_64 rng(7);
    for (int t = 0; t < 5; ++t) {
        const auto s = random_instance(rng, 5, 4, 2);
        const Eigen::VectorXd wp = testutil::normal_vector(4, rng);
        const Eigen::MatrixXd pts = testutil::normal_matrix(6, 2, rng);
        const Eigen::VectorXd got = target_embedding_eval(wp, s.grid, s.gw, s.rewards, s.discount, pts, s.kz);
        for (int q = 0; q < 6; ++q) {
            double ref = 0.0;
            for (int i = 0; i < 4; ++i)
                for (int l = 0; l < 5; ++l)
                    ref += wp(i) * s.gw.gamma(l) *
                           kref(s.discount * s.grid.atoms.row(i).transpose() + s.rewards.row(l).transpose(),
                                pts.row(q).transpose(), s.kz);
            CHECK(std::abs(got(q) - ref) <= 1e-12);
        }
        CHECK(target_embedding_eval(Eigen::VectorXd::Zero(4), s.grid, s.gw, s.rewards, s.discount, pts, s.kz).isZero(0.0));
    }
}

TEST_CASE("omega and model round trip") {
    std::mt19937_64 rng(8);
    EmbeddingModel model;
    model.k_x = {6.5, 2.0, 0.36};
    model.k_z = {6.5, 2.0, 0.36};
    model.training_inputs = testutil::normal_matrix(7, 3, rng);
    model.grid.atoms = testutil::normal_matrix(4, 2, rng);
    model.grid.k_clusters = 4;
    model.coefficients = testutil::normal_matrix(7, 4, rng);
    model.query = testutil::normal_vector(3, rng);

    const Eigen::VectorXd q = model.training_inputs.row(2).transpose();
    const Eigen::VectorXd k = kernel_vector(model.training_inputs, q, model.k_x);
    CHECK((omega(model, q) - model.coefficients.transpose() * k).cwiseAbs().maxCoeff() <= 1e-14);

    EmbeddingModel flat = model;
    flat.coefficients.setConstant(1.0 / 7.0);
    CHECK((omega(flat, q).array() - k.mean()).abs().maxCoeff() <= 1e-15);
    flat.coefficients.setZero();
    CHECK(omega(flat, q).isZero(0.0));
    CHECK_THROWS_AS(omega(model, Eigen::VectorXd::Zero(2)), InvalidInput);

    const auto dir = (std::filesystem::temp_directory_path() / "kedrl_test_model").string();
    save_model(dir, model);
    const auto back = load_model(dir);
    CHECK(back.coefficients == model.coefficients);
    CHECK(back.grid.atoms == model.grid.atoms);
    CHECK(back.training_inputs == model.training_inputs);
    CHECK(back.query == model.query);
    CHECK(back.k_x.nu == 6.5);
    CHECK(omega(back, q) == omega(model, q));
}

}  // TEST_SUITE
