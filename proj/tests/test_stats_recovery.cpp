#include <doctest.h>

#include <cmath>

#include <Eigen/LU>

#include "helpers.hpp"
#include "kedrl/errors.hpp"
#include "kedrl/stats_recovery.hpp"

using namespace kedrl;

namespace {

ReturnGrid grid_of(const Eigen::MatrixXd& atoms) {
    ReturnGrid g;
    g.atoms = atoms;
    g.k_clusters = static_cast<int>(atoms.rows());
    return g;
}

double phi(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

}  // namespace

TEST_SUITE("stats_recovery") {

TEST_CASE("constant test function recovers the mass") {
    std::mt19937_64 rng(1);
    const auto grid = grid_of(testutil::normal_matrix(7, 2, rng));
    TestFunction one;
    one.kind = TestFunctionKind::custom;
    one.custom_fn = [](const Eigen::VectorXd&) { return 1.0; };
    CHECK(recover(Eigen::VectorXd::Constant(7, 1.0 / 7), grid, one) == doctest::Approx(1.0).epsilon(1e-15));
}

TEST_CASE("smooth CDF at a single atom") {
    Eigen::MatrixXd atoms(3, 1);
    atoms << -1.0, 0.4, 2.0;
    const auto grid = grid_of(atoms);
    TestFunction g;
    g.kind = TestFunctionKind::smooth_cdf;
    g.threshold = Eigen::VectorXd::Constant(1, 0.7);
    g.bandwidth = 0.3;
    for (int j = 0; j < 3; ++j)
        CHECK(recover(Eigen::VectorXd::Unit(3, j), grid, g) == doctest::Approx(phi((0.7 - atoms(j, 0)) / 0.3)).epsilon(1e-14));

    const auto c = smooth_cdf_curve(Eigen::VectorXd::Ones(1), grid_of(Eigen::MatrixXd::Zero(1, 1)), {0.0}, 1.0);
    CHECK(c.raw[0] == doctest::Approx(0.5).epsilon(1e-15));
}

TEST_CASE("recover is linear in omega and g") {
    std::mt19937_64 rng(2);
    const auto grid = grid_of(testutil::normal_matrix(6, 3, rng));
    const Eigen::VectorXd a = testutil::normal_vector(6, rng);
    const Eigen::VectorXd b = testutil::normal_vector(6, rng);
    TestFunction g;
    g.kind = TestFunctionKind::tanh_utility;
    g.direction = Eigen::Vector3d(0.3, -0.2, 0.5);
    CHECK(recover(2 * a + b, grid, g) == doctest::Approx(2 * recover(a, grid, g) + recover(b, grid, g)).epsilon(1e-13));

    TestFunction f;
    f.kind = TestFunctionKind::sigmoid_utility;
    f.direction = g.direction;
    TestFunction sum;
    sum.kind = TestFunctionKind::custom;
    sum.custom_fn = [&](const Eigen::VectorXd& z) { return g(z) + 3 * f(z); };
    CHECK(recover(a, grid, sum) == doctest::Approx(recover(a, grid, g) + 3 * recover(a, grid, f)).epsilon(1e-13));
}

TEST_CASE("smooth CDF curve limits and clipping") {
    std::mt19937_64 rng(3);
    Eigen::MatrixXd atoms = testutil::normal_matrix(8, 2, rng);
    const auto grid = grid_of(atoms);
    Eigen::VectorXd w = testutil::normal_vector(8, rng, 0.3);
    w(0) += 1.0;
    std::vector<double> t;
    for (double x = -40; x <= 40; x += 0.5) t.push_back(x);
    const auto c = smooth_cdf_curve(w, grid, t, 0.5);
    CHECK(std::abs(c.raw.front()) < 1e-12);
    CHECK(c.raw.back() == doctest::Approx(w.sum()).epsilon(1e-12));
    for (std::size_t i = 0; i < t.size(); ++i) {
        CHECK(c.clipped[i] >= 0.0);
        CHECK(c.clipped[i] <= 1.0);
        if (i) CHECK(c.clipped[i] >= c.clipped[i - 1]);
    }

    const Eigen::VectorXd pos = w.cwiseAbs();
    const auto p = smooth_cdf_curve(pos, grid, t, 0.5, 1);
    for (double v : p.raw) {
        CHECK(v >= 0.0);
        CHECK(v <= pos.sum() * (1 + 1e-12));
    }
}

TEST_CASE("tail sigmoid limits") {
    Eigen::MatrixXd atoms(2, 1);
    atoms << 0.0, 1.0;
    const auto grid = grid_of(atoms);
    const Eigen::Vector2d w(0.4, 0.5);
    TestFunction g;
    g.kind = TestFunctionKind::tail_sigmoid;
    g.bandwidth = 0.1;
    g.threshold = Eigen::VectorXd::Constant(1, -100.0);
    CHECK(recover(w, grid, g) < 1e-12);
    g.threshold(0) = 100.0;
    CHECK(recover(w, grid, g) == doctest::Approx(0.9).epsilon(1e-12));
}

TEST_CASE("Tikhonov proxy") {
    std::mt19937_64 rng(4);
    const Eigen::MatrixXd A = testutil::normal_matrix(3, 3, rng);
    const Eigen::MatrixXd K = A * A.transpose() + 0.1 * Eigen::MatrixXd::Identity(3, 3);
    const Eigen::VectorXd g = testutil::normal_vector(3, rng);
    CHECK(tikhonov_proxy(Eigen::VectorXd::Zero(3), K, 0.1).isZero(0.0));
    const Eigen::VectorXd ref = (K + 3 * 0.1 * Eigen::MatrixXd::Identity(3, 3)).fullPivLu().solve(g);
    CHECK((tikhonov_proxy(g, K, 0.1) - ref).cwiseAbs().maxCoeff() < 1e-12);
    double prev = std::numeric_limits<double>::infinity();
    for (double lam : {1e-4, 1e-2, 1.0, 1e2, 1e8}) {
        const double nrm = tikhonov_proxy(g, K, lam).norm();
        CHECK(nrm <= prev);
        prev = nrm;
    }
    CHECK(prev < 1e-7);
    const Eigen::VectorXd w = testutil::normal_vector(3, rng);
    CHECK(tikhonov_expectation(ref, K, w) == doctest::Approx(ref.dot(K * w)).epsilon(1e-14));
}

TEST_CASE("clip and renormalize") {
    const Eigen::Vector3d w(0.5, -0.2, 1.5);
    const Eigen::VectorXd c = clip_renormalize(w);
    CHECK(c(1) == 0.0);
    CHECK(c.sum() == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(c(2) == doctest::Approx(0.75).epsilon(1e-15));
    CHECK(clip_renormalize(Eigen::Vector3d(-1, -2, 0)).isZero(0.0));
}

TEST_CASE("test functions from json") {
    std::mt19937_64 rng(5);
    const auto grid = grid_of(testutil::normal_matrix(10, 3, rng));
    const MaternParams kz{6.5, 2.0, 0.36};
    const Eigen::VectorXd w = Eigen::VectorXd::Constant(10, 0.1);
    for (const char* kind : {"kernel_density", "smooth_cdf", "tail_sigmoid", "tanh_utility", "sigmoid_utility",
                             "smoothed_moment", "spectral_cvar"}) {
        nlohmann::json spec = {{"kind", kind}};
        if (std::string(kind) == "kernel_density") spec["t"] = {0.0, 0.0, 0.0};
        else if (std::string(kind) == "smooth_cdf" || std::string(kind) == "tail_sigmoid") spec["t"] = 0.0;
        const auto g = test_function_from_json(spec, grid, kz, w);
        CHECK(std::isfinite(recover(w, grid, g)));
    }
    for (const char* bad : {"mean", "variance", "indicator", "quantile", "no_such_statistic"})
        CHECK_THROWS_AS(test_function_from_json({{"kind", bad}}, grid, kz, w), InvalidInput);
    CHECK_FALSE(unsupported_statistic_rationale("variance").empty());

    const auto kd = test_function_from_json({{"kind", "kernel_density"}, {"t", {0.1, 0.2, 0.3}}}, grid, kz);
    const Eigen::Vector3d z(0.0, -0.5, 1.0);
    CHECK(kd(z) == doctest::Approx(matern_eval((z - Eigen::Vector3d(0.1, 0.2, 0.3)).norm(), kz)).epsilon(1e-14));
}

TEST_CASE("smooth quantiles and spectral CVaR") {
    Eigen::MatrixXd atoms(2, 1);
    atoms << 0.0, 10.0;
    const auto grid = grid_of(atoms);
    const Eigen::Vector2d w(0.5, 0.5);
    const auto q = smooth_quantiles(w, grid, Eigen::VectorXd::Ones(1), 0.1, {0.25, 0.5, 0.75});
    CHECK(q[0] == doctest::Approx(0.0).scale(1.0).epsilon(0.2));
    CHECK(q[1] > 0.5);
    CHECK(q[1] < 9.5);
    CHECK(q[2] == doctest::Approx(10.0).epsilon(0.02));

    const auto nodes = spectral_nodes();
    REQUIRE(nodes.size() == 64);
    CHECK(nodes.front() == doctest::Approx(0.5 / 64));
    CHECK(nodes.back() == doctest::Approx(63.5 / 64));
}

}  // TEST_SUITE
