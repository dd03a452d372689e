#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "helpers.hpp"
#include "kedrl/data.hpp"
#include "kedrl/errors.hpp"
#include "kedrl/sim_env.hpp"

using namespace kedrl;

namespace {

LinearDynamics noiseless() {
    auto d = LinearDynamics::paper_defaults();
    d.Sigma_s.setZero();
    d.Sigma_r.setZero();
    return d;
}

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

}  // namespace

TEST_SUITE("sim_env") {

TEST_CASE("paper dimensions") {
    const auto d = LinearDynamics::paper_defaults();
    CHECK(d.state_dim() == 5);
    CHECK(d.action_dim() == 1);
    CHECK(d.reward_dim() == 3);
    CHECK_NOTHROW(d.validate());
    CHECK(PolicySpec::paper(PolicyFamily::gaussian).theta_a.size() == 5);
    CHECK(policy_family_from_string("logistic") == PolicyFamily::logistic);
    CHECK(to_string(PolicyFamily::uniform) == "uniform");
    CHECK_THROWS_AS(policy_family_from_string("beta"), InvalidInput);
}

TEST_CASE("noiseless step is affine") {
    const auto d = noiseless();
    std::mt19937_64 rng(1);
    const auto [s0, r0] = step(d, Eigen::VectorXd::Zero(5), Eigen::VectorXd::Zero(1), rng);
    CHECK(s0 == d.b_s);
    CHECK(r0 == d.b_r);

    const auto [s1, r1] = step(d, Eigen::VectorXd::Zero(5), Eigen::VectorXd::Ones(1), rng);
    Eigen::VectorXd expect_s(5), expect_r(3);
    // The action is the last input coordinate, so its coefficients are the last row of W.
    expect_s << 0.1 - 0.1, -0.1 + 0.1, 0.05 - 0.2, 0.2 + 0.2, -0.15 + 0.15;
    expect_r << 0.5 + 0.2, -0.4 + 0.4, 0.3 - 0.25;
    CHECK((s1 - expect_s).cwiseAbs().maxCoeff() < 1e-15);
    CHECK((r1 - expect_r).cwiseAbs().maxCoeff() < 1e-15);
}

TEST_CASE("transition noise covariance") {
    const auto d = LinearDynamics::paper_defaults();
    const Stepper st(d);
    std::mt19937_64 rng(2);
    const Eigen::VectorXd s = testutil::normal_vector(5, rng);
    const Eigen::VectorXd a = Eigen::VectorXd::Constant(1, 0.3);
    Eigen::VectorXd in(6);
    in << s, a;
    const Eigen::VectorXd mean_s = d.b_s + d.W_s.transpose() * in;
    const Eigen::VectorXd mean_r = d.b_r + d.W_r.transpose() * in;
    const int N = 100000;
    Eigen::MatrixXd cs = Eigen::MatrixXd::Zero(5, 5), cr = Eigen::MatrixXd::Zero(3, 3);
    for (int i = 0; i < N; ++i) {
        const auto [sn, r] = st(s, a, rng);
        cs += (sn - mean_s) * (sn - mean_s).transpose();
        cr += (r - mean_r) * (r - mean_r).transpose();
    }
    cs /= N;
    cr /= N;
    CHECK((cs - d.Sigma_s).norm() <= 0.05 * d.Sigma_s.norm());
    CHECK((cr - d.Sigma_r).norm() <= 0.05 * d.Sigma_r.norm());
}

TEST_CASE("actions stay inside the unit interval") {
    std::mt19937_64 rng(3);
    for (auto fam : {PolicyFamily::gaussian, PolicyFamily::uniform, PolicyFamily::logistic}) {
        const auto pol = PolicySpec::paper(fam);
        for (int i = 0; i < 5000; ++i) {
            const Eigen::VectorXd s = testutil::normal_vector(5, rng, 3.0);
            const double a = sample_action(pol, s, rng);
            CHECK(a > 0.0);
            CHECK(a < 1.0);
        }
    }
}

TEST_CASE("degenerate uniform bounds apply the shift rule") {
    PolicySpec pol;
    pol.family = PolicyFamily::uniform;
    pol.theta_a = Eigen::VectorXd::Zero(2);
    pol.theta_b = Eigen::VectorXd::Zero(2);
    pol.noise = 0.0;
    std::mt19937_64 rng(4);
    for (int i = 0; i < 200; ++i) {
        const double a = sample_action(pol, Eigen::VectorXd::Zero(2), rng);
        CHECK(a >= 0.5);
        CHECK(a <= 0.5 + pol.uniform_shift);
    }
}

TEST_CASE("Gaussian policy matches the change-of-variables CDF") {
    auto pol = PolicySpec::paper(PolicyFamily::gaussian);
    pol.noise = 0.0;
    Eigen::VectorXd s(5);
    s << 0.3, -0.5, 0.2, 0.1, -0.4;
    const double mu = s.dot(pol.theta_a);
    const double sd = std::exp(s.dot(pol.theta_b));
    std::mt19937_64 rng(5);
    const int N = 100000;
    std::vector<double> a(N);
    for (auto& v : a) v = sample_action(pol, s, rng);
    std::sort(a.begin(), a.end());
    double ks = 0.0;
    for (int i = 0; i < N; ++i) {
        const double F = normal_cdf((std::log(a[i] / (1 - a[i])) - mu) / sd);
        ks = std::max({ks, std::abs(F - static_cast<double>(i) / N), std::abs(F - static_cast<double>(i + 1) / N)});
    }
    CHECK(ks < 0.01);
}

TEST_CASE("zero state gives a centred pre-sigmoid mean") {
    auto pol = PolicySpec::paper(PolicyFamily::gaussian);
    pol.noise = 0.0;
    std::mt19937_64 rng(6);
    double above = 0.0;
    const int N = 20000;
    for (int i = 0; i < N; ++i) above += sample_action(pol, Eigen::VectorXd::Zero(5), rng) > 0.5;
    CHECK(above / N == doctest::Approx(0.5).epsilon(0.03));
}

TEST_CASE("dataset generation") {
    const auto d = LinearDynamics::paper_defaults();
    const auto pol = PolicySpec::paper(PolicyFamily::uniform);
    const auto one = generate_dataset(d, pol, 1, 1, {}, 3);
    REQUIRE(one.size() == 1);
    CHECK(one[0].length() == 1);

    const auto a = generate_dataset(d, pol, 12, 3, {}, 9);
    const auto b = generate_dataset(d, pol, 12, 3, {}, 9);
    REQUIRE(a.size() == 12);
    for (int i = 0; i < 12; ++i) {
        CHECK(a[i].length() == 3);
        CHECK(a[i].states == b[i].states);
        CHECK(a[i].actions == b[i].actions);
        CHECK(a[i].rewards == b[i].rewards);
        CHECK(a[i].states.cols() == 5);
        CHECK(a[i].rewards.cols() == 3);
    }
    const auto c = generate_dataset(d, pol, 12, 3, {}, 10);
    CHECK(c[0].states != a[0].states);
    const auto ds = flatten(a);
    CHECK(ds.size() == 24);
}

TEST_CASE("Monte-Carlo reference") {
    const auto d = LinearDynamics::paper_defaults();
    const auto pol = PolicySpec::paper(PolicyFamily::gaussian);
    Eigen::VectorXd s(5);
    s << -1.294, -0.917, 0.219, 0.283, 1.466;
    const Eigen::VectorXd a = Eigen::VectorXd::Constant(1, 0.434);
    Eigen::VectorXd in(6);
    in << s, a;

    const auto nl = noiseless();
    auto det = pol;
    det.family = PolicyFamily::uniform;
    det.theta_a.setZero();
    det.theta_b.setZero();
    det.noise = 0.0;
    det.uniform_shift = 1e-300;
    const Eigen::MatrixXd same = mc_reference(nl, det, s, a, 20, 10, 0.9, 1);
    for (int i = 1; i < 20; ++i) CHECK((same.row(i) - same.row(0)).cwiseAbs().maxCoeff() < 1e-15);

    const Eigen::MatrixXd one_step = mc_reference(nl, pol, s, a, 5, 10, 0.0, 2);
    const Eigen::VectorXd r0 = nl.b_r + nl.W_r.transpose() * in;
    for (int i = 0; i < 5; ++i) CHECK((one_step.row(i).transpose() - r0).cwiseAbs().maxCoeff() < 1e-14);

    const Eigen::MatrixXd noisy = mc_reference(d, pol, s, a, 4000, 1, 0.9, 3);
    const Eigen::VectorXd mean = noisy.colwise().mean().transpose();
    for (int k = 0; k < 3; ++k) CHECK(std::abs(mean(k) - r0(k)) < 4 * std::sqrt(d.Sigma_r(k, k) / 4000));
    CHECK(mc_reference(d, pol, s, a, 50, 20, 0.9, 4) == mc_reference(d, pol, s, a, 50, 20, 0.9, 4));
}

TEST_CASE("stream generators differ and serialization round trips") {
    auto g1 = stream_rng(1, 0);
    auto g2 = stream_rng(1, 1);
    auto g3 = stream_rng(1, 0);
    const auto v1 = g1();
    CHECK(v1 != g2());
    CHECK(v1 == g3());

    const auto d = LinearDynamics::paper_defaults();
    const auto back = dynamics_from_json(nlohmann::json::parse(dynamics_to_json(d).dump()));
    CHECK(back.W_s == d.W_s);
    CHECK(back.Sigma_r == d.Sigma_r);
    const auto p = PolicySpec::paper(PolicyFamily::logistic);
    const auto pb = policy_from_json(nlohmann::json::parse(policy_to_json(p).dump()));
    CHECK(pb.family == p.family);
    CHECK(pb.theta_b == p.theta_b);
}

}  // TEST_SUITE
