#include <doctest.h>

#include <algorithm>
#include <filesystem>
#include <set>

#include "helpers.hpp"
#include "kedrl/data.hpp"
#include "kedrl/errors.hpp"

using namespace kedrl;

namespace {

Trajectory make_traj(int T, std::mt19937_64& rng, int p = 2, int q = 1, int d = 3) {
    Trajectory t;
    t.states = testutil::normal_matrix(T, p, rng);
    t.actions = testutil::normal_matrix(T, q, rng);
    t.rewards = testutil::normal_matrix(T, d, rng);
    return t;
}

std::string temp_path(const std::string& name) {
    return (std::filesystem::temp_directory_path() / ("kedrl_test_" + name)).string();
}

}  // namespace

TEST_SUITE("data") {

TEST_CASE("flatten counts and links next states") {
    std::mt19937_64 rng(1);
    const auto one = make_traj(3, rng);
    const auto ds = flatten({one});
    CHECK(ds.size() == 2);
    CHECK(ds.next_states.row(0) == one.states.row(1));
    CHECK(ds.next_actions.row(1) == one.actions.row(2));
    CHECK(ds.rewards.row(1) == one.rewards.row(1));

    const auto two = flatten({make_traj(2, rng), make_traj(2, rng)});
    CHECK(two.size() == 2);
    CHECK(two.trajectory_ids[0] != two.trajectory_ids[1]);

    CHECK_THROWS_AS(flatten({}), InvalidInput);
    CHECK_THROWS_AS(flatten({make_traj(2, rng, 2), make_traj(2, rng, 3)}), InvalidInput);

    std::vector<Trajectory> many;
    int expected = 0;
    for (int T : {1, 4, 2, 7}) {
        many.push_back(make_traj(T, rng));
        expected += T - 1;
    }
    const auto big = flatten(many);
    CHECK(big.size() == expected);
    CHECK(std::is_sorted(big.trajectory_ids.begin(), big.trajectory_ids.end()));
}

TEST_CASE("discounted_return") {
    Trajectory t;
    t.states = Eigen::MatrixXd::Zero(1, 1);
    t.actions = Eigen::MatrixXd::Zero(1, 1);
    t.rewards = Eigen::RowVector3d(1, 2, 3);
    CHECK(discounted_return(t, 0, 0.9) == Eigen::Vector3d(1, 2, 3));

    Trajectory s;
    s.states = Eigen::MatrixXd::Zero(3, 1);
    s.actions = Eigen::MatrixXd::Zero(3, 1);
    s.rewards = Eigen::MatrixXd::Ones(3, 1);
    CHECK(discounted_return(s, 0, 0.5)(0) == 1.75);
    CHECK(discounted_return(s, 1, 0.0)(0) == 1.0);
    CHECK_THROWS_AS(discounted_return(s, 3, 0.5), InvalidInput);
    CHECK_THROWS_AS(discounted_return(s, -1, 0.5), InvalidInput);

    s.rewards.setZero();
    for (double g : {0.0, 0.3, 0.99}) CHECK(discounted_return(s, 0, g).isZero(0.0));

    std::mt19937_64 rng(4);
    const auto r = make_traj(6, rng);
    Eigen::VectorXd ref = Eigen::VectorXd::Zero(3);
    double w = 1.0;
    for (int k = 2; k < 6; ++k, w *= 0.9) ref += w * r.rewards.row(k).transpose();
    CHECK((discounted_return(r, 2, 0.9) - ref).cwiseAbs().maxCoeff() < 1e-14);
}

TEST_CASE("splits partition whole trajectories") {
    std::mt19937_64 rng(2);
    std::vector<Trajectory> trajs;
    for (int i = 0; i < 10; ++i) trajs.push_back(make_traj(3, rng));
    const auto ds = flatten(trajs);

    const auto labels = assign_splits(10, {0.8, 0.1, 0.1}, 7);
    CHECK(std::count(labels.begin(), labels.end(), 0) == 8);
    CHECK(std::count(labels.begin(), labels.end(), 1) == 1);
    CHECK(std::count(labels.begin(), labels.end(), 2) == 1);
    CHECK(assign_splits(10, {0.8, 0.1, 0.1}, 7) == labels);

    const auto parts = split_by_trajectory(ds, {0.8, 0.1, 0.1}, 7);
    CHECK(parts[0].size() + parts[1].size() + parts[2].size() == ds.size());
    std::set<int> seen;
    for (const auto& part : parts) {
        std::set<int> ids(part.trajectory_ids.begin(), part.trajectory_ids.end());
        for (int id : ids) CHECK(seen.insert(id).second);
    }
    CHECK(seen.size() == 10);

    const auto all = split_by_trajectory(ds, {1.0, 0.0, 0.0}, 3);
    CHECK(all[0].size() == ds.size());
    CHECK(all[1].size() == 0);

    CHECK_THROWS_AS(assign_splits(2, {0.5, 0.25, 0.25}, 1), InvalidInput);
    CHECK_THROWS_AS(assign_splits(10, {0.5, 0.2, 0.2}, 1), InvalidInput);
}

TEST_CASE("CSV and manifest round trip") {
    std::mt19937_64 rng(9);
    std::vector<Trajectory> trajs = {make_traj(3, rng), make_traj(1, rng), make_traj(4, rng)};
    const auto path = temp_path("traj.csv");
    write_trajectories_csv(path, trajs);
    const auto back = read_trajectories_csv(path);
    REQUIRE(back.size() == 3);
    for (int i = 0; i < 3; ++i) {
        CHECK(back[i].states == trajs[i].states);
        CHECK(back[i].actions == trajs[i].actions);
        CHECK(back[i].rewards == trajs[i].rewards);
    }

    DatasetManifest m{5, 1, 3, 0.9, 42, 3, "traj.csv"};
    const auto mpath = temp_path("manifest.json");
    write_manifest(mpath, m);
    const auto mb = read_manifest(mpath);
    CHECK(mb.state_dim == 5);
    CHECK(mb.seed == 42);
    CHECK(mb.gamma == 0.9);
    CHECK(mb.csv_file == "traj.csv");

    CHECK_THROWS_AS(read_trajectories_csv(temp_path("does_not_exist.csv")), IoError);
}

}  // TEST_SUITE
