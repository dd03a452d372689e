#include <doctest.h>

#include <algorithm>
#include <filesystem>
#include <set>

#include <Eigen/LU>

#include "helpers.hpp"
#include "kedrl/errors.hpp"
#include "kedrl/return_grid.hpp"

using namespace kedrl;

namespace {

// By Caratheodory, a point of R^3 lies in the hull of a set iff it lies in a tetrahedron
// (or lower simplex) spanned by members of that set. Brute force over all 4-subsets;
// degenerate tetrahedra are skipped, which is safe for points in general position.
bool in_hull_of_others(const Eigen::MatrixXd& pts, int self) {
    const int n = static_cast<int>(pts.rows());
    const Eigen::Vector3d x = pts.row(self).transpose();
    for (int a = 0; a < n; ++a) {
        if (a == self) continue;
        for (int b = a + 1; b < n; ++b) {
            if (b == self) continue;
            for (int c = b + 1; c < n; ++c) {
                if (c == self) continue;
                for (int d = c + 1; d < n; ++d) {
                    if (d == self) continue;
                    Eigen::Matrix3d M;
                    M.col(0) = (pts.row(b) - pts.row(a)).transpose();
                    M.col(1) = (pts.row(c) - pts.row(a)).transpose();
                    M.col(2) = (pts.row(d) - pts.row(a)).transpose();
                    if (std::abs(M.determinant()) < 1e-14) continue;
                    const Eigen::Vector3d l = M.partialPivLu().solve(x - pts.row(a).transpose());
                    if ((l.array() >= -1e-12).all() && l.sum() <= 1.0 + 1e-12) return true;
                }
            }
        }
    }
    return false;
}

std::set<int> as_set(const std::vector<int>& v) { return {v.begin(), v.end()}; }

}  // namespace

TEST_SUITE("return_grid") {

TEST_CASE("kmeans trivial cases") {
    std::mt19937_64 rng(1);
    const Eigen::MatrixXd x = testutil::normal_matrix(6, 2, rng);
    const auto all = kmeans(x, 6, 3);
    CHECK(all.wcss < 1e-24);
    for (int i = 0; i < 6; ++i) {
        double best = 1e300;
        for (int j = 0; j < 6; ++j) best = std::min(best, (all.centroids.row(j) - x.row(i)).norm());
        CHECK(best < 1e-12);
    }
    const auto one = kmeans(x, 1, 3);
    CHECK((one.centroids.row(0) - x.colwise().mean()).norm() < 1e-12);
    CHECK_THROWS_AS(kmeans(x, 7, 3), InvalidInput);
    CHECK_THROWS_AS(kmeans(x, 0, 3), InvalidInput);
}

TEST_CASE("kmeans separates two blobs") {
    std::mt19937_64 rng(2);
    Eigen::MatrixXd x = testutil::normal_matrix(200, 2, rng, 0.1);
    x.topRows(100).array() += 5.0;
    x.bottomRows(100).array() -= 5.0;
    const auto r = kmeans(x, 2, 9);
    const Eigen::Vector2d hi(5, 5), lo(-5, -5);
    for (int j = 0; j < 2; ++j) {
        const Eigen::Vector2d c = r.centroids.row(j).transpose();
        CHECK(std::min((c - hi).norm(), (c - lo).norm()) < 0.1);
    }
    CHECK((r.centroids.row(0) - r.centroids.row(1)).norm() > 10.0);
}

TEST_CASE("kmeans is deterministic and Lloyd never increases WCSS") {
    std::mt19937_64 rng(3);
    const Eigen::MatrixXd x = testutil::normal_matrix(300, 3, rng);
    const auto a = kmeans(x, 10, 42);
    const auto b = kmeans(x, 10, 42);
    CHECK(a.centroids == b.centroids);
    CHECK(a.labels == b.labels);
    for (std::size_t i = 1; i < a.wcss_trace.size(); ++i) CHECK(a.wcss_trace[i] <= a.wcss_trace[i - 1] * (1 + 1e-12));
}

TEST_CASE("hull small cases") {
    Eigen::MatrixXd line(3, 1);
    line << 2, 1, 3;
    CHECK(as_set(convex_hull(line)) == std::set<int>{1, 2});

    Eigen::MatrixXd sq(5, 2);
    sq << 0, 0, 1, 0, 1, 1, 0, 1, 0.5, 0.5;
    CHECK(as_set(convex_hull(sq)) == std::set<int>{0, 1, 2, 3});

    // Collinear points in 2-D fall back to extremes along the principal axis.
    Eigen::MatrixXd col(4, 2);
    col << 0, 0, 1, 1, 3, 3, 2, 2;
    CHECK(as_set(convex_hull(col)) == std::set<int>{0, 2});
}

TEST_CASE("2-D hull against the brute-force oracle") {
    std::mt19937_64 rng(4);
    for (int trial = 0; trial < 5; ++trial) {
        const Eigen::MatrixXd x = testutil::normal_matrix(40, 2, rng);
        std::set<int> oracle;
        // In 2-D a point is interior iff it lies in a triangle of three others.
        for (int i = 0; i < 40; ++i) {
            bool inside = false;
            for (int a = 0; a < 40 && !inside; ++a)
                for (int b = a + 1; b < 40 && !inside; ++b)
                    for (int c = b + 1; c < 40 && !inside; ++c) {
                        if (a == i || b == i || c == i) continue;
                        Eigen::Matrix2d M;
                        M.col(0) = (x.row(b) - x.row(a)).transpose();
                        M.col(1) = (x.row(c) - x.row(a)).transpose();
                        const Eigen::Vector2d l = M.partialPivLu().solve((x.row(i) - x.row(a)).transpose());
                        inside = (l.array() >= -1e-12).all() && l.sum() <= 1 + 1e-12;
                    }
            if (!inside) oracle.insert(i);
        }
        CHECK(as_set(convex_hull(x)) == oracle);
    }
}

TEST_CASE("3-D hull against the brute-force oracle") {
    std::mt19937_64 rng(5);
    Eigen::MatrixXd x(50, 3);
    for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = testutil::uniform(rng, -1, 1);
    std::set<int> oracle;
    for (int i = 0; i < 50; ++i)
        if (!in_hull_of_others(x, i)) oracle.insert(i);
    CHECK(as_set(convex_hull(x)) == oracle);
    CHECK(oracle.size() >= 8);
}

TEST_CASE("high-dimensional fallback uses axis extremes") {
    std::mt19937_64 rng(6);
    const Eigen::MatrixXd x = testutil::normal_matrix(30, 5, rng);
    std::set<int> expect;
    for (int c = 0; c < 5; ++c) {
        Eigen::Index lo, hi;
        x.col(c).minCoeff(&lo);
        x.col(c).maxCoeff(&hi);
        expect.insert(static_cast<int>(lo));
        expect.insert(static_cast<int>(hi));
    }
    CHECK(as_set(convex_hull(x)) == expect);
}

TEST_CASE("grid assembly") {
    Eigen::MatrixXd c(2, 1);
    c << 0, 10;
    const auto g = grid_from_centroids(c, 1.1);
    REQUIRE(g.size() == 4);
    CHECK(g.atoms(0, 0) == 0.0);
    CHECK(g.atoms(1, 0) == 10.0);
    CHECK(g.atoms(2, 0) == doctest::Approx(-0.5).epsilon(1e-15));
    CHECK(g.atoms(3, 0) == doctest::Approx(10.5).epsilon(1e-15));
    CHECK(g.k_clusters == 2);
    CHECK(g.hull_vertex_count == 2);

    const auto same = grid_from_centroids(c, 1.0);
    CHECK(same.size() == 2);
    CHECK(same.hull_vertex_count == 0);

    std::mt19937_64 rng(7);
    const Eigen::MatrixXd samples = testutil::normal_matrix(500, 3, rng);
    const auto grid = build_grid(samples, 20, 1.1, 8);
    CHECK(grid.size() == grid.k_clusters + grid.hull_vertex_count);
    CHECK(grid.atoms.allFinite());
    for (Eigen::Index i = 0; i < grid.size(); ++i)
        for (Eigen::Index j = i + 1; j < grid.size(); ++j) CHECK((grid.atoms.row(i) - grid.atoms.row(j)).norm() > 1e-12);
    const auto km = kmeans(samples, 20, 8);
    CHECK(grid.atoms.topRows(20) == km.centroids);
    CHECK((grid.atoms.colwise().minCoeff().array() <= km.centroids.colwise().minCoeff().array()).all());
    CHECK((grid.atoms.colwise().maxCoeff().array() >= km.centroids.colwise().maxCoeff().array()).all());

    const auto path = (std::filesystem::temp_directory_path() / "kedrl_test_grid.csv").string();
    write_grid_csv(path, grid);
    const auto back = read_grid_csv(path);
    CHECK(back.atoms == grid.atoms);
}

}  // TEST_SUITE
