#include "kedrl/return_grid.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

#include "kedrl/errors.hpp"
#include "kedrl/serialize.hpp"

namespace kedrl {
namespace {

constexpr double kRelTol = 1e-8;
constexpr double kDedupTol = 1e-12;

// Nearest-centroid assignment; ties go to the lower index. Returns WCSS.
double assign(const Eigen::MatrixXd& x, const Eigen::MatrixXd& c, std::vector<int>& labels,
              Eigen::VectorXd& sq_dist) {
    const Eigen::VectorXd cn = c.rowwise().squaredNorm();
    const Eigen::MatrixXd cross = x * c.transpose();  // n x k
    double wcss = 0.0;
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
        int best = 0;
        double best_d = std::numeric_limits<double>::infinity();
        for (Eigen::Index j = 0; j < c.rows(); ++j) {
            const double d = cn(j) - 2.0 * cross(i, j);
            if (d < best_d) {
                best_d = d;
                best = static_cast<int>(j);
            }
        }
        labels[i] = best;
        // Exact distance for the chosen centroid; the expanded form is only used to rank.
        sq_dist(i) = (x.row(i) - c.row(best)).squaredNorm();
        wcss += sq_dist(i);
    }
    return wcss;
}

Eigen::MatrixXd plusplus_seed(const Eigen::MatrixXd& x, int k, std::mt19937_64& rng) {
    const auto n = x.rows();
    Eigen::MatrixXd c(k, x.cols());
    std::vector<char> chosen(n, 0);
    std::uniform_int_distribution<Eigen::Index> pick(0, n - 1);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    Eigen::Index first = pick(rng);
    c.row(0) = x.row(first);
    chosen[first] = 1;
    Eigen::VectorXd d2 = (x.rowwise() - c.row(0)).rowwise().squaredNorm();
    for (int j = 1; j < k; ++j) {
        const double total = d2.sum();
        Eigen::Index idx = -1;
        if (total > 0.0) {
            const double target = unit(rng) * total;
            double acc = 0.0;
            for (Eigen::Index i = 0; i < n; ++i) {
                acc += d2(i);
                if (acc >= target && d2(i) > 0.0) {
                    idx = i;
                    break;
                }
            }
            if (idx < 0) {
                for (Eigen::Index i = n - 1; i >= 0; --i)
                    if (d2(i) > 0.0) {
                        idx = i;
                        break;
                    }
            }
        } else {
            // Every sample coincides with a chosen centroid; take an unused index.
            std::vector<Eigen::Index> free;
            for (Eigen::Index i = 0; i < n; ++i)
                if (!chosen[i]) free.push_back(i);
            idx = free[std::uniform_int_distribution<std::size_t>(0, free.size() - 1)(rng)];
        }
        c.row(j) = x.row(idx);
        chosen[idx] = 1;
        d2 = d2.cwiseMin((x.rowwise() - c.row(j)).rowwise().squaredNorm());
    }
    return c;
}

}  // namespace

KMeansResult kmeans(const Eigen::MatrixXd& samples, int k, std::uint64_t seed, int max_iter) {
    const auto n = samples.rows();
    if (k < 1 || k > n) {
        throw InvalidInput("kmeans: need 1 <= k <= n (k=" + std::to_string(k) + ", n=" + std::to_string(n) + ")");
    }
    detail::require(samples.allFinite(), "kmeans: samples must be finite");
    detail::require(max_iter >= 1, "kmeans: max_iter must be >= 1");

    std::mt19937_64 rng(seed);
    KMeansResult res;
    res.centroids = plusplus_seed(samples, k, rng);
    res.labels.assign(n, 0);
    Eigen::VectorXd sq(n);
    double wcss = assign(samples, res.centroids, res.labels, sq);
    res.wcss_trace.push_back(wcss);

    for (int it = 1; it <= max_iter; ++it) {
        Eigen::MatrixXd sums = Eigen::MatrixXd::Zero(k, samples.cols());
        std::vector<Eigen::Index> counts(k, 0);
        for (Eigen::Index i = 0; i < n; ++i) {
            sums.row(res.labels[i]) += samples.row(i);
            ++counts[res.labels[i]];
        }
        for (int j = 0; j < k; ++j) {
            if (counts[j] > 0) {
                res.centroids.row(j) = sums.row(j) / static_cast<double>(counts[j]);
                continue;
            }
            Eigen::Index far = 0;
            sq.maxCoeff(&far);
            res.centroids.row(j) = samples.row(far);
            sq(far) = 0.0;
        }
        const double next = assign(samples, res.centroids, res.labels, sq);
        res.wcss_trace.push_back(next);
        res.iterations = it;
        const double change = std::abs(wcss - next) / std::max(wcss, std::numeric_limits<double>::min());
        wcss = next;
        if (wcss == 0.0 || change < kRelTol) break;
    }
    res.wcss = wcss;
    return res;
}

ReturnGrid grid_from_centroids(const Eigen::MatrixXd& centroids, double expansion_factor) {
    detail::require(centroids.rows() >= 1, "build_grid: no centroids");
    detail::require(std::isfinite(expansion_factor) && expansion_factor >= 1.0,
                    "build_grid: expansion_factor must be >= 1");
    const Eigen::RowVectorXd mu = centroids.colwise().mean();
    const auto hull = convex_hull(centroids);

    Eigen::MatrixXd all(centroids.rows() + static_cast<Eigen::Index>(hull.size()), centroids.cols());
    all.topRows(centroids.rows()) = centroids;
    for (std::size_t h = 0; h < hull.size(); ++h) {
        all.row(centroids.rows() + h) = mu + expansion_factor * (centroids.row(hull[h]) - mu);
    }
    std::vector<Eigen::Index> keep;
    for (Eigen::Index i = 0; i < all.rows(); ++i) {
        bool dup = false;
        for (auto j : keep) {
            if ((all.row(i) - all.row(j)).norm() <= kDedupTol) {
                dup = true;
                break;
            }
        }
        if (!dup) keep.push_back(i);
    }
    ReturnGrid g;
    g.atoms.resize(static_cast<Eigen::Index>(keep.size()), centroids.cols());
    for (std::size_t i = 0; i < keep.size(); ++i) g.atoms.row(i) = all.row(keep[i]);
    const auto kept_centroids = std::count_if(keep.begin(), keep.end(), [&](Eigen::Index i) { return i < centroids.rows(); });
    g.k_clusters = static_cast<int>(kept_centroids);
    g.expansion_factor = expansion_factor;
    g.hull_vertex_count = static_cast<int>(keep.size()) - g.k_clusters;
    return g;
}

ReturnGrid build_grid(const Eigen::MatrixXd& samples, int k, double expansion_factor, std::uint64_t seed,
                      int max_iter) {
    const auto km = kmeans(samples, k, seed, max_iter);
    auto g = grid_from_centroids(km.centroids, expansion_factor);
    g.source_count = static_cast<int>(samples.rows());
    return g;
}

void write_grid_csv(const std::string& path, const ReturnGrid& grid) {
    std::string header;
    for (Eigen::Index c = 0; c < grid.dim(); ++c) header += (c ? ",z_" : "z_") + std::to_string(c);
    write_matrix_csv(path, grid.atoms, header);
}

ReturnGrid read_grid_csv(const std::string& path) {
    ReturnGrid g;
    g.atoms = read_matrix_csv(path);
    detail::require(g.atoms.rows() > 0, path + ": empty grid");
    g.k_clusters = static_cast<int>(g.atoms.rows());
    return g;
}

}  // namespace kedrl
