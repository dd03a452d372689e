#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Core>

namespace kedrl {

struct KMeansResult {
    Eigen::MatrixXd centroids;      // k x d
    std::vector<int> labels;        // per sample
    double wcss = 0.0;
    int iterations = 0;
    std::vector<double> wcss_trace;  // after each Lloyd iteration
};

/// k-means++ seeding then Lloyd iterations. Stops after max_iter or when the relative WCSS
/// change drops below 1e-8. An emptied cluster is reseeded at the sample farthest from its centroid.
KMeansResult kmeans(const Eigen::MatrixXd& samples, int k, std::uint64_t seed, int max_iter = 300);

/// Row indices of the extreme points. Exact for d <= 3 (Quickhull); for d > 3, and for
/// rank-deficient sets, the extremes along each axis (principal axes when degenerate).
std::vector<int> convex_hull(const Eigen::MatrixXd& points);

struct ReturnGrid {
    Eigen::MatrixXd atoms;  // m x d
    int k_clusters = 0;
    double expansion_factor = 1.0;
    int source_count = 0;
    int hull_vertex_count = 0;

    Eigen::Index size() const { return atoms.rows(); }
    Eigen::Index dim() const { return atoms.cols(); }
};

/// Atoms are the centroids followed by hull vertices pushed away from the centroid mean by
/// `expansion_factor`; rows within 1e-12 of an earlier row are dropped.
ReturnGrid build_grid(const Eigen::MatrixXd& samples, int k, double expansion_factor, std::uint64_t seed,
                      int max_iter = 300);

/// Assembles a grid from given centroids (no clustering).
ReturnGrid grid_from_centroids(const Eigen::MatrixXd& centroids, double expansion_factor);

void write_grid_csv(const std::string& path, const ReturnGrid& grid);
ReturnGrid read_grid_csv(const std::string& path);

}  // namespace kedrl
