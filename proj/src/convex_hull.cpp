#include <algorithm>
#include <cmath>
#include <set>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "kedrl/errors.hpp"
#include "kedrl/return_grid.hpp"

namespace kedrl {
namespace {

std::vector<int> unique_sorted(std::vector<int> v) {
    std::sort(v.begin(), v.end());
    v.erase(std::unique(v.begin(), v.end()), v.end());
    return v;
}

std::vector<int> axis_extremes(const Eigen::MatrixXd& pts) {
    std::vector<int> out;
    for (Eigen::Index c = 0; c < pts.cols(); ++c) {
        Eigen::Index lo = 0, hi = 0;
        pts.col(c).minCoeff(&lo);
        pts.col(c).maxCoeff(&hi);
        out.push_back(static_cast<int>(lo));
        out.push_back(static_cast<int>(hi));
    }
    return unique_sorted(out);
}

// Extremes along principal axes with nonzero spread; used for rank-deficient sets.
std::vector<int> principal_extremes(const Eigen::MatrixXd& pts, const Eigen::JacobiSVD<Eigen::MatrixXd>& svd,
                                    double tol) {
    const Eigen::MatrixXd proj = (pts.rowwise() - pts.colwise().mean()) * svd.matrixV();
    std::vector<int> out;
    for (Eigen::Index c = 0; c < proj.cols(); ++c) {
        if (svd.singularValues()(c) <= tol) continue;
        Eigen::Index lo = 0, hi = 0;
        proj.col(c).minCoeff(&lo);
        proj.col(c).maxCoeff(&hi);
        out.push_back(static_cast<int>(lo));
        out.push_back(static_cast<int>(hi));
    }
    if (out.empty()) out.push_back(0);
    return unique_sorted(out);
}

double cross2(const Eigen::Vector2d& o, const Eigen::Vector2d& a, const Eigen::Vector2d& b) {
    return (a.x() - o.x()) * (b.y() - o.y()) - (a.y() - o.y()) * (b.x() - o.x());
}

void quickhull2_rec(const std::vector<Eigen::Vector2d>& p, int a, int b, const std::vector<int>& set, double eps,
                    std::vector<int>& out) {
    if (set.empty()) return;
    int far = -1;
    double best = -1.0;
    for (int i : set) {
        const double d = cross2(p[a], p[b], p[i]);
        if (d > best) {
            best = d;
            far = i;
        }
    }
    std::vector<int> left_a, left_b;
    for (int i : set) {
        if (i == far) continue;
        if (cross2(p[a], p[far], p[i]) > eps) left_a.push_back(i);
        else if (cross2(p[far], p[b], p[i]) > eps) left_b.push_back(i);
    }
    quickhull2_rec(p, a, far, left_a, eps, out);
    out.push_back(far);
    quickhull2_rec(p, far, b, left_b, eps, out);
}

std::vector<int> quickhull2(const Eigen::MatrixXd& pts, double eps) {
    const int n = static_cast<int>(pts.rows());
    std::vector<Eigen::Vector2d> p(n);
    for (int i = 0; i < n; ++i) p[i] = pts.row(i).transpose();
    int lo = 0, hi = 0;
    for (int i = 1; i < n; ++i) {
        if (p[i].x() < p[lo].x() || (p[i].x() == p[lo].x() && p[i].y() < p[lo].y())) lo = i;
        if (p[i].x() > p[hi].x() || (p[i].x() == p[hi].x() && p[i].y() > p[hi].y())) hi = i;
    }
    std::vector<int> upper, lower;
    for (int i = 0; i < n; ++i) {
        if (i == lo || i == hi) continue;
        const double c = cross2(p[lo], p[hi], p[i]);
        if (c > eps) upper.push_back(i);
        else if (c < -eps) lower.push_back(i);
    }
    std::vector<int> out{lo};
    quickhull2_rec(p, lo, hi, upper, eps, out);
    out.push_back(hi);
    quickhull2_rec(p, hi, lo, lower, eps, out);
    return unique_sorted(out);
}

struct Face {
    int v[3];
    Eigen::Vector3d normal;
    double offset = 0.0;
    std::vector<int> outside;
    bool alive = true;

    double distance(const Eigen::Vector3d& x) const { return normal.dot(x) - offset; }
};

Face make_face(const std::vector<Eigen::Vector3d>& p, int a, int b, int c, const Eigen::Vector3d& interior) {
    Face f;
    f.v[0] = a;
    f.v[1] = b;
    f.v[2] = c;
    f.normal = (p[b] - p[a]).cross(p[c] - p[a]);
    const double len = f.normal.norm();
    if (len > 0.0) f.normal /= len;
    f.offset = f.normal.dot(p[a]);
    if (f.distance(interior) > 0.0) {
        std::swap(f.v[1], f.v[2]);
        f.normal = -f.normal;
        f.offset = -f.offset;
    }
    return f;
}

std::vector<int> quickhull3(const Eigen::MatrixXd& pts, double eps) {
    const int n = static_cast<int>(pts.rows());
    std::vector<Eigen::Vector3d> p(n);
    for (int i = 0; i < n; ++i) p[i] = pts.row(i).transpose();

    // Initial tetrahedron from the most separated axis extremes.
    const auto ext = axis_extremes(pts);
    int i0 = ext[0], i1 = ext[0];
    double best = -1.0;
    for (int a : ext)
        for (int b : ext)
            if ((p[a] - p[b]).squaredNorm() > best) {
                best = (p[a] - p[b]).squaredNorm();
                i0 = a;
                i1 = b;
            }
    const Eigen::Vector3d dir = (p[i1] - p[i0]).normalized();
    int i2 = -1;
    best = -1.0;
    for (int i = 0; i < n; ++i) {
        const double d = (p[i] - p[i0]).cross(dir).norm();
        if (d > best) {
            best = d;
            i2 = i;
        }
    }
    const Eigen::Vector3d nrm = (p[i1] - p[i0]).cross(p[i2] - p[i0]).normalized();
    int i3 = -1;
    best = -1.0;
    for (int i = 0; i < n; ++i) {
        const double d = std::abs(nrm.dot(p[i] - p[i0]));
        if (d > best) {
            best = d;
            i3 = i;
        }
    }
    const Eigen::Vector3d interior = (p[i0] + p[i1] + p[i2] + p[i3]) / 4.0;

    std::vector<Face> faces;
    faces.push_back(make_face(p, i0, i1, i2, interior));
    faces.push_back(make_face(p, i0, i1, i3, interior));
    faces.push_back(make_face(p, i0, i2, i3, interior));
    faces.push_back(make_face(p, i1, i2, i3, interior));

    auto place = [&](int pt, std::size_t from) {
        for (std::size_t f = from; f < faces.size(); ++f) {
            if (faces[f].alive && faces[f].distance(p[pt]) > eps) {
                faces[f].outside.push_back(pt);
                return;
            }
        }
    };
    for (int i = 0; i < n; ++i) {
        if (i == i0 || i == i1 || i == i2 || i == i3) continue;
        place(i, 0);
    }

    for (;;) {
        std::size_t cur = faces.size();
        for (std::size_t f = 0; f < faces.size(); ++f) {
            if (faces[f].alive && !faces[f].outside.empty()) {
                cur = f;
                break;
            }
        }
        if (cur == faces.size()) break;

        int apex = faces[cur].outside.front();
        best = -1.0;
        for (int i : faces[cur].outside) {
            const double d = faces[cur].distance(p[i]);
            if (d > best) {
                best = d;
                apex = i;
            }
        }
        std::vector<std::size_t> visible;
        std::set<std::pair<int, int>> edges;
        for (std::size_t f = 0; f < faces.size(); ++f) {
            if (!faces[f].alive || faces[f].distance(p[apex]) <= eps) continue;
            visible.push_back(f);
            for (int e = 0; e < 3; ++e) edges.insert({faces[f].v[e], faces[f].v[(e + 1) % 3]});
        }
        std::vector<int> orphans;
        for (auto f : visible) {
            faces[f].alive = false;
            for (int i : faces[f].outside)
                if (i != apex) orphans.push_back(i);
            faces[f].outside.clear();
        }
        const std::size_t first_new = faces.size();
        for (const auto& [u, v] : edges) {
            if (edges.count({v, u})) continue;  // interior edge of the visible region
            faces.push_back(make_face(p, u, v, apex, interior));
        }
        for (int i : orphans) place(i, first_new);
    }

    std::vector<int> out;
    for (const auto& f : faces)
        if (f.alive) out.insert(out.end(), f.v, f.v + 3);
    return unique_sorted(out);
}

}  // namespace

std::vector<int> convex_hull(const Eigen::MatrixXd& points) {
    detail::require(points.rows() >= 1, "convex_hull: no points");
    detail::require(points.allFinite(), "convex_hull: points must be finite");
    const auto d = points.cols();
    if (points.rows() == 1) return {0};
    if (d == 1) {
        Eigen::Index lo = 0, hi = 0;
        points.col(0).minCoeff(&lo);
        points.col(0).maxCoeff(&hi);
        return unique_sorted({static_cast<int>(lo), static_cast<int>(hi)});
    }
    if (d > 3) return axis_extremes(points);

    const Eigen::MatrixXd centered = points.rowwise() - points.colwise().mean();
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(centered, Eigen::ComputeThinV);
    const double smax = svd.singularValues()(0);
    const double rank_tol = 1e-10 * std::max(smax, 1e-300);
    int rank = 0;
    for (Eigen::Index i = 0; i < svd.singularValues().size(); ++i)
        if (svd.singularValues()(i) > rank_tol) ++rank;
    if (rank < d || points.rows() < d + 1) return principal_extremes(points, svd, rank_tol);

    const double scale = centered.cwiseAbs().maxCoeff();
    const double eps = 1e-12 * std::max(scale, 1.0) * std::max(scale, 1.0);
    return d == 2 ? quickhull2(points, eps) : quickhull3(points, 1e-12 * std::max(scale, 1.0));
}

}  // namespace kedrl
