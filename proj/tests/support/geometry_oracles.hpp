#pragma once

// Planar computational-geometry oracles used to cross-check the hull
// machinery. Deliberately naive and independent of the library kernels.

#include "iforge/types.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <vector>

namespace iforge_test {

inline double sq(double x) { return x * x; }

inline double dist2_2d(double ax, double ay, double bx, double by) {
    return sq(ax - bx) + sq(ay - by);
}

// Brute-force distance from query to co(points) in the plane: evaluates every
// barycentric grid point of every triangle (edges and vertices live on the
// grid boundary). step is the barycentric resolution.
inline double grid_hull_distance(const std::vector<iforge::Vec>& pts, const iforge::Vec& q,
                                 double step = 1e-3) {
    double best = std::numeric_limits<double>::infinity();
    auto consider = [&](double x, double y) { best = std::min(best, dist2_2d(x, y, q[0], q[1])); };

    const std::size_t k = pts.size();
    if (k == 1) {
        consider(pts[0][0], pts[0][1]);
        return std::sqrt(best);
    }
    const int m = static_cast<int>(std::lround(1.0 / step));
    if (k == 2) {
        for (int i = 0; i <= m; ++i) {
            const double l = i * step;
            consider(pts[0][0] + l * (pts[1][0] - pts[0][0]),
                     pts[0][1] + l * (pts[1][1] - pts[0][1]));
        }
        return std::sqrt(best);
    }
    for (std::size_t a = 0; a < k; ++a)
        for (std::size_t b = a + 1; b < k; ++b)
            for (std::size_t c = b + 1; c < k; ++c)
                for (int i = 0; i <= m; ++i) {
                    const double l1 = i * step;
                    for (int j = 0; j <= m - i; ++j) {
                        const double l2 = j * step;
                        const double l3 = 1.0 - l1 - l2;
                        consider(l1 * pts[a][0] + l2 * pts[b][0] + l3 * pts[c][0],
                                 l1 * pts[a][1] + l2 * pts[b][1] + l3 * pts[c][1]);
                    }
                }
    return std::sqrt(best);
}

// Gift-wrapping convex hull (counterclockwise vertex indices). Collinear
// boundary points are skipped: only strict vertices are reported, so hull
// membership coincides with extremeness. Returns {} if wrapping degenerates
// (e.g. duplicate points), which callers treat as "regenerate the instance".
inline std::vector<std::size_t> gift_wrap_hull(const std::vector<iforge::Vec>& pts) {
    const std::size_t n = pts.size();
    if (n == 0) return {};
    if (n == 1) return {0};

    std::size_t start = 0;
    for (std::size_t i = 1; i < n; ++i)
        if (pts[i][0] < pts[start][0] ||
            (pts[i][0] == pts[start][0] && pts[i][1] < pts[start][1]))
            start = i;

    std::vector<std::size_t> hull;
    std::size_t cur = start;
    do {
        hull.push_back(cur);
        std::size_t next = (cur + 1) % n;
        for (std::size_t cand = 0; cand < n; ++cand) {
            if (cand == cur || cand == next) continue;
            const double cross =
                (pts[next][0] - pts[cur][0]) * (pts[cand][1] - pts[cur][1]) -
                (pts[next][1] - pts[cur][1]) * (pts[cand][0] - pts[cur][0]);
            if (cross < 0.0) {
                next = cand;
            } else if (cross == 0.0 &&
                       dist2_2d(pts[cand][0], pts[cand][1], pts[cur][0], pts[cur][1]) >
                           dist2_2d(pts[next][0], pts[next][1], pts[cur][0], pts[cur][1])) {
                next = cand;
            }
        }
        cur = next;
        if (hull.size() > n + 1) return {};
    } while (cur != start);
    return hull;
}

inline double point_segment_distance_2d(const iforge::Vec& q, const iforge::Vec& a,
                                        const iforge::Vec& b) {
    const double vx = b[0] - a[0], vy = b[1] - a[1];
    const double len2 = sq(vx) + sq(vy);
    double t = 0.0;
    if (len2 > 0.0) t = std::clamp(((q[0] - a[0]) * vx + (q[1] - a[1]) * vy) / len2, 0.0, 1.0);
    return std::sqrt(dist2_2d(q[0], q[1], a[0] + t * vx, a[1] + t * vy));
}

// Distance from q to the BOUNDARY of co(points): positive both for exterior
// queries (distance to the hull) and interior ones (depth inside). Used to
// filter out ambiguous instances when comparing extremeness classifiers.
inline double hull_boundary_distance(const std::vector<iforge::Vec>& pts, const iforge::Vec& q) {
    const std::vector<std::size_t> hull = gift_wrap_hull(pts);
    if (hull.empty()) return 0.0;
    if (hull.size() == 1)
        return std::sqrt(dist2_2d(q[0], q[1], pts[hull[0]][0], pts[hull[0]][1]));
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t e = 0; e < hull.size(); ++e) {
        const iforge::Vec& a = pts[hull[e]];
        const iforge::Vec& b = pts[hull[(e + 1) % hull.size()]];
        best = std::min(best, point_segment_distance_2d(q, a, b));
    }
    return best;
}

} // namespace iforge_test
