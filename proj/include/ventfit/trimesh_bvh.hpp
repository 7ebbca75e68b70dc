#pragma once

#include "ventfit/mesh.hpp"

#include <algorithm>
#include <limits>
#include <vector>

namespace ventfit {

// Closest point on a triangle with barycentric coordinates, so callers can
// differentiate the squared distance through the foot point (d^2 gradient
// w.r.t. vertex i is 2*bary_i*(foot - query) by the envelope argument).
struct TrianglePoint {
    double d2 = 0.0;
    Vec3 point = Vec3::Zero();
    Vec3 bary = Vec3::Zero();
};

namespace detail {

inline TrianglePoint closest_point_on_segment(const Vec3& p, const Vec3& a, const Vec3& b,
                                              int ia, int ib) {
    Vec3 ab = b - a;
    double denom = ab.squaredNorm();
    double t = denom > 0.0 ? std::clamp(ab.dot(p - a) / denom, 0.0, 1.0) : 0.0;
    TrianglePoint r;
    r.point = a + t * ab;
    r.d2 = (p - r.point).squaredNorm();
    r.bary = Vec3::Zero();
    r.bary[ia] = 1.0 - t;
    r.bary[ib] = t;
    return r;
}

}  // namespace detail

inline TrianglePoint closest_point_on_triangle(const Vec3& p, const Vec3& a, const Vec3& b,
                                               const Vec3& c) {
    Vec3 ab = b - a, ac = c - a, ap = p - a;
    double d1 = ab.dot(ap), d2 = ac.dot(ap);
    if (d1 <= 0.0 && d2 <= 0.0) return {(p - a).squaredNorm(), a, Vec3(1, 0, 0)};

    Vec3 bp = p - b;
    double d3 = ab.dot(bp), d4 = ac.dot(bp);
    if (d3 >= 0.0 && d4 <= d3) return {(p - b).squaredNorm(), b, Vec3(0, 1, 0)};

    double vc = d1 * d4 - d3 * d2;
    if (vc <= 0.0 && d1 >= 0.0 && d3 <= 0.0) {
        double v = d1 / (d1 - d3);
        Vec3 q = a + v * ab;
        return {(p - q).squaredNorm(), q, Vec3(1.0 - v, v, 0.0)};
    }

    Vec3 cp = p - c;
    double d5 = ab.dot(cp), d6 = ac.dot(cp);
    if (d6 >= 0.0 && d5 <= d6) return {(p - c).squaredNorm(), c, Vec3(0, 0, 1)};

    double vb = d5 * d2 - d1 * d6;
    if (vb <= 0.0 && d2 >= 0.0 && d6 <= 0.0) {
        double w = d2 / (d2 - d6);
        Vec3 q = a + w * ac;
        return {(p - q).squaredNorm(), q, Vec3(1.0 - w, 0.0, w)};
    }

    double va = d3 * d6 - d5 * d4;
    if (va <= 0.0 && (d4 - d3) >= 0.0 && (d5 - d6) >= 0.0) {
        double w = (d4 - d3) / ((d4 - d3) + (d5 - d6));
        Vec3 q = b + w * (c - b);
        return {(p - q).squaredNorm(), q, Vec3(0.0, 1.0 - w, w)};
    }

    double denom = va + vb + vc;
    if (!(denom > 0.0) || !std::isfinite(denom)) {
        // Degenerate (zero-area) triangle: best of the three edges.
        TrianglePoint best = detail::closest_point_on_segment(p, a, b, 0, 1);
        TrianglePoint e1 = detail::closest_point_on_segment(p, b, c, 1, 2);
        TrianglePoint e2 = detail::closest_point_on_segment(p, a, c, 0, 2);
        if (e1.d2 < best.d2) best = e1;
        if (e2.d2 < best.d2) best = e2;
        return best;
    }
    double v = vb / denom, w = vc / denom;
    Vec3 q = a + v * ab + w * ac;
    return {(p - q).squaredNorm(), q, Vec3(1.0 - v - w, v, w)};
}

// Bounding-volume hierarchy over a fixed triangle list. The tree structure
// is built once from the construction-time positions; refit() updates the
// boxes in place as vertices move, keeping queries exact (pruning uses the
// refitted bounds) at the cost of gradually looser overlap.
class TriangleBvh {
public:
    struct Hit {
        int face = -1;  // index into the face list given at construction
        TrianglePoint tp;
    };

    TriangleBvh(const std::vector<Face>& faces, const std::vector<Vec3>& build_positions)
        : faces_(faces) {
        if (faces_.empty()) throw parameter_error("triangle bvh: no faces");
        order_.resize(faces_.size());
        for (std::size_t i = 0; i < order_.size(); ++i) order_[i] = static_cast<int>(i);
        std::vector<Vec3> centroids(faces_.size());
        for (std::size_t i = 0; i < faces_.size(); ++i)
            centroids[i] = (build_positions[faces_[i][0]] + build_positions[faces_[i][1]] +
                            build_positions[faces_[i][2]]) /
                           3.0;
        nodes_.reserve(2 * faces_.size());
        build(0, static_cast<int>(faces_.size()), centroids);
        refit(build_positions);
    }

    void refit(const std::vector<Vec3>& pos) {
        pos_ = &pos;
        for (int ni = static_cast<int>(nodes_.size()) - 1; ni >= 0; --ni) {
            Node& n = nodes_[ni];
            if (n.left < 0) {
                n.lo = Vec3::Constant(std::numeric_limits<double>::infinity());
                n.hi = -n.lo;
                for (int k = n.begin; k < n.end; ++k) {
                    const Face& f = faces_[order_[k]];
                    for (int v = 0; v < 3; ++v) {
                        n.lo = n.lo.cwiseMin(pos[f[v]]);
                        n.hi = n.hi.cwiseMax(pos[f[v]]);
                    }
                }
            } else {
                n.lo = nodes_[n.left].lo.cwiseMin(nodes_[n.right].lo);
                n.hi = nodes_[n.left].hi.cwiseMax(nodes_[n.right].hi);
            }
        }
    }

    Hit nearest(const Vec3& p) const {
        if (!pos_) throw parameter_error("triangle bvh: refit before querying");
        // Seeded with face 0 so the hit indexes a real triangle even when
        // every distance overflows to infinity.
        Hit best;
        best.face = 0;
        best.tp = closest_point_on_triangle(p, (*pos_)[faces_[0][0]], (*pos_)[faces_[0][1]],
                                            (*pos_)[faces_[0][2]]);
        int stack[64];
        int top = 0;
        stack[top++] = 0;
        while (top > 0) {
            int ni = stack[--top];
            const Node& n = nodes_[ni];
            if (box_d2(n, p) >= best.tp.d2) continue;
            if (n.left < 0) {
                for (int k = n.begin; k < n.end; ++k) {
                    const Face& f = faces_[order_[k]];
                    TrianglePoint tp = closest_point_on_triangle(p, (*pos_)[f[0]], (*pos_)[f[1]],
                                                                 (*pos_)[f[2]]);
                    if (tp.d2 < best.tp.d2) {
                        best.tp = tp;
                        best.face = order_[k];
                    }
                }
            } else {
                double dl = box_d2(nodes_[n.left], p);
                double dr = box_d2(nodes_[n.right], p);
                // Push the farther child first so the nearer is explored next.
                if (dl <= dr) {
                    if (dr < best.tp.d2) stack[top++] = n.right;
                    if (dl < best.tp.d2) stack[top++] = n.left;
                } else {
                    if (dl < best.tp.d2) stack[top++] = n.left;
                    if (dr < best.tp.d2) stack[top++] = n.right;
                }
            }
        }
        return best;
    }

private:
    struct Node {
        Vec3 lo = Vec3::Zero(), hi = Vec3::Zero();
        int left = -1, right = -1;
        int begin = 0, end = 0;
    };

    static constexpr int kLeafSize = 4;

    int build(int begin, int end, const std::vector<Vec3>& centroids) {
        int ni = static_cast<int>(nodes_.size());
        nodes_.push_back(Node{});
        nodes_[ni].begin = begin;
        nodes_[ni].end = end;
        if (end - begin <= kLeafSize) return ni;

        Vec3 lo = Vec3::Constant(std::numeric_limits<double>::infinity());
        Vec3 hi = -lo;
        for (int k = begin; k < end; ++k) {
            lo = lo.cwiseMin(centroids[order_[k]]);
            hi = hi.cwiseMax(centroids[order_[k]]);
        }
        int axis = 0;
        Vec3 ext = hi - lo;
        if (ext.y() > ext.x()) axis = 1;
        if (ext.z() > ext[axis]) axis = 2;
        int mid = (begin + end) / 2;
        std::nth_element(order_.begin() + begin, order_.begin() + mid, order_.begin() + end,
                         [&](int x, int y) { return centroids[x][axis] < centroids[y][axis]; });
        // Depth is bounded because the halves are always strictly smaller.
        int l = build(begin, mid, centroids);
        int r = build(mid, end, centroids);
        nodes_[ni].left = l;
        nodes_[ni].right = r;
        return ni;
    }

    static double box_d2(const Node& n, const Vec3& p) {
        double d2 = 0.0;
        for (int a = 0; a < 3; ++a) {
            double d = std::max({n.lo[a] - p[a], 0.0, p[a] - n.hi[a]});
            d2 += d * d;
        }
        return d2;
    }

    std::vector<Face> faces_;
    std::vector<int> order_;
    std::vector<Node> nodes_;
    const std::vector<Vec3>* pos_ = nullptr;
};

}  // namespace ventfit
