#pragma once

#include "ventfit/common.hpp"

#include <algorithm>
#include <limits>
#include <numeric>
#include <vector>

namespace ventfit {

// Static 3-d KD-tree over a point set. Median split, leaf size 8.
// Built once per query set; the point array is copied so callers may
// release theirs.
class KdTree {
public:
    KdTree() = default;

    explicit KdTree(std::vector<Vec3> points) : pts_(std::move(points)) {
        if (pts_.empty()) throw parameter_error("KdTree: empty point set");
        idx_.resize(pts_.size());
        std::iota(idx_.begin(), idx_.end(), 0);
        nodes_.reserve(2 * pts_.size() / kLeafSize + 2);
        build(0, static_cast<int>(pts_.size()));
    }

    std::size_t size() const { return pts_.size(); }
    const Vec3& point(int i) const { return pts_[static_cast<std::size_t>(i)]; }

    // Index of nearest point and its squared distance. Seeded with point 0
    // so the index stays valid even when every distance overflows to
    // infinity (the caller's non-finite loss check handles the rest).
    std::pair<int, double> nearest(const Vec3& q) const {
        int best = 0;
        double best_d2 = (pts_[0] - q).squaredNorm();
        search(0, q, best, best_d2);
        return {best, best_d2};
    }

private:
    static constexpr int kLeafSize = 8;

    struct Node {
        // Leaf when right < 0: [begin,end) into idx_.
        // Internal: axis/split with children at left and right.
        double split = 0.0;
        int left = 0, right = -1;
        int begin = 0, end = 0;
        int axis = 0;
    };

    int build(int begin, int end) {
        int id = static_cast<int>(nodes_.size());
        nodes_.emplace_back();
        if (end - begin <= kLeafSize) {
            nodes_[id].begin = begin;
            nodes_[id].end = end;
            return id;
        }
        Vec3 lo = pts_[idx_[begin]], hi = lo;
        for (int i = begin + 1; i < end; ++i) {
            lo = lo.cwiseMin(pts_[idx_[i]]);
            hi = hi.cwiseMax(pts_[idx_[i]]);
        }
        Vec3 ext = hi - lo;
        int axis = 0;
        if (ext.y() > ext.x()) axis = 1;
        if (ext.z() > ext[axis]) axis = 2;
        int mid = (begin + end) / 2;
        std::nth_element(idx_.begin() + begin, idx_.begin() + mid, idx_.begin() + end,
                         [&](int a, int b) { return pts_[a][axis] < pts_[b][axis]; });
        nodes_[id].axis = axis;
        nodes_[id].split = pts_[idx_[mid]][axis];
        int l = build(begin, mid);
        int r = build(mid, end);
        nodes_[id].left = l;
        nodes_[id].right = r;
        return id;
    }

    void search(int id, const Vec3& q, int& best, double& best_d2) const {
        const Node& n = nodes_[id];
        if (n.right < 0) {
            for (int i = n.begin; i < n.end; ++i) {
                double d2 = (pts_[idx_[i]] - q).squaredNorm();
                if (d2 < best_d2) {
                    best_d2 = d2;
                    best = idx_[i];
                }
            }
            return;
        }
        double delta = q[n.axis] - n.split;
        int first = (delta < 0.0) ? n.left : n.right;
        int second = (delta < 0.0) ? n.right : n.left;
        search(first, q, best, best_d2);
        if (delta * delta < best_d2) search(second, q, best, best_d2);
    }

    std::vector<Vec3> pts_;
    std::vector<int> idx_;
    std::vector<Node> nodes_;
};

}  // namespace ventfit
