#pragma once

#include "ventfit/kdtree.hpp"

#include <vector>

namespace ventfit {

// Symmetric squared chamfer distance, mean-reduced on each side:
// mean_a min_b ||a-b||^2 + mean_b min_a ||a-b||^2.
inline double chamfer_distance(const std::vector<Vec3>& a, const std::vector<Vec3>& b) {
    if (a.empty() || b.empty()) throw empty_target_error("chamfer_distance: empty point set");
    KdTree tree_a(a);
    KdTree tree_b(b);
    double sum_a = 0.0, sum_b = 0.0;
    for (const Vec3& p : a) sum_a += tree_b.nearest(p).second;
    for (const Vec3& p : b) sum_b += tree_a.nearest(p).second;
    return sum_a / static_cast<double>(a.size()) + sum_b / static_cast<double>(b.size());
}

}  // namespace ventfit
