#pragma once

#include "ventfit/kdtree.hpp"
#include "ventfit/mesh.hpp"
#include "ventfit/volume.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <vector>

namespace ventfit {

// Volumetric overlap of one label code between two volumes on the same grid.
// Two empty masks count as perfect agreement.
inline double dice(const SegmentationVolume& a, const SegmentationVolume& b,
                   std::uint16_t code) {
    if (a.dims[0] != b.dims[0] || a.dims[1] != b.dims[1] || a.dims[2] != b.dims[2])
        throw input_error("dice: volume grids differ in size");
    long inter = 0, na = 0, nb = 0;
    for (long v = 0; v < a.voxel_count(); ++v) {
        bool in_a = a.labels[v] == code;
        bool in_b = b.labels[v] == code;
        na += in_a;
        nb += in_b;
        inter += in_a && in_b;
    }
    if (na + nb == 0) return 1.0;
    return 2.0 * static_cast<double>(inter) / static_cast<double>(na + nb);
}

// Deterministic dense samples of a triangle surface: a barycentric lattice
// per face subdivided until sample spacing is at most max_spacing. Lattice
// includes vertices and edges, so neighboring faces share boundary samples.
inline std::vector<Vec3> surface_samples(const std::vector<Vec3>& pos,
                                         const std::vector<Face>& faces,
                                         double max_spacing = 0.5) {
    if (faces.empty()) throw input_error("surface_samples: empty surface");
    if (!(max_spacing > 0.0)) throw parameter_error("surface_samples: spacing must be positive");
    std::vector<Vec3> out;
    for (const Face& f : faces) {
        const Vec3& a = pos[f[0]];
        const Vec3& b = pos[f[1]];
        const Vec3& c = pos[f[2]];
        double longest = std::max({(b - a).norm(), (c - b).norm(), (a - c).norm()});
        int n = std::max(1, static_cast<int>(std::ceil(longest / max_spacing)));
        for (int i = 0; i <= n; ++i)
            for (int j = 0; j <= n - i; ++j) {
                int k = n - i - j;
                out.push_back((i * a + j * b + k * c) / static_cast<double>(n));
            }
    }
    return out;
}

namespace detail {

inline std::vector<double> nearest_distances(const std::vector<Vec3>& from,
                                             const KdTree& to_tree) {
    std::vector<double> d;
    d.reserve(from.size());
    for (const Vec3& p : from) d.push_back(std::sqrt(to_tree.nearest(p).second));
    return d;
}

inline double mean(const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x;
    return s / static_cast<double>(v.size());
}

// Percentile by linear interpolation over the sorted values.
inline double percentile(std::vector<double> v, double q) {
    std::sort(v.begin(), v.end());
    double pos = q * static_cast<double>(v.size() - 1);
    std::size_t lo = static_cast<std::size_t>(pos);
    if (lo + 1 >= v.size()) return v.back();
    double frac = pos - static_cast<double>(lo);
    return v[lo] + frac * (v[lo + 1] - v[lo]);
}

}  // namespace detail

// Average symmetric surface distance between two sampled surfaces: the mean
// of the two directed mean nearest distances.
inline double assd(const std::vector<Vec3>& a, const std::vector<Vec3>& b) {
    if (a.empty() || b.empty()) throw input_error("assd: empty surface sample set");
    KdTree ta(a), tb(b);
    double ab = detail::mean(detail::nearest_distances(a, tb));
    double ba = detail::mean(detail::nearest_distances(b, ta));
    return 0.5 * (ab + ba);
}

inline double assd(const std::vector<Vec3>& pos_a, const std::vector<Face>& faces_a,
                   const std::vector<Vec3>& pos_b, const std::vector<Face>& faces_b,
                   double max_spacing = 0.5) {
    return assd(surface_samples(pos_a, faces_a, max_spacing),
                surface_samples(pos_b, faces_b, max_spacing));
}

// 95th-percentile symmetric directed surface distance: the max over both
// directions of the interpolated 95th percentile of nearest distances.
inline double hd95(const std::vector<Vec3>& a, const std::vector<Vec3>& b) {
    if (a.empty() || b.empty()) throw input_error("hd95: empty surface sample set");
    KdTree ta(a), tb(b);
    double ab = detail::percentile(detail::nearest_distances(a, tb), 0.95);
    double ba = detail::percentile(detail::nearest_distances(b, ta), 0.95);
    return std::max(ab, ba);
}

inline double hd95(const std::vector<Vec3>& pos_a, const std::vector<Face>& faces_a,
                   const std::vector<Vec3>& pos_b, const std::vector<Face>& faces_b,
                   double max_spacing = 0.5) {
    return hd95(surface_samples(pos_a, faces_a, max_spacing),
                surface_samples(pos_b, faces_b, max_spacing));
}

// Alignment accuracy of one fitted mesh: overlap plus surface distances,
// with per-peripheral-class surface distances for the classes present on
// both sides.
struct AlignmentReport {
    double dsc = 0.0;
    double assd = 0.0;
    double hd95 = 0.0;
    std::map<PeripheralClass, double> peri_assd;
};

// Directed per-class surface distance support: samples of the faces whose
// three vertices all carry the class.
inline std::vector<Vec3> peripheral_class_samples(const LabeledMesh& mesh, PeripheralClass pc,
                                                  double max_spacing = 0.5) {
    std::vector<Face> faces;
    for (const Face& f : mesh.faces) {
        bool all = true;
        for (int k = 0; k < 3 && all; ++k) all = mesh.peripheral_class[f[k]] == pc;
        if (all) faces.push_back(f);
    }
    if (faces.empty()) {
        // Fall back to the bare class vertices when no face is fully inside
        // the class band.
        std::vector<Vec3> pts;
        for (int i = 0; i < mesh.vertex_count(); ++i)
            if (mesh.peripheral_class[i] == pc) pts.push_back(mesh.vertices[i]);
        return pts;
    }
    return surface_samples(mesh.vertices, faces, max_spacing);
}

}  // namespace ventfit
