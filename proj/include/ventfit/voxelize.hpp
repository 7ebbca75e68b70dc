#pragma once

#include "ventfit/mesh.hpp"
#include "ventfit/volume.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

namespace ventfit {

struct GridSpec {
    Vec3i dims = Vec3i::Zero();
    Vec3 spacing = Vec3::Ones();
    Vec3 origin = Vec3::Zero();
};

// Grid covering [lo, hi] with a margin (in voxels) on every side.
inline GridSpec fit_grid(const Vec3& lo, const Vec3& hi, const Vec3& spacing,
                         int margin_voxels = 2) {
    GridSpec g;
    g.spacing = spacing;
    for (int a = 0; a < 3; ++a) {
        if (!(spacing[a] > 0.0)) throw parameter_error("fit_grid: spacing must be positive");
        g.origin[a] = lo[a] - margin_voxels * spacing[a];
        g.dims[a] = std::max(
            1, static_cast<int>(std::ceil((hi[a] - g.origin[a]) / spacing[a])) + margin_voxels);
    }
    return g;
}

inline GridSpec fit_grid(const std::vector<Vec3>& points, const Vec3& spacing,
                         int margin_voxels = 2) {
    if (points.empty()) throw parameter_error("fit_grid: no points");
    Vec3 lo = points[0], hi = points[0];
    for (const Vec3& p : points) {
        lo = lo.cwiseMin(p);
        hi = hi.cwiseMax(p);
    }
    return fit_grid(lo, hi, spacing, margin_voxels);
}

// Inside/outside mask by +z ray parity per voxel column. A voxel is inside
// iff its center is enclosed by the surface. Columns landing exactly on a
// projected edge or vertex are nudged deterministically until the hit
// configuration is generic, so watertight input yields watertight parity.
inline std::vector<std::uint8_t> voxelize_mask(const std::vector<Vec3>& pos,
                                               const std::vector<Face>& faces,
                                               const GridSpec& grid) {
    {
        auto counts = edge_face_counts(faces);
        for (const auto& [key, cnt] : counts) {
            (void)key;
            if (cnt != 2) throw geometry_error("voxelize: mesh is not closed");
        }
        if (faces.empty()) throw geometry_error("voxelize: mesh has no faces");
    }

    const int nx = grid.dims[0], ny = grid.dims[1], nz = grid.dims[2];
    std::vector<std::uint8_t> mask(static_cast<std::size_t>(nx) * ny * nz, 0);

    // Bin triangles by the columns their xy bounding box touches.
    std::vector<std::vector<int>> bins(static_cast<std::size_t>(nx) * ny);
    for (std::size_t fi = 0; fi < faces.size(); ++fi) {
        const Face& f = faces[fi];
        double minx = pos[f[0]].x(), maxx = minx;
        double miny = pos[f[0]].y(), maxy = miny;
        for (int k = 1; k < 3; ++k) {
            minx = std::min(minx, pos[f[k]].x());
            maxx = std::max(maxx, pos[f[k]].x());
            miny = std::min(miny, pos[f[k]].y());
            maxy = std::max(maxy, pos[f[k]].y());
        }
        int i0 = std::max(0, static_cast<int>(std::floor((minx - grid.origin.x()) / grid.spacing.x() - 0.5)));
        int i1 = std::min(nx - 1, static_cast<int>(std::ceil((maxx - grid.origin.x()) / grid.spacing.x() - 0.5)));
        int j0 = std::max(0, static_cast<int>(std::floor((miny - grid.origin.y()) / grid.spacing.y() - 0.5)));
        int j1 = std::min(ny - 1, static_cast<int>(std::ceil((maxy - grid.origin.y()) / grid.spacing.y() - 0.5)));
        for (int i = i0; i <= i1; ++i)
            for (int j = j0; j <= j1; ++j)
                bins[static_cast<std::size_t>(i) * ny + j].push_back(static_cast<int>(fi));
    }

    std::vector<double> hits;
    for (int i = 0; i < nx; ++i)
        for (int j = 0; j < ny; ++j) {
            const auto& bin = bins[static_cast<std::size_t>(i) * ny + j];
            if (bin.empty()) continue;
            const double cx0 = grid.origin.x() + (i + 0.5) * grid.spacing.x();
            const double cy0 = grid.origin.y() + (j + 0.5) * grid.spacing.y();

            // Retry with a deterministic nudge whenever the column hits a
            // projected edge exactly (any zero edge function).
            bool ok = false;
            for (int attempt = 0; attempt < 64 && !ok; ++attempt) {
                hits.clear();
                const double cx = cx0 + attempt * 1.7e-7 * grid.spacing.x();
                const double cy = cy0 + attempt * 2.9e-7 * grid.spacing.y();
                ok = true;
                for (int fi : bin) {
                    const Face& f = faces[fi];
                    const Vec3& a = pos[f[0]];
                    const Vec3& b = pos[f[1]];
                    const Vec3& c = pos[f[2]];
                    // Projected scale and signed area in xy; a triangle whose
                    // projection is (near-)degenerate is parallel to the ray
                    // and contributes no transversal crossing.
                    const double sx0 = b.x() - a.x(), sy0 = b.y() - a.y();
                    const double sx1 = c.x() - a.x(), sy1 = c.y() - a.y();
                    const double scale2 = sx0 * sx0 + sy0 * sy0 + sx1 * sx1 + sy1 * sy1;
                    const double area2 = sx0 * sy1 - sy0 * sx1;
                    const double tol = 1e-12 * scale2;
                    if (std::abs(area2) <= tol) continue;
                    double e0 = sx0 * (cy - a.y()) - sy0 * (cx - a.x());
                    double e1 = (c.x() - b.x()) * (cy - b.y()) - (c.y() - b.y()) * (cx - b.x());
                    double e2 = (a.x() - c.x()) * (cy - c.y()) - (a.y() - c.y()) * (cx - c.x());
                    if (std::abs(e0) <= tol || std::abs(e1) <= tol || std::abs(e2) <= tol) {
                        ok = false;
                        break;
                    }
                    bool inside = (e0 > 0.0 && e1 > 0.0 && e2 > 0.0) ||
                                  (e0 < 0.0 && e1 < 0.0 && e2 < 0.0);
                    if (!inside) continue;
                    Vec3 n = (b - a).cross(c - a);
                    // Strict interior hit implies the projected area n.z != 0.
                    double z = a.z() + (n.x() * (a.x() - cx) + n.y() * (a.y() - cy)) / n.z();
                    hits.push_back(z);
                }
            }
            if (!ok) throw geometry_error("voxelize: degenerate column could not be resolved");
            if (hits.empty()) continue;
            std::sort(hits.begin(), hits.end());
            std::size_t h = 0;
            long parity = 0;
            for (int k = 0; k < nz; ++k) {
                const double cz = grid.origin.z() + (k + 0.5) * grid.spacing.z();
                while (h < hits.size() && hits[h] <= cz) {
                    ++h;
                    ++parity;
                }
                if (parity & 1)
                    mask[(static_cast<std::size_t>(i) * ny + j) * nz + k] = 1;
            }
        }
    return mask;
}

// Closed-submesh voxelization into a fresh single-label volume.
inline SegmentationVolume voxelize(const std::vector<Vec3>& pos, const std::vector<Face>& faces,
                                   const GridSpec& grid, std::uint16_t code = 1) {
    SegmentationVolume vol;
    vol.dims = grid.dims;
    vol.spacing = grid.spacing;
    vol.origin = grid.origin;
    vol.dtype = (code > 255) ? "u16" : "u8";
    auto mask = voxelize_mask(pos, faces, grid);
    vol.labels.assign(mask.size(), 0);
    for (std::size_t i = 0; i < mask.size(); ++i)
        if (mask[i]) vol.labels[i] = code;
    return vol;
}

// Paint a closed submesh into an existing volume (later calls overwrite).
inline void voxelize_into(SegmentationVolume& vol, const std::vector<Vec3>& pos,
                          const std::vector<Face>& faces, std::uint16_t code) {
    GridSpec grid{vol.dims, vol.spacing, vol.origin};
    auto mask = voxelize_mask(pos, faces, grid);
    for (std::size_t i = 0; i < mask.size(); ++i)
        if (mask[i]) vol.labels[i] = code;
}

}  // namespace ventfit
