#pragma once

#include "ventfit/mesh.hpp"

#include <cstdlib>
#include <string>
#include <vector>

namespace helpers {

using ventfit::Face;
using ventfit::LabeledMesh;
using ventfit::Vec3;

struct TriMesh {
    std::vector<Vec3> pos;
    std::vector<Face> faces;
};

// Axis-aligned cube spanning [origin, origin + side]^3, outward orientation.
// Each face is a symmetric 4-triangle fan around its center, so corner
// vertex normals are the exact corner diagonals.
inline TriMesh make_cube(double side = 1.0, const Vec3& origin = Vec3::Zero()) {
    TriMesh m;
    for (int z = 0; z <= 1; ++z)
        for (auto [x, y] : {std::pair{0, 0}, {1, 0}, {1, 1}, {0, 1}})
            m.pos.push_back(origin + side * Vec3(x, y, z));
    const int loops[6][4] = {{0, 3, 2, 1}, {4, 5, 6, 7}, {0, 1, 5, 4},
                             {2, 3, 7, 6}, {0, 4, 7, 3}, {1, 2, 6, 5}};
    for (const auto& loop : loops) {
        int c = static_cast<int>(m.pos.size());
        m.pos.push_back(0.25 * (m.pos[loop[0]] + m.pos[loop[1]] + m.pos[loop[2]] +
                                m.pos[loop[3]]));
        for (int k = 0; k < 4; ++k) m.faces.push_back({c, loop[k], loop[(k + 1) % 4]});
    }
    return m;
}

// Regular tetrahedron with unit edge length, outward orientation.
inline TriMesh make_tetrahedron() {
    const double s = 1.0 / (2.0 * std::sqrt(2.0));
    TriMesh m;
    m.pos = {s * Vec3(1, 1, 1), s * Vec3(1, -1, -1), s * Vec3(-1, 1, -1), s * Vec3(-1, -1, 1)};
    m.faces = {{0, 1, 2}, {0, 2, 3}, {0, 3, 1}, {1, 3, 2}};
    return m;
}

// Icosphere: subdivided icosahedron projected onto a sphere.
inline TriMesh make_icosphere(int level, double radius = 1.0, const Vec3& center = Vec3::Zero()) {
    const double t = (1.0 + std::sqrt(5.0)) / 2.0;
    TriMesh m;
    m.pos = {{-1, t, 0}, {1, t, 0}, {-1, -t, 0}, {1, -t, 0}, {0, -1, t}, {0, 1, t},
             {0, -1, -t}, {0, 1, -t}, {t, 0, -1}, {t, 0, 1}, {-t, 0, -1}, {-t, 0, 1}};
    for (auto& p : m.pos) p.normalize();
    m.faces = {{0, 11, 5}, {0, 5, 1},  {0, 1, 7},   {0, 7, 10}, {0, 10, 11},
               {1, 5, 9},  {5, 11, 4}, {11, 10, 2}, {10, 7, 6}, {7, 1, 8},
               {3, 9, 4},  {3, 4, 2},  {3, 2, 6},   {3, 6, 8},  {3, 8, 9},
               {4, 9, 5},  {2, 4, 11}, {6, 2, 10},  {8, 6, 7},  {9, 8, 1}};
    for (int l = 0; l < level; ++l) {
        std::vector<Face> next;
        std::unordered_map<std::uint64_t, int> midpoint;
        auto mid = [&](int a, int b) {
            std::uint64_t key = (static_cast<std::uint64_t>(std::min(a, b)) << 32) |
                                static_cast<std::uint32_t>(std::max(a, b));
            auto it = midpoint.find(key);
            if (it != midpoint.end()) return it->second;
            int id = static_cast<int>(m.pos.size());
            m.pos.push_back(((m.pos[a] + m.pos[b]) * 0.5).normalized());
            midpoint.emplace(key, id);
            return id;
        };
        for (const Face& f : m.faces) {
            int ab = mid(f[0], f[1]), bc = mid(f[1], f[2]), ca = mid(f[2], f[0]);
            next.push_back({f[0], ab, ca});
            next.push_back({f[1], bc, ab});
            next.push_back({f[2], ca, bc});
            next.push_back({ab, bc, ca});
        }
        m.faces = std::move(next);
    }
    for (auto& p : m.pos) p = center + radius * p;
    return m;
}

// Flat triangulated grid patch in the z = z0 plane.
inline TriMesh make_plane_patch(int nx, int ny, double spacing, double z0 = 0.0) {
    TriMesh m;
    for (int j = 0; j <= ny; ++j)
        for (int i = 0; i <= nx; ++i) m.pos.emplace_back(i * spacing, j * spacing, z0);
    auto vid = [nx](int i, int j) { return j * (nx + 1) + i; };
    for (int j = 0; j < ny; ++j)
        for (int i = 0; i < nx; ++i) {
            m.faces.push_back({vid(i, j), vid(i + 1, j), vid(i, j + 1)});
            m.faces.push_back({vid(i + 1, j), vid(i + 1, j + 1), vid(i, j + 1)});
        }
    return m;
}

// Wrap a closed triangle mesh as an all-LV labeled mesh.
inline LabeledMesh as_lv_mesh(const TriMesh& m,
                              ventfit::PeripheralClass cls = ventfit::PeripheralClass::WhiteMatter) {
    LabeledMesh out;
    out.vertices = m.pos;
    out.faces = m.faces;
    out.structure_label.assign(m.pos.size(), ventfit::StructureLabel::Lv);
    out.peripheral_class.assign(m.pos.size(), cls);
    out.side.assign(m.pos.size(), ventfit::Side::Left);
    return out;
}

// Fresh scratch directory under the build tree's temp space.
inline std::string temp_dir(const std::string& tag) {
    std::string tmpl = "/tmp/ventfit_" + tag + "_XXXXXX";
    std::vector<char> buf(tmpl.begin(), tmpl.end());
    buf.push_back('\0');
    char* got = mkdtemp(buf.data());
    if (!got) throw std::runtime_error("mkdtemp failed");
    return std::string(got);
}

}  // namespace helpers
