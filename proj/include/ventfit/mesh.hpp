#pragma once

#include "ventfit/common.hpp"

#include <Eigen/Sparse>

#include <algorithm>
#include <array>
#include <cstdint>
#include <string>
#include <unordered_map>
#include <vector>

namespace ventfit {

enum class StructureLabel : std::uint8_t { Lv = 0, Hippocampus = 1, Shared = 2 };

enum class PeripheralClass : std::int8_t {
    Absent = -1,
    WhiteMatter = 0,
    Hippocampus = 1,
    Thalamus = 2,
    Caudate = 3,
    OppositeLv = 4,
};

enum class Side : std::uint8_t { Left = 0, Right = 1 };

inline const char* to_string(StructureLabel s) {
    switch (s) {
        case StructureLabel::Lv: return "LV";
        case StructureLabel::Hippocampus: return "Hippocampus";
        case StructureLabel::Shared: return "Shared";
    }
    return "?";
}

inline const char* to_string(PeripheralClass c) {
    switch (c) {
        case PeripheralClass::Absent: return "Absent";
        case PeripheralClass::WhiteMatter: return "WhiteMatter";
        case PeripheralClass::Hippocampus: return "Hippocampus";
        case PeripheralClass::Thalamus: return "Thalamus";
        case PeripheralClass::Caudate: return "Caudate";
        case PeripheralClass::OppositeLv: return "OppositeLV";
    }
    return "?";
}

inline const char* to_string(Side s) { return s == Side::Left ? "Left" : "Right"; }

using Face = std::array<int, 3>;

// Triangle mesh whose vertices carry a structure label, an optional
// peripheral-region class (LV/Shared vertices only), and a hemisphere side.
struct LabeledMesh {
    std::vector<Vec3> vertices;
    std::vector<Face> faces;
    std::vector<StructureLabel> structure_label;
    std::vector<PeripheralClass> peripheral_class;
    std::vector<Side> side;

    int vertex_count() const { return static_cast<int>(vertices.size()); }
    int face_count() const { return static_cast<int>(faces.size()); }
};

// View of the faces induced by one structure: faces whose three vertices all
// carry the structure's label or Shared. Face vertex indices are local into
// vert_ids.
struct Submesh {
    std::vector<int> vert_ids;   // global vertex ids, ascending
    std::vector<Face> faces;     // local indices
    std::vector<int> face_ids;   // global face ids, ascending

    bool empty() const { return faces.empty(); }

    std::vector<Vec3> positions(const std::vector<Vec3>& all) const {
        std::vector<Vec3> out(vert_ids.size());
        for (std::size_t i = 0; i < vert_ids.size(); ++i) out[i] = all[vert_ids[i]];
        return out;
    }
};

namespace detail {

inline std::uint64_t edge_key(int a, int b) {
    if (a > b) std::swap(a, b);
    return (static_cast<std::uint64_t>(a) << 32) | static_cast<std::uint32_t>(b);
}

}  // namespace detail

// Unique undirected edges, ascending (min,max) order.
inline std::vector<std::pair<int, int>> unique_edges(const std::vector<Face>& faces) {
    std::vector<std::uint64_t> keys;
    keys.reserve(faces.size() * 3);
    for (const Face& f : faces)
        for (int e = 0; e < 3; ++e) keys.push_back(detail::edge_key(f[e], f[(e + 1) % 3]));
    std::sort(keys.begin(), keys.end());
    keys.erase(std::unique(keys.begin(), keys.end()), keys.end());
    std::vector<std::pair<int, int>> out;
    out.reserve(keys.size());
    for (std::uint64_t k : keys)
        out.emplace_back(static_cast<int>(k >> 32), static_cast<int>(k & 0xffffffffu));
    return out;
}

// Count of incident faces per undirected edge.
inline std::unordered_map<std::uint64_t, int> edge_face_counts(const std::vector<Face>& faces) {
    std::unordered_map<std::uint64_t, int> counts;
    counts.reserve(faces.size() * 2);
    for (const Face& f : faces)
        for (int e = 0; e < 3; ++e) ++counts[detail::edge_key(f[e], f[(e + 1) % 3])];
    return counts;
}

inline Vec3 face_cross(const std::vector<Vec3>& pos, const Face& f) {
    return (pos[f[1]] - pos[f[0]]).cross(pos[f[2]] - pos[f[0]]);
}

// Area-weighted vertex normals. A vertex whose incident faces all have
// (numerically) zero area has no defined normal.
inline std::vector<Vec3> vertex_normals(const std::vector<Vec3>& pos,
                                        const std::vector<Face>& faces) {
    std::vector<Vec3> acc(pos.size(), Vec3::Zero());
    for (const Face& f : faces) {
        Vec3 u = face_cross(pos, f);  // length = 2 * area
        for (int k = 0; k < 3; ++k) acc[f[k]] += u;
    }
    std::vector<Vec3> out(pos.size());
    for (std::size_t i = 0; i < pos.size(); ++i) {
        double n = acc[i].norm();
        if (!(n > 1e-30))
            throw geometry_error("vertex_normals: degenerate normal at vertex " +
                                 std::to_string(i));
        out[i] = acc[i] / n;
    }
    return out;
}

// Symmetric cotangent edge weights w_ij = cot(alpha) + cot(beta) over the
// angles opposite edge ij, clamped below at 1e-6 so obtuse triangles cannot
// flip the weight sign.
inline Eigen::SparseMatrix<double> cotangent_edge_weights(const std::vector<Vec3>& pos,
                                                          const std::vector<Face>& faces) {
    const int n = static_cast<int>(pos.size());
    std::unordered_map<std::uint64_t, double> w;
    w.reserve(faces.size() * 2);
    for (std::size_t fi = 0; fi < faces.size(); ++fi) {
        const Face& f = faces[fi];
        for (int k = 0; k < 3; ++k) {
            int a = f[k], b = f[(k + 1) % 3], c = f[(k + 2) % 3];
            Vec3 u = pos[b] - pos[a];
            Vec3 v = pos[c] - pos[a];
            double cross_norm = u.cross(v).norm();
            if (!(cross_norm > 1e-30))
                throw geometry_error("cotangent_edge_weights: degenerate face " +
                                     std::to_string(fi));
            // cot of the angle at a, opposite edge (b, c).
            w[detail::edge_key(b, c)] += u.dot(v) / cross_norm;
        }
    }
    std::vector<Eigen::Triplet<double>> trip;
    trip.reserve(w.size() * 2);
    for (const auto& [key, val] : w) {
        int i = static_cast<int>(key >> 32);
        int j = static_cast<int>(key & 0xffffffffu);
        double c = std::max(val, 1e-6);
        trip.emplace_back(i, j, c);
        trip.emplace_back(j, i, c);
    }
    Eigen::SparseMatrix<double> W(n, n);
    W.setFromTriplets(trip.begin(), trip.end());
    return W;
}

// Row-normalized cotangent Laplacian A with A x giving
// L(x)_i = sum_j w_ij (x_j - x_i) / sum_j w_ij. Rows sum to zero.
inline Eigen::SparseMatrix<double> cotangent_laplacian(const std::vector<Vec3>& pos,
                                                       const std::vector<Face>& faces) {
    Eigen::SparseMatrix<double> W = cotangent_edge_weights(pos, faces);
    const int n = W.rows();
    Eigen::VectorXd row_sum = W * Eigen::VectorXd::Ones(n);
    std::vector<Eigen::Triplet<double>> trip;
    trip.reserve(W.nonZeros() + n);
    for (int k = 0; k < W.outerSize(); ++k)
        for (Eigen::SparseMatrix<double>::InnerIterator it(W, k); it; ++it)
            trip.emplace_back(it.row(), it.col(), it.value() / row_sum[it.row()]);
    for (int i = 0; i < n; ++i)
        if (row_sum[i] > 0.0) trip.emplace_back(i, i, -1.0);
    Eigen::SparseMatrix<double> A(n, n);
    A.setFromTriplets(trip.begin(), trip.end());
    return A;
}

struct EdgeStats {
    double mean = 0.0;
    double variance = 0.0;  // population variance
};

inline EdgeStats edge_length_stats_over(const std::vector<Vec3>& pos,
                                        const std::vector<std::pair<int, int>>& edges) {
    if (edges.empty()) throw geometry_error("edge_length_stats: no edges");
    double s = 0.0, s2 = 0.0;
    for (auto [i, j] : edges) {
        double len = (pos[i] - pos[j]).norm();
        s += len;
        s2 += len * len;
    }
    const double n = static_cast<double>(edges.size());
    EdgeStats st;
    st.mean = s / n;
    st.variance = s2 / n - st.mean * st.mean;
    if (st.variance < 0.0) st.variance = 0.0;
    return st;
}

inline EdgeStats edge_length_stats(const std::vector<Vec3>& pos, const std::vector<Face>& faces) {
    return edge_length_stats_over(pos, unique_edges(faces));
}

// Volume enclosed by a closed surface; positive for outward orientation.
inline double signed_volume(const std::vector<Vec3>& pos, const std::vector<Face>& faces) {
    double v = 0.0;
    for (const Face& f : faces) v += pos[f[0]].dot(pos[f[1]].cross(pos[f[2]]));
    return v / 6.0;
}

// Flip faces (flood fill across shared edges) until every interior edge is
// traversed in opposite directions by its two faces. Operates on the subset
// face_ids of `faces`, which must be edge-manifold within the subset.
inline void make_winding_consistent(std::vector<Face>& faces, const std::vector<int>& face_ids) {
    std::unordered_map<std::uint64_t, std::array<int, 2>> inc;
    inc.reserve(face_ids.size() * 2);
    for (int fi : face_ids)
        for (int e = 0; e < 3; ++e) {
            auto& slot = inc.try_emplace(detail::edge_key(faces[fi][e], faces[fi][(e + 1) % 3]),
                                         std::array<int, 2>{-1, -1})
                             .first->second;
            (slot[0] < 0 ? slot[0] : slot[1]) = fi;
        }
    auto traverses = [&](int fi, int a, int b) {
        const Face& f = faces[fi];
        for (int e = 0; e < 3; ++e)
            if (f[e] == a && f[(e + 1) % 3] == b) return true;
        return false;
    };
    std::vector<char> seen(faces.size(), 0);
    std::vector<int> stack;
    for (int seed : face_ids) {
        if (seen[seed]) continue;
        seen[seed] = 1;
        stack.push_back(seed);
        while (!stack.empty()) {
            int fi = stack.back();
            stack.pop_back();
            for (int e = 0; e < 3; ++e) {
                int a = faces[fi][e], b = faces[fi][(e + 1) % 3];
                for (int gj : inc.at(detail::edge_key(a, b))) {
                    if (gj < 0 || gj == fi || seen[gj]) continue;
                    if (traverses(gj, a, b)) std::swap(faces[gj][1], faces[gj][2]);
                    seen[gj] = 1;
                    stack.push_back(gj);
                }
            }
        }
    }
}

// Mean over interior edges (exactly two incident faces) of 1 - cos(dihedral).
inline double normal_consistency(const std::vector<Vec3>& pos, const std::vector<Face>& faces) {
    // Map each undirected edge to its incident faces (at most two matter).
    std::unordered_map<std::uint64_t, std::array<int, 2>> inc;
    inc.reserve(faces.size() * 2);
    for (std::size_t fi = 0; fi < faces.size(); ++fi) {
        const Face& f = faces[fi];
        for (int e = 0; e < 3; ++e) {
            auto& slot = inc.try_emplace(detail::edge_key(f[e], f[(e + 1) % 3]),
                                         std::array<int, 2>{-1, -1})
                             .first->second;
            if (slot[0] < 0)
                slot[0] = static_cast<int>(fi);
            else if (slot[1] < 0)
                slot[1] = static_cast<int>(fi);
        }
    }
    std::vector<Vec3> fn(faces.size());
    for (std::size_t fi = 0; fi < faces.size(); ++fi) {
        Vec3 u = face_cross(pos, faces[fi]);
        double n = u.norm();
        if (!(n > 1e-30))
            throw geometry_error("normal_consistency: degenerate face " + std::to_string(fi));
        fn[fi] = u / n;
    }
    double acc = 0.0;
    long count = 0;
    for (const auto& [key, pair] : inc) {
        (void)key;
        if (pair[1] < 0) continue;
        acc += 1.0 - fn[pair[0]].dot(fn[pair[1]]);
        ++count;
    }
    if (count == 0) return 0.0;
    return acc / static_cast<double>(count);
}

inline bool vertex_in_structure(StructureLabel v, StructureLabel structure) {
    return v == structure || v == StructureLabel::Shared;
}

inline Submesh extract_submesh(const LabeledMesh& mesh, StructureLabel structure) {
    Submesh sub;
    std::vector<int> global_to_local(mesh.vertices.size(), -1);
    for (int fi = 0; fi < mesh.face_count(); ++fi) {
        const Face& f = mesh.faces[fi];
        bool in = true;
        for (int k = 0; k < 3; ++k)
            in = in && vertex_in_structure(mesh.structure_label[f[k]], structure);
        if (!in) continue;
        sub.face_ids.push_back(fi);
        for (int k = 0; k < 3; ++k)
            if (global_to_local[f[k]] < 0) {
                global_to_local[f[k]] = 0;  // mark; local ids assigned below
                sub.vert_ids.push_back(f[k]);
            }
    }
    std::sort(sub.vert_ids.begin(), sub.vert_ids.end());
    for (std::size_t i = 0; i < sub.vert_ids.size(); ++i)
        global_to_local[sub.vert_ids[i]] = static_cast<int>(i);
    sub.faces.reserve(sub.face_ids.size());
    for (int fi : sub.face_ids) {
        const Face& f = mesh.faces[fi];
        sub.faces.push_back({global_to_local[f[0]], global_to_local[f[1]], global_to_local[f[2]]});
    }
    return sub;
}

// Faces of the LV submesh whose three vertices all carry peripheral class c,
// restricted to LV/Shared vertices. Used by the per-region distance terms.
inline Submesh extract_peripheral_submesh(const LabeledMesh& mesh, PeripheralClass c) {
    Submesh sub;
    std::vector<int> global_to_local(mesh.vertices.size(), -1);
    for (int fi = 0; fi < mesh.face_count(); ++fi) {
        const Face& f = mesh.faces[fi];
        bool in = true;
        for (int k = 0; k < 3; ++k)
            in = in && vertex_in_structure(mesh.structure_label[f[k]], StructureLabel::Lv) &&
                 mesh.peripheral_class[f[k]] == c;
        if (!in) continue;
        sub.face_ids.push_back(fi);
        for (int k = 0; k < 3; ++k)
            if (global_to_local[f[k]] < 0) {
                global_to_local[f[k]] = 0;
                sub.vert_ids.push_back(f[k]);
            }
    }
    std::sort(sub.vert_ids.begin(), sub.vert_ids.end());
    for (std::size_t i = 0; i < sub.vert_ids.size(); ++i)
        global_to_local[sub.vert_ids[i]] = static_cast<int>(i);
    sub.faces.reserve(sub.face_ids.size());
    for (int fi : sub.face_ids) {
        const Face& f = mesh.faces[fi];
        sub.faces.push_back({global_to_local[f[0]], global_to_local[f[1]], global_to_local[f[2]]});
    }
    return sub;
}

// LV/Shared vertices of a given peripheral class, used as the fallback point
// set when the class induces no whole face.
inline std::vector<int> peripheral_vertex_ids(const LabeledMesh& mesh, PeripheralClass c) {
    std::vector<int> ids;
    for (int i = 0; i < mesh.vertex_count(); ++i)
        if (mesh.structure_label[i] != StructureLabel::Hippocampus &&
            mesh.peripheral_class[i] == c)
            ids.push_back(i);
    return ids;
}

// Full structural validation. Throws geometry_error describing the first
// violated invariant. The hippocampus-side checks are skipped for meshes with
// no hippocampus faces (mode-shape exports carry the LV submesh only).
inline void validate_labeled_mesh(const LabeledMesh& mesh) {
    const std::size_t n = mesh.vertices.size();
    if (mesh.structure_label.size() != n || mesh.peripheral_class.size() != n ||
        mesh.side.size() != n)
        throw geometry_error("mesh: per-vertex attribute arrays disagree with vertex count");
    if (n == 0) throw geometry_error("mesh: no vertices");
    for (std::size_t i = 0; i < n; ++i)
        if (!mesh.vertices[i].allFinite())
            throw geometry_error("mesh: non-finite position at vertex " + std::to_string(i));
    for (std::size_t fi = 0; fi < mesh.faces.size(); ++fi) {
        const Face& f = mesh.faces[fi];
        for (int k = 0; k < 3; ++k)
            if (f[k] < 0 || f[k] >= static_cast<int>(n))
                throw geometry_error("mesh: face " + std::to_string(fi) +
                                     " index out of range");
        if (f[0] == f[1] || f[1] == f[2] || f[0] == f[2])
            throw geometry_error("mesh: face " + std::to_string(fi) +
                                 " has repeated vertices");
    }
    for (std::size_t i = 0; i < n; ++i) {
        bool wants_class = mesh.structure_label[i] != StructureLabel::Hippocampus;
        bool has_class = mesh.peripheral_class[i] != PeripheralClass::Absent;
        if (wants_class && !has_class)
            throw geometry_error("mesh: LV/Shared vertex " + std::to_string(i) +
                                 " lacks a peripheral class");
        if (!wants_class && has_class)
            throw geometry_error("mesh: hippocampus vertex " + std::to_string(i) +
                                 " carries a peripheral class");
    }

    Submesh lv = extract_submesh(mesh, StructureLabel::Lv);
    Submesh hip = extract_submesh(mesh, StructureLabel::Hippocampus);
    auto check_closed = [](const Submesh& sub, const char* name) {
        auto counts = edge_face_counts(sub.faces);
        for (const auto& [key, cnt] : counts) {
            (void)key;
            if (cnt != 2)
                throw geometry_error(std::string("mesh: ") + name +
                                     " submesh is not closed (an edge bounds " +
                                     std::to_string(cnt) + " faces)");
        }
    };
    if (lv.empty()) throw geometry_error("mesh: LV submesh has no faces");
    check_closed(lv, "LV");
    if (!hip.empty()) check_closed(hip, "hippocampus");

    if (!hip.empty()) {
        std::vector<bool> in_lv(n, false), in_hip(n, false);
        for (int vid : lv.vert_ids) in_lv[vid] = true;
        for (int vid : hip.vert_ids) in_hip[vid] = true;
        for (std::size_t i = 0; i < n; ++i)
            if (mesh.structure_label[i] == StructureLabel::Shared && !(in_lv[i] && in_hip[i]))
                throw geometry_error("mesh: shared vertex " + std::to_string(i) +
                                     " is missing from one submesh");
        // LV vertices touching the junction must carry class Hippocampus.
        for (const Face& f : mesh.faces)
            for (int k = 0; k < 3; ++k) {
                int a = f[k], b = f[(k + 1) % 3];
                if (mesh.structure_label[a] == StructureLabel::Lv &&
                    mesh.structure_label[b] == StructureLabel::Shared &&
                    mesh.peripheral_class[a] != PeripheralClass::Hippocampus)
                    throw geometry_error("mesh: LV vertex " + std::to_string(a) +
                                         " adjacent to the shared ring must have class "
                                         "Hippocampus");
            }
    }
}

inline std::vector<Vec3> vertex_normals(const LabeledMesh& mesh) {
    return vertex_normals(mesh.vertices, mesh.faces);
}
inline Eigen::SparseMatrix<double> cotangent_laplacian(const LabeledMesh& mesh) {
    return cotangent_laplacian(mesh.vertices, mesh.faces);
}
inline EdgeStats edge_length_stats(const LabeledMesh& mesh) {
    return edge_length_stats(mesh.vertices, mesh.faces);
}
inline double normal_consistency(const LabeledMesh& mesh) {
    return normal_consistency(mesh.vertices, mesh.faces);
}

}  // namespace ventfit
