#pragma once

#include "ventfit/mesh.hpp"

#include <unordered_map>
#include <utility>
#include <vector>

namespace ventfit::detail {

// Per-submesh regularization context built once from a reference mesh.
struct RegTerm {
    bool active = false;
    std::vector<int> verts;   // global ids
    std::vector<Face> faces;  // local
    std::vector<int> face_ids;
    std::vector<Vec3> x0;     // reference local positions
    std::vector<Vec3> n0;     // reference local vertex normals
    std::vector<std::pair<int, int>> edges;            // local
    std::vector<std::pair<int, int>> edge_face_pairs;  // the two faces per edge
    std::vector<Vec3> scratch;

    void gather(const std::vector<Vec3>& x) {
        scratch.resize(verts.size());
        for (std::size_t i = 0; i < verts.size(); ++i) scratch[i] = x[verts[i]];
    }
};

struct RegWeights {
    double vert = 0.0;
    double norm = 0.0;
    double edge = 0.0;
    double cons = 0.0;
    double lap = 0.0;
};

// Raw (unweighted) regularizer values of one submesh; weights scale only the
// gradients, so callers can reweight the values freely.
struct RegValues {
    double d_vert = 0.0;
    double d_norm = 0.0;
    double edge = 0.0;
    double cons = 0.0;
    double lap = 0.0;
};

inline void init_reg_term(RegTerm& r, const Submesh& sub, const std::vector<Vec3>& ref_pos) {
    r.active = true;
    r.verts = sub.vert_ids;
    r.faces = sub.faces;
    r.face_ids = sub.face_ids;
    r.x0 = sub.positions(ref_pos);
    r.n0 = vertex_normals(r.x0, r.faces);
    r.edges = unique_edges(r.faces);
    std::unordered_map<std::uint64_t, std::pair<int, int>> first_two;
    for (int fi = 0; fi < static_cast<int>(r.faces.size()); ++fi) {
        const Face& f = r.faces[fi];
        for (int k = 0; k < 3; ++k) {
            auto key = detail::edge_key(f[k], f[(k + 1) % 3]);
            auto it = first_two.find(key);
            if (it == first_two.end()) first_two[key] = {fi, -1};
            else if (it->second.second < 0) it->second.second = fi;
        }
    }
    r.edge_face_pairs.reserve(r.edges.size());
    for (const auto& [a, b] : r.edges) {
        auto pr = first_two.at(detail::edge_key(a, b));
        if (pr.second < 0) throw geometry_error("loss: open edge in a regularized submesh");
        r.edge_face_pairs.push_back(pr);
    }
}

// All regularizers of one submesh, accumulated into `out`; the weighted
// gradient is scattered into `grad` (global indexing) when non-null.
// Gradients flow through the vertex and face normals (cross-product
// Jacobians); the Laplacian weights are frozen: recomputed per evaluation, or
// taken from `frozen` during finite-difference probing.
inline void eval_reg_term(RegTerm& r, const std::vector<Vec3>& x, const RegWeights& w,
                          RegValues& out, std::vector<Vec3>* grad,
                          Eigen::SparseMatrix<double>* lap_out,
                          const Eigen::SparseMatrix<double>* frozen = nullptr) {
    if (!r.active) return;
    r.gather(x);
    const auto& p = r.scratch;
    const std::size_t nv = r.verts.size();
    const std::size_t nf = r.faces.size();
    const std::size_t ne = r.edges.size();
    const double inv_nv = 1.0 / static_cast<double>(nv);
    const double inv_ne = 1.0 / static_cast<double>(ne);

    // Position anchor.
    double dvert = 0.0;
    for (std::size_t i = 0; i < nv; ++i) {
        Vec3 d = p[i] - r.x0[i];
        dvert += d.squaredNorm();
        if (grad) (*grad)[r.verts[i]] += w.vert * 2.0 * inv_nv * d;
    }
    out.d_vert += dvert * inv_nv;

    // Face crosses, vertex normal accumulators.
    std::vector<Vec3> cross_f(nf), accum(nv, Vec3::Zero());
    for (std::size_t fi = 0; fi < nf; ++fi) {
        const Face& f = r.faces[fi];
        cross_f[fi] = (p[f[1]] - p[f[0]]).cross(p[f[2]] - p[f[0]]);
        for (int k = 0; k < 3; ++k) accum[f[k]] += cross_f[fi];
    }

    // Normal anchor: n_i = accum_i / |accum_i| against the reference.
    std::vector<Vec3> sface(nf, Vec3::Zero());
    double dnorm = 0.0;
    std::vector<Vec3> r_i(nv);
    for (std::size_t i = 0; i < nv; ++i) {
        double len = accum[i].norm();
        if (len <= 1e-30)
            throw geometry_error("loss: degenerate vertex star at vertex " +
                                 std::to_string(r.verts[i]));
        Vec3 n = accum[i] / len;
        Vec3 d = n - r.n0[i];
        dnorm += d.squaredNorm();
        if (grad) r_i[i] = w.norm * 2.0 * inv_nv * (d - n * n.dot(d)) / len;
    }
    out.d_norm += dnorm * inv_nv;
    if (grad)
        for (std::size_t fi = 0; fi < nf; ++fi) {
            const Face& f = r.faces[fi];
            sface[fi] = r_i[f[0]] + r_i[f[1]] + r_i[f[2]];
        }

    // Fold consistency: mean over edges of 1 - cos(dihedral).
    double cons = 0.0;
    std::vector<Vec3> tface(nf, Vec3::Zero());
    {
        std::vector<double> ulen(nf);
        std::vector<Vec3> nhat(nf);
        for (std::size_t fi = 0; fi < nf; ++fi) {
            ulen[fi] = cross_f[fi].norm();
            if (ulen[fi] <= 1e-30)
                throw geometry_error("loss: degenerate face " + std::to_string(r.face_ids[fi]));
            nhat[fi] = cross_f[fi] / ulen[fi];
        }
        for (std::size_t e = 0; e < ne; ++e) {
            auto [fa, fb] = r.edge_face_pairs[e];
            cons += 1.0 - nhat[fa].dot(nhat[fb]);
            if (grad) {
                tface[fa] += nhat[fb];
                tface[fb] += nhat[fa];
            }
        }
        cons *= inv_ne;
        if (grad)
            for (std::size_t fi = 0; fi < nf; ++fi) {
                Vec3 t = tface[fi];
                sface[fi] += -w.cons * inv_ne * (t - nhat[fi] * nhat[fi].dot(t)) / ulen[fi];
            }
    }
    out.cons += cons;

    // Scatter the per-face co-vectors through the cross-product Jacobian:
    // grad_a (s . cross) = (b - c) x s, cyclically.
    if (grad)
        for (std::size_t fi = 0; fi < nf; ++fi) {
            const Face& f = r.faces[fi];
            const Vec3& s = sface[fi];
            (*grad)[r.verts[f[0]]] += (p[f[1]] - p[f[2]]).cross(s);
            (*grad)[r.verts[f[1]]] += (p[f[2]] - p[f[0]]).cross(s);
            (*grad)[r.verts[f[2]]] += (p[f[0]] - p[f[1]]).cross(s);
        }

    // Edge-length population variance.
    {
        std::vector<double> len(ne);
        double mu = 0.0;
        for (std::size_t e = 0; e < ne; ++e) {
            len[e] = (p[r.edges[e].first] - p[r.edges[e].second]).norm();
            if (len[e] <= 1e-30)
                throw geometry_error("loss: collapsed edge in regularized submesh");
            mu += len[e];
        }
        mu *= inv_ne;
        double var = 0.0;
        for (std::size_t e = 0; e < ne; ++e) {
            double d = len[e] - mu;
            var += d * d;
            if (grad) {
                Vec3 dir = (p[r.edges[e].first] - p[r.edges[e].second]) / len[e];
                Vec3 g = w.edge * 2.0 * inv_ne * d * dir;
                (*grad)[r.verts[r.edges[e].first]] += g;
                (*grad)[r.verts[r.edges[e].second]] -= g;
            }
        }
        out.edge += var * inv_ne;
    }

    // Laplacian smoothness with frozen row-normalized cotangent weights.
    {
        Eigen::SparseMatrix<double> local_lap;
        const Eigen::SparseMatrix<double>* lap = frozen;
        if (!lap) {
            local_lap = cotangent_laplacian(p, r.faces);
            lap = &local_lap;
        }
        Eigen::MatrixXd X(nv, 3);
        for (std::size_t i = 0; i < nv; ++i) X.row(i) = p[i];
        Eigen::MatrixXd LX = (*lap) * X;
        out.lap += LX.squaredNorm() * inv_nv;
        if (grad) {
            Eigen::MatrixXd G = w.lap * 2.0 * inv_nv * (lap->transpose() * LX);
            for (std::size_t i = 0; i < nv; ++i)
                (*grad)[r.verts[i]] += Vec3(G(i, 0), G(i, 1), G(i, 2));
        }
        if (lap_out) *lap_out = *lap;
    }
}

}  // namespace ventfit::detail
