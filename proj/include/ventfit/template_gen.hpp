#pragma once

#include "ventfit/mesh.hpp"
#include "ventfit/regularizers.hpp"
#include "ventfit/trimesh_bvh.hpp"

#include <array>
#include <cmath>
#include <limits>
#include <map>
#include <mutex>
#include <sstream>
#include <vector>

namespace ventfit {

// Procedural joint template: a C-curved LV tube joined to a shorter
// hippocampus tube along one shared vertex ring at the LV inferior tip.
// Rings are offset half a step per station so the tube triangles come out
// near-equilateral, caps close through vertex-count-halving reducer rings,
// and a final relaxation pass settles the mesh into the fit regularizers'
// own minimum. That matters: a template sitting above that minimum drifts
// under its own priors during every fit.
struct TemplateSpec {
    double edge_length = 1.4;           // target mean edge length, mm
    std::vector<Vec3> lv_centerline;    // control points; defaults when empty
    std::vector<Vec3> hip_centerline;   // must start at the LV centerline end
    double lv_radius_base = 6.0;
    double lv_radius_bulge = 0.8;       // extra radius at the body bulge
    double hip_radius_base = 5.2;
    double hip_radius_bulge = 0.3;
    double hip_radius_taper = 0.7;      // shrink toward the tail
    int shared_ring_count = 0;          // vertices per ring; 0 derives from edge_length
    int relax_iters = 4000;             // regularizer relaxation steps
    std::uint64_t seed = 7;
    Side side = Side::Left;
};

inline std::vector<Vec3> default_lv_centerline(Side side) {
    const double x0 = (side == Side::Left) ? -26.0 : 26.0;
    const double R = 30.0;
    const double th0 = -15.0 * M_PI / 180.0;
    const double th1 = 195.0 * M_PI / 180.0;
    std::vector<Vec3> pts;
    for (int i = 0; i < 8; ++i) {
        double th = th0 + (th1 - th0) * i / 7.0;
        pts.emplace_back(x0, R * std::cos(th), R * std::sin(th));
    }
    return pts;
}

// Continues tangent to the LV end so the junction rings stay parallel; the
// tube then curves gently lateral and anterior.
inline std::vector<Vec3> default_hip_centerline(Side side) {
    const double ls = (side == Side::Left) ? -1.0 : 1.0;
    auto lv = default_lv_centerline(side);
    Vec3 p0 = lv.back();
    Vec3 d = (lv.back() - lv[lv.size() - 2]).normalized();
    Vec3 lat(ls, 0.0, 0.0);
    return {p0,
            p0 + 12.0 * d + 1.5 * lat,
            p0 + 24.0 * d + 4.5 * lat + Vec3(0.0, 2.0, 1.5),
            p0 + 34.0 * d + 8.0 * lat + Vec3(0.0, 6.0, 4.5)};
}

namespace detail {

// Uniform Catmull-Rom with clamped endpoints; u in [0, n-1].
inline Vec3 catmull_rom_point(const std::vector<Vec3>& P, double u) {
    const int n = static_cast<int>(P.size());
    int seg = std::min(static_cast<int>(u), n - 2);
    if (seg < 0) seg = 0;
    const double s = u - seg;
    const Vec3& p0 = P[std::max(seg - 1, 0)];
    const Vec3& p1 = P[seg];
    const Vec3& p2 = P[seg + 1];
    const Vec3& p3 = P[std::min(seg + 2, n - 1)];
    return 0.5 * ((2.0 * p1) + (-p0 + p2) * s + (2.0 * p0 - 5.0 * p1 + 4.0 * p2 - p3) * s * s +
                  (-p0 + 3.0 * p1 - 3.0 * p2 + p3) * s * s * s);
}

inline std::vector<Vec3> dense_spline(const std::vector<Vec3>& ctrl) {
    const int per_seg = 64;
    const int n = per_seg * (static_cast<int>(ctrl.size()) - 1);
    std::vector<Vec3> out;
    out.reserve(n + 1);
    for (int i = 0; i <= n; ++i)
        out.push_back(catmull_rom_point(ctrl, static_cast<double>(i) / per_seg));
    return out;
}

inline double polyline_length(const std::vector<Vec3>& pts) {
    double len = 0.0;
    for (std::size_t i = 1; i < pts.size(); ++i) len += (pts[i] - pts[i - 1]).norm();
    return len;
}

inline double spline_arclength(const std::vector<Vec3>& ctrl) {
    return polyline_length(dense_spline(ctrl));
}

// Point at a given arclength along the densified spline.
struct SplineWalker {
    std::vector<Vec3> dense;
    std::vector<double> cum;

    explicit SplineWalker(const std::vector<Vec3>& ctrl) : dense(dense_spline(ctrl)) {
        cum.assign(dense.size(), 0.0);
        for (std::size_t i = 1; i < dense.size(); ++i)
            cum[i] = cum[i - 1] + (dense[i] - dense[i - 1]).norm();
    }
    double length() const { return cum.back(); }
    Vec3 at(double s) const {
        s = std::clamp(s, 0.0, cum.back());
        std::size_t j = std::upper_bound(cum.begin(), cum.end(), s) - cum.begin();
        if (j == 0) j = 1;
        if (j >= dense.size()) j = dense.size() - 1;
        double seg = cum[j] - cum[j - 1];
        double a = (seg > 0.0) ? (s - cum[j - 1]) / seg : 0.0;
        return dense[j - 1] + a * (dense[j] - dense[j - 1]);
    }
};

// One ring of vertices on a circle: count, angular phase, and the ids.
struct Ring {
    std::vector<int> ids;
    double phase = 0.0;
};

struct MeshBuilder {
    LabeledMesh mesh;
    NormalSampler jitter;
    double jit;

    MeshBuilder(std::uint64_t seed, double jitter_scale) : jitter(seed), jit(jitter_scale) {}

    int add_vertex(const Vec3& p, StructureLabel s, PeripheralClass c, Side side) {
        mesh.vertices.push_back(p + jit * Vec3(jitter(), jitter(), jitter()));
        mesh.structure_label.push_back(s);
        mesh.peripheral_class.push_back(c);
        mesh.side.push_back(side);
        return mesh.vertex_count() - 1;
    }

    // Triangulate between two rings of equal count whose phases differ by
    // exactly half an angular step (callers alternate by +-pi/m); the offset
    // sign picks which way the diagonals lean so the strip stays
    // near-equilateral. Phases are raw, not wrapped: a +pi/m and a -pi/m
    // offset are geometrically distinct strips.
    void emit_strip(const Ring& a, const Ring& b) {
        const int m = static_cast<int>(a.ids.size());
        const double d = b.phase - a.phase;
        for (int k = 0; k < m; ++k) {
            int k1 = (k + 1) % m;
            if (d > 0) {
                mesh.faces.push_back({a.ids[k], a.ids[k1], b.ids[k]});
                mesh.faces.push_back({a.ids[k1], b.ids[k1], b.ids[k]});
            } else {
                mesh.faces.push_back({a.ids[k], a.ids[k1], b.ids[k1]});
                mesh.faces.push_back({a.ids[k], b.ids[k1], b.ids[k]});
            }
        }
    }

    // Triangulate from a ring of 2m vertices down to m; inner vertex k sits
    // at the mid-angle of outer pair (2k, 2k+1).
    void emit_reducer(const Ring& outer, const Ring& inner) {
        const int m = static_cast<int>(inner.ids.size());
        for (int k = 0; k < m; ++k) {
            int o0 = outer.ids[2 * k], o1 = outer.ids[2 * k + 1],
                o2 = outer.ids[(2 * k + 2) % (2 * m)];
            int i0 = inner.ids[k], i1 = inner.ids[(k + 1) % m];
            mesh.faces.push_back({o0, o1, i0});
            mesh.faces.push_back({o1, i1, i0});
            mesh.faces.push_back({o1, o2, i1});
        }
    }

    void emit_fan(const Ring& ring, int apex) {
        const int m = static_cast<int>(ring.ids.size());
        for (int k = 0; k < m; ++k)
            mesh.faces.push_back({apex, ring.ids[k], ring.ids[(k + 1) % m]});
    }
};

// Close an open ring with a spherical dome of height `bulge * r`, stepping
// through latitude rings and halving the vertex count whenever the
// circumference gets tight, finishing with a small fan.
template <typename Classify>
inline void emit_dome(MeshBuilder& b, const Ring& boundary, const Vec3& center, const Vec3& e1,
                      const Vec3& e2, const Vec3& axis, double r, double bulge,
                      Classify&& classify) {
    const double rho = r * (1.0 + bulge * bulge) / (2.0 * bulge);
    const Vec3 sphere_c = center + axis * (bulge * r - rho);
    const double theta0 = std::asin(std::clamp(r / rho, 0.0, 1.0));
    const double base_edge = 2.0 * M_PI * r / static_cast<double>(boundary.ids.size());

    Ring cur = boundary;
    double theta = theta0;
    while (true) {
        int m = static_cast<int>(cur.ids.size());
        double circ = 2.0 * M_PI * rho * std::sin(theta) / m;
        double step = 0.8660254037844386 * std::min(circ, base_edge) / rho;
        double next = theta - step;
        if (next * rho < 0.75 * base_edge || m <= 6) {
            auto [sl, pc, sd] = classify(center + axis * (bulge * r));
            int apex = b.add_vertex(sphere_c + axis * rho, sl, pc, sd);
            b.emit_fan(cur, apex);
            return;
        }
        bool reduce = m >= 10 && m % 2 == 0 &&
                      2.0 * M_PI * rho * std::sin(next) / m < 0.62 * base_edge;
        int m2 = reduce ? m / 2 : m;
        double phase2 = cur.phase + (reduce ? M_PI / m : M_PI / m2);
        Ring nxt;
        nxt.phase = phase2;
        for (int k = 0; k < m2; ++k) {
            double ang = phase2 + 2.0 * M_PI * k / m2;
            Vec3 p = sphere_c +
                     rho * (std::sin(next) * (std::cos(ang) * e1 + std::sin(ang) * e2) +
                            std::cos(next) * axis);
            auto [sl, pc, sd] = classify(p);
            nxt.ids.push_back(b.add_vertex(p, sl, pc, sd));
        }
        if (reduce) b.emit_reducer(cur, nxt);
        else b.emit_strip(cur, nxt);
        cur = nxt;
        theta = next;
    }
}

// Settles the freshly built mesh into a minimum of the fit's own
// regularizers (per-submesh edge-length variance, fold consistency,
// Laplacian smoothness, with the fit's weights) under a weak positional
// tether. The fit re-anchors its position and normal terms at the relaxed
// state, so any regularizer descent left over here reappears during every
// fit as a drift off the template; relaxing against the same terms removes
// that drift at the source. The tether must stay weak: at equilibrium the
// leftover regularizer force equals the tether force.
inline void relax_template(LabeledMesh& mesh, int iters) {
    if (iters <= 0) return;
    std::array<detail::RegTerm, 2> reg;
    std::array<Eigen::SparseMatrix<double>, 2> lap;
    int nsub = 0;
    for (StructureLabel s : {StructureLabel::Lv, StructureLabel::Hippocampus}) {
        Submesh sub = extract_submesh(mesh, s);
        if (sub.empty()) continue;
        detail::init_reg_term(reg[nsub++], sub, mesh.vertices);
    }
    detail::RegWeights w;
    w.vert = 0.25;    // tether to the built mesh
    w.norm = 0.0;     // normal motion is the point of this pass
    w.edge = 1000.0;  // fit weights from here down
    w.cons = 100.0;
    w.lap = 300.0;
    std::vector<Vec3>& x = mesh.vertices;
    const double nv = static_cast<double>(x.size());
    std::vector<Vec3> grad(x.size());
    const double step = 1.2e-3 * edge_length_stats(x, mesh.faces).mean;
    const int lap_refresh = 10;  // cotangent weights drift slowly; rebuilding
                                 // every step would dominate the cost
    for (int it = 0; it < iters; ++it) {
        if (it % lap_refresh == 0)
            for (int si = 0; si < nsub; ++si) {
                reg[si].gather(x);
                lap[si] = cotangent_laplacian(reg[si].scratch, reg[si].faces);
            }
        grad.assign(x.size(), Vec3::Zero());
        detail::RegValues v;
        for (int si = 0; si < nsub; ++si)
            detail::eval_reg_term(reg[si], x, w, v, &grad, nullptr, &lap[si]);
        double ms = 0.0;
        for (const Vec3& g : grad) ms += g.squaredNorm();
        double rms = std::sqrt(ms / nv);
        if (!(rms > 1e-14)) break;
        // Linear step decay lets the mesh settle instead of oscillating at
        // the fixed-step amplitude.
        double s = step * (1.0 - static_cast<double>(it) / iters);
        for (std::size_t i = 0; i < x.size(); ++i) x[i] -= s / rms * grad[i];
    }
}

// The hippocampus class must mark only LV vertices whose surface actually
// runs close to the hippocampus: a labeled scan shows the hip code next to
// the LV boundary nowhere else, and a class band wider than the true
// adjacency would chase a handful of junction points during fitting. Runs on
// final (relaxed) geometry; band vertices left outside the collar fall back
// to white matter, the enclosing tissue.
inline void assign_hip_adjacency_class(LabeledMesh& mesh, double collar_mm) {
    Submesh hip = extract_submesh(mesh, StructureLabel::Hippocampus);
    if (hip.empty()) return;
    std::vector<Vec3> hip_pos = hip.positions(mesh.vertices);
    TriangleBvh bvh(hip.faces, hip_pos);
    std::vector<Vec3> outward(hip.faces.size());
    for (std::size_t f = 0; f < hip.faces.size(); ++f)
        outward[f] = face_cross(hip_pos, hip.faces[f]).normalized();
    for (int i = 0; i < mesh.vertex_count(); ++i) {
        if (mesh.structure_label[i] != StructureLabel::Lv) continue;
        TriangleBvh::Hit hit = bvh.nearest(mesh.vertices[i]);
        Vec3 d = mesh.vertices[i] - hit.tp.point;
        // The junction dome bulges into the hip tube; inside counts as
        // adjacent regardless of distance to the surface.
        bool inside = d.dot(outward[hit.face]) < 0.0;
        if (inside || d.norm() <= collar_mm)
            mesh.peripheral_class[i] = PeripheralClass::Hippocampus;
        else if (mesh.peripheral_class[i] == PeripheralClass::Hippocampus)
            mesh.peripheral_class[i] = PeripheralClass::WhiteMatter;
    }
}

inline LabeledMesh build_template(const TemplateSpec& spec, int n) {
    SplineWalker lv_walk(spec.lv_centerline);
    SplineWalker hip_walk(spec.hip_centerline);
    const double arc_lv = lv_walk.length();
    const double arc_hip = hip_walk.length();

    auto lv_radius = [&](double t) {
        return spec.lv_radius_base +
               spec.lv_radius_bulge * std::exp(-((t - 0.55) / 0.25) * ((t - 0.55) / 0.25));
    };
    const double r_shared = lv_radius(1.0);
    auto hip_radius = [&](double t) {
        double own = spec.hip_radius_base + spec.hip_radius_bulge * std::sin(M_PI * t) -
                     spec.hip_radius_taper * t;
        double w = std::clamp(t / 0.2, 0.0, 1.0);  // blend off the junction radius
        w = w * w * (3.0 - 2.0 * w);
        return (1.0 - w) * r_shared + w * own;
    };

    // Station arclengths: march each tube with local spacing sqrt(3)/2 times
    // the local circumferential edge, then scale to land exactly on the ends.
    auto stations = [&](SplineWalker& walk, auto&& radius_of) {
        std::vector<double> s{0.0};
        const double arc = walk.length();
        while (s.back() < arc) {
            double t = s.back() / arc;
            double circ = 2.0 * M_PI * radius_of(t) / n;
            if (!(circ > 1e-6)) throw parameter_error("template: radius profile vanishes");
            s.push_back(s.back() + 0.8660254037844386 * circ);
        }
        // Snap the overshoot back onto the end.
        double scale = arc / s.back();
        for (double& v : s) v *= scale;
        return s;
    };
    auto s_lv = stations(lv_walk, lv_radius);
    auto s_hip = stations(hip_walk, hip_radius);
    if (s_lv.size() < 4 || s_hip.size() < 3)
        throw parameter_error("template: tubes need more rings; lower edge_length");

    // Station chain: LV rings then hippocampus rings; the last LV ring is
    // the shared ring and doubles as hippocampus ring 0.
    struct Station {
        Vec3 center;
        double radius;
        double t;     // normalized along its own tube
        bool lv;
    };
    std::vector<Station> st;
    for (double s : s_lv) st.push_back({lv_walk.at(s), lv_radius(s / arc_lv), s / arc_lv, true});
    for (std::size_t i = 1; i < s_hip.size(); ++i)
        st.push_back({hip_walk.at(s_hip[i]), hip_radius(s_hip[i] / arc_hip),
                      s_hip[i] / arc_hip, false});
    const int n_st = static_cast<int>(st.size());
    const int shared_i = static_cast<int>(s_lv.size()) - 1;

    std::vector<Vec3> tangents(n_st);
    for (int i = 0; i < n_st; ++i) {
        const Vec3& a = st[std::max(i - 1, 0)].center;
        const Vec3& b = st[std::min(i + 1, n_st - 1)].center;
        Vec3 t = b - a;
        double nrm = t.norm();
        if (!(nrm > 1e-12)) throw geometry_error("template: coincident centerline stations");
        tangents[i] = t / nrm;
    }

    // Parallel-transport frames keep ring vertex k tracking one side of the
    // tube, which the angular peripheral sectors rely on.
    std::vector<Vec3> e1(n_st), e2(n_st);
    Vec3 ref = (std::abs(tangents[0].x()) < 0.9) ? Vec3(1, 0, 0) : Vec3(0, 1, 0);
    e1[0] = (ref - tangents[0] * ref.dot(tangents[0])).normalized();
    for (int i = 1; i < n_st; ++i) {
        Vec3 axis = tangents[i - 1].cross(tangents[i]);
        double sin_a = axis.norm();
        double cos_a = std::clamp(tangents[i - 1].dot(tangents[i]), -1.0, 1.0);
        Vec3 v = e1[i - 1];
        if (sin_a > 1e-12) {
            Vec3 k = axis / sin_a;
            v = v * cos_a + k.cross(v) * sin_a + k * k.dot(v) * (1.0 - cos_a);
        }
        e1[i] = (v - tangents[i] * v.dot(tangents[i])).normalized();
    }
    for (int i = 0; i < n_st; ++i) e2[i] = tangents[i].cross(e1[i]);

    const Vec3 medial_dir = (spec.side == Side::Left) ? Vec3(1, 0, 0) : Vec3(-1, 0, 0);
    // LV peripheral sectors: medial face reads the opposite ventricle;
    // otherwise class follows position along the tube. The hippocampus class
    // is assigned afterwards from actual adjacency to the hip tube.
    auto classify_lv = [&](double t, const Vec3& radial) {
        if (radial.dot(medial_dir) > 0.5) return PeripheralClass::OppositeLv;
        if (t < 1.0 / 3.0) return PeripheralClass::Caudate;
        if (t < 2.0 / 3.0) return PeripheralClass::WhiteMatter;
        return PeripheralClass::Thalamus;
    };

    MeshBuilder b(spec.seed, 1e-3 * spec.edge_length);
    std::vector<Ring> rings(n_st);
    for (int i = 0; i < n_st; ++i) {
        rings[i].phase = (i % 2) * M_PI / n;
        for (int k = 0; k < n; ++k) {
            double ang = rings[i].phase + 2.0 * M_PI * k / n;
            Vec3 radial = std::cos(ang) * e1[i] + std::sin(ang) * e2[i];
            Vec3 p = st[i].center + st[i].radius * radial;
            StructureLabel sl;
            PeripheralClass pc;
            if (i < shared_i) {
                sl = StructureLabel::Lv;
                pc = classify_lv(st[i].t, radial);
            } else if (i == shared_i) {
                sl = StructureLabel::Shared;
                pc = PeripheralClass::Hippocampus;
            } else {
                sl = StructureLabel::Hippocampus;
                pc = PeripheralClass::Absent;
            }
            rings[i].ids.push_back(b.add_vertex(p, sl, pc, spec.side));
        }
    }
    for (int i = 0; i + 1 < n_st; ++i) b.emit_strip(rings[i], rings[i + 1]);

    // Four dome caps: both tube ends, plus twin inward domes at the shared
    // ring closing each submesh against the other. Winding is repaired
    // globally afterwards, so emission order does not matter here.
    emit_dome(b, rings[0], st[0].center, e1[0], e2[0], -tangents[0], st[0].radius, 0.6,
              [&](const Vec3& p) {
                  Vec3 radial = p - st[0].center;
                  radial -= tangents[0] * radial.dot(tangents[0]);
                  if (radial.squaredNorm() > 1e-12) radial.normalize();
                  return std::tuple(StructureLabel::Lv, classify_lv(0.0, radial), spec.side);
              });
    emit_dome(b, rings[shared_i], st[shared_i].center, e1[shared_i], e2[shared_i],
              -tangents[shared_i], st[shared_i].radius, 0.45, [&](const Vec3& p) {
                  Vec3 radial = p - st[shared_i].center;
                  radial -= tangents[shared_i] * radial.dot(tangents[shared_i]);
                  if (radial.squaredNorm() > 1e-12) radial.normalize();
                  return std::tuple(StructureLabel::Lv, classify_lv(1.0, radial), spec.side);
              });
    emit_dome(b, rings[shared_i], st[shared_i].center, e1[shared_i], e2[shared_i],
              tangents[shared_i], st[shared_i].radius, 0.45, [&](const Vec3&) {
                  return std::tuple(StructureLabel::Hippocampus, PeripheralClass::Absent,
                                    spec.side);
              });
    emit_dome(b, rings[n_st - 1], st[n_st - 1].center, e1[n_st - 1], e2[n_st - 1],
              tangents[n_st - 1], st[n_st - 1].radius, 0.6, [&](const Vec3&) {
                  return std::tuple(StructureLabel::Hippocampus, PeripheralClass::Absent,
                                    spec.side);
              });

    LabeledMesh mesh = std::move(b.mesh);

    // Make winding consistent within each closed submesh (caps are emitted
    // without regard to the strips' orientation), then orient outward.
    for (StructureLabel s : {StructureLabel::Lv, StructureLabel::Hippocampus}) {
        Submesh sub = extract_submesh(mesh, s);
        if (sub.empty()) continue;
        make_winding_consistent(mesh.faces, sub.face_ids);
        sub = extract_submesh(mesh, s);
        if (signed_volume(sub.positions(mesh.vertices), sub.faces) < 0.0)
            for (int fi : sub.face_ids) std::swap(mesh.faces[fi][1], mesh.faces[fi][2]);
    }
    relax_template(mesh, spec.relax_iters);
    assign_hip_adjacency_class(mesh, 3.0);
    return mesh;
}

}  // namespace detail

inline LabeledMesh generate_synthetic_joint_template(TemplateSpec spec) {
    if (!(spec.edge_length > 0.0))
        throw parameter_error("template: edge_length must be positive");
    if (spec.lv_centerline.empty()) spec.lv_centerline = default_lv_centerline(spec.side);
    if (spec.hip_centerline.empty()) spec.hip_centerline = default_hip_centerline(spec.side);
    if (spec.lv_centerline.size() < 2 || spec.hip_centerline.size() < 2)
        throw parameter_error("template: centerlines need at least 2 control points");
    if ((spec.lv_centerline.back() - spec.hip_centerline.front()).norm() > 1e-9)
        throw parameter_error("template: hippocampus centerline must start at the LV end");
    if (spec.lv_radius_base <= 0.0 || spec.hip_radius_base <= 0.0)
        throw parameter_error("template: radius profiles must be positive");

    int n = spec.shared_ring_count;
    if (n == 0) {
        double r_mid = spec.lv_radius_base + 0.5 * spec.lv_radius_bulge;
        n = static_cast<int>(std::lround(2.0 * M_PI * r_mid / spec.edge_length / 4.0)) * 4;
        n = std::max(n, 12);
    }
    if (n < 8) throw parameter_error("template: shared ring needs at least 8 vertices");
    if (n % 2 != 0) throw parameter_error("template: ring vertex count must be even");

    LabeledMesh mesh = detail::build_template(spec, n);
    validate_labeled_mesh(mesh);
    return mesh;
}

// Generation is deterministic but not free (the relaxation dominates), so
// callers needing the same spec repeatedly share one build per process.
inline const LabeledMesh& cached_joint_template(const TemplateSpec& spec) {
    std::ostringstream key;
    key.precision(17);
    auto put_pts = [&key](const std::vector<Vec3>& pts) {
        key << pts.size() << ':';
        for (const Vec3& p : pts) key << p.x() << ',' << p.y() << ',' << p.z() << ';';
    };
    key << spec.edge_length << '|';
    put_pts(spec.lv_centerline);
    put_pts(spec.hip_centerline);
    key << spec.lv_radius_base << '|' << spec.lv_radius_bulge << '|' << spec.hip_radius_base
        << '|' << spec.hip_radius_bulge << '|' << spec.hip_radius_taper << '|'
        << spec.shared_ring_count << '|' << spec.relax_iters << '|' << spec.seed << '|'
        << static_cast<int>(spec.side);

    static std::mutex mu;
    static std::map<std::string, LabeledMesh> cache;
    std::lock_guard<std::mutex> lock(mu);
    auto it = cache.find(key.str());
    if (it == cache.end())
        it = cache.emplace(key.str(), generate_synthetic_joint_template(spec)).first;
    return it->second;
}

}  // namespace ventfit
