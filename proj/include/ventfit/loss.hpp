#pragma once

#include "ventfit/chamfer.hpp"
#include "ventfit/mesh.hpp"
#include "ventfit/optimizer.hpp"
#include "ventfit/regularizers.hpp"
#include "ventfit/target.hpp"
#include "ventfit/trimesh_bvh.hpp"

#include <nlohmann/json.hpp>

#include <array>
#include <cmath>
#include <memory>
#include <unordered_map>
#include <vector>

namespace ventfit {

// Mean over points of squared distance to the nearest triangle.
inline double point_to_mesh_loss(const std::vector<Vec3>& points, const std::vector<Vec3>& pos,
                                 const std::vector<Face>& faces) {
    if (points.empty()) throw empty_target_error("point_to_mesh_loss: empty point set");
    if (faces.empty()) throw parameter_error("point_to_mesh_loss: empty mesh");
    TriangleBvh bvh(faces, pos);
    double sum = 0.0;
    for (const Vec3& p : points) sum += bvh.nearest(p).tp.d2;
    return sum / static_cast<double>(points.size());
}

// Mean over mesh vertices of squared distance to the nearest point.
inline double mesh_to_point_loss(const std::vector<Vec3>& vertices,
                                 const std::vector<Vec3>& points) {
    if (points.empty()) throw empty_target_error("mesh_to_point_loss: empty point set");
    if (vertices.empty()) throw parameter_error("mesh_to_point_loss: no vertices");
    KdTree tree(points);
    double sum = 0.0;
    for (const Vec3& v : vertices) sum += tree.nearest(v).second;
    return sum / static_cast<double>(vertices.size());
}

// Peripheral classes carrying their own distance terms, in breakdown order.
inline constexpr std::array<PeripheralClass, 4> kPeriLossClasses = {
    PeripheralClass::WhiteMatter, PeripheralClass::Thalamus, PeripheralClass::Caudate,
    PeripheralClass::OppositeLv};

struct DistanceTerm {
    double cf = 0.0;  // symmetric vertex chamfer (squared, mean-reduced)
    double pm = 0.0;  // target point to nearest submesh triangle
    double mp = 0.0;  // submesh vertex to nearest target point
    bool present = false;

    double weighted(const FitConfig& c) const {
        return present ? c.lambda_cf * cf + c.lambda_pm * pm + c.lambda_mp * mp : 0.0;
    }
};

// Unweighted loss components; total is the weighted sum. Regularization
// values are sums of the per-submesh means (LV plus hippocampus).
struct LossBreakdown {
    DistanceTerm lv;
    DistanceTerm hip;
    std::array<DistanceTerm, 4> peri;
    double d_vert = 0.0;
    double d_norm = 0.0;
    double edge = 0.0;
    double cons = 0.0;
    double lap = 0.0;
    double total = 0.0;

    double weighted_sum(const FitConfig& c) const {
        double t = lv.weighted(c) + hip.weighted(c);
        for (const auto& p : peri) t += p.weighted(c);
        t += c.lambda_vert * d_vert + c.lambda_norm * d_norm + c.lambda_edge * edge +
             c.lambda_cons * cons + c.lambda_lap * lap;
        return t;
    }
};

// Correspondences and curvature weights captured by one evaluation. The
// gradient returned by evaluate() is the exact derivative of the loss with
// these held fixed (nearest neighbors, nearest faces, Laplacian weights),
// which is the envelope subgradient of the full objective.
struct TermAssignment {
    std::vector<int> vert_to_target;  // per term vertex
    std::vector<int> target_to_vert;  // per target point
    std::vector<int> target_to_face;  // per target point; -1 = vertex fallback
};

struct EvalRecord {
    TermAssignment lv;
    TermAssignment hip;
    std::array<TermAssignment, 4> peri;
    Eigen::SparseMatrix<double> lap_lv;
    Eigen::SparseMatrix<double> lap_hip;
};

inline FitConfig fit_config_from_json(const nlohmann::json& j) {
    FitConfig c;
    static const char* known[] = {"lambda_cf",   "lambda_pm",   "lambda_mp",  "lambda_vert",
                                  "lambda_norm", "lambda_edge", "lambda_cons", "lambda_lap",
                                  "initial_lr",  "total_iters", "halve_every", "beta1",
                                  "beta2",       "eps",         "weight_decay", "peri_enabled",
                                  "joint_enabled"};
    for (auto it = j.begin(); it != j.end(); ++it) {
        bool ok = false;
        for (const char* k : known) ok = ok || it.key() == k;
        if (!ok) throw parameter_error("fit config: unknown field '" + it.key() + "'");
    }
    auto num = [&](const char* k, double& dst) {
        if (j.contains(k)) dst = j.at(k).get<double>();
    };
    auto integer = [&](const char* k, int& dst) {
        if (j.contains(k)) dst = j.at(k).get<int>();
    };
    auto flag = [&](const char* k, bool& dst) {
        if (j.contains(k)) dst = j.at(k).get<bool>();
    };
    num("lambda_cf", c.lambda_cf);
    num("lambda_pm", c.lambda_pm);
    num("lambda_mp", c.lambda_mp);
    num("lambda_vert", c.lambda_vert);
    num("lambda_norm", c.lambda_norm);
    num("lambda_edge", c.lambda_edge);
    num("lambda_cons", c.lambda_cons);
    num("lambda_lap", c.lambda_lap);
    num("initial_lr", c.initial_lr);
    integer("total_iters", c.total_iters);
    integer("halve_every", c.halve_every);
    num("beta1", c.beta1);
    num("beta2", c.beta2);
    num("eps", c.eps);
    num("weight_decay", c.weight_decay);
    flag("peri_enabled", c.peri_enabled);
    flag("joint_enabled", c.joint_enabled);
    validate_fit_config(c);
    return c;
}

namespace detail {

// One distance term: a template vertex subset with (possibly empty) induced
// faces against a static target point subset. When no faces exist the
// point-to-mesh direction falls back to point-to-vertex distances.
struct DistTerm {
    bool active = false;           // participates in loss at all
    std::vector<int> verts;        // global vertex ids (chamfer and mp sides)
    std::vector<Face> faces;       // local over verts
    std::vector<Vec3> targets;     // static target subset
    std::unique_ptr<KdTree> target_tree;
    std::unique_ptr<TriangleBvh> bvh;
    std::vector<Vec3> scratch;     // gathered current positions (BVH views this)

    void gather(const std::vector<Vec3>& x) {
        scratch.resize(verts.size());
        for (std::size_t i = 0; i < verts.size(); ++i) scratch[i] = x[verts[i]];
    }
};

}  // namespace detail

class LossEvaluator {
public:
    LossEvaluator(const LabeledMesh& template_mesh, const LabeledPointCloud& target,
                  const FitConfig& config)
        : mesh_(template_mesh), cfg_(config) {
        validate_fit_config(cfg_);
        validate_labeled_mesh(mesh_);
        validate_point_cloud(target);

        auto lv_sub = extract_submesh(mesh_, StructureLabel::Lv);
        auto hip_sub = extract_submesh(mesh_, StructureLabel::Hippocampus);
        const bool hip_present = !hip_sub.empty() && cfg_.joint_enabled;
        if (cfg_.joint_enabled && hip_sub.empty())
            throw parameter_error("loss: joint term enabled but the template has no hippocampus");

        std::vector<Vec3> lv_targets, hip_targets;
        std::array<std::vector<Vec3>, 4> peri_targets;
        for (std::size_t i = 0; i < target.size(); ++i) {
            if (target.source[i] == StructureLabel::Lv) {
                lv_targets.push_back(target.points[i]);
                for (std::size_t k = 0; k < kPeriLossClasses.size(); ++k)
                    if (target.peri[i] == kPeriLossClasses[k])
                        peri_targets[k].push_back(target.points[i]);
            } else {
                hip_targets.push_back(target.points[i]);
            }
        }
        if (lv_targets.empty()) throw empty_target_error("loss: no LV target points");
        if (cfg_.joint_enabled && hip_targets.empty())
            throw empty_target_error("loss: no hippocampus target points");

        init_dist_term(lv_, lv_sub.vert_ids, lv_sub.faces, std::move(lv_targets), true);
        if (hip_present)
            init_dist_term(hip_, hip_sub.vert_ids, hip_sub.faces, std::move(hip_targets), true);
        if (cfg_.peri_enabled)
            for (std::size_t k = 0; k < kPeriLossClasses.size(); ++k) {
                auto ids = peripheral_vertex_ids(mesh_, kPeriLossClasses[k]);
                if (ids.empty() || peri_targets[k].empty()) continue;  // absent: no pull
                auto sub = extract_peripheral_submesh(mesh_, kPeriLossClasses[k]);
                // Re-index the induced faces onto the full class vertex list.
                std::vector<int> local_of(mesh_.vertex_count(), -1);
                for (std::size_t i = 0; i < ids.size(); ++i) local_of[ids[i]] = static_cast<int>(i);
                std::vector<Face> faces;
                faces.reserve(sub.faces.size());
                for (const Face& f : sub.faces)
                    faces.push_back({local_of[sub.vert_ids[f[0]]], local_of[sub.vert_ids[f[1]]],
                                     local_of[sub.vert_ids[f[2]]]});
                init_dist_term(peri_[k], ids, faces, std::move(peri_targets[k]), true);
            }

        init_reg_term(reg_lv_, lv_sub);
        if (hip_present) init_reg_term(reg_hip_, hip_sub);
    }

    const LabeledMesh& mesh() const { return mesh_; }
    const FitConfig& config() const { return cfg_; }

    // Fresh correspondences, loss value, and (optionally) the analytic
    // gradient of the loss with those correspondences and the current
    // Laplacian weights held fixed. Single-threaded: reuses scratch buffers.
    LossBreakdown evaluate(const std::vector<Vec3>& x, std::vector<Vec3>* grad = nullptr,
                           EvalRecord* record = nullptr) {
        check_positions(x);
        if (grad) grad->assign(x.size(), Vec3::Zero());
        LossBreakdown out;

        eval_dist(lv_, x, out.lv, grad, record ? &record->lv : nullptr);
        eval_dist(hip_, x, out.hip, grad, record ? &record->hip : nullptr);
        for (std::size_t k = 0; k < peri_.size(); ++k)
            eval_dist(peri_[k], x, out.peri[k], grad, record ? &record->peri[k] : nullptr);

        eval_reg(reg_lv_, x, out, grad, record ? &record->lap_lv : nullptr);
        eval_reg(reg_hip_, x, out, grad, record ? &record->lap_hip : nullptr);

        out.total = out.weighted_sum(cfg_);
        if (!std::isfinite(out.total))
            throw numerical_error("loss: non-finite total loss");
        return out;
    }

    // Loss value at x under the recorded correspondences and Laplacian
    // weights. The analytic gradient from evaluate() is the exact derivative
    // of this function at the recording point.
    LossBreakdown evaluate_frozen(const std::vector<Vec3>& x, const EvalRecord& record) {
        check_positions(x);
        LossBreakdown out;
        eval_dist_frozen(lv_, x, record.lv, out.lv);
        eval_dist_frozen(hip_, x, record.hip, out.hip);
        for (std::size_t k = 0; k < peri_.size(); ++k)
            eval_dist_frozen(peri_[k], x, record.peri[k], out.peri[k]);
        eval_reg(reg_lv_, x, out, nullptr, nullptr, &record.lap_lv);
        eval_reg(reg_hip_, x, out, nullptr, nullptr, &record.lap_hip);
        out.total = out.weighted_sum(cfg_);
        return out;
    }

private:
    void check_positions(const std::vector<Vec3>& x) const {
        if (x.size() != mesh_.vertices.size())
            throw parameter_error("loss: position count differs from the template");
        for (const Vec3& p : x)
            if (!p.allFinite()) throw numerical_error("loss: non-finite vertex position");
    }

    void init_dist_term(detail::DistTerm& t, std::vector<int> verts, std::vector<Face> faces,
                        std::vector<Vec3> targets, bool active) {
        t.active = active && !verts.empty() && !targets.empty();
        if (!t.active) return;
        t.verts = std::move(verts);
        t.faces = std::move(faces);
        t.targets = std::move(targets);
        t.target_tree = std::make_unique<KdTree>(t.targets);
        if (!t.faces.empty()) {
            t.gather(mesh_.vertices);
            t.bvh = std::make_unique<TriangleBvh>(t.faces, t.scratch);
        }
    }

    void init_reg_term(detail::RegTerm& r, const Submesh& sub) {
        detail::init_reg_term(r, sub, mesh_.vertices);
    }

    // Chamfer A-side and mp share assignments (both are vertex-to-target
    // nearest neighbors); pm adds the triangle projection, or reuses the
    // point-to-vertex assignment when the term induces no faces.
    void eval_dist(detail::DistTerm& t, const std::vector<Vec3>& x, DistanceTerm& out,
                   std::vector<Vec3>* grad, TermAssignment* assign) {
        if (!t.active) return;
        t.gather(x);
        const double inv_v = 1.0 / static_cast<double>(t.verts.size());
        const double inv_t = 1.0 / static_cast<double>(t.targets.size());

        TermAssignment local;
        TermAssignment& rec = assign ? *assign : local;
        rec.vert_to_target.resize(t.verts.size());
        rec.target_to_vert.resize(t.targets.size());
        rec.target_to_face.assign(t.targets.size(), -1);

        double cf_a = 0.0;
        for (std::size_t i = 0; i < t.verts.size(); ++i) {
            auto [j, d2] = t.target_tree->nearest(t.scratch[i]);
            rec.vert_to_target[i] = j;
            cf_a += d2;
            if (grad) {
                Vec3 g = 2.0 * inv_v * (cfg_.lambda_cf + cfg_.lambda_mp) *
                         (t.scratch[i] - t.targets[j]);
                (*grad)[t.verts[i]] += g;
            }
        }
        cf_a *= inv_v;

        KdTree cur_tree(t.scratch);
        double cf_b = 0.0;
        for (std::size_t j = 0; j < t.targets.size(); ++j) {
            auto [i, d2] = cur_tree.nearest(t.targets[j]);
            rec.target_to_vert[j] = i;
            cf_b += d2;
            if (grad)
                (*grad)[t.verts[i]] +=
                    2.0 * inv_t * cfg_.lambda_cf * (t.scratch[i] - t.targets[j]);
        }
        cf_b *= inv_t;

        double pm = 0.0;
        if (t.bvh) {
            t.bvh->refit(t.scratch);
            for (std::size_t j = 0; j < t.targets.size(); ++j) {
                auto hit = t.bvh->nearest(t.targets[j]);
                rec.target_to_face[j] = hit.face;
                pm += hit.tp.d2;
                if (grad) {
                    const Face& f = t.faces[hit.face];
                    Vec3 diff = 2.0 * inv_t * cfg_.lambda_pm * (hit.tp.point - t.targets[j]);
                    for (int k = 0; k < 3; ++k)
                        (*grad)[t.verts[f[k]]] += hit.tp.bary[k] * diff;
                }
            }
            pm *= inv_t;
        } else {
            // Vertex fallback: same assignments as the chamfer B-side.
            pm = cf_b;
            if (grad)
                for (std::size_t j = 0; j < t.targets.size(); ++j) {
                    int i = rec.target_to_vert[j];
                    (*grad)[t.verts[i]] +=
                        2.0 * inv_t * cfg_.lambda_pm * (t.scratch[i] - t.targets[j]);
                }
        }

        out.cf = cf_a + cf_b;
        out.mp = cf_a;
        out.pm = pm;
        out.present = true;
    }

    void eval_dist_frozen(detail::DistTerm& t, const std::vector<Vec3>& x,
                          const TermAssignment& rec, DistanceTerm& out) {
        if (!t.active) return;
        t.gather(x);
        const double inv_v = 1.0 / static_cast<double>(t.verts.size());
        const double inv_t = 1.0 / static_cast<double>(t.targets.size());
        double cf_a = 0.0;
        for (std::size_t i = 0; i < t.verts.size(); ++i)
            cf_a += (t.scratch[i] - t.targets[rec.vert_to_target[i]]).squaredNorm();
        cf_a *= inv_v;
        double cf_b = 0.0;
        for (std::size_t j = 0; j < t.targets.size(); ++j)
            cf_b += (t.scratch[rec.target_to_vert[j]] - t.targets[j]).squaredNorm();
        cf_b *= inv_t;
        double pm = 0.0;
        if (!t.faces.empty()) {
            for (std::size_t j = 0; j < t.targets.size(); ++j) {
                const Face& f = t.faces[rec.target_to_face[j]];
                pm += closest_point_on_triangle(t.targets[j], t.scratch[f[0]], t.scratch[f[1]],
                                                t.scratch[f[2]])
                          .d2;
            }
            pm *= inv_t;
        } else {
            pm = cf_b;
        }
        out.cf = cf_a + cf_b;
        out.mp = cf_a;
        out.pm = pm;
        out.present = true;
    }

    // All regularizers of one submesh, accumulated into the breakdown with
    // the configured weights applied to the gradient.
    void eval_reg(detail::RegTerm& r, const std::vector<Vec3>& x, LossBreakdown& out,
                  std::vector<Vec3>* grad, Eigen::SparseMatrix<double>* lap_out,
                  const Eigen::SparseMatrix<double>* frozen = nullptr) {
        detail::RegWeights w{cfg_.lambda_vert, cfg_.lambda_norm, cfg_.lambda_edge,
                             cfg_.lambda_cons, cfg_.lambda_lap};
        detail::RegValues v;
        detail::eval_reg_term(r, x, w, v, grad, lap_out, frozen);
        out.d_vert += v.d_vert;
        out.d_norm += v.d_norm;
        out.edge += v.edge;
        out.cons += v.cons;
        out.lap += v.lap;
    }

    LabeledMesh mesh_;
    FitConfig cfg_;
    detail::DistTerm lv_;
    detail::DistTerm hip_;
    std::array<detail::DistTerm, 4> peri_;
    detail::RegTerm reg_lv_;
    detail::RegTerm reg_hip_;
};

}  // namespace ventfit
