#pragma once

#include "ventfit/chamfer.hpp"
#include "ventfit/kdtree.hpp"
#include "ventfit/target.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <vector>

namespace ventfit {

struct RigidTransform {
    Eigen::Matrix3d rotation = Eigen::Matrix3d::Identity();
    Vec3 translation = Vec3::Zero();

    Vec3 apply(const Vec3& p) const { return rotation * p + translation; }
    RigidTransform inverse() const {
        RigidTransform inv;
        inv.rotation = rotation.transpose();
        inv.translation = -(rotation.transpose() * translation);
        return inv;
    }
};

inline void validate_rigid(const RigidTransform& t) {
    if (!t.rotation.allFinite() || !t.translation.allFinite())
        throw parameter_error("rigid transform: non-finite entries");
    double ortho = (t.rotation.transpose() * t.rotation - Eigen::Matrix3d::Identity())
                       .cwiseAbs()
                       .maxCoeff();
    if (ortho > 1e-9) throw parameter_error("rigid transform: rotation is not orthonormal");
    if (std::abs(t.rotation.determinant() - 1.0) > 1e-9)
        throw parameter_error("rigid transform: rotation determinant is not +1");
}

struct AnisotropicScale {
    double sx = 1.0, sy = 1.0, sz = 1.0;
    bool bounds_hit = false;

    Vec3 factors() const { return Vec3(sx, sy, sz); }
};

inline void validate_scale(const AnisotropicScale& s) {
    for (double v : {s.sx, s.sy, s.sz})
        if (!(v >= 0.2 && v <= 5.0))
            throw parameter_error("anisotropic scale: factor outside sanity bounds [0.2, 5.0]");
}

namespace detail {

// Rejects clouds that cannot pin down a rigid transform: fewer than 3
// points, coincident points, or a collinear configuration.
inline void require_full_rank(const std::vector<Vec3>& pts, const char* who) {
    if (pts.size() < 3)
        throw geometry_error(std::string(who) + ": need at least 3 points");
    Vec3 mean = Vec3::Zero();
    for (const Vec3& p : pts) mean += p;
    mean /= static_cast<double>(pts.size());
    Eigen::Matrix3d cov = Eigen::Matrix3d::Zero();
    for (const Vec3& p : pts) cov += (p - mean) * (p - mean).transpose();
    Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> eig(cov);
    double l1 = eig.eigenvalues()[1], l2 = eig.eigenvalues()[2];
    if (l2 <= 0.0 || l1 <= 1e-10 * l2)
        throw geometry_error(std::string(who) + ": degenerate (collinear) point configuration");
}

// Least-squares rigid transform mapping p onto q (Kabsch, SVD form).
inline RigidTransform kabsch(const std::vector<Vec3>& p, const std::vector<Vec3>& q) {
    Vec3 pc = Vec3::Zero(), qc = Vec3::Zero();
    for (const Vec3& v : p) pc += v;
    for (const Vec3& v : q) qc += v;
    pc /= static_cast<double>(p.size());
    qc /= static_cast<double>(q.size());
    Eigen::Matrix3d h = Eigen::Matrix3d::Zero();
    for (std::size_t i = 0; i < p.size(); ++i) h += (p[i] - pc) * (q[i] - qc).transpose();
    Eigen::JacobiSVD<Eigen::Matrix3d> svd(h, Eigen::ComputeFullU | Eigen::ComputeFullV);
    Eigen::Matrix3d u = svd.matrixU(), v = svd.matrixV();
    Eigen::Matrix3d d = Eigen::Matrix3d::Identity();
    d(2, 2) = (v * u.transpose()).determinant() < 0.0 ? -1.0 : 1.0;
    RigidTransform t;
    t.rotation = v * d * u.transpose();
    t.translation = qc - t.rotation * pc;
    return t;
}

}  // namespace detail

// Rigid alignment of target onto source by alternating nearest-neighbor
// matching with the closed-form Kabsch update. The absolute transform is
// re-solved from the original target points each iteration, so no numeric
// drift accumulates. If the converged pose would score a worse symmetric
// chamfer than the identity, the identity is returned instead.
inline RigidTransform icp_rigid(const std::vector<Vec3>& source_points,
                                const std::vector<Vec3>& target_points, int max_iters = 100,
                                double tol = 1e-9) {
    detail::require_full_rank(source_points, "icp_rigid source");
    detail::require_full_rank(target_points, "icp_rigid target");
    if (max_iters < 1) throw parameter_error("icp_rigid: max_iters must be >= 1");

    KdTree source_tree(source_points);
    RigidTransform current;
    std::vector<Vec3> matched(target_points.size());
    double prev_mse = std::numeric_limits<double>::infinity();
    for (int iter = 0; iter < max_iters; ++iter) {
        double mse = 0.0;
        for (std::size_t i = 0; i < target_points.size(); ++i) {
            auto [j, d2] = source_tree.nearest(current.apply(target_points[i]));
            matched[i] = source_points[j];
            mse += d2;
        }
        mse /= static_cast<double>(target_points.size());
        if (prev_mse - mse < tol && iter > 0) break;
        prev_mse = mse;
        current = detail::kabsch(target_points, matched);
    }

    std::vector<Vec3> moved(target_points.size());
    for (std::size_t i = 0; i < target_points.size(); ++i) moved[i] = current.apply(target_points[i]);
    if (chamfer_distance(source_points, moved) > chamfer_distance(source_points, target_points))
        return RigidTransform{};
    return current;
}

// Per-axis scale about the template centroid minimizing symmetric chamfer
// against the (already rigidly aligned) target. Coordinate descent with a
// golden-section line search per axis over [0.5, 2.0], two sweeps. A factor
// converging onto a search boundary is snapped to it and flagged.
inline AnisotropicScale fit_anisotropic_scale(const std::vector<Vec3>& template_points,
                                              const std::vector<Vec3>& aligned_target_points) {
    if (template_points.empty() || aligned_target_points.empty())
        throw empty_target_error("fit_anisotropic_scale: empty point set");
    constexpr double kLo = 0.5, kHi = 2.0;
    constexpr double kInvPhi = 0.6180339887498949;

    Vec3 centroid = Vec3::Zero();
    for (const Vec3& p : template_points) centroid += p;
    centroid /= static_cast<double>(template_points.size());

    Vec3 s(1.0, 1.0, 1.0);
    std::vector<Vec3> scaled(template_points.size());
    auto objective = [&](const Vec3& factors) {
        for (std::size_t i = 0; i < template_points.size(); ++i)
            scaled[i] = centroid + (template_points[i] - centroid).cwiseProduct(factors);
        return chamfer_distance(scaled, aligned_target_points);
    };

    for (int sweep = 0; sweep < 2; ++sweep)
        for (int axis = 0; axis < 3; ++axis) {
            double a = kLo, b = kHi;
            auto eval = [&](double v) {
                Vec3 f = s;
                f[axis] = v;
                return objective(f);
            };
            double x1 = b - kInvPhi * (b - a), x2 = a + kInvPhi * (b - a);
            double f1 = eval(x1), f2 = eval(x2);
            while (b - a > 1e-6) {
                if (f1 <= f2) {
                    b = x2;
                    x2 = x1;
                    f2 = f1;
                    x1 = b - kInvPhi * (b - a);
                    f1 = eval(x1);
                } else {
                    a = x1;
                    x1 = x2;
                    f1 = f2;
                    x2 = a + kInvPhi * (b - a);
                    f2 = eval(x2);
                }
            }
            s[axis] = 0.5 * (a + b);
        }

    AnisotropicScale result;
    double* out[3] = {&result.sx, &result.sy, &result.sz};
    for (int axis = 0; axis < 3; ++axis) {
        double v = s[axis];
        if (v - kLo < 1e-4) {
            v = kLo;
            result.bounds_hit = true;
        } else if (kHi - v < 1e-4) {
            v = kHi;
            result.bounds_hit = true;
        }
        *out[axis] = v;
    }
    return result;
}

// Fully prepared fitting target: the cloud expressed in (unscaled) template
// space together with the transforms needed to map results back to subject
// space. A template-space position x maps back as
// icp.inverse().apply(centroid + (x - centroid) .* scale).
struct PreparedTarget {
    LabeledPointCloud cloud;
    RigidTransform icp;
    AnisotropicScale scale;
    Vec3 template_centroid = Vec3::Zero();

    Vec3 to_template(const Vec3& subject_point) const {
        Vec3 q = icp.apply(subject_point);
        return template_centroid +
               (q - template_centroid).cwiseQuotient(Vec3(scale.sx, scale.sy, scale.sz));
    }
    Vec3 to_subject(const Vec3& template_point) const {
        Vec3 q = template_centroid +
                 (template_point - template_centroid).cwiseProduct(Vec3(scale.sx, scale.sy, scale.sz));
        return icp.inverse().apply(q);
    }
};

// Extraction, peripheral classification, rigid ICP (on every LV point found,
// both sides), then per-axis scaling. The returned cloud holds the requested
// side's LV and hippocampus points mapped into template space; the scale
// found for the template is inverted onto the target so the canonical
// template can be fitted unchanged.
inline PreparedTarget prepare_target(const SegmentationVolume& vol, Side side,
                                     const LabeledMesh& template_mesh,
                                     const LabelCodeMap& map = {}, int icp_max_iters = 100,
                                     double icp_tol = 1e-9) {
    const int s = static_cast<int>(side);

    // Only the requested side's codes are extracted: the opposite ventricle
    // may share voxel faces with this one's medial wall, and including its
    // code would swallow that wall into one labeled mass, erasing its
    // boundary points. The opposite-LV code still informs classification.
    LabeledPointCloud lv_all;
    try {
        lv_all = extract_boundary_points(vol, {map.lv[s]}, map);
    } catch (const empty_target_error&) {
        throw empty_target_error("prepare_target: no LV boundary points for the requested side");
    }
    lv_all = classify_peripheral_points(lv_all, vol, map);
    LabeledPointCloud hip = extract_boundary_points(vol, {map.hippocampus[s]}, map);

    // Template geometry used for alignment: LV submesh vertices (shared ring
    // included) for ICP, the full joint vertex set for the scale fit.
    std::vector<Vec3> template_lv;
    for (std::size_t i = 0; i < template_mesh.vertex_count(); ++i)
        if (vertex_in_structure(template_mesh.structure_label[i], StructureLabel::Lv))
            template_lv.push_back(template_mesh.vertices[i]);

    RigidTransform icp = icp_rigid(template_lv, lv_all.points, icp_max_iters, icp_tol);

    PreparedTarget prepared;
    prepared.icp = icp;
    Vec3 centroid = Vec3::Zero();
    for (const Vec3& p : template_mesh.vertices) centroid += p;
    prepared.template_centroid = centroid / static_cast<double>(template_mesh.vertex_count());

    LabeledPointCloud cloud;
    auto take = [&](const LabeledPointCloud& src) {
        for (std::size_t i = 0; i < src.size(); ++i) {
            if (src.side[i] != side) continue;
            cloud.points.push_back(icp.apply(src.points[i]));
            cloud.source.push_back(src.source[i]);
            cloud.peri.push_back(src.peri[i]);
            cloud.side.push_back(src.side[i]);
        }
    };
    take(lv_all);
    take(hip);

    prepared.scale = fit_anisotropic_scale(template_mesh.vertices, cloud.points);
    Vec3 factors = prepared.scale.factors();
    for (Vec3& p : cloud.points)
        p = prepared.template_centroid +
            (p - prepared.template_centroid).cwiseQuotient(factors);
    prepared.cloud = std::move(cloud);
    return prepared;
}

// Transform persistence for the prep stage (JSON).
inline nlohmann::json prepared_transforms_to_json(const PreparedTarget& p) {
    nlohmann::json j;
    j["icp"]["rotation"] = {
        {p.icp.rotation(0, 0), p.icp.rotation(0, 1), p.icp.rotation(0, 2)},
        {p.icp.rotation(1, 0), p.icp.rotation(1, 1), p.icp.rotation(1, 2)},
        {p.icp.rotation(2, 0), p.icp.rotation(2, 1), p.icp.rotation(2, 2)}};
    j["icp"]["translation"] = {p.icp.translation.x(), p.icp.translation.y(),
                               p.icp.translation.z()};
    j["scale"] = {{"sx", p.scale.sx}, {"sy", p.scale.sy}, {"sz", p.scale.sz},
                  {"bounds_hit", p.scale.bounds_hit}};
    j["template_centroid"] = {p.template_centroid.x(), p.template_centroid.y(),
                              p.template_centroid.z()};
    return j;
}

inline PreparedTarget prepared_transforms_from_json(const nlohmann::json& j) {
    PreparedTarget p;
    try {
        const auto& r = j.at("icp").at("rotation");
        for (int i = 0; i < 3; ++i)
            for (int k = 0; k < 3; ++k) p.icp.rotation(i, k) = r.at(i).at(k).get<double>();
        const auto& t = j.at("icp").at("translation");
        for (int i = 0; i < 3; ++i) p.icp.translation[i] = t.at(i).get<double>();
        p.scale.sx = j.at("scale").at("sx").get<double>();
        p.scale.sy = j.at("scale").at("sy").get<double>();
        p.scale.sz = j.at("scale").at("sz").get<double>();
        p.scale.bounds_hit = j.at("scale").at("bounds_hit").get<bool>();
        const auto& c = j.at("template_centroid");
        for (int i = 0; i < 3; ++i) p.template_centroid[i] = c.at(i).get<double>();
    } catch (const nlohmann::json::exception& e) {
        throw format_error(std::string("transforms json: ") + e.what());
    }
    validate_rigid(p.icp);
    validate_scale(p.scale);
    return p;
}

}  // namespace ventfit
