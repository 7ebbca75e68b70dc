#pragma once

#include "ventfit/kdtree.hpp"
#include "ventfit/mesh.hpp"
#include "ventfit/ply_io.hpp"
#include "ventfit/target.hpp"
#include "ventfit/volume.hpp"
#include "ventfit/voxelize.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <random>
#include <string>
#include <vector>

namespace ventfit {

// Only one dropout region is meaningful for this anatomy: the LV band facing
// the hippocampus, where segmentations lose the thin inferior horn.
enum class DropoutRegion : std::uint8_t { InferiorLv = 0 };

struct CohortSpec {
    int n_subjects = 10;
    double amplitude_mm = 3.0;    // max vertex displacement, exact after scaling
    double smoothness_mm = 22.0;  // Gaussian kernel sigma of the displacement field
    DropoutRegion dropout_region = DropoutRegion::InferiorLv;
    double dropout_fraction = 0.0;   // fraction of region voxels removed
    double dropout_extent_mm = 16.0; // region: LV voxels within this distance of the junction
    Vec3 voxel_spacing = Vec3(1.0, 1.0, 1.0);
    std::uint64_t seed = 1;
    int control_points = 6;  // RBF centers per subject
};

inline void validate_cohort_spec(const CohortSpec& s) {
    if (s.n_subjects < 1) throw parameter_error("cohort: need at least one subject");
    if (!(s.amplitude_mm >= 0.0)) throw parameter_error("cohort: amplitude must be non-negative");
    if (!(s.smoothness_mm > 0.0)) throw parameter_error("cohort: smoothness scale must be positive");
    if (!(s.dropout_fraction >= 0.0 && s.dropout_fraction <= 1.0))
        throw parameter_error("cohort: dropout fraction must lie in [0,1]");
    if (!(s.dropout_extent_mm > 0.0))
        throw parameter_error("cohort: dropout extent must be positive");
    for (int a = 0; a < 3; ++a)
        if (!(s.voxel_spacing[a] > 0.0))
            throw parameter_error("cohort: voxel spacing must be positive");
    if (s.control_points < 1) throw parameter_error("cohort: need at least one control point");
}

namespace detail {

inline std::uint64_t splitmix64(std::uint64_t& s) {
    s += 0x9e3779b97f4a7c15ull;
    std::uint64_t z = s;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
}

// Independent per-subject stream from one root seed.
inline std::uint64_t subject_seed(std::uint64_t root, int index) {
    std::uint64_t s = root;
    std::uint64_t mixed = splitmix64(s);
    s = mixed ^ (0x632be59bd9b4e019ull * (static_cast<std::uint64_t>(index) + 1));
    return splitmix64(s);
}

// Uniform in [0,1) from the top 53 bits; avoids distribution objects whose
// output is implementation-defined.
inline double u01(std::mt19937_64& rng) {
    return static_cast<double>(rng() >> 11) * (1.0 / 9007199254740992.0);
}

}  // namespace detail

// Smooth random deformation: a sum of Gaussian radial basis displacements at
// control points drawn inside the inflated vertex bounding box, rescaled so
// the largest vertex displacement equals `amplitude` exactly. Amplitude zero
// leaves the vertices bitwise untouched.
inline LabeledMesh deform_mesh(const LabeledMesh& tmpl, double amplitude, double sigma,
                               int n_ctrl, std::uint64_t seed) {
    if (!(amplitude >= 0.0)) throw parameter_error("deform: amplitude must be non-negative");
    if (!(sigma > 0.0)) throw parameter_error("deform: smoothness scale must be positive");
    if (n_ctrl < 1) throw parameter_error("deform: need at least one control point");
    if (tmpl.vertices.empty()) throw parameter_error("deform: empty mesh");

    LabeledMesh out = tmpl;
    if (amplitude == 0.0) return out;

    std::mt19937_64 rng(seed);
    Vec3 lo = tmpl.vertices[0], hi = tmpl.vertices[0];
    for (const Vec3& p : tmpl.vertices) {
        lo = lo.cwiseMin(p);
        hi = hi.cwiseMax(p);
    }
    const double pad = 0.5 * sigma;

    std::vector<Vec3> ctrl(n_ctrl), weight(n_ctrl);
    for (int k = 0; k < n_ctrl; ++k) {
        for (int a = 0; a < 3; ++a)
            ctrl[k][a] = lo[a] - pad + (hi[a] - lo[a] + 2.0 * pad) * detail::u01(rng);
        for (int a = 0; a < 3; ++a) weight[k][a] = 2.0 * detail::u01(rng) - 1.0;
    }

    const double inv2s2 = 1.0 / (2.0 * sigma * sigma);
    std::vector<Vec3> disp(tmpl.vertices.size());
    double max_norm = 0.0;
    for (std::size_t i = 0; i < tmpl.vertices.size(); ++i) {
        Vec3 u = Vec3::Zero();
        for (int k = 0; k < n_ctrl; ++k)
            u += weight[k] * std::exp(-(tmpl.vertices[i] - ctrl[k]).squaredNorm() * inv2s2);
        disp[i] = u;
        max_norm = std::max(max_norm, u.norm());
    }
    if (!(max_norm > 0.0)) throw numerical_error("deform: degenerate displacement field");

    const double scale = amplitude / max_norm;
    for (std::size_t i = 0; i < out.vertices.size(); ++i) out.vertices[i] += scale * disp[i];
    return out;
}

// Labeled volume from one joint mesh. LV and hippocampus interiors get their
// side's structure codes; background voxels within two steps of the LV get
// the peripheral structure code of the nearest LV-surface vertex (hip-facing
// voxels stay background since the real hippocampus supplies that signal).
// Dropout then deletes the given fraction of LV voxels within the junction
// segment, nearest the junction first, emulating focal segmentation loss of
// the inferior horn.
inline SegmentationVolume rasterize_labeled_mesh(const LabeledMesh& mesh, const Vec3& spacing,
                                                 double dropout_fraction,
                                                 double dropout_extent_mm = 16.0,
                                                 const LabelCodeMap& map = {}) {
    for (int a = 0; a < 3; ++a)
        if (!(spacing[a] > 0.0)) throw parameter_error("rasterize: voxel spacing must be positive");
    if (!(dropout_fraction >= 0.0 && dropout_fraction <= 1.0))
        throw parameter_error("rasterize: dropout fraction must lie in [0,1]");
    if (!(dropout_extent_mm > 0.0))
        throw parameter_error("rasterize: dropout extent must be positive");
    if (mesh.vertices.empty() || mesh.faces.empty())
        throw parameter_error("rasterize: empty mesh");

    const int s = static_cast<int>(mesh.side[0]);
    const int o = 1 - s;

    Submesh lv = extract_submesh(mesh, StructureLabel::Lv);
    Submesh hip = extract_submesh(mesh, StructureLabel::Hippocampus);
    if (lv.empty() || hip.empty())
        throw parameter_error("rasterize: mesh must contain both structures");

    // Margin covers the 2-voxel context shell plus slack.
    GridSpec grid = fit_grid(mesh.vertices, spacing, 4);
    SegmentationVolume vol;
    vol.dims = grid.dims;
    vol.spacing = grid.spacing;
    vol.origin = grid.origin;
    std::uint16_t max_code = 0;
    for (std::uint16_t c : {map.lv[0], map.lv[1], map.hippocampus[s], map.thalamus[s],
                            map.caudate[s], map.white_matter[s]})
        max_code = std::max(max_code, c);
    vol.dtype = (max_code > 255) ? "u16" : "u8";
    vol.labels.assign(static_cast<std::size_t>(vol.voxel_count()), 0);

    std::vector<Vec3> lv_pos = lv.positions(mesh.vertices);
    voxelize_into(vol, lv_pos, lv.faces, map.lv[s]);
    voxelize_into(vol, hip.positions(mesh.vertices), hip.faces, map.hippocampus[s]);

    // Nearest LV-surface vertex decides both shell codes and the dropout band.
    KdTree lv_tree(lv_pos);
    auto lv_class_at = [&](const Vec3& p) {
        auto [idx, d2] = lv_tree.nearest(p);
        (void)d2;
        return mesh.peripheral_class[lv.vert_ids[idx]];
    };

    const int ni = vol.dims[0], nj = vol.dims[1], nk = vol.dims[2];
    auto decode = [&](long idx, int& i, int& j, int& k) {
        k = static_cast<int>(idx % nk);
        j = static_cast<int>((idx / nk) % nj);
        i = static_cast<int>(idx / (static_cast<long>(nj) * nk));
    };

    const std::uint16_t lv_code = map.lv[s];
    std::vector<long> lv_voxels;
    std::vector<char> seen(vol.labels.size(), 0);
    for (long idx = 0; idx < vol.voxel_count(); ++idx) {
        if (vol.labels[idx] != 0) seen[idx] = 1;
        if (vol.labels[idx] == lv_code) lv_voxels.push_back(idx);
    }

    // Two 26-neighbour dilation passes collect the background shell.
    std::vector<long> frontier = lv_voxels, next, shell;
    for (int pass = 0; pass < 2; ++pass) {
        next.clear();
        for (long idx : frontier) {
            int i, j, k;
            decode(idx, i, j, k);
            for (int di = -1; di <= 1; ++di)
                for (int dj = -1; dj <= 1; ++dj)
                    for (int dk = -1; dk <= 1; ++dk) {
                        if (di == 0 && dj == 0 && dk == 0) continue;
                        int a = i + di, b = j + dj, c = k + dk;
                        if (a < 0 || b < 0 || c < 0 || a >= ni || b >= nj || c >= nk) continue;
                        long nidx = (static_cast<long>(a) * nj + b) * nk + c;
                        if (seen[nidx]) continue;
                        seen[nidx] = 1;
                        next.push_back(nidx);
                        shell.push_back(nidx);
                    }
        }
        frontier.swap(next);
    }

    for (long idx : shell) {
        int i, j, k;
        decode(idx, i, j, k);
        std::uint16_t code = 0;
        switch (lv_class_at(vol.voxel_center(i, j, k))) {
            case PeripheralClass::WhiteMatter: code = map.white_matter[s]; break;
            case PeripheralClass::Thalamus: code = map.thalamus[s]; break;
            case PeripheralClass::Caudate: code = map.caudate[s]; break;
            case PeripheralClass::OppositeLv: code = map.lv[o]; break;
            default: break;  // hip-facing or unclassified: leave background
        }
        if (code != 0) vol.labels[idx] = code;
    }

    if (dropout_fraction > 0.0) {
        Vec3 junction = Vec3::Zero();
        int n_ring = 0;
        for (int i = 0; i < mesh.vertex_count(); ++i)
            if (mesh.structure_label[i] == StructureLabel::Shared) {
                junction += mesh.vertices[i];
                ++n_ring;
            }
        if (n_ring == 0) throw geometry_error("rasterize: dropout needs a junction ring");
        junction /= static_cast<double>(n_ring);

        // Coherent cut growing from the junction: a scattered per-voxel
        // deletion would expose interior voxels and multiply, not shrink,
        // the boundary in the region.
        const double ext2 = dropout_extent_mm * dropout_extent_mm;
        std::vector<std::pair<double, long>> region;
        for (long idx : lv_voxels) {
            int i, j, k;
            decode(idx, i, j, k);
            double d2 = (vol.voxel_center(i, j, k) - junction).squaredNorm();
            if (d2 <= ext2) region.emplace_back(d2, idx);
        }
        std::sort(region.begin(), region.end());
        std::size_t n_del = static_cast<std::size_t>(
            std::llround(dropout_fraction * static_cast<double>(region.size())));
        n_del = std::min(n_del, region.size());
        for (std::size_t r = 0; r < n_del; ++r) vol.labels[region[r].second] = 0;
    }

    return vol;
}

struct CohortSubject {
    LabeledMesh mesh;  // ground truth
    SegmentationVolume volume;
};

inline CohortSubject synth_subject(const LabeledMesh& tmpl, const CohortSpec& spec, int index,
                                   const LabelCodeMap& map = {}) {
    validate_cohort_spec(spec);
    if (index < 0 || index >= spec.n_subjects)
        throw parameter_error("cohort: subject index out of range");
    CohortSubject subj;
    subj.mesh = deform_mesh(tmpl, spec.amplitude_mm, spec.smoothness_mm, spec.control_points,
                            detail::subject_seed(spec.seed, index));
    subj.volume = rasterize_labeled_mesh(subj.mesh, spec.voxel_spacing, spec.dropout_fraction,
                                         spec.dropout_extent_mm, map);
    return subj;
}

inline std::vector<CohortSubject> synth_cohort(const LabeledMesh& tmpl, const CohortSpec& spec,
                                               const LabelCodeMap& map = {}) {
    validate_cohort_spec(spec);
    std::vector<CohortSubject> out;
    out.reserve(spec.n_subjects);
    for (int i = 0; i < spec.n_subjects; ++i) out.push_back(synth_subject(tmpl, spec, i, map));
    return out;
}

inline nlohmann::json cohort_spec_to_json(const CohortSpec& s) {
    nlohmann::json j;
    j["n_subjects"] = s.n_subjects;
    j["amplitude_mm"] = s.amplitude_mm;
    j["smoothness_mm"] = s.smoothness_mm;
    j["dropout_region"] = "inferior_lv";
    j["dropout_fraction"] = s.dropout_fraction;
    j["dropout_extent_mm"] = s.dropout_extent_mm;
    j["voxel_spacing_mm"] = {s.voxel_spacing[0], s.voxel_spacing[1], s.voxel_spacing[2]};
    j["seed"] = s.seed;
    j["control_points"] = s.control_points;
    return j;
}

inline CohortSpec cohort_spec_from_json(const nlohmann::json& j) {
    CohortSpec s;
    try {
        if (j.contains("n_subjects")) s.n_subjects = j["n_subjects"].get<int>();
        if (j.contains("amplitude_mm")) s.amplitude_mm = j["amplitude_mm"].get<double>();
        if (j.contains("smoothness_mm")) s.smoothness_mm = j["smoothness_mm"].get<double>();
        if (j.contains("dropout_region")) {
            std::string r = j["dropout_region"].get<std::string>();
            if (r != "inferior_lv")
                throw parameter_error("cohort: unknown dropout region '" + r + "'");
        }
        if (j.contains("dropout_fraction")) s.dropout_fraction = j["dropout_fraction"].get<double>();
        if (j.contains("dropout_extent_mm")) s.dropout_extent_mm = j["dropout_extent_mm"].get<double>();
        if (j.contains("voxel_spacing_mm")) {
            const auto& v = j["voxel_spacing_mm"];
            if (!v.is_array() || v.size() != 3)
                throw parameter_error("cohort: voxel_spacing_mm must be [x, y, z]");
            for (int a = 0; a < 3; ++a) s.voxel_spacing[a] = v[a].get<double>();
        }
        if (j.contains("seed")) s.seed = j["seed"].get<std::uint64_t>();
        if (j.contains("control_points")) s.control_points = j["control_points"].get<int>();
    } catch (const nlohmann::json::exception& e) {
        throw format_error(std::string("cohort spec: ") + e.what());
    }
    validate_cohort_spec(s);
    return s;
}

// Emit a cohort directory: template.ply, per-subject volume + ground-truth
// mesh, and manifest.json tying them together. Returns the manifest.
inline nlohmann::json write_cohort(const std::string& dir, const LabeledMesh& tmpl,
                                   const CohortSpec& spec, const LabelCodeMap& map = {}) {
    validate_cohort_spec(spec);
    std::filesystem::create_directories(dir);

    nlohmann::json manifest;
    manifest["kind"] = "joint-shape-cohort";
    manifest["spec"] = cohort_spec_to_json(spec);
    manifest["code_map"] = {{"lv", {map.lv[0], map.lv[1]}},
                            {"hippocampus", {map.hippocampus[0], map.hippocampus[1]}},
                            {"thalamus", {map.thalamus[0], map.thalamus[1]}},
                            {"caudate", {map.caudate[0], map.caudate[1]}},
                            {"white_matter", {map.white_matter[0], map.white_matter[1]}}};
    manifest["template"] = "template.ply";
    save_labeled_mesh(tmpl, dir + "/template.ply", PlyFormat::BinaryLE);

    manifest["subjects"] = nlohmann::json::array();
    for (int i = 0; i < spec.n_subjects; ++i) {
        CohortSubject subj = synth_subject(tmpl, spec, i, map);
        char id[32];
        std::snprintf(id, sizeof(id), "subject_%03d", i);
        std::string vol_name = std::string(id) + ".volume.json";
        std::string truth_name = std::string(id) + ".truth.ply";
        save_segmentation(subj.volume, dir + "/" + vol_name);
        save_labeled_mesh(subj.mesh, dir + "/" + truth_name, PlyFormat::BinaryLE);
        manifest["subjects"].push_back(
            {{"id", id}, {"volume", vol_name}, {"truth", truth_name}});
    }

    std::string manifest_path = dir + "/manifest.json";
    std::ofstream out(manifest_path);
    if (!out) throw input_error("cannot write cohort manifest: " + manifest_path);
    out << manifest.dump(2) << "\n";
    return manifest;
}

inline nlohmann::json load_cohort_manifest(const std::string& dir) {
    std::string path = dir + "/manifest.json";
    std::ifstream in(path);
    if (!in) throw input_error("cannot open cohort manifest: " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw format_error(path + ": " + e.what());
    }
    if (!j.contains("kind") || j["kind"] != "joint-shape-cohort")
        throw format_error(path + ": not a cohort manifest");
    if (!j.contains("subjects") || !j["subjects"].is_array())
        throw format_error(path + ": missing subject list");
    return j;
}

}  // namespace ventfit
