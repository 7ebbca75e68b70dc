#pragma once

#include "ventfit/mesh.hpp"
#include "ventfit/volume.hpp"

#include <nlohmann/json.hpp>

#include <array>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

namespace ventfit {

// Label codes per structure, indexed by Side. Defaults follow the FreeSurfer
// convention; overridable via JSON ({"lv":[4,43], ...}).
struct LabelCodeMap {
    std::array<std::uint16_t, 2> lv{4, 43};
    std::array<std::uint16_t, 2> hippocampus{17, 53};
    std::array<std::uint16_t, 2> thalamus{10, 49};
    std::array<std::uint16_t, 2> caudate{11, 50};
    std::array<std::uint16_t, 2> white_matter{2, 41};

    // Peripheral class of a neighbor code as seen from an LV point of the
    // given side. The point's own structure codes map to Absent.
    PeripheralClass peripheral_of(std::uint16_t code, Side point_side) const {
        if (code == hippocampus[0] || code == hippocampus[1]) return PeripheralClass::Hippocampus;
        const Side other = (point_side == Side::Left) ? Side::Right : Side::Left;
        if (code == lv[static_cast<int>(other)]) return PeripheralClass::OppositeLv;
        if (code == thalamus[0] || code == thalamus[1]) return PeripheralClass::Thalamus;
        if (code == caudate[0] || code == caudate[1]) return PeripheralClass::Caudate;
        if (code == white_matter[0] || code == white_matter[1]) return PeripheralClass::WhiteMatter;
        return PeripheralClass::Absent;
    }
};

inline LabelCodeMap label_code_map_from_json(const nlohmann::json& j) {
    LabelCodeMap map;
    auto read = [&](const char* key, std::array<std::uint16_t, 2>& dst) {
        if (!j.contains(key)) return;
        const auto& v = j.at(key);
        if (!v.is_array() || v.size() != 2)
            throw parameter_error(std::string("code map: '") + key + "' must be [left, right]");
        for (int s = 0; s < 2; ++s) {
            long long c = v[s].get<long long>();
            if (c < 0 || c > 0xFFFF)
                throw parameter_error(std::string("code map: '") + key + "' code out of range");
            dst[s] = static_cast<std::uint16_t>(c);
        }
    };
    read("lv", map.lv);
    read("hippocampus", map.hippocampus);
    read("thalamus", map.thalamus);
    read("caudate", map.caudate);
    read("white_matter", map.white_matter);
    return map;
}

// Segmentation-derived target: boundary voxel centers in mm with per-point
// structure source, peripheral class (LV points only), and side.
struct LabeledPointCloud {
    std::vector<Vec3> points;
    std::vector<StructureLabel> source;
    std::vector<PeripheralClass> peri;
    std::vector<Side> side;

    std::size_t size() const { return points.size(); }
};

inline void validate_point_cloud(const LabeledPointCloud& c) {
    if (c.source.size() != c.points.size() || c.peri.size() != c.points.size() ||
        c.side.size() != c.points.size())
        throw parameter_error("point cloud: attribute arrays disagree with point count");
    for (std::size_t i = 0; i < c.points.size(); ++i) {
        if (!c.points[i].allFinite()) throw parameter_error("point cloud: non-finite coordinate");
        if (c.source[i] != StructureLabel::Lv && c.source[i] != StructureLabel::Hippocampus)
            throw parameter_error("point cloud: source must be LV or hippocampus");
        if (c.source[i] != StructureLabel::Lv && c.peri[i] != PeripheralClass::Absent)
            throw parameter_error("point cloud: peripheral class on a non-LV point");
    }
}

namespace detail {

// Codes are u16, so a flat lookup table doubles as the fast membership set.
inline std::vector<char> code_set(const std::vector<std::uint16_t>& codes) {
    std::vector<char> in(0x10000, 0);
    for (std::uint16_t c : codes) in[c] = 1;
    return in;
}

}  // namespace detail

// Boundary voxels of the region labeled by `codes`: a voxel is boundary iff
// its code is in the set and at least one 6-neighbor (or the volume border)
// is not. Points are voxel centers in mm. Every code must name the LV or the
// hippocampus of some side; source/side are set from the code table.
inline LabeledPointCloud extract_boundary_points(const SegmentationVolume& vol,
                                                 const std::vector<std::uint16_t>& codes,
                                                 const LabelCodeMap& map = {}) {
    if (codes.empty()) throw parameter_error("extract_boundary_points: no codes given");
    struct CodeId {
        StructureLabel source;
        Side side;
    };
    std::vector<CodeId> ident(0x10000, CodeId{StructureLabel::Lv, Side::Left});
    auto in_set = detail::code_set(codes);
    for (std::uint16_t c : codes) {
        if (c == map.lv[0]) ident[c] = {StructureLabel::Lv, Side::Left};
        else if (c == map.lv[1]) ident[c] = {StructureLabel::Lv, Side::Right};
        else if (c == map.hippocampus[0]) ident[c] = {StructureLabel::Hippocampus, Side::Left};
        else if (c == map.hippocampus[1]) ident[c] = {StructureLabel::Hippocampus, Side::Right};
        else
            throw parameter_error("extract_boundary_points: code " + std::to_string(c) +
                                  " is not an LV or hippocampus code");
    }

    const int ni = vol.dims[0], nj = vol.dims[1], nk = vol.dims[2];
    auto inside = [&](int i, int j, int k) {
        if (i < 0 || j < 0 || k < 0 || i >= ni || j >= nj || k >= nk) return false;
        return in_set[vol.labels[(static_cast<std::size_t>(i) * nj + j) * nk + k]] != 0;
    };

    LabeledPointCloud cloud;
    for (int i = 0; i < ni; ++i)
        for (int j = 0; j < nj; ++j)
            for (int k = 0; k < nk; ++k) {
                std::uint16_t code = vol.labels[(static_cast<std::size_t>(i) * nj + j) * nk + k];
                if (!in_set[code]) continue;
                bool exposed = !inside(i - 1, j, k) || !inside(i + 1, j, k) ||
                               !inside(i, j - 1, k) || !inside(i, j + 1, k) ||
                               !inside(i, j, k - 1) || !inside(i, j, k + 1);
                if (!exposed) continue;
                cloud.points.push_back(vol.voxel_center(i, j, k));
                cloud.source.push_back(ident[code].source);
                cloud.peri.push_back(PeripheralClass::Absent);
                cloud.side.push_back(ident[code].side);
            }
    if (cloud.points.empty())
        throw empty_target_error("extract_boundary_points: no voxels carry the requested codes");
    return cloud;
}

// Peripheral class per LV point from the 2x2x2 voxel block anchored at the
// point's voxel (the voxel plus +1 neighbors per axis). Ties break by fixed
// priority Hippocampus > OppositeLV > Thalamus > Caudate > WhiteMatter. A
// block holding only LV/background expands to the centered 3x3x3; if that is
// still uninformative the class defaults to WhiteMatter.
inline LabeledPointCloud classify_peripheral_points(const LabeledPointCloud& cloud,
                                                    const SegmentationVolume& vol,
                                                    const LabelCodeMap& map = {}) {
    static constexpr int kPriority[5] = {0, 4, 2, 1, 3};  // indexed by PeripheralClass
    auto rank = [&](PeripheralClass c) { return kPriority[static_cast<int>(c)]; };

    LabeledPointCloud out = cloud;
    const int ni = vol.dims[0], nj = vol.dims[1], nk = vol.dims[2];
    for (std::size_t p = 0; p < out.points.size(); ++p) {
        if (out.source[p] != StructureLabel::Lv) continue;
        Vec3 rel = (out.points[p] - vol.origin).cwiseQuotient(vol.spacing);
        int vi = static_cast<int>(std::floor(rel.x()));
        int vj = static_cast<int>(std::floor(rel.y()));
        int vk = static_cast<int>(std::floor(rel.z()));

        auto scan = [&](int lo, int hi) {
            PeripheralClass best = PeripheralClass::Absent;
            for (int di = lo; di <= hi; ++di)
                for (int dj = lo; dj <= hi; ++dj)
                    for (int dk = lo; dk <= hi; ++dk) {
                        int i = vi + di, j = vj + dj, k = vk + dk;
                        if (i < 0 || j < 0 || k < 0 || i >= ni || j >= nj || k >= nk) continue;
                        std::uint16_t code =
                            vol.labels[(static_cast<std::size_t>(i) * nj + j) * nk + k];
                        PeripheralClass c = map.peripheral_of(code, out.side[p]);
                        if (c == PeripheralClass::Absent) continue;
                        if (best == PeripheralClass::Absent || rank(c) > rank(best)) best = c;
                    }
            return best;
        };

        PeripheralClass c = scan(0, 1);
        if (c == PeripheralClass::Absent) c = scan(-1, 1);
        if (c == PeripheralClass::Absent) c = PeripheralClass::WhiteMatter;
        out.peri[p] = c;
    }
    return out;
}

// Block-majority downsampling by an integer factor; ties (including with
// background) resolve to background 0. Spacing scales by the factor, origin
// is unchanged, output dims are the ceiling quotient.
inline SegmentationVolume downsample_segmentation(const SegmentationVolume& vol, int factor) {
    if (factor < 2) throw parameter_error("downsample_segmentation: factor must be >= 2");
    SegmentationVolume out;
    for (int a = 0; a < 3; ++a) out.dims[a] = (vol.dims[a] + factor - 1) / factor;
    out.spacing = vol.spacing * static_cast<double>(factor);
    out.origin = vol.origin;
    out.dtype = vol.dtype;
    out.labels.assign(static_cast<std::size_t>(out.dims[0]) * out.dims[1] * out.dims[2], 0);

    std::vector<std::uint32_t> count;
    std::vector<std::uint16_t> seen;
    count.assign(0x10000, 0);
    for (int oi = 0; oi < out.dims[0]; ++oi)
        for (int oj = 0; oj < out.dims[1]; ++oj)
            for (int ok = 0; ok < out.dims[2]; ++ok) {
                seen.clear();
                for (int di = 0; di < factor; ++di)
                    for (int dj = 0; dj < factor; ++dj)
                        for (int dk = 0; dk < factor; ++dk) {
                            int i = oi * factor + di, j = oj * factor + dj, k = ok * factor + dk;
                            if (i >= vol.dims[0] || j >= vol.dims[1] || k >= vol.dims[2]) continue;
                            std::uint16_t c =
                                vol.labels[(static_cast<std::size_t>(i) * vol.dims[1] + j) *
                                               vol.dims[2] +
                                           k];
                            if (count[c]++ == 0) seen.push_back(c);
                        }
                std::uint16_t winner = 0;
                std::uint32_t best = 0;
                bool tie = false;
                for (std::uint16_t c : seen) {
                    if (count[c] > best) {
                        best = count[c];
                        winner = c;
                        tie = false;
                    } else if (count[c] == best) {
                        tie = true;
                    }
                }
                for (std::uint16_t c : seen) count[c] = 0;
                out.labels[(static_cast<std::size_t>(oi) * out.dims[1] + oj) * out.dims[2] + ok] =
                    tie ? 0 : winner;
            }
    return out;
}

// CSV persistence: header "x,y,z,source,peri,side", doubles serialized with
// shortest round-trip precision.
inline void save_point_cloud(const LabeledPointCloud& cloud, const std::string& path) {
    validate_point_cloud(cloud);
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw input_error("cannot open for writing: " + path);
    out << "x,y,z,source,peri,side\n";
    for (std::size_t i = 0; i < cloud.points.size(); ++i) {
        out << fmt_double(cloud.points[i].x()) << ',' << fmt_double(cloud.points[i].y()) << ','
            << fmt_double(cloud.points[i].z()) << ',' << static_cast<int>(cloud.source[i]) << ','
            << static_cast<int>(cloud.peri[i]) << ',' << static_cast<int>(cloud.side[i]) << '\n';
    }
    if (!out) throw input_error("write failed: " + path);
}

inline LabeledPointCloud load_point_cloud(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw input_error("cannot open: " + path);
    std::string line;
    std::size_t lineno = 0;
    auto fail = [&](const std::string& what) {
        return format_error("cloud csv " + path + ":" + std::to_string(lineno) + ": " + what);
    };
    if (!std::getline(in, line)) throw format_error("cloud csv " + path + ": empty file");
    ++lineno;
    if (line == "x,y,z,source,peri,side\r") line.pop_back();
    if (line != "x,y,z,source,peri,side") throw fail("bad header");

    LabeledPointCloud cloud;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        std::array<std::string, 6> field;
        std::size_t start = 0;
        for (int f = 0; f < 6; ++f) {
            std::size_t comma = line.find(',', start);
            if (f < 5 && comma == std::string::npos) throw fail("expected 6 fields");
            if (f == 5 && comma != std::string::npos) throw fail("expected 6 fields");
            field[f] = line.substr(start, comma == std::string::npos ? comma : comma - start);
            start = comma + 1;
        }
        Vec3 p;
        for (int a = 0; a < 3; ++a) {
            char* end = nullptr;
            p[a] = std::strtod(field[a].c_str(), &end);
            if (end == field[a].c_str() || *end != '\0') throw fail("bad coordinate");
            if (!std::isfinite(p[a])) throw fail("non-finite coordinate");
        }
        auto parse_int = [&](const std::string& s, long lo, long hi) {
            char* end = nullptr;
            long v = std::strtol(s.c_str(), &end, 10);
            if (end == s.c_str() || *end != '\0' || v < lo || v > hi) throw fail("bad enum field");
            return v;
        };
        long src = parse_int(field[3], 0, 2);
        long per = parse_int(field[4], -1, 4);
        long sid = parse_int(field[5], 0, 1);
        cloud.points.push_back(p);
        cloud.source.push_back(static_cast<StructureLabel>(src));
        cloud.peri.push_back(static_cast<PeripheralClass>(per));
        cloud.side.push_back(static_cast<Side>(sid));
    }
    try {
        validate_point_cloud(cloud);
    } catch (const parameter_error& e) {
        throw format_error("cloud csv " + path + ": " + e.what());
    }
    return cloud;
}

}  // namespace ventfit
