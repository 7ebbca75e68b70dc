#pragma once

#include "ventfit/common.hpp"

#include <nlohmann/json.hpp>

#include <cstdint>
#include <fstream>
#include <string>
#include <vector>

namespace ventfit {

// Dense integer label grid. C-order payload: the last axis (k) varies
// fastest. Voxel centers sit at origin + (index + 0.5) * spacing.
struct SegmentationVolume {
    Vec3i dims = Vec3i::Zero();
    Vec3 spacing = Vec3::Ones();
    Vec3 origin = Vec3::Zero();
    std::vector<std::uint16_t> labels;
    std::string dtype = "u16";  // payload width on disk: "u8" or "u16"

    long voxel_count() const {
        return static_cast<long>(dims[0]) * dims[1] * dims[2];
    }
    long index(int i, int j, int k) const {
        return (static_cast<long>(i) * dims[1] + j) * dims[2] + k;
    }
    std::uint16_t at(int i, int j, int k) const { return labels[index(i, j, k)]; }
    std::uint16_t& at(int i, int j, int k) { return labels[index(i, j, k)]; }
    bool in_bounds(int i, int j, int k) const {
        return i >= 0 && i < dims[0] && j >= 0 && j < dims[1] && k >= 0 && k < dims[2];
    }
    Vec3 voxel_center(int i, int j, int k) const {
        return origin + Vec3((i + 0.5) * spacing[0], (j + 0.5) * spacing[1],
                             (k + 0.5) * spacing[2]);
    }
};

namespace detail {

inline std::string raw_path_for(const std::string& header_path) {
    auto dot = header_path.rfind('.');
    auto slash = header_path.find_last_of('/');
    if (dot == std::string::npos || (slash != std::string::npos && dot < slash))
        return header_path + ".raw";
    return header_path.substr(0, dot) + ".raw";
}

}  // namespace detail

inline SegmentationVolume load_segmentation(const std::string& header_path) {
    std::ifstream in(header_path);
    if (!in) throw input_error("cannot open volume header: " + header_path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw format_error(header_path + ": invalid JSON header: " + e.what());
    }
    SegmentationVolume vol;
    try {
        auto dims = j.at("dims");
        auto spacing = j.at("spacing_mm");
        auto origin = j.at("origin_mm");
        if (dims.size() != 3 || spacing.size() != 3 || origin.size() != 3)
            throw format_error(header_path + ": dims/spacing_mm/origin_mm must have 3 entries");
        for (int a = 0; a < 3; ++a) {
            vol.dims[a] = dims[a].get<int>();
            vol.spacing[a] = spacing[a].get<double>();
            vol.origin[a] = origin[a].get<double>();
        }
        vol.dtype = j.at("dtype").get<std::string>();
        if (j.at("order").get<std::string>() != "C")
            throw format_error(header_path + ": only C-order payloads are supported");
    } catch (const nlohmann::json::exception& e) {
        throw format_error(header_path + ": bad header field: " + e.what());
    }
    for (int a = 0; a < 3; ++a) {
        if (vol.dims[a] <= 0) throw format_error(header_path + ": dims must be positive");
        if (!(vol.spacing[a] > 0.0))
            throw format_error(header_path + ": spacing_mm must be positive");
    }
    if (vol.dtype != "u8" && vol.dtype != "u16")
        throw format_error(header_path + ": dtype must be u8 or u16");

    std::string raw_path =
        j.contains("data") ? j["data"].get<std::string>() : detail::raw_path_for(header_path);
    if (j.contains("data") && raw_path.find('/') == std::string::npos) {
        auto slash = header_path.find_last_of('/');
        if (slash != std::string::npos) raw_path = header_path.substr(0, slash + 1) + raw_path;
    }
    std::ifstream raw(raw_path, std::ios::binary);
    if (!raw) throw input_error("cannot open volume payload: " + raw_path);
    raw.seekg(0, std::ios::end);
    long bytes = static_cast<long>(raw.tellg());
    raw.seekg(0);
    const long n = vol.voxel_count();
    const int width = (vol.dtype == "u8") ? 1 : 2;
    if (bytes != n * width)
        throw format_error(header_path + ": payload has " + std::to_string(bytes) +
                           " bytes, expected " + std::to_string(n * width));
    vol.labels.resize(n);
    if (width == 1) {
        std::vector<std::uint8_t> tmp(n);
        raw.read(reinterpret_cast<char*>(tmp.data()), n);
        for (long i = 0; i < n; ++i) vol.labels[i] = tmp[i];
    } else {
        raw.read(reinterpret_cast<char*>(vol.labels.data()), n * 2);
    }
    if (!raw) throw format_error(raw_path + ": payload read failed");
    return vol;
}

inline void save_segmentation(const SegmentationVolume& vol, const std::string& header_path) {
    if (vol.voxel_count() != static_cast<long>(vol.labels.size()))
        throw parameter_error("save_segmentation: dims disagree with label count");
    std::string raw_path = detail::raw_path_for(header_path);
    nlohmann::json j;
    j["dims"] = {vol.dims[0], vol.dims[1], vol.dims[2]};
    j["spacing_mm"] = {vol.spacing[0], vol.spacing[1], vol.spacing[2]};
    j["origin_mm"] = {vol.origin[0], vol.origin[1], vol.origin[2]};
    j["dtype"] = vol.dtype;
    j["order"] = "C";
    {
        std::ofstream out(header_path);
        if (!out) throw input_error("cannot write volume header: " + header_path);
        out << j.dump(2) << "\n";
    }
    std::ofstream raw(raw_path, std::ios::binary);
    if (!raw) throw input_error("cannot write volume payload: " + raw_path);
    const long n = vol.voxel_count();
    if (vol.dtype == "u8") {
        std::vector<std::uint8_t> tmp(n);
        for (long i = 0; i < n; ++i) {
            if (vol.labels[i] > 255)
                throw parameter_error("save_segmentation: label exceeds u8 payload range");
            tmp[i] = static_cast<std::uint8_t>(vol.labels[i]);
        }
        raw.write(reinterpret_cast<const char*>(tmp.data()), n);
    } else {
        raw.write(reinterpret_cast<const char*>(vol.labels.data()), n * 2);
    }
    if (!raw) throw input_error("write failed: " + raw_path);
}

}  // namespace ventfit
