#include "helpers.hpp"

#include "ventfit/target.hpp"

#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <random>

using namespace ventfit;

namespace {

SegmentationVolume make_volume(int ni, int nj, int nk, const Vec3& spacing = Vec3(1, 1, 1),
                               const Vec3& origin = Vec3::Zero()) {
    SegmentationVolume vol;
    vol.dims = Vec3i(ni, nj, nk);
    vol.spacing = spacing;
    vol.origin = origin;
    vol.dtype = "u16";
    vol.labels.assign(static_cast<std::size_t>(ni) * nj * nk, 0);
    return vol;
}

std::uint16_t& at(SegmentationVolume& v, int i, int j, int k) {
    return v.labels[(static_cast<std::size_t>(i) * v.dims[1] + j) * v.dims[2] + k];
}

std::uint16_t get(const SegmentationVolume& v, int i, int j, int k) {
    return v.labels[(static_cast<std::size_t>(i) * v.dims[1] + j) * v.dims[2] + k];
}

}  // namespace

TEST_CASE("boundary extraction of a single voxel yields its center") {
    auto vol = make_volume(5, 5, 5, Vec3(0.7, 1.0, 1.3), Vec3(-2, 3, 1));
    at(vol, 2, 3, 1) = 4;
    auto cloud = extract_boundary_points(vol, {4});
    REQUIRE(cloud.size() == 1);
    REQUIRE((cloud.points[0] - (vol.origin + Vec3(2.5 * 0.7, 3.5 * 1.0, 1.5 * 1.3))).norm() <
            1e-12);
    REQUIRE(cloud.source[0] == StructureLabel::Lv);
    REQUIRE(cloud.side[0] == Side::Left);
    REQUIRE(cloud.peri[0] == PeripheralClass::Absent);
}

TEST_CASE("solid 3x3x3 block exposes 26 boundary voxels") {
    auto vol = make_volume(5, 5, 5);
    for (int i = 1; i <= 3; ++i)
        for (int j = 1; j <= 3; ++j)
            for (int k = 1; k <= 3; ++k) at(vol, i, j, k) = 17;
    auto cloud = extract_boundary_points(vol, {17});
    REQUIRE(cloud.size() == 26);
    for (std::size_t i = 0; i < cloud.size(); ++i) {
        REQUIRE(cloud.source[i] == StructureLabel::Hippocampus);
        REQUIRE(cloud.side[i] == Side::Left);
    }
}

TEST_CASE("solid 10x10x10 block exposes 488 boundary voxels") {
    auto vol = make_volume(12, 12, 12);
    for (int i = 1; i <= 10; ++i)
        for (int j = 1; j <= 10; ++j)
            for (int k = 1; k <= 10; ++k) at(vol, i, j, k) = 43;
    auto cloud = extract_boundary_points(vol, {43});
    REQUIRE(cloud.size() == 1000 - 512);
    REQUIRE(cloud.side[0] == Side::Right);
}

TEST_CASE("boundary extraction matches a brute-force rescan on random volumes") {
    std::mt19937 rng(404);
    for (int trial = 0; trial < 4; ++trial) {
        int n = 8 + static_cast<int>(rng() % 25);
        auto vol = make_volume(n, n, n);
        const std::uint16_t pool[4] = {0, 4, 43, 17};
        for (auto& c : vol.labels) c = pool[rng() % 4];
        std::vector<std::uint16_t> codes = {4, 43};
        auto cloud = extract_boundary_points(vol, codes);

        // Independent rescan: six explicit neighbor probes per voxel.
        std::vector<Vec3> expected;
        auto is_in = [&](int i, int j, int k) {
            if (i < 0 || j < 0 || k < 0 || i >= n || j >= n || k >= n) return false;
            auto c = get(vol, i, j, k);
            return c == 4 || c == 43;
        };
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j)
                for (int k = 0; k < n; ++k) {
                    if (!is_in(i, j, k)) continue;
                    int covered = 0;
                    covered += is_in(i - 1, j, k);
                    covered += is_in(i + 1, j, k);
                    covered += is_in(i, j - 1, k);
                    covered += is_in(i, j + 1, k);
                    covered += is_in(i, j, k - 1);
                    covered += is_in(i, j, k + 1);
                    if (covered < 6) expected.push_back(vol.voxel_center(i, j, k));
                }
        REQUIRE(cloud.size() == expected.size());
        auto key = [](const Vec3& p) { return std::array<double, 3>{p.x(), p.y(), p.z()}; };
        std::vector<std::array<double, 3>> a, b;
        for (const Vec3& p : cloud.points) a.push_back(key(p));
        for (const Vec3& p : expected) b.push_back(key(p));
        std::sort(a.begin(), a.end());
        std::sort(b.begin(), b.end());
        REQUIRE(a == b);
    }
}

TEST_CASE("boundary extraction rejects empty and non-structure codes") {
    auto vol = make_volume(4, 4, 4);
    at(vol, 1, 1, 1) = 4;
    REQUIRE_THROWS_AS(extract_boundary_points(vol, {17}), empty_target_error);
    REQUIRE_THROWS_AS(extract_boundary_points(vol, {}), parameter_error);
    REQUIRE_THROWS_AS(extract_boundary_points(vol, {10}), parameter_error);
}

TEST_CASE("peripheral classification follows the anchored block and priority rules") {
    auto vol = make_volume(6, 6, 6);
    at(vol, 1, 1, 1) = 4;

    SECTION("hippocampus neighbor wins") {
        at(vol, 2, 1, 1) = 17;
        auto cloud = classify_peripheral_points(extract_boundary_points(vol, {4}), vol);
        REQUIRE(cloud.peri[0] == PeripheralClass::Hippocampus);
    }
    SECTION("thalamus outranks white matter") {
        at(vol, 2, 1, 1) = 2;
        at(vol, 1, 2, 1) = 10;
        auto cloud = classify_peripheral_points(extract_boundary_points(vol, {4}), vol);
        REQUIRE(cloud.peri[0] == PeripheralClass::Thalamus);
    }
    SECTION("hippocampus outranks everything in the block") {
        at(vol, 2, 1, 1) = 49;
        at(vol, 1, 2, 1) = 53;
        at(vol, 2, 2, 2) = 41;
        auto cloud = classify_peripheral_points(extract_boundary_points(vol, {4}), vol);
        REQUIRE(cloud.peri[0] == PeripheralClass::Hippocampus);
    }
    SECTION("opposite LV is side dependent") {
        at(vol, 2, 1, 1) = 43;
        auto cloud = classify_peripheral_points(extract_boundary_points(vol, {4}), vol);
        REQUIRE(cloud.peri[0] == PeripheralClass::OppositeLv);
        // The mirrored case: a right-side point next to the left code.
        auto vol2 = make_volume(6, 6, 6);
        at(vol2, 1, 1, 1) = 43;
        at(vol2, 2, 1, 1) = 4;
        auto cloud2 = classify_peripheral_points(extract_boundary_points(vol2, {43}), vol2);
        REQUIRE(cloud2.peri[0] == PeripheralClass::OppositeLv);
    }
    SECTION("empty anchored block expands to the centered 3x3x3") {
        at(vol, 0, 1, 1) = 11;  // offset -1 in x, outside the anchored {0,1}^3 block
        auto cloud = classify_peripheral_points(extract_boundary_points(vol, {4}), vol);
        REQUIRE(cloud.peri[0] == PeripheralClass::Caudate);
    }
    SECTION("nothing informative anywhere defaults to white matter") {
        auto cloud = classify_peripheral_points(extract_boundary_points(vol, {4}), vol);
        REQUIRE(cloud.peri[0] == PeripheralClass::WhiteMatter);
    }
}

TEST_CASE("peripheral classification matches a brute-force rescan on random volumes") {
    std::mt19937 rng(7171);
    LabelCodeMap map;
    for (int trial = 0; trial < 3; ++trial) {
        auto vol = make_volume(16, 16, 16);
        const std::uint16_t pool[9] = {0, 0, 4, 43, 17, 53, 10, 11, 2};
        for (auto& c : vol.labels) c = pool[rng() % 9];
        auto cloud = classify_peripheral_points(extract_boundary_points(vol, {4, 43}), vol, map);

        for (std::size_t p = 0; p < cloud.size(); ++p) {
            Vec3 rel = (cloud.points[p] - vol.origin).cwiseQuotient(vol.spacing);
            int vi = static_cast<int>(std::floor(rel.x()));
            int vj = static_cast<int>(std::floor(rel.y()));
            int vk = static_cast<int>(std::floor(rel.z()));
            // Second implementation: presence flags checked in explicit
            // priority order, no rank table.
            auto presence = [&](int lo, int hi, bool& hip, bool& opp, bool& thal, bool& caud,
                                bool& wm) {
                for (int di = lo; di <= hi; ++di)
                    for (int dj = lo; dj <= hi; ++dj)
                        for (int dk = lo; dk <= hi; ++dk) {
                            int i = vi + di, j = vj + dj, k = vk + dk;
                            if (i < 0 || j < 0 || k < 0 || i >= 16 || j >= 16 || k >= 16) continue;
                            auto c = get(vol, i, j, k);
                            if (c == 17 || c == 53) hip = true;
                            if (cloud.side[p] == Side::Left ? c == 43 : c == 4) opp = true;
                            if (c == 10 || c == 49) thal = true;
                            if (c == 11 || c == 50) caud = true;
                            if (c == 2 || c == 41) wm = true;
                        }
            };
            bool hip = false, opp = false, thal = false, caud = false, wm = false;
            presence(0, 1, hip, opp, thal, caud, wm);
            if (!hip && !opp && !thal && !caud && !wm)
                presence(-1, 1, hip, opp, thal, caud, wm);
            PeripheralClass want = PeripheralClass::WhiteMatter;
            if (hip) want = PeripheralClass::Hippocampus;
            else if (opp) want = PeripheralClass::OppositeLv;
            else if (thal) want = PeripheralClass::Thalamus;
            else if (caud) want = PeripheralClass::Caudate;
            else if (wm) want = PeripheralClass::WhiteMatter;
            REQUIRE(cloud.peri[p] == want);
            if (cloud.peri[p] == PeripheralClass::Hippocampus) REQUIRE(hip);
        }
    }
}

TEST_CASE("downsampling keeps uniform volumes uniform and drops thin sheets") {
    SECTION("uniform") {
        auto vol = make_volume(6, 6, 6);
        for (auto& c : vol.labels) c = 17;
        for (int f : {2, 3}) {
            auto out = downsample_segmentation(vol, f);
            for (auto c : out.labels) REQUIRE(c == 17);
            REQUIRE(out.spacing.x() == Catch::Approx(f).margin(0));
        }
    }
    SECTION("one-voxel sheet ties to background at factor 2") {
        auto vol = make_volume(4, 4, 4);
        for (int i = 0; i < 4; ++i)
            for (int j = 0; j < 4; ++j) at(vol, i, j, 0) = 5;
        auto out = downsample_segmentation(vol, 2);
        for (auto c : out.labels) REQUIRE(c == 0);
    }
    SECTION("two-voxel slab survives factor 2") {
        auto vol = make_volume(4, 4, 4);
        for (int i = 0; i < 4; ++i)
            for (int j = 0; j < 4; ++j) at(vol, i, j, 0) = at(vol, i, j, 1) = 5;
        auto out = downsample_segmentation(vol, 2);
        for (int oi = 0; oi < 2; ++oi)
            for (int oj = 0; oj < 2; ++oj) {
                REQUIRE(get(out, oi, oj, 0) == 5);
                REQUIRE(get(out, oi, oj, 1) == 0);
            }
    }
    SECTION("ceiling dims and border blocks") {
        auto vol = make_volume(5, 4, 4);
        for (auto& c : vol.labels) c = 9;
        auto out = downsample_segmentation(vol, 2);
        REQUIRE(out.dims == Vec3i(3, 2, 2));
        REQUIRE(get(out, 2, 0, 0) == 9);  // border block holds 1x2x2 voxels of 9
        REQUIRE(out.origin == vol.origin);
    }
    SECTION("factor below 2 is rejected") {
        auto vol = make_volume(4, 4, 4);
        REQUIRE_THROWS_AS(downsample_segmentation(vol, 1), parameter_error);
    }
}

TEST_CASE("point cloud csv round trip preserves everything") {
    LabeledPointCloud cloud;
    cloud.points = {Vec3(0.1, -2.5, 3e-7), Vec3(1.0 / 3.0, 2, -1), Vec3(5, 5, 5)};
    cloud.source = {StructureLabel::Lv, StructureLabel::Lv, StructureLabel::Hippocampus};
    cloud.peri = {PeripheralClass::Thalamus, PeripheralClass::WhiteMatter,
                  PeripheralClass::Absent};
    cloud.side = {Side::Left, Side::Left, Side::Left};

    std::filesystem::path dir = helpers::temp_dir("cloud");
    auto path = (dir / "cloud.csv").string();
    save_point_cloud(cloud, path);
    auto loaded = load_point_cloud(path);
    REQUIRE(loaded.size() == cloud.size());
    for (std::size_t i = 0; i < cloud.size(); ++i) {
        REQUIRE(loaded.points[i] == cloud.points[i]);
        REQUIRE(loaded.source[i] == cloud.source[i]);
        REQUIRE(loaded.peri[i] == cloud.peri[i]);
        REQUIRE(loaded.side[i] == cloud.side[i]);
    }
    std::filesystem::remove_all(dir);
}

TEST_CASE("malformed point cloud csv is rejected with the line context") {
    std::filesystem::path dir = helpers::temp_dir("badcsv");
    auto write = [&](const std::string& name, const std::string& body) {
        std::ofstream out(dir / name);
        out << body;
        return (dir / name).string();
    };
    REQUIRE_THROWS_AS(load_point_cloud(write("h.csv", "a,b,c\n1,2,3,0,-1,0\n")), format_error);
    REQUIRE_THROWS_AS(
        load_point_cloud(write("f.csv", "x,y,z,source,peri,side\n1,2,3,0,-1\n")), format_error);
    REQUIRE_THROWS_AS(
        load_point_cloud(write("e.csv", "x,y,z,source,peri,side\n1,2,3,9,-1,0\n")), format_error);
    REQUIRE_THROWS_AS(
        load_point_cloud(write("n.csv", "x,y,z,source,peri,side\n1,zebra,3,0,-1,0\n")),
        format_error);
    // Peripheral class on a hippocampus point violates the cloud invariant.
    REQUIRE_THROWS_AS(
        load_point_cloud(write("p.csv", "x,y,z,source,peri,side\n1,2,3,1,2,0\n")), format_error);
    REQUIRE_THROWS_AS(load_point_cloud((dir / "missing.csv").string()), input_error);
    std::filesystem::remove_all(dir);
}

TEST_CASE("label code map parses overrides and rejects bad shapes") {
    auto j = nlohmann::json::parse(R"({"lv": [104, 143], "thalamus": [9, 48]})");
    auto map = label_code_map_from_json(j);
    REQUIRE(map.lv[0] == 104);
    REQUIRE(map.lv[1] == 143);
    REQUIRE(map.thalamus[0] == 9);
    REQUIRE(map.hippocampus[0] == 17);  // untouched default
    REQUIRE_THROWS_AS(label_code_map_from_json(nlohmann::json::parse(R"({"lv": [1]})")),
                      parameter_error);
    REQUIRE_THROWS_AS(label_code_map_from_json(nlohmann::json::parse(R"({"lv": [1, 99999]})")),
                      parameter_error);
}
