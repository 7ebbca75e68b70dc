#include "helpers.hpp"

#include "ventfit/template_gen.hpp"

#include <catch2/catch_amalgamated.hpp>

#include <map>
#include <set>

using namespace ventfit;
using Catch::Approx;

namespace {

// Small, fast spec shared by most cases; relax shortened but not disabled.
TemplateSpec small_spec() {
    TemplateSpec spec;
    spec.edge_length = 2.5;
    spec.relax_iters = 400;
    return spec;
}

}  // namespace

TEST_CASE("template generation is bitwise deterministic per seed") {
    TemplateSpec spec = small_spec();
    spec.seed = 7;
    auto a = generate_synthetic_joint_template(spec);
    auto b = generate_synthetic_joint_template(spec);
    REQUIRE(a.vertex_count() == b.vertex_count());
    REQUIRE(a.faces == b.faces);
    REQUIRE(a.structure_label == b.structure_label);
    REQUIRE(a.peripheral_class == b.peripheral_class);
    for (int i = 0; i < a.vertex_count(); ++i) {
        REQUIRE(a.vertices[i].x() == b.vertices[i].x());
        REQUIRE(a.vertices[i].y() == b.vertices[i].y());
        REQUIRE(a.vertices[i].z() == b.vertices[i].z());
    }

    spec.seed = 8;
    auto c = generate_synthetic_joint_template(spec);
    REQUIRE(c.vertex_count() == a.vertex_count());
    bool any_differ = false;
    for (int i = 0; i < a.vertex_count() && !any_differ; ++i)
        any_differ = (a.vertices[i] - c.vertices[i]).norm() > 0.0;
    REQUIRE(any_differ);
}

TEST_CASE("template submeshes are closed genus-0 surfaces with positive volume") {
    auto mesh = generate_synthetic_joint_template(small_spec());
    for (auto s : {StructureLabel::Lv, StructureLabel::Hippocampus}) {
        auto sub = extract_submesh(mesh, s);
        long V = static_cast<long>(sub.vert_ids.size());
        long E = static_cast<long>(unique_edges(sub.faces).size());
        long F = static_cast<long>(sub.faces.size());
        REQUIRE(V - E + F == 2);
        // Edge-manifold and closed: every edge borders exactly two faces.
        std::map<std::pair<int, int>, int> edge_count;
        for (const Face& f : sub.faces)
            for (int k = 0; k < 3; ++k) {
                int u = f[k], v = f[(k + 1) % 3];
                edge_count[{std::min(u, v), std::max(u, v)}]++;
            }
        for (const auto& [e, c] : edge_count) REQUIRE(c == 2);
        // Outward orientation.
        REQUIRE(signed_volume(sub.positions(mesh.vertices), sub.faces) > 0.0);
    }
}

TEST_CASE("template mean edge length tracks the requested edge length") {
    TemplateSpec spec = small_spec();
    spec.edge_length = 2.0;
    auto mesh = generate_synthetic_joint_template(spec);
    auto st = edge_length_stats(mesh.vertices, mesh.faces);
    REQUIRE(st.mean > 1.5);
    REQUIRE(st.mean < 2.4);
    // Near-uniform edge lengths: relative spread stays small, because the
    // fit treats length variance as shape error. The bound is for the whole
    // mesh across both submeshes (each submesh alone is tighter).
    REQUIRE(std::sqrt(st.variance) / st.mean < 0.15);
}

TEST_CASE("relaxation lowers per-submesh edge-length variance") {
    TemplateSpec raw = small_spec();
    raw.relax_iters = 0;
    TemplateSpec relaxed = small_spec();
    auto a = generate_synthetic_joint_template(raw);
    auto b = generate_synthetic_joint_template(relaxed);
    REQUIRE(a.vertex_count() == b.vertex_count());
    for (auto s : {StructureLabel::Lv, StructureLabel::Hippocampus}) {
        auto sa = extract_submesh(a, s);
        auto sb = extract_submesh(b, s);
        double va = edge_length_stats(sa.positions(a.vertices), sa.faces).variance;
        double vb = edge_length_stats(sb.positions(b.vertices), sb.faces).variance;
        REQUIRE(vb < va);
    }
}

TEST_CASE("template carries every peripheral class and the shared ring") {
    TemplateSpec spec = small_spec();
    spec.shared_ring_count = 16;
    auto mesh = generate_synthetic_joint_template(spec);
    int shared = 0;
    std::map<PeripheralClass, int> by_class;
    for (int i = 0; i < mesh.vertex_count(); ++i) {
        if (mesh.structure_label[i] == StructureLabel::Shared) ++shared;
        ++by_class[mesh.peripheral_class[i]];
    }
    REQUIRE(shared == 16);
    for (auto pc : {PeripheralClass::WhiteMatter, PeripheralClass::Hippocampus,
                    PeripheralClass::Thalamus, PeripheralClass::Caudate,
                    PeripheralClass::OppositeLv})
        REQUIRE(by_class[pc] > 0);
    // Hippocampus-structure vertices carry no peripheral class.
    for (int i = 0; i < mesh.vertex_count(); ++i)
        if (mesh.structure_label[i] == StructureLabel::Hippocampus)
            REQUIRE(mesh.peripheral_class[i] == PeripheralClass::Absent);
    // Normals are well-defined and unit length everywhere.
    auto normals = vertex_normals(mesh.vertices, mesh.faces);
    for (const auto& n : normals) REQUIRE(n.norm() == Approx(1.0).margin(1e-9));
}

TEST_CASE("shared ring belongs to both submeshes") {
    auto mesh = generate_synthetic_joint_template(small_spec());
    auto lv = extract_submesh(mesh, StructureLabel::Lv);
    auto hip = extract_submesh(mesh, StructureLabel::Hippocampus);
    std::set<int> lv_ids(lv.vert_ids.begin(), lv.vert_ids.end());
    std::set<int> hip_ids(hip.vert_ids.begin(), hip.vert_ids.end());
    int shared_seen = 0;
    for (int i = 0; i < mesh.vertex_count(); ++i)
        if (mesh.structure_label[i] == StructureLabel::Shared) {
            ++shared_seen;
            REQUIRE(lv_ids.count(i) == 1);
            REQUIRE(hip_ids.count(i) == 1);
        }
    REQUIRE(shared_seen > 0);
    // And they are the only overlap.
    int overlap = 0;
    for (int id : lv_ids) overlap += hip_ids.count(id);
    REQUIRE(overlap == shared_seen);
}

TEST_CASE("both sides generate and mirror across the midline") {
    TemplateSpec left = small_spec();
    TemplateSpec right = small_spec();
    right.side = Side::Right;
    auto a = generate_synthetic_joint_template(left);
    auto b = generate_synthetic_joint_template(right);
    REQUIRE(b.vertex_count() == a.vertex_count());
    double ax = 0.0, bx = 0.0;
    for (const auto& p : a.vertices) ax += p.x();
    for (const auto& p : b.vertices) bx += p.x();
    REQUIRE(ax < 0.0);
    REQUIRE(bx > 0.0);
    for (int i = 0; i < b.vertex_count(); ++i) REQUIRE(b.side[i] == Side::Right);
}

TEST_CASE("template spec validation") {
    TemplateSpec bad;
    bad.edge_length = 0.0;
    REQUIRE_THROWS_AS(generate_synthetic_joint_template(bad), parameter_error);

    TemplateSpec bad2 = small_spec();
    bad2.shared_ring_count = 6;  // below the minimum ring size
    REQUIRE_THROWS_AS(generate_synthetic_joint_template(bad2), parameter_error);

    TemplateSpec bad3 = small_spec();
    bad3.shared_ring_count = 15;  // odd: strips need the half-step stagger
    REQUIRE_THROWS_AS(generate_synthetic_joint_template(bad3), parameter_error);

    TemplateSpec bad4 = small_spec();
    bad4.lv_centerline = {{0, 0, 0}, {10, 0, 0}};
    bad4.hip_centerline = {{50, 0, 0}, {60, 0, 0}};  // detached from the LV end
    REQUIRE_THROWS_AS(generate_synthetic_joint_template(bad4), parameter_error);

    TemplateSpec bad5 = small_spec();
    bad5.hip_radius_base = -1.0;
    REQUIRE_THROWS_AS(generate_synthetic_joint_template(bad5), parameter_error);
}

TEST_CASE("cached template generation returns one shared instance") {
    TemplateSpec spec = small_spec();
    const LabeledMesh& a = cached_joint_template(spec);
    const LabeledMesh& b = cached_joint_template(spec);
    REQUIRE(&a == &b);
    auto fresh = generate_synthetic_joint_template(spec);
    REQUIRE(a.vertex_count() == fresh.vertex_count());
    for (int i = 0; i < fresh.vertex_count(); ++i)
        REQUIRE((a.vertices[i] - fresh.vertices[i]).norm() == 0.0);

    TemplateSpec other = spec;
    other.seed = spec.seed + 1;
    const LabeledMesh& c = cached_joint_template(other);
    REQUIRE(&c != &a);
}
