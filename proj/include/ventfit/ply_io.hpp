#pragma once

#include "ventfit/mesh.hpp"

#include <cstring>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

namespace ventfit {

enum class PlyFormat { Ascii, BinaryLE };

namespace detail {

inline int ply_type_size(const std::string& t) {
    if (t == "char" || t == "int8" || t == "uchar" || t == "uint8") return 1;
    if (t == "short" || t == "int16" || t == "ushort" || t == "uint16") return 2;
    if (t == "int" || t == "int32" || t == "uint" || t == "uint32") return 4;
    if (t == "float" || t == "float32") return 4;
    if (t == "double" || t == "float64") return 8;
    return 0;
}

inline bool ply_type_signed(const std::string& t) {
    return t == "char" || t == "int8" || t == "short" || t == "int16" || t == "int" ||
           t == "int32";
}

inline double ply_decode(const char* p, const std::string& t) {
    auto u8 = [&] { std::uint8_t v; std::memcpy(&v, p, 1); return v; };
    auto u16 = [&] { std::uint16_t v; std::memcpy(&v, p, 2); return v; };
    auto u32 = [&] { std::uint32_t v; std::memcpy(&v, p, 4); return v; };
    if (t == "char" || t == "int8") return static_cast<std::int8_t>(u8());
    if (t == "uchar" || t == "uint8") return u8();
    if (t == "short" || t == "int16") return static_cast<std::int16_t>(u16());
    if (t == "ushort" || t == "uint16") return u16();
    if (t == "int" || t == "int32") return static_cast<std::int32_t>(u32());
    if (t == "uint" || t == "uint32") return u32();
    if (t == "float" || t == "float32") {
        float v;
        std::memcpy(&v, p, 4);
        return v;
    }
    double v;
    std::memcpy(&v, p, 8);
    return v;
}

struct PlyProperty {
    std::string name;
    std::string type;       // value type (list: element type)
    bool is_list = false;
    std::string count_type;
};

struct PlyElement {
    std::string name;
    long count = 0;
    std::vector<PlyProperty> props;
};

}  // namespace detail

inline LabeledMesh load_labeled_mesh(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw input_error("cannot open mesh file: " + path);

    auto fail = [&path](long line, const std::string& msg) -> void {
        throw format_error(path + ":" + std::to_string(line) + ": " + msg);
    };

    std::string line;
    long line_no = 0;
    auto next_line = [&]() -> std::string {
        if (!std::getline(in, line)) fail(line_no, "unexpected end of header");
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        return line;
    };

    if (next_line() != "ply") fail(line_no, "not a PLY file");
    PlyFormat format = PlyFormat::Ascii;
    bool have_format = false;
    std::vector<detail::PlyElement> elements;
    while (true) {
        std::istringstream ls(next_line());
        std::string tok;
        ls >> tok;
        if (tok == "comment" || tok == "obj_info" || tok.empty()) continue;
        if (tok == "format") {
            std::string f, ver;
            ls >> f >> ver;
            if (f == "ascii")
                format = PlyFormat::Ascii;
            else if (f == "binary_little_endian")
                format = PlyFormat::BinaryLE;
            else
                fail(line_no, "unsupported PLY format: " + f);
            have_format = true;
        } else if (tok == "element") {
            detail::PlyElement el;
            ls >> el.name >> el.count;
            if (!ls || el.count < 0) fail(line_no, "bad element declaration");
            elements.push_back(el);
        } else if (tok == "property") {
            if (elements.empty()) fail(line_no, "property before element");
            detail::PlyProperty p;
            std::string t;
            ls >> t;
            if (t == "list") {
                p.is_list = true;
                ls >> p.count_type >> p.type >> p.name;
            } else {
                p.type = t;
                ls >> p.name;
            }
            if (!ls || detail::ply_type_size(p.type) == 0 ||
                (p.is_list && detail::ply_type_size(p.count_type) == 0))
                fail(line_no, "bad property declaration");
            elements.back().props.push_back(p);
        } else if (tok == "end_header") {
            break;
        } else {
            fail(line_no, "unexpected header token: " + tok);
        }
    }
    if (!have_format) fail(line_no, "missing format line");

    LabeledMesh mesh;
    bool saw_vertex = false, saw_face = false;
    for (const auto& el : elements) {
        const bool is_vertex = el.name == "vertex";
        const bool is_face = el.name == "face";
        if (is_vertex) saw_vertex = true;
        if (is_face) saw_face = true;

        int ix = -1, iy = -1, iz = -1, ilabel = -1, iperi = -1, iside = -1, ilist = -1;
        for (std::size_t p = 0; p < el.props.size(); ++p) {
            const auto& pr = el.props[p];
            if (pr.is_list) {
                if (is_face && (pr.name == "vertex_indices" || pr.name == "vertex_index"))
                    ilist = static_cast<int>(p);
                continue;
            }
            if (!is_vertex) continue;
            if (pr.name == "x") ix = static_cast<int>(p);
            else if (pr.name == "y") iy = static_cast<int>(p);
            else if (pr.name == "z") iz = static_cast<int>(p);
            else if (pr.name == "structure_label") ilabel = static_cast<int>(p);
            else if (pr.name == "peripheral_class") iperi = static_cast<int>(p);
            else if (pr.name == "side") iside = static_cast<int>(p);
        }
        if (is_vertex && (ix < 0 || iy < 0 || iz < 0))
            fail(line_no, "vertex element lacks x/y/z properties");
        if (is_vertex && ilabel < 0)
            fail(line_no, "vertex element lacks structure_label property");
        if (is_face && ilist < 0) fail(line_no, "face element lacks a vertex index list");

        if (is_vertex) {
            mesh.vertices.reserve(el.count);
            mesh.structure_label.reserve(el.count);
        }

        std::vector<double> row(el.props.size(), 0.0);
        std::vector<long> list_vals;
        for (long r = 0; r < el.count; ++r) {
            list_vals.clear();
            if (format == PlyFormat::Ascii) {
                std::string data_line;
                do {
                    if (!std::getline(in, data_line))
                        fail(line_no, el.name + " record " + std::to_string(r) + ": missing");
                    ++line_no;
                    if (!data_line.empty() && data_line.back() == '\r') data_line.pop_back();
                } while (data_line.empty());
                std::istringstream ls(data_line);
                for (std::size_t p = 0; p < el.props.size(); ++p) {
                    if (el.props[p].is_list) {
                        long n = 0;
                        if (!(ls >> n)) fail(line_no, "bad list count");
                        for (long k = 0; k < n; ++k) {
                            long v;
                            if (!(ls >> v)) fail(line_no, "bad list entry");
                            list_vals.push_back(v);
                        }
                    } else if (!(ls >> row[p])) {
                        fail(line_no, el.name + " record " + std::to_string(r) +
                                          ": missing value for " + el.props[p].name);
                    }
                }
            } else {
                char buf[8];
                for (std::size_t p = 0; p < el.props.size(); ++p) {
                    const auto& pr = el.props[p];
                    if (pr.is_list) {
                        int cs = detail::ply_type_size(pr.count_type);
                        if (!in.read(buf, cs))
                            fail(line_no, el.name + " record " + std::to_string(r) +
                                              ": truncated payload");
                        long n = static_cast<long>(detail::ply_decode(buf, pr.count_type));
                        int vs = detail::ply_type_size(pr.type);
                        for (long k = 0; k < n; ++k) {
                            if (!in.read(buf, vs))
                                fail(line_no, "truncated list payload");
                            list_vals.push_back(
                                static_cast<long>(detail::ply_decode(buf, pr.type)));
                        }
                    } else {
                        int vs = detail::ply_type_size(pr.type);
                        if (!in.read(buf, vs))
                            fail(line_no, el.name + " record " + std::to_string(r) +
                                              ": truncated payload");
                        row[p] = detail::ply_decode(buf, pr.type);
                    }
                }
            }

            if (is_vertex) {
                mesh.vertices.emplace_back(row[ix], row[iy], row[iz]);
                double lab = row[ilabel];
                if (lab != 0.0 && lab != 1.0 && lab != 2.0)
                    fail(line_no, "vertex " + std::to_string(r) + ": structure_label out of range");
                mesh.structure_label.push_back(static_cast<StructureLabel>(
                    static_cast<std::uint8_t>(lab)));
                double peri = (iperi >= 0) ? row[iperi] : -1.0;
                if (peri < -1.0 || peri > 4.0 || peri != std::floor(peri))
                    fail(line_no, "vertex " + std::to_string(r) + ": peripheral_class out of range");
                mesh.peripheral_class.push_back(
                    static_cast<PeripheralClass>(static_cast<int>(peri)));
                double side = (iside >= 0) ? row[iside] : 0.0;
                if (side != 0.0 && side != 1.0)
                    fail(line_no, "vertex " + std::to_string(r) + ": side out of range");
                mesh.side.push_back(static_cast<Side>(static_cast<std::uint8_t>(side)));
            } else if (is_face) {
                if (list_vals.size() != 3)
                    fail(line_no, "face " + std::to_string(r) + ": only triangles are supported");
                mesh.faces.push_back({static_cast<int>(list_vals[0]),
                                      static_cast<int>(list_vals[1]),
                                      static_cast<int>(list_vals[2])});
            }
        }
    }
    if (!saw_vertex) throw format_error(path + ": missing vertex element");
    if (!saw_face) throw format_error(path + ": missing face element");

    try {
        validate_labeled_mesh(mesh);
    } catch (const geometry_error& e) {
        throw format_error(path + ": " + e.what());
    }
    return mesh;
}

inline void save_labeled_mesh(const LabeledMesh& mesh, const std::string& path,
                              PlyFormat format = PlyFormat::Ascii) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw input_error("cannot write mesh file: " + path);
    out << "ply\n";
    out << (format == PlyFormat::Ascii ? "format ascii 1.0\n" : "format binary_little_endian 1.0\n");
    out << "element vertex " << mesh.vertex_count() << "\n";
    out << "property double x\nproperty double y\nproperty double z\n";
    out << "property uchar structure_label\n";
    out << "property char peripheral_class\n";
    out << "property uchar side\n";
    out << "element face " << mesh.face_count() << "\n";
    out << "property list uchar int vertex_indices\n";
    out << "end_header\n";
    if (format == PlyFormat::Ascii) {
        for (int i = 0; i < mesh.vertex_count(); ++i) {
            const Vec3& v = mesh.vertices[i];
            out << fmt_double(v.x()) << ' ' << fmt_double(v.y()) << ' ' << fmt_double(v.z())
                << ' ' << static_cast<int>(mesh.structure_label[i]) << ' '
                << static_cast<int>(mesh.peripheral_class[i]) << ' '
                << static_cast<int>(mesh.side[i]) << "\n";
        }
        for (const Face& f : mesh.faces) out << "3 " << f[0] << ' ' << f[1] << ' ' << f[2] << "\n";
    } else {
        for (int i = 0; i < mesh.vertex_count(); ++i) {
            double xyz[3] = {mesh.vertices[i].x(), mesh.vertices[i].y(), mesh.vertices[i].z()};
            out.write(reinterpret_cast<const char*>(xyz), 24);
            std::uint8_t lab = static_cast<std::uint8_t>(mesh.structure_label[i]);
            std::int8_t peri = static_cast<std::int8_t>(mesh.peripheral_class[i]);
            std::uint8_t side = static_cast<std::uint8_t>(mesh.side[i]);
            out.write(reinterpret_cast<const char*>(&lab), 1);
            out.write(reinterpret_cast<const char*>(&peri), 1);
            out.write(reinterpret_cast<const char*>(&side), 1);
        }
        for (const Face& f : mesh.faces) {
            std::uint8_t n = 3;
            out.write(reinterpret_cast<const char*>(&n), 1);
            std::int32_t idx[3] = {f[0], f[1], f[2]};
            out.write(reinterpret_cast<const char*>(idx), 12);
        }
    }
    if (!out) throw input_error("write failed: " + path);
}

}  // namespace ventfit
