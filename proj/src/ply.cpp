#include "sdfsplat/ply.hpp"

#include "ply_internal.hpp"
#include "sdfsplat/error.hpp"

#include <cstring>
#include <fstream>
#include <sstream>

namespace sdfsplat {

namespace detail {

const PlyProperty* PlyElement::find(const std::string& prop) const {
    for (const auto& p : properties)
        if (p.name == prop) return &p;
    return nullptr;
}

namespace {

std::size_t type_size(const std::string& t) {
    if (t == "char" || t == "uchar" || t == "int8" || t == "uint8") return 1;
    if (t == "short" || t == "ushort" || t == "int16" || t == "uint16") return 2;
    if (t == "int" || t == "uint" || t == "float" || t == "int32" || t == "uint32" || t == "float32") return 4;
    if (t == "double" || t == "float64") return 8;
    return 0;
}

}  // namespace

PlyHeader read_ply_header(std::istream& in, const std::string& source) {
    std::string line;
    if (!std::getline(in, line) || line != "ply") throw FormatError(source + ": not a PLY file");
    PlyHeader header;
    bool format_ok = false;
    while (true) {
        if (!std::getline(in, line)) throw FormatError(source + ": PLY header not terminated");
        if (!line.empty() && line.back() == '\r') line.pop_back();
        std::istringstream ls(line);
        std::string word;
        ls >> word;
        if (word == "end_header") break;
        if (word == "comment" || word == "obj_info" || word.empty()) continue;
        if (word == "format") {
            std::string fmt;
            ls >> fmt;
            if (fmt != "binary_little_endian") throw FormatError(source + ": only binary_little_endian PLY is supported");
            format_ok = true;
        } else if (word == "element") {
            PlyElement e;
            ls >> e.name >> e.count;
            if (!ls) throw FormatError(source + ": malformed element line");
            header.elements.push_back(e);
        } else if (word == "property") {
            if (header.elements.empty()) throw FormatError(source + ": property before element");
            PlyElement& e = header.elements.back();
            std::string type;
            ls >> type;
            if (type == "list") {
                e.has_list = true;
                continue;
            }
            PlyProperty p;
            p.type = type;
            ls >> p.name;
            p.size = type_size(type);
            if (p.size == 0 || p.name.empty()) throw FormatError(source + ": unsupported property '" + line + "'");
            p.offset = e.stride;
            e.stride += p.size;
            e.properties.push_back(p);
        } else {
            throw FormatError(source + ": unexpected header line '" + line + "'");
        }
    }
    if (!format_ok) throw FormatError(source + ": missing format line");
    return header;
}

double read_ply_scalar(const unsigned char* record, const PlyProperty& prop) {
    const unsigned char* p = record + prop.offset;
    auto get = [p]<typename T>(T) {
        T v;
        std::memcpy(&v, p, sizeof(T));
        return static_cast<double>(v);
    };
    const std::string& t = prop.type;
    if (t == "float" || t == "float32") return get(float{});
    if (t == "double" || t == "float64") return get(double{});
    if (t == "uchar" || t == "uint8") return get(std::uint8_t{});
    if (t == "char" || t == "int8") return get(std::int8_t{});
    if (t == "short" || t == "int16") return get(std::int16_t{});
    if (t == "ushort" || t == "uint16") return get(std::uint16_t{});
    if (t == "int" || t == "int32") return get(std::int32_t{});
    return get(std::uint32_t{});
}

}  // namespace detail

namespace {

constexpr int kRestCount = 45;

}  // namespace

void save_gaussians(const GaussianSet& set, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write " + path.string());
    out << "ply\nformat binary_little_endian 1.0\nelement vertex " << set.size() << "\n";
    for (const char* n : {"x", "y", "z", "nx", "ny", "nz", "f_dc_0", "f_dc_1", "f_dc_2"}) out << "property float " << n << "\n";
    for (int i = 0; i < kRestCount; ++i) out << "property float f_rest_" << i << "\n";
    out << "property float opacity\n";
    for (int i = 0; i < 3; ++i) out << "property float scale_" << i << "\n";
    for (int i = 0; i < 4; ++i) out << "property float rot_" << i << "\n";
    out << "end_header\n";

    std::vector<float> rec;
    for (const auto& g : set.items) {
        rec.clear();
        for (int k = 0; k < 3; ++k) rec.push_back(static_cast<float>(g.mean[k]));
        rec.insert(rec.end(), {0.0f, 0.0f, 0.0f});
        for (int c = 0; c < 3; ++c) rec.push_back(static_cast<float>(g.sh(0, c)));
        for (int c = 0; c < 3; ++c)
            for (int k = 1; k < kShBasisCount; ++k) rec.push_back(static_cast<float>(g.sh(k, c)));
        rec.push_back(static_cast<float>(g.opacity_logit));
        for (int k = 0; k < 3; ++k) rec.push_back(static_cast<float>(g.log_scale[k]));
        for (int k = 0; k < 4; ++k) rec.push_back(static_cast<float>(g.rotation[k]));
        out.write(reinterpret_cast<const char*>(rec.data()), static_cast<std::streamsize>(rec.size() * sizeof(float)));
    }
    if (!out) throw IoError("failed writing " + path.string());
}

GaussianSet load_gaussians(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot read " + path.string());
    const std::string src = path.string();
    const detail::PlyHeader header = detail::read_ply_header(in, src);

    const detail::PlyElement* vertex = nullptr;
    for (const auto& e : header.elements) {
        if (e.name == "vertex") {
            vertex = &e;
            break;
        }
        if (e.has_list) throw FormatError(src + ": list element before vertex data");
        in.seekg(static_cast<std::streamoff>(e.count * e.stride), std::ios::cur);
    }
    if (!vertex) throw FormatError(src + ": no vertex element");
    if (vertex->has_list) throw FormatError(src + ": vertex element has list properties");

    auto need = [&](const std::string& name) {
        const auto* p = vertex->find(name);
        if (!p) throw FormatError(src + ": missing property " + name);
        return p;
    };
    const detail::PlyProperty* pos[3] = {need("x"), need("y"), need("z")};
    const detail::PlyProperty* dc[3] = {need("f_dc_0"), need("f_dc_1"), need("f_dc_2")};
    const detail::PlyProperty* opacity = need("opacity");
    const detail::PlyProperty* scale[3] = {need("scale_0"), need("scale_1"), need("scale_2")};
    const detail::PlyProperty* rot[4] = {need("rot_0"), need("rot_1"), need("rot_2"), need("rot_3")};
    std::vector<const detail::PlyProperty*> rest;
    for (int i = 0;; ++i) {
        const auto* p = vertex->find("f_rest_" + std::to_string(i));
        if (!p) break;
        rest.push_back(p);
    }
    if (rest.size() != 0 && rest.size() != 9 && rest.size() != 24 && rest.size() != 45)
        throw FormatError(src + ": unexpected f_rest count " + std::to_string(rest.size()));
    const int per_channel = static_cast<int>(rest.size()) / 3;

    GaussianSet set;
    set.items.reserve(vertex->count);
    std::vector<unsigned char> buf(vertex->stride);
    for (std::size_t i = 0; i < vertex->count; ++i) {
        in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
        if (!in) throw FormatError(src + ": truncated vertex data");
        Gaussian g;
        for (int k = 0; k < 3; ++k) {
            g.mean[k] = detail::read_ply_scalar(buf.data(), *pos[k]);
            g.sh(0, k) = detail::read_ply_scalar(buf.data(), *dc[k]);
            g.log_scale[k] = detail::read_ply_scalar(buf.data(), *scale[k]);
        }
        for (int c = 0; c < 3; ++c)
            for (int k = 0; k < per_channel; ++k)
                g.sh(k + 1, c) = detail::read_ply_scalar(buf.data(), *rest[static_cast<std::size_t>(c * per_channel + k)]);
        g.opacity_logit = detail::read_ply_scalar(buf.data(), *opacity);
        for (int k = 0; k < 4; ++k) g.rotation[k] = detail::read_ply_scalar(buf.data(), *rot[k]);
        const double n = g.rotation.norm();
        if (!(n > 0.0) || !std::isfinite(n)) throw FormatError(src + ": zero or non-finite rotation at vertex " + std::to_string(i));
        // Float32 round trips keep |q| within ~1e-7 of 1; renormalizing those would break exactness.
        if (std::abs(n - 1.0) > 1e-6) g.rotation /= n;
        set.items.push_back(g);
    }
    return set;
}

}  // namespace sdfsplat
