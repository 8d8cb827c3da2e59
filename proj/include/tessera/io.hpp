#pragma once

#include <algorithm>
#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <istream>
#include <optional>
#include <set>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "tessera/change_detect.hpp"
#include "tessera/detail/codec.hpp"
#include "tessera/mesh.hpp"
#include "tessera/mosaic.hpp"
#include "tessera/stitcher.hpp"

namespace tessera {

enum class MeshEncoding { Text, Binary };

using Rgb = std::array<std::uint8_t, 3>;

/// Mesh plus the optional per-face channels a file may carry.
struct MeshFile {
    SurfaceMesh mesh;
    std::vector<std::uint8_t> seam;  ///< empty when the file has no seam property
    std::vector<Rgb> colors;         ///< empty when the file has no colors
};

namespace detail {

enum class PlyType { Int8, UInt8, Int16, UInt16, Int32, UInt32, Float32, Float64 };

inline std::optional<PlyType> ply_type(std::string_view s)
{
    if (s == "char" || s == "int8") return PlyType::Int8;
    if (s == "uchar" || s == "uint8") return PlyType::UInt8;
    if (s == "short" || s == "int16") return PlyType::Int16;
    if (s == "ushort" || s == "uint16") return PlyType::UInt16;
    if (s == "int" || s == "int32") return PlyType::Int32;
    if (s == "uint" || s == "uint32") return PlyType::UInt32;
    if (s == "float" || s == "float32") return PlyType::Float32;
    if (s == "double" || s == "float64") return PlyType::Float64;
    return std::nullopt;
}

struct PlyProperty {
    std::string name;
    PlyType type = PlyType::Float64;
    bool is_list = false;
    PlyType count_type = PlyType::UInt8;
};

struct PlyElement {
    std::string name;
    std::size_t count = 0;
    std::vector<PlyProperty> props;

    std::optional<std::size_t> find(std::string_view n) const
    {
        for (std::size_t i = 0; i < props.size(); ++i)
            if (props[i].name == n) return i;
        return std::nullopt;
    }
};

enum class PlyFormat { Ascii, BinaryLE, BinaryBE };

struct PlyHeader {
    PlyFormat format = PlyFormat::Ascii;
    std::vector<PlyElement> elements;
    std::optional<MeshId> mesh_id;
};

inline PlyHeader read_ply_header(std::istream& in)
{
    PlyHeader h;
    std::string line;
    if (!std::getline(in, line) || trim(line) != "ply") throw Error(ErrorCode::MalformedHeader, "missing 'ply' magic");
    bool have_format = false;
    for (;;) {
        if (!std::getline(in, line)) throw Error(ErrorCode::MalformedHeader, "unterminated PLY header");
        const auto tok = split_ws(line);
        if (tok.empty()) continue;
        if (tok[0] == "end_header") break;
        if (tok[0] == "format") {
            if (tok.size() != 3) throw Error(ErrorCode::MalformedHeader, "bad format line");
            if (tok[1] == "ascii")
                h.format = PlyFormat::Ascii;
            else if (tok[1] == "binary_little_endian")
                h.format = PlyFormat::BinaryLE;
            else if (tok[1] == "binary_big_endian")
                h.format = PlyFormat::BinaryBE;
            else
                throw Error(ErrorCode::MalformedHeader, "unknown PLY format " + std::string(tok[1]));
            have_format = true;
        } else if (tok[0] == "comment" || tok[0] == "obj_info") {
            if (tok.size() == 3 && tok[0] == "comment" && tok[1] == "tessera_mesh_id")
                if (auto v = parse_int<MeshId>(tok[2])) h.mesh_id = *v;
        } else if (tok[0] == "element") {
            if (tok.size() != 3) throw Error(ErrorCode::MalformedHeader, "bad element line");
            auto n = parse_int<std::size_t>(tok[2]);
            if (!n) throw Error(ErrorCode::MalformedHeader, "bad element count");
            h.elements.push_back({std::string(tok[1]), *n, {}});
        } else if (tok[0] == "property") {
            if (h.elements.empty()) throw Error(ErrorCode::MalformedHeader, "property before element");
            PlyProperty p;
            if (tok.size() == 5 && tok[1] == "list") {
                auto ct = ply_type(tok[2]);
                auto it = ply_type(tok[3]);
                if (!ct || !it) throw Error(ErrorCode::MalformedHeader, "bad list property types");
                p.is_list = true;
                p.count_type = *ct;
                p.type = *it;
                p.name = tok[4];
            } else if (tok.size() == 3) {
                auto t = ply_type(tok[1]);
                if (!t) throw Error(ErrorCode::MalformedHeader, "unknown property type " + std::string(tok[1]));
                p.type = *t;
                p.name = tok[2];
            } else {
                throw Error(ErrorCode::MalformedHeader, "bad property line");
            }
            h.elements.back().props.push_back(std::move(p));
        } else {
            throw Error(ErrorCode::MalformedHeader, "unexpected header line: " + line);
        }
    }
    if (!have_format) throw Error(ErrorCode::MalformedHeader, "missing format line");
    return h;
}

/// Reads one scalar as double (exact for every PLY scalar type).
class PlyValueReader {
public:
    PlyValueReader(std::istream& in, PlyFormat f) : in_(in), format_(f) {}

    double read(PlyType t)
    {
        if (format_ == PlyFormat::Ascii) return read_ascii(t);
        switch (t) {
        case PlyType::Int8: return bin<std::int8_t>();
        case PlyType::UInt8: return bin<std::uint8_t>();
        case PlyType::Int16: return bin<std::int16_t>();
        case PlyType::UInt16: return bin<std::uint16_t>();
        case PlyType::Int32: return bin<std::int32_t>();
        case PlyType::UInt32: return bin<std::uint32_t>();
        case PlyType::Float32: return bin<float>();
        case PlyType::Float64: return bin<double>();
        }
        return 0.0;
    }

    /// Ascii rows are line-based; call at the start of every element row.
    void next_row()
    {
        if (format_ != PlyFormat::Ascii) return;
        do {
            if (!std::getline(in_, row_)) throw Error(ErrorCode::MalformedHeader, "PLY body ends early");
            tokens_ = split_ws(row_);
        } while (tokens_.empty());
        pos_ = 0;
    }

    void end_row()
    {
        if (format_ == PlyFormat::Ascii && pos_ != tokens_.size())
            throw Error(ErrorCode::MalformedHeader, "PLY row has extra values");
    }

private:
    template <class T>
    double bin()
    {
        unsigned char buf[sizeof(T)];
        if (!in_.read(reinterpret_cast<char*>(buf), sizeof(T)))
            throw Error(ErrorCode::MalformedHeader, "PLY body ends early");
        const bool file_little = format_ == PlyFormat::BinaryLE;
        if (file_little != (std::endian::native == std::endian::little)) std::reverse(buf, buf + sizeof(T));
        T v;
        std::memcpy(&v, buf, sizeof(T));
        return static_cast<double>(v);
    }

    double read_ascii(PlyType t)
    {
        if (pos_ >= tokens_.size()) throw Error(ErrorCode::MalformedHeader, "PLY row has too few values");
        const auto tok = tokens_[pos_++];
        if (t == PlyType::Float32 || t == PlyType::Float64) {
            auto v = parse_double(tok);
            if (!v) throw Error(ErrorCode::MalformedHeader, "bad number '" + std::string(tok) + "'");
            return t == PlyType::Float32 ? static_cast<double>(static_cast<float>(*v)) : *v;
        }
        auto v = parse_int<std::int64_t>(tok);
        if (!v) throw Error(ErrorCode::MalformedHeader, "bad integer '" + std::string(tok) + "'");
        return static_cast<double>(*v);
    }

    std::istream& in_;
    PlyFormat format_;
    std::string row_;
    std::vector<std::string_view> tokens_;
    std::size_t pos_ = 0;
};

template <class T>
void put_bin(std::ostream& os, T v)
{
    write_le(os, v);
}

} // namespace detail

inline MeshFile read_mesh_file(std::istream& in, MeshId fallback_id = 0)
{
    using namespace detail;
    const PlyHeader h = read_ply_header(in);
    const PlyElement* ve = nullptr;
    const PlyElement* fe = nullptr;
    for (const auto& e : h.elements) {
        if (e.name == "vertex") ve = &e;
        if (e.name == "face") fe = &e;
    }
    if (!ve) throw Error(ErrorCode::MissingRequiredProperty, "no vertex element");
    if (!fe) throw Error(ErrorCode::MissingRequiredProperty, "no face element");
    auto need = [](const PlyElement& e, std::string_view n) {
        auto i = e.find(n);
        if (!i) throw Error(ErrorCode::MissingRequiredProperty, "missing property '" + std::string(n) + "' on " + e.name);
        return *i;
    };
    const std::size_t px = need(*ve, "x"), py = need(*ve, "y"), pz = need(*ve, "z");
    std::size_t pidx;
    if (auto i = fe->find("vertex_indices"))
        pidx = *i;
    else
        pidx = need(*fe, "vertex_index");
    if (!fe->props[pidx].is_list) throw Error(ErrorCode::MalformedHeader, "vertex_indices must be a list");
    const std::size_t pvx = need(*fe, "vx"), pvy = need(*fe, "vy"), pvz = need(*fe, "vz");
    const std::size_t ptf = need(*fe, "t_first"), ptl = need(*fe, "t_last");
    const auto psrc = fe->find("source_id");
    const auto pseam = fe->find("seam");
    const auto pr = fe->find("red"), pg = fe->find("green"), pb = fe->find("blue");
    const MeshId id = h.mesh_id.value_or(fallback_id);

    std::vector<Vec3> verts;
    std::vector<Face> faces;
    std::vector<TriangleAttr> attrs;
    MeshFile out;
    PlyValueReader rd(in, h.format);
    std::vector<double> scalars;
    for (const auto& e : h.elements) {
        for (std::size_t row = 0; row < e.count; ++row) {
            rd.next_row();
            scalars.assign(e.props.size(), 0.0);
            std::vector<double> list;
            for (std::size_t p = 0; p < e.props.size(); ++p) {
                const auto& prop = e.props[p];
                if (prop.is_list) {
                    const double cnt = rd.read(prop.count_type);
                    if (cnt < 0 || cnt > 1e6) throw Error(ErrorCode::MalformedHeader, "bad list length");
                    std::vector<double> items(static_cast<std::size_t>(cnt));
                    for (auto& it : items) it = rd.read(prop.type);
                    if (&e == fe && p == pidx) list = std::move(items);
                } else {
                    scalars[p] = rd.read(prop.type);
                }
            }
            rd.end_row();
            if (&e == ve) {
                verts.push_back({scalars[px], scalars[py], scalars[pz]});
            } else if (&e == fe) {
                if (list.size() != 3) throw Error(ErrorCode::InvalidMesh, "face is not a triangle");
                Face f{};
                for (int k = 0; k < 3; ++k) {
                    if (list[k] < 0 || list[k] != std::floor(list[k]))
                        throw Error(ErrorCode::InvalidMesh, "bad vertex index");
                    f[k] = static_cast<std::uint32_t>(list[k]);
                }
                faces.push_back(f);
                TriangleAttr a;
                a.viewpoint = {scalars[pvx], scalars[pvy], scalars[pvz]};
                a.t_first = scalars[ptf];
                a.t_last = scalars[ptl];
                a.source_id = psrc ? static_cast<MeshId>(scalars[*psrc]) : id;
                attrs.push_back(a);
                if (pseam) out.seam.push_back(static_cast<std::uint8_t>(scalars[*pseam]));
                if (pr && pg && pb)
                    out.colors.push_back({static_cast<std::uint8_t>(scalars[*pr]), static_cast<std::uint8_t>(scalars[*pg]),
                                          static_cast<std::uint8_t>(scalars[*pb])});
            }
        }
    }
    out.mesh = SurfaceMesh(id, std::move(verts), std::move(faces), std::move(attrs));
    return out;
}

inline MeshFile read_mesh_file(const std::filesystem::path& path, MeshId fallback_id = 0)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCode::Io, "cannot open " + path.string());
    return read_mesh_file(in, fallback_id);
}

inline SurfaceMesh read_mesh(const std::filesystem::path& path, MeshId fallback_id = 0)
{
    return read_mesh_file(path, fallback_id).mesh;
}

struct MeshWriteOptions {
    MeshEncoding encoding = MeshEncoding::Binary;
    std::span<const std::uint8_t> seam;  ///< written when non-empty
    std::span<const Rgb> colors;         ///< written when non-empty
};

inline void write_mesh(std::ostream& os, const SurfaceMesh& mesh, const MeshWriteOptions& opt = {})
{
    using detail::format_double;
    const bool text = opt.encoding == MeshEncoding::Text;
    if (!opt.seam.empty() && opt.seam.size() != mesh.triangle_count())
        throw Error(ErrorCode::InvalidMesh, "seam tag count does not match triangle count");
    if (!opt.colors.empty() && opt.colors.size() != mesh.triangle_count())
        throw Error(ErrorCode::InvalidMesh, "color count does not match triangle count");
    os << "ply\n" << (text ? "format ascii 1.0\n" : "format binary_little_endian 1.0\n");
    os << "comment tessera_mesh_id " << mesh.id() << '\n';
    os << "element vertex " << mesh.vertex_count() << '\n';
    os << "property double x\nproperty double y\nproperty double z\n";
    os << "element face " << mesh.triangle_count() << '\n';
    os << "property list uchar int vertex_indices\n";
    os << "property double vx\nproperty double vy\nproperty double vz\n";
    os << "property double t_first\nproperty double t_last\nproperty uint source_id\n";
    if (!opt.seam.empty()) os << "property uchar seam\n";
    if (!opt.colors.empty()) os << "property uchar red\nproperty uchar green\nproperty uchar blue\n";
    os << "end_header\n";
    if (text) {
        for (const auto& v : mesh.vertices())
            os << format_double(v.x) << ' ' << format_double(v.y) << ' ' << format_double(v.z) << '\n';
        for (std::uint32_t t = 0; t < mesh.triangle_count(); ++t) {
            const Face& f = mesh.face(t);
            const TriangleAttr& a = mesh.attr(t);
            os << "3 " << f[0] << ' ' << f[1] << ' ' << f[2] << ' ' << format_double(a.viewpoint.x) << ' '
               << format_double(a.viewpoint.y) << ' ' << format_double(a.viewpoint.z) << ' ' << format_double(a.t_first)
               << ' ' << format_double(a.t_last) << ' ' << a.source_id;
            if (!opt.seam.empty()) os << ' ' << static_cast<unsigned>(opt.seam[t]);
            if (!opt.colors.empty())
                os << ' ' << static_cast<unsigned>(opt.colors[t][0]) << ' ' << static_cast<unsigned>(opt.colors[t][1])
                   << ' ' << static_cast<unsigned>(opt.colors[t][2]);
            os << '\n';
        }
    } else {
        using detail::put_bin;
        for (const auto& v : mesh.vertices()) {
            put_bin(os, v.x);
            put_bin(os, v.y);
            put_bin(os, v.z);
        }
        for (std::uint32_t t = 0; t < mesh.triangle_count(); ++t) {
            const Face& f = mesh.face(t);
            const TriangleAttr& a = mesh.attr(t);
            put_bin(os, std::uint8_t{3});
            for (auto i : f) put_bin(os, static_cast<std::int32_t>(i));
            put_bin(os, a.viewpoint.x);
            put_bin(os, a.viewpoint.y);
            put_bin(os, a.viewpoint.z);
            put_bin(os, a.t_first);
            put_bin(os, a.t_last);
            put_bin(os, static_cast<std::uint32_t>(a.source_id));
            if (!opt.seam.empty()) put_bin(os, opt.seam[t]);
            if (!opt.colors.empty())
                for (auto c : opt.colors[t]) put_bin(os, c);
        }
    }
    if (!os) throw Error(ErrorCode::Io, "mesh write failed");
}

inline void write_mesh(const std::filesystem::path& path, const SurfaceMesh& mesh, const MeshWriteOptions& opt = {})
{
    std::ofstream os(path, std::ios::binary);
    if (!os) throw Error(ErrorCode::Io, "cannot create " + path.string());
    write_mesh(os, mesh, opt);
}

// ---------------------------------------------------------------------------
// Debug colorization

namespace colors {
inline constexpr Rgb kConsistent{160, 160, 160};
inline constexpr Rgb kConflictingOld{220, 30, 30};
inline constexpr Rgb kConflictingNew{255, 150, 0};
inline constexpr Rgb kSingleOcclusion{255, 0, 255};
inline constexpr Rgb kSingleCoverage{128, 0, 160};
inline constexpr Rgb kSeam{255, 0, 255};

inline Rgb source(MeshId id) noexcept
{
    static constexpr Rgb palette[] = {{138, 43, 226}, {85, 140, 47},  {70, 130, 180}, {218, 165, 32},
                                      {0, 139, 139},  {205, 92, 92},  {60, 179, 113}, {106, 90, 205}};
    return palette[id % std::size(palette)];
}
} // namespace colors

namespace detail {

/// Concatenates meshes (or a subset of their triangles) into one mesh.
template <class Keep>
SurfaceMesh concatenate(const MeshSet& meshes, Keep keep, std::vector<TriangleRef>& refs)
{
    std::vector<Vec3> verts;
    std::vector<Face> faces;
    std::vector<TriangleAttr> attrs;
    refs.clear();
    for (const auto& m : meshes) {
        std::vector<std::int64_t> remap(m.vertex_count(), -1);
        for (std::uint32_t t = 0; t < m.triangle_count(); ++t) {
            if (!keep(TriangleRef{m.id(), t})) continue;
            Face f{};
            for (int k = 0; k < 3; ++k) {
                const auto v = m.face(t)[k];
                if (remap[v] < 0) {
                    remap[v] = static_cast<std::int64_t>(verts.size());
                    verts.push_back(m.vertices()[v]);
                }
                f[k] = static_cast<std::uint32_t>(remap[v]);
            }
            faces.push_back(f);
            attrs.push_back(m.attr(t));
            refs.push_back({m.id(), t});
        }
    }
    return SurfaceMesh(0, std::move(verts), std::move(faces), std::move(attrs));
}

} // namespace detail

inline Rgb classification_color(const ConsistencyRecord& rec, bool newer_side) noexcept
{
    switch (rec.status) {
    case Status::Conflicting: return colors::kConflictingOld;
    case Status::Consistent: return newer_side ? colors::kConflictingNew : colors::kConsistent;
    case Status::Single:
        if (newer_side) return colors::kConflictingNew;
        return rec.single_kind == SingleKind::Occlusion ? colors::kSingleOcclusion : colors::kSingleCoverage;
    }
    return colors::kConsistent;
}

/// Change-detection view: every triangle of every mesh.
inline void export_debug(const std::filesystem::path& path, const MeshSet& meshes, const Classification& records,
                         MeshEncoding enc = MeshEncoding::Binary)
{
    std::set<TriangleRef> newer;
    for (std::size_t mi = 0; mi < meshes.size(); ++mi)
        for (const auto& rec : records.mesh_records(mi))
            for (const auto& c : rec.conflicting_with) newer.insert(c.ref);
    std::vector<TriangleRef> refs;
    const SurfaceMesh all = detail::concatenate(meshes, [](const TriangleRef&) { return true; }, refs);
    std::vector<Rgb> col;
    col.reserve(refs.size());
    for (const auto& r : refs) col.push_back(classification_color(records.at(r), newer.count(r) != 0));
    write_mesh(path, all, {enc, {}, col});
}

/// Mosaic view: kept triangles colored by source mesh.
inline void export_debug(const std::filesystem::path& path, const MeshSet& meshes, const MosaicResult& result,
                         MeshEncoding enc = MeshEncoding::Binary)
{
    std::vector<TriangleRef> refs;
    const SurfaceMesh kept = detail::concatenate(meshes, [&](const TriangleRef& r) { return result.is_kept(r); }, refs);
    std::vector<Rgb> col;
    for (std::uint32_t t = 0; t < kept.triangle_count(); ++t) col.push_back(colors::source(kept.attr(t).source_id));
    write_mesh(path, kept, {enc, {}, col});
}

/// Stitched view: source colors, strip triangles magenta.
inline void export_debug(const std::filesystem::path& path, const SurfaceMesh& mesh, std::span<const std::uint8_t> seam,
                         MeshEncoding enc = MeshEncoding::Binary)
{
    std::vector<Rgb> col;
    for (std::uint32_t t = 0; t < mesh.triangle_count(); ++t)
        col.push_back(!seam.empty() && seam[t] ? colors::kSeam : colors::source(mesh.attr(t).source_id));
    write_mesh(path, mesh, {enc, seam, col});
}

} // namespace tessera
