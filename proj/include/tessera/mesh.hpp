#pragma once

#include <algorithm>
#include <array>
#include <compare>
#include <cstdint>
#include <cstring>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "tessera/error.hpp"
#include "tessera/geometry.hpp"

namespace tessera {

using MeshId = std::uint32_t;
using Face = std::array<std::uint32_t, 3>;

inline constexpr std::int32_t kNoNeighbor = -1;

/// Per-triangle acquisition attributes.
struct TriangleAttr {
    Vec3 viewpoint;
    double t_first = 0.0;
    double t_last = 0.0;
    MeshId source_id = 0;
    /// Negative means "derive from geometry" (triangle area) at mesh construction.
    double quality = -1.0;

    friend bool operator==(const TriangleAttr&, const TriangleAttr&) = default;
};

/// Global triangle address: (mesh id, triangle index).
struct TriangleRef {
    MeshId mesh = 0;
    std::uint32_t tri = 0;

    friend constexpr auto operator<=>(const TriangleRef&, const TriangleRef&) = default;
};

/// Edge k of a triangle joins its vertices k and (k + 1) % 3.
struct EdgeRef {
    std::uint32_t tri = 0;
    std::uint8_t edge = 0;

    friend constexpr auto operator<=>(const EdgeRef&, const EdgeRef&) = default;
};

inline constexpr std::pair<std::uint32_t, std::uint32_t> edge_vertices(const Face& f, int edge) noexcept
{
    return {f[edge], f[(edge + 1) % 3]};
}

struct Adjacency {
    /// neighbor[t][k]: triangle across edge k of t, or kNoNeighbor.
    std::vector<std::array<std::int32_t, 3>> neighbor;
    /// Edges with exactly one incident triangle, sorted by (tri, edge).
    std::vector<EdgeRef> boundary;

    std::size_t neighbor_count(std::uint32_t t) const noexcept
    {
        return static_cast<std::size_t>(std::count_if(neighbor[t].begin(), neighbor[t].end(),
                                                       [](std::int32_t n) { return n != kNoNeighbor; }));
    }
};

/// Edge-to-triangle incidence for an indexed triangle set. Throws
/// NonManifoldEdge when an edge has more than two incident triangles.
inline Adjacency build_adjacency(std::span<const Face> faces)
{
    struct Incidence {
        std::uint64_t key;
        std::uint32_t tri;
        std::uint8_t edge;
    };
    std::vector<Incidence> inc;
    inc.reserve(faces.size() * 3);
    for (std::uint32_t t = 0; t < faces.size(); ++t) {
        for (std::uint8_t k = 0; k < 3; ++k) {
            auto [a, b] = edge_vertices(faces[t], k);
            if (a > b) std::swap(a, b);
            inc.push_back({(std::uint64_t{a} << 32) | b, t, k});
        }
    }
    std::sort(inc.begin(), inc.end(), [](const Incidence& l, const Incidence& r) {
        return l.key != r.key ? l.key < r.key : (l.tri != r.tri ? l.tri < r.tri : l.edge < r.edge);
    });

    Adjacency adj;
    adj.neighbor.assign(faces.size(), {kNoNeighbor, kNoNeighbor, kNoNeighbor});
    for (std::size_t i = 0; i < inc.size();) {
        std::size_t j = i;
        while (j < inc.size() && inc[j].key == inc[i].key) ++j;
        const std::size_t n = j - i;
        if (n > 2) {
            throw Error(ErrorCode::NonManifoldEdge,
                        "edge (" + std::to_string(inc[i].key >> 32) + ", " +
                            std::to_string(inc[i].key & 0xffffffffu) + ") has " + std::to_string(n) +
                            " incident triangles");
        }
        if (n == 2) {
            adj.neighbor[inc[i].tri][inc[i].edge] = static_cast<std::int32_t>(inc[i + 1].tri);
            adj.neighbor[inc[i + 1].tri][inc[i + 1].edge] = static_cast<std::int32_t>(inc[i].tri);
        } else {
            adj.boundary.push_back({inc[i].tri, inc[i].edge});
        }
        i = j;
    }
    std::sort(adj.boundary.begin(), adj.boundary.end());
    return adj;
}

inline double triangle_area(std::span<const Vec3> vertices, const Face& f) noexcept
{
    return area(Triangle{vertices[f[0]], vertices[f[1]], vertices[f[2]]});
}

/// Barycenter of the three per-vertex sensor origins.
inline Vec3 triangle_viewpoint(const Vec3& a, const Vec3& b, const Vec3& c) noexcept { return (a + b + c) / 3.0; }

/// Indexed triangle mesh with acquisition attributes. Immutable once built;
/// the constructor validates every invariant and computes adjacency.
class SurfaceMesh {
public:
    SurfaceMesh() = default;

    SurfaceMesh(MeshId id, std::vector<Vec3> vertices, std::vector<Face> faces, std::vector<TriangleAttr> attrs)
        : id_(id), vertices_(std::move(vertices)), faces_(std::move(faces)), attrs_(std::move(attrs))
    {
        if (attrs_.size() != faces_.size())
            throw Error(ErrorCode::InvalidMesh, "attribute count does not match triangle count");
        for (const auto& v : vertices_)
            if (!is_finite(v)) throw Error(ErrorCode::NonFiniteCoordinate, "vertex coordinate is not finite");
        for (std::size_t t = 0; t < faces_.size(); ++t) {
            const Face& f = faces_[t];
            for (auto v : f)
                if (v >= vertices_.size())
                    throw Error(ErrorCode::InvalidMesh, "triangle " + std::to_string(t) + " has an out-of-range index");
            if (f[0] == f[1] || f[1] == f[2] || f[0] == f[2])
                throw Error(ErrorCode::InvalidMesh, "triangle " + std::to_string(t) + " repeats a vertex");
            TriangleAttr& a = attrs_[t];
            if (!is_finite(a.viewpoint) || !std::isfinite(a.t_first) || !std::isfinite(a.t_last))
                throw Error(ErrorCode::NonFiniteCoordinate, "triangle " + std::to_string(t) + " has non-finite attributes");
            if (a.t_last < a.t_first)
                throw Error(ErrorCode::InvalidMesh, "triangle " + std::to_string(t) + " has t_last < t_first");
            for (auto v : f)
                if (distance(vertices_[v], a.viewpoint) <= 1e-9)
                    throw Error(ErrorCode::InvalidMesh,
                                "triangle " + std::to_string(t) + " viewpoint coincides with a vertex");
            if (a.quality < 0.0) a.quality = triangle_area(vertices_, f);
        }
        adjacency_ = build_adjacency(faces_);
    }

    MeshId id() const noexcept { return id_; }
    std::span<const Vec3> vertices() const noexcept { return vertices_; }
    std::span<const Face> faces() const noexcept { return faces_; }
    std::span<const TriangleAttr> attrs() const noexcept { return attrs_; }
    const Adjacency& adjacency() const noexcept { return adjacency_; }
    std::size_t triangle_count() const noexcept { return faces_.size(); }
    std::size_t vertex_count() const noexcept { return vertices_.size(); }

    const Face& face(std::uint32_t t) const noexcept { return faces_[t]; }
    const TriangleAttr& attr(std::uint32_t t) const noexcept { return attrs_[t]; }

    Triangle triangle(std::uint32_t t) const noexcept
    {
        const Face& f = faces_[t];
        return {vertices_[f[0]], vertices_[f[1]], vertices_[f[2]]};
    }

    double area(std::uint32_t t) const noexcept { return triangle_area(vertices_, faces_[t]); }

    double edge_length(std::uint32_t t, int edge) const noexcept
    {
        const auto [a, b] = edge_vertices(faces_[t], edge);
        return distance(vertices_[a], vertices_[b]);
    }

    /// Summed length of t's edges that have no neighbor.
    double boundary_length(std::uint32_t t) const noexcept
    {
        double s = 0.0;
        for (int k = 0; k < 3; ++k)
            if (adjacency_.neighbor[t][k] == kNoNeighbor) s += edge_length(t, k);
        return s;
    }

    Aabb bounds() const noexcept { return tessera::bounds(vertices_); }

    /// Earliest t_first over all triangles (+inf for an empty mesh).
    double earliest_time() const noexcept
    {
        double t = std::numeric_limits<double>::infinity();
        for (const auto& a : attrs_) t = std::min(t, a.t_first);
        return t;
    }
    double latest_time() const noexcept
    {
        double t = -std::numeric_limits<double>::infinity();
        for (const auto& a : attrs_) t = std::max(t, a.t_last);
        return t;
    }

    /// FNV-1a over geometry and attributes; platform independent for IEEE doubles.
    std::uint64_t content_hash() const noexcept
    {
        std::uint64_t h = 1469598103934665603ull;
        auto mix = [&](const void* data, std::size_t n) {
            const auto* p = static_cast<const unsigned char*>(data);
            for (std::size_t i = 0; i < n; ++i) {
                h ^= p[i];
                h *= 1099511628211ull;
            }
        };
        auto mix_double = [&](double d) {
            std::uint64_t bits;
            std::memcpy(&bits, &d, sizeof bits);
            for (int i = 0; i < 8; ++i) {
                const unsigned char byte = static_cast<unsigned char>(bits >> (8 * i));
                mix(&byte, 1);
            }
        };
        auto mix_u32 = [&](std::uint32_t v) {
            for (int i = 0; i < 4; ++i) {
                const unsigned char byte = static_cast<unsigned char>(v >> (8 * i));
                mix(&byte, 1);
            }
        };
        for (const auto& v : vertices_) {
            mix_double(v.x);
            mix_double(v.y);
            mix_double(v.z);
        }
        for (std::size_t t = 0; t < faces_.size(); ++t) {
            for (auto i : faces_[t]) mix_u32(i);
            mix_double(attrs_[t].viewpoint.x);
            mix_double(attrs_[t].viewpoint.y);
            mix_double(attrs_[t].viewpoint.z);
            mix_double(attrs_[t].t_first);
            mix_double(attrs_[t].t_last);
        }
        return h;
    }

    /// Copy with a different id (source ids on triangles are rewritten too).
    SurfaceMesh with_id(MeshId id) const
    {
        auto attrs = attrs_;
        for (auto& a : attrs) a.source_id = id;
        return SurfaceMesh(id, vertices_, faces_, std::move(attrs));
    }

private:
    MeshId id_ = 0;
    std::vector<Vec3> vertices_;
    std::vector<Face> faces_;
    std::vector<TriangleAttr> attrs_;
    Adjacency adjacency_;
};

/// A set of meshes addressed by id. Meshes are kept sorted by id so every
/// consumer iterates them in the same order whatever order they arrived in.
class MeshSet {
public:
    MeshSet() = default;
    explicit MeshSet(std::vector<SurfaceMesh> meshes) : meshes_(std::move(meshes))
    {
        std::sort(meshes_.begin(), meshes_.end(),
                  [](const SurfaceMesh& a, const SurfaceMesh& b) { return a.id() < b.id(); });
        for (std::size_t i = 1; i < meshes_.size(); ++i)
            if (meshes_[i].id() == meshes_[i - 1].id())
                throw Error(ErrorCode::InvalidMesh, "duplicate mesh id " + std::to_string(meshes_[i].id()));
        offsets_.resize(meshes_.size() + 1, 0);
        for (std::size_t i = 0; i < meshes_.size(); ++i) offsets_[i + 1] = offsets_[i] + meshes_[i].triangle_count();
    }

    std::size_t size() const noexcept { return meshes_.size(); }
    bool empty() const noexcept { return meshes_.empty(); }
    const SurfaceMesh& operator[](std::size_t i) const noexcept { return meshes_[i]; }
    auto begin() const noexcept { return meshes_.begin(); }
    auto end() const noexcept { return meshes_.end(); }

    /// Position of the mesh with the given id; throws when absent.
    std::size_t index_of(MeshId id) const
    {
        auto it = std::lower_bound(meshes_.begin(), meshes_.end(), id,
                                   [](const SurfaceMesh& m, MeshId v) { return m.id() < v; });
        if (it == meshes_.end() || it->id() != id)
            throw Error(ErrorCode::InvalidMesh, "unknown mesh id " + std::to_string(id));
        return static_cast<std::size_t>(it - meshes_.begin());
    }

    const SurfaceMesh& mesh(MeshId id) const { return meshes_[index_of(id)]; }

    std::size_t total_triangles() const noexcept { return offsets_.empty() ? 0 : offsets_.back(); }

    /// Dense index in [0, total_triangles()) following (mesh id, triangle index) order.
    std::size_t global_index(const TriangleRef& r) const { return offsets_[index_of(r.mesh)] + r.tri; }
    std::size_t global_index(std::size_t mesh_pos, std::uint32_t tri) const noexcept
    {
        return offsets_[mesh_pos] + tri;
    }
    std::size_t offset(std::size_t mesh_pos) const noexcept { return offsets_[mesh_pos]; }

    TriangleRef ref_of(std::size_t global) const noexcept
    {
        auto it = std::upper_bound(offsets_.begin(), offsets_.end(), global);
        const std::size_t pos = static_cast<std::size_t>(it - offsets_.begin()) - 1;
        return {meshes_[pos].id(), static_cast<std::uint32_t>(global - offsets_[pos])};
    }

    const std::vector<SurfaceMesh>& meshes() const noexcept { return meshes_; }

private:
    std::vector<SurfaceMesh> meshes_;
    std::vector<std::size_t> offsets_;
};

/// Orders meshes by (earliest acquisition time, content hash) and renumbers
/// their ids 0..n-1, so downstream results do not depend on input order.
inline MeshSet canonicalize(std::vector<SurfaceMesh> meshes)
{
    struct Key {
        double t;
        std::uint64_t hash;
        std::size_t pos;
    };
    std::vector<Key> keys;
    keys.reserve(meshes.size());
    for (std::size_t i = 0; i < meshes.size(); ++i) keys.push_back({meshes[i].earliest_time(), meshes[i].content_hash(), i});
    std::sort(keys.begin(), keys.end(), [](const Key& a, const Key& b) {
        return a.t != b.t ? a.t < b.t : (a.hash != b.hash ? a.hash < b.hash : a.pos < b.pos);
    });
    std::vector<SurfaceMesh> out;
    out.reserve(meshes.size());
    for (std::size_t i = 0; i < keys.size(); ++i) out.push_back(meshes[keys[i].pos].with_id(static_cast<MeshId>(i)));
    return MeshSet(std::move(out));
}

} // namespace tessera
