#pragma once

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>
#include <vector>

#include "tessera/bvh.hpp"
#include "tessera/detail/parallel.hpp"
#include "tessera/error.hpp"
#include "tessera/mesh.hpp"

namespace tessera {

struct DetectParams {
    double eps_dist = 0.10;         ///< consistency distance threshold (m)
    double eps_shrink = 0.02;       ///< view-tetrahedron base retraction (m)
    double min_overlap = 0.1;       ///< projected overlap fraction of the smaller triangle
    double max_normal_angle = 45.0; ///< degrees, orientation-insensitive
    double grazing_angle = 5.0;     ///< degrees; conflicts seen at shallower incidence are ignored
    unsigned workers = 0;           ///< 0 = hardware concurrency

    void validate() const
    {
        if (!(eps_dist > 0.0)) throw Error(ErrorCode::InvariantViolation, "detect.eps_dist must be > 0");
        if (!(eps_shrink > 0.0)) throw Error(ErrorCode::InvariantViolation, "detect.eps_shrink must be > 0");
        if (!(eps_shrink < eps_dist))
            throw Error(ErrorCode::InvariantViolation, "detect.eps_shrink must be < detect.eps_dist");
        if (!(min_overlap > 0.0 && min_overlap <= 1.0))
            throw Error(ErrorCode::InvariantViolation, "detect.min_overlap must be in (0, 1]");
        if (!(max_normal_angle > 0.0 && max_normal_angle <= 90.0))
            throw Error(ErrorCode::InvariantViolation, "detect.max_normal_angle must be in (0, 90]");
        if (!(grazing_angle >= 0.0 && grazing_angle < 90.0))
            throw Error(ErrorCode::InvariantViolation, "detect.grazing_angle must be in [0, 90)");
    }
};

enum class Status : std::uint8_t { Consistent, Conflicting, Single };

/// Debug-only refinement of Single: hidden from another mesh's sensor, or
/// simply outside its coverage.
enum class SingleKind : std::uint8_t { None, Occlusion, Coverage };

struct ConflictEntry {
    TriangleRef ref;
    double t_last = 0.0; ///< t_last of the newer triangle whose empty space is violated

    friend bool operator==(const ConflictEntry&, const ConflictEntry&) = default;
};

struct ConsistencyRecord {
    Status status = Status::Single;
    std::vector<TriangleRef> consistent_with;
    std::vector<ConflictEntry> conflicting_with;
    SingleKind single_kind = SingleKind::None;

    friend bool operator==(const ConsistencyRecord&, const ConsistencyRecord&) = default;
};

/// Per-triangle records, dense over a MeshSet.
class Classification {
public:
    Classification() = default;
    explicit Classification(const MeshSet& meshes) : ids_(), records_()
    {
        for (const auto& m : meshes) {
            ids_.push_back(m.id());
            records_.emplace_back(m.triangle_count());
        }
    }

    const ConsistencyRecord& at(const TriangleRef& r) const { return records_[pos(r.mesh)].at(r.tri); }
    ConsistencyRecord& at(const TriangleRef& r) { return records_[pos(r.mesh)].at(r.tri); }

    std::span<const ConsistencyRecord> mesh_records(std::size_t mesh_pos) const noexcept { return records_[mesh_pos]; }
    std::vector<ConsistencyRecord>& mesh_records(std::size_t mesh_pos) noexcept { return records_[mesh_pos]; }
    std::size_t mesh_count() const noexcept { return ids_.size(); }
    MeshId mesh_id(std::size_t mesh_pos) const noexcept { return ids_[mesh_pos]; }

    std::size_t count(Status s) const noexcept
    {
        std::size_t n = 0;
        for (const auto& m : records_)
            for (const auto& r : m) n += r.status == s;
        return n;
    }

    std::vector<std::string> warnings;

    friend bool operator==(const Classification& a, const Classification& b)
    {
        return a.ids_ == b.ids_ && a.records_ == b.records_;
    }

private:
    std::size_t pos(MeshId id) const
    {
        auto it = std::lower_bound(ids_.begin(), ids_.end(), id);
        if (it == ids_.end() || *it != id) throw Error(ErrorCode::InvalidMesh, "unknown mesh id " + std::to_string(id));
        return static_cast<std::size_t>(it - ids_.begin());
    }

    std::vector<MeshId> ids_;
    std::vector<std::vector<ConsistencyRecord>> records_;
};

// ---------------------------------------------------------------------------
// Pairwise predicates

inline double min_distance(const Triangle& a, const Triangle& b) noexcept { return triangle_distance(a, b); }

/// Distance below eps_dist, normals within max_normal_angle (ignoring
/// orientation), and the projection of b onto a's plane covering at least
/// min_overlap of the smaller triangle.
inline bool is_consistent(const Triangle& a, const Triangle& b, const DetectParams& params)
{
    const double area_a = area(a), area_b = area(b);
    if (area_a < 1e-12 || area_b < 1e-12) throw Error(ErrorCode::DegenerateTriangle, "triangle area below 1e-12 m^2");
    if (!(min_distance(a, b) < params.eps_dist)) return false;
    const double cos_angle = std::abs(dot(normalized(area_normal(a)), normalized(area_normal(b))));
    if (cos_angle < std::cos(params.max_normal_angle * std::numbers::pi / 180.0)) return false;
    return projected_overlap_area(a, b) >= params.min_overlap * std::min(area_a, area_b);
}

/// Retracted view tetrahedron: base vertices pulled toward the viewpoint by
/// `eps_shrink`. Empty when a base vertex lies within eps_shrink of the viewpoint.
inline std::optional<Triangle> retracted_base(const Triangle& base, const Vec3& viewpoint, double eps_shrink) noexcept
{
    Triangle out;
    for (int i = 0; i < 3; ++i) {
        const Vec3 d = base[i] - viewpoint;
        const double len = norm(d);
        if (len <= eps_shrink) return std::nullopt;
        out[i] = base[i] - d * (eps_shrink / len);
    }
    return out;
}

/// True when `tri` enters the open interior of the (retracted) tetrahedron
/// spanned by `viewpoint` and `base_tri`.
inline bool tetra_conflict(const Triangle& tri, const Triangle& base_tri, const Vec3& viewpoint, double eps_shrink)
{
    double scale = 0.0;
    for (const auto& v : base_tri) scale = std::max(scale, distance(v, viewpoint));
    for (int i = 0; i < 3; ++i) scale = std::max(scale, distance(base_tri[i], base_tri[(i + 1) % 3]));
    if (scale == 0.0 || tetrahedron_volume(viewpoint, base_tri) <= 1e-12 * scale * scale * scale)
        throw Error(ErrorCode::DegenerateTetrahedron, "viewpoint is coplanar with the base triangle");
    const auto shrunk = retracted_base(base_tri, viewpoint, eps_shrink);
    if (!shrunk) return false;
    return triangle_intersects_open_tetrahedron(tri, viewpoint, *shrunk);
}

/// True when the viewpoint ray through tri's centroid meets tri's plane at
/// less than `angle_deg`.
inline bool grazing(const Triangle& tri, const Vec3& viewpoint, double angle_deg) noexcept
{
    const Vec3 n = normalized(area_normal(tri));
    const Vec3 d = normalized(centroid(tri) - viewpoint);
    return std::abs(dot(n, d)) < std::sin(angle_deg * std::numbers::pi / 180.0);
}

// ---------------------------------------------------------------------------
// Classification

namespace detail {

struct MeshIndex {
    Bvh triangles;   // triangle boxes
    Bvh tetrahedra;  // view-tetrahedron boxes
    Vec3 mean_viewpoint;
    std::vector<char> degenerate;
};

inline MeshIndex index_mesh(const SurfaceMesh& m)
{
    std::vector<Aabb> tri_boxes(m.triangle_count()), tet_boxes(m.triangle_count());
    MeshIndex idx;
    idx.degenerate.assign(m.triangle_count(), 0);
    Vec3 vp_sum;
    for (std::uint32_t t = 0; t < m.triangle_count(); ++t) {
        const Triangle tri = m.triangle(t);
        tri_boxes[t] = bounds(tri);
        tet_boxes[t] = tri_boxes[t];
        tet_boxes[t].extend(m.attr(t).viewpoint);
        vp_sum += m.attr(t).viewpoint;
        idx.degenerate[t] = area(tri) < 1e-12;
    }
    idx.triangles = Bvh(tri_boxes);
    idx.tetrahedra = Bvh(tet_boxes);
    idx.mean_viewpoint = m.triangle_count() > 0 ? vp_sum / static_cast<double>(m.triangle_count()) : Vec3{};
    return idx;
}

} // namespace detail

/// Labels every triangle Consistent, Conflicting or Single.
///
/// Phase 1 collects consistent partners from the other meshes through their
/// triangle BVHs. Phase 2 runs only on triangles without partners: a
/// triangle conflicts when it enters the retracted view tetrahedron of a
/// strictly newer (by t_last) triangle from another mesh. Pairs are always
/// evaluated in (smaller ref, larger ref) orientation so the consistent
/// relation is symmetric by construction.
inline Classification classify(const MeshSet& meshes, const DetectParams& params)
{
    params.validate();
    Classification result(meshes);
    const std::size_t k = meshes.size();

    std::vector<detail::MeshIndex> index;
    index.reserve(k);
    for (const auto& m : meshes) index.push_back(detail::index_mesh(m));

    if (k >= 2) {
        bool any_overlap = false;
        for (std::size_t i = 0; i < k && !any_overlap; ++i)
            for (std::size_t j = i + 1; j < k && !any_overlap; ++j)
                any_overlap = meshes[i].bounds().inflated(params.eps_dist).overlaps(meshes[j].bounds());
        if (!any_overlap)
            result.warnings.push_back("FrameMismatch: mesh bounding boxes are pairwise disjoint; inputs may be unregistered");
    }

    const std::size_t total = meshes.total_triangles();
    const double cos_gate = std::cos(params.max_normal_angle * std::numbers::pi / 180.0);

    detail::parallel_for(total, params.workers, [&](std::size_t begin, std::size_t end) {
        for (std::size_t g = begin; g < end; ++g) {
            const TriangleRef self = meshes.ref_of(g);
            const std::size_t mi = meshes.index_of(self.mesh);
            const SurfaceMesh& mesh = meshes[mi];
            ConsistencyRecord& rec = result.mesh_records(mi)[self.tri];
            if (index[mi].degenerate[self.tri]) continue;
            const Triangle x = mesh.triangle(self.tri);
            const Aabb query = bounds(x).inflated(params.eps_dist);
            const Vec3 nx = normalized(area_normal(x));
            const double area_x = area(x);

            // Phase 1: distance + overlap.
            for (std::size_t mj = 0; mj < k; ++mj) {
                if (mj == mi) continue;
                const SurfaceMesh& other = meshes[mj];
                index[mj].triangles.query(query, [&](std::uint32_t t) {
                    if (index[mj].degenerate[t]) return;
                    const Triangle y = other.triangle(t);
                    if (std::abs(dot(nx, normalized(area_normal(y)))) < cos_gate) return;
                    const TriangleRef ry{other.id(), t};
                    const bool self_first = self < ry;
                    const Triangle& a = self_first ? x : y;
                    const Triangle& b = self_first ? y : x;
                    if (!(min_distance(a, b) < params.eps_dist)) return;
                    const double area_y = area(y);
                    if (projected_overlap_area(a, b) >= params.min_overlap * std::min(area_x, area_y))
                        rec.consistent_with.push_back(ry);
                });
            }
            std::sort(rec.consistent_with.begin(), rec.consistent_with.end());
            if (!rec.consistent_with.empty()) {
                rec.status = Status::Consistent;
                continue;
            }

            // Phase 2: visibility against newer meshes.
            const double t_self = mesh.attr(self.tri).t_last;
            const Aabb box = bounds(x);
            for (std::size_t mj = 0; mj < k; ++mj) {
                if (mj == mi) continue;
                const SurfaceMesh& other = meshes[mj];
                index[mj].tetrahedra.query(box, [&](std::uint32_t t) {
                    const TriangleAttr& a = other.attr(t);
                    if (!(a.t_last > t_self) || index[mj].degenerate[t]) return;
                    const Triangle y = other.triangle(t);
                    bool hit = false;
                    try {
                        hit = tetra_conflict(x, y, a.viewpoint, params.eps_shrink);
                    } catch (const Error&) {
                        return; // flat view tetrahedron: no empty space to violate
                    }
                    if (hit && !grazing(x, a.viewpoint, params.grazing_angle))
                        rec.conflicting_with.push_back({{other.id(), t}, a.t_last});
                });
            }
            std::sort(rec.conflicting_with.begin(), rec.conflicting_with.end(),
                      [](const ConflictEntry& l, const ConflictEntry& r) { return l.ref < r.ref; });
            if (!rec.conflicting_with.empty()) {
                rec.status = Status::Conflicting;
                continue;
            }

            // Single: occluded from another sensor, or outside its coverage.
            rec.status = Status::Single;
            rec.single_kind = SingleKind::Coverage;
            const Vec3 c = centroid(x);
            for (std::size_t mj = 0; mj < k && rec.single_kind == SingleKind::Coverage; ++mj) {
                if (mj == mi || meshes[mj].triangle_count() == 0) continue;
                const Ray ray{c, index[mj].mean_viewpoint - c};
                const SurfaceMesh& other = meshes[mj];
                index[mj].triangles.raycast(ray, 1e-6, 1.0 - 1e-6, [&](std::uint32_t t, double tmax) {
                    if (ray_triangle(ray, other.triangle(t), 1e-6, tmax)) {
                        rec.single_kind = SingleKind::Occlusion;
                        return -1.0; // stop: empty interval
                    }
                    return tmax;
                });
            }
        }
    });
    return result;
}

} // namespace tessera
