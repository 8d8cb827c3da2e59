#pragma once

#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "tessera/scan.hpp"
#include "tessera/scenegen.hpp"

namespace tessera::test {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

inline Primitive plane(std::string name, Vec3 center, Vec3 u, Vec3 v, double appear = -kInf,
                       double disappear = kInf)
{
    Primitive p;
    p.kind = Primitive::Kind::Plane;
    p.name = std::move(name);
    p.center = center;
    p.u = u;
    p.v = v;
    p.appear = appear;
    p.disappear = disappear;
    return p;
}

inline Primitive box(std::string name, Vec3 center, Vec3 half, double appear = -kInf,
                     double disappear = kInf, double yaw = 0.0)
{
    Primitive p;
    p.kind = Primitive::Kind::Box;
    p.name = std::move(name);
    p.center = center;
    p.half = half;
    p.yaw = yaw;
    p.appear = appear;
    p.disappear = disappear;
    return p;
}

inline Primitive room() { return box("room", {0, 0, 1.5}, {5, 4, 1.5}); }

/// Static room plus a wall that is gone after the first epoch.
inline SceneScript room_wall_script(double resolution)
{
    SceneScript s;
    s.resolution = resolution;
    s.primitives = {room(), plane("wall", {2.5, 0, 1.2}, {0, 1.5, 0}, {0, 0, 1.2}, -kInf, 43200.0)};
    s.epochs = {{0.0, {{0, 0, 1.2}, {0.2, 0.1, 1.2}}, 1.0}, {86400.0, {{-0.3, 0.2, 1.2}, {-0.1, 0.3, 1.2}}, 1.0}};
    return s;
}

/// Copy of `m` whose triangles all carry time t.
inline SurfaceMesh retimed(const SurfaceMesh& m, double t)
{
    std::vector<TriangleAttr> attrs(m.attrs().begin(), m.attrs().end());
    for (auto& a : attrs) a.t_first = a.t_last = t;
    return SurfaceMesh(m.id(), {m.vertices().begin(), m.vertices().end()}, {m.faces().begin(), m.faces().end()},
                       std::move(attrs));
}

/// Source of a mesh triangle: the primitive face shared by its three
/// vertices, or primitive -2 when they disagree.
struct TriangleTruth {
    std::int32_t primitive = -2;
    std::uint8_t face = 0;
};

struct SceneMeshes {
    std::vector<GeneratedEpoch> epochs;
    std::vector<SurfaceMesh> meshes; ///< mesh i comes from epoch i
    std::vector<std::vector<TriangleTruth>> truth;
};

inline SceneMeshes mesh_scene(const SceneScript& script, const MeshingParams& params = {}, std::uint64_t seed = 0)
{
    SceneMeshes out;
    out.epochs = scenegen(script, seed);
    for (std::size_t e = 0; e < out.epochs.size(); ++e) {
        std::vector<std::size_t> src;
        SurfaceMesh m = sensor_topology_mesh(out.epochs[e].scan, params, static_cast<MeshId>(e), &src);
        std::vector<TriangleTruth> tt(m.triangle_count());
        for (std::uint32_t t = 0; t < m.triangle_count(); ++t) {
            const auto& g0 = out.epochs[e].truth[src[m.face(t)[0]]];
            bool same = true;
            for (int k = 1; k < 3; ++k) {
                const auto& g = out.epochs[e].truth[src[m.face(t)[k]]];
                same = same && g.primitive == g0.primitive && g.face == g0.face;
            }
            if (same) tt[t] = {g0.primitive, g0.face};
        }
        out.meshes.push_back(std::move(m));
        out.truth.push_back(std::move(tt));
    }
    return out;
}

/// True when every point of `tri` is seen on primitive face (prim, face)
/// from `origin` among the primitives active at time t.
inline bool visible_on(const SceneScript& s, double t, const Vec3& origin, const Triangle& tri, std::int32_t prim,
                       std::uint8_t face, double margin_deg)
{
    std::vector<detail::FaceTri> tris;
    for (std::size_t p = 0; p < s.primitives.size(); ++p)
        if (s.primitives[p].active_at(t)) detail::primitive_triangles(s.primitives[p], static_cast<std::int32_t>(p), tris);
    const Vec3 samples[4] = {tri[0], tri[1], tri[2], centroid(tri)};
    for (const Vec3& q : samples) {
        const Vec3 d = q - origin;
        const double dist = norm(d);
        const double el = std::asin(d.z / dist) * 180.0 / std::numbers::pi;
        if (el < s.elevation_min + margin_deg || el > s.elevation_max - margin_deg) return false;
        const Ray ray{origin, d / dist};
        double best = dist + 1.0;
        const detail::FaceTri* hit = nullptr;
        for (const auto& ft : tris)
            if (auto h = ray_triangle(ray, ft.tri, 1e-9, best)) {
                best = *h;
                hit = &ft;
            }
        if (!hit || hit->primitive != prim || hit->face != face || std::abs(best - dist) > 0.02) return false;
    }
    return true;
}

/// Triangles of mesh e lying on one primitive face that the other epoch's
/// sensor sees as well (from both ends of its trajectory).
inline bool co_observed(const SceneScript& s, const SceneMeshes& sm, std::size_t e, std::uint32_t t, std::size_t other,
                        double margin_deg)
{
    const TriangleTruth tt = sm.truth[e][t];
    if (tt.primitive < 0) return false;
    const EpochSpec& o = s.epochs[other];
    for (const Vec3& pose : {o.poses.front(), o.poses.back()})
        if (!visible_on(s, o.time, pose, sm.meshes[e].triangle(t), tt.primitive, tt.face, margin_deg)) return false;
    return true;
}

} // namespace tessera::test
