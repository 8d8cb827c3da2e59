#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <span>

namespace tessera {

struct Vec3 {
    double x = 0.0;
    double y = 0.0;
    double z = 0.0;

    constexpr double operator[](std::size_t i) const noexcept { return i == 0 ? x : (i == 1 ? y : z); }
    constexpr double& operator[](std::size_t i) noexcept { return i == 0 ? x : (i == 1 ? y : z); }

    constexpr Vec3& operator+=(const Vec3& o) noexcept { x += o.x; y += o.y; z += o.z; return *this; }
    constexpr Vec3& operator-=(const Vec3& o) noexcept { x -= o.x; y -= o.y; z -= o.z; return *this; }
    constexpr Vec3& operator*=(double s) noexcept { x *= s; y *= s; z *= s; return *this; }

    friend constexpr bool operator==(const Vec3&, const Vec3&) = default;
};

constexpr Vec3 operator+(Vec3 a, const Vec3& b) noexcept { return a += b; }
constexpr Vec3 operator-(Vec3 a, const Vec3& b) noexcept { return a -= b; }
constexpr Vec3 operator-(const Vec3& a) noexcept { return {-a.x, -a.y, -a.z}; }
constexpr Vec3 operator*(Vec3 a, double s) noexcept { return a *= s; }
constexpr Vec3 operator*(double s, Vec3 a) noexcept { return a *= s; }
constexpr Vec3 operator/(const Vec3& a, double s) noexcept { return {a.x / s, a.y / s, a.z / s}; }

constexpr double dot(const Vec3& a, const Vec3& b) noexcept { return a.x * b.x + a.y * b.y + a.z * b.z; }
constexpr Vec3 cross(const Vec3& a, const Vec3& b) noexcept
{
    return {a.y * b.z - a.z * b.y, a.z * b.x - a.x * b.z, a.x * b.y - a.y * b.x};
}
inline double norm(const Vec3& a) noexcept { return std::sqrt(dot(a, a)); }
constexpr double squared_norm(const Vec3& a) noexcept { return dot(a, a); }
inline double distance(const Vec3& a, const Vec3& b) noexcept { return norm(a - b); }

inline Vec3 normalized(const Vec3& a) noexcept
{
    const double n = norm(a);
    return n > 0.0 ? a / n : Vec3{};
}

inline bool is_finite(const Vec3& a) noexcept
{
    return std::isfinite(a.x) && std::isfinite(a.y) && std::isfinite(a.z);
}

using Triangle = std::array<Vec3, 3>;

inline Vec3 centroid(const Triangle& t) noexcept { return (t[0] + t[1] + t[2]) / 3.0; }

/// Unnormalized normal, |n| = 2 * area.
inline Vec3 area_normal(const Triangle& t) noexcept { return cross(t[1] - t[0], t[2] - t[0]); }

inline double area(const Triangle& t) noexcept { return 0.5 * norm(area_normal(t)); }

struct Aabb {
    Vec3 lo{std::numeric_limits<double>::infinity(), std::numeric_limits<double>::infinity(),
            std::numeric_limits<double>::infinity()};
    Vec3 hi{-std::numeric_limits<double>::infinity(), -std::numeric_limits<double>::infinity(),
            -std::numeric_limits<double>::infinity()};

    void extend(const Vec3& p) noexcept
    {
        lo = {std::min(lo.x, p.x), std::min(lo.y, p.y), std::min(lo.z, p.z)};
        hi = {std::max(hi.x, p.x), std::max(hi.y, p.y), std::max(hi.z, p.z)};
    }
    void extend(const Aabb& b) noexcept
    {
        extend(b.lo);
        extend(b.hi);
    }
    bool empty() const noexcept { return lo.x > hi.x; }
    Aabb inflated(double r) const noexcept { return {lo - Vec3{r, r, r}, hi + Vec3{r, r, r}}; }
    Vec3 center() const noexcept { return (lo + hi) * 0.5; }
    bool overlaps(const Aabb& o) const noexcept
    {
        return lo.x <= o.hi.x && o.lo.x <= hi.x && lo.y <= o.hi.y && o.lo.y <= hi.y && lo.z <= o.hi.z &&
               o.lo.z <= hi.z;
    }
};

inline Aabb bounds(std::span<const Vec3> pts) noexcept
{
    Aabb b;
    for (const auto& p : pts) b.extend(p);
    return b;
}

inline Aabb bounds(const Triangle& t) noexcept { return bounds(std::span<const Vec3>(t)); }

// ---------------------------------------------------------------------------
// Closest-point queries

/// Closest point on triangle abc to p (Voronoi-region walk).
inline Vec3 closest_point_on_triangle(const Vec3& p, const Triangle& t) noexcept
{
    const Vec3& a = t[0];
    const Vec3& b = t[1];
    const Vec3& c = t[2];
    const Vec3 ab = b - a, ac = c - a, ap = p - a;
    const double d1 = dot(ab, ap), d2 = dot(ac, ap);
    if (d1 <= 0.0 && d2 <= 0.0) return a;

    const Vec3 bp = p - b;
    const double d3 = dot(ab, bp), d4 = dot(ac, bp);
    if (d3 >= 0.0 && d4 <= d3) return b;

    const double vc = d1 * d4 - d3 * d2;
    if (vc <= 0.0 && d1 >= 0.0 && d3 <= 0.0) {
        const double denom = d1 - d3;
        return denom != 0.0 ? a + ab * (d1 / denom) : a;
    }

    const Vec3 cp = p - c;
    const double d5 = dot(ab, cp), d6 = dot(ac, cp);
    if (d6 >= 0.0 && d5 <= d6) return c;

    const double vb = d5 * d2 - d1 * d6;
    if (vb <= 0.0 && d2 >= 0.0 && d6 <= 0.0) {
        const double denom = d2 - d6;
        return denom != 0.0 ? a + ac * (d2 / denom) : a;
    }

    const double va = d3 * d6 - d5 * d4;
    if (va <= 0.0 && (d4 - d3) >= 0.0 && (d5 - d6) >= 0.0) {
        const double denom = (d4 - d3) + (d5 - d6);
        return denom != 0.0 ? b + (c - b) * ((d4 - d3) / denom) : b;
    }

    const double sum = va + vb + vc;
    if (sum == 0.0) {
        // Degenerate triangle: fall back to the closest of its three edges.
        auto on_seg = [&](const Vec3& s0, const Vec3& s1) {
            const Vec3 d = s1 - s0;
            const double l2 = dot(d, d);
            const double u = l2 > 0.0 ? std::clamp(dot(p - s0, d) / l2, 0.0, 1.0) : 0.0;
            return s0 + d * u;
        };
        Vec3 best = on_seg(a, b);
        for (const Vec3& q : {on_seg(b, c), on_seg(c, a)})
            if (squared_norm(q - p) < squared_norm(best - p)) best = q;
        return best;
    }
    const double denom = 1.0 / sum;
    return a + ab * (vb * denom) + ac * (vc * denom);
}

/// Squared distance between segments p1q1 and p2q2.
inline double segment_segment_sq(const Vec3& p1, const Vec3& q1, const Vec3& p2, const Vec3& q2) noexcept
{
    constexpr double kEps = 1e-300;
    const Vec3 d1 = q1 - p1, d2 = q2 - p2, r = p1 - p2;
    const double a = dot(d1, d1), e = dot(d2, d2), f = dot(d2, r);
    double s = 0.0, t = 0.0;
    if (a <= kEps && e <= kEps) return dot(r, r);
    if (a <= kEps) {
        t = std::clamp(f / e, 0.0, 1.0);
    } else {
        const double c = dot(d1, r);
        if (e <= kEps) {
            s = std::clamp(-c / a, 0.0, 1.0);
        } else {
            const double b = dot(d1, d2);
            const double denom = a * e - b * b;
            s = denom > 0.0 ? std::clamp((b * f - c * e) / denom, 0.0, 1.0) : 0.0;
            t = (b * s + f) / e;
            if (t < 0.0) {
                t = 0.0;
                s = std::clamp(-c / a, 0.0, 1.0);
            } else if (t > 1.0) {
                t = 1.0;
                s = std::clamp((b - c) / a, 0.0, 1.0);
            }
        }
    }
    const Vec3 diff = (p1 + d1 * s) - (p2 + d2 * t);
    return dot(diff, diff);
}

/// True when segment pq crosses the plane of t at a point inside t.
inline bool segment_pierces_triangle(const Vec3& p, const Vec3& q, const Triangle& t) noexcept
{
    const Vec3 n = area_normal(t);
    const double dp = dot(p - t[0], n);
    const double dq = dot(q - t[0], n);
    if ((dp > 0.0 && dq > 0.0) || (dp < 0.0 && dq < 0.0) || dp == dq) return false;
    const Vec3 x = p + (q - p) * (dp / (dp - dq));
    const double nn = dot(n, n);
    if (nn == 0.0) return false;
    for (int i = 0; i < 3; ++i) {
        const Vec3& a = t[i];
        const Vec3& b = t[(i + 1) % 3];
        if (dot(cross(b - a, x - a), n) < 0.0) return false;
    }
    return true;
}

/// Minimum Euclidean distance between two triangle surfaces (0 when they intersect).
inline double triangle_distance(const Triangle& a, const Triangle& b) noexcept
{
    for (int i = 0; i < 3; ++i) {
        if (segment_pierces_triangle(a[i], a[(i + 1) % 3], b)) return 0.0;
        if (segment_pierces_triangle(b[i], b[(i + 1) % 3], a)) return 0.0;
    }
    double best = std::numeric_limits<double>::infinity();
    for (int i = 0; i < 3; ++i) {
        best = std::min(best, squared_norm(closest_point_on_triangle(a[i], b) - a[i]));
        best = std::min(best, squared_norm(closest_point_on_triangle(b[i], a) - b[i]));
        for (int j = 0; j < 3; ++j)
            best = std::min(best, segment_segment_sq(a[i], a[(i + 1) % 3], b[j], b[(j + 1) % 3]));
    }
    return std::sqrt(best);
}

// ---------------------------------------------------------------------------
// Planar overlap

struct Vec2 {
    double x = 0.0;
    double y = 0.0;
};

inline double polygon_area(std::span<const Vec2> poly) noexcept
{
    double s = 0.0;
    for (std::size_t i = 0, n = poly.size(); i < n; ++i) {
        const Vec2& p = poly[i];
        const Vec2& q = poly[(i + 1) % n];
        s += p.x * q.y - q.x * p.y;
    }
    return 0.5 * s;
}

/// Area of the intersection of triangle b projected onto the plane of a with a itself.
/// Returns 0 for degenerate a.
inline double projected_overlap_area(const Triangle& a, const Triangle& b)
{
    const Vec3 n = normalized(area_normal(a));
    if (squared_norm(n) == 0.0) return 0.0;
    const Vec3 u = normalized(a[1] - a[0]);
    const Vec3 v = cross(n, u);
    auto to2d = [&](const Vec3& p) { return Vec2{dot(p - a[0], u), dot(p - a[0], v)}; };

    // a is counter-clockwise in (u, v) by construction.
    std::array<Vec2, 3> clip{to2d(a[0]), to2d(a[1]), to2d(a[2])};
    std::array<Vec2, 9> poly{};
    std::array<Vec2, 9> next{};
    std::size_t count = 3;
    poly[0] = to2d(b[0]);
    poly[1] = to2d(b[1]);
    poly[2] = to2d(b[2]);
    if (polygon_area(std::span<const Vec2>(poly.data(), 3)) < 0.0) std::swap(poly[1], poly[2]);

    for (int e = 0; e < 3 && count > 0; ++e) {
        const Vec2 c0 = clip[e];
        const Vec2 c1 = clip[(e + 1) % 3];
        auto side = [&](const Vec2& p) { return (c1.x - c0.x) * (p.y - c0.y) - (c1.y - c0.y) * (p.x - c0.x); };
        std::size_t out = 0;
        for (std::size_t i = 0; i < count; ++i) {
            const Vec2& p = poly[i];
            const Vec2& q = poly[(i + 1) % count];
            const double sp = side(p), sq = side(q);
            if (sp >= 0.0) next[out++] = p;
            if ((sp >= 0.0) != (sq >= 0.0)) {
                const double t = sp / (sp - sq);
                next[out++] = {p.x + (q.x - p.x) * t, p.y + (q.y - p.y) * t};
            }
            if (out >= next.size()) break;
        }
        poly = next;
        count = out;
    }
    if (count < 3) return 0.0;
    return std::max(0.0, polygon_area(std::span<const Vec2>(poly.data(), count)));
}

// ---------------------------------------------------------------------------
// Convex overlap (separating axis test)

/// True when the triangle intersects the open interior of the tetrahedron
/// (apex, base[0], base[1], base[2]). Touching contact does not count.
inline bool triangle_intersects_open_tetrahedron(const Triangle& tri, const Vec3& apex, const Triangle& base) noexcept
{
    const std::array<Vec3, 4> tet{apex, base[0], base[1], base[2]};
    const std::array<Vec3, 3> tri_edges{tri[1] - tri[0], tri[2] - tri[1], tri[0] - tri[2]};
    const std::array<Vec3, 6> tet_edges{tet[1] - tet[0], tet[2] - tet[0], tet[3] - tet[0],
                                        tet[2] - tet[1], tet[3] - tet[2], tet[1] - tet[3]};

    double scale = 0.0;
    for (const auto& e : tet_edges) scale = std::max(scale, norm(e));
    for (const auto& e : tri_edges) scale = std::max(scale, norm(e));
    if (scale == 0.0) return false;
    const double tol = 1e-12 * scale;

    auto separated = [&](const Vec3& axis_raw) {
        const double len = norm(axis_raw);
        if (len <= 1e-12 * scale * scale) return false; // ill-conditioned axis, skip
        const Vec3 axis = axis_raw / len;
        double tmin = std::numeric_limits<double>::infinity(), tmax = -tmin;
        for (const auto& p : tri) {
            const double d = dot(p, axis);
            tmin = std::min(tmin, d);
            tmax = std::max(tmax, d);
        }
        double smin = std::numeric_limits<double>::infinity(), smax = -smin;
        for (const auto& p : tet) {
            const double d = dot(p, axis);
            smin = std::min(smin, d);
            smax = std::max(smax, d);
        }
        // Open interior: touching an end of the tetrahedron interval separates.
        return tmax <= smin + tol || tmin >= smax - tol;
    };

    // Tetrahedron face normals.
    static constexpr int kFaces[4][3] = {{0, 1, 2}, {0, 2, 3}, {0, 3, 1}, {1, 3, 2}};
    for (const auto& f : kFaces)
        if (separated(cross(tet[f[1]] - tet[f[0]], tet[f[2]] - tet[f[0]]))) return false;
    if (separated(cross(tri_edges[0], tri_edges[1]))) return false;
    for (const auto& te : tri_edges)
        for (const auto& ee : tet_edges)
            if (separated(cross(te, ee))) return false;
    return true;
}

inline double tetrahedron_volume(const Vec3& apex, const Triangle& base) noexcept
{
    return std::abs(dot(base[0] - apex, cross(base[1] - apex, base[2] - apex))) / 6.0;
}

// ---------------------------------------------------------------------------
// Rays

struct Ray {
    Vec3 origin;
    Vec3 dir; // not required to be unit length
};

/// Möller–Trumbore; returns the ray parameter of the hit, if any, in (tmin, tmax).
inline std::optional<double> ray_triangle(const Ray& r, const Triangle& t, double tmin, double tmax) noexcept
{
    const Vec3 e1 = t[1] - t[0];
    const Vec3 e2 = t[2] - t[0];
    const Vec3 p = cross(r.dir, e2);
    const double det = dot(e1, p);
    if (std::abs(det) < 1e-300) return std::nullopt;
    const double inv = 1.0 / det;
    const Vec3 s = r.origin - t[0];
    const double u = dot(s, p) * inv;
    if (u < 0.0 || u > 1.0) return std::nullopt;
    const Vec3 q = cross(s, e1);
    const double v = dot(r.dir, q) * inv;
    if (v < 0.0 || u + v > 1.0) return std::nullopt;
    const double h = dot(e2, q) * inv;
    if (h <= tmin || h >= tmax) return std::nullopt;
    return h;
}

/// Slab test; returns the entry/exit parameters clipped to [tmin, tmax].
inline std::optional<std::pair<double, double>> ray_box(const Ray& r, const Aabb& b, double tmin, double tmax) noexcept
{
    for (std::size_t a = 0; a < 3; ++a) {
        const double inv = 1.0 / r.dir[a];
        double t0 = (b.lo[a] - r.origin[a]) * inv;
        double t1 = (b.hi[a] - r.origin[a]) * inv;
        if (inv < 0.0) std::swap(t0, t1);
        if (std::isnan(t0) || std::isnan(t1)) {
            // Ray parallel to the slab and origin on its plane.
            if (r.origin[a] < b.lo[a] || r.origin[a] > b.hi[a]) return std::nullopt;
            continue;
        }
        tmin = std::max(tmin, t0);
        tmax = std::min(tmax, t1);
        if (tmax < tmin) return std::nullopt;
    }
    return std::make_pair(tmin, tmax);
}

} // namespace tessera
