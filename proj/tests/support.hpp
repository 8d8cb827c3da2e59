#pragma once

#include <cstdint>
#include <cstring>
#include <filesystem>
#include <limits>
#include <random>
#include <string>
#include <vector>

#include "tessera/mesh.hpp"
#include "tessera/qpbo.hpp"
#include "tessera/scan.hpp"

namespace tessera::test {

inline SurfaceMesh make_mesh(MeshId id, std::vector<Vec3> verts, std::vector<Face> faces, double t = 0.0,
                             Vec3 viewpoint = {0.0, 0.0, 10.0})
{
    std::vector<TriangleAttr> attrs(faces.size(), TriangleAttr{viewpoint, t, t, id, -1.0});
    return SurfaceMesh(id, std::move(verts), std::move(faces), std::move(attrs));
}

/// nx-by-ny quad grid in the z = z0 plane, cell size h, lower corner at origin.
inline SurfaceMesh grid_mesh(MeshId id, int nx, int ny, double h, Vec3 origin = {}, double t = 0.0,
                             Vec3 viewpoint = {0.0, 0.0, 10.0})
{
    std::vector<Vec3> v;
    std::vector<Face> f;
    for (int j = 0; j <= ny; ++j)
        for (int i = 0; i <= nx; ++i) v.push_back(origin + Vec3{i * h, j * h, 0.0});
    auto at = [&](int i, int j) { return static_cast<std::uint32_t>(j * (nx + 1) + i); };
    for (int j = 0; j < ny; ++j)
        for (int i = 0; i < nx; ++i) {
            f.push_back({at(i, j), at(i + 1, j), at(i + 1, j + 1)});
            f.push_back({at(i, j), at(i + 1, j + 1), at(i, j + 1)});
        }
    return make_mesh(id, std::move(v), std::move(f), t, viewpoint);
}

struct Exhaustive {
    double min = std::numeric_limits<double>::infinity();
    std::vector<std::uint32_t> optima; ///< bit masks attaining min
};

inline std::vector<Label> labels_of(std::uint32_t mask, std::size_t n)
{
    std::vector<Label> x(n);
    for (std::size_t p = 0; p < n; ++p) x[p] = to_label((mask >> p) & 1u);
    return x;
}

/// Brute-force minimum over all 2^n assignments (n <= 20).
inline Exhaustive exhaustive_min(const PseudoBooleanFunction& f, double tol = 1e-9)
{
    const std::size_t n = f.size();
    std::vector<double> e(std::size_t{1} << n);
    Exhaustive out;
    for (std::uint32_t m = 0; m < e.size(); ++m) {
        e[m] = evaluate(f, labels_of(m, n));
        out.min = std::min(out.min, e[m]);
    }
    for (std::uint32_t m = 0; m < e.size(); ++m)
        if (e[m] <= out.min + tol) out.optima.push_back(m);
    return out;
}

/// Random function with integer coefficients in [-cmax, cmax].
inline PseudoBooleanFunction random_function(std::mt19937_64& rng, std::size_t n, std::size_t pairs, int cmax = 100,
                                             bool submodular = false)
{
    std::uniform_int_distribution<int> c(-cmax, cmax);
    std::uniform_int_distribution<std::size_t> var(0, n - 1);
    PseudoBooleanFunction f(n);
    for (std::size_t p = 0; p < n; ++p) f.add_unary(p, c(rng), c(rng));
    for (std::size_t k = 0; k < pairs && n >= 2; ++k) {
        std::size_t p = var(rng), q = var(rng);
        while (q == p) q = var(rng);
        double a = c(rng), b = c(rng), d = c(rng), e = c(rng);
        if (submodular && a + e > b + d) e = b + d - a - std::abs(c(rng)) % 10;
        f.add_pairwise(p, q, a, b, d, e);
    }
    return f;
}

/// Jittered grid with a random subset of triangles and random attributes.
inline SurfaceMesh random_mesh(std::mt19937_64& rng, MeshId id)
{
    std::uniform_real_distribution<double> u(-1.0, 1.0), time(0.0, 1e7);
    const int nx = 1 + static_cast<int>(rng() % 8), ny = 1 + static_cast<int>(rng() % 8);
    std::vector<Vec3> v;
    for (int j = 0; j <= ny; ++j)
        for (int i = 0; i <= nx; ++i) v.push_back({i + 0.3 * u(rng), j + 0.3 * u(rng), 0.2 * u(rng) + 1e-7 * u(rng)});
    std::vector<Face> f;
    std::vector<TriangleAttr> a;
    auto at = [&](int i, int j) { return static_cast<std::uint32_t>(j * (nx + 1) + i); };
    for (int j = 0; j < ny; ++j)
        for (int i = 0; i < nx; ++i)
            for (const Face& face : {Face{at(i, j), at(i + 1, j), at(i + 1, j + 1)}, Face{at(i, j), at(i + 1, j + 1), at(i, j + 1)}}) {
                if (rng() % 4 == 0) continue;
                const double t0 = time(rng);
                f.push_back(face);
                a.push_back({{10 * u(rng), 10 * u(rng), 5.0 + u(rng)}, t0, t0 + (rng() % 2) * time(rng),
                             static_cast<MeshId>(rng() % 7), -1.0});
            }
    return SurfaceMesh(id, std::move(v), std::move(f), std::move(a));
}

inline Scan random_scan(std::mt19937_64& rng)
{
    std::uniform_real_distribution<double> u(-50.0, 50.0), dt(0.0, 1e-3);
    const std::size_t rows = 1 + rng() % 6, cols = 2 + rng() % 6;
    std::vector<ScanPoint> pts;
    double t = 1e5 * dt(rng);
    for (std::size_t k = 0; k < rows * cols; ++k) {
        ScanPoint p{{u(rng), u(rng), u(rng)}, {u(rng) * 1e-3, u(rng) * 1e-3, 1.5}, t += dt(rng), rng() % 5 != 0};
        pts.push_back(p);
    }
    return Scan(rows, cols, std::move(pts));
}

inline bool bits_equal(double a, double b) { return std::memcmp(&a, &b, sizeof a) == 0; }
inline bool bits_equal(const Vec3& a, const Vec3& b) { return bits_equal(a.x, b.x) && bits_equal(a.y, b.y) && bits_equal(a.z, b.z); }

/// Bit-exact comparison of ids, positions, connectivity and attributes.
inline bool identical(const SurfaceMesh& a, const SurfaceMesh& b)
{
    if (a.id() != b.id() || a.vertex_count() != b.vertex_count() || a.triangle_count() != b.triangle_count()) return false;
    for (std::size_t v = 0; v < a.vertex_count(); ++v)
        if (!bits_equal(a.vertices()[v], b.vertices()[v])) return false;
    for (std::uint32_t t = 0; t < a.triangle_count(); ++t) {
        const auto &x = a.attr(t), &y = b.attr(t);
        if (a.face(t) != b.face(t) || !bits_equal(x.viewpoint, y.viewpoint) || !bits_equal(x.t_first, y.t_first) ||
            !bits_equal(x.t_last, y.t_last) || x.source_id != y.source_id || !bits_equal(x.quality, y.quality))
            return false;
    }
    return true;
}

inline bool identical(const Scan& a, const Scan& b)
{
    if (a.rows() != b.rows() || a.cols() != b.cols()) return false;
    for (std::size_t k = 0; k < a.points().size(); ++k) {
        const auto &p = a.points()[k], &q = b.points()[k];
        if (!bits_equal(p.position, q.position) || !bits_equal(p.sensor_origin, q.sensor_origin) || !bits_equal(p.t, q.t) ||
            p.valid != q.valid)
            return false;
    }
    return true;
}

inline std::filesystem::path temp_dir(const std::string& name)
{
    auto p = std::filesystem::temp_directory_path() / ("tessera_test_" + name);
    std::filesystem::remove_all(p);
    std::filesystem::create_directories(p);
    return p;
}

} // namespace tessera::test
