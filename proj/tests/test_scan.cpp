#include <gtest/gtest.h>

#include <random>
#include <sstream>

#include "tessera/scan.hpp"

using namespace tessera;

namespace {

Scan planar_grid(std::size_t rows, std::size_t cols, double h, double z = 1.0)
{
    std::vector<ScanPoint> pts;
    for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t c = 0; c < cols; ++c)
            pts.push_back({{c * h, r * h, z}, {0, 0, 0}, static_cast<double>(r), true});
    return Scan(rows, cols, std::move(pts));
}

ErrorCode code_of(const std::function<void()>& f)
{
    try {
        f();
    } catch (const Error& e) {
        return e.code();
    }
    return ErrorCode::Io;
}

} // namespace

TEST(ParseScan, TwoByTwo)
{
    std::istringstream in("SCAN 2 2\n"
                          "0 0 1 0 0 0 0 1\n0.1 0 1 0 0 0 0 1\n"
                          "0 0.1 1 0 0 0 1 1\n0.1 0.1 1 0 0 0 1 1\n");
    const Scan s = read_scan_text(in);
    EXPECT_EQ(s.rows(), 2u);
    EXPECT_EQ(s.scanline_len(), 2u);
    EXPECT_EQ(s.invalid_count(), 0u);
}

TEST(ParseScan, NoReturnMarker)
{
    std::istringstream in("SCAN 2 2\n"
                          "0 0 1 0 0 0 0 1\n0 0 0 0 0 0 0 0\n"
                          "0 0.1 1 0 0 0 1 1\n0.1 0.1 1 0 0 0 1 1\n");
    const Scan s = read_scan_text(in);
    EXPECT_EQ(s.rows(), 2u);
    EXPECT_EQ(s.invalid_count(), 1u);
}

TEST(ParseScan, Errors)
{
    EXPECT_EQ(code_of([] {
                  std::istringstream in("SCAN 2 2\n0 0 1 0 0 0 0 1\n0.1 0 1 0 0 0 0 1\n0 0.1 1 0 0 0 1 1\n");
                  read_scan_text(in);
              }),
              ErrorCode::RaggedScanline);
    EXPECT_EQ(code_of([] {
                  std::istringstream in("SCAN x 2\n");
                  read_scan_text(in);
              }),
              ErrorCode::MalformedHeader);
    EXPECT_EQ(code_of([] {
                  std::istringstream in("SCAN 1 2\n0 0 1 0 0 0 5 1\n1 0 1 0 0 0 4 1\n");
                  read_scan_text(in);
              }),
              ErrorCode::InvalidScan);
    EXPECT_EQ(code_of([] {
                  std::istringstream in("SCAN 1 2\n0 0 nan 0 0 0 0 1\n1 0 1 0 0 0 0 1\n");
                  read_scan_text(in);
              }),
              ErrorCode::NonFiniteCoordinate);
    EXPECT_EQ(code_of([] { Scan(1, 1, std::vector<ScanPoint>(1)); }), ErrorCode::InvalidScan);
}

TEST(SensorTopologyMesh, Examples)
{
    const Scan s = planar_grid(2, 2, 0.1);
    EXPECT_EQ(sensor_topology_mesh(s, {1.0, 2.0}).triangle_count(), 2u);
    EXPECT_EQ(sensor_topology_mesh(s, {0.05, 2.0}).triangle_count(), 0u);

    std::vector<ScanPoint> pts(s.points().begin(), s.points().end());
    pts[3].valid = false;
    EXPECT_EQ(sensor_topology_mesh(Scan(2, 2, pts), {1.0, 2.0}).triangle_count(), 0u);
}

TEST(SensorTopologyMesh, AttributesFromScanPoints)
{
    const Scan s = planar_grid(2, 2, 0.1);
    std::vector<std::size_t> src;
    const SurfaceMesh m = sensor_topology_mesh(s, {}, 4, &src);
    EXPECT_EQ(m.id(), 4u);
    EXPECT_EQ(src.size(), m.vertex_count());
    for (std::size_t v = 0; v < m.vertex_count(); ++v) EXPECT_EQ(m.vertices()[v], s.points()[src[v]].position);
    for (const auto& a : m.attrs()) {
        EXPECT_EQ(a.viewpoint, (Vec3{0, 0, 0}));
        EXPECT_EQ(a.source_id, 4u);
        EXPECT_DOUBLE_EQ(a.t_first, a.t_last);
    }
}

TEST(SensorTopologyMesh, RangeRatioFilter)
{
    // One corner pushed far back along its ray: depth discontinuity.
    std::vector<ScanPoint> pts;
    for (int r = 0; r < 2; ++r)
        for (int c = 0; c < 2; ++c) pts.push_back({{c * 0.1, r * 0.1, 1.0}, {0, 0, 0}, 0.0, true});
    pts[3].position = pts[3].position * 1.8;
    EXPECT_EQ(sensor_topology_mesh(Scan(2, 2, pts), {10.0, 1.5}).triangle_count(), 1u);
}

TEST(SensorTopologyMesh, PropertiesOnRandomGrids)
{
    std::mt19937_64 rng(13);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int it = 0; it < 30; ++it) {
        const std::size_t rows = 2 + rng() % 8, cols = 2 + rng() % 8;
        std::vector<ScanPoint> pts;
        for (std::size_t r = 0; r < rows; ++r)
            for (std::size_t c = 0; c < cols; ++c) {
                const double depth = 2.0 + 2.0 * u(rng);
                const Vec3 dir = normalized(Vec3{(c - cols / 2.0) * 0.05, (r - rows / 2.0) * 0.05, 1.0});
                pts.push_back({dir * depth, {0, 0, 0}, static_cast<double>(r), u(rng) > 0.1});
            }
        const Scan s(rows, cols, pts);
        const MeshingParams params{0.6, 1.4};
        std::vector<std::size_t> src;
        const SurfaceMesh m = sensor_topology_mesh(s, params, 0, &src);
        EXPECT_LE(m.triangle_count(), 2 * (rows - 1) * (cols - 1));
        for (std::uint32_t t = 0; t < m.triangle_count(); ++t) {
            std::array<std::size_t, 3> r{}, c{};
            double rmin = 1e300, rmax = 0;
            for (int k = 0; k < 3; ++k) {
                const std::size_t p = src[m.face(t)[k]];
                r[k] = p / cols;
                c[k] = p % cols;
                EXPECT_LE(m.edge_length(t, k), params.max_edge);
                const double range = norm(m.vertices()[m.face(t)[k]]);
                rmin = std::min(rmin, range);
                rmax = std::max(rmax, range);
            }
            for (int a = 0; a < 3; ++a)
                for (int b = 0; b < 3; ++b) {
                    EXPECT_LE(std::max(r[a], r[b]) - std::min(r[a], r[b]), 1u);
                    EXPECT_LE(std::max(c[a], c[b]) - std::min(c[a], c[b]), 1u);
                }
            EXPECT_LE(rmax, params.max_ratio * rmin);
        }
    }
}

TEST(MeshFromDepthImage, Examples)
{
    const PinholeIntrinsics k{100, 100, 0.5, 0.5};
    DepthImage img{2, 2, {2, 2, 2, 2}};
    const SurfaceMesh m = mesh_from_depth_image(img, k, {0, 0, 0}, 5.0, {});
    EXPECT_EQ(m.triangle_count(), 2u);
    for (const auto& a : m.attrs()) EXPECT_EQ(a.viewpoint, (Vec3{0, 0, 0}));

    img.depth[1] = 0.0;
    EXPECT_EQ(mesh_from_depth_image(img, k, {0, 0, 0}, 5.0, {}).triangle_count(), 0u);

    const DepthImage wide{2, 3, {2, 2, 2, 2, 2, 2}};
    EXPECT_EQ(mesh_from_depth_image(wide, k, {0, 0, 0}, 5.0, {}).triangle_count(), 4u);
}
