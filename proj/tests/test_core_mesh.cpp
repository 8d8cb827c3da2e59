#include <gtest/gtest.h>

#include <cmath>
#include <map>
#include <random>

#include "support.hpp"
#include "tessera/mesh.hpp"

using namespace tessera;
using tessera::test::grid_mesh;
using tessera::test::make_mesh;

TEST(BuildAdjacency, TwoTrianglesSharingAnEdge)
{
    const std::vector<Face> faces{{0, 1, 2}, {0, 2, 3}};
    const Adjacency adj = build_adjacency(faces);
    EXPECT_EQ(adj.neighbor_count(0), 1u);
    EXPECT_EQ(adj.neighbor_count(1), 1u);
    EXPECT_EQ(adj.boundary.size(), 4u);
}

TEST(BuildAdjacency, SingleTriangle)
{
    const std::vector<Face> faces{{0, 1, 2}};
    const Adjacency adj = build_adjacency(faces);
    EXPECT_EQ(adj.neighbor_count(0), 0u);
    EXPECT_EQ(adj.boundary.size(), 3u);
}

TEST(BuildAdjacency, ClosedTetrahedron)
{
    const std::vector<Face> faces{{0, 2, 1}, {0, 1, 3}, {1, 2, 3}, {0, 3, 2}};
    const Adjacency adj = build_adjacency(faces);
    for (std::uint32_t t = 0; t < 4; ++t) EXPECT_EQ(adj.neighbor_count(t), 3u);
    EXPECT_TRUE(adj.boundary.empty());
}

TEST(BuildAdjacency, NonManifoldEdgeIsAnError)
{
    const std::vector<Face> faces{{0, 1, 2}, {1, 0, 3}, {0, 1, 4}};
    try {
        build_adjacency(faces);
        FAIL() << "expected NonManifoldEdge";
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::NonManifoldEdge);
    }
}

TEST(BuildAdjacency, IncidenceCountsOnRandomGrids)
{
    std::mt19937_64 rng(7);
    for (int iter = 0; iter < 20; ++iter) {
        const int nx = 1 + static_cast<int>(rng() % 6), ny = 1 + static_cast<int>(rng() % 6);
        const SurfaceMesh m = grid_mesh(0, nx, ny, 0.1);
        std::map<std::pair<std::uint32_t, std::uint32_t>, int> count;
        for (const auto& f : m.faces())
            for (int k = 0; k < 3; ++k) {
                auto [a, b] = edge_vertices(f, k);
                ++count[{std::min(a, b), std::max(a, b)}];
            }
        std::size_t interior = 0;
        for (const auto& [e, c] : count) {
            EXPECT_TRUE(c == 1 || c == 2);
            interior += c == 2;
        }
        EXPECT_EQ(m.adjacency().boundary.size() + 2 * interior, 3 * m.triangle_count());
        EXPECT_EQ(m.adjacency().boundary.size(), static_cast<std::size_t>(2 * (nx + ny)));
    }
}

TEST(EdgeLength, Examples)
{
    const SurfaceMesh m = make_mesh(0, {{0, 0, 0}, {1, 0, 0}, {1, 1, 0}}, {{0, 1, 2}});
    EXPECT_DOUBLE_EQ(m.edge_length(0, 0), 1.0);
    EXPECT_NEAR(m.edge_length(0, 2), std::sqrt(2.0), 1e-12);
    EXPECT_DOUBLE_EQ(distance(Vec3{1, 2, 3}, Vec3{1, 2, 3}), 0.0);
}

TEST(EdgeLength, SymmetricInEndpointOrder)
{
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> u(-5, 5);
    for (int i = 0; i < 100; ++i) {
        const Vec3 a{u(rng), u(rng), u(rng)}, b{u(rng), u(rng), u(rng)};
        EXPECT_EQ(distance(a, b), distance(b, a));
    }
}

TEST(TriangleArea, Examples)
{
    const std::vector<Vec3> v{{0, 0, 0}, {1, 0, 0}, {0, 1, 0}, {2, 0, 0}, {1, std::sqrt(3.0), 0}, {3, 0, 0}};
    EXPECT_DOUBLE_EQ(triangle_area(v, {0, 1, 2}), 0.5);
    EXPECT_NEAR(triangle_area(v, {0, 3, 4}), std::sqrt(3.0), 1e-12);
    EXPECT_DOUBLE_EQ(triangle_area(v, {0, 1, 5}), 0.0);
}

TEST(TriangleArea, InvariantUnderRigidMotion)
{
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> u(-3, 3);
    for (int i = 0; i < 200; ++i) {
        const Triangle t{Vec3{u(rng), u(rng), u(rng)}, Vec3{u(rng), u(rng), u(rng)}, Vec3{u(rng), u(rng), u(rng)}};
        // rotation from a random unit quaternion
        double q[4] = {u(rng), u(rng), u(rng), u(rng)};
        const double n = std::sqrt(q[0] * q[0] + q[1] * q[1] + q[2] * q[2] + q[3] * q[3]);
        for (double& x : q) x /= n;
        const double w = q[0], x = q[1], y = q[2], z = q[3];
        auto rot = [&](const Vec3& p) {
            return Vec3{(1 - 2 * (y * y + z * z)) * p.x + 2 * (x * y - w * z) * p.y + 2 * (x * z + w * y) * p.z,
                        2 * (x * y + w * z) * p.x + (1 - 2 * (x * x + z * z)) * p.y + 2 * (y * z - w * x) * p.z,
                        2 * (x * z - w * y) * p.x + 2 * (y * z + w * x) * p.y + (1 - 2 * (x * x + y * y)) * p.z};
        };
        const Vec3 shift{u(rng), u(rng), u(rng)};
        const Triangle m{rot(t[0]) + shift, rot(t[1]) + shift, rot(t[2]) + shift};
        EXPECT_LE(std::abs(area(m) - area(t)), 1e-9 * std::max(area(t), 1e-12));
    }
}

TEST(TriangleViewpoint, Examples)
{
    EXPECT_EQ(triangle_viewpoint({0, 0, 0}, {0, 0, 0}, {0, 0, 0}), (Vec3{0, 0, 0}));
    EXPECT_EQ(triangle_viewpoint({0, 0, 0}, {3, 0, 0}, {0, 3, 0}), (Vec3{1, 1, 0}));
    EXPECT_EQ(triangle_viewpoint({1, 1, 1}, {1, 1, 1}, {1, 1, 1}), (Vec3{1, 1, 1}));
}

TEST(SurfaceMesh, ConstructorValidates)
{
    auto code = [](auto&& f) {
        try {
            f();
        } catch (const Error& e) {
            return e.code();
        }
        return ErrorCode::Io;
    };
    EXPECT_EQ(code([] { make_mesh(0, {{0, 0, 0}, {1, 0, 0}}, {{0, 1, 2}}); }), ErrorCode::InvalidMesh);
    EXPECT_EQ(code([] { make_mesh(0, {{0, 0, 0}, {1, 0, 0}, {0, 1, 0}}, {{0, 1, 1}}); }), ErrorCode::InvalidMesh);
    EXPECT_EQ(code([] { make_mesh(0, {{0, 0, 0}, {1, 0, 0}, {0, 0, 10}}, {{0, 1, 2}}); }), ErrorCode::InvalidMesh);
    EXPECT_EQ(code([] { make_mesh(0, {{0, 0, NAN}, {1, 0, 0}, {0, 1, 0}}, {{0, 1, 2}}); }),
              ErrorCode::NonFiniteCoordinate);
    EXPECT_EQ(code([] {
                  SurfaceMesh(0, {{0, 0, 0}, {1, 0, 0}, {0, 1, 0}}, {{0, 1, 2}},
                              {TriangleAttr{{0, 0, 5}, 2.0, 1.0, 0, -1.0}});
              }),
              ErrorCode::InvalidMesh);
}

TEST(SurfaceMesh, QualityDefaultsToArea)
{
    const SurfaceMesh m = make_mesh(0, {{0, 0, 0}, {2, 0, 0}, {0, 1, 0}}, {{0, 1, 2}});
    EXPECT_DOUBLE_EQ(m.attr(0).quality, 1.0);
}

TEST(Canonicalize, IndependentOfInputOrder)
{
    std::vector<SurfaceMesh> in{grid_mesh(5, 2, 2, 0.1, {}, 30.0), grid_mesh(9, 1, 3, 0.1, {}, 10.0),
                                grid_mesh(1, 3, 1, 0.1, {}, 20.0), grid_mesh(2, 2, 1, 0.2, {}, 10.0)};
    const MeshSet ref = canonicalize(in);
    std::vector<std::size_t> perm{0, 1, 2, 3};
    while (std::next_permutation(perm.begin(), perm.end())) {
        std::vector<SurfaceMesh> p;
        for (auto i : perm) p.push_back(in[i]);
        const MeshSet got = canonicalize(p);
        ASSERT_EQ(got.size(), ref.size());
        for (std::size_t i = 0; i < got.size(); ++i) {
            EXPECT_EQ(got[i].id(), static_cast<MeshId>(i));
            EXPECT_EQ(got[i].content_hash(), ref[i].content_hash());
        }
    }
    EXPECT_DOUBLE_EQ(ref[0].earliest_time(), 10.0);
    EXPECT_DOUBLE_EQ(ref[3].earliest_time(), 30.0);
}

TEST(MeshSet, GlobalIndexRoundTrip)
{
    const MeshSet s({grid_mesh(3, 1, 1, 1.0), grid_mesh(1, 2, 1, 1.0)});
    EXPECT_EQ(s[0].id(), 1u);
    EXPECT_EQ(s.total_triangles(), 6u);
    for (std::size_t g = 0; g < s.total_triangles(); ++g) EXPECT_EQ(s.global_index(s.ref_of(g)), g);
    EXPECT_THROW(s.index_of(2), Error);
    EXPECT_THROW(MeshSet({grid_mesh(1, 1, 1, 1.0), grid_mesh(1, 1, 1, 1.0)}), Error);
}
