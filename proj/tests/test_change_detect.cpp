#include <gtest/gtest.h>

#include <random>

#include "support.hpp"
#include "tessera/bvh.hpp"
#include "tessera/change_detect.hpp"

using namespace tessera;
using tessera::test::grid_mesh;
using tessera::test::make_mesh;

namespace {

/// Barycentric point-in-open-tetrahedron test.
bool inside_open_tetrahedron(const Vec3& p, const Vec3& apex, const Triangle& base)
{
    const double vol = dot(base[0] - apex, cross(base[1] - apex, base[2] - apex));
    if (vol == 0.0) return false;
    const std::array<Vec3, 4> v{apex, base[0], base[1], base[2]};
    static constexpr int opp[4][3] = {{1, 2, 3}, {0, 3, 2}, {0, 1, 3}, {0, 2, 1}};
    for (int i = 0; i < 4; ++i) {
        const Vec3& a = v[opp[i][0]];
        const Vec3& b = v[opp[i][1]];
        const Vec3& c = v[opp[i][2]];
        const double s = dot(p - a, cross(b - a, c - a));
        const double ref = dot(v[i] - a, cross(b - a, c - a));
        if (!(s * ref > 0.0)) return false;
    }
    return true;
}

/// Sampled oracle: some barycentric sample of `tri` lies strictly inside the
/// retracted tetrahedron.
bool sampled_conflict(const Triangle& tri, const Triangle& base, const Vec3& vp, double eps, int steps = 40)
{
    const auto shrunk = retracted_base(base, vp, eps);
    if (!shrunk) return false;
    for (int i = 0; i <= steps; ++i)
        for (int j = 0; i + j <= steps; ++j) {
            const double a = static_cast<double>(i) / steps, b = static_cast<double>(j) / steps;
            const Vec3 p = tri[0] * (1 - a - b) + tri[1] * a + tri[2] * b;
            if (inside_open_tetrahedron(p, vp, *shrunk)) return true;
        }
    return false;
}

Vec3 random_vec(std::mt19937_64& rng, double lo, double hi)
{
    std::uniform_real_distribution<double> u(lo, hi);
    return {u(rng), u(rng), u(rng)};
}

} // namespace

TEST(MinDistance, Examples)
{
    const Triangle a{Vec3{0, 0, 0}, Vec3{1, 0, 0}, Vec3{0, 1, 0}};
    EXPECT_DOUBLE_EQ(min_distance(a, a), 0.0);
    const Triangle lifted{Vec3{0, 0, 0.5}, Vec3{1, 0, 0.5}, Vec3{0, 1, 0.5}};
    EXPECT_NEAR(min_distance(a, lifted), 0.5, 1e-12);
    const Triangle crossing{Vec3{0.2, 0.2, -1}, Vec3{0.3, 0.2, 1}, Vec3{0.2, 0.3, 1}};
    EXPECT_DOUBLE_EQ(min_distance(a, crossing), 0.0);
}

TEST(MinDistance, MatchesDenseSampling)
{
    std::mt19937_64 rng(5);
    for (int it = 0; it < 50; ++it) {
        const Triangle a{random_vec(rng, -1, 1), random_vec(rng, -1, 1), random_vec(rng, -1, 1)};
        const Triangle b{random_vec(rng, 0, 2), random_vec(rng, 0, 2), random_vec(rng, 0, 2)};
        const double d = min_distance(a, b);
        double sampled = std::numeric_limits<double>::infinity();
        const int n = 30;
        for (int i = 0; i <= n; ++i)
            for (int j = 0; i + j <= n; ++j) {
                const Vec3 p = a[0] * (1.0 - (i + j) / double(n)) + a[1] * (i / double(n)) + a[2] * (j / double(n));
                sampled = std::min(sampled, distance(p, closest_point_on_triangle(p, b)));
            }
        EXPECT_LE(d, sampled + 1e-9);
        EXPECT_GE(d, sampled - 0.15); // sampling resolution
    }
}

TEST(IsConsistent, Examples)
{
    const DetectParams p;
    const Triangle a{Vec3{0, 0, 0}, Vec3{1, 0, 0}, Vec3{0, 1, 0}};
    EXPECT_TRUE(is_consistent(a, a, p));
    const Triangle lifted{Vec3{0, 0, 0.5}, Vec3{1, 0, 0.5}, Vec3{0, 1, 0.5}};
    EXPECT_FALSE(is_consistent(a, lifted, p));
    DetectParams narrow;
    narrow.max_normal_angle = 30.0;
    const Triangle perp{Vec3{0, 0, 0}, Vec3{1, 0, 0}, Vec3{0, 0, 1}};
    EXPECT_FALSE(is_consistent(a, perp, narrow));
    const Triangle flat{Vec3{0, 0, 0}, Vec3{1, 0, 0}, Vec3{2, 0, 0}};
    EXPECT_THROW(is_consistent(a, flat, p), Error);
}

TEST(TetraConflict, Examples)
{
    const Vec3 vp{0, 0, 0};
    const Triangle base{Vec3{2, 0, 0}, Vec3{0, 2, 0}, Vec3{0, 0, 2}};
    const Triangle inner{Vec3{0.2, 0.2, 0.2}, Vec3{0.4, 0.2, 0.2}, Vec3{0.2, 0.4, 0.2}};
    EXPECT_TRUE(tetra_conflict(inner, base, vp, 0.02));
    const Vec3 shift{5, 5, 5};
    EXPECT_FALSE(tetra_conflict(Triangle{inner[0] + shift, inner[1] + shift, inner[2] + shift}, base, vp, 0.02));
    const Triangle on_base{Vec3{1.2, 0.4, 0.4}, Vec3{0.4, 1.2, 0.4}, Vec3{0.4, 0.4, 1.2}};
    EXPECT_FALSE(tetra_conflict(on_base, base, vp, 0.05));
    EXPECT_THROW(tetra_conflict(inner, base, Vec3{1, 1, 0}, 0.02), Error); // viewpoint on the base plane
}

TEST(TetraConflict, AgreesWithSampledOracle)
{
    std::mt19937_64 rng(17);
    int hits = 0;
    for (int it = 0; it < 400; ++it) {
        const Vec3 vp = random_vec(rng, -0.5, 0.5);
        const Triangle base{random_vec(rng, 1, 3), random_vec(rng, 1, 3), random_vec(rng, 1, 3)};
        if (tetrahedron_volume(vp, base) < 1e-3) continue;
        const Vec3 c = random_vec(rng, 0, 2);
        const Triangle tri{c + random_vec(rng, -0.3, 0.3), c + random_vec(rng, -0.3, 0.3), c + random_vec(rng, -0.3, 0.3)};
        const bool sat = tetra_conflict(tri, base, vp, 0.02);
        const bool sampled = sampled_conflict(tri, base, vp, 0.02);
        EXPECT_TRUE(!sampled || sat) << "iteration " << it;
        hits += sat;
    }
    EXPECT_GT(hits, 20);
}

TEST(TetraConflict, MonotoneInRetraction)
{
    std::mt19937_64 rng(23);
    for (int it = 0; it < 300; ++it) {
        const Vec3 vp = random_vec(rng, -0.5, 0.5);
        const Triangle base{random_vec(rng, 1, 3), random_vec(rng, 1, 3), random_vec(rng, 1, 3)};
        if (tetrahedron_volume(vp, base) < 1e-3) continue;
        const Vec3 c = random_vec(rng, 0.5, 2.5);
        const Triangle tri{c + random_vec(rng, -0.3, 0.3), c + random_vec(rng, -0.3, 0.3), c + random_vec(rng, -0.3, 0.3)};
        bool prev = true;
        for (double eps : {0.0, 0.01, 0.05, 0.2, 0.5}) {
            const bool now = tetra_conflict(tri, base, vp, eps);
            EXPECT_TRUE(prev || !now) << "conflict appeared at eps " << eps;
            prev = now;
        }
    }
}

TEST(Bvh, QueryMatchesBruteForce)
{
    std::mt19937_64 rng(29);
    std::vector<Aabb> boxes;
    for (int i = 0; i < 500; ++i) {
        Aabb b;
        const Vec3 c = random_vec(rng, -10, 10);
        b.extend(c);
        b.extend(c + random_vec(rng, 0, 1.5));
        boxes.push_back(b);
    }
    const Bvh bvh(boxes);
    for (int q = 0; q < 100; ++q) {
        Aabb query;
        const Vec3 c = random_vec(rng, -10, 10);
        query.extend(c);
        query.extend(c + random_vec(rng, 0, 3));
        std::vector<std::uint32_t> got, want;
        bvh.query(query, [&](std::uint32_t i) { got.push_back(i); });
        for (std::uint32_t i = 0; i < boxes.size(); ++i)
            if (boxes[i].overlaps(query)) want.push_back(i);
        std::sort(got.begin(), got.end());
        EXPECT_EQ(got, want);
    }
}

TEST(Classify, IdenticalTrianglesAreConsistent)
{
    const std::vector<Vec3> v{{0, 0, 0}, {1, 0, 0}, {0, 1, 0}};
    const MeshSet s({make_mesh(0, v, {{0, 1, 2}}, 0.0), make_mesh(1, v, {{0, 1, 2}}, 10.0)});
    const Classification c = classify(s, {});
    EXPECT_EQ(c.at({0, 0}).status, Status::Consistent);
    EXPECT_EQ(c.at({1, 0}).status, Status::Consistent);
    EXPECT_EQ(c.at({0, 0}).consistent_with, (std::vector<TriangleRef>{{1, 0}}));
    EXPECT_EQ(c.at({1, 0}).consistent_with, (std::vector<TriangleRef>{{0, 0}}));
}

TEST(Classify, WallInsideNewerTetrahedronConflicts)
{
    const Vec3 vp{0, 0, 0};
    const Triangle wall{Vec3{2, -0.3, -0.3}, Vec3{2, 0.3, -0.3}, Vec3{2, 0, 0.3}};
    const Triangle back{Vec3{4, -2, -2}, Vec3{4, 2, -2}, Vec3{4, 0, 2}};
    // The configuration is verified independently by sampling.
    ASSERT_TRUE(sampled_conflict(wall, back, vp, 0.02));
    ASSERT_FALSE(sampled_conflict(back, wall, vp, 0.02));

    const MeshSet s({make_mesh(0, {wall[0], wall[1], wall[2]}, {{0, 1, 2}}, 0.0, vp),
                     make_mesh(1, {back[0], back[1], back[2]}, {{0, 1, 2}}, 10.0, vp)});
    const Classification c = classify(s, {});
    EXPECT_EQ(c.at({0, 0}).status, Status::Conflicting);
    ASSERT_EQ(c.at({0, 0}).conflicting_with.size(), 1u);
    EXPECT_EQ(c.at({0, 0}).conflicting_with[0].ref, (TriangleRef{1, 0}));
    EXPECT_DOUBLE_EQ(c.at({0, 0}).conflicting_with[0].t_last, 10.0);
    EXPECT_EQ(c.at({1, 0}).status, Status::Single);
}

TEST(Classify, SwappedTimestampsFlipTheConflictSide)
{
    const Triangle a{Vec3{-1.5, -1, 0}, Vec3{1.5, -1, 0}, Vec3{0, 1.5, 0}};
    const Triangle b{Vec3{0, -1, -1}, Vec3{0, 1, -1}, Vec3{0, 0, 1}};
    const Vec3 va{1, 0, 3}, vb{-3, 0, 1};
    auto run = [&](double ta, double tb) {
        const MeshSet s({make_mesh(0, {a[0], a[1], a[2]}, {{0, 1, 2}}, ta, va),
                         make_mesh(1, {b[0], b[1], b[2]}, {{0, 1, 2}}, tb, vb)});
        const Classification c = classify(s, {});
        return std::pair{c.at({0, 0}).status, c.at({1, 0}).status};
    };
    EXPECT_EQ(run(0.0, 10.0), std::pair(Status::Conflicting, Status::Single));
    EXPECT_EQ(run(10.0, 0.0), std::pair(Status::Single, Status::Conflicting));
}

TEST(Classify, SingleMeshIsAllSingle)
{
    const MeshSet s({grid_mesh(0, 3, 3, 0.1)});
    const Classification c = classify(s, {});
    EXPECT_EQ(c.count(Status::Single), s.total_triangles());
}

TEST(Classify, DisjointInputsWarnAboutFrames)
{
    const MeshSet s({grid_mesh(0, 1, 1, 0.1), grid_mesh(1, 1, 1, 0.1, {50, 50, 0})});
    const Classification c = classify(s, {});
    ASSERT_EQ(c.warnings.size(), 1u);
    EXPECT_NE(c.warnings[0].find("FrameMismatch"), std::string::npos);
}

namespace {

/// Random multi-mesh scene: jittered grids near a common plane, seen from
/// varied viewpoints at distinct times, plus a few stray triangles.
MeshSet random_scene(std::mt19937_64& rng)
{
    std::uniform_real_distribution<double> u(-1, 1);
    std::vector<SurfaceMesh> meshes;
    for (MeshId id = 0; id < 3; ++id) {
        std::vector<Vec3> v;
        std::vector<Face> f;
        std::vector<TriangleAttr> a;
        const double z = 0.05 * u(rng);
        const Vec3 vp{u(rng), u(rng), 3.0 + u(rng)};
        for (int j = 0; j <= 5; ++j)
            for (int i = 0; i <= 5; ++i) v.push_back({i * 0.2 + 0.03 * u(rng), j * 0.2 + 0.03 * u(rng), z + 0.03 * u(rng)});
        for (int j = 0; j < 5; ++j)
            for (int i = 0; i < 5; ++i) {
                const std::uint32_t p = j * 6 + i;
                f.push_back({p, p + 1, p + 7});
                f.push_back({p, p + 7, p + 6});
            }
        for (int k = 0; k < 8; ++k) {
            const Vec3 c{0.5 + 0.6 * u(rng), 0.5 + 0.6 * u(rng), 0.2 + 0.6 * std::abs(u(rng))};
            const auto b = static_cast<std::uint32_t>(v.size());
            v.push_back(c);
            v.push_back(c + Vec3{0.15, 0.02 * u(rng), 0.1 * u(rng)});
            v.push_back(c + Vec3{0.02 * u(rng), 0.15, 0.1 * u(rng)});
            f.push_back({b, b + 1, b + 2});
        }
        const double t = 10.0 * id;
        a.assign(f.size(), TriangleAttr{vp, t, t + 1.0, id, -1.0});
        meshes.emplace_back(id, std::move(v), std::move(f), std::move(a));
    }
    return MeshSet(std::move(meshes));
}

} // namespace

TEST(Classify, MatchesAllPairsBruteForce)
{
    std::mt19937_64 rng(31);
    DetectParams params;
    params.workers = 1;
    const double cos_gate = std::cos(params.max_normal_angle * std::numbers::pi / 180.0);
    for (int scene = 0; scene < 6; ++scene) {
        const MeshSet s = random_scene(rng);
        ASSERT_LE(s.total_triangles(), 200u);
        const Classification c = classify(s, params);
        std::size_t conflicts = 0;
        for (std::size_t g = 0; g < s.total_triangles(); ++g) {
            const TriangleRef x = s.ref_of(g);
            const Triangle tx = s.mesh(x.mesh).triangle(x.tri);
            std::vector<TriangleRef> partners;
            std::vector<TriangleRef> conflicting;
            for (std::size_t h = 0; h < s.total_triangles(); ++h) {
                const TriangleRef y = s.ref_of(h);
                if (y.mesh == x.mesh) continue;
                const Triangle ty = s.mesh(y.mesh).triangle(y.tri);
                const Triangle& lo = x < y ? tx : ty;
                const Triangle& hi = x < y ? ty : tx;
                const bool normals = std::abs(dot(normalized(area_normal(lo)), normalized(area_normal(hi)))) >= cos_gate;
                if (normals && min_distance(lo, hi) < params.eps_dist &&
                    projected_overlap_area(lo, hi) >= params.min_overlap * std::min(area(tx), area(ty)))
                    partners.push_back(y);
            }
            for (std::size_t h = 0; h < s.total_triangles() && partners.empty(); ++h) {
                const TriangleRef y = s.ref_of(h);
                if (y.mesh == x.mesh) continue;
                const TriangleAttr& ay = s.mesh(y.mesh).attr(y.tri);
                if (!(ay.t_last > s.mesh(x.mesh).attr(x.tri).t_last)) continue;
                bool hit = false;
                try {
                    hit = tetra_conflict(tx, s.mesh(y.mesh).triangle(y.tri), ay.viewpoint, params.eps_shrink);
                } catch (const Error&) {
                }
                if (hit && !grazing(tx, ay.viewpoint, params.grazing_angle)) conflicting.push_back(y);
            }
            const ConsistencyRecord& rec = c.at(x);
            EXPECT_EQ(rec.consistent_with, partners);
            std::vector<TriangleRef> got;
            for (const auto& e : rec.conflicting_with) got.push_back(e.ref);
            EXPECT_EQ(got, conflicting);
            EXPECT_FALSE(rec.status == Status::Consistent && !rec.conflicting_with.empty());
            conflicts += !conflicting.empty();
        }
        EXPECT_TRUE(scene != 0 || conflicts > 0);
    }
}

TEST(Classify, ConsistencyIsSymmetric)
{
    std::mt19937_64 rng(37);
    const MeshSet s = random_scene(rng);
    const Classification c = classify(s, {});
    for (std::size_t g = 0; g < s.total_triangles(); ++g) {
        const TriangleRef x = s.ref_of(g);
        for (const auto& y : c.at(x).consistent_with) {
            const auto& back = c.at(y).consistent_with;
            EXPECT_TRUE(std::find(back.begin(), back.end(), x) != back.end());
        }
    }
}

TEST(Classify, IndependentOfInputOrderAndWorkers)
{
    std::mt19937_64 rng(41);
    const MeshSet s = random_scene(rng);
    std::vector<SurfaceMesh> rev(s.meshes().rbegin(), s.meshes().rend());
    const MeshSet a = canonicalize(s.meshes());
    const MeshSet b = canonicalize(rev);
    DetectParams one, many;
    one.workers = 1;
    many.workers = 4;
    EXPECT_EQ(classify(a, one), classify(b, many));
}

TEST(DetectParams, Validation)
{
    DetectParams p;
    p.eps_shrink = p.eps_dist;
    EXPECT_THROW(p.validate(), Error);
    p = {};
    p.min_overlap = 0.0;
    EXPECT_THROW(p.validate(), Error);
}
