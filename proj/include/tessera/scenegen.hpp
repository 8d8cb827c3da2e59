#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <istream>
#include <limits>
#include <numbers>
#include <optional>
#include <ostream>
#include <random>
#include <string>
#include <vector>

#include <json.hpp>

#include "tessera/detail/codec.hpp"
#include "tessera/error.hpp"
#include "tessera/geometry.hpp"
#include "tessera/scan.hpp"

namespace tessera {

/// Planar parallelogram (center +- u +- v) or yawed box. A room is a box
/// with the sensor inside.
struct Primitive {
    enum class Kind { Plane, Box };
    Kind kind = Kind::Plane;
    std::string name;
    Vec3 center;
    Vec3 u, v;      ///< plane half axes
    Vec3 half;      ///< box half extents
    double yaw = 0; ///< box rotation about +z, degrees
    double appear = -std::numeric_limits<double>::infinity();
    double disappear = std::numeric_limits<double>::infinity();

    bool is_static() const noexcept { return std::isinf(appear) && std::isinf(disappear); }
    bool active_at(double t) const noexcept { return appear <= t && t < disappear; }
};

struct EpochSpec {
    double time = 0.0;
    std::vector<Vec3> poses; ///< sensor trajectory, traversed once per scan
    double duration = 1.0;   ///< seconds from first to last scanline
};

struct SceneScript {
    std::vector<Primitive> primitives;
    std::vector<EpochSpec> epochs;
    double resolution = 2.0; ///< angular step, degrees
    double azimuth_min = 0.0, azimuth_max = 360.0;
    double elevation_min = -60.0, elevation_max = 60.0;
    double max_range = 100.0;
    double noise = 0.0; ///< range noise standard deviation (m)

    void validate() const
    {
        if (primitives.empty()) throw Error(ErrorCode::EmptyScene, "scene has no primitives");
        if (epochs.empty()) throw Error(ErrorCode::InvariantViolation, "scene needs at least one epoch");
        for (const auto& p : primitives)
            if (!(p.disappear > p.appear))
                throw Error(ErrorCode::InvariantViolation, "primitive '" + p.name + "' must disappear after it appears");
        for (const auto& e : epochs)
            if (e.poses.empty()) throw Error(ErrorCode::InvariantViolation, "every epoch needs a sensor pose");
        if (!(resolution > 0.0) || !(azimuth_max > azimuth_min) || !(elevation_max >= elevation_min) ||
            !(max_range > 0.0) || !(noise >= 0.0))
            throw Error(ErrorCode::InvariantViolation, "bad scan geometry in scene script");
    }
};

/// Source of one scan point; primitive = -1 for points without a hit.
struct GroundTruthPoint {
    std::int32_t primitive = -1;
    std::uint8_t face = 0;
    double appear = -std::numeric_limits<double>::infinity();
    double disappear = std::numeric_limits<double>::infinity();

    bool is_static() const noexcept { return std::isinf(appear) && std::isinf(disappear); }
    friend bool operator==(const GroundTruthPoint&, const GroundTruthPoint&) = default;
};

struct GeneratedEpoch {
    Scan scan;
    std::vector<GroundTruthPoint> truth; ///< aligned with scan.points()
};

namespace detail {

inline Vec3 json_vec3(const nlohmann::json& j, const char* what)
{
    if (!j.is_array() || j.size() != 3) throw Error(ErrorCode::InvariantViolation, std::string(what) + " must be [x, y, z]");
    return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
}

struct FaceTri {
    Triangle tri;
    std::int32_t primitive;
    std::uint8_t face;
};

inline void primitive_triangles(const Primitive& p, std::int32_t index, std::vector<FaceTri>& out)
{
    if (p.kind == Primitive::Kind::Plane) {
        const Vec3 a = p.center - p.u - p.v, b = p.center + p.u - p.v, c = p.center + p.u + p.v, d = p.center - p.u + p.v;
        out.push_back({{a, b, c}, index, 0});
        out.push_back({{a, c, d}, index, 0});
        return;
    }
    const double y = p.yaw * std::numbers::pi / 180.0;
    const Vec3 ex{std::cos(y), std::sin(y), 0.0}, ey{-std::sin(y), std::cos(y), 0.0}, ez{0.0, 0.0, 1.0};
    auto corner = [&](int sx, int sy, int sz) {
        return p.center + ex * (sx * p.half.x) + ey * (sy * p.half.y) + ez * (sz * p.half.z);
    };
    // face order: -x, +x, -y, +y, -z, +z
    const int quads[6][4][3] = {
        {{-1, -1, -1}, {-1, 1, -1}, {-1, 1, 1}, {-1, -1, 1}}, {{1, -1, -1}, {1, -1, 1}, {1, 1, 1}, {1, 1, -1}},
        {{-1, -1, -1}, {-1, -1, 1}, {1, -1, 1}, {1, -1, -1}}, {{-1, 1, -1}, {1, 1, -1}, {1, 1, 1}, {-1, 1, 1}},
        {{-1, -1, -1}, {1, -1, -1}, {1, 1, -1}, {-1, 1, -1}}, {{-1, -1, 1}, {-1, 1, 1}, {1, 1, 1}, {1, -1, 1}},
    };
    for (std::uint8_t f = 0; f < 6; ++f) {
        Vec3 q[4];
        for (int k = 0; k < 4; ++k) q[k] = corner(quads[f][k][0], quads[f][k][1], quads[f][k][2]);
        out.push_back({{q[0], q[1], q[2]}, index, f});
        out.push_back({{q[0], q[2], q[3]}, index, f});
    }
}

inline Vec3 trajectory_point(const std::vector<Vec3>& poses, double s)
{
    if (poses.size() == 1) return poses.front();
    const double x = std::clamp(s, 0.0, 1.0) * static_cast<double>(poses.size() - 1);
    const auto i = std::min(static_cast<std::size_t>(x), poses.size() - 2);
    const double f = x - static_cast<double>(i);
    return poses[i] * (1.0 - f) + poses[i + 1] * f;
}

} // namespace detail

inline SceneScript parse_scene_script(const nlohmann::json& j)
{
    SceneScript s;
    try {
        s.resolution = j.value("resolution", s.resolution);
        s.azimuth_min = j.value("azimuth_min", s.azimuth_min);
        s.azimuth_max = j.value("azimuth_max", s.azimuth_max);
        s.elevation_min = j.value("elevation_min", s.elevation_min);
        s.elevation_max = j.value("elevation_max", s.elevation_max);
        s.max_range = j.value("max_range", s.max_range);
        s.noise = j.value("noise", s.noise);
        for (const auto& pj : j.value("primitives", nlohmann::json::array())) {
            Primitive p;
            const std::string type = pj.at("type").get<std::string>();
            p.name = pj.value("name", type);
            p.center = detail::json_vec3(pj.at("center"), "center");
            if (type == "plane") {
                p.kind = Primitive::Kind::Plane;
                p.u = detail::json_vec3(pj.at("u"), "u");
                p.v = detail::json_vec3(pj.at("v"), "v");
            } else if (type == "box") {
                p.kind = Primitive::Kind::Box;
                p.half = detail::json_vec3(pj.at("half"), "half");
                p.yaw = pj.value("yaw", 0.0);
            } else {
                throw Error(ErrorCode::InvariantViolation, "unknown primitive type '" + type + "'");
            }
            if (pj.contains("appear")) p.appear = pj["appear"].get<double>();
            if (pj.contains("disappear")) p.disappear = pj["disappear"].get<double>();
            s.primitives.push_back(std::move(p));
        }
        for (const auto& ej : j.value("epochs", nlohmann::json::array())) {
            EpochSpec e;
            e.time = ej.at("time").get<double>();
            e.duration = ej.value("duration", e.duration);
            for (const auto& pj : ej.at("poses")) e.poses.push_back(detail::json_vec3(pj, "pose"));
            s.epochs.push_back(std::move(e));
        }
    } catch (const nlohmann::json::exception& ex) {
        throw Error(ErrorCode::InvariantViolation, std::string("scene script: ") + ex.what());
    }
    s.validate();
    return s;
}

inline SceneScript load_scene_script(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::Io, "cannot open " + path.string());
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& ex) {
        throw Error(ErrorCode::MalformedHeader, std::string("scene script: ") + ex.what());
    }
    return parse_scene_script(j);
}

/// Ray-casts every epoch. Rows sweep azimuth (one scanline each, acquired
/// from a pose interpolated along the epoch trajectory); columns sweep
/// elevation bottom-up. All noise comes from `seed`.
inline std::vector<GeneratedEpoch> scenegen(const SceneScript& script, std::uint64_t seed = 0)
{
    script.validate();
    const double deg = std::numbers::pi / 180.0;
    const double az_span = script.azimuth_max - script.azimuth_min;
    const bool full_turn = az_span >= 360.0 - 1e-9;
    const auto rows = static_cast<std::size_t>(std::max(2.0, full_turn ? std::round(az_span / script.resolution)
                                                                       : std::floor(az_span / script.resolution + 1e-9) + 1));
    const auto cols = static_cast<std::size_t>(
        std::max(2.0, std::floor((script.elevation_max - script.elevation_min) / script.resolution + 1e-9) + 1));

    std::mt19937_64 rng(seed);
    std::normal_distribution<double> gauss(0.0, 1.0);
    std::vector<GeneratedEpoch> out;
    for (const EpochSpec& e : script.epochs) {
        std::vector<detail::FaceTri> tris;
        for (std::size_t p = 0; p < script.primitives.size(); ++p)
            if (script.primitives[p].active_at(e.time))
                detail::primitive_triangles(script.primitives[p], static_cast<std::int32_t>(p), tris);

        std::vector<ScanPoint> pts(rows * cols);
        std::vector<GroundTruthPoint> truth(rows * cols);
        for (std::size_t r = 0; r < rows; ++r) {
            const double s = rows > 1 ? static_cast<double>(r) / static_cast<double>(rows - 1) : 0.0;
            const Vec3 origin = detail::trajectory_point(e.poses, s);
            const double t = e.time + e.duration * static_cast<double>(r) / static_cast<double>(rows);
            const double az = (script.azimuth_min + script.resolution * static_cast<double>(r)) * deg;
            for (std::size_t c = 0; c < cols; ++c) {
                const double el = (script.elevation_min + script.resolution * static_cast<double>(c)) * deg;
                const Vec3 dir{std::cos(el) * std::cos(az), std::cos(el) * std::sin(az), std::sin(el)};
                const Ray ray{origin, dir};
                double best = script.max_range;
                const detail::FaceTri* hit = nullptr;
                for (const auto& ft : tris)
                    if (auto d = ray_triangle(ray, ft.tri, 1e-9, best)) {
                        best = *d;
                        hit = &ft;
                    }
                ScanPoint& sp = pts[r * cols + c];
                sp.sensor_origin = origin;
                sp.t = t;
                const double jitter = script.noise > 0.0 ? script.noise * gauss(rng) : 0.0;
                if (!hit || best + jitter <= 1e-6) continue;
                sp.position = origin + dir * (best + jitter);
                sp.valid = true;
                const Primitive& prim = script.primitives[hit->primitive];
                truth[r * cols + c] = {hit->primitive, hit->face, prim.appear, prim.disappear};
            }
        }
        out.push_back({Scan(rows, cols, std::move(pts)), std::move(truth)});
    }
    return out;
}

// Ground-truth text file: `TRUTH n`, then `primitive face appear disappear`
// per scan point in scan order.

inline void write_ground_truth(std::ostream& os, std::span<const GroundTruthPoint> truth)
{
    using detail::format_double;
    os << "TRUTH " << truth.size() << '\n';
    for (const auto& g : truth)
        os << g.primitive << ' ' << static_cast<unsigned>(g.face) << ' ' << format_double(g.appear) << ' '
           << format_double(g.disappear) << '\n';
}

inline std::vector<GroundTruthPoint> read_ground_truth(std::istream& in)
{
    std::string line;
    if (!std::getline(in, line)) throw Error(ErrorCode::MalformedHeader, "empty ground-truth file");
    const auto head = detail::split_ws(line);
    if (head.size() != 2 || head[0] != "TRUTH") throw Error(ErrorCode::MalformedHeader, "expected 'TRUTH n'");
    const auto n = detail::parse_int<std::size_t>(head[1]);
    if (!n) throw Error(ErrorCode::MalformedHeader, "bad ground-truth count");
    std::vector<GroundTruthPoint> truth;
    truth.reserve(*n);
    while (truth.size() < *n && std::getline(in, line)) {
        const auto tok = detail::split_ws(line);
        if (tok.empty()) continue;
        if (tok.size() != 4) throw Error(ErrorCode::MalformedHeader, "bad ground-truth line");
        auto p = detail::parse_int<std::int32_t>(tok[0]);
        auto f = detail::parse_int<unsigned>(tok[1]);
        auto a = detail::parse_double(tok[2]);
        auto d = detail::parse_double(tok[3]);
        if (!p || !f || !a || !d || *f > 5) throw Error(ErrorCode::MalformedHeader, "bad ground-truth line");
        truth.push_back({*p, static_cast<std::uint8_t>(*f), *a, *d});
    }
    if (truth.size() != *n) throw Error(ErrorCode::MalformedHeader, "ground-truth file ends early");
    return truth;
}

} // namespace tessera
