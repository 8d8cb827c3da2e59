#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "tessera/detail/codec.hpp"
#include "tessera/error.hpp"
#include "tessera/mesh.hpp"

namespace tessera {

struct ScanPoint {
    Vec3 position;
    Vec3 sensor_origin;
    double t = 0.0;
    bool valid = false;

    friend bool operator==(const ScanPoint&, const ScanPoint&) = default;
};

/// Grid-ordered range scan: `rows` scanlines of `cols` points each, row-major.
class Scan {
public:
    Scan() = default;

    Scan(std::size_t rows, std::size_t cols, std::vector<ScanPoint> points)
        : rows_(rows), cols_(cols), points_(std::move(points))
    {
        if (cols_ < 2) throw Error(ErrorCode::InvalidScan, "scanline length must be at least 2");
        if (points_.size() != rows_ * cols_)
            throw Error(ErrorCode::RaggedScanline, "expected " + std::to_string(rows_ * cols_) + " points, got " +
                                                       std::to_string(points_.size()));
        double last_t = -std::numeric_limits<double>::infinity();
        for (const auto& p : points_) {
            if (!p.valid) continue;
            if (!is_finite(p.position) || !is_finite(p.sensor_origin) || !std::isfinite(p.t))
                throw Error(ErrorCode::NonFiniteCoordinate, "valid scan point with non-finite value");
            if (p.position == p.sensor_origin)
                throw Error(ErrorCode::InvalidScan, "valid scan point coincides with its sensor origin");
            if (p.t < last_t) throw Error(ErrorCode::InvalidScan, "timestamps decrease along acquisition order");
            last_t = p.t;
        }
    }

    std::size_t rows() const noexcept { return rows_; }
    std::size_t cols() const noexcept { return cols_; }
    std::size_t scanline_len() const noexcept { return cols_; }
    const ScanPoint& at(std::size_t r, std::size_t c) const noexcept { return points_[r * cols_ + c]; }
    std::span<const ScanPoint> scanline(std::size_t r) const noexcept { return {points_.data() + r * cols_, cols_}; }
    std::span<const ScanPoint> points() const noexcept { return points_; }

    std::size_t invalid_count() const noexcept
    {
        return static_cast<std::size_t>(std::count_if(points_.begin(), points_.end(), [](const auto& p) { return !p.valid; }));
    }

    friend bool operator==(const Scan&, const Scan&) = default;

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<ScanPoint> points_;
};

inline constexpr char kScanMagic[16] = {'T', 'E', 'S', 'S', 'E', 'R', 'A', '-', 'S', 'C', 'A', 'N', 0, 0, 0, 0};

enum class ScanEncoding { Text, Binary };

// ---------------------------------------------------------------------------
// Scan files

inline Scan read_scan_text(std::istream& in)
{
    std::string line;
    if (!std::getline(in, line)) throw Error(ErrorCode::MalformedHeader, "empty scan file");
    const auto head = detail::split_ws(line);
    if (head.size() != 3 || head[0] != "SCAN") throw Error(ErrorCode::MalformedHeader, "expected 'SCAN <rows> <cols>'");
    const auto rows = detail::parse_int<std::size_t>(head[1]);
    const auto cols = detail::parse_int<std::size_t>(head[2]);
    if (!rows || !cols) throw Error(ErrorCode::MalformedHeader, "bad grid shape in scan header");

    std::vector<ScanPoint> pts;
    pts.reserve(*rows * *cols);
    std::size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (detail::trim(line).empty()) continue;
        const auto tok = detail::split_ws(line);
        if (tok.size() != 8) throw Error(ErrorCode::InvalidScan, "line " + std::to_string(lineno) + ": expected 8 fields");
        double v[7];
        for (int i = 0; i < 7; ++i) {
            auto d = detail::parse_double(tok[i]);
            if (!d) throw Error(ErrorCode::InvalidScan, "line " + std::to_string(lineno) + ": bad number");
            v[i] = *d;
        }
        if (tok[7] != "0" && tok[7] != "1")
            throw Error(ErrorCode::InvalidScan, "line " + std::to_string(lineno) + ": valid flag must be 0 or 1");
        pts.push_back({{v[0], v[1], v[2]}, {v[3], v[4], v[5]}, v[6], tok[7] == "1"});
    }
    return Scan(*rows, *cols, std::move(pts));
}

inline Scan read_scan_binary(std::istream& in)
{
    char magic[16];
    if (!in.read(magic, 16) || std::memcmp(magic, kScanMagic, 16) != 0)
        throw Error(ErrorCode::MalformedHeader, "missing binary scan magic");
    std::uint64_t rows = 0, cols = 0;
    if (!detail::read_le(in, rows) || !detail::read_le(in, cols))
        throw Error(ErrorCode::MalformedHeader, "truncated binary scan header");
    if (rows > (1ull << 40) / std::max<std::uint64_t>(cols, 1))
        throw Error(ErrorCode::MalformedHeader, "implausible grid shape");
    std::vector<ScanPoint> pts;
    pts.reserve(rows * cols);
    for (;;) {
        double v[8];
        if (!detail::read_le(in, v[0])) break;
        for (int i = 1; i < 8; ++i)
            if (!detail::read_le(in, v[i])) throw Error(ErrorCode::RaggedScanline, "truncated point record");
        if (v[7] != 0.0 && v[7] != 1.0) throw Error(ErrorCode::InvalidScan, "valid flag must be 0 or 1");
        pts.push_back({{v[0], v[1], v[2]}, {v[3], v[4], v[5]}, v[6], v[7] == 1.0});
    }
    return Scan(rows, cols, std::move(pts));
}

/// Reads either encoding, detected from the leading bytes.
inline Scan read_scan(const std::filesystem::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCode::Io, "cannot open " + path.string());
    char head[16] = {};
    in.read(head, 16);
    const bool binary = in.gcount() == 16 && std::memcmp(head, kScanMagic, 16) == 0;
    in.clear();
    in.seekg(0);
    return binary ? read_scan_binary(in) : read_scan_text(in);
}

inline void write_scan(std::ostream& out, const Scan& scan, ScanEncoding enc)
{
    if (enc == ScanEncoding::Text) {
        out << "SCAN " << scan.rows() << ' ' << scan.cols() << '\n';
        for (const auto& p : scan.points()) {
            using detail::format_double;
            out << format_double(p.position.x) << ' ' << format_double(p.position.y) << ' '
                << format_double(p.position.z) << ' ' << format_double(p.sensor_origin.x) << ' '
                << format_double(p.sensor_origin.y) << ' ' << format_double(p.sensor_origin.z) << ' '
                << format_double(p.t) << ' ' << (p.valid ? 1 : 0) << '\n';
        }
        return;
    }
    out.write(kScanMagic, 16);
    detail::write_le<std::uint64_t>(out, scan.rows());
    detail::write_le<std::uint64_t>(out, scan.cols());
    for (const auto& p : scan.points()) {
        for (double d : {p.position.x, p.position.y, p.position.z, p.sensor_origin.x, p.sensor_origin.y,
                         p.sensor_origin.z, p.t, p.valid ? 1.0 : 0.0})
            detail::write_le(out, d);
    }
}

inline void write_scan(const std::filesystem::path& path, const Scan& scan, ScanEncoding enc)
{
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error(ErrorCode::Io, "cannot write " + path.string());
    write_scan(out, scan, enc);
}

// ---------------------------------------------------------------------------
// Sensor-topology meshing

struct MeshingParams {
    double max_edge = 1.0;  ///< meters
    double max_ratio = 1.5; ///< max/min sensor range among a triangle's vertices

    void validate() const
    {
        if (!(max_edge > 0.0)) throw Error(ErrorCode::InvariantViolation, "scan.max_edge must be > 0");
        if (!(max_ratio > 1.0)) throw Error(ErrorCode::InvariantViolation, "scan.max_ratio must be > 1");
    }
};

/// Triangulates the scan grid: every fully valid quad is split along its
/// shorter 3D diagonal, then triangles failing the edge-length or range-ratio
/// filter are dropped. An empty result is returned (not thrown) when every
/// quad is filtered. `vertex_source`, when given, receives the scan point
/// index (row * cols + col) of every mesh vertex.
inline SurfaceMesh sensor_topology_mesh(const Scan& scan, const MeshingParams& params, MeshId id = 0,
                                        std::vector<std::size_t>* vertex_source = nullptr)
{
    params.validate();
    if (vertex_source) vertex_source->clear();
    const std::size_t rows = scan.rows(), cols = scan.cols();
    std::vector<std::int64_t> vertex_of(rows * cols, -1);
    std::vector<Vec3> vertices;
    std::vector<Face> faces;
    std::vector<TriangleAttr> attrs;

    auto vid = [&](std::size_t r, std::size_t c) {
        const std::size_t k = r * cols + c;
        if (vertex_of[k] < 0) {
            vertex_of[k] = static_cast<std::int64_t>(vertices.size());
            vertices.push_back(scan.at(r, c).position);
            if (vertex_source) vertex_source->push_back(k);
        }
        return static_cast<std::uint32_t>(vertex_of[k]);
    };

    auto emit = [&](std::array<std::pair<std::size_t, std::size_t>, 3> corners) {
        std::array<const ScanPoint*, 3> p{};
        for (int i = 0; i < 3; ++i) p[i] = &scan.at(corners[i].first, corners[i].second);
        double rmin = std::numeric_limits<double>::infinity(), rmax = 0.0;
        for (int i = 0; i < 3; ++i) {
            if (distance(p[i]->position, p[(i + 1) % 3]->position) > params.max_edge) return;
            const double range = distance(p[i]->position, p[i]->sensor_origin);
            rmin = std::min(rmin, range);
            rmax = std::max(rmax, range);
        }
        if (rmax > params.max_ratio * rmin) return;
        if (area(Triangle{p[0]->position, p[1]->position, p[2]->position}) <= 0.0) return;
        const Vec3 vp = triangle_viewpoint(p[0]->sensor_origin, p[1]->sensor_origin, p[2]->sensor_origin);
        for (int i = 0; i < 3; ++i)
            if (distance(vp, p[i]->position) <= 1e-9) return;
        const double t = (p[0]->t + p[1]->t + p[2]->t) / 3.0;
        faces.push_back({vid(corners[0].first, corners[0].second), vid(corners[1].first, corners[1].second),
                         vid(corners[2].first, corners[2].second)});
        attrs.push_back({vp, t, t, id, -1.0});
    };

    for (std::size_t r = 0; r + 1 < rows; ++r) {
        for (std::size_t c = 0; c + 1 < cols; ++c) {
            const ScanPoint& p00 = scan.at(r, c);
            const ScanPoint& p01 = scan.at(r, c + 1);
            const ScanPoint& p10 = scan.at(r + 1, c);
            const ScanPoint& p11 = scan.at(r + 1, c + 1);
            if (!(p00.valid && p01.valid && p10.valid && p11.valid)) continue;
            const std::pair<std::size_t, std::size_t> a{r, c}, b{r, c + 1}, d{r + 1, c}, e{r + 1, c + 1};
            if (distance(p00.position, p11.position) <= distance(p01.position, p10.position)) {
                emit({a, d, e});
                emit({a, e, b});
            } else {
                emit({a, d, b});
                emit({b, d, e});
            }
        }
    }
    return SurfaceMesh(id, std::move(vertices), std::move(faces), std::move(attrs));
}

struct PinholeIntrinsics {
    double fx = 1.0;
    double fy = 1.0;
    double cx = 0.0;
    double cy = 0.0;
};

/// Depth image in row-major order; non-positive or non-finite depth = missing.
struct DepthImage {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> depth;
};

/// Camera frame: x right, y down, z forward. `world_from_camera` is a
/// row-major rotation; the camera center is the single viewpoint.
inline SurfaceMesh mesh_from_depth_image(const DepthImage& image, const PinholeIntrinsics& k, const Vec3& viewpoint,
                                         double t, const MeshingParams& params, MeshId id = 0,
                                         const std::array<double, 9>& world_from_camera = {1, 0, 0, 0, 1, 0, 0, 0, 1})
{
    if (image.depth.size() != image.rows * image.cols)
        throw Error(ErrorCode::RaggedScanline, "depth image size does not match its shape");
    const auto& R = world_from_camera;
    std::vector<ScanPoint> pts(image.depth.size());
    for (std::size_t r = 0; r < image.rows; ++r) {
        for (std::size_t c = 0; c < image.cols; ++c) {
            const double d = image.depth[r * image.cols + c];
            ScanPoint& p = pts[r * image.cols + c];
            p.sensor_origin = viewpoint;
            p.t = t;
            if (!(std::isfinite(d) && d > 0.0)) continue;
            const Vec3 cam{(static_cast<double>(c) - k.cx) / k.fx * d, (static_cast<double>(r) - k.cy) / k.fy * d, d};
            p.position = viewpoint + Vec3{R[0] * cam.x + R[1] * cam.y + R[2] * cam.z,
                                          R[3] * cam.x + R[4] * cam.y + R[5] * cam.z,
                                          R[6] * cam.x + R[7] * cam.y + R[8] * cam.z};
            p.valid = true;
        }
    }
    return sensor_topology_mesh(Scan(image.rows, image.cols, std::move(pts)), params, id);
}

} // namespace tessera
