#pragma once

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "tessera/change_detect.hpp"
#include "tessera/config.hpp"
#include "tessera/io.hpp"
#include "tessera/mesh.hpp"
#include "tessera/mosaic.hpp"
#include "tessera/scan.hpp"
#include "tessera/stitcher.hpp"
#include "tessera/sustainability.hpp"

namespace tessera {

// Artifact directory layout written and read by the stages.
namespace artifact {
inline constexpr const char* kMeshDir = "meshes";
inline constexpr const char* kRecords = "records.txt";
inline constexpr const char* kSustainable = "sustainable.txt";
inline constexpr const char* kLabels = "labels.txt";
inline constexpr const char* kReport = "mosaic_report.txt";
inline constexpr const char* kStitched = "stitched.ply";
inline constexpr const char* kDebugDetect = "debug_detect.ply";
inline constexpr const char* kDebugMosaic = "debug_mosaic.ply";
inline constexpr const char* kDebugStitched = "debug_stitched.ply";
} // namespace artifact

// ---------------------------------------------------------------------------
// Text artifacts

inline void write_records(std::ostream& os, const MeshSet& meshes, const Classification& c)
{
    using detail::format_double;
    os << "RECORDS " << meshes.size() << '\n';
    for (std::size_t mi = 0; mi < meshes.size(); ++mi) {
        const auto recs = c.mesh_records(mi);
        os << "MESH " << meshes[mi].id() << ' ' << recs.size() << '\n';
        for (const auto& r : recs) {
            os << (r.status == Status::Consistent ? 'C' : r.status == Status::Conflicting ? 'X' : 'S') << ' '
               << (r.single_kind == SingleKind::Occlusion ? 'O' : r.single_kind == SingleKind::Coverage ? 'V' : '-')
               << ' ' << r.consistent_with.size();
            for (const auto& p : r.consistent_with) os << ' ' << p.mesh << ' ' << p.tri;
            os << ' ' << r.conflicting_with.size();
            for (const auto& e : r.conflicting_with) os << ' ' << e.ref.mesh << ' ' << e.ref.tri << ' ' << format_double(e.t_last);
            os << '\n';
        }
    }
    for (const auto& w : c.warnings) os << "WARNING " << w << '\n';
}

namespace detail {

class TokenReader {
public:
    TokenReader(std::istream& in, std::string what) : in_(in), what_(std::move(what)) {}

    std::string word()
    {
        std::string s;
        if (!(in_ >> s)) fail("unexpected end of file");
        return s;
    }
    void expect(std::string_view w)
    {
        if (word() != w) fail("expected '" + std::string(w) + "'");
    }
    template <class Int>
    Int integer()
    {
        auto v = parse_int<Int>(word());
        if (!v) fail("expected an integer");
        return *v;
    }
    double real()
    {
        auto v = parse_double(word());
        if (!v) fail("expected a number");
        return *v;
    }
    std::string rest_of_line()
    {
        std::string s;
        std::getline(in_, s);
        return std::string(trim(s));
    }
    [[noreturn]] void fail(const std::string& msg) const { throw Error(ErrorCode::MalformedHeader, what_ + ": " + msg); }

private:
    std::istream& in_;
    std::string what_;
};

inline void check_mesh_header(TokenReader& r, const SurfaceMesh& m)
{
    r.expect("MESH");
    if (r.integer<MeshId>() != m.id() || r.integer<std::size_t>() != m.triangle_count())
        r.fail("mesh " + std::to_string(m.id()) + " does not match the mesh artifacts");
}

inline void check_mesh_count(TokenReader& r, std::string_view tag, const MeshSet& meshes)
{
    r.expect(tag);
    if (r.integer<std::size_t>() != meshes.size()) r.fail("mesh count does not match the mesh artifacts");
}

} // namespace detail

inline Classification read_records(std::istream& in, const MeshSet& meshes)
{
    detail::TokenReader r(in, "records");
    detail::check_mesh_count(r, "RECORDS", meshes);
    Classification c(meshes);
    for (std::size_t mi = 0; mi < meshes.size(); ++mi) {
        detail::check_mesh_header(r, meshes[mi]);
        for (auto& rec : c.mesh_records(mi)) {
            const std::string s = r.word(), k = r.word();
            if (s == "C") rec.status = Status::Consistent;
            else if (s == "X") rec.status = Status::Conflicting;
            else if (s == "S") rec.status = Status::Single;
            else r.fail("bad status '" + s + "'");
            if (k == "O") rec.single_kind = SingleKind::Occlusion;
            else if (k == "V") rec.single_kind = SingleKind::Coverage;
            else if (k == "-") rec.single_kind = SingleKind::None;
            else r.fail("bad single kind '" + k + "'");
            for (auto n = r.integer<std::size_t>(); n > 0; --n) {
                const auto m = r.integer<MeshId>();
                rec.consistent_with.push_back({m, r.integer<std::uint32_t>()});
            }
            for (auto n = r.integer<std::size_t>(); n > 0; --n) {
                const auto m = r.integer<MeshId>();
                const auto t = r.integer<std::uint32_t>();
                rec.conflicting_with.push_back({{m, t}, r.real()});
            }
        }
    }
    std::string w;
    while (in >> w) {
        if (w != "WARNING") r.fail("unexpected token '" + w + "'");
        c.warnings.push_back(r.rest_of_line());
    }
    return c;
}

inline void write_sustainable(std::ostream& os, const std::set<TriangleRef>& s)
{
    os << "SUSTAINABLE " << s.size() << '\n';
    for (const auto& t : s) os << t.mesh << ' ' << t.tri << '\n';
}

inline std::set<TriangleRef> read_sustainable(std::istream& in, const MeshSet& meshes)
{
    detail::TokenReader r(in, "sustainable set");
    r.expect("SUSTAINABLE");
    std::set<TriangleRef> s;
    for (auto n = r.integer<std::size_t>(); n > 0; --n) {
        const auto m = r.integer<MeshId>();
        const auto t = r.integer<std::uint32_t>();
        std::size_t pos = 0;
        try {
            pos = meshes.index_of(m);
        } catch (const Error&) {
            r.fail("unknown mesh id " + std::to_string(m));
        }
        if (t >= meshes[pos].triangle_count()) r.fail("triangle index out of range");
        s.insert({m, t});
    }
    return s;
}

/// Kept flags per mesh as a 0/1 string, then the solver statistics.
inline void write_labels(std::ostream& os, const MeshSet& meshes, const MosaicResult& res)
{
    using detail::format_double;
    os << "LABELS " << meshes.size() << '\n';
    for (std::size_t mi = 0; mi < meshes.size(); ++mi) {
        const auto& k = res.kept.mesh(mi);
        os << "MESH " << meshes[mi].id() << ' ' << k.size() << '\n';
        std::string bits(k.size(), '0');
        for (std::size_t t = 0; t < k.size(); ++t) bits[t] = k[t] ? '1' : '0';
        os << (bits.empty() ? "-" : bits) << '\n';
    }
    os << "energy " << format_double(res.energy) << '\n'
       << "lower_bound " << format_double(res.lower_bound) << '\n'
       << "label_ratio " << format_double(res.label_ratio) << '\n'
       << "improve " << (res.used_improve ? 1 : 0) << '\n';
}

inline MosaicResult read_labels(std::istream& in, const MeshSet& meshes, const Classification& records)
{
    detail::TokenReader r(in, "labels");
    detail::check_mesh_count(r, "LABELS", meshes);
    MosaicResult res;
    res.kept = TriangleTable<std::uint8_t>(meshes, 0);
    for (std::size_t mi = 0; mi < meshes.size(); ++mi) {
        detail::check_mesh_header(r, meshes[mi]);
        std::string bits = r.word();
        if (bits == "-") bits.clear();
        auto& k = res.kept.mesh(mi);
        if (bits.size() != k.size()) r.fail("label string length does not match triangle count");
        for (std::size_t t = 0; t < k.size(); ++t) {
            if (bits[t] != '0' && bits[t] != '1') r.fail("labels must be 0 or 1");
            k[t] = bits[t] == '1';
        }
    }
    r.expect("energy");
    res.energy = r.real();
    r.expect("lower_bound");
    res.lower_bound = r.real();
    r.expect("label_ratio");
    res.label_ratio = r.real();
    r.expect("improve");
    res.used_improve = r.integer<int>() != 0;
    detail::finish_result(res, meshes, records);
    return res;
}

// ---------------------------------------------------------------------------
// Stages

struct PipelineInputs {
    std::vector<std::filesystem::path> files; ///< .ply meshes or scan files
};

using LogFn = std::function<void(const std::string&)>;

namespace detail {

/// Re-raises a stage failure with the stage name in front of its message.
template <class F>
auto run_stage(const char* stage, F&& f)
{
    try {
        return f();
    } catch (const Error& e) {
        std::string msg = e.what();
        const std::string code(to_string(e.code()));
        if (msg.rfind(code + ": ", 0) == 0) msg.erase(0, code.size() + 2);
        throw Error(e.code(), std::string(stage) + ": " + msg);
    }
}

inline std::filesystem::path require(const std::filesystem::path& p)
{
    if (!std::filesystem::exists(p))
        throw Error(ErrorCode::MissingUpstreamArtifact, "missing " + p.string() + " (run the previous stage first)");
    return p;
}

inline void write_text(const std::filesystem::path& p, const std::function<void(std::ostream&)>& body)
{
    std::ofstream os(p, std::ios::binary);
    if (!os) throw Error(ErrorCode::Io, "cannot write " + p.string());
    body(os);
    if (!os) throw Error(ErrorCode::Io, "failed writing " + p.string());
}

template <class T>
T read_text(const std::filesystem::path& p, const std::function<T(std::istream&)>& body)
{
    std::ifstream in(require(p), std::ios::binary);
    if (!in) throw Error(ErrorCode::Io, "cannot open " + p.string());
    return body(in);
}

inline std::string mesh_file_name(MeshId id)
{
    char buf[32];
    std::snprintf(buf, sizeof buf, "mesh_%03u.ply", static_cast<unsigned>(id));
    return buf;
}

inline bool is_mesh_file(const std::filesystem::path& p)
{
    std::string ext = p.extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return ext == ".ply";
}

} // namespace detail

/// Meshes every input (scans through sensor topology, .ply files as-is) and
/// canonicalizes the set.
inline MeshSet load_inputs(const PipelineInputs& in, const MeshingParams& params)
{
    if (in.files.empty()) throw Error(ErrorCode::Io, "no inputs given");
    std::vector<SurfaceMesh> meshes;
    for (std::size_t i = 0; i < in.files.size(); ++i) {
        const auto id = static_cast<MeshId>(i);
        if (detail::is_mesh_file(in.files[i])) meshes.push_back(read_mesh(in.files[i], id).with_id(id));
        else meshes.push_back(sensor_topology_mesh(read_scan(in.files[i]), params, id));
    }
    return canonicalize(std::move(meshes));
}

inline void save_meshes(const std::filesystem::path& out, const MeshSet& meshes)
{
    const auto dir = out / artifact::kMeshDir;
    std::filesystem::create_directories(dir);
    for (const auto& e : std::filesystem::directory_iterator(dir))
        if (detail::is_mesh_file(e.path())) std::filesystem::remove(e.path());
    for (const auto& m : meshes) write_mesh(dir / detail::mesh_file_name(m.id()), m);
}

inline MeshSet load_meshes(const std::filesystem::path& out)
{
    const auto dir = detail::require(out / artifact::kMeshDir);
    std::vector<std::filesystem::path> files;
    for (const auto& e : std::filesystem::directory_iterator(dir))
        if (detail::is_mesh_file(e.path())) files.push_back(e.path());
    if (files.empty()) throw Error(ErrorCode::MissingUpstreamArtifact, "no meshes in " + dir.string());
    std::sort(files.begin(), files.end());
    std::vector<SurfaceMesh> meshes;
    for (std::size_t i = 0; i < files.size(); ++i) meshes.push_back(read_mesh(files[i], static_cast<MeshId>(i)));
    return MeshSet(std::move(meshes));
}

inline Classification load_records(const std::filesystem::path& out, const MeshSet& meshes)
{
    return detail::read_text<Classification>(out / artifact::kRecords,
                                             [&](std::istream& in) { return read_records(in, meshes); });
}

inline std::set<TriangleRef> load_sustainable(const std::filesystem::path& out, const MeshSet& meshes)
{
    return detail::read_text<std::set<TriangleRef>>(out / artifact::kSustainable,
                                                    [&](std::istream& in) { return read_sustainable(in, meshes); });
}

inline MosaicResult load_labels(const std::filesystem::path& out, const MeshSet& meshes, const Classification& records)
{
    return detail::read_text<MosaicResult>(out / artifact::kLabels,
                                           [&](std::istream& in) { return read_labels(in, meshes, records); });
}

/// Stage state carried in memory by the full pipeline; each stage function
/// also writes its artifacts so the stages can be run one at a time.
struct PipelineState {
    MeshSet meshes;
    Classification records;
    std::set<TriangleRef> sustainable;
    MosaicResult mosaic;
    std::optional<MosaicResult> baseline;
    StitchedMesh stitched;
};

inline MeshSet stage_mesh(const std::filesystem::path& out, const PipelineInputs& in, const PipelineConfig& cfg)
{
    return detail::run_stage("mesh", [&] {
        MeshSet meshes = load_inputs(in, cfg.scan);
        save_meshes(out, meshes);
        return meshes;
    });
}

inline Classification stage_detect(const std::filesystem::path& out, const MeshSet& meshes, const PipelineConfig& cfg)
{
    return detail::run_stage("detect", [&] {
        Classification c = classify(meshes, cfg.detect);
        detail::write_text(out / artifact::kRecords, [&](std::ostream& os) { write_records(os, meshes, c); });
        export_debug(out / artifact::kDebugDetect, meshes, c);
        return c;
    });
}

inline std::set<TriangleRef> stage_filter(const std::filesystem::path& out, const MeshSet& meshes,
                                          const Classification& records, const PipelineConfig& cfg)
{
    return detail::run_stage("filter", [&] {
        auto s = sustainable_filter(meshes, records, update_time_ranges(meshes, records), cfg.sustain);
        detail::write_text(out / artifact::kSustainable, [&](std::ostream& os) { write_sustainable(os, s); });
        return s;
    });
}

inline std::pair<MosaicResult, std::optional<MosaicResult>> stage_mosaic(const std::filesystem::path& out,
                                                                         const MeshSet& meshes,
                                                                         const Classification& records,
                                                                         const std::set<TriangleRef>& sustainable,
                                                                         const PipelineConfig& cfg)
{
    return detail::run_stage("mosaic", [&] {
        const MosaicProblem prob = build_energy(meshes, sustainable, records, cfg.mosaic);
        MosaicResult res = solve_mosaic(prob, meshes, records, cfg.mosaic);
        std::optional<MosaicResult> base;
        if (cfg.baseline) base = update_model_baseline(prob, meshes, records);
        detail::write_text(out / artifact::kLabels, [&](std::ostream& os) { write_labels(os, meshes, res); });
        detail::write_text(out / artifact::kReport, [&](std::ostream& os) {
            write_mosaic_report(os, meshes, res, base ? &*base : nullptr);
        });
        export_debug(out / artifact::kDebugMosaic, meshes, res);
        return std::pair{std::move(res), std::move(base)};
    });
}

inline StitchedMesh stage_stitch(const std::filesystem::path& out, const MeshSet& meshes, const MosaicResult& mosaic,
                                 const PipelineConfig& cfg)
{
    return detail::run_stage("stitch", [&] {
        StitchedMesh s = stitch_all(mosaic, meshes, cfg.stitch);
        write_mesh(out / artifact::kStitched, s.mesh, {MeshEncoding::Binary, s.seam, {}});
        export_debug(out / artifact::kDebugStitched, s.mesh, s.seam);
        return s;
    });
}

/// Rewrites every debug export from the artifacts present in `out`.
inline void stage_export(const std::filesystem::path& out)
{
    detail::run_stage("export", [&] {
        const MeshSet meshes = load_meshes(out);
        const Classification records = load_records(out, meshes);
        export_debug(out / artifact::kDebugDetect, meshes, records);
        if (std::filesystem::exists(out / artifact::kLabels))
            export_debug(out / artifact::kDebugMosaic, meshes, load_labels(out, meshes, records));
        if (std::filesystem::exists(out / artifact::kStitched)) {
            const MeshFile f = read_mesh_file(out / artifact::kStitched);
            export_debug(out / artifact::kDebugStitched, f.mesh, f.seam);
        }
        return 0;
    });
}

inline PipelineState run_pipeline(const std::filesystem::path& out, const PipelineInputs& in, const PipelineConfig& cfg,
                                  const LogFn& log = {})
{
    cfg.validate();
    std::filesystem::create_directories(out);
    auto note = [&](const std::string& s) {
        if (log) log(s);
    };
    PipelineState st;
    st.meshes = stage_mesh(out, in, cfg);
    note("mesh: " + std::to_string(st.meshes.size()) + " meshes, " + std::to_string(st.meshes.total_triangles()) +
         " triangles");
    st.records = stage_detect(out, st.meshes, cfg);
    note("detect: " + std::to_string(st.records.count(Status::Consistent)) + " consistent, " +
         std::to_string(st.records.count(Status::Conflicting)) + " conflicting, " +
         std::to_string(st.records.count(Status::Single)) + " single");
    for (const auto& w : st.records.warnings) note("warning: " + w);
    st.sustainable = stage_filter(out, st.meshes, st.records, cfg);
    note("filter: " + std::to_string(st.sustainable.size()) + " sustainable triangles");
    std::tie(st.mosaic, st.baseline) = stage_mosaic(out, st.meshes, st.records, st.sustainable, cfg);
    note("mosaic: kept " + std::to_string(st.mosaic.kept_count()) + ", energy " +
         detail::format_double(st.mosaic.energy));
    st.stitched = stage_stitch(out, st.meshes, st.mosaic, cfg);
    note("stitch: " + std::to_string(st.stitched.matches) + " matches, " +
         std::to_string(st.stitched.mesh.triangle_count()) + " triangles");
    return st;
}

} // namespace tessera
