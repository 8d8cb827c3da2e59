#include <cstdint>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "tessera/pipeline.hpp"
#include "tessera/scenegen.hpp"

namespace fs = std::filesystem;
using namespace tessera;

namespace {

enum Exit { kOk = 0, kConfig = 2, kInput = 3, kInvariant = 4 };

int exit_code(ErrorCode c)
{
    switch (c) {
    case ErrorCode::UnknownKey: return kConfig;
    case ErrorCode::InvariantViolation:
    case ErrorCode::IncompleteLabeling:
    case ErrorCode::AllMerged:
    case ErrorCode::EmptyOutput: return kInvariant;
    default: return kInput;
    }
}

struct Globals {
    std::string config;
    std::string out = "tessera_out";
    std::uint64_t seed = 0;
    unsigned workers = 0;
    bool verbose = false;
};

std::string scan_name(std::size_t i, const char* prefix, const char* ext)
{
    char buf[48];
    std::snprintf(buf, sizeof buf, "%s_%03zu%s", prefix, i, ext);
    return buf;
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"tessera: multi-epoch lidar mesh change detection, mosaicking and stitching"};
    app.require_subcommand(1);
    app.fallthrough();

    Globals g;
    app.add_option("--config", g.config, "key = value configuration file");
    app.add_option("--out", g.out, "artifact directory")->capture_default_str();
    app.add_option("--seed", g.seed, "seed for every random choice")->capture_default_str();
    app.add_option("--workers", g.workers, "worker threads (0 = all cores)")->capture_default_str();
    app.add_flag("--verbose", g.verbose, "print stage summaries");

    std::vector<std::string> inputs;
    bool baseline = false;
    std::string script;

    auto* pipeline = app.add_subcommand("pipeline", "run every stage on scans or .ply meshes");
    pipeline->add_option("inputs", inputs, "scan or mesh files")->required();
    pipeline->add_flag("--baseline", baseline, "also report the update-model baseline");
    auto* mesh = app.add_subcommand("mesh", "mesh scans and canonicalize the input set");
    mesh->add_option("inputs", inputs, "scan or mesh files")->required();
    auto* detect = app.add_subcommand("detect", "classify triangles as consistent, conflicting or single");
    auto* filter = app.add_subcommand("filter", "apply the sustainability filter");
    auto* mosaic = app.add_subcommand("mosaic", "select the non-overlapping triangle mosaic");
    mosaic->add_flag("--baseline", baseline, "also report the update-model baseline");
    auto* stitch = app.add_subcommand("stitch", "zipper matched mosaic boundaries");
    auto* exp = app.add_subcommand("export", "rewrite the colored debug meshes");
    auto* scene = app.add_subcommand("scenegen", "ray-cast a scene script into scans and ground truth");
    scene->add_option("script", script, "scene script (JSON)")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? kOk : kConfig;
    }

    PipelineConfig cfg;
    try {
        if (!g.config.empty()) cfg = load_config(g.config);
        cfg.detect.workers = g.workers;
        if (baseline) cfg.baseline = true;
        cfg.validate();
    } catch (const Error& e) {
        std::cerr << "config: " << e.what() << '\n';
        return kConfig;
    }

    const fs::path out = g.out;
    auto log = [&](const std::string& s) {
        if (g.verbose) std::cerr << s << '\n';
    };

    try {
        fs::create_directories(out);
        PipelineInputs in;
        for (const auto& s : inputs) in.files.emplace_back(s);

        if (*pipeline) {
            run_pipeline(out, in, cfg, log);
        } else if (*mesh) {
            const MeshSet m = stage_mesh(out, in, cfg);
            log("mesh: " + std::to_string(m.size()) + " meshes");
        } else if (*detect) {
            const MeshSet m = detail::run_stage("detect", [&] { return load_meshes(out); });
            const Classification c = stage_detect(out, m, cfg);
            for (const auto& w : c.warnings) std::cerr << "warning: " << w << '\n';
        } else if (*filter) {
            const MeshSet m = detail::run_stage("filter", [&] { return load_meshes(out); });
            const Classification c = detail::run_stage("filter", [&] { return load_records(out, m); });
            const auto s = stage_filter(out, m, c, cfg);
            log("filter: " + std::to_string(s.size()) + " sustainable triangles");
        } else if (*mosaic) {
            const MeshSet m = detail::run_stage("mosaic", [&] { return load_meshes(out); });
            const Classification c = detail::run_stage("mosaic", [&] { return load_records(out, m); });
            const auto s = detail::run_stage("mosaic", [&] { return load_sustainable(out, m); });
            const auto r = stage_mosaic(out, m, c, s, cfg);
            log("mosaic: kept " + std::to_string(r.first.kept_count()));
        } else if (*stitch) {
            const MeshSet m = detail::run_stage("stitch", [&] { return load_meshes(out); });
            const Classification c = detail::run_stage("stitch", [&] { return load_records(out, m); });
            const MosaicResult r = detail::run_stage("stitch", [&] { return load_labels(out, m, c); });
            const StitchedMesh s = stage_stitch(out, m, r, cfg);
            log("stitch: " + std::to_string(s.matches) + " matches");
        } else if (*exp) {
            stage_export(out);
        } else if (*scene) {
            detail::run_stage("scenegen", [&] {
                const SceneScript sc = load_scene_script(script);
                const auto epochs = scenegen(sc, g.seed);
                for (std::size_t i = 0; i < epochs.size(); ++i) {
                    write_scan(out / scan_name(i, "scan", ".scan"), epochs[i].scan, ScanEncoding::Binary);
                    detail::write_text(out / scan_name(i, "truth", ".txt"),
                                       [&](std::ostream& os) { write_ground_truth(os, epochs[i].truth); });
                }
                log("scenegen: " + std::to_string(epochs.size()) + " scans");
                return 0;
            });
        }
    } catch (const Error& e) {
        std::cerr << e.what() << '\n';
        return exit_code(e.code());
    } catch (const fs::filesystem_error& e) {
        std::cerr << "Io: " << e.what() << '\n';
        return kInput;
    } catch (const std::exception& e) {
        std::cerr << "internal error: " << e.what() << '\n';
        return kInvariant;
    }
    return kOk;
}
