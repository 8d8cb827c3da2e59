#pragma once

#include <filesystem>
#include <fstream>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>

#include "tessera/change_detect.hpp"
#include "tessera/detail/codec.hpp"
#include "tessera/mosaic.hpp"
#include "tessera/scan.hpp"
#include "tessera/stitcher.hpp"
#include "tessera/sustainability.hpp"

namespace tessera {

struct PipelineConfig {
    DetectParams detect;
    SustainabilityParams sustain;
    MosaicParams mosaic;
    StitchParams stitch{3 * DetectParams{}.eps_dist, 0.03};
    MeshingParams scan;
    bool baseline = false; ///< also report the update-model baseline

    void validate() const
    {
        detect.validate();
        sustain.validate();
        mosaic.validate();
        stitch.validate();
        scan.validate();
    }
};

inline const char* to_string(SustainMode m) noexcept
{
    switch (m) {
    case SustainMode::Auto: return "auto";
    case SustainMode::Full: return "full";
    case SustainMode::TwoEpoch: return "two_epoch";
    }
    return "auto";
}

inline const char* to_string(QualityMode m) noexcept { return m == QualityMode::Area ? "area" : "constant"; }

/// Parses `key = value` lines; `#` starts a comment. Absent keys keep their
/// defaults, and stitch.delta_match follows 3 * detect.eps_dist unless set.
inline PipelineConfig parse_config(std::istream& in)
{
    PipelineConfig cfg;
    std::optional<double> delta_match;
    std::map<std::string, int> seen;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        const auto body = detail::trim(line);
        if (body.empty()) continue;
        const auto eq = body.find('=');
        const std::string where = "line " + std::to_string(lineno) + ": ";
        if (eq == std::string_view::npos)
            throw Error(ErrorCode::InvariantViolation, where + "expected 'key = value'");
        const std::string key(detail::trim(body.substr(0, eq)));
        const std::string value(detail::trim(body.substr(eq + 1)));
        if (seen[key]++) throw Error(ErrorCode::InvariantViolation, where + "duplicate key '" + key + "'");

        auto num = [&]() {
            auto v = detail::parse_double(value);
            if (!v || !std::isfinite(*v)) throw Error(ErrorCode::InvariantViolation, where + key + " expects a number");
            return *v;
        };
        if (key == "detect.eps_dist") cfg.detect.eps_dist = num();
        else if (key == "detect.eps_shrink") cfg.detect.eps_shrink = num();
        else if (key == "detect.min_overlap") cfg.detect.min_overlap = num();
        else if (key == "detect.max_normal_angle") cfg.detect.max_normal_angle = num();
        else if (key == "detect.grazing_angle") cfg.detect.grazing_angle = num();
        else if (key == "sustain.t_s") cfg.sustain.t_s = num();
        else if (key == "sustain.mode") {
            if (value == "auto") cfg.sustain.mode = SustainMode::Auto;
            else if (value == "full") cfg.sustain.mode = SustainMode::Full;
            else if (value == "two_epoch") cfg.sustain.mode = SustainMode::TwoEpoch;
            else throw Error(ErrorCode::InvariantViolation, where + "sustain.mode must be auto, full or two_epoch");
        }
        else if (key == "mosaic.lambda1") cfg.mosaic.lambda1 = num();
        else if (key == "mosaic.lambda2") cfg.mosaic.lambda2 = num();
        else if (key == "mosaic.lambda3") cfg.mosaic.lambda3 = num();
        else if (key == "mosaic.lambda4") cfg.mosaic.lambda4 = num();
        else if (key == "mosaic.scale") cfg.mosaic.scale = num();
        else if (key == "mosaic.quality_mode") {
            if (value == "area") cfg.mosaic.quality_mode = QualityMode::Area;
            else if (value == "constant") cfg.mosaic.quality_mode = QualityMode::Constant;
            else throw Error(ErrorCode::InvariantViolation, where + "mosaic.quality_mode must be area or constant");
        }
        else if (key == "mosaic.baseline") {
            if (value == "true") cfg.baseline = true;
            else if (value == "false") cfg.baseline = false;
            else throw Error(ErrorCode::InvariantViolation, where + "mosaic.baseline must be true or false");
        }
        else if (key == "stitch.delta_match") delta_match = num();
        else if (key == "stitch.delta_merge") cfg.stitch.delta_merge = num();
        else if (key == "scan.max_edge") cfg.scan.max_edge = num();
        else if (key == "scan.max_ratio") cfg.scan.max_ratio = num();
        else throw Error(ErrorCode::UnknownKey, where + "unknown key '" + key + "'");
    }
    cfg.stitch.delta_match = delta_match.value_or(3.0 * cfg.detect.eps_dist);
    cfg.validate();
    return cfg;
}

inline PipelineConfig load_config(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::Io, "cannot open config " + path.string());
    return parse_config(in);
}

inline void write_config(std::ostream& os, const PipelineConfig& c)
{
    using detail::format_double;
    os << "detect.eps_dist = " << format_double(c.detect.eps_dist) << '\n'
       << "detect.eps_shrink = " << format_double(c.detect.eps_shrink) << '\n'
       << "detect.min_overlap = " << format_double(c.detect.min_overlap) << '\n'
       << "detect.max_normal_angle = " << format_double(c.detect.max_normal_angle) << '\n'
       << "detect.grazing_angle = " << format_double(c.detect.grazing_angle) << '\n'
       << "sustain.t_s = " << format_double(c.sustain.t_s) << '\n'
       << "sustain.mode = " << to_string(c.sustain.mode) << '\n'
       << "mosaic.lambda1 = " << format_double(c.mosaic.lambda1) << '\n'
       << "mosaic.lambda2 = " << format_double(c.mosaic.lambda2) << '\n'
       << "mosaic.lambda3 = " << format_double(c.mosaic.lambda3) << '\n'
       << "mosaic.lambda4 = " << format_double(c.mosaic.lambda4) << '\n'
       << "mosaic.scale = " << format_double(c.mosaic.scale) << '\n'
       << "mosaic.quality_mode = " << to_string(c.mosaic.quality_mode) << '\n'
       << "mosaic.baseline = " << (c.baseline ? "true" : "false") << '\n'
       << "stitch.delta_match = " << format_double(c.stitch.delta_match) << '\n'
       << "stitch.delta_merge = " << format_double(c.stitch.delta_merge) << '\n'
       << "scan.max_edge = " << format_double(c.scan.max_edge) << '\n'
       << "scan.max_ratio = " << format_double(c.scan.max_ratio) << '\n';
}

} // namespace tessera
