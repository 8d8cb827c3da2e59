#pragma once

#include <algorithm>
#include <set>
#include <vector>

#include "tessera/change_detect.hpp"
#include "tessera/mesh.hpp"

namespace tessera {

inline constexpr double kSecondsPerDay = 86400.0;

enum class SustainMode {
    Auto,     ///< two-epoch fallback when at most two distinct epochs exist, full otherwise
    Full,     ///< time-series analysis; Single triangles are dropped
    TwoEpoch, ///< only conflicting triangles are dropped
};

struct SustainabilityParams {
    double t_s = 7.0 * kSecondsPerDay; ///< sustainability threshold (s)
    SustainMode mode = SustainMode::Auto;

    void validate() const
    {
        if (!(t_s > 0.0)) throw Error(ErrorCode::InvariantViolation, "sustain.t_s must be > 0");
    }
};

struct TimeRange {
    double t_first = 0.0;
    double t_last = 0.0;

    double span() const noexcept { return t_last - t_first; }
    friend bool operator==(const TimeRange&, const TimeRange&) = default;
};

/// Dense per-triangle table aligned with a MeshSet.
template <class T>
class TriangleTable {
public:
    TriangleTable() = default;
    TriangleTable(const MeshSet& meshes, T init = T{})
    {
        for (const auto& m : meshes) {
            ids_.push_back(m.id());
            values_.emplace_back(m.triangle_count(), init);
        }
    }

    const T& at(const TriangleRef& r) const { return values_[pos(r.mesh)].at(r.tri); }
    T& at(const TriangleRef& r) { return values_[pos(r.mesh)].at(r.tri); }
    std::vector<T>& mesh(std::size_t mesh_pos) noexcept { return values_[mesh_pos]; }
    const std::vector<T>& mesh(std::size_t mesh_pos) const noexcept { return values_[mesh_pos]; }
    std::size_t mesh_count() const noexcept { return values_.size(); }

    friend bool operator==(const TriangleTable&, const TriangleTable&) = default;

private:
    std::size_t pos(MeshId id) const
    {
        auto it = std::lower_bound(ids_.begin(), ids_.end(), id);
        if (it == ids_.end() || *it != id) throw Error(ErrorCode::InvalidMesh, "unknown mesh id " + std::to_string(id));
        return static_cast<std::size_t>(it - ids_.begin());
    }

    std::vector<MeshId> ids_;
    std::vector<std::vector<T>> values_;
};

/// Observation range of every triangle widened by its direct consistent
/// partners (one pass, not transitive).
inline TriangleTable<TimeRange> update_time_ranges(const MeshSet& meshes, const Classification& records)
{
    TriangleTable<TimeRange> ranges(meshes);
    for (std::size_t mi = 0; mi < meshes.size(); ++mi) {
        const SurfaceMesh& m = meshes[mi];
        const auto recs = records.mesh_records(mi);
        for (std::uint32_t t = 0; t < m.triangle_count(); ++t) {
            TimeRange r{m.attr(t).t_first, m.attr(t).t_last};
            for (const auto& p : recs[t].consistent_with) {
                const TriangleAttr& a = meshes.mesh(p.mesh).attr(p.tri);
                r.t_first = std::min(r.t_first, a.t_first);
                r.t_last = std::max(r.t_last, a.t_last);
            }
            ranges.mesh(mi)[t] = r;
        }
    }
    return ranges;
}

/// Number of distinct acquisition epochs: meshes whose [earliest, latest]
/// time intervals overlap are the same epoch.
inline std::size_t distinct_epochs(const MeshSet& meshes)
{
    std::vector<std::pair<double, double>> spans;
    for (const auto& m : meshes)
        if (m.triangle_count() > 0) spans.emplace_back(m.earliest_time(), m.latest_time());
    std::sort(spans.begin(), spans.end());
    std::size_t epochs = 0;
    double reach = -std::numeric_limits<double>::infinity();
    for (const auto& [lo, hi] : spans) {
        if (epochs == 0 || lo > reach) ++epochs;
        reach = std::max(reach, hi);
    }
    return epochs;
}

inline SustainMode effective_mode(const MeshSet& meshes, const SustainabilityParams& params)
{
    if (params.mode != SustainMode::Auto) return params.mode;
    return distinct_epochs(meshes) <= 2 ? SustainMode::TwoEpoch : SustainMode::Full;
}

/// Triangles that pass the time-series filter.
inline std::set<TriangleRef> sustainable_filter(const MeshSet& meshes, const Classification& records,
                                                const TriangleTable<TimeRange>& ranges,
                                                const SustainabilityParams& params)
{
    params.validate();
    const SustainMode mode = effective_mode(meshes, params);
    std::set<TriangleRef> kept;
    for (std::size_t mi = 0; mi < meshes.size(); ++mi) {
        const SurfaceMesh& m = meshes[mi];
        const auto recs = records.mesh_records(mi);
        for (std::uint32_t t = 0; t < m.triangle_count(); ++t) {
            const ConsistencyRecord& rec = recs[t];
            const TimeRange& range = ranges.mesh(mi)[t];
            const bool newer_conflict = std::any_of(rec.conflicting_with.begin(), rec.conflicting_with.end(),
                                                    [&](const ConflictEntry& c) { return c.t_last > range.t_last; });
            bool keep = false;
            switch (rec.status) {
            case Status::Conflicting: keep = false; break;
            case Status::Consistent:
                keep = !newer_conflict && (mode == SustainMode::TwoEpoch || range.span() >= params.t_s);
                break;
            case Status::Single: keep = mode == SustainMode::TwoEpoch; break;
            }
            if (keep) kept.insert({m.id(), t});
        }
    }
    return kept;
}

} // namespace tessera
