#pragma once

#include <algorithm>
#include <cstdint>
#include <numeric>
#include <ostream>
#include <set>
#include <string>
#include <vector>

#include "tessera/change_detect.hpp"
#include "tessera/detail/codec.hpp"
#include "tessera/mesh.hpp"
#include "tessera/qpbo.hpp"
#include "tessera/sustainability.hpp"

namespace tessera {

enum class QualityMode { Area, Constant };

struct MosaicParams {
    double lambda1 = 10.0;  ///< quality reward (m^-2 in area mode)
    double lambda2 = 1.0;   ///< boundary penalty (m^-1)
    double lambda3 = 1.0e4; ///< overlap penalty
    double lambda4 = 1.0;   ///< seam penalty (m^-1)
    QualityMode quality_mode = QualityMode::Area;
    double scale = 1.0e6; ///< integer scale handed to the solver

    void validate() const
    {
        for (double l : {lambda1, lambda2, lambda3, lambda4})
            if (!(l >= 0.0) || !std::isfinite(l))
                throw Error(ErrorCode::InvariantViolation, "mosaic lambdas must be finite and nonnegative");
        if (!(scale > 0.0)) throw Error(ErrorCode::InvariantViolation, "mosaic.scale must be > 0");
    }
};

/// Energy of the keep/remove problem. Variable v decides triangles[v]
/// (x = 1 keeps it); variables follow ascending global triangle order.
struct MosaicProblem {
    PseudoBooleanFunction function;
    std::vector<TriangleRef> triangles;
    double max_quality = 0.0;
};

struct MeshEdge {
    TriangleRef tri;
    std::uint8_t edge = 0;

    friend constexpr auto operator<=>(const MeshEdge&, const MeshEdge&) = default;
};

struct MosaicResult {
    TriangleTable<std::uint8_t> kept;
    /// Edge-connected groups of kept triangles within one mesh, each sorted,
    /// ordered by their first triangle.
    std::vector<std::vector<TriangleRef>> components;
    /// Edges of kept triangles whose neighbor is absent or not kept.
    std::vector<MeshEdge> seam_edges;
    double total_seam_length = 0.0;

    double energy = 0.0;
    double lower_bound = 0.0;
    double label_ratio = 1.0; ///< fraction labeled by plain QPBO
    bool used_improve = false;
    std::size_t overlaps = 0; ///< kept consistent pairs

    bool is_kept(const TriangleRef& r) const { return kept.at(r) != 0; }
    std::size_t kept_count() const
    {
        std::size_t n = 0;
        for (std::size_t i = 0; i < kept.mesh_count(); ++i)
            n += static_cast<std::size_t>(std::count(kept.mesh(i).begin(), kept.mesh(i).end(), 1));
        return n;
    }
};

inline double triangle_quality(const SurfaceMesh& m, std::uint32_t t, QualityMode mode) noexcept
{
    return mode == QualityMode::Area ? m.area(t) : 1.0;
}

namespace detail {

/// Variable index per triangle, -1 for triangles outside the problem.
inline TriangleTable<std::int32_t> variable_index(const MeshSet& meshes, std::span<const TriangleRef> vars)
{
    TriangleTable<std::int32_t> idx(meshes, -1);
    for (std::size_t v = 0; v < vars.size(); ++v) idx.at(vars[v]) = static_cast<std::int32_t>(v);
    return idx;
}

} // namespace detail

inline MosaicProblem build_energy(const MeshSet& meshes, const std::set<TriangleRef>& sustainable,
                                  const Classification& records, const MosaicParams& params)
{
    params.validate();
    if (sustainable.empty()) throw Error(ErrorCode::EmptyProblem, "no sustainable triangles to optimize");

    MosaicProblem prob;
    prob.triangles.assign(sustainable.begin(), sustainable.end());
    const auto var = detail::variable_index(meshes, prob.triangles);
    prob.function = PseudoBooleanFunction(prob.triangles.size());
    PseudoBooleanFunction& f = prob.function;

    for (std::size_t v = 0; v < prob.triangles.size(); ++v) {
        const TriangleRef r = prob.triangles[v];
        const SurfaceMesh& m = meshes.mesh(r.mesh);
        const double q = triangle_quality(m, r.tri, params.quality_mode);
        prob.max_quality = std::max(prob.max_quality, q);

        // Boundary with respect to the optimized sub-mesh: an edge counts when
        // its neighbor is missing or did not survive the filter.
        double boundary = 0.0;
        const auto& nb = m.adjacency().neighbor[r.tri];
        for (int k = 0; k < 3; ++k) {
            const std::int32_t n = nb[k];
            const std::int32_t nv = n == kNoNeighbor ? -1 : var.at({r.mesh, static_cast<std::uint32_t>(n)});
            if (nv < 0) {
                boundary += m.edge_length(r.tri, k);
            } else if (static_cast<std::size_t>(nv) > v && params.lambda4 > 0.0) {
                const double w = params.lambda4 * m.edge_length(r.tri, k);
                f.add_pairwise(v, static_cast<std::size_t>(nv), 0.0, w, w, 0.0);
            }
        }
        f.add_unary(v, 0.0, -params.lambda1 * q + params.lambda2 * boundary);

        for (const TriangleRef& p : records.at(r).consistent_with) {
            const std::int32_t pv = var.at(p);
            if (pv >= 0 && static_cast<std::size_t>(pv) > v)
                f.add_pairwise(v, static_cast<std::size_t>(pv), 0.0, 0.0, 0.0, params.lambda3);
        }
    }
    if (!(params.lambda3 > params.lambda1 * prob.max_quality))
        throw Error(ErrorCode::InvariantViolation,
                    "mosaic.lambda3 must exceed lambda1 * max quality (" +
                        detail::format_double(params.lambda1 * prob.max_quality) + ")");
    return prob;
}

/// Sum of shared-edge lengths over same-mesh adjacent pairs whose keep
/// labels differ.
inline double seam_length(const TriangleTable<std::uint8_t>& kept, const MeshSet& meshes)
{
    double total = 0.0;
    for (std::size_t mi = 0; mi < meshes.size(); ++mi) {
        const SurfaceMesh& m = meshes[mi];
        const auto& labels = kept.mesh(mi);
        for (std::uint32_t t = 0; t < m.triangle_count(); ++t)
            for (int k = 0; k < 3; ++k) {
                const std::int32_t n = m.adjacency().neighbor[t][k];
                if (n != kNoNeighbor && static_cast<std::uint32_t>(n) > t && labels[t] != labels[n])
                    total += m.edge_length(t, k);
            }
    }
    return total;
}

inline double seam_length(const MosaicResult& result, const MeshSet& meshes) { return seam_length(result.kept, meshes); }

/// Number of kept pairs that are mutually consistent.
inline std::size_t count_overlaps(const TriangleTable<std::uint8_t>& kept, const MeshSet& meshes,
                                  const Classification& records)
{
    std::size_t n = 0;
    for (std::size_t mi = 0; mi < meshes.size(); ++mi) {
        const auto recs = records.mesh_records(mi);
        const MeshId id = meshes[mi].id();
        for (std::uint32_t t = 0; t < meshes[mi].triangle_count(); ++t) {
            if (!kept.mesh(mi)[t]) continue;
            const TriangleRef self{id, t};
            for (const auto& p : recs[t].consistent_with)
                if (self < p && kept.at(p)) ++n;
        }
    }
    return n;
}

namespace detail {

inline void finish_result(MosaicResult& res, const MeshSet& meshes, const Classification& records)
{
    res.components.clear();
    res.seam_edges.clear();
    for (std::size_t mi = 0; mi < meshes.size(); ++mi) {
        const SurfaceMesh& m = meshes[mi];
        const auto& labels = res.kept.mesh(mi);
        const auto& nb = m.adjacency().neighbor;
        std::vector<std::int32_t> comp(m.triangle_count(), -1);
        std::vector<std::uint32_t> stack;
        for (std::uint32_t t = 0; t < m.triangle_count(); ++t) {
            if (!labels[t]) continue;
            for (int k = 0; k < 3; ++k)
                if (nb[t][k] == kNoNeighbor || !labels[nb[t][k]])
                    res.seam_edges.push_back({{m.id(), t}, static_cast<std::uint8_t>(k)});
            if (comp[t] >= 0) continue;
            const auto c = static_cast<std::int32_t>(res.components.size());
            std::vector<TriangleRef> members;
            comp[t] = c;
            stack.push_back(t);
            while (!stack.empty()) {
                const std::uint32_t u = stack.back();
                stack.pop_back();
                members.push_back({m.id(), u});
                for (int k = 0; k < 3; ++k) {
                    const std::int32_t n = nb[u][k];
                    if (n != kNoNeighbor && labels[n] && comp[n] < 0) {
                        comp[n] = c;
                        stack.push_back(static_cast<std::uint32_t>(n));
                    }
                }
            }
            std::sort(members.begin(), members.end());
            res.components.push_back(std::move(members));
        }
    }
    res.total_seam_length = seam_length(res.kept, meshes);
    res.overlaps = count_overlaps(res.kept, meshes, records);
}

inline MosaicResult result_from_labels(const MosaicProblem& prob, std::span<const Label> labels, const MeshSet& meshes,
                                       const Classification& records)
{
    MosaicResult res;
    res.kept = TriangleTable<std::uint8_t>(meshes, 0);
    for (std::size_t v = 0; v < prob.triangles.size(); ++v) res.kept.at(prob.triangles[v]) = labels[v] == Label::One;
    res.energy = evaluate(prob.function, labels);
    finish_result(res, meshes, records);
    return res;
}

/// Greedy selection over the problem's variables in the given order: a
/// triangle is kept unless a consistent partner was kept before it.
inline std::vector<Label> greedy_selection(const MosaicProblem& prob, const MeshSet& meshes,
                                           const Classification& records, std::span<const std::uint32_t> order)
{
    const auto var = variable_index(meshes, prob.triangles);
    std::vector<Label> x(prob.triangles.size(), Label::Zero);
    for (auto v : order) {
        bool blocked = false;
        for (const auto& p : records.at(prob.triangles[v]).consistent_with) {
            const std::int32_t pv = var.at(p);
            if (pv >= 0 && x[pv] == Label::One) {
                blocked = true;
                break;
            }
        }
        if (!blocked) x[v] = Label::One;
    }
    return x;
}

} // namespace detail

/// Initial labeling for the improvement step: newest observations first.
inline std::vector<Label> newest_first_labeling(const MosaicProblem& prob, const MeshSet& meshes,
                                                const Classification& records)
{
    std::vector<std::uint32_t> order(prob.triangles.size());
    std::iota(order.begin(), order.end(), 0u);
    std::stable_sort(order.begin(), order.end(), [&](std::uint32_t a, std::uint32_t b) {
        const auto& ra = prob.triangles[a];
        const auto& rb = prob.triangles[b];
        return meshes.mesh(ra.mesh).attr(ra.tri).t_last > meshes.mesh(rb.mesh).attr(rb.tri).t_last;
    });
    return detail::greedy_selection(prob, meshes, records, order);
}

/// Labeling of the update-model baseline: first observations first.
inline std::vector<Label> oldest_first_labeling(const MosaicProblem& prob, const MeshSet& meshes,
                                                const Classification& records)
{
    std::vector<std::uint32_t> order(prob.triangles.size());
    std::iota(order.begin(), order.end(), 0u);
    std::stable_sort(order.begin(), order.end(), [&](std::uint32_t a, std::uint32_t b) {
        const auto& ra = prob.triangles[a];
        const auto& rb = prob.triangles[b];
        return meshes.mesh(ra.mesh).attr(ra.tri).t_first < meshes.mesh(rb.mesh).attr(rb.tri).t_first;
    });
    return detail::greedy_selection(prob, meshes, records, order);
}

inline MosaicResult solve_mosaic(const MosaicProblem& prob, const MeshSet& meshes, const Classification& records,
                                 const MosaicParams& params)
{
    const QpboOptions opt{params.scale};
    QpboResult q = solve(prob.function, opt);
    std::vector<Label> labels = q.labels;
    const bool incomplete = q.unlabeled_count() > 0;
    if (incomplete) {
        // Start from the cheaper of the two greedy labelings.
        auto initial = newest_first_labeling(prob, meshes, records);
        auto oldest = oldest_first_labeling(prob, meshes, records);
        if (evaluate(prob.function, oldest) < evaluate(prob.function, initial)) initial = std::move(oldest);
        std::vector<std::uint32_t> order(prob.triangles.size());
        std::iota(order.begin(), order.end(), 0u);
        labels = improve(prob.function, initial, order, opt);
    }
    MosaicResult res = detail::result_from_labels(prob, labels, meshes, records);
    res.lower_bound = q.lower_bound;
    res.label_ratio = q.label_ratio();
    res.used_improve = incomplete;
    if (res.overlaps != 0)
        throw Error(ErrorCode::InvariantViolation,
                    std::to_string(res.overlaps) + " kept consistent pairs despite the overlap penalty");
    return res;
}

/// Keeps the first observation of every surface: triangles are visited by
/// (t_first, mesh id, triangle index) and kept unless a consistent partner
/// is already kept.
inline MosaicResult update_model_baseline(const MosaicProblem& prob, const MeshSet& meshes,
                                          const Classification& records)
{
    const auto labels = oldest_first_labeling(prob, meshes, records);
    MosaicResult res = detail::result_from_labels(prob, labels, meshes, records);
    res.lower_bound = res.energy;
    return res;
}

inline void write_mosaic_report(std::ostream& os, const MeshSet& meshes, const MosaicResult& res,
                                const MosaicResult* baseline = nullptr)
{
    using detail::format_double;
    auto block = [&](const char* title, const MosaicResult& r, bool solver_stats) {
        os << "[" << title << "]\n";
        for (std::size_t mi = 0; mi < meshes.size(); ++mi) {
            const auto& labels = r.kept.mesh(mi);
            const auto kept = std::count(labels.begin(), labels.end(), 1);
            os << "mesh " << meshes[mi].id() << " kept " << kept << " removed "
               << static_cast<long long>(labels.size()) - kept << '\n';
        }
        os << "components " << r.components.size() << '\n';
        os << "overlaps " << r.overlaps << '\n';
        os << "seam_length " << format_double(r.total_seam_length) << '\n';
        os << "energy " << format_double(r.energy) << '\n';
        if (solver_stats) {
            os << "lower_bound " << format_double(r.lower_bound) << '\n';
            os << "label_ratio " << format_double(r.label_ratio) << '\n';
            os << "improve " << (r.used_improve ? "yes" : "no") << '\n';
        }
    };
    block("optimized", res, true);
    if (baseline) block("baseline", *baseline, false);
}

} // namespace tessera
