#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <numeric>
#include <set>
#include <unordered_map>
#include <vector>

#include "tessera/geometry.hpp"
#include "tessera/mesh.hpp"
#include "tessera/mosaic.hpp"

namespace tessera {

struct StitchParams {
    double delta_match = 0.30; ///< max gap between matchable boundaries (m)
    double delta_merge = 0.03; ///< vertex merge radius (m)

    void validate() const
    {
        if (!(delta_merge > 0.0 && delta_merge < delta_match))
            throw Error(ErrorCode::InvariantViolation, "stitch params must satisfy 0 < delta_merge < delta_match");
    }
};

/// Boundary loop or path of one kept component. edges[k] joins vertices[k]
/// and vertices[(k + 1) % size]; an open chain has one edge fewer than
/// vertices.
struct BoundaryChain {
    MeshId mesh = 0;
    std::uint32_t component = 0;
    std::size_t component_size = 0;
    bool closed = false;
    std::vector<std::uint32_t> vertices;
    std::vector<MeshEdge> edges;
};

inline std::vector<BoundaryChain> extract_boundaries(const MosaicResult& result, const MeshSet& meshes)
{
    std::vector<BoundaryChain> chains;
    for (std::uint32_t c = 0; c < result.components.size(); ++c) {
        const auto& comp = result.components[c];
        if (comp.empty()) continue;
        const SurfaceMesh& m = meshes.mesh(comp.front().mesh);

        std::vector<MeshEdge> edges;
        for (const auto& r : comp)
            for (int k = 0; k < 3; ++k) {
                const std::int32_t n = m.adjacency().neighbor[r.tri][k];
                if (n == kNoNeighbor || !result.is_kept({r.mesh, static_cast<std::uint32_t>(n)}))
                    edges.push_back({r, static_cast<std::uint8_t>(k)});
            }
        std::map<std::uint32_t, std::vector<std::uint32_t>> incident;
        auto ends = [&](const MeshEdge& e) { return edge_vertices(m.face(e.tri.tri), e.edge); };
        for (std::uint32_t e = 0; e < edges.size(); ++e) {
            const auto [a, b] = ends(edges[e]);
            incident[a].push_back(e);
            incident[b].push_back(e);
        }
        std::vector<char> used(edges.size(), 0);

        auto walk = [&](std::uint32_t start, bool stop_at_start) {
            BoundaryChain ch;
            ch.mesh = m.id();
            ch.component = c;
            ch.component_size = comp.size();
            ch.vertices.push_back(start);
            std::uint32_t cur = start;
            for (;;) {
                std::uint32_t next_edge = 0;
                bool found = false;
                for (auto e : incident[cur])
                    if (!used[e]) {
                        next_edge = e;
                        found = true;
                        break;
                    }
                if (!found) break;
                used[next_edge] = 1;
                const auto [a, b] = ends(edges[next_edge]);
                cur = a == cur ? b : a;
                ch.edges.push_back(edges[next_edge]);
                if (stop_at_start && cur == start) {
                    ch.closed = true;
                    break;
                }
                ch.vertices.push_back(cur);
            }
            chains.push_back(std::move(ch));
        };

        for (const auto& [v, inc] : incident)
            if (inc.size() % 2 == 1)
                while (std::any_of(inc.begin(), inc.end(), [&](std::uint32_t e) { return !used[e]; })) walk(v, false);
        for (std::uint32_t e = 0; e < edges.size(); ++e)
            if (!used[e]) walk(ends(edges[e]).first, true);
    }
    return chains;
}

/// Two matched sub-chains. Indices are positions in the chains' vertex
/// lists, in stitching order (b already canonicalized against a). When
/// both segments cover their whole closed chain, `cyclic` is set and each
/// list repeats its first position at the end.
struct SegmentMatch {
    std::uint32_t chain_a = 0;
    std::uint32_t chain_b = 0;
    std::vector<std::uint32_t> a;
    std::vector<std::uint32_t> b;
    bool cyclic = false;
    double mean_gap = 0.0;
};

namespace detail {

struct Run {
    std::uint32_t start = 0;
    std::uint32_t len = 0;
    bool full = false;

    bool contains(std::uint32_t i, std::uint32_t n) const noexcept { return (i + n - start) % n < len; }
    std::uint32_t at(std::uint32_t k, std::uint32_t n) const noexcept { return (start + k) % n; }
    friend bool operator==(const Run&, const Run&) = default;
};

/// Maximal runs of set flags; wraps around on closed chains.
inline std::vector<Run> flag_runs(const std::vector<char>& flags, bool closed)
{
    const auto n = static_cast<std::uint32_t>(flags.size());
    std::vector<Run> runs;
    if (n == 0) return runs;
    if (std::all_of(flags.begin(), flags.end(), [](char f) { return f != 0; })) {
        runs.push_back({0, n, closed});
        return runs;
    }
    std::uint32_t origin = 0;
    if (closed)
        while (flags[origin]) ++origin; // start right after a gap
    for (std::uint32_t k = 0; k < n;) {
        const std::uint32_t i = (origin + k) % n;
        if (!flags[i]) {
            ++k;
            continue;
        }
        Run r{i, 0, false};
        while (k < n && flags[(origin + k) % n]) {
            ++r.len;
            ++k;
        }
        runs.push_back(r);
    }
    return runs;
}

/// Longest sub-run of `r` whose members satisfy `ok` (first one on ties).
template <class Pred>
Run longest_subrun(const Run& r, std::uint32_t n, Pred ok)
{
    Run best{r.start, 0, false}, cur{r.start, 0, false};
    for (std::uint32_t k = 0; k < r.len; ++k) {
        const std::uint32_t i = r.at(k, n);
        if (ok(i)) {
            if (cur.len == 0) cur.start = i;
            ++cur.len;
            if (cur.len > best.len) best = cur;
        } else {
            cur.len = 0;
        }
    }
    best.full = r.full && best.len == r.len;
    return best;
}

inline Vec3 chain_pos(const SurfaceMesh& m, const BoundaryChain& c, std::uint32_t i) { return m.vertices()[c.vertices[i]]; }

} // namespace detail

inline std::vector<SegmentMatch> match_boundaries(const std::vector<BoundaryChain>& chains, const MeshSet& meshes,
                                                  const StitchParams& params)
{
    params.validate();
    const double dm = params.delta_match;
    std::vector<SegmentMatch> out;
    if (chains.size() < 2) return out;

    // Uniform grid over all chain vertices.
    struct Item {
        std::uint32_t chain, pos;
    };
    auto cell_of = [&](const Vec3& p) {
        return std::array<std::int64_t, 3>{static_cast<std::int64_t>(std::floor(p.x / dm)),
                                           static_cast<std::int64_t>(std::floor(p.y / dm)),
                                           static_cast<std::int64_t>(std::floor(p.z / dm))};
    };
    auto key = [](std::int64_t x, std::int64_t y, std::int64_t z) {
        return static_cast<std::uint64_t>(x * 73856093) ^ static_cast<std::uint64_t>(y * 19349663) ^
               static_cast<std::uint64_t>(z * 83492791);
    };
    std::unordered_map<std::uint64_t, std::vector<Item>> grid;
    for (std::uint32_t c = 0; c < chains.size(); ++c) {
        const SurfaceMesh& m = meshes.mesh(chains[c].mesh);
        for (std::uint32_t i = 0; i < chains[c].vertices.size(); ++i) {
            const auto cc = cell_of(detail::chain_pos(m, chains[c], i));
            grid[key(cc[0], cc[1], cc[2])].push_back({c, i});
        }
    }

    // Near vertex pairs per (chain, chain) of different components.
    struct Near {
        std::uint32_t i, j;
    };
    std::map<std::pair<std::uint32_t, std::uint32_t>, std::vector<Near>> near;
    auto same_component = [&](std::uint32_t a, std::uint32_t b) {
        return chains[a].mesh == chains[b].mesh && chains[a].component == chains[b].component;
    };
    for (std::uint32_t c = 0; c < chains.size(); ++c) {
        const SurfaceMesh& m = meshes.mesh(chains[c].mesh);
        for (std::uint32_t i = 0; i < chains[c].vertices.size(); ++i) {
            const Vec3 p = detail::chain_pos(m, chains[c], i);
            const auto cc = cell_of(p);
            for (std::int64_t dx = -1; dx <= 1; ++dx)
                for (std::int64_t dy = -1; dy <= 1; ++dy)
                    for (std::int64_t dz = -1; dz <= 1; ++dz) {
                        auto it = grid.find(key(cc[0] + dx, cc[1] + dy, cc[2] + dz));
                        if (it == grid.end()) continue;
                        for (const Item& o : it->second) {
                            if (o.chain <= c || same_component(c, o.chain)) continue;
                            const Vec3 q = detail::chain_pos(meshes.mesh(chains[o.chain].mesh), chains[o.chain], o.pos);
                            if (distance(p, q) <= dm) near[{c, o.chain}].push_back({i, o.pos});
                        }
                    }
        }
    }

    std::vector<SegmentMatch> candidates;
    for (auto& [pair, list] : near) {
        auto [ca, cb] = pair;
        const auto rank = [&](std::uint32_t c) {
            return std::pair{-static_cast<long long>(chains[c].component_size),
                             std::pair{chains[c].mesh, chains[c].component}};
        };
        const bool swap_roles = rank(cb) < rank(ca);
        if (swap_roles) {
            std::swap(ca, cb);
            for (auto& nr : list) std::swap(nr.i, nr.j);
        }
        const BoundaryChain& A = chains[ca];
        const BoundaryChain& B = chains[cb];
        const SurfaceMesh& ma = meshes.mesh(A.mesh);
        const SurfaceMesh& mb = meshes.mesh(B.mesh);
        const auto na = static_cast<std::uint32_t>(A.vertices.size());
        const auto nb = static_cast<std::uint32_t>(B.vertices.size());
        std::vector<std::vector<std::uint32_t>> link_a(na), link_b(nb);
        for (const auto& nr : list) {
            link_a[nr.i].push_back(nr.j);
            link_b[nr.j].push_back(nr.i);
        }
        std::vector<char> fa(na), fb(nb);
        for (std::uint32_t i = 0; i < na; ++i) fa[i] = !link_a[i].empty();
        for (std::uint32_t j = 0; j < nb; ++j) fb[j] = !link_b[j].empty();
        const auto runs_a = detail::flag_runs(fa, A.closed);
        const auto runs_b = detail::flag_runs(fb, B.closed);

        std::set<std::pair<std::pair<std::uint32_t, std::uint32_t>, std::pair<std::uint32_t, std::uint32_t>>> seen;
        for (const auto& ra0 : runs_a)
            for (const auto& rb0 : runs_b) {
                detail::Run ra = ra0, rb = rb0;
                for (int iter = 0; iter < 16; ++iter) {
                    const detail::Run pa = ra, pb = rb;
                    ra = detail::longest_subrun(ra, na, [&](std::uint32_t i) {
                        return std::any_of(link_a[i].begin(), link_a[i].end(),
                                           [&](std::uint32_t j) { return rb.len > 0 && rb.contains(j, nb); });
                    });
                    rb = detail::longest_subrun(rb, nb, [&](std::uint32_t j) {
                        return std::any_of(link_b[j].begin(), link_b[j].end(),
                                           [&](std::uint32_t i) { return ra.len > 0 && ra.contains(i, na); });
                    });
                    if (ra == pa && rb == pb) break;
                }
                if (ra.len == 0 || rb.len == 0 || (ra.len < 2 && rb.len < 2)) continue;
                // Mutual proximity must hold after trimming.
                bool mutual = true;
                for (std::uint32_t k = 0; k < ra.len && mutual; ++k) {
                    const auto i = ra.at(k, na);
                    mutual = std::any_of(link_a[i].begin(), link_a[i].end(), [&](std::uint32_t j) { return rb.contains(j, nb); });
                }
                for (std::uint32_t k = 0; k < rb.len && mutual; ++k) {
                    const auto j = rb.at(k, nb);
                    mutual = std::any_of(link_b[j].begin(), link_b[j].end(), [&](std::uint32_t i) { return ra.contains(i, na); });
                }
                if (!mutual || !seen.insert({{ra.start, ra.len}, {rb.start, rb.len}}).second) continue;

                SegmentMatch sm;
                sm.chain_a = ca;
                sm.chain_b = cb;
                sm.cyclic = ra.full && rb.full;
                for (std::uint32_t k = 0; k < ra.len; ++k) sm.a.push_back(ra.at(k, na));
                for (std::uint32_t k = 0; k < rb.len; ++k) sm.b.push_back(rb.at(k, nb));
                auto pa = [&](std::uint32_t i) { return detail::chain_pos(ma, A, i); };
                auto pb = [&](std::uint32_t j) { return detail::chain_pos(mb, B, j); };
                auto nearest_a = [&](const Vec3& p) {
                    std::size_t best = 0;
                    for (std::size_t k = 1; k < sm.a.size(); ++k)
                        if (distance(pa(sm.a[k]), p) < distance(pa(sm.a[best]), p)) best = k;
                    return best;
                };
                if (sm.cyclic) {
                    std::size_t best = 0;
                    for (std::size_t k = 1; k < sm.b.size(); ++k)
                        if (distance(pb(sm.b[k]), pa(sm.a[0])) < distance(pb(sm.b[best]), pa(sm.a[0]))) best = k;
                    std::rotate(sm.b.begin(), sm.b.begin() + static_cast<std::ptrdiff_t>(best), sm.b.end());
                }
                // Chains are undirected: orient b along a.
                if (sm.b.size() >= 2 && sm.a.size() >= 2) {
                    double agreement = 0.0;
                    for (std::size_t k = 0; k + 1 < sm.b.size(); ++k) {
                        const Vec3 tb = pb(sm.b[k + 1]) - pb(sm.b[k]);
                        const std::size_t i = std::min(nearest_a(pb(sm.b[k])), sm.a.size() - 2);
                        agreement += dot(tb, pa(sm.a[i + 1]) - pa(sm.a[i]));
                    }
                    if (agreement < 0.0) {
                        if (sm.cyclic)
                            std::reverse(sm.b.begin() + 1, sm.b.end());
                        else
                            std::reverse(sm.b.begin(), sm.b.end());
                    }
                }
                if (!sm.cyclic && sm.a.size() >= 2 && sm.b.size() >= 2) {
                    const Vec3 ta = pa(sm.a.back()) - pa(sm.a.front());
                    const Vec3 tb = pb(sm.b.back()) - pb(sm.b.front());
                    const double la = norm(ta), lb = norm(tb);
                    if (la > 1e-9 && lb > 1e-9 && dot(ta, tb) / (la * lb) < 0.5) continue;
                }
                double gap = 0.0;
                for (auto i : sm.a) {
                    double best = std::numeric_limits<double>::infinity();
                    for (auto j : sm.b) best = std::min(best, distance(pa(i), pb(j)));
                    gap += best;
                }
                for (auto j : sm.b) {
                    double best = std::numeric_limits<double>::infinity();
                    for (auto i : sm.a) best = std::min(best, distance(pa(i), pb(j)));
                    gap += best;
                }
                sm.mean_gap = gap / static_cast<double>(sm.a.size() + sm.b.size());
                if (sm.cyclic) {
                    sm.a.push_back(sm.a.front());
                    sm.b.push_back(sm.b.front());
                }
                candidates.push_back(std::move(sm));
            }
    }

    std::sort(candidates.begin(), candidates.end(), [](const SegmentMatch& x, const SegmentMatch& y) {
        if (x.mean_gap != y.mean_gap) return x.mean_gap < y.mean_gap;
        return std::tie(x.chain_a, x.a, x.chain_b, x.b) < std::tie(y.chain_a, y.a, y.chain_b, y.b);
    });
    std::set<std::pair<MeshId, std::uint32_t>> used;
    for (auto& sm : candidates) {
        std::set<std::pair<MeshId, std::uint32_t>> verts;
        for (auto i : sm.a) verts.insert({chains[sm.chain_a].mesh, chains[sm.chain_a].vertices[i]});
        for (auto j : sm.b) verts.insert({chains[sm.chain_b].mesh, chains[sm.chain_b].vertices[j]});
        if (std::any_of(verts.begin(), verts.end(), [&](const auto& v) { return used.count(v) != 0; })) continue;
        used.insert(verts.begin(), verts.end());
        out.push_back(std::move(sm));
    }
    return out;
}

// ---------------------------------------------------------------------------
// Zippering of one matched pair.

/// Vertex handles: i < m addresses a[i], m + j addresses b[j].
struct StripPiece {
    std::uint32_t a_begin = 0, a_end = 0; ///< inclusive range in a
    std::uint32_t b_begin = 0, b_end = 0; ///< inclusive range in b
    bool merged_start = false, merged_end = false;
    std::size_t m_prime = 0, n_prime = 0;
    std::vector<std::array<std::uint32_t, 3>> triangles;
    /// Zipper state (i, j) at which each triangle was emitted.
    std::vector<std::pair<std::uint32_t, std::uint32_t>> state;
};

enum class SkipReason { None, Degenerate, BoundaryGrowth, Collapsed };

struct PairStitch {
    std::vector<std::pair<std::uint32_t, std::uint32_t>> merges; ///< (j, i): b[j] snapped onto a[i]
    std::vector<StripPiece> pieces;
    std::vector<std::pair<StripPiece, SkipReason>> skipped;
    bool all_merged = false; ///< every b vertex merged and no strip needed
};

using MergeFilter = std::function<bool(std::uint32_t j, std::uint32_t i)>;

inline PairStitch stitch_pair(std::span<const Vec3> a, std::span<const Vec3> b, const StitchParams& params,
                              bool cyclic = false, const MergeFilter& can_merge = {})
{
    params.validate();
    const auto m = static_cast<std::uint32_t>(a.size());
    const auto n = static_cast<std::uint32_t>(b.size());
    PairStitch out;
    if (m == 0 || n == 0 || (m < 2 && n < 2)) return out;

    // Monotone merge anchors.
    const std::uint32_t last_a = cyclic ? m - 1 : m;
    const std::uint32_t last_b = cyclic ? n - 1 : n;
    std::vector<std::int64_t> anchor_of_b(n, -1);
    std::int64_t prev_i = -1;
    for (std::uint32_t j = 0; j < last_b; ++j) {
        std::uint32_t best = 0;
        for (std::uint32_t i = 1; i < last_a; ++i)
            if (distance(a[i], b[j]) < distance(a[best], b[j])) best = i;
        if (!(distance(a[best], b[j]) < params.delta_merge) || static_cast<std::int64_t>(best) <= prev_i) continue;
        if (cyclic && j == 0 && best != 0) continue;
        if (can_merge && !can_merge(j, best)) continue;
        anchor_of_b[j] = best;
        prev_i = best;
        out.merges.emplace_back(j, best);
    }
    if (cyclic && anchor_of_b[0] == 0) anchor_of_b[n - 1] = m - 1;

    auto aid = [&](std::uint32_t i) { return cyclic && i == m - 1 ? 0u : i; };
    auto bid = [&](std::uint32_t j) -> std::uint32_t {
        if (anchor_of_b[j] >= 0) return aid(static_cast<std::uint32_t>(anchor_of_b[j]));
        if (cyclic && j == n - 1) return anchor_of_b[0] >= 0 ? 0u : m;
        return m + j;
    };
    std::vector<Vec3> bs(b.begin(), b.end());
    for (std::uint32_t j = 0; j < n; ++j)
        if (anchor_of_b[j] >= 0) bs[j] = a[anchor_of_b[j]];

    std::vector<std::pair<std::uint32_t, std::uint32_t>> cuts;
    for (std::uint32_t j = 0; j < n; ++j)
        if (anchor_of_b[j] >= 0) cuts.emplace_back(static_cast<std::uint32_t>(anchor_of_b[j]), j);
    if (cuts.empty() || cuts.front() != std::pair<std::uint32_t, std::uint32_t>{0, 0}) cuts.insert(cuts.begin(), {0, 0});
    if (cuts.back() != std::pair<std::uint32_t, std::uint32_t>{m - 1, n - 1}) cuts.emplace_back(m - 1, n - 1);

    auto is_anchor = [&](std::uint32_t i, std::uint32_t j) {
        return anchor_of_b[j] >= 0 && static_cast<std::uint32_t>(anchor_of_b[j]) == i;
    };
    for (std::size_t c = 0; c + 1 < cuts.size(); ++c) {
        StripPiece piece;
        piece.a_begin = cuts[c].first;
        piece.b_begin = cuts[c].second;
        piece.a_end = cuts[c + 1].first;
        piece.b_end = cuts[c + 1].second;
        piece.merged_start = is_anchor(piece.a_begin, piece.b_begin);
        piece.merged_end = is_anchor(piece.a_end, piece.b_end);
        const std::uint32_t p = piece.a_end - piece.a_begin + 1;
        const std::uint32_t q = piece.b_end - piece.b_begin + 1;
        piece.m_prime = p;
        piece.n_prime = q - piece.merged_start - piece.merged_end;
        if (p + q <= 2) continue;

        // Greedy zipper: advance along the side giving the shorter cross edge.
        std::uint32_t i = piece.a_begin, j = piece.b_begin;
        bool degenerate = false;
        while (i < piece.a_end || j < piece.b_end) {
            const bool adv_a = j == piece.b_end ||
                               (i < piece.a_end && distance(a[i + 1], bs[j]) <= distance(a[i], bs[j + 1]));
            std::array<std::uint32_t, 3> tri{aid(i), bid(j), adv_a ? aid(i + 1) : bid(j + 1)};
            const Triangle geo{a[i], bs[j], adv_a ? a[i + 1] : bs[j + 1]};
            const auto state = std::pair{i, j};
            if (adv_a)
                ++i;
            else
                ++j;
            if (tri[0] == tri[1] || tri[1] == tri[2] || tri[0] == tri[2]) continue;
            if (area(geo) <= 1e-12) degenerate = true;
            piece.triangles.push_back(tri);
            piece.state.push_back(state);
        }

        // A lone edge ending in an anchor is not a stitch.
        if (piece.triangles.empty() && !(piece.merged_start && piece.merged_end)) continue;

        double removed = 0.0, added = 0.0;
        for (std::uint32_t k = piece.a_begin; k < piece.a_end; ++k) removed += distance(a[k], a[k + 1]);
        for (std::uint32_t k = piece.b_begin; k < piece.b_end; ++k) removed += distance(bs[k], bs[k + 1]);
        const bool wrap_start = cyclic && piece.a_begin == 0 && piece.b_begin == 0;
        const bool wrap_end = cyclic && piece.a_end == m - 1 && piece.b_end == n - 1;
        if (!piece.merged_start && !wrap_start) added += distance(a[piece.a_begin], bs[piece.b_begin]);
        if (!piece.merged_end && !wrap_end) added += distance(a[piece.a_end], bs[piece.b_end]);

        SkipReason why = SkipReason::None;
        if (piece.triangles.size() != piece.m_prime + piece.n_prime - 2)
            why = SkipReason::Collapsed;
        else if (degenerate)
            why = SkipReason::Degenerate;
        else if (added > removed + 1e-12)
            why = SkipReason::BoundaryGrowth;
        if (why == SkipReason::None)
            out.pieces.push_back(std::move(piece));
        else
            out.skipped.emplace_back(std::move(piece), why);
    }
    const bool every_b_merged = std::all_of(anchor_of_b.begin(), anchor_of_b.begin() + last_b, [](auto x) { return x >= 0; });
    out.all_merged = every_b_merged &&
                     std::all_of(out.pieces.begin(), out.pieces.end(), [](const StripPiece& p) { return p.triangles.empty(); });
    return out;
}

// ---------------------------------------------------------------------------

struct StitchRecord {
    std::uint32_t match = 0;
    std::size_t m_prime = 0, n_prime = 0;
    std::size_t triangles = 0;
    /// Boundary edges consumed by the piece, as output vertex pairs.
    std::vector<std::pair<std::uint32_t, std::uint32_t>> consumed;
};

struct StitchedMesh {
    SurfaceMesh mesh;
    std::vector<std::uint8_t> seam; ///< per triangle: 1 for strip triangles
    std::vector<StitchRecord> records;
    std::size_t matches = 0;
    std::size_t merged_vertices = 0;
    std::size_t skipped_pieces = 0;
};

/// Mosaic result that keeps every triangle (used to re-stitch a mesh).
inline MosaicResult keep_all(const MeshSet& meshes)
{
    MosaicResult r;
    r.kept = TriangleTable<std::uint8_t>(meshes, 1);
    detail::finish_result(r, meshes, Classification(meshes));
    return r;
}

inline StitchedMesh stitch_all(const MosaicResult& result, const MeshSet& meshes, const StitchParams& params)
{
    params.validate();
    StitchedMesh out;

    // Global vertex keys with a union-find for merges (representative = A side).
    std::vector<std::size_t> vbase(meshes.size() + 1, 0);
    for (std::size_t mi = 0; mi < meshes.size(); ++mi) vbase[mi + 1] = vbase[mi] + meshes[mi].vertex_count();
    std::vector<std::size_t> parent(vbase.back());
    std::iota(parent.begin(), parent.end(), std::size_t{0});
    auto find = [&](std::size_t x) {
        while (parent[x] != x) x = parent[x] = parent[parent[x]];
        return x;
    };
    std::vector<Vec3> position(vbase.back());
    for (std::size_t mi = 0; mi < meshes.size(); ++mi)
        for (std::size_t v = 0; v < meshes[mi].vertex_count(); ++v) position[vbase[mi] + v] = meshes[mi].vertices()[v];

    struct OutTri {
        std::array<std::size_t, 3> v;
        TriangleAttr attr;
        bool seam;
        std::int64_t piece; // -1 for kept triangles
    };
    std::vector<OutTri> tris;
    std::vector<std::vector<std::uint32_t>> incident(vbase.back()); // kept faces per vertex key
    for (std::size_t mi = 0; mi < meshes.size(); ++mi) {
        const SurfaceMesh& m = meshes[mi];
        for (std::uint32_t t = 0; t < m.triangle_count(); ++t) {
            if (!result.kept.mesh(mi)[t]) continue;
            const Face& f = m.face(t);
            OutTri ot{{vbase[mi] + f[0], vbase[mi] + f[1], vbase[mi] + f[2]}, m.attr(t), false, -1};
            for (auto k : ot.v) incident[k].push_back(static_cast<std::uint32_t>(tris.size()));
            tris.push_back(ot);
        }
    }

    const auto chains = extract_boundaries(result, meshes);
    const auto matches = match_boundaries(chains, meshes, params);
    out.matches = matches.size();

    struct PieceInfo {
        std::uint32_t match;
        std::size_t m_prime, n_prime;
        std::vector<std::pair<std::size_t, std::size_t>> consumed;
        std::vector<std::size_t> tris;
    };
    std::vector<PieceInfo> pieces;
    std::vector<char> in_strip(vbase.back(), 0);

    for (std::uint32_t mid = 0; mid < matches.size(); ++mid) {
        const SegmentMatch& sm = matches[mid];
        const BoundaryChain& A = chains[sm.chain_a];
        const BoundaryChain& B = chains[sm.chain_b];
        const std::size_t pa = meshes.index_of(A.mesh), pb = meshes.index_of(B.mesh);
        const SurfaceMesh& ma = meshes[pa];
        const SurfaceMesh& mb = meshes[pb];
        std::vector<std::size_t> ka, kb;
        for (auto i : sm.a) ka.push_back(vbase[pa] + A.vertices[i]);
        for (auto j : sm.b) kb.push_back(vbase[pb] + B.vertices[j]);
        std::vector<Vec3> va, vb;
        for (auto k : ka) va.push_back(position[find(k)]);
        for (auto k : kb) vb.push_back(position[find(k)]);

        // Accepted merges are applied at once so later candidates see them.
        auto can_merge = [&](std::uint32_t j, std::uint32_t i) {
            const std::size_t gb = kb[j], target = find(ka[i]);
            if (find(gb) != gb || in_strip[gb]) return false;
            for (auto t : incident[gb])
                for (auto k : tris[t].v)
                    if (k != gb && find(k) == target) return false;
            // Every edge gb-x becomes target-x and may hold at most two triangles.
            for (auto t : incident[gb])
                for (auto k : tris[t].v) {
                    if (k == gb) continue;
                    const std::size_t x = find(k);
                    auto with_x = [&](std::size_t v) {
                        return std::count_if(incident[v].begin(), incident[v].end(), [&](std::uint32_t u) {
                            return std::any_of(tris[u].v.begin(), tris[u].v.end(),
                                               [&](std::size_t w) { return find(w) == x; });
                        });
                    };
                    if (with_x(gb) + with_x(target) > 2) return false;
                }
            parent[gb] = target;
            for (auto t : incident[gb]) incident[target].push_back(t);
            return true;
        };
        const PairStitch ps = stitch_pair(va, vb, params, sm.cyclic, can_merge);
        out.merged_vertices += ps.merges.size();
        out.skipped_pieces += ps.skipped.size();

        // Edge owners along the segments.
        auto owner = [](const BoundaryChain& c, std::uint32_t u, std::uint32_t v) -> const MeshEdge& {
            const auto n = static_cast<std::uint32_t>(c.vertices.size());
            if ((u + 1) % n == v && (c.closed || u + 1 < n)) return c.edges[u];
            return c.edges[v];
        };
        auto a_owner = [&](std::uint32_t i) -> const TriangleAttr& {
            const auto& e = owner(A, sm.a[i], sm.a[i + 1]);
            return ma.attr(e.tri.tri);
        };
        auto b_owner = [&](std::uint32_t j) -> const TriangleAttr& {
            const auto& e = owner(B, sm.b[j], sm.b[j + 1]);
            return mb.attr(e.tri.tri);
        };
        auto a_normal = [&](std::uint32_t i) { return area_normal(ma.triangle(owner(A, sm.a[i], sm.a[i + 1]).tri.tri)); };
        auto b_normal = [&](std::uint32_t j) { return area_normal(mb.triangle(owner(B, sm.b[j], sm.b[j + 1]).tri.tri)); };
        const auto m = static_cast<std::uint32_t>(ka.size());
        const auto n = static_cast<std::uint32_t>(kb.size());
        auto key_of = [&](std::uint32_t h) { return h < m ? ka[h] : kb[h - m]; };

        for (const StripPiece& piece : ps.pieces) {
            PieceInfo info{mid, piece.m_prime, piece.n_prime, {}, {}};
            Vec3 ref{};
            for (std::uint32_t i = piece.a_begin; i < piece.a_end; ++i) {
                ref = ref + a_normal(i);
                info.consumed.emplace_back(ka[i], ka[i + 1]);
            }
            for (std::uint32_t j = piece.b_begin; j < piece.b_end; ++j) {
                if (piece.a_begin == piece.a_end) ref = ref + b_normal(j);
                info.consumed.emplace_back(kb[j], kb[j + 1]);
            }
            for (std::size_t t = 0; t < piece.triangles.size(); ++t) {
                const auto& h = piece.triangles[t];
                OutTri ot{{key_of(h[0]), key_of(h[1]), key_of(h[2])}, {}, true, static_cast<std::int64_t>(pieces.size())};
                const auto [si, sj] = piece.state[t];
                const TriangleAttr* owners[2] = {m >= 2 ? &a_owner(std::min(si, m - 2)) : nullptr,
                                                 n >= 2 ? &b_owner(std::min(sj, n - 2)) : nullptr};
                Vec3 vp{};
                double tf = 0.0, tl = 0.0;
                int cnt = 0;
                for (const auto* o : owners)
                    if (o) {
                        vp = vp + o->viewpoint;
                        tf += o->t_first;
                        tl += o->t_last;
                        ++cnt;
                    }
                ot.attr.viewpoint = vp / cnt;
                ot.attr.t_first = tf / cnt;
                ot.attr.t_last = std::max(tl / cnt, ot.attr.t_first);
                ot.attr.source_id = owners[0] ? owners[0]->source_id : owners[1]->source_id;
                info.tris.push_back(tris.size());
                for (auto k : ot.v) {
                    in_strip[k] = 1;
                    incident[find(k)].push_back(static_cast<std::uint32_t>(tris.size()));
                }
                tris.push_back(ot);
                // Orientation follows the neighboring kept surface.
                const Triangle geo{position[find(tris.back().v[0])], position[find(tris.back().v[1])],
                                   position[find(tris.back().v[2])]};
                if (dot(area_normal(geo), ref) < 0.0) std::swap(tris.back().v[1], tris.back().v[2]);
            }
            pieces.push_back(std::move(info));
        }
    }

    // Drop strip pieces that collapsed through merges made by later matches.
    std::vector<char> drop_piece(pieces.size(), 0);
    for (const auto& t : tris) {
        const auto a = find(t.v[0]), b = find(t.v[1]), c = find(t.v[2]);
        if (a == b || b == c || a == c) {
            if (t.piece < 0) throw Error(ErrorCode::InvariantViolation, "vertex merge collapsed a kept triangle");
            drop_piece[static_cast<std::size_t>(t.piece)] = 1;
        }
    }

    // Drop the latest strip pieces on any edge left with more than two triangles.
    std::map<std::pair<std::size_t, std::size_t>, std::vector<std::size_t>> edge_tris;
    for (std::size_t t = 0; t < tris.size(); ++t) {
        if (tris[t].piece >= 0 && drop_piece[static_cast<std::size_t>(tris[t].piece)]) continue;
        for (int e = 0; e < 3; ++e) {
            const auto u = find(tris[t].v[e]), v = find(tris[t].v[(e + 1) % 3]);
            edge_tris[{std::min(u, v), std::max(u, v)}].push_back(t);
        }
    }
    for (const auto& [edge, ts] : edge_tris) {
        auto live_count = [&] {
            return std::count_if(ts.begin(), ts.end(), [&](std::size_t t) {
                return tris[t].piece < 0 || !drop_piece[static_cast<std::size_t>(tris[t].piece)];
            });
        };
        for (auto it = ts.rbegin(); it != ts.rend() && live_count() > 2; ++it)
            if (tris[*it].piece >= 0) drop_piece[static_cast<std::size_t>(tris[*it].piece)] = 1;
        if (live_count() > 2) throw Error(ErrorCode::InvariantViolation, "vertex merge made a non-manifold edge");
    }

    // Compact output; surviving vertices keep their global order.
    std::vector<std::int64_t> out_id(parent.size(), -1);
    std::vector<Vec3> verts;
    std::vector<Face> faces;
    std::vector<TriangleAttr> attrs;
    auto live = [&](const OutTri& t) { return t.piece < 0 || !drop_piece[static_cast<std::size_t>(t.piece)]; };
    for (const auto& t : tris)
        if (live(t))
            for (auto k : t.v) out_id[find(k)] = 0;
    std::int64_t next = 0;
    for (std::size_t r = 0; r < out_id.size(); ++r)
        if (out_id[r] >= 0) {
            out_id[r] = next++;
            verts.push_back(position[r]);
        }
    auto id_of = [&](std::size_t key) { return static_cast<std::uint32_t>(out_id[find(key)]); };
    for (const auto& t : tris) {
        if (!live(t)) continue;
        faces.push_back({id_of(t.v[0]), id_of(t.v[1]), id_of(t.v[2])});
        attrs.push_back(t.attr);
        attrs.back().quality = -1.0; // snapped vertices change the area
        out.seam.push_back(t.seam ? 1 : 0);
    }
    for (std::size_t p = 0; p < pieces.size(); ++p) {
        if (drop_piece[p]) {
            ++out.skipped_pieces;
            continue;
        }
        StitchRecord rec{pieces[p].match, pieces[p].m_prime, pieces[p].n_prime, pieces[p].tris.size(), {}};
        for (const auto& [u, v] : pieces[p].consumed) rec.consumed.emplace_back(id_of(u), id_of(v));
        out.records.push_back(std::move(rec));
    }
    out.mesh = SurfaceMesh(0, std::move(verts), std::move(faces), std::move(attrs));
    return out;
}

} // namespace tessera
