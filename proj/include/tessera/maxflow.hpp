#pragma once

#include <algorithm>
#include <cstdint>
#include <limits>
#include <vector>

namespace tessera {

/// Dinic's algorithm on 64-bit integer capacities. Arcs are stored in
/// forward/reverse pairs (2i, 2i+1); after solve() the capacity of each arc
/// is its residual capacity. Deterministic for a fixed insertion order.
class MaxFlow {
public:
    using Cap = std::int64_t;

    explicit MaxFlow(std::uint32_t nodes = 0) : nodes_(nodes) {}

    std::uint32_t node_count() const noexcept { return nodes_; }
    std::size_t arc_count() const noexcept { return head_.size(); }

    void add_edge(std::uint32_t from, std::uint32_t to, Cap cap, Cap rev_cap = 0)
    {
        head_.push_back(to);
        cap_.push_back(cap);
        head_.push_back(from);
        cap_.push_back(rev_cap);
        built_ = false;
    }

    std::uint32_t head(std::size_t arc) const noexcept { return head_[arc]; }
    std::uint32_t tail(std::size_t arc) const noexcept { return head_[arc ^ 1]; }
    Cap residual(std::size_t arc) const noexcept { return cap_[arc]; }

    /// Outgoing arcs of u (valid after solve()).
    std::pair<const std::uint32_t*, const std::uint32_t*> out_arcs(std::uint32_t u) const noexcept
    {
        return {adj_.data() + start_[u], adj_.data() + start_[u + 1]};
    }

    Cap solve(std::uint32_t s, std::uint32_t t)
    {
        build();
        Cap flow = 0;
        if (s == t) return 0;
        level_.assign(nodes_, -1);
        it_.assign(nodes_, 0);
        std::vector<std::uint32_t> path;
        while (bfs(s, t)) {
            for (std::uint32_t u = 0; u < nodes_; ++u) it_[u] = start_[u];
            // Iterative blocking-flow search.
            path.clear();
            std::uint32_t u = s;
            for (;;) {
                if (u == t) {
                    Cap push = std::numeric_limits<Cap>::max();
                    for (auto a : path) push = std::min(push, cap_[a]);
                    std::size_t cut = path.size();
                    for (std::size_t i = 0; i < path.size(); ++i) {
                        cap_[path[i]] -= push;
                        cap_[path[i] ^ 1] += push;
                        if (cap_[path[i]] == 0 && cut == path.size()) cut = i;
                    }
                    flow += push;
                    path.resize(cut);
                    u = path.empty() ? s : head_[path.back()];
                    continue;
                }
                bool advanced = false;
                for (; it_[u] < start_[u + 1]; ++it_[u]) {
                    const std::uint32_t a = adj_[it_[u]];
                    const std::uint32_t v = head_[a];
                    if (cap_[a] > 0 && level_[v] == level_[u] + 1) {
                        path.push_back(a);
                        u = v;
                        advanced = true;
                        break;
                    }
                }
                if (advanced) continue;
                level_[u] = -1; // dead end for this phase
                if (path.empty()) break;
                const std::uint32_t a = path.back();
                path.pop_back();
                u = head_[a ^ 1];
                ++it_[u];
            }
        }
        return flow;
    }

private:
    void build()
    {
        if (built_) return;
        start_.assign(nodes_ + 1, 0);
        for (std::size_t a = 0; a < head_.size(); ++a) ++start_[head_[a ^ 1] + 1];
        for (std::uint32_t u = 0; u < nodes_; ++u) start_[u + 1] += start_[u];
        adj_.resize(head_.size());
        std::vector<std::uint32_t> fill(start_.begin(), start_.end() - 1);
        for (std::size_t a = 0; a < head_.size(); ++a) adj_[fill[head_[a ^ 1]]++] = static_cast<std::uint32_t>(a);
        built_ = true;
    }

    bool bfs(std::uint32_t s, std::uint32_t t)
    {
        std::fill(level_.begin(), level_.end(), -1);
        std::vector<std::uint32_t> queue;
        queue.reserve(nodes_);
        level_[s] = 0;
        queue.push_back(s);
        for (std::size_t qi = 0; qi < queue.size(); ++qi) {
            const std::uint32_t u = queue[qi];
            for (std::uint32_t i = start_[u]; i < start_[u + 1]; ++i) {
                const std::uint32_t a = adj_[i];
                const std::uint32_t v = head_[a];
                if (cap_[a] > 0 && level_[v] < 0) {
                    level_[v] = level_[u] + 1;
                    queue.push_back(v);
                }
            }
        }
        return level_[t] >= 0;
    }

    std::uint32_t nodes_ = 0;
    std::vector<std::uint32_t> head_;
    std::vector<Cap> cap_;
    std::vector<std::uint32_t> start_;
    std::vector<std::uint32_t> adj_;
    std::vector<std::int32_t> level_;
    std::vector<std::uint32_t> it_;
    bool built_ = false;
};

} // namespace tessera
