#pragma once

#include <algorithm>
#include <cstdint>
#include <numeric>
#include <span>
#include <vector>

#include "tessera/geometry.hpp"

namespace tessera {

/// Static axis-aligned bounding-volume hierarchy over a list of boxes.
/// Built once with median splits on the longest axis; read-only afterwards,
/// so concurrent queries are safe.
class Bvh {
public:
    static constexpr std::uint32_t kLeafSize = 4;

    Bvh() = default;

    explicit Bvh(std::span<const Aabb> boxes) : boxes_(boxes.begin(), boxes.end())
    {
        items_.resize(boxes_.size());
        std::iota(items_.begin(), items_.end(), 0u);
        if (!boxes_.empty()) {
            nodes_.reserve(2 * boxes_.size() / kLeafSize + 2);
            build(0, static_cast<std::uint32_t>(items_.size()));
        }
    }

    std::size_t size() const noexcept { return boxes_.size(); }
    bool empty() const noexcept { return boxes_.empty(); }
    Aabb root_bounds() const noexcept { return nodes_.empty() ? Aabb{} : nodes_[0].box; }
    const Aabb& box(std::uint32_t item) const noexcept { return boxes_[item]; }

    /// Calls fn(item) for every item whose box overlaps q.
    template <class Fn>
    void query(const Aabb& q, Fn&& fn) const
    {
        if (nodes_.empty()) return;
        std::uint32_t stack[64];
        int top = 0;
        stack[top++] = 0;
        while (top > 0) {
            const Node& n = nodes_[stack[--top]];
            if (!n.box.overlaps(q)) continue;
            if (n.count > 0) {
                for (std::uint32_t i = n.first; i < n.first + n.count; ++i)
                    if (boxes_[items_[i]].overlaps(q)) fn(items_[i]);
            } else {
                stack[top++] = n.first;
                stack[top++] = n.first + 1;
            }
        }
    }

    /// Calls fn(item, tmin, tmax) for every item whose box the ray passes
    /// through within [tmin, tmax]. fn returns the (possibly shrunk) tmax.
    template <class Fn>
    void raycast(const Ray& r, double tmin, double tmax, Fn&& fn) const
    {
        if (nodes_.empty()) return;
        std::uint32_t stack[64];
        int top = 0;
        stack[top++] = 0;
        while (top > 0) {
            const Node& n = nodes_[stack[--top]];
            if (!ray_box(r, n.box, tmin, tmax)) continue;
            if (n.count > 0) {
                for (std::uint32_t i = n.first; i < n.first + n.count; ++i)
                    if (ray_box(r, boxes_[items_[i]], tmin, tmax)) tmax = fn(items_[i], tmax);
            } else {
                stack[top++] = n.first;
                stack[top++] = n.first + 1;
            }
        }
    }

private:
    struct Node {
        Aabb box;
        std::uint32_t first = 0; // child index (inner) or item offset (leaf)
        std::uint32_t count = 0; // 0 for inner nodes
    };

    void build(std::uint32_t begin, std::uint32_t end)
    {
        // Explicit work list: node index + item range.
        struct Task {
            std::uint32_t node, begin, end;
        };
        nodes_.push_back({});
        std::vector<Task> work{{0, begin, end}};
        while (!work.empty()) {
            const Task task = work.back();
            work.pop_back();
            Aabb box, centers;
            for (std::uint32_t i = task.begin; i < task.end; ++i) {
                box.extend(boxes_[items_[i]]);
                centers.extend(boxes_[items_[i]].center());
            }
            nodes_[task.node].box = box;
            const std::uint32_t n = task.end - task.begin;
            const Vec3 ext = centers.hi - centers.lo;
            if (n <= kLeafSize || (ext.x <= 0.0 && ext.y <= 0.0 && ext.z <= 0.0)) {
                nodes_[task.node].first = task.begin;
                nodes_[task.node].count = n;
                continue;
            }
            const int axis = ext.x >= ext.y && ext.x >= ext.z ? 0 : (ext.y >= ext.z ? 1 : 2);
            const std::uint32_t mid = task.begin + n / 2;
            std::nth_element(items_.begin() + task.begin, items_.begin() + mid, items_.begin() + task.end,
                             [&](std::uint32_t a, std::uint32_t b) {
                                 const double ca = boxes_[a].center()[axis];
                                 const double cb = boxes_[b].center()[axis];
                                 return ca != cb ? ca < cb : a < b;
                             });
            const auto left = static_cast<std::uint32_t>(nodes_.size());
            nodes_.push_back({});
            nodes_.push_back({});
            nodes_[task.node].first = left;
            nodes_[task.node].count = 0;
            work.push_back({left, task.begin, mid});
            work.push_back({left + 1, mid, task.end});
        }
    }

    std::vector<Aabb> boxes_;
    std::vector<std::uint32_t> items_;
    std::vector<Node> nodes_;
};

} // namespace tessera
