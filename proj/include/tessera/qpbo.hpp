#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <istream>
#include <limits>
#include <map>
#include <numeric>
#include <ostream>
#include <span>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

#include "tessera/detail/codec.hpp"
#include "tessera/error.hpp"
#include "tessera/maxflow.hpp"

namespace tessera {

enum class Label : std::int8_t { Zero = 0, One = 1, Unlabeled = -1 };

inline constexpr Label to_label(bool b) noexcept { return b ? Label::One : Label::Zero; }

/// Table of a pairwise term, indexed [x_p][x_q].
using PairTable = std::array<double, 4>; // t00, t01, t10, t11

/// E(x) = constant + sum_p unary_p(x_p) + sum_{p<q} pairwise_pq(x_p, x_q).
class PseudoBooleanFunction {
public:
    using VarPair = std::pair<std::uint32_t, std::uint32_t>;

    PseudoBooleanFunction() = default;
    explicit PseudoBooleanFunction(std::size_t n) : unary_(n, {0.0, 0.0}) {}

    std::size_t size() const noexcept { return unary_.size(); }
    double constant() const noexcept { return constant_; }
    const std::array<double, 2>& unary(std::size_t p) const noexcept { return unary_[p]; }
    const std::map<VarPair, PairTable>& pairwise() const noexcept { return pairwise_; }

    void add_constant(double c) { constant_ += c; }

    void add_unary(std::size_t p, double e0, double e1)
    {
        check_var(p);
        unary_[p][0] += e0;
        unary_[p][1] += e1;
    }

    /// Accumulates into the canonical (min, max) orientation.
    void add_pairwise(std::size_t p, std::size_t q, double e00, double e01, double e10, double e11)
    {
        check_var(p);
        check_var(q);
        if (p == q) throw Error(ErrorCode::InvariantViolation, "pairwise term on a single variable");
        if (p > q) {
            std::swap(p, q);
            std::swap(e01, e10);
        }
        auto& t = pairwise_[{static_cast<std::uint32_t>(p), static_cast<std::uint32_t>(q)}];
        t[0] += e00;
        t[1] += e01;
        t[2] += e10;
        t[3] += e11;
    }

    void validate() const
    {
        if (!std::isfinite(constant_)) throw Error(ErrorCode::InvariantViolation, "non-finite constant");
        for (const auto& u : unary_)
            if (!std::isfinite(u[0]) || !std::isfinite(u[1]))
                throw Error(ErrorCode::InvariantViolation, "non-finite unary coefficient");
        for (const auto& [k, t] : pairwise_)
            for (double v : t)
                if (!std::isfinite(v)) throw Error(ErrorCode::InvariantViolation, "non-finite pairwise coefficient");
    }

    friend bool operator==(const PseudoBooleanFunction&, const PseudoBooleanFunction&) = default;

private:
    void check_var(std::size_t p) const
    {
        if (p >= unary_.size()) throw Error(ErrorCode::InvariantViolation, "variable index out of range");
    }

    double constant_ = 0.0;
    std::vector<std::array<double, 2>> unary_;
    std::map<VarPair, PairTable> pairwise_;
};

inline bool is_submodular(const PairTable& t) noexcept { return t[0] + t[3] <= t[1] + t[2]; }

inline bool is_submodular(const PseudoBooleanFunction& f) noexcept
{
    return std::all_of(f.pairwise().begin(), f.pairwise().end(), [](const auto& kv) { return is_submodular(kv.second); });
}

inline double evaluate(const PseudoBooleanFunction& f, std::span<const Label> x)
{
    if (x.size() != f.size()) throw Error(ErrorCode::IncompleteLabeling, "labeling size does not match the function");
    for (Label l : x)
        if (l == Label::Unlabeled) throw Error(ErrorCode::IncompleteLabeling, "labeling has unlabeled variables");
    double e = f.constant();
    for (std::size_t p = 0; p < f.size(); ++p) e += f.unary(p)[static_cast<int>(x[p])];
    for (const auto& [k, t] : f.pairwise()) e += t[2 * static_cast<int>(x[k.first]) + static_cast<int>(x[k.second])];
    return e;
}

namespace detail {

/// Normal-form pairwise term: either w * [x_p = 0, x_q = 1] (submodular) or
/// w * [x_p = 1, x_q = 1] (non-submodular), with w >= 0.
template <class T>
struct NormalPair {
    std::uint32_t p, q;
    T w;
    bool submodular;
};

template <class T>
struct NormalForm {
    T constant{};
    std::vector<std::array<T, 2>> unary; // min(unary) == 0 per variable
    std::vector<NormalPair<T>> pairs;
};

template <class T, class PairRange>
NormalForm<T> to_normal_form(T constant, std::vector<std::array<T, 2>> unary, const PairRange& pairs)
{
    NormalForm<T> nf;
    nf.constant = constant;
    nf.unary = std::move(unary);
    for (const auto& [p, q, tab] : pairs) {
        const T a = tab[0], b = tab[1], c = tab[2], d = tab[3];
        nf.constant += a;
        nf.unary[p][1] += c - a;
        nf.unary[q][1] += d - c;
        const T w = b + c - a - d;
        if (w > T{}) {
            nf.pairs.push_back({p, q, w, true});
        } else if (w < T{}) {
            // w (1 - x_p) x_q = w x_q - w x_p x_q
            nf.unary[q][1] += w;
            nf.pairs.push_back({p, q, -w, false});
        }
    }
    for (auto& u : nf.unary) {
        const T m = std::min(u[0], u[1]);
        nf.constant += m;
        u[0] -= m;
        u[1] -= m;
    }
    return nf;
}

/// Integer-scaled function over compact variable indices.
struct IntFunction {
    std::int64_t constant = 0;
    std::vector<std::array<std::int64_t, 2>> unary;
    struct Pair {
        std::uint32_t p, q;
        std::array<std::int64_t, 4> t;
    };
    std::vector<Pair> pairs;
};

inline std::int64_t scaled(double v, double scale)
{
    const double s = std::round(v * scale);
    if (!(std::abs(s) < 4.0e18)) throw Error(ErrorCode::InvariantViolation, "coefficient overflows the integer scale");
    return static_cast<std::int64_t>(s);
}

inline IntFunction to_int(const PseudoBooleanFunction& f, double scale)
{
    IntFunction g;
    g.constant = 0; // the double constant is carried separately
    g.unary.reserve(f.size());
    for (std::size_t p = 0; p < f.size(); ++p) g.unary.push_back({scaled(f.unary(p)[0], scale), scaled(f.unary(p)[1], scale)});
    g.pairs.reserve(f.pairwise().size());
    for (const auto& [k, t] : f.pairwise())
        g.pairs.push_back({k.first, k.second, {scaled(t[0], scale), scaled(t[1], scale), scaled(t[2], scale), scaled(t[3], scale)}});
    return g;
}

struct IntSolution {
    std::vector<Label> labels;
    /// Twice the lower bound of the integer function, to stay integral.
    std::int64_t twice_bound = 0;
};

/// Roof-duality solve of an integer function. Labels come from a minimum
/// cut of the doubled network chosen through the strongly connected
/// components of the residual graph: p is labeled whenever p and its
/// complement fall in different components.
inline IntSolution solve_int(const IntFunction& g)
{
    std::vector<std::tuple<std::uint32_t, std::uint32_t, std::array<std::int64_t, 4>>> pairs;
    pairs.reserve(g.pairs.size());
    for (const auto& pr : g.pairs) pairs.emplace_back(pr.p, pr.q, pr.t);
    NormalForm<std::int64_t> nf = to_normal_form<std::int64_t>(g.constant, g.unary, pairs);

    const auto n = static_cast<std::uint32_t>(nf.unary.size());
    IntSolution sol;
    sol.labels.assign(n, Label::Zero);

    // Nodes: p -> 2p, complement -> 2p + 1, source 2n, sink 2n + 1; the
    // mirror of node u is u ^ 1 (source and sink mirror each other).
    const std::uint32_t s = 2 * n, t = 2 * n + 1;
    MaxFlow net(2 * n + 2);
    for (std::uint32_t p = 0; p < n; ++p) {
        const auto& u = nf.unary[p];
        if (u[1] > 0) { // cost when x_p = 1
            net.add_edge(s, 2 * p, u[1]);
            net.add_edge(2 * p + 1, t, u[1]);
        } else if (u[0] > 0) { // cost when x_p = 0
            net.add_edge(2 * p, t, u[0]);
            net.add_edge(s, 2 * p + 1, u[0]);
        }
    }
    for (const auto& pr : nf.pairs) {
        const std::uint32_t p = 2 * pr.p, q = 2 * pr.q;
        if (pr.submodular) { // [x_p = 0, x_q = 1]
            net.add_edge(p, q, pr.w);
            net.add_edge(q + 1, p + 1, pr.w);
        } else { // [x_p = 1, x_q = 1]
            net.add_edge(q + 1, p, pr.w);
            net.add_edge(p + 1, q, pr.w);
        }
    }
    const std::int64_t flow = net.solve(s, t);
    sol.twice_bound = 2 * nf.constant + flow;

    // Tarjan SCC over residual arcs plus t -> s, iteratively.
    const std::uint32_t nodes = 2 * n + 2;
    constexpr std::uint32_t kNone = std::numeric_limits<std::uint32_t>::max();
    std::vector<std::uint32_t> index(nodes, kNone), low(nodes, 0), comp(nodes, kNone);
    std::vector<std::uint32_t> stack;
    std::vector<char> on_stack(nodes, 0);
    struct Frame {
        std::uint32_t u;
        const std::uint32_t* it;
        const std::uint32_t* end;
        bool extra; // pending t -> s arc
    };
    std::vector<Frame> call;
    std::uint32_t next_index = 0, next_comp = 0;
    for (std::uint32_t root = 0; root < nodes; ++root) {
        if (index[root] != kNone) continue;
        auto push = [&](std::uint32_t u) {
            index[u] = low[u] = next_index++;
            stack.push_back(u);
            on_stack[u] = 1;
            auto [b, e] = net.out_arcs(u);
            call.push_back({u, b, e, u == t});
        };
        push(root);
        while (!call.empty()) {
            Frame& f = call.back();
            std::uint32_t v = kNone;
            while (f.it != f.end) {
                const std::uint32_t a = *f.it++;
                if (net.residual(a) > 0) {
                    v = net.head(a);
                    break;
                }
            }
            if (v == kNone && f.extra) {
                f.extra = false;
                v = s;
            }
            if (v != kNone) {
                if (index[v] == kNone) {
                    push(v);
                } else if (on_stack[v]) {
                    low[f.u] = std::min(low[f.u], index[v]);
                }
                continue;
            }
            const std::uint32_t u = f.u;
            call.pop_back();
            if (!call.empty()) low[call.back().u] = std::min(low[call.back().u], low[u]);
            if (low[u] == index[u]) {
                std::uint32_t w;
                do {
                    w = stack.back();
                    stack.pop_back();
                    on_stack[w] = 0;
                    comp[w] = next_comp;
                } while (w != u);
                ++next_comp;
            }
        }
    }
    // S = { u : comp[u] <= comp[mirror(u)] } is closed under residual arcs,
    // contains s and not t, hence a minimum cut.
    for (std::uint32_t p = 0; p < n; ++p) {
        const std::uint32_t cp = comp[2 * p], cq = comp[2 * p + 1];
        sol.labels[p] = cp < cq ? Label::Zero : (cq < cp ? Label::One : Label::Unlabeled);
    }
    return sol;
}

} // namespace detail

struct QpboOptions {
    double scale = 1e6; ///< coefficients are rounded to multiples of 1/scale
    /// improve(): a stalled round pins max(1, unlabeled / pin_divisor) variables.
    std::size_t pin_divisor = 32;
};

struct QpboResult {
    std::vector<Label> labels;
    double lower_bound = 0.0;

    std::size_t unlabeled_count() const noexcept
    {
        return static_cast<std::size_t>(std::count(labels.begin(), labels.end(), Label::Unlabeled));
    }
    double label_ratio() const noexcept
    {
        return labels.empty() ? 1.0 : 1.0 - static_cast<double>(unlabeled_count()) / static_cast<double>(labels.size());
    }
};

/// Equivalent function in normal form: every unary has a zero entry and
/// every pairwise table has a single nonzero entry, at (0,1) when the term
/// is submodular and at (1,1) otherwise.
inline PseudoBooleanFunction reparameterize(const PseudoBooleanFunction& f)
{
    std::vector<std::array<double, 2>> unary(f.size());
    for (std::size_t p = 0; p < f.size(); ++p) unary[p] = f.unary(p);
    std::vector<std::tuple<std::uint32_t, std::uint32_t, PairTable>> pairs;
    for (const auto& [k, t] : f.pairwise()) pairs.emplace_back(k.first, k.second, t);
    const auto nf = detail::to_normal_form<double>(f.constant(), std::move(unary), pairs);

    PseudoBooleanFunction out(f.size());
    out.add_constant(nf.constant);
    for (std::size_t p = 0; p < f.size(); ++p) out.add_unary(p, nf.unary[p][0], nf.unary[p][1]);
    for (const auto& pr : nf.pairs) {
        if (pr.submodular)
            out.add_pairwise(pr.p, pr.q, 0.0, pr.w, 0.0, 0.0);
        else
            out.add_pairwise(pr.p, pr.q, 0.0, 0.0, 0.0, pr.w);
    }
    return out;
}

/// Partial optimum with weak persistency: some global minimizer agrees with
/// every labeled variable. Submodular functions come back fully labeled
/// with energy equal to the bound.
inline QpboResult solve(const PseudoBooleanFunction& f, const QpboOptions& opt = {})
{
    f.validate();
    const auto g = detail::to_int(f, opt.scale);
    auto sol = detail::solve_int(g);
    QpboResult r;
    r.labels = std::move(sol.labels);
    r.lower_bound = f.constant() + static_cast<double>(sol.twice_bound) / (2.0 * opt.scale);
    return r;
}

/// Substitutes x_p = value: terms touching p fold into the neighbours'
/// unaries and the constant. Indices are preserved; p is left without terms.
inline PseudoBooleanFunction fix_variable(const PseudoBooleanFunction& f, std::size_t p, bool value)
{
    if (p >= f.size()) throw Error(ErrorCode::InvariantViolation, "variable index out of range");
    PseudoBooleanFunction out(f.size());
    out.add_constant(f.constant() + f.unary(p)[value ? 1 : 0]);
    for (std::size_t v = 0; v < f.size(); ++v)
        if (v != p) out.add_unary(v, f.unary(v)[0], f.unary(v)[1]);
    const int xv = value ? 1 : 0;
    for (const auto& [k, t] : f.pairwise()) {
        if (k.first == p)
            out.add_unary(k.second, t[2 * xv + 0], t[2 * xv + 1]);
        else if (k.second == p)
            out.add_unary(k.first, t[0 + xv], t[2 + xv]);
        else
            out.add_pairwise(k.first, k.second, t[0], t[1], t[2], t[3]);
    }
    return out;
}

namespace detail {

/// Fixes the marked variables of `g` to `values`, returning the function
/// over the remaining variables (compacted; `keep` lists their indices in g).
inline IntFunction restrict_int(const IntFunction& g, std::span<const char> fixed, std::span<const Label> values,
                                std::vector<std::uint32_t>& keep)
{
    const auto n = static_cast<std::uint32_t>(g.unary.size());
    std::vector<std::uint32_t> remap(n, std::numeric_limits<std::uint32_t>::max());
    keep.clear();
    for (std::uint32_t p = 0; p < n; ++p)
        if (!fixed[p]) {
            remap[p] = static_cast<std::uint32_t>(keep.size());
            keep.push_back(p);
        }
    IntFunction out;
    out.constant = g.constant;
    out.unary.resize(keep.size());
    for (std::uint32_t p = 0; p < n; ++p) {
        if (fixed[p])
            out.constant += g.unary[p][values[p] == Label::One];
        else
            out.unary[remap[p]] = g.unary[p];
    }
    for (const auto& pr : g.pairs) {
        const bool fp = fixed[pr.p], fq = fixed[pr.q];
        if (fp && fq) {
            out.constant += pr.t[2 * (values[pr.p] == Label::One) + (values[pr.q] == Label::One)];
        } else if (fp) {
            const int xp = values[pr.p] == Label::One;
            auto& u = out.unary[remap[pr.q]];
            u[0] += pr.t[2 * xp];
            u[1] += pr.t[2 * xp + 1];
        } else if (fq) {
            const int xq = values[pr.q] == Label::One;
            auto& u = out.unary[remap[pr.p]];
            u[0] += pr.t[xq];
            u[1] += pr.t[2 + xq];
        } else {
            out.pairs.push_back({remap[pr.p], remap[pr.q], pr.t});
        }
    }
    return out;
}

inline std::vector<char> active_vars(const IntFunction& g)
{
    std::vector<char> active(g.unary.size(), 0);
    for (std::size_t p = 0; p < g.unary.size(); ++p) active[p] = g.unary[p][0] != g.unary[p][1];
    for (const auto& pr : g.pairs) {
        const auto& t = pr.t;
        // A table that is constant in both arguments couples nothing.
        if (t[0] != t[1] || t[0] != t[2] || t[0] != t[3]) active[pr.p] = active[pr.q] = 1;
    }
    return active;
}

} // namespace detail

/// Completes a labeling without ever increasing the energy of `initial`.
///
/// Runs solve() and adopts every persistent label. While variables remain
/// unlabeled, the first of them in `order` are pinned to their incumbent
/// values (one at a time for small residuals, a fixed fraction otherwise),
/// folded into the function, and the remainder is solved again. Independent
/// blocks of the residual problem are processed separately.
inline std::vector<Label> improve(const PseudoBooleanFunction& f, std::span<const Label> initial,
                                  std::span<const std::uint32_t> order, const QpboOptions& opt = {})
{
    f.validate();
    const double initial_energy = evaluate(f, initial); // also checks completeness
    const auto n = static_cast<std::uint32_t>(f.size());
    std::vector<Label> incumbent(initial.begin(), initial.end());

    // Rank of each variable in the caller's order; unlisted ones follow by index.
    std::vector<std::uint64_t> rank(n);
    for (std::uint32_t p = 0; p < n; ++p) rank[p] = std::uint64_t{n} + p;
    for (std::size_t i = 0; i < order.size(); ++i)
        if (order[i] < n && rank[order[i]] >= n) rank[order[i]] = i;

    const detail::IntFunction g = detail::to_int(f, opt.scale);

    // Round 1: whole problem.
    const auto first = detail::solve_int(g);
    const auto active = detail::active_vars(g);
    std::vector<char> fixed(n, 0);
    for (std::uint32_t p = 0; p < n; ++p) {
        if (!active[p]) {
            fixed[p] = 1;
        } else if (first.labels[p] != Label::Unlabeled) {
            incumbent[p] = first.labels[p];
            fixed[p] = 1;
        }
    }

    struct Block {
        detail::IntFunction fn;
        std::vector<std::uint32_t> vars; ///< original index of each local variable
        std::uint64_t key;               ///< best rank among vars
    };
    // Connected components of fn, smallest key last so it is popped first.
    auto split = [&](detail::IntFunction fn, const std::vector<std::uint32_t>& vars, std::vector<Block>& out) {
        const auto m = static_cast<std::uint32_t>(vars.size());
        std::vector<std::uint32_t> parent(m);
        std::iota(parent.begin(), parent.end(), 0u);
        auto find = [&](std::uint32_t x) {
            while (parent[x] != x) x = parent[x] = parent[parent[x]];
            return x;
        };
        for (const auto& pr : fn.pairs) {
            const auto a = find(pr.p), b = find(pr.q);
            if (a != b) parent[std::max(a, b)] = std::min(a, b);
        }
        std::vector<std::uint32_t> block_of(m), local_of(m);
        std::vector<Block> blocks;
        for (std::uint32_t i = 0; i < m; ++i) {
            const auto r = find(i);
            if (r == i) {
                block_of[i] = static_cast<std::uint32_t>(blocks.size());
                blocks.push_back({{}, {}, std::numeric_limits<std::uint64_t>::max()});
            } else {
                block_of[i] = block_of[r];
            }
            Block& b = blocks[block_of[i]];
            local_of[i] = static_cast<std::uint32_t>(b.vars.size());
            b.vars.push_back(vars[i]);
            b.fn.unary.push_back(fn.unary[i]);
            b.key = std::min(b.key, rank[vars[i]]);
        }
        for (const auto& pr : fn.pairs) blocks[block_of[pr.p]].fn.pairs.push_back({local_of[pr.p], local_of[pr.q], pr.t});
        std::sort(blocks.begin(), blocks.end(), [](const Block& a, const Block& b) { return a.key > b.key; });
        for (auto& b : blocks) out.push_back(std::move(b));
    };

    std::vector<std::uint32_t> keep;
    std::vector<Block> work;
    split(detail::restrict_int(g, fixed, incumbent, keep), keep, work);

    while (!work.empty()) {
        Block block = std::move(work.back());
        work.pop_back();
        const auto& vars = block.vars;
        std::vector<Label> values(vars.size());
        for (std::size_t i = 0; i < vars.size(); ++i) values[i] = incumbent[vars[i]];

        const auto sol = detail::solve_int(block.fn);
        const auto act = detail::active_vars(block.fn);
        std::vector<char> done(vars.size(), 0);
        bool progress = false;
        for (std::size_t i = 0; i < vars.size(); ++i) {
            if (!act[i]) {
                done[i] = 1;
            } else if (sol.labels[i] != Label::Unlabeled) {
                values[i] = sol.labels[i];
                done[i] = 1;
                progress = true;
            }
        }
        for (std::size_t i = 0; i < vars.size(); ++i) incumbent[vars[i]] = values[i];
        if (std::all_of(done.begin(), done.end(), [](char d) { return d != 0; })) continue;
        if (!progress) {
            // Pin the first still-unlabeled variables in the caller's order.
            std::vector<std::size_t> open;
            for (std::size_t i = 0; i < vars.size(); ++i)
                if (!done[i]) open.push_back(i);
            const std::size_t batch = std::max<std::size_t>(1, open.size() / opt.pin_divisor);
            std::partial_sort(open.begin(), open.begin() + static_cast<std::ptrdiff_t>(batch), open.end(),
                              [&](std::size_t a, std::size_t b) { return rank[vars[a]] < rank[vars[b]]; });
            for (std::size_t k = 0; k < batch; ++k) done[open[k]] = 1;
        }
        std::vector<std::uint32_t> kept;
        auto rest = detail::restrict_int(block.fn, done, values, kept);
        std::vector<std::uint32_t> next_vars;
        for (auto i : kept) next_vars.push_back(vars[i]);
        split(std::move(rest), next_vars, work);
    }

    // Rounding to the integer scale can in principle cost a few ulps.
    if (evaluate(f, incumbent) > initial_energy) return std::vector<Label>(initial.begin(), initial.end());
    return incumbent;
}

// ---------------------------------------------------------------------------
// Text dump: `PBF n m constant`, then `U p a b` per variable, then
// `P p q t00 t01 t10 t11` per pairwise term.

inline void write_pbf(std::ostream& os, const PseudoBooleanFunction& f)
{
    using detail::format_double;
    os << "PBF " << f.size() << ' ' << f.pairwise().size() << ' ' << format_double(f.constant()) << '\n';
    for (std::size_t p = 0; p < f.size(); ++p)
        os << "U " << p << ' ' << format_double(f.unary(p)[0]) << ' ' << format_double(f.unary(p)[1]) << '\n';
    for (const auto& [k, t] : f.pairwise())
        os << "P " << k.first << ' ' << k.second << ' ' << format_double(t[0]) << ' ' << format_double(t[1]) << ' '
           << format_double(t[2]) << ' ' << format_double(t[3]) << '\n';
}

inline PseudoBooleanFunction read_pbf(std::istream& is)
{
    std::string line;
    if (!std::getline(is, line)) throw Error(ErrorCode::MalformedHeader, "empty PBF dump");
    auto head = detail::split_ws(line);
    if (head.size() != 4 || head[0] != "PBF") throw Error(ErrorCode::MalformedHeader, "expected 'PBF n m constant'");
    const auto n = detail::parse_int<std::size_t>(head[1]);
    const auto m = detail::parse_int<std::size_t>(head[2]);
    const auto c = detail::parse_double(head[3]);
    if (!n || !m || !c) throw Error(ErrorCode::MalformedHeader, "bad PBF header");
    PseudoBooleanFunction f(*n);
    f.add_constant(*c);
    std::size_t pairs = 0;
    while (std::getline(is, line)) {
        const auto tok = detail::split_ws(line);
        if (tok.empty()) continue;
        auto num = [&](std::size_t i) {
            auto v = detail::parse_double(tok[i]);
            if (!v) throw Error(ErrorCode::MalformedHeader, "bad number in PBF dump");
            return *v;
        };
        auto idx = [&](std::size_t i) {
            auto v = detail::parse_int<std::size_t>(tok[i]);
            if (!v) throw Error(ErrorCode::MalformedHeader, "bad index in PBF dump");
            return *v;
        };
        if (tok[0] == "U" && tok.size() == 4) {
            f.add_unary(idx(1), num(2), num(3));
        } else if (tok[0] == "P" && tok.size() == 7) {
            f.add_pairwise(idx(1), idx(2), num(3), num(4), num(5), num(6));
            ++pairs;
        } else {
            throw Error(ErrorCode::MalformedHeader, "unrecognized PBF line: " + line);
        }
    }
    if (pairs != *m) throw Error(ErrorCode::MalformedHeader, "pairwise count does not match header");
    return f;
}

} // namespace tessera
