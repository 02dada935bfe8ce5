#include "memfly/topics.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <map>
#include <numeric>
#include <random>

#include "memfly/error.hpp"
#include "memfly/memory_graph.hpp"

namespace memfly {

// ------------------------------------------------------------ WeightedGraph

void WeightedGraph::add_edge(std::uint32_t u, std::uint32_t v, double w) {
    if (u >= adj_.size() || v >= adj_.size()) throw Error(ErrorCode::Precondition, "edge endpoint out of range");
    if (u == v) throw Error(ErrorCode::SelfLoop, "self-loop on vertex " + std::to_string(u));
    if (!(w > 0.0)) throw Error(ErrorCode::Precondition, "edge weight must be positive");
    auto bump = [w](std::vector<Neighbor>& list, std::uint32_t to) {
        for (auto& [x, wx] : list) {
            if (x == to) {
                wx += w;
                return false;
            }
        }
        list.emplace_back(to, w);
        return true;
    };
    if (bump(adj_[u], v)) ++edges_;
    bump(adj_[v], u);
    total_ += w;
}

double WeightedGraph::degree(std::uint32_t v) const {
    double d = 0.0;
    for (const auto& [u, w] : adj_[v]) d += w;
    return d;
}

WeightedGraph WeightedGraph::induced(std::span<const std::uint32_t> vertices) const {
    std::map<std::uint32_t, std::uint32_t> local;
    for (std::uint32_t v : vertices) local.emplace(v, static_cast<std::uint32_t>(local.size()));
    WeightedGraph sub(local.size());
    for (std::uint32_t v : vertices) {
        for (const auto& [u, w] : adj_[v]) {
            auto it = local.find(u);
            if (it != local.end() && v < u) sub.add_edge(local.at(v), it->second, w);
        }
    }
    return sub;
}

std::size_t Partition::community_count() const {
    if (assignment.empty()) return 0;
    return *std::max_element(assignment.begin(), assignment.end()) + 1;
}

std::vector<std::vector<std::uint32_t>> Partition::communities() const {
    std::vector<std::vector<std::uint32_t>> out(community_count());
    for (std::uint32_t v = 0; v < assignment.size(); ++v) out[assignment[v]].push_back(v);
    return out;
}

double modularity(const WeightedGraph& g, std::span<const std::uint32_t> assignment, double resolution) {
    if (assignment.size() != g.size()) throw Error(ErrorCode::Precondition, "assignment does not cover every vertex");
    const double m = g.total_weight();
    if (m <= 0.0) throw Error(ErrorCode::EmptyGraph, "modularity of a graph without edges");
    std::map<std::uint32_t, double> in, tot;
    for (std::uint32_t v = 0; v < g.size(); ++v) {
        const std::uint32_t c = assignment[v];
        for (const auto& [u, w] : g.neighbors(v)) {
            tot[c] += w;
            if (assignment[u] == c) in[c] += w;
        }
    }
    double q = 0.0;
    for (const auto& [c, t] : tot) {
        const double frac = t / (2.0 * m);
        q += in[c] / (2.0 * m) - resolution * frac * frac;
    }
    return q;
}

// ------------------------------------------------------------------- Leiden

namespace {

// Portable: no standard distributions, whose output is implementation-defined.
struct Rng {
    std::mt19937_64 engine;
    explicit Rng(std::uint64_t seed) : engine(seed) {}
    std::uint64_t below(std::uint64_t n) { return engine() % n; }
    double uniform() { return static_cast<double>(engine() >> 11) * 0x1.0p-53; }
    template <class T>
    void shuffle(std::vector<T>& v) {
        for (std::size_t i = v.size(); i > 1; --i) std::swap(v[i - 1], v[below(i)]);
    }
};

std::uint64_t mix_seed(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

constexpr double kEps = 1e-10;

// Graph whose nodes may stand for whole groups of original vertices.
struct AggGraph {
    std::vector<std::vector<WeightedGraph::Neighbor>> adj;  // no self-loops
    std::vector<double> self;                              // internal weight, each edge once
    std::vector<double> degree;                            // includes 2 * self

    std::size_t size() const { return adj.size(); }
};

AggGraph from_graph(const WeightedGraph& g) {
    AggGraph a;
    a.adj.resize(g.size());
    a.self.assign(g.size(), 0.0);
    a.degree.assign(g.size(), 0.0);
    for (std::uint32_t v = 0; v < g.size(); ++v) {
        a.adj[v] = g.neighbors(v);
        a.degree[v] = g.degree(v);
    }
    return a;
}

// Relabels to 0..k-1 by first occurrence; returns k.
std::uint32_t compact(std::vector<std::uint32_t>& labels) {
    std::vector<std::uint32_t> remap(labels.size() + 1, std::numeric_limits<std::uint32_t>::max());
    std::uint32_t next = 0;
    for (auto& l : labels) {
        if (l >= remap.size()) remap.resize(l + 1, std::numeric_limits<std::uint32_t>::max());
        if (remap[l] == std::numeric_limits<std::uint32_t>::max()) remap[l] = next++;
        l = remap[l];
    }
    return next;
}

class LocalMover {
public:
    LocalMover(const AggGraph& g, double two_m, double gamma) : g_(g), two_m_(two_m), gamma_(gamma) {}

    // Queue-based local moving. comm labels must lie in [0, n).
    bool run(std::vector<std::uint32_t>& comm, Rng& rng) const {
        const std::size_t n = g_.size();
        std::vector<double> tot(n, 0.0);
        std::vector<std::uint32_t> count(n, 0);
        for (std::uint32_t v = 0; v < n; ++v) {
            tot[comm[v]] += g_.degree[v];
            ++count[comm[v]];
        }
        std::vector<std::uint32_t> empties;
        for (std::uint32_t c = 0; c < n; ++c) {
            if (count[c] == 0) empties.push_back(c);
        }
        std::vector<std::uint32_t> order(n);
        std::iota(order.begin(), order.end(), 0u);
        rng.shuffle(order);
        std::deque<std::uint32_t> queue(order.begin(), order.end());
        std::vector<char> queued(n, 1);
        std::vector<double> weight_to(n, 0.0);
        std::vector<char> seen(n, 0);
        std::vector<std::uint32_t> touched;
        bool changed = false;

        while (!queue.empty()) {
            const std::uint32_t v = queue.front();
            queue.pop_front();
            queued[v] = 0;
            const std::uint32_t cur = comm[v];
            const double k = g_.degree[v];

            touched.clear();
            for (const auto& [u, w] : g_.adj[v]) {
                const std::uint32_t c = comm[u];
                if (!seen[c]) {
                    seen[c] = 1;
                    touched.push_back(c);
                }
                weight_to[c] += w;
            }
            tot[cur] -= k;
            --count[cur];

            std::uint32_t best = cur;
            double best_gain = weight_to[cur] - gamma_ * k * tot[cur] / two_m_;
            for (std::uint32_t c : touched) {
                if (c == cur) continue;
                const double gain = weight_to[c] - gamma_ * k * tot[c] / two_m_;
                if (gain > best_gain + kEps || (std::abs(gain - best_gain) <= kEps && best != cur && c < best)) {
                    best = c;
                    best_gain = gain;
                }
            }
            if (best_gain < -kEps) {
                // an empty community (gain 0) beats every option
                if (count[cur] == 0) {
                    best = cur;
                } else {
                    while (!empties.empty() && count[empties.back()] != 0) empties.pop_back();
                    best = empties.back();
                    empties.pop_back();
                }
            }

            tot[best] += k;
            ++count[best];
            if (count[cur] == 0 && best != cur) empties.push_back(cur);
            if (best != cur) {
                comm[v] = best;
                changed = true;
                for (const auto& [u, w] : g_.adj[v]) {
                    if (!queued[u] && comm[u] != best) {
                        queued[u] = 1;
                        queue.push_back(u);
                    }
                }
            }
            for (std::uint32_t c : touched) {
                weight_to[c] = 0.0;
                seen[c] = 0;
            }
            weight_to[cur] = 0.0;
        }
        return changed;
    }

private:
    const AggGraph& g_;
    double two_m_;
    double gamma_;
};

// Leiden refinement: inside each community, singletons merge into
// well-connected sub-communities, chosen with probability ~ exp(gain / theta).
std::vector<std::uint32_t> refine(const AggGraph& g, const std::vector<std::uint32_t>& comm, double two_m, double gamma,
                                  double theta, Rng& rng) {
    const std::size_t n = g.size();
    std::vector<std::uint32_t> refined(n);
    std::iota(refined.begin(), refined.end(), 0u);
    std::vector<double> rtot(g.degree);
    std::vector<std::uint32_t> rsize(n, 1);
    std::vector<double> ctot(n, 0.0);
    for (std::uint32_t v = 0; v < n; ++v) ctot[comm[v]] += g.degree[v];
    std::vector<double> ext(n, 0.0);
    for (std::uint32_t v = 0; v < n; ++v) {
        for (const auto& [u, w] : g.adj[v]) {
            if (comm[u] == comm[v]) ext[v] += w;
        }
    }

    std::vector<std::uint32_t> order(n);
    std::iota(order.begin(), order.end(), 0u);
    rng.shuffle(order);
    std::vector<double> weight_to(n, 0.0);
    std::vector<char> seen(n, 0);
    std::vector<std::uint32_t> touched;
    std::vector<std::pair<std::uint32_t, double>> options;

    for (std::uint32_t v : order) {
        const std::uint32_t rv = refined[v];
        if (rsize[rv] != 1) continue;
        const std::uint32_t c = comm[v];
        const double k = g.degree[v];
        if (ext[v] < gamma * k * (ctot[c] - k) / two_m) continue;

        touched.clear();
        for (const auto& [u, w] : g.adj[v]) {
            if (comm[u] != c) continue;
            const std::uint32_t r = refined[u];
            if (!seen[r]) {
                seen[r] = 1;
                touched.push_back(r);
            }
            weight_to[r] += w;
        }
        options.clear();
        options.emplace_back(rv, 0.0);
        double max_gain = 0.0;
        for (std::uint32_t r : touched) {
            if (r == rv) continue;
            if (ext[r] < gamma * rtot[r] * (ctot[c] - rtot[r]) / two_m) continue;
            const double gain = weight_to[r] - gamma * k * rtot[r] / two_m;
            if (gain < 0.0) continue;
            options.emplace_back(r, gain);
            max_gain = std::max(max_gain, gain);
        }
        std::uint32_t chosen = rv;
        if (options.size() > 1) {
            std::sort(options.begin() + 1, options.end());
            double total = 0.0;
            for (auto& [r, gain] : options) {
                gain = std::exp((gain - max_gain) / theta);
                total += gain;
            }
            double pick = rng.uniform() * total;
            chosen = options.back().first;
            for (const auto& [r, p] : options) {
                if (pick < p) {
                    chosen = r;
                    break;
                }
                pick -= p;
            }
        }
        if (chosen != rv) {
            ext[chosen] = ext[chosen] + ext[rv] - 2.0 * weight_to[chosen];
            rtot[chosen] += k;
            ++rsize[chosen];
            rtot[rv] = 0.0;
            rsize[rv] = 0;
            refined[v] = chosen;
        }
        for (std::uint32_t r : touched) {
            weight_to[r] = 0.0;
            seen[r] = 0;
        }
    }
    return refined;
}

// Collapses groups (labels 0..k-1) into single nodes.
AggGraph aggregate(const AggGraph& g, const std::vector<std::uint32_t>& group, std::uint32_t k) {
    AggGraph a;
    a.adj.resize(k);
    a.self.assign(k, 0.0);
    a.degree.assign(k, 0.0);
    std::vector<std::map<std::uint32_t, double>> links(k);
    for (std::uint32_t v = 0; v < g.size(); ++v) {
        const std::uint32_t gv = group[v];
        a.self[gv] += g.self[v];
        a.degree[gv] += g.degree[v];
        for (const auto& [u, w] : g.adj[v]) {
            const std::uint32_t gu = group[u];
            if (gu == gv) {
                if (v < u) a.self[gv] += w;
            } else {
                links[gv][gu] += w;
            }
        }
    }
    for (std::uint32_t x = 0; x < k; ++x) a.adj[x].assign(links[x].begin(), links[x].end());
    return a;
}

std::vector<std::uint32_t> leiden_once(const WeightedGraph& graph, const LeidenOptions& opt, Rng& rng) {
    const double two_m = 2.0 * graph.total_weight();
    AggGraph g = from_graph(graph);
    std::vector<std::uint32_t> membership(graph.size());
    std::iota(membership.begin(), membership.end(), 0u);
    std::vector<std::uint32_t> comm(graph.size());
    std::iota(comm.begin(), comm.end(), 0u);

    while (true) {
        LocalMover(g, two_m, opt.resolution).run(comm, rng);
        const std::uint32_t communities = compact(comm);
        if (communities == g.size()) break;

        std::vector<std::uint32_t> group = refine(g, comm, two_m, opt.resolution, opt.theta, rng);
        std::uint32_t groups = compact(group);
        if (groups == g.size()) {
            // refinement merged nothing; aggregate on the coarse partition
            group = comm;
            groups = communities;
        }
        AggGraph next = aggregate(g, group, groups);
        std::vector<std::uint32_t> next_comm(groups);
        for (std::uint32_t v = 0; v < g.size(); ++v) next_comm[group[v]] = comm[v];
        for (auto& m : membership) m = group[m];
        g = std::move(next);
        comm = std::move(next_comm);
        compact(comm);
    }
    std::vector<std::uint32_t> out(graph.size());
    for (std::uint32_t v = 0; v < graph.size(); ++v) out[v] = comm[membership[v]];
    compact(out);
    return out;
}

// Greedy merge of the adjacent community pair with the largest positive gain,
// repeated until none improves.
bool merge_pass(const WeightedGraph& graph, std::vector<std::uint32_t>& comm, double gamma) {
    const double two_m = 2.0 * graph.total_weight();
    bool any = false;
    while (true) {
        const std::uint32_t k = compact(comm);
        std::vector<double> tot(k, 0.0);
        std::map<std::pair<std::uint32_t, std::uint32_t>, double> between;
        for (std::uint32_t v = 0; v < graph.size(); ++v) {
            for (const auto& [u, w] : graph.neighbors(v)) {
                tot[comm[v]] += w;
                if (comm[u] != comm[v] && v < u) {
                    between[{std::min(comm[u], comm[v]), std::max(comm[u], comm[v])}] += w;
                }
            }
        }
        double best_gain = kEps;
        std::pair<std::uint32_t, std::uint32_t> best{0, 0};
        bool found = false;
        for (const auto& [pair, w] : between) {
            const double gain = w - gamma * tot[pair.first] * tot[pair.second] / two_m;
            if (gain > best_gain) {
                best_gain = gain;
                best = pair;
                found = true;
            }
        }
        if (!found) return any;
        for (auto& c : comm) {
            if (c == best.second) c = best.first;
        }
        any = true;
    }
}

std::vector<std::uint32_t> polish(const WeightedGraph& graph, std::vector<std::uint32_t> comm, double gamma, Rng& rng) {
    const AggGraph g = from_graph(graph);
    const double two_m = 2.0 * graph.total_weight();
    for (int round = 0; round < 64; ++round) {
        const bool moved = LocalMover(g, two_m, gamma).run(comm, rng);
        compact(comm);
        const bool merged = merge_pass(graph, comm, gamma);
        if (!moved && !merged) break;
    }
    compact(comm);
    return comm;
}

} // namespace

Partition leiden(const WeightedGraph& g, const LeidenOptions& options) {
    if (g.total_weight() <= 0.0) throw Error(ErrorCode::EmptyGraph, "Leiden on a graph without edges");
    Partition best;
    best.modularity = -std::numeric_limits<double>::infinity();
    const int runs = std::max(1, options.restarts);
    for (int r = 0; r < runs; ++r) {
        Rng rng(mix_seed(options.seed + static_cast<std::uint64_t>(r)));
        auto comm = polish(g, leiden_once(g, options, rng), options.resolution, rng);
        const double q = modularity(g, comm, options.resolution);
        if (q > best.modularity + 1e-12) {
            best.assignment = std::move(comm);
            best.modularity = q;
        }
    }
    best.undersized.assign(best.community_count(), false);
    return best;
}

// --------------------------------------------------------- constraint repair

namespace {

class Repair {
public:
    Repair(const WeightedGraph& g, int delta_min, int delta_max, std::uint64_t seed)
        : g_(g), min_(static_cast<std::size_t>(delta_min)), max_(static_cast<std::size_t>(delta_max)), seed_(seed) {}

    // Merges groups below delta_min into their best neighbour. Groups with no
    // neighbour stay and are reported via `stuck`. When `cap` is set only
    // neighbours with room are eligible.
    void merge_undersized(std::vector<std::vector<std::uint32_t>>& groups, bool cap, std::vector<bool>& stuck) const {
        while (true) {
            std::vector<std::uint32_t> label(g_.size(), std::numeric_limits<std::uint32_t>::max());
            std::vector<double> tot(groups.size(), 0.0);
            for (std::uint32_t c = 0; c < groups.size(); ++c) {
                for (std::uint32_t v : groups[c]) {
                    label[v] = c;
                    tot[c] += g_.degree(v);
                }
            }
            stuck.assign(groups.size(), false);
            bool merged = false;
            for (std::uint32_t c = 0; c < groups.size() && !merged; ++c) {
                if (groups[c].size() >= min_) continue;
                std::map<std::uint32_t, double> weight_to;
                for (std::uint32_t v : groups[c]) {
                    for (const auto& [u, w] : g_.neighbors(v)) {
                        const std::uint32_t d = label[u];
                        if (d != c && d != std::numeric_limits<std::uint32_t>::max()) weight_to[d] += w;
                    }
                }
                std::optional<std::uint32_t> best;
                double best_gain = -std::numeric_limits<double>::infinity();
                for (const auto& [d, w] : weight_to) {
                    if (cap && groups[c].size() + groups[d].size() > max_) continue;
                    const double gain = w - tot[c] * tot[d] / (2.0 * g_.total_weight());
                    if (gain > best_gain + kEps) {
                        best_gain = gain;
                        best = d;
                    }
                }
                if (!best) {
                    stuck[c] = true;
                    continue;
                }
                auto& into = groups[*best];
                into.insert(into.end(), groups[c].begin(), groups[c].end());
                std::sort(into.begin(), into.end());
                groups.erase(groups.begin() + c);
                merged = true;
            }
            if (!merged) return;
        }
    }

    std::vector<std::vector<std::uint32_t>> split(const std::vector<std::uint32_t>& members, int depth) const {
        if (members.size() <= max_) return {members};
        const WeightedGraph sub = g_.induced(members);
        std::vector<std::vector<std::uint32_t>> pieces;
        if (sub.total_weight() > 0.0 && depth < 16) {
            LeidenOptions opt;
            opt.seed = seed_ + static_cast<std::uint64_t>(depth) * 7919u + members.front();
            opt.restarts = 2;
            const Partition p = leiden(sub, opt);
            for (const auto& local : p.communities()) {
                std::vector<std::uint32_t> piece;
                for (std::uint32_t x : local) piece.push_back(members[x]);
                pieces.push_back(std::move(piece));
            }
        }
        if (pieces.size() > 1) {
            std::vector<bool> stuck;
            merge_undersized(pieces, true, stuck);
            const bool ok = pieces.size() > 1 && std::all_of(pieces.begin(), pieces.end(), [this](const auto& p) {
                                return p.size() >= min_;
                            });
            if (ok) {
                std::vector<std::vector<std::uint32_t>> out;
                for (const auto& p : pieces) {
                    for (auto& q : split(p, depth + 1)) out.push_back(std::move(q));
                }
                return out;
            }
        }
        return chunk(members, sub);
    }

private:
    // Balanced contiguous chunks of a BFS order over the induced subgraph.
    std::vector<std::vector<std::uint32_t>> chunk(const std::vector<std::uint32_t>& members,
                                                  const WeightedGraph& sub) const {
        std::vector<std::uint32_t> order;
        std::vector<char> seen(sub.size(), 0);
        for (std::uint32_t s = 0; s < sub.size(); ++s) {
            if (seen[s]) continue;
            std::deque<std::uint32_t> q{s};
            seen[s] = 1;
            while (!q.empty()) {
                const std::uint32_t v = q.front();
                q.pop_front();
                order.push_back(v);
                auto nb = sub.neighbors(v);
                std::sort(nb.begin(), nb.end());
                for (const auto& [u, w] : nb) {
                    if (!seen[u]) {
                        seen[u] = 1;
                        q.push_back(u);
                    }
                }
            }
        }
        const std::size_t n = order.size();
        const std::size_t k = (n + max_ - 1) / max_;
        std::vector<std::vector<std::uint32_t>> out(k);
        std::size_t pos = 0;
        for (std::size_t i = 0; i < k; ++i) {
            const std::size_t len = n / k + (i < n % k ? 1 : 0);
            for (std::size_t j = 0; j < len; ++j) out[i].push_back(members[order[pos++]]);
            std::sort(out[i].begin(), out[i].end());
        }
        return out;
    }

    const WeightedGraph& g_;
    std::size_t min_;
    std::size_t max_;
    std::uint64_t seed_;
};

} // namespace

Partition leiden_partition(const WeightedGraph& g, int delta_min, int delta_max, std::uint64_t seed) {
    if (delta_min < 1 || delta_max < 2 * delta_min - 1) {
        throw Error(ErrorCode::InvalidConfig, "leiden_partition requires 1 <= delta_min and delta_max >= 2*delta_min-1");
    }
    LeidenOptions opt;
    opt.seed = seed;
    const Partition base = leiden(g, opt);
    auto groups = base.communities();

    const Repair repair(g, delta_min, delta_max, seed);
    std::vector<bool> stuck;
    repair.merge_undersized(groups, false, stuck);

    std::vector<std::vector<std::uint32_t>> final_groups;
    std::vector<bool> undersized;
    for (std::size_t c = 0; c < groups.size(); ++c) {
        for (auto& piece : repair.split(groups[c], 0)) {
            undersized.push_back(stuck[c]);
            final_groups.push_back(std::move(piece));
        }
    }
    std::sort(final_groups.begin(), final_groups.end());  // groups are disjoint and sorted: orders by first vertex

    Partition out;
    out.assignment.assign(g.size(), 0);
    out.undersized.assign(final_groups.size(), false);
    for (std::uint32_t c = 0; c < final_groups.size(); ++c) {
        for (std::uint32_t v : final_groups[c]) out.assignment[v] = c;
        out.undersized[c] = final_groups[c].size() < static_cast<std::size_t>(delta_min);
    }
    out.modularity = modularity(g, out.assignment);
    return out;
}

// --------------------------------------------------------------- evolution

KeywordGraph keyword_graph(const MemoryGraph& mg) {
    std::map<KeywordId, std::uint32_t> index;
    for (const auto& [pair, count] : mg.co_occurrence()) {
        index.emplace(pair.first, 0);
        index.emplace(pair.second, 0);
    }
    KeywordGraph kg;
    kg.graph = WeightedGraph(index.size());
    for (auto& [id, pos] : index) {
        pos = static_cast<std::uint32_t>(kg.keywords.size());
        kg.keywords.push_back(id);
    }
    for (const auto& [pair, count] : mg.co_occurrence()) {
        kg.graph.add_edge(index.at(pair.first), index.at(pair.second), static_cast<double>(count));
    }
    return kg;
}

std::size_t evolve_topics(MemoryGraph& g) {
    g.prune_orphan_keywords();
    if (g.co_occurrence().empty()) return g.topics().size();
    const KeywordGraph kg = keyword_graph(g);
    const auto& cfg = g.config();
    const Partition p = leiden_partition(kg.graph, cfg.delta_min, cfg.delta_max, cfg.leiden_seed);

    std::vector<Topic> topics;
    const auto groups = p.communities();
    for (std::size_t c = 0; c < groups.size(); ++c) {
        Topic t;
        Vector mean(g.dim(), 0.0);
        for (std::uint32_t v : groups[c]) {
            const KeywordId k = kg.keywords[v];
            t.members.insert(k);
            const auto& e = g.keyword(k).embedding;
            for (std::size_t i = 0; i < mean.size(); ++i) mean[i] += e[i];
        }
        t.centroid = std::move(mean);
        if (l2_norm(t.centroid) == 0.0) continue;  // members cancel out exactly; leave them topic-less
        t.undersized_component = p.undersized[c];
        topics.push_back(std::move(t));
    }
    g.replace_topics(std::move(topics));
    return g.topics().size();
}

} // namespace memfly
