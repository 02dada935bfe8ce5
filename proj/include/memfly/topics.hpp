#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <utility>
#include <vector>

#include "memfly/ids.hpp"

namespace memfly {

class MemoryGraph;

/// Undirected weighted graph on vertices 0..n-1 without self-loops.
class WeightedGraph {
public:
    using Neighbor = std::pair<std::uint32_t, double>;

    explicit WeightedGraph(std::size_t n = 0) : adj_(n) {}

    /// Adds w to edge {u, v}. Throws SelfLoop for u == v, Precondition for
    /// w <= 0 or out-of-range vertices.
    void add_edge(std::uint32_t u, std::uint32_t v, double w = 1.0);

    std::size_t size() const noexcept { return adj_.size(); }
    const std::vector<Neighbor>& neighbors(std::uint32_t v) const { return adj_[v]; }
    double degree(std::uint32_t v) const;
    /// m: sum of edge weights, each edge counted once.
    double total_weight() const noexcept { return total_; }
    std::size_t edge_count() const noexcept { return edges_; }

    WeightedGraph induced(std::span<const std::uint32_t> vertices) const;

private:
    std::vector<std::vector<Neighbor>> adj_;
    double total_ = 0.0;
    std::size_t edges_ = 0;
};

struct Partition {
    /// Community label per vertex, labels 0..count-1 numbered by first vertex.
    std::vector<std::uint32_t> assignment;
    double modularity = 0.0;
    /// Communities that are a whole connected component below delta_min
    /// (only filled by leiden_partition).
    std::vector<bool> undersized;

    std::size_t community_count() const;
    std::vector<std::vector<std::uint32_t>> communities() const;
};

/// Newman-Girvan weighted modularity
///   Q = sum_c [ in_c / 2m - gamma * (tot_c / 2m)^2 ]
/// with in_c counting each internal edge twice. Throws EmptyGraph when m = 0
/// and Precondition when assignment does not cover every vertex.
double modularity(const WeightedGraph& g, std::span<const std::uint32_t> assignment, double resolution = 1.0);

struct LeidenOptions {
    std::uint64_t seed = 42;
    double resolution = 1.0;
    double theta = 0.01;   // refinement randomness
    int restarts = 8;      // independent runs; best modularity wins
};

/// Unconstrained Leiden: fast local moving, refinement, aggregation until
/// stable, then a greedy polish over single-vertex moves and community merges.
/// Deterministic for a given seed. Throws EmptyGraph without edges.
Partition leiden(const WeightedGraph& g, const LeidenOptions& options = {});

/// Leiden followed by cardinality repair: communities smaller than delta_min
/// are merged into the adjacent community with the best modularity gain,
/// then communities larger than delta_max are split by recursive Leiden on
/// their induced subgraph. A community with no neighbours that stays below
/// delta_min is flagged in Partition::undersized. Requires
/// delta_max >= 2 * delta_min - 1 so splits can always satisfy both bounds.
Partition leiden_partition(const WeightedGraph& g, int delta_min, int delta_max, std::uint64_t seed);

/// Keyword co-occurrence graph: vertices are keywords with at least one edge,
/// ordered by id.
struct KeywordGraph {
    WeightedGraph graph;
    std::vector<KeywordId> keywords;
};
KeywordGraph keyword_graph(const MemoryGraph& g);

/// Re-partitions the co-occurrence graph into topics and recomputes centroids.
/// Prunes keywords without notes first. No-op (returns the current count)
/// when there are no co-occurrence edges.
std::size_t evolve_topics(MemoryGraph& g);

} // namespace memfly
