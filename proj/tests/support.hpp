#pragma once

#include <algorithm>
#include <cmath>
#include <cstring>
#include <deque>
#include <functional>
#include <map>
#include <memory>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "memfly/construction.hpp"
#include "memfly/embedding.hpp"
#include "memfly/memory_graph.hpp"
#include "memfly/policy.hpp"
#include "memfly/retrieval.hpp"
#include "memfly/text.hpp"
#include "memfly/topics.hpp"

namespace testsupport {

using namespace memfly;

struct Mock {
    std::shared_ptr<HashEmbedder> embedder;
    std::shared_ptr<MockPolicy> policy;
    explicit Mock(std::size_t dim = 512, std::uint64_t seed = 0)
        : embedder(std::make_shared<HashEmbedder>(dim, seed)), policy(std::make_shared<MockPolicy>(embedder)) {}
};

inline EngineConfig config_with_dim(int dim) {
    EngineConfig c;
    c.embedding_dim = dim;
    return c;
}

// Stores a note with the given context and keyword surfaces, bypassing the
// policy. Keywords are embedded from their surface.
inline NoteId put_note(MemoryGraph& g, const EmbeddingProvider& e, const std::string& context,
                       const std::vector<std::string>& keywords, const std::string& turn_id = "") {
    Note n;
    n.raw.push_back(RawSegment{context, "S", turn_id.empty() ? "t" + std::to_string(g.clock() + 1) : turn_id, "",
                               g.tick()});
    n.context = context;
    n.embedding = e.embed(context);
    for (const auto& k : keywords) n.keywords.insert(g.upsert_keyword(k, e.embed(k)));
    return g.add_note(std::move(n));
}

inline Vector random_unit(std::mt19937_64& rng, std::size_t dim) {
    std::normal_distribution<double> gauss;
    Vector v(dim);
    for (double& x : v) x = gauss(rng);
    return normalized(std::move(v));
}

inline std::size_t below(std::mt19937_64& rng, std::size_t n) { return static_cast<std::size_t>(rng() % n); }

// ---- modularity oracles ----------------------------------------------------

// Straight formula over an explicit edge list, no shared code with the engine.
struct EdgeList {
    std::size_t n = 0;
    std::vector<std::tuple<std::uint32_t, std::uint32_t, double>> edges;
};

inline double formula_modularity(const EdgeList& g, const std::vector<std::uint32_t>& label) {
    double m = 0.0;
    std::vector<double> deg(g.n, 0.0);
    for (auto [u, v, w] : g.edges) {
        m += w;
        deg[u] += w;
        deg[v] += w;
    }
    double q = 0.0;
    for (auto [u, v, w] : g.edges) {
        if (label[u] == label[v]) q += 2.0 * w;
    }
    q /= 2.0 * m;
    std::map<std::uint32_t, double> tot;
    for (std::size_t i = 0; i < g.n; ++i) tot[label[i]] += deg[i];
    for (auto& [c, t] : tot) q -= (t / (2.0 * m)) * (t / (2.0 * m));
    return q;
}

// Enumerates every set partition via restricted growth strings.
inline double exhaustive_best_modularity(const EdgeList& g) {
    std::vector<std::uint32_t> a(g.n, 0);
    double best = -1.0;
    std::function<void(std::size_t, std::uint32_t)> rec = [&](std::size_t i, std::uint32_t maxlab) {
        if (i == g.n) {
            best = std::max(best, formula_modularity(g, a));
            return;
        }
        for (std::uint32_t c = 0; c <= maxlab + 1; ++c) {
            a[i] = c;
            rec(i + 1, std::max(maxlab, c));
        }
    };
    if (g.n == 0) return 0.0;
    rec(1, 0);
    return best;
}

inline WeightedGraph to_weighted(const EdgeList& e) {
    WeightedGraph g(e.n);
    for (auto [u, v, w] : e.edges) g.add_edge(u, v, w);
    return g;
}

inline bool connected(const EdgeList& g) {
    if (g.n == 0) return true;
    std::vector<std::vector<std::uint32_t>> adj(g.n);
    for (auto [u, v, w] : g.edges) {
        adj[u].push_back(v);
        adj[v].push_back(u);
    }
    std::vector<bool> seen(g.n, false);
    std::deque<std::uint32_t> q{0};
    seen[0] = true;
    std::size_t count = 1;
    while (!q.empty()) {
        auto x = q.front();
        q.pop_front();
        for (auto y : adj[x]) {
            if (!seen[y]) {
                seen[y] = true;
                ++count;
                q.push_back(y);
            }
        }
    }
    return count == g.n;
}

// Random connected graph: a random spanning tree plus extra edges.
inline EdgeList random_connected(std::mt19937_64& rng, std::size_t n, double extra_p, bool weighted) {
    EdgeList g;
    g.n = n;
    std::set<std::pair<std::uint32_t, std::uint32_t>> have;
    auto weight = [&] { return weighted ? 1.0 + static_cast<double>(below(rng, 4)) : 1.0; };
    for (std::uint32_t v = 1; v < n; ++v) {
        const auto u = static_cast<std::uint32_t>(below(rng, v));
        have.insert({u, v});
        g.edges.emplace_back(u, v, weight());
    }
    std::uniform_real_distribution<double> coin(0.0, 1.0);
    for (std::uint32_t u = 0; u < n; ++u) {
        for (std::uint32_t v = u + 1; v < n; ++v) {
            if (have.contains({u, v})) continue;
            if (coin(rng) < extra_p) {
                have.insert({u, v});
                g.edges.emplace_back(u, v, weight());
            }
        }
    }
    return g;
}

// ---- retrieval oracle ------------------------------------------------------

inline double plain_dot(const Vector& a, const Vector& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

inline void order(std::vector<std::pair<NoteId, double>>& r) {
    std::stable_sort(r.begin(), r.end(), [](const auto& a, const auto& b) {
        return a.second != b.second ? a.second > b.second : a.first < b.first;
    });
}

// BFS over the undirected related-edge relation, distance-bounded.
inline std::map<NoteId, int> bfs_distances(const MemoryGraph& g, NoteId src, int hops) {
    std::map<NoteId, int> dist{{src, 0}};
    std::deque<NoteId> q{src};
    while (!q.empty()) {
        NoteId x = q.front();
        q.pop_front();
        if (dist[x] == hops) continue;
        for (const auto& [e, _] : g.related_edges()) {
            NoteId y;
            if (e.first == x) {
                y = e.second;
            } else if (e.second == x) {
                y = e.first;
            } else {
                continue;
            }
            if (!dist.contains(y)) {
                dist[y] = dist[x] + 1;
                q.push_back(y);
            }
        }
    }
    return dist;
}

// Straight-line retrieve_once: every ranking is an exhaustive scan over the
// tables, fusion is recomputed by hand.
inline Ranked<NoteId> reference_retrieve(const MemoryGraph& g, const QueryIntent& intent, const std::string& query,
                                         const EmbeddingProvider& e) {
    const EngineConfig& c = g.config();
    if (g.notes().empty()) return {};
    const std::string desc = text::trim(intent.topic_desc).empty() ? query : intent.topic_desc;
    const Vector ht = e.embed(desc);

    // topic pathway
    std::vector<std::pair<TopicId, double>> ts;
    for (const auto& [id, t] : g.topics()) ts.emplace_back(id, plain_dot(ht, t.centroid));
    std::stable_sort(ts.begin(), ts.end(), [](const auto& a, const auto& b) {
        return a.second != b.second ? a.second > b.second : a.first < b.first;
    });
    if (ts.size() > static_cast<std::size_t>(c.k_topic)) ts.resize(static_cast<std::size_t>(c.k_topic));
    std::map<NoteId, double> topic_best;
    for (const auto& [tid, s] : ts) {
        if (!(s > c.pathway_min_cosine)) continue;
        for (const auto& [nid, n] : g.notes()) {
            for (KeywordId k : n.keywords) {
                if (g.topic(tid).members.contains(k)) {
                    auto it = topic_best.find(nid);
                    if (it == topic_best.end() || it->second < s) topic_best[nid] = s;
                }
            }
        }
    }
    std::vector<std::pair<NoteId, double>> topic_list(topic_best.begin(), topic_best.end());
    order(topic_list);

    // keyword pathway
    std::map<KeywordId, double> kstar;
    for (const auto& kw : intent.keywords) {
        if (text::trim(kw).empty()) continue;
        const Vector hk = e.embed(kw);
        std::vector<std::pair<KeywordId, double>> ks;
        for (const auto& [id, k] : g.keywords()) ks.emplace_back(id, plain_dot(hk, k.embedding));
        std::stable_sort(ks.begin(), ks.end(), [](const auto& a, const auto& b) {
            return a.second != b.second ? a.second > b.second : a.first < b.first;
        });
        if (ks.size() > static_cast<std::size_t>(c.k_key)) ks.resize(static_cast<std::size_t>(c.k_key));
        for (const auto& [id, s] : ks) {
            if (!(s > c.pathway_min_cosine)) continue;
            if (!kstar.contains(id) || kstar[id] < s) kstar[id] = s;
        }
    }
    std::map<NoteId, double> key_best;
    for (const auto& [nid, n] : g.notes()) {
        for (KeywordId k : n.keywords) {
            if (!kstar.contains(k)) continue;
            if (!key_best.contains(nid) || key_best[nid] < kstar[k]) key_best[nid] = kstar[k];
        }
    }
    std::vector<std::pair<NoteId, double>> key_list(key_best.begin(), key_best.end());
    order(key_list);

    // fusion
    std::map<NoteId, double> fused_map;
    for (std::size_t r = 0; r < topic_list.size(); ++r) fused_map[topic_list[r].first] += 1.0 / (c.rrf_k + (r + 1.0));
    for (std::size_t r = 0; r < key_list.size(); ++r) fused_map[key_list[r].first] += 1.0 / (c.rrf_k + (r + 1.0));
    std::vector<std::pair<NoteId, double>> fused(fused_map.begin(), fused_map.end());
    order(fused);

    Ranked<NoteId> pool;
    for (std::size_t i = 0; i < fused.size() && i < static_cast<std::size_t>(c.k_final); ++i) pool.push_back(fused[i]);

    // expansion from every fused note, ordered by the best reaching anchor
    std::map<NoteId, double> origin;
    for (const auto& [a, s] : fused) {
        for (const auto& [n, d] : bfs_distances(g, a, c.expansion_hops)) {
            if (d == 0 || fused_map.contains(n)) continue;
            if (!origin.contains(n) || origin[n] < s) origin[n] = s;
        }
    }
    std::vector<std::pair<NoteId, double>> ex(origin.begin(), origin.end());
    order(ex);
    for (std::size_t i = 0; i < ex.size() && i < static_cast<std::size_t>(c.k_final); ++i) pool.emplace_back(ex[i].first, 0.0);
    return pool;
}

// Multiset of raw segments across the graph, as (turn_id, text).
inline std::multiset<std::pair<std::string, std::string>> raw_multiset(const MemoryGraph& g) {
    std::multiset<std::pair<std::string, std::string>> out;
    for (const auto& [id, n] : g.notes()) {
        for (const auto& r : n.raw) out.emplace(r.turn_id, r.text);
    }
    return out;
}

// Random transcript over a small vocabulary so merges and links both occur.
inline std::vector<std::pair<std::string, std::string>> random_transcript(std::mt19937_64& rng, std::size_t count) {
    static const std::vector<std::string> vocab = {
        "melanie", "caroline", "painting", "lake", "sunrise", "violin", "orchestra", "beagle", "puppy", "garden",
        "tomato", "basil", "museum", "dinosaur", "kayak", "pottery", "bakery", "sourdough", "hiking", "camper"};
    static const std::vector<std::string> fillers = {"I", "the", "a", "my", "we", "with", "at", "really", "and"};
    std::vector<std::string> said;
    std::vector<std::pair<std::string, std::string>> out;
    for (std::size_t i = 0; i < count; ++i) {
        std::string s;
        if (!said.empty() && below(rng, 5) == 0) {
            s = said[below(rng, said.size())];  // verbatim repeat
        } else {
            const std::size_t words = 3 + below(rng, 6);
            for (std::size_t w = 0; w < words; ++w) {
                if (!s.empty()) s += ' ';
                s += below(rng, 3) == 0 ? fillers[below(rng, fillers.size())] : vocab[below(rng, vocab.size())];
            }
            if (below(rng, 10) == 0) s = "wow, that's cool!";
            said.push_back(s);
        }
        out.emplace_back(below(rng, 2) ? "Melanie" : "Caroline", s);
    }
    return out;
}


// Independent field-by-field equality; returns the names of differing parts.
inline std::vector<std::string> graph_differences(const MemoryGraph& a, const MemoryGraph& b) {
    std::vector<std::string> out;
    auto same_bits = [](const Vector& x, const Vector& y) {
        return x.size() == y.size() && std::memcmp(x.data(), y.data(), x.size() * sizeof(double)) == 0;
    };
    if (a.clock() != b.clock()) out.push_back("clock");
    if (!(a.config() == b.config())) out.push_back("config");
    if (!(a.counters() == b.counters())) out.push_back("counters");
    if (a.next_note_id() != b.next_note_id() || a.next_keyword_id() != b.next_keyword_id() ||
        a.next_topic_id() != b.next_topic_id())
        out.push_back("id counters");
    if (a.notes().size() != b.notes().size()) {
        out.push_back("note count");
    } else {
        for (auto ia = a.notes().begin(), ib = b.notes().begin(); ia != a.notes().end(); ++ia, ++ib) {
            const Note& x = ia->second;
            const Note& y = ib->second;
            if (ia->first != ib->first || !(x.raw == y.raw) || x.context != y.context || x.keywords != y.keywords ||
                x.merge_count != y.merge_count || x.created_at != y.created_at || x.updated_at != y.updated_at ||
                !same_bits(x.embedding, y.embedding))
                out.push_back("note " + std::to_string(ia->first.value));
        }
    }
    if (a.keywords().size() != b.keywords().size()) {
        out.push_back("keyword count");
    } else {
        for (auto ia = a.keywords().begin(), ib = b.keywords().begin(); ia != a.keywords().end(); ++ia, ++ib) {
            if (ia->second.surface != ib->second.surface || ia->second.note_refs != ib->second.note_refs ||
                ia->second.topic != ib->second.topic || !same_bits(ia->second.embedding, ib->second.embedding))
                out.push_back("keyword " + ia->second.surface);
        }
    }
    if (!(a.topics() == b.topics())) out.push_back("topics");
    if (!(a.related_edges() == b.related_edges())) out.push_back("related edges");
    if (!(a.co_occurrence() == b.co_occurrence())) out.push_back("co-occurrence");
    return out;
}

}  // namespace testsupport
