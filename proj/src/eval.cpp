#include "memfly/eval.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <set>
#include <sstream>

#include "memfly/error.hpp"
#include "memfly/text.hpp"
#include "memfly/topics.hpp"

namespace memfly {

std::string_view to_string(Category c) noexcept {
    switch (c) {
    case Category::MultiHop: return "multi_hop";
    case Category::Temporal: return "temporal";
    case Category::OpenDomain: return "open_domain";
    case Category::SingleHop: return "single_hop";
    case Category::Adversarial: return "adversarial";
    }
    return "single_hop";
}

std::optional<Category> category_from_string(std::string_view s) {
    std::string norm;
    for (char ch : s) {
        if (ch == '-' || ch == ' ') ch = '_';
        norm.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(ch))));
    }
    for (Category c : kAllCategories) {
        if (to_string(c) == norm) return c;
    }
    if (norm == "multihop") return Category::MultiHop;
    if (norm == "singlehop") return Category::SingleHop;
    if (norm == "opendomain") return Category::OpenDomain;
    return std::nullopt;
}

const std::map<Category, int>& locomo_category_counts() {
    static const std::map<Category, int> counts{
        {Category::SingleHop, 841}, {Category::Adversarial, 446}, {Category::Temporal, 321},
        {Category::MultiHop, 282},  {Category::OpenDomain, 96},
    };
    return counts;
}

// ------------------------------------------------------------------- dataset

void ConversationDataset::validate() const {
    std::set<std::string> ids;
    for (const auto& s : sessions) {
        for (const auto& t : s.turns) {
            if (t.turn_id.empty()) throw Error(ErrorCode::DatasetFormat, "turn without turn_id in " + s.session_id);
            if (!ids.insert(t.turn_id).second) throw Error(ErrorCode::DatasetFormat, "duplicate turn_id " + t.turn_id);
        }
    }
    for (std::size_t i = 0; i < qa_pairs.size(); ++i) {
        for (const auto& e : qa_pairs[i].evidence_turn_ids) {
            if (!ids.contains(e)) {
                throw Error(ErrorCode::DatasetFormat,
                            "question " + std::to_string(i) + " cites unknown turn " + e);
            }
        }
    }
}

std::size_t ConversationDataset::turn_count() const {
    std::size_t n = 0;
    for (const auto& s : sessions) n += s.turns.size();
    return n;
}

namespace {

std::string required_string(const nlohmann::json& j, const char* key, const std::string& where) {
    auto it = j.find(key);
    if (it == j.end() || !it->is_string()) {
        throw Error(ErrorCode::DatasetFormat, where + ": missing string field '" + key + "'");
    }
    return it->get<std::string>();
}

std::string optional_string(const nlohmann::json& j, const char* key) {
    auto it = j.find(key);
    if (it == j.end() || it->is_null()) return {};
    if (it->is_string()) return it->get<std::string>();
    return it->dump();
}

std::string read_file(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    if (!in) throw Error(ErrorCode::Io, "cannot read " + p.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

} // namespace

ConversationDataset parse_dataset(const std::vector<std::pair<std::string, std::string>>& sessions_jsonl,
                                  const std::string& qa_json) {
    ConversationDataset ds;
    for (const auto& [session_id, body] : sessions_jsonl) {
        Session s;
        s.session_id = session_id;
        std::istringstream lines(body);
        std::string line;
        std::size_t lineno = 0;
        while (std::getline(lines, line)) {
            ++lineno;
            if (text::trim(line).empty()) continue;
            const std::string where = session_id + ":" + std::to_string(lineno);
            nlohmann::json j;
            try {
                j = nlohmann::json::parse(line);
            } catch (const nlohmann::json::exception& e) {
                throw Error(ErrorCode::DatasetFormat, where + ": " + e.what());
            }
            if (!j.is_object()) throw Error(ErrorCode::DatasetFormat, where + ": expected an object");
            Turn t;
            t.speaker = required_string(j, "speaker", where);
            t.text = required_string(j, "text", where);
            t.turn_id = required_string(j, "turn_id", where);
            t.date = optional_string(j, "date");
            s.turns.push_back(std::move(t));
        }
        ds.sessions.push_back(std::move(s));
    }

    nlohmann::json qa;
    try {
        qa = nlohmann::json::parse(qa_json);
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::DatasetFormat, std::string("qa: ") + e.what());
    }
    if (!qa.is_array()) throw Error(ErrorCode::DatasetFormat, "qa: expected an array");
    for (std::size_t i = 0; i < qa.size(); ++i) {
        const auto& j = qa[i];
        const std::string where = "qa[" + std::to_string(i) + "]";
        if (!j.is_object()) throw Error(ErrorCode::DatasetFormat, where + ": expected an object");
        QaPair p;
        p.question = required_string(j, "question", where);
        if (auto it = j.find("gold_answer"); it != j.end() && !it->is_string() && !it->is_null()) {
            p.gold_answer = it->dump();
        } else {
            p.gold_answer = required_string(j, "gold_answer", where);
        }
        const std::string cat = required_string(j, "category", where);
        auto c = category_from_string(cat);
        if (!c) throw Error(ErrorCode::DatasetFormat, where + ": unknown category '" + cat + "'");
        p.category = *c;
        if (auto it = j.find("evidence_turn_ids"); it != j.end()) {
            if (!it->is_array()) throw Error(ErrorCode::DatasetFormat, where + ": evidence_turn_ids must be an array");
            for (const auto& e : *it) {
                if (!e.is_string()) throw Error(ErrorCode::DatasetFormat, where + ": evidence ids must be strings");
                p.evidence_turn_ids.push_back(e.get<std::string>());
            }
        }
        ds.qa_pairs.push_back(std::move(p));
    }
    ds.validate();
    return ds;
}

ConversationDataset load_dataset(const std::filesystem::path& dir) {
    const auto sessions_dir = dir / "sessions";
    if (!std::filesystem::is_directory(sessions_dir)) {
        throw Error(ErrorCode::Io, "no sessions directory under " + dir.string());
    }
    std::vector<std::filesystem::path> files;
    for (const auto& entry : std::filesystem::directory_iterator(sessions_dir)) {
        if (entry.is_regular_file() && entry.path().extension() == ".jsonl") files.push_back(entry.path());
    }
    std::sort(files.begin(), files.end());
    std::vector<std::pair<std::string, std::string>> sessions;
    for (const auto& f : files) sessions.emplace_back(f.stem().string(), read_file(f));
    return parse_dataset(sessions, read_file(dir / "qa.json"));
}

// ------------------------------------------------------------------- metrics

namespace metrics {

std::vector<std::string> normalize_tokens(std::string_view s) {
    std::vector<std::string> out;
    std::string cur;
    for (char ch : s) {
        const auto u = static_cast<unsigned char>(ch);
        if (u < 128 && std::ispunct(u)) continue;
        if (std::isspace(u)) {
            if (!cur.empty()) out.push_back(std::move(cur));
            cur.clear();
            continue;
        }
        cur.push_back(static_cast<char>(std::tolower(u)));
    }
    if (!cur.empty()) out.push_back(std::move(cur));
    return out;
}

namespace {

std::size_t clipped_overlap(const std::vector<std::string>& pred, const std::vector<std::string>& gold) {
    std::map<std::string, int> g;
    for (const auto& t : gold) ++g[t];
    std::size_t overlap = 0;
    for (const auto& t : pred) {
        auto it = g.find(t);
        if (it != g.end() && it->second > 0) {
            --it->second;
            ++overlap;
        }
    }
    return overlap;
}

} // namespace

double token_f1(std::string_view prediction, std::string_view gold) {
    const auto p = normalize_tokens(prediction);
    const auto g = normalize_tokens(gold);
    if (p.empty() && g.empty()) return 1.0;
    if (p.empty() || g.empty()) return 0.0;
    const auto overlap = static_cast<double>(clipped_overlap(p, g));
    if (overlap == 0.0) return 0.0;
    const double precision = overlap / static_cast<double>(p.size());
    const double recall = overlap / static_cast<double>(g.size());
    return 2.0 * precision * recall / (precision + recall);
}

double bleu1(std::string_view prediction, std::string_view gold) {
    const auto p = normalize_tokens(prediction);
    const auto g = normalize_tokens(gold);
    if (p.empty()) return 0.0;
    const double precision = static_cast<double>(clipped_overlap(p, g)) / static_cast<double>(p.size());
    const double bp = std::exp(std::min(0.0, 1.0 - static_cast<double>(g.size()) / static_cast<double>(p.size())));
    return precision * bp;
}

double retrieval_recall(std::span<const std::string> retrieved, std::span<const std::string> gold) {
    const std::set<std::string> g(gold.begin(), gold.end());
    if (g.empty()) return 1.0;
    const std::set<std::string> r(retrieved.begin(), retrieved.end());
    std::size_t found = 0;
    for (const auto& x : g) found += r.count(x);
    return static_cast<double>(found) / static_cast<double>(g.size());
}

double hit_rate(std::span<const std::string> retrieved, std::span<const std::string> gold) {
    if (gold.empty()) return 1.0;
    const std::set<std::string> r(retrieved.begin(), retrieved.end());
    for (const auto& x : gold) {
        if (r.contains(x)) return 1.0;
    }
    return 0.0;
}

double js_divergence(std::span<const double> p, std::span<const double> q) {
    if (p.size() != q.size() || p.empty()) throw Error(ErrorCode::Precondition, "distributions differ in support size");
    auto check = [](std::span<const double> d) {
        double sum = 0.0;
        for (double x : d) {
            if (x < 0.0 || !std::isfinite(x)) throw Error(ErrorCode::Precondition, "negative or non-finite probability");
            sum += x;
        }
        if (std::abs(sum - 1.0) > 1e-9) throw Error(ErrorCode::Precondition, "probabilities do not sum to 1");
    };
    check(p);
    check(q);
    double js = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) {
        const double m = 0.5 * (p[i] + q[i]);
        if (p[i] > 0.0) js += 0.5 * p[i] * std::log2(p[i] / m);
        if (q[i] > 0.0) js += 0.5 * q[i] * std::log2(q[i] / m);
    }
    return std::clamp(js, 0.0, 1.0);
}

namespace {

std::vector<double> average_ranks(std::span<const double> x) {
    std::vector<std::size_t> order(x.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return x[a] < x[b]; });
    std::vector<double> ranks(x.size());
    std::size_t i = 0;
    while (i < order.size()) {
        std::size_t j = i;
        while (j + 1 < order.size() && x[order[j + 1]] == x[order[i]]) ++j;
        const double r = 0.5 * static_cast<double>(i + j) + 1.0;
        for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = r;
        i = j + 1;
    }
    return ranks;
}

} // namespace

double spearman(std::span<const double> x, std::span<const double> y) {
    if (x.size() != y.size() || x.size() < 2) throw Error(ErrorCode::Precondition, "spearman needs two equal samples");
    const auto rx = average_ranks(x);
    const auto ry = average_ranks(y);
    const double n = static_cast<double>(x.size());
    double mx = 0.0, my = 0.0;
    for (std::size_t i = 0; i < rx.size(); ++i) {
        mx += rx[i];
        my += ry[i];
    }
    mx /= n;
    my /= n;
    double sxy = 0.0, sxx = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < rx.size(); ++i) {
        sxy += (rx[i] - mx) * (ry[i] - my);
        sxx += (rx[i] - mx) * (rx[i] - mx);
        syy += (ry[i] - my) * (ry[i] - my);
    }
    if (sxx == 0.0 || syy == 0.0) return 0.0;
    return sxy / std::sqrt(sxx * syy);
}

} // namespace metrics

// ---------------------------------------------------------------- ablations

IngestOptions AblationConfig::ingest_options() const {
    IngestOptions o;
    o.disable_update = disable_update;
    o.disable_denoise = disable_denoise;
    o.disable_link = disable_link;
    o.disable_merge = disable_merge;
    return o;
}

RetrievalSwitches AblationConfig::retrieval_switches() const {
    return RetrievalSwitches{disable_topic_pathway, disable_keyword_pathway, disable_neighbor, disable_ier};
}

std::string AblationConfig::label() const {
    std::vector<std::string> parts;
    if (disable_update) parts.push_back("no-update");
    if (disable_denoise) parts.push_back("no-denoise");
    if (disable_link) parts.push_back("no-link");
    if (disable_merge) parts.push_back("no-merge");
    if (disable_topic_pathway) parts.push_back("no-topic");
    if (disable_keyword_pathway) parts.push_back("no-keyword");
    if (disable_neighbor) parts.push_back("no-neighbor");
    if (disable_ier) parts.push_back("no-ier");
    return parts.empty() ? "full" : text::join(parts, "+");
}

// ----------------------------------------------------------------- benchmark

namespace {

nlohmann::ordered_json scores_json(const Scores& s) {
    return {{"count", s.count}, {"f1", s.f1}, {"bleu1", s.bleu1}, {"recall", s.recall}, {"hit_rate", s.hit_rate}};
}

} // namespace

nlohmann::ordered_json EvalReport::to_json() const {
    nlohmann::ordered_json j;
    j["ablation"] = ablation.label();
    nlohmann::ordered_json cats = nlohmann::ordered_json::object();
    for (Category c : kAllCategories) {
        if (auto it = per_category.find(c); it != per_category.end()) cats[std::string(to_string(c))] = scores_json(it->second);
    }
    j["per_category"] = cats;
    j["weighted"] = scores_json(weighted);
    j["diagnostics"] = {
        {"inputs_seen", diagnostics.inputs_seen},
        {"note_count", diagnostics.note_count},
        {"merge_total", diagnostics.merge_total},
        {"link_total", diagnostics.link_total},
        {"append_total", diagnostics.append_total},
        {"compression_ratio", diagnostics.compression_ratio},
        {"mean_keywords_per_note", diagnostics.mean_keywords_per_note},
        {"related_edge_count", diagnostics.related_edge_count},
        {"keyword_count", diagnostics.keyword_count},
        {"topic_count", diagnostics.topic_count},
    };
    auto qs = nlohmann::ordered_json::array();
    for (const auto& q : questions) {
        nlohmann::ordered_json r;
        r["index"] = q.index;
        r["category"] = std::string(to_string(q.category));
        r["question"] = q.question;
        r["gold_answer"] = q.gold_answer;
        r["prediction"] = q.prediction;
        r["f1"] = q.f1;
        r["bleu1"] = q.bleu1;
        r["recall"] = q.recall;
        r["hit_rate"] = q.hit_rate;
        r["pool_size"] = q.pool_size;
        r["iterations"] = q.iterations;
        r["error"] = q.error ? nlohmann::ordered_json(*q.error) : nlohmann::ordered_json(nullptr);
        qs.push_back(std::move(r));
    }
    j["questions"] = std::move(qs);
    return j;
}

std::string EvalReport::to_table() const {
    std::ostringstream out;
    out << "ablation: " << ablation.label() << "\n";
    out << std::left << std::setw(14) << "category" << std::right << std::setw(7) << "n" << std::setw(9) << "F1"
        << std::setw(9) << "BLEU-1" << std::setw(9) << "Recall" << std::setw(9) << "HitRate" << "\n";
    auto row = [&](std::string_view name, const Scores& s) {
        out << std::left << std::setw(14) << name << std::right << std::setw(7) << s.count << std::fixed
            << std::setprecision(4) << std::setw(9) << s.f1 << std::setw(9) << s.bleu1 << std::setw(9) << s.recall
            << std::setw(9) << s.hit_rate << "\n";
    };
    for (Category c : kAllCategories) {
        if (auto it = per_category.find(c); it != per_category.end()) row(to_string(c), it->second);
    }
    row("weighted", weighted);
    return out.str();
}

EvalReport run_benchmark(const ConversationDataset& dataset, const EngineConfig& config,
                         const AblationConfig& ablation, const Policy& policy, const EmbeddingProvider& embedder) {
    dataset.validate();
    MemoryGraph g(config);
    IngestOptions ingest_opts = ablation.ingest_options();
    for (const auto& session : dataset.sessions) {
        for (const auto& turn : session.turns) {
            ingest_opts.turn_id = turn.turn_id;
            ingest_opts.date = turn.date;
            ingest(g, turn.text, turn.speaker, policy, embedder, ingest_opts);
        }
    }
    evolve_topics(g);

    EvalReport report;
    report.ablation = ablation;
    report.diagnostics = ib_diagnostics(g, dataset.turn_count());
    const RetrievalSwitches switches = ablation.retrieval_switches();

    for (std::size_t i = 0; i < dataset.qa_pairs.size(); ++i) {
        const QaPair& qa = dataset.qa_pairs[i];
        QuestionRecord rec;
        rec.index = i;
        rec.question = qa.question;
        rec.gold_answer = qa.gold_answer;
        rec.category = qa.category;
        try {
            const RetrievalResult rr = retrieve_iterative(g, qa.question, policy, embedder, switches);
            const double temperature =
                qa.category == Category::Adversarial ? config.temperature_adversarial : config.temperature_general;
            const auto contexts = pool_contexts(g, rr.pool);
            rec.prediction = policy.answer(qa.question, render_pool(g, rr.pool), contexts, temperature);
            const auto turns = pool_turn_ids(g, rr.pool);
            rec.recall = metrics::retrieval_recall(turns, qa.evidence_turn_ids);
            rec.hit_rate = metrics::hit_rate(turns, qa.evidence_turn_ids);
            rec.f1 = metrics::token_f1(rec.prediction, qa.gold_answer);
            rec.bleu1 = metrics::bleu1(rec.prediction, qa.gold_answer);
            rec.pool_size = rr.pool.ranked.size();
            rec.iterations = rr.pool.iteration;
        } catch (const Error& e) {
            rec.error = e.what();
        }
        report.questions.push_back(std::move(rec));
    }

    std::map<Category, Scores> sums;
    for (const auto& q : report.questions) {
        Scores& s = sums[q.category];
        ++s.count;
        s.f1 += q.f1;
        s.bleu1 += q.bleu1;
        s.recall += q.recall;
        s.hit_rate += q.hit_rate;
    }
    std::map<Category, double> counts, f1, bleu, recall, hit;
    for (auto& [c, s] : sums) {
        const auto n = static_cast<double>(s.count);
        s.f1 /= n;
        s.bleu1 /= n;
        s.recall /= n;
        s.hit_rate /= n;
        counts[c] = n;
        f1[c] = s.f1;
        bleu[c] = s.bleu1;
        recall[c] = s.recall;
        hit[c] = s.hit_rate;
    }
    report.per_category = sums;
    report.weighted.count = report.questions.size();
    report.weighted.f1 = metrics::weighted_average(f1, counts);
    report.weighted.bleu1 = metrics::weighted_average(bleu, counts);
    report.weighted.recall = metrics::weighted_average(recall, counts);
    report.weighted.hit_rate = metrics::weighted_average(hit, counts);
    return report;
}

} // namespace memfly
