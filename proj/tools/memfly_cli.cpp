#include <CLI11.hpp>

#include <csignal>
#include <fstream>
#include <iostream>
#include <sstream>

#include "memfly/cli_config.hpp"
#include "memfly/construction.hpp"
#include "memfly/error.hpp"
#include "memfly/eval.hpp"
#include "memfly/retrieval.hpp"
#include "memfly/service.hpp"
#include "memfly/snapshot.hpp"
#include "memfly/text.hpp"
#include "memfly/topics.hpp"

namespace {

using namespace memfly;

constexpr int kExitOk = 0;
constexpr int kExitRuntime = 1;
constexpr int kExitUsage = 2;

struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct GlobalFlags {
    std::string config_file;
    std::vector<std::string> sets;
    std::string mode;
    std::string snapshot;
    std::string llm_url, llm_model, embed_url, embed_model;
};

CliConfig resolve(const GlobalFlags& f) {
    std::map<std::string, std::string> overrides;
    for (const auto& s : f.sets) {
        const auto eq = s.find('=');
        if (eq == std::string::npos || eq == 0) throw UsageError("--set expects KEY=VALUE, got '" + s + "'");
        overrides[s.substr(0, eq)] = s.substr(eq + 1);
    }
    auto put = [&](const char* key, const std::string& v) {
        if (!v.empty()) overrides[key] = v;
    };
    put("mode", f.mode);
    put("snapshot_path", f.snapshot);
    put("llm_base_url", f.llm_url);
    put("llm_model", f.llm_model);
    put("embed_base_url", f.embed_url);
    put("embed_model", f.embed_model);
    std::optional<std::filesystem::path> file;
    if (!f.config_file.empty()) file = f.config_file;
    return resolve_cli_config(file, process_env, overrides);
}

MemoryGraph open_graph(const CliConfig& cfg) {
    if (!cfg.snapshot_path.empty() && std::filesystem::exists(cfg.snapshot_path)) {
        MemoryGraph g = snapshot_load(cfg.snapshot_path);
        g.reconfigure(cfg.engine);
        return g;
    }
    return MemoryGraph(cfg.engine);
}

struct TranscriptLine {
    std::string speaker;
    std::string text;
    std::string turn_id;
    std::string date;
};

// JSONL objects {speaker, text, turn_id?, date?} or plain "speaker: text" lines.
std::vector<TranscriptLine> read_transcript(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::Io, "cannot read transcript " + path.string());
    std::vector<TranscriptLine> out;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (text::trim(line).empty()) continue;
        TranscriptLine t;
        t.turn_id = path.stem().string() + ":" + std::to_string(lineno);
        const std::string trimmed = text::trim(line);
        if (trimmed.front() == '{') {
            nlohmann::json j;
            try {
                j = nlohmann::json::parse(trimmed);
            } catch (const nlohmann::json::exception& e) {
                throw Error(ErrorCode::DatasetFormat, path.string() + ":" + std::to_string(lineno) + ": " + e.what());
            }
            t.speaker = j.value("speaker", "");
            t.text = j.value("text", "");
            if (j.contains("turn_id") && j["turn_id"].is_string()) t.turn_id = j["turn_id"].get<std::string>();
            t.date = j.value("date", "");
        } else if (auto colon = trimmed.find(':'); colon != std::string::npos && colon < 40) {
            t.speaker = text::trim(trimmed.substr(0, colon));
            t.text = text::trim(trimmed.substr(colon + 1));
        } else {
            t.text = trimmed;
        }
        if (text::trim(t.text).empty()) continue;
        out.push_back(std::move(t));
    }
    return out;
}

int cmd_ingest(const CliConfig& cfg, const std::string& transcript) {
    if (!std::filesystem::exists(transcript)) {
        std::cerr << "Io: transcript not found: " << transcript << "\n";
        return kExitUsage;
    }
    const auto lines = read_transcript(transcript);
    const Runtime rt = make_runtime(cfg);
    MemoryGraph g = open_graph(cfg);
    std::size_t merged = 0, linked = 0, appended = 0;
    for (const auto& l : lines) {
        IngestOptions opts;
        opts.turn_id = l.turn_id;
        opts.date = l.date;
        const auto report = ingest(g, l.text, l.speaker, *rt.policy, *rt.embedder, opts);
        switch (report.operation) {
        case Operation::Merged: ++merged; break;
        case Operation::Linked: ++linked; break;
        case Operation::Appended: ++appended; break;
        }
    }
    snapshot_save(g, cfg.snapshot_path);
    std::cout << "inputs: " << lines.size() << "\n"
              << "merged: " << merged << "\n"
              << "linked: " << linked << "\n"
              << "appended: " << appended << "\n"
              << "notes: " << g.notes().size() << "\n"
              << "clock: " << g.clock() << "\n"
              << "snapshot: " << cfg.snapshot_path << "\n";
    return kExitOk;
}

int cmd_query(const CliConfig& cfg, const std::string& question, bool iterative, bool trace) {
    if (text::trim(question).empty()) throw UsageError("question is blank");
    const Runtime rt = make_runtime(cfg);
    const MemoryGraph g = open_graph(cfg);
    RetrievalSwitches switches;
    switches.disable_ier = !iterative;
    const RetrievalResult rr = retrieve_iterative(g, question, *rt.policy, *rt.embedder, switches);
    if (rr.pool.ranked.empty()) {
        std::cout << "no evidence\n";
    } else {
        const auto contexts = pool_contexts(g, rr.pool);
        const std::string answer =
            rt.policy->answer(question, render_pool(g, rr.pool), contexts, cfg.engine.temperature_general);
        std::cout << "answer: " << answer << "\n"
                  << "iterations: " << rr.pool.iteration << "\n"
                  << "evidence:\n"
                  << render_pool(g, rr.pool);
    }
    if (trace) {
        const nlohmann::json t = rr.trace.to_json();
        for (const auto& it : t["iterations"]) std::cout << it.dump() << "\n";
    }
    return kExitOk;
}

int cmd_eval(const CliConfig& cfg, const std::string& dataset_dir, const AblationConfig& ablation,
             const std::string& out_dir) {
    const std::string dir = dataset_dir.empty() ? cfg.dataset_path : dataset_dir;
    if (dir.empty()) throw UsageError("no dataset given");
    const auto ds = load_dataset(dir);
    const Runtime rt = make_runtime(cfg);
    const EvalReport report = run_benchmark(ds, cfg.engine, ablation, *rt.policy, *rt.embedder);
    const std::string table = report.to_table();
    std::cout << table;
    if (!out_dir.empty()) {
        std::filesystem::create_directories(out_dir);
        const std::string stem = "report-" + ablation.label();
        std::ofstream(std::filesystem::path(out_dir) / (stem + ".json")) << report.to_json().dump(2) << "\n";
        std::ofstream(std::filesystem::path(out_dir) / (stem + ".txt")) << table;
    }
    return kExitOk;
}

int cmd_stats(const CliConfig& cfg) {
    const MemoryGraph g = open_graph(cfg);
    const IbDiagnostics d = ib_diagnostics(g);
    nlohmann::ordered_json j{{"inputs_seen", d.inputs_seen},
                             {"note_count", d.note_count},
                             {"merge_total", d.merge_total},
                             {"link_total", d.link_total},
                             {"append_total", d.append_total},
                             {"compression_ratio", d.compression_ratio},
                             {"mean_keywords_per_note", d.mean_keywords_per_note},
                             {"related_edge_count", d.related_edge_count},
                             {"keyword_count", d.keyword_count},
                             {"topic_count", d.topic_count},
                             {"clock", g.clock()}};
    std::cout << j.dump(2) << "\n";
    return kExitOk;
}

int cmd_evolve(const CliConfig& cfg) {
    MemoryGraph g = open_graph(cfg);
    if (g.co_occurrence().empty()) {
        std::cout << "no co-occurrence edges; topics unchanged (" << g.topics().size() << ")\n";
        return kExitOk;
    }
    const std::size_t n = evolve_topics(g);
    snapshot_save(g, cfg.snapshot_path);
    std::cout << "topics: " << n << "\n";
    return kExitOk;
}

MemoryService* g_service = nullptr;

int cmd_serve(const CliConfig& cfg, const std::string& host, int port, const std::string& token) {
    const Runtime rt = make_runtime(cfg);
    ServiceOptions opts;
    opts.host = host;
    opts.port = port;
    opts.bearer_token = token.empty() ? cfg.bearer_token : token;
    opts.snapshot_path = cfg.snapshot_path;
    MemoryService service(open_graph(cfg), rt.policy, rt.embedder, opts);
    g_service = &service;
    std::signal(SIGINT, [](int) {
        if (g_service) g_service->stop();
    });
    std::signal(SIGTERM, [](int) {
        if (g_service) g_service->stop();
    });
    std::cerr << "serving on " << host << ":" << port << "\n";
    service.run();
    g_service = nullptr;
    return kExitOk;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"memfly: long-term memory engine for conversational agents"};
    app.require_subcommand(1);
    app.fallthrough();
    GlobalFlags flags;
    app.add_option("--config", flags.config_file, "JSON config file");
    app.add_option("--set", flags.sets, "Override a config field, KEY=VALUE (repeatable)");
    app.add_option("--mode", flags.mode, "mock or remote")->check(CLI::IsMember({"mock", "remote"}));
    app.add_option("--snapshot", flags.snapshot, "Snapshot file");
    app.add_option("--llm-url", flags.llm_url, "Chat completions base URL");
    app.add_option("--llm-model", flags.llm_model, "Chat model name");
    app.add_option("--embed-url", flags.embed_url, "Embeddings base URL");
    app.add_option("--embed-model", flags.embed_model, "Embedding model name");

    auto* ingest_cmd = app.add_subcommand("ingest", "Ingest a transcript into the snapshot");
    std::string transcript;
    ingest_cmd->add_option("transcript", transcript, "JSONL or 'speaker: text' lines")->required();

    auto* query_cmd = app.add_subcommand("query", "Answer a question from memory");
    std::string question;
    bool iterative = false, trace = false;
    query_cmd->add_option("question", question)->required();
    query_cmd->add_flag("--iterative", iterative, "Run iterative evidence refinement");
    query_cmd->add_flag("--trace", trace, "Print per-iteration trace JSON");

    auto* eval_cmd = app.add_subcommand("eval", "Run the benchmark on a dataset directory");
    std::string dataset_dir, out_dir;
    AblationConfig ablation;
    eval_cmd->add_option("dataset", dataset_dir, "Directory with sessions/*.jsonl and qa.json");
    eval_cmd->add_option("--out", out_dir, "Write report JSON and table here");
    eval_cmd->add_flag("--no-update", ablation.disable_update);
    eval_cmd->add_flag("--no-denoise", ablation.disable_denoise);
    eval_cmd->add_flag("--no-link", ablation.disable_link);
    eval_cmd->add_flag("--no-merge", ablation.disable_merge);
    eval_cmd->add_flag("--no-topic", ablation.disable_topic_pathway);
    eval_cmd->add_flag("--no-keyword", ablation.disable_keyword_pathway);
    eval_cmd->add_flag("--no-neighbor", ablation.disable_neighbor);
    eval_cmd->add_flag("--no-ier", ablation.disable_ier);

    auto* stats_cmd = app.add_subcommand("stats", "Print memory diagnostics");
    auto* evolve_cmd = app.add_subcommand("evolve", "Recompute topics");

    auto* serve_cmd = app.add_subcommand("serve", "Serve the HTTP JSON API");
    std::string host = "127.0.0.1", token;
    int port = 8080;
    serve_cmd->add_option("--host", host);
    serve_cmd->add_option("--port", port)->check(CLI::Range(1, 65535));
    serve_cmd->add_option("--token", token, "Require this bearer token");

    auto* config_cmd = app.add_subcommand("config", "Configuration helpers");
    config_cmd->require_subcommand(1);
    auto* defaults_cmd = config_cmd->add_subcommand("print-defaults", "Print the default configuration");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kExitOk : kExitUsage;
    }

    try {
        if (defaults_cmd->parsed()) {
            std::cout << nlohmann::json(CliConfig{}).dump(2) << "\n";
            return kExitOk;
        }
        const CliConfig cfg = resolve(flags);
        if (ingest_cmd->parsed()) return cmd_ingest(cfg, transcript);
        if (query_cmd->parsed()) return cmd_query(cfg, question, iterative, trace);
        if (eval_cmd->parsed()) return cmd_eval(cfg, dataset_dir, ablation, out_dir);
        if (stats_cmd->parsed()) return cmd_stats(cfg);
        if (evolve_cmd->parsed()) return cmd_evolve(cfg);
        if (serve_cmd->parsed()) return cmd_serve(cfg, host, port, token);
    } catch (const UsageError& e) {
        std::cerr << "usage: " << e.what() << "\n";
        return kExitUsage;
    } catch (const Error& e) {
        std::cerr << e.what() << "\n";
        return e.code() == ErrorCode::InvalidConfig ? kExitUsage : kExitRuntime;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitRuntime;
    }
    return kExitUsage;
}
