#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "memfly/cli_config.hpp"
#include "memfly/error.hpp"
#include "memfly/eval.hpp"
#include "memfly/fusion.hpp"
#include "memfly/service.hpp"
#include "memfly/snapshot.hpp"
#include "memfly/topics.hpp"

namespace py = pybind11;
using namespace memfly;
using json = nlohmann::json;

namespace {

CliConfig parse_config(const std::string& config_json) {
    json j;
    try {
        j = json::parse(config_json.empty() ? std::string("{}") : config_json);
    } catch (const json::exception& e) {
        throw Error(ErrorCode::InvalidConfig, e.what());
    }
    CliConfig c = j.get<CliConfig>();
    c.validate();
    return c;
}

// A memory instance with its policy and embedder; JSON in and out as strings.
class PyMemory {
public:
    PyMemory(const std::string& config_json, const std::optional<std::filesystem::path>& snapshot) {
        const CliConfig cfg = parse_config(config_json);
        const Runtime rt = make_runtime(cfg);
        MemoryGraph g(cfg.engine);
        if (snapshot) {
            g = snapshot_load(*snapshot);
            g.reconfigure(cfg.engine);
        }
        ServiceOptions opts;
        opts.snapshot_path = cfg.snapshot_path;
        opts.bearer_token = cfg.bearer_token;
        service_ = std::make_unique<MemoryService>(std::move(g), rt.policy, rt.embedder, opts);
    }

    std::string ingest(const std::string& text, const std::string& speaker, const std::string& turn_id,
                       const std::string& date) {
        json body{{"speaker", speaker}, {"text", text}};
        if (!turn_id.empty()) body["turn_id"] = turn_id;
        if (!date.empty()) body["date"] = date;
        py::gil_scoped_release release;
        return service_->ingest(body).dump();
    }

    std::string query(const std::string& question, bool iterative, bool trace) {
        const json body{{"question", question}, {"iterative", iterative}, {"trace", trace}};
        py::gil_scoped_release release;
        return service_->query(body).dump();
    }

    std::string stats() const { return service_->stats().dump(); }

    std::size_t evolve() {
        py::gil_scoped_release release;
        return service_->evolve()["topic_count"].get<std::size_t>();
    }

    void save(const std::filesystem::path& path) const { snapshot_save(service_->graph_copy(), path); }

    std::vector<std::string> check() const {
        std::vector<std::string> out;
        for (const auto& v : check_invariants(service_->graph_copy())) out.push_back(v.entity + ": " + v.rule);
        return out;
    }

    std::string notes() const {
        const MemoryGraph g = service_->graph_copy();
        json out = json::array();
        for (const auto& [id, n] : g.notes()) {
            json kws = json::array();
            for (KeywordId k : n.keywords) kws.push_back(g.keyword(k).surface);
            json raw = json::array();
            for (const auto& r : n.raw) {
                raw.push_back({{"text", r.text}, {"speaker", r.speaker}, {"turn_id", r.turn_id}, {"date", r.date}});
            }
            out.push_back({{"id", id.value}, {"context", n.context}, {"keywords", kws}, {"raw", raw},
                           {"merge_count", n.merge_count}});
        }
        return out.dump();
    }

    // Serves the HTTP API on an ephemeral local port; returns the port.
    int serve() {
        py::gil_scoped_release release;
        return service_->start();
    }

    void stop() {
        py::gil_scoped_release release;
        service_->stop();
    }

private:
    std::unique_ptr<MemoryService> service_;
};

WeightedGraph build_graph(std::size_t n, const std::vector<std::tuple<std::uint32_t, std::uint32_t, double>>& edges) {
    WeightedGraph g(n);
    for (const auto& [u, v, w] : edges) g.add_edge(u, v, w);
    return g;
}

} // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "Graph-structured conversational memory engine";

    py::exception<Error>(m, "MemflyError");
    py::register_exception_translator([](std::exception_ptr p) {
        try {
            if (p) std::rethrow_exception(p);
        } catch (const Error& e) {
            const py::object exc = py::module_::import("memfly._core").attr("MemflyError");
            const py::object instance = exc(e.what());
            instance.attr("code") = std::string(to_string(e.code()));
            PyErr_SetObject(exc.ptr(), instance.ptr());
        } catch (const ServiceError& e) {
            PyErr_SetString(PyExc_ValueError, (e.code + ": " + e.message).c_str());
        }
    });

    m.def("default_config", [] { return json(CliConfig{}).dump(); });

    py::class_<PyMemory>(m, "Memory")
        .def(py::init<const std::string&, const std::optional<std::filesystem::path>&>(), py::arg("config_json") = "{}",
             py::arg("snapshot") = py::none())
        .def("ingest", &PyMemory::ingest, py::arg("text"), py::arg("speaker") = "", py::arg("turn_id") = "",
             py::arg("date") = "")
        .def("query", &PyMemory::query, py::arg("question"), py::arg("iterative") = true, py::arg("trace") = false)
        .def("stats", &PyMemory::stats)
        .def("evolve", &PyMemory::evolve)
        .def("save", &PyMemory::save, py::arg("path"))
        .def("check_invariants", &PyMemory::check)
        .def("notes", &PyMemory::notes)
        .def("serve", &PyMemory::serve)
        .def("stop", &PyMemory::stop);

    m.def(
        "modularity",
        [](std::size_t n, const std::vector<std::tuple<std::uint32_t, std::uint32_t, double>>& edges,
           const std::vector<std::uint32_t>& assignment) { return modularity(build_graph(n, edges), assignment); },
        py::arg("n"), py::arg("edges"), py::arg("assignment"));
    m.def(
        "leiden_partition",
        [](std::size_t n, const std::vector<std::tuple<std::uint32_t, std::uint32_t, double>>& edges, int delta_min,
           int delta_max, std::uint64_t seed) {
            const Partition p = leiden_partition(build_graph(n, edges), delta_min, delta_max, seed);
            return py::make_tuple(p.assignment, p.modularity);
        },
        py::arg("n"), py::arg("edges"), py::arg("delta_min") = 2, py::arg("delta_max") = 50, py::arg("seed") = 42);
    m.def(
        "rrf_fuse",
        [](const std::vector<std::vector<std::uint64_t>>& lists, double k) {
            std::vector<Ranked<NoteId>> ranked;
            for (const auto& l : lists) {
                Ranked<NoteId> r;
                for (auto id : l) r.emplace_back(NoteId(id), 0.0);
                ranked.push_back(std::move(r));
            }
            std::vector<std::pair<std::uint64_t, double>> out;
            for (const auto& [id, s] : rrf_fuse<NoteId>(ranked, k)) out.emplace_back(id.value, s);
            return out;
        },
        py::arg("lists"), py::arg("k") = 60.0);

    m.def("token_f1", [](const std::string& p, const std::string& g) { return metrics::token_f1(p, g); });
    m.def("bleu1", [](const std::string& p, const std::string& g) { return metrics::bleu1(p, g); });
    m.def("js_divergence",
          [](const std::vector<double>& p, const std::vector<double>& q) { return metrics::js_divergence(p, q); });
    m.def("spearman", [](const std::vector<double>& x, const std::vector<double>& y) { return metrics::spearman(x, y); });

    m.def(
        "run_benchmark",
        [](const std::filesystem::path& dataset_dir, const std::vector<std::string>& ablations,
           const std::string& config_json) {
            AblationConfig a;
            for (const auto& flag : ablations) {
                if (flag == "no-update") a.disable_update = true;
                else if (flag == "no-denoise") a.disable_denoise = true;
                else if (flag == "no-link") a.disable_link = true;
                else if (flag == "no-merge") a.disable_merge = true;
                else if (flag == "no-topic") a.disable_topic_pathway = true;
                else if (flag == "no-keyword") a.disable_keyword_pathway = true;
                else if (flag == "no-neighbor") a.disable_neighbor = true;
                else if (flag == "no-ier") a.disable_ier = true;
                else throw Error(ErrorCode::InvalidConfig, "unknown ablation '" + flag + "'");
            }
            const CliConfig cfg = parse_config(config_json);
            const auto ds = load_dataset(dataset_dir);
            const Runtime rt = make_runtime(cfg);
            py::gil_scoped_release release;
            return run_benchmark(ds, cfg.engine, a, *rt.policy, *rt.embedder).to_json().dump();
        },
        py::arg("dataset_dir"), py::arg("ablations") = std::vector<std::string>{}, py::arg("config_json") = "{}");
}
