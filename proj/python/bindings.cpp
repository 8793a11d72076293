#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "roleplay/corpus.hpp"
#include "roleplay/errors.hpp"
#include "roleplay/judge.hpp"
#include "roleplay/metrics.hpp"
#include "roleplay/orchestrator.hpp"

namespace py = pybind11;
using namespace roleplay;

namespace {

py::object to_py(const ordered_json& j) {
    switch (j.type()) {
        case ordered_json::value_t::null: return py::none();
        case ordered_json::value_t::boolean: return py::bool_(j.get<bool>());
        case ordered_json::value_t::number_integer: return py::int_(j.get<std::int64_t>());
        case ordered_json::value_t::number_unsigned: return py::int_(j.get<std::uint64_t>());
        case ordered_json::value_t::number_float: return py::float_(j.get<double>());
        case ordered_json::value_t::string: return py::str(j.get_ref<const std::string&>());
        case ordered_json::value_t::array: {
            py::list out;
            for (const auto& v : j) out.append(to_py(v));
            return out;
        }
        case ordered_json::value_t::object: {
            py::dict out;
            for (const auto& [k, v] : j.items()) out[py::str(k)] = to_py(v);
            return out;
        }
        default: throw py::type_error("unsupported JSON value");
    }
}

ordered_json from_py(const py::handle& o) {
    if (o.is_none()) return nullptr;
    if (py::isinstance<py::bool_>(o)) return o.cast<bool>();
    if (py::isinstance<py::int_>(o)) return o.cast<std::int64_t>();
    if (py::isinstance<py::float_>(o)) return o.cast<double>();
    if (py::isinstance<py::str>(o)) return o.cast<std::string>();
    if (py::isinstance<py::dict>(o)) {
        ordered_json out = ordered_json::object();
        for (const auto& [k, v] : o.cast<py::dict>()) out[py::str(k).cast<std::string>()] = from_py(v);
        return out;
    }
    if (py::isinstance<py::list>(o) || py::isinstance<py::tuple>(o)) {
        ordered_json out = ordered_json::array();
        for (const auto& v : o) out.push_back(from_py(v));
        return out;
    }
    throw py::type_error("expected JSON-compatible data");
}

template <class T, class Parse>
std::vector<T> records_from_py(const py::list& items, Parse parse) {
    std::vector<T> out;
    std::size_t line = 0;
    for (const auto& item : items) out.push_back(parse(from_py(item), ++line));
    return out;
}

std::vector<DialogueSession> sessions_from_py(const py::list& items) {
    return records_from_py<DialogueSession>(items, session_from_json);
}

template <class Range>
py::list to_py_list(const Range& items) {
    py::list out;
    for (const auto& item : items) out.append(to_py(to_json(item)));
    return out;
}

std::vector<TokenList> tokenize_all(const std::vector<std::string>& texts) {
    std::vector<TokenList> out;
    out.reserve(texts.size());
    for (const auto& t : texts) out.push_back(tokenize(t));
    return out;
}

py::list curate(const std::filesystem::path& seeds_path, const std::string& backend,
                const std::optional<std::filesystem::path>& script, const std::optional<std::filesystem::path>& cache,
                const std::optional<std::filesystem::path>& reference, int instances, int max_rounds,
                double temperature, int concurrency, std::uint64_t seed, const std::string& url,
                const std::string& model, const std::string& api_key_env) {
    CurationConfig cfg;
    cfg.instances_per_seed = instances;
    cfg.max_rounds = max_rounds;
    cfg.temperature = temperature;
    cfg.concurrency_limit = concurrency;
    cfg.validate();

    BackendSpec spec;
    spec.kind = backend;
    if (script) spec.script = *script;
    if (cache) spec.cache = *cache;
    spec.live.url = url;
    spec.live.model = model;
    spec.live.api_key_env = api_key_env;
    spec.live.jitter_seed = seed;

    const auto seeds = load_seed_dataset(seeds_path);
    const auto ctx = make_context(reference ? load_seed_dataset(*reference) : seeds, seed);
    const auto source = backend_source(spec);
    BatchResult batch;
    {
        py::gil_scoped_release release;
        batch = run_batch(seeds, cfg, ctx, [&](const SeedExample& s, int idx) { return AgentBackends::shared(source(session_scope(s.seed_id, idx))); },
                          seed);
    }
    if (!batch.failures.empty()) {
        const auto& f = batch.failures.front();
        throw Error(std::to_string(batch.failures.size()) + " sessions failed; first: " + f.seed_id + "#" +
                    std::to_string(f.instance_index) + ": " + f.error);
    }
    return to_py_list(batch.sessions());
}

}  // namespace

PYBIND11_MODULE(_roleplay, m) {
    m.doc() = "Role-play dialogue curation, splitting, metrics and pairwise evaluation";

    auto base = py::register_exception<Error>(m, "RoleplayError");
    py::register_exception<ParseError>(m, "ParseError", base);
    py::register_exception<ConfigError>(m, "ConfigError", base);
    py::register_exception<MetricError>(m, "MetricError", base);
    py::register_exception<SamplingError>(m, "SamplingError", base);
    py::register_exception<CacheMissError>(m, "CacheMissError", base);

    m.def("tokenize", [](const std::string& text) { return tokenize(text).tokens(); }, py::arg("text"));

    m.def(
        "bleu",
        [](const std::vector<std::string>& candidates, const std::vector<std::string>& references) {
            const auto c = tokenize_all(candidates), r = tokenize_all(references);
            return py::dict(py::arg("bleu1") = bleu1(c, r), py::arg("bleu2") = bleu2(c, r),
                            py::arg("avg") = bleu_avg(c, r));
        },
        py::arg("candidates"), py::arg("references"), "Corpus-level BLEU-1, BLEU-2 and their mean.");

    m.def(
        "knowledge_f1",
        [](const std::string& candidate,
           const std::vector<std::tuple<std::string, std::string, std::string>>& knowledge) -> py::object {
            std::vector<KnowledgeTriple> triples;
            for (const auto& [s, r, o] : knowledge) triples.push_back({s, r, o});
            const auto f = knowledge_f1(tokenize(candidate), triples);
            if (!f) return py::none();
            return py::dict(py::arg("precision") = f->precision, py::arg("recall") = f->recall, py::arg("f1") = f->f1);
        },
        py::arg("candidate"), py::arg("knowledge"), "None when the gold knowledge is empty after stopwords.");

    m.def(
        "persona_f1",
        [](const std::string& candidate, const std::string& profile) {
            return persona_f1(tokenize(candidate), tokenize(profile));
        },
        py::arg("candidate"), py::arg("profile_text"));

    m.def(
        "target_success",
        [](const std::vector<std::string>& predictions, const std::string& topic, std::size_t gold_index) {
            return target_success(tokenize_all(predictions), topic, gold_index);
        },
        py::arg("predictions"), py::arg("topic"), py::arg("gold_index"));

    m.def("fleiss_kappa", &fleiss_kappa, py::arg("ratings"), py::arg("raters_per_item"),
          "ratings[i][k] counts raters putting item i in category k.");

    m.def(
        "load_seeds", [](const std::filesystem::path& path) { return to_py_list(load_seed_dataset(path)); },
        py::arg("path"));
    m.def(
        "read_corpus", [](const std::filesystem::path& path) { return to_py_list(read_corpus(path)); },
        py::arg("path"));
    m.def(
        "write_corpus",
        [](const py::list& sessions, const std::filesystem::path& path) { write_corpus(sessions_from_py(sessions), path); },
        py::arg("sessions"), py::arg("path"));

    m.def("curate", &curate, py::arg("seeds_path"), py::kw_only(), py::arg("backend") = "scripted",
          py::arg("script") = py::none(), py::arg("cache") = py::none(), py::arg("reference") = py::none(),
          py::arg("instances") = 3, py::arg("max_rounds") = 8, py::arg("temperature") = 0.75,
          py::arg("concurrency") = 4, py::arg("seed") = 0, py::arg("url") = LiveBackendConfig{}.url,
          py::arg("model") = LiveBackendConfig{}.model, py::arg("api_key_env") = LiveBackendConfig{}.api_key_env,
          "Role-plays every seed and returns the sessions. Raises if any session fails.");

    m.def(
        "split",
        [](const py::list& sessions, double unseen_fraction, std::tuple<double, double, double> ratios,
           std::uint64_t seed) {
            const auto [train, valid, test] = ratios;
            const auto sp = make_splits(sessions_from_py(sessions), {train, valid, test}, unseen_fraction, seed);
            py::dict out;
            for (const auto& [name, v] : sp.named()) out[py::str(std::string(name))] = to_py_list(*v);
            return out;
        },
        py::arg("sessions"), py::arg("unseen_fraction") = 0.1, py::arg("ratios") = std::make_tuple(0.7, 0.1, 0.2),
        py::arg("seed") = 0);

    m.def(
        "stats", [](const py::list& sessions) { return to_py(to_json(compute_stats(sessions_from_py(sessions)))); },
        py::arg("sessions"));

    m.def(
        "evaluate_predictions",
        [](const py::list& predictions, const py::list& corpus) {
            std::vector<Prediction> preds;
            for (const auto& p : predictions) {
                const auto d = p.cast<py::dict>();
                preds.push_back({d["dialogue_id"].cast<std::string>(), d["turn_index"].cast<std::size_t>(),
                                 d["prediction"].cast<std::string>()});
            }
            return to_py(to_json(evaluate_predictions(preds, sessions_from_py(corpus))));
        },
        py::arg("predictions"), py::arg("corpus"));

    m.def(
        "build_pair_tasks",
        [](const std::filesystem::path& seeds_path, const py::list& corpus, std::size_t n_targets, std::uint64_t seed) {
            std::vector<Transcript> seed_side, synthetic;
            for (const auto& s : load_seed_dataset(seeds_path)) seed_side.push_back(transcript_of(s));
            for (const auto& s : sessions_from_py(corpus)) synthetic.push_back(transcript_of(s));
            return to_py_list(build_pair_tasks(seed_side, synthetic, n_targets, seed));
        },
        py::arg("seeds_path"), py::arg("corpus"), py::arg("n_targets"), py::arg("seed") = 0,
        "Pair tasks including their server-side source labels.");

    m.def(
        "client_view",
        [](const py::dict& task) { return to_py(to_client_json(pair_task_from_json(from_py(task), 1))); },
        py::arg("task"), "The annotator-facing payload of a pair task.");

    m.def(
        "win_rates",
        [](const py::list& judgments, const py::list& tasks) {
            const auto rs = records_from_py<JudgmentRecord>(judgments, judgment_from_json);
            const auto ts = records_from_py<PairTask>(tasks, pair_task_from_json);
            return to_py(to_json(win_rates(rs, ts)));
        },
        py::arg("judgments"), py::arg("tasks"));
}
