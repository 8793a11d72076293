#include <atomic>
#include <chrono>
#include <csignal>
#include <fstream>
#include <iostream>
#include <random>
#include <sstream>
#include <thread>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "roleplay/backend.hpp"
#include "roleplay/corpus.hpp"
#include "roleplay/errors.hpp"
#include "roleplay/eval_service.hpp"
#include "roleplay/judge.hpp"
#include "roleplay/metrics.hpp"
#include "roleplay/orchestrator.hpp"
#include "roleplay/seed_ingest.hpp"

namespace fs = std::filesystem;
using namespace roleplay;

namespace {

std::string file_digest(const fs::path& p) {
    if (fs::is_directory(p)) {
        // Digest of "name\0digest\n" lines over regular files in name order.
        std::vector<fs::path> files;
        for (const auto& e : fs::directory_iterator(p))
            if (e.is_regular_file()) files.push_back(e.path());
        std::sort(files.begin(), files.end());
        std::string acc;
        for (const auto& f : files) acc += f.filename().string() + '\0' + file_digest(f) + '\n';
        return sha256_hex(acc);
    }
    std::ifstream in(p, std::ios::binary);
    if (!in) throw IoError(fmt::format("cannot read '{}'", p.string()));
    std::ostringstream ss;
    ss << in.rdbuf();
    return sha256_hex(ss.str());
}

std::string utc_now() { return utc_timestamp(); }

/// Provenance record written next to every output a subcommand produces.
struct RunManifest {
    explicit RunManifest(std::string cmd) : command(std::move(cmd)) {}

    std::string command;
    ordered_json config = ordered_json::object();
    std::vector<fs::path> inputs;
    std::vector<fs::path> outputs;
    std::string started_at = utc_now();
    std::chrono::steady_clock::time_point t0 = std::chrono::steady_clock::now();
    TokenUsage usage;

    void write(const fs::path& path) const {
        ordered_json j;
        j["command"] = command;
        j["config"] = config;
        j["inputs"] = ordered_json::array();
        for (const auto& p : inputs)
            j["inputs"].push_back(ordered_json{{"path", p.string()}, {"sha256", file_digest(p)}});
        j["outputs"] = ordered_json::array();
        for (const auto& p : outputs) j["outputs"].push_back(p.string());
        j["started_at"] = started_at;
        j["finished_at"] = utc_now();
        j["wall_time_ms"] = std::chrono::duration_cast<std::chrono::milliseconds>(
                                std::chrono::steady_clock::now() - t0)
                                .count();
        j["token_usage"] = ordered_json{{"prompt_tokens", usage.prompt_tokens},
                                        {"completion_tokens", usage.completion_tokens}};
        std::ofstream out(path, std::ios::binary | std::ios::trunc);
        if (!out) throw IoError(fmt::format("cannot write manifest '{}'", path.string()));
        out << j.dump(2) << '\n';
    }
};

fs::path manifest_path(const fs::path& out) {
    if (fs::is_directory(out)) return out / "manifest.json";
    return fs::path(out.string() + ".manifest.json");
}

std::uint64_t resolve_seed(const std::optional<std::uint64_t>& seed) {
    if (seed) return *seed;
    std::random_device rd;
    const std::uint64_t s = (static_cast<std::uint64_t>(rd()) << 32) ^ rd();
    spdlog::info("no --seed given; using generated seed {}", s);
    return s;
}

struct BackendOptions {
    BackendSpec spec;
    std::string script;
    std::string cache;

    void add_to(CLI::App* cmd) {
        cmd->add_option("--backend", spec.kind, "live, scripted or replay")
            ->check(CLI::IsMember({"live", "scripted", "replay"}))
            ->capture_default_str();
        cmd->add_option("--script", script, "Script file or directory (scripted backend)");
        cmd->add_option("--cache", cache, "Record/replay cache JSONL");
        cmd->add_option("--url", spec.live.url, "Chat completions endpoint")->capture_default_str();
        cmd->add_option("--model", spec.live.model, "Model name")->capture_default_str();
        cmd->add_option("--api-key-env", spec.live.api_key_env, "Environment variable holding the API key")
            ->capture_default_str();
    }

    ordered_json to_json() const { return resolved(0).to_json(); }

    BackendSpec resolved(std::uint64_t seed) const {
        auto s = spec;
        s.script = script;
        s.cache = cache;
        s.live.jitter_seed = seed;
        return s;
    }
};

BackendSource backend_factory(const BackendOptions& o, std::uint64_t seed) {
    return backend_source(o.resolved(seed));
}

void add_inputs(RunManifest& m, const BackendOptions& o) {
    if (!o.script.empty()) m.inputs.push_back(o.script);
}

// ---------------------------------------------------------------- subcommands

struct IngestArgs {
    std::string seeds;
    std::string out;
};

int run_ingest(const IngestArgs& a) {
    RunManifest manifest{"ingest"};
    const auto seeds = load_seed_dataset(a.seeds);
    const auto pool = build_profile_pool(seeds);

    std::set<std::pair<std::string, std::string>> targets;
    std::map<std::string, std::size_t> domains;
    std::size_t turns = 0;
    for (const auto& s : seeds) {
        targets.emplace(s.target.act, s.target.topic);
        ++domains[std::string(to_string(s.target.domain))];
        turns += s.seed_conversation.size();
    }
    ordered_json report;
    report["seeds"] = seeds.size();
    report["distinct_targets"] = targets.size();
    report["turns"] = turns;
    report["domains"] = domains;
    report["profile_slots"] = ordered_json::object();
    for (const auto& [key, values] : pool.entries()) report["profile_slots"][key] = values.size();

    std::cout << report.dump(2) << '\n';
    if (!a.out.empty()) {
        std::ofstream out(a.out, std::ios::binary | std::ios::trunc);
        if (!out) throw IoError(fmt::format("cannot write '{}'", a.out));
        out << report.dump(2) << '\n';
        manifest.inputs = {a.seeds};
        manifest.outputs = {a.out};
        manifest.write(manifest_path(a.out));
    }
    return 0;
}

struct CurateArgs {
    std::string seeds;
    std::string reference;
    std::string out;
    std::string run_log;
    std::string prompts_dir;
    std::string lexicon;
    std::optional<std::uint64_t> seed;
    CurationConfig cfg;
    BackendOptions backend;
};

int run_curate(CurateArgs a) {
    RunManifest manifest{"curate"};
    const auto seed = resolve_seed(a.seed);
    a.cfg.validate();
    const auto seeds = load_seed_dataset(a.seeds);
    // Pool and moderator examples come from the reference set so a subset can be curated.
    auto ctx = a.reference.empty() ? make_context(seeds, seed) : make_context(load_seed_dataset(a.reference), seed);
    if (!a.prompts_dir.empty()) ctx.prompts = PromptLibrary::with_overrides(a.prompts_dir);
    if (!a.lexicon.empty()) ctx.lexicon = TraitLexicon::load(a.lexicon);

    const auto make = backend_factory(a.backend, seed);
    const auto batch = run_batch(
        seeds, a.cfg, ctx, [&](const SeedExample& s, int idx) { return AgentBackends::shared(make(session_scope(s.seed_id, idx))); }, seed);

    write_corpus(batch.sessions(), a.out);
    for (const auto& r : batch.runs) manifest.usage += r.usage;
    if (!a.run_log.empty()) {
        std::vector<ordered_json> lines;
        for (const auto& r : batch.runs) lines.push_back(run_log_record(r));
        write_jsonl(a.run_log, lines);
        manifest.outputs.push_back(a.run_log);
    }

    manifest.config = to_json(a.cfg);
    manifest.config["seed"] = seed;
    manifest.config.update(a.backend.to_json());
    manifest.inputs = {a.seeds};
    if (!a.reference.empty()) manifest.inputs.push_back(a.reference);
    add_inputs(manifest, a.backend);
    if (!a.prompts_dir.empty()) manifest.inputs.push_back(a.prompts_dir);
    if (!a.lexicon.empty()) manifest.inputs.push_back(a.lexicon);
    manifest.outputs.insert(manifest.outputs.begin(), a.out);
    manifest.write(manifest_path(a.out));

    spdlog::info("wrote {} sessions to {}", batch.runs.size(), a.out);
    if (!batch.failures.empty()) {
        for (const auto& f : batch.failures) spdlog::error("{}#{}: {}", f.seed_id, f.instance_index, f.error);
        const auto& first = batch.failures.front();
        throw Error(fmt::format("{} of {} sessions failed; first: {}#{}: {}", batch.failures.size(),
                                batch.failures.size() + batch.runs.size(), first.seed_id, first.instance_index,
                                first.error));
    }
    return 0;
}

struct SplitArgs {
    std::string corpus;
    std::string out_dir;
    double unseen_fraction = 0.1;
    std::vector<double> ratios{0.7, 0.1, 0.2};
    std::optional<std::uint64_t> seed;
};

int run_split(const SplitArgs& a) {
    RunManifest manifest{"split"};
    const auto seed = resolve_seed(a.seed);
    const SplitRatios ratios{a.ratios.at(0), a.ratios.at(1), a.ratios.at(2)};
    const auto splits = make_splits(read_corpus(a.corpus), ratios, a.unseen_fraction, seed);
    fs::create_directories(a.out_dir);
    write_splits(splits, a.out_dir);
    for (const auto& [name, sessions] : splits.named()) spdlog::info("{}: {} dialogues", name, sessions->size());

    manifest.config = ordered_json{{"seed", seed}, {"unseen_topic_fraction", a.unseen_fraction}, {"ratios", a.ratios}};
    manifest.inputs = {a.corpus};
    for (const auto& [name, s] : splits.named()) manifest.outputs.push_back(fs::path(a.out_dir) / (std::string(name) + ".jsonl"));
    manifest.write(fs::path(a.out_dir) / "manifest.json");
    return 0;
}

struct StatsArgs {
    std::string input;
    bool json = false;
    bool acts = false;
};

int run_stats(const StatsArgs& a) {
    StatsReport report;
    std::vector<DialogueSession> all;
    if (fs::is_directory(a.input)) {
        const auto splits = read_splits(a.input);
        report = compute_stats(splits);
        for (const auto& [name, s] : splits.named()) all.insert(all.end(), s->begin(), s->end());
    } else {
        all = read_corpus(a.input);
        report = compute_stats(all);
    }
    if (report.empty) spdlog::warn("corpus '{}' is empty; reporting zeros", a.input);

    if (a.json) {
        auto j = to_json(report);
        if (a.acts) j["act_transitions"] = to_json(act_transition_matrix(all));
        std::cout << j.dump(2) << '\n';
    } else {
        std::cout << format_stats_table(report);
        if (a.acts) std::cout << to_json(act_transition_matrix(all)).dump(2) << '\n';
    }
    return 0;
}

struct MetricsArgs {
    std::string pred;
    std::string corpus;
    std::string out;
};

int run_metrics(const MetricsArgs& a) {
    const auto report = evaluate_predictions(read_predictions(a.pred), read_corpus(a.corpus));
    const auto j = to_json(report);
    std::cout << j.dump(2) << '\n';
    if (!a.out.empty()) {
        RunManifest manifest{"metrics"};
        std::ofstream out(a.out, std::ios::binary | std::ios::trunc);
        if (!out) throw IoError(fmt::format("cannot write '{}'", a.out));
        out << j.dump(2) << '\n';
        out.close();
        manifest.inputs = {a.pred, a.corpus};
        manifest.outputs = {a.out};
        manifest.write(manifest_path(a.out));
    }
    return 0;
}

struct JudgeArgs {
    std::string seeds;
    std::string corpus;
    std::string tasks_in;
    std::string tasks_out = "pair_tasks.jsonl";
    std::string votes = "judgments.jsonl";
    std::size_t n_targets = 100;
    std::optional<std::uint64_t> seed;
    BackendOptions backend;
    JudgeConfig judge;
};

int run_judge(const JudgeArgs& a) {
    RunManifest manifest{"judge"};
    const auto seed = resolve_seed(a.seed);
    std::vector<PairTask> tasks;
    if (!a.tasks_in.empty()) {
        tasks = read_pair_tasks(a.tasks_in);
        manifest.inputs.push_back(a.tasks_in);
    } else {
        if (a.seeds.empty() || a.corpus.empty()) throw ConfigError("judge needs --tasks or both --seeds and --corpus");
        std::vector<Transcript> seed_side, synth_side;
        for (const auto& s : load_seed_dataset(a.seeds)) seed_side.push_back(transcript_of(s));
        for (const auto& s : read_corpus(a.corpus)) synth_side.push_back(transcript_of(s));
        tasks = build_pair_tasks(seed_side, synth_side, a.n_targets, seed);
        write_pair_tasks(tasks, a.tasks_out);
        manifest.inputs = {a.seeds, a.corpus};
        manifest.outputs.push_back(a.tasks_out);
    }

    auto backend = backend_factory(a.backend, seed)("judge");
    VoteStore store(a.votes);
    std::size_t failures = 0;
    for (const auto& t : tasks) {
        for (auto m : kAllJudgeMetrics) {
            if (store.contains(t.task_id, m, "llm")) continue;
            const auto rec = judge_pair(t, m, *backend, a.judge);
            failures += !rec.choice;
            store.append(rec);
        }
    }
    if (failures) spdlog::warn("{} judgments could not be parsed", failures);

    std::vector<JudgmentRecord> llm;
    for (const auto& r : store.records())
        if (!r.is_human()) llm.push_back(r);
    std::cout << to_json(win_rates(llm, tasks)).dump(2) << '\n';

    manifest.config = a.backend.to_json();
    manifest.config["seed"] = seed;
    manifest.config["n_targets"] = a.n_targets;
    manifest.config["judge_temperature"] = a.judge.temperature;
    add_inputs(manifest, a.backend);
    manifest.outputs.push_back(a.votes);
    manifest.write(manifest_path(a.votes));
    return 0;
}

struct ServeArgs {
    std::string tasks;
    std::string votes = "votes.jsonl";
    std::string host = "127.0.0.1";
    int port = 8080;
    int raters = 3;
};

std::atomic<bool> g_stop{false};

int run_serve(const ServeArgs& a) {
    auto store = std::make_shared<VoteStore>(a.votes);
    EvalService service(read_pair_tasks(a.tasks), store, a.raters);
    const int port = service.start(a.host, a.port);
    std::cout << fmt::format("serving {} on http://{}:{}", a.tasks, a.host, port) << std::endl;
    std::signal(SIGINT, [](int) { g_stop = true; });
    std::signal(SIGTERM, [](int) { g_stop = true; });
    while (!g_stop) std::this_thread::sleep_for(std::chrono::milliseconds(100));
    service.stop();
    return 0;
}

void add_seed_option(CLI::App* cmd, std::optional<std::uint64_t>& seed) {
    cmd->add_option("--seed", seed, "Seed for all randomness; generated and logged when absent");
}

}  // namespace

int main(int argc, char** argv) {
    spdlog::set_default_logger(spdlog::stderr_color_mt("roleplay-curate"));
    spdlog::set_pattern("[%l] %v");

    CLI::App app{"Curate, split, score and judge role-played recommendation dialogues."};
    app.require_subcommand(1);
    bool verbose = false;
    app.add_flag("-v,--verbose", verbose, "Debug logging");

    IngestArgs ingest;
    auto* c_ingest = app.add_subcommand("ingest", "Validate a seed file and report its profile slot pool");
    c_ingest->add_option("seeds", ingest.seeds, "Seed JSONL")->required()->check(CLI::ExistingFile);
    c_ingest->add_option("--out", ingest.out, "Write the report as JSON");

    CurateArgs curate;
    auto* c_curate = app.add_subcommand("curate", "Role-play sessions from seeds into a corpus JSONL");
    c_curate->add_option("--seeds", curate.seeds, "Seed JSONL")->required()->check(CLI::ExistingFile);
    c_curate->add_option("--reference", curate.reference,
                         "Seed JSONL for the profile pool and moderator examples (default: --seeds)")
        ->check(CLI::ExistingFile);
    c_curate->add_option("--out", curate.out, "Corpus JSONL to write")->required();
    c_curate->add_option("--run-log", curate.run_log, "Per-session run log JSONL");
    c_curate->add_option("--max-rounds", curate.cfg.max_rounds, "Round cap")->capture_default_str();
    c_curate->add_option("--instances", curate.cfg.instances_per_seed, "Sessions per seed")->capture_default_str();
    c_curate->add_option("--temperature", curate.cfg.temperature, "Sampling temperature")->capture_default_str();
    c_curate->add_option("--concurrency", curate.cfg.concurrency_limit, "Sessions in flight")->capture_default_str();
    c_curate->add_option("--moderator-from-round", curate.cfg.moderator_check_from_round,
                         "First round the moderator is consulted")
        ->capture_default_str();
    c_curate->add_option("--prompts", curate.prompts_dir, "Directory of <template_id>.txt overrides")
        ->check(CLI::ExistingDirectory);
    c_curate->add_option("--lexicon", curate.lexicon, "Trait descriptor JSON")->check(CLI::ExistingFile);
    add_seed_option(c_curate, curate.seed);
    curate.backend.add_to(c_curate);

    SplitArgs split;
    auto* c_split = app.add_subcommand("split", "Split a corpus into train/valid/test_seen/test_unseen");
    c_split->add_option("corpus", split.corpus, "Corpus JSONL")->required()->check(CLI::ExistingFile);
    c_split->add_option("--out-dir", split.out_dir, "Directory for the split files")->required();
    c_split->add_option("--unseen-fraction", split.unseen_fraction, "Fraction of topics held out")
        ->capture_default_str();
    c_split->add_option("--ratios", split.ratios, "train valid test ratios")->expected(3)->capture_default_str();
    add_seed_option(c_split, split.seed);

    StatsArgs stats;
    auto* c_stats = app.add_subcommand("stats", "Corpus statistics for a corpus file or split directory");
    c_stats->add_option("input", stats.input, "Corpus JSONL or split directory")->required()->check(CLI::ExistingPath);
    c_stats->add_flag("--json", stats.json, "Emit JSON instead of a table");
    c_stats->add_flag("--acts", stats.acts, "Include system act transitions over the first six rounds");

    MetricsArgs metrics;
    auto* c_metrics = app.add_subcommand("metrics", "Score predictions against a reference corpus");
    c_metrics->add_option("--pred", metrics.pred, "Predictions JSONL")->required()->check(CLI::ExistingFile);
    c_metrics->add_option("--corpus", metrics.corpus, "Reference corpus JSONL")->required()->check(CLI::ExistingFile);
    c_metrics->add_option("--out", metrics.out, "Write the report as JSON");

    JudgeArgs judge;
    auto* c_judge = app.add_subcommand("judge", "Pairwise LLM judging of seed versus synthetic dialogues");
    c_judge->add_option("--seeds", judge.seeds, "Seed JSONL")->check(CLI::ExistingFile);
    c_judge->add_option("--corpus", judge.corpus, "Synthetic corpus JSONL")->check(CLI::ExistingFile);
    c_judge->add_option("--tasks", judge.tasks_in, "Reuse an existing pair task file")->check(CLI::ExistingFile);
    c_judge->add_option("--tasks-out", judge.tasks_out, "Where to write built tasks")->capture_default_str();
    c_judge->add_option("--votes", judge.votes, "Judgment store JSONL")->capture_default_str();
    c_judge->add_option("--n-targets", judge.n_targets, "Targets to sample")->capture_default_str();
    c_judge->add_option("--judge-temperature", judge.judge.temperature, "Judge sampling temperature")
        ->capture_default_str();
    add_seed_option(c_judge, judge.seed);
    judge.backend.add_to(c_judge);

    ServeArgs serve;
    auto* c_serve = app.add_subcommand("serve-eval", "Serve pair tasks to human annotators over HTTP");
    c_serve->add_option("--tasks", serve.tasks, "Pair task JSONL")->required()->check(CLI::ExistingFile);
    c_serve->add_option("--votes", serve.votes, "Vote store JSONL")->capture_default_str();
    c_serve->add_option("--host", serve.host, "Bind address")->capture_default_str();
    c_serve->add_option("--port", serve.port, "Port, 0 for any")->capture_default_str();
    c_serve->add_option("--raters", serve.raters, "Human raters per task used for agreement")->capture_default_str();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }
    if (verbose) spdlog::set_level(spdlog::level::debug);

    try {
        if (*c_ingest) return run_ingest(ingest);
        if (*c_curate) return run_curate(curate);
        if (*c_split) return run_split(split);
        if (*c_stats) return run_stats(stats);
        if (*c_metrics) return run_metrics(metrics);
        if (*c_judge) return run_judge(judge);
        if (*c_serve) return run_serve(serve);
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 2;
}
