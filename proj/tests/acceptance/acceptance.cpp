// Acceptance checks. One PASS/FAIL/SKIP line per criterion; nonzero exit on any FAIL.

#include <unistd.h>

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <random>
#include <set>
#include <string>
#include <tuple>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "oracles.hpp"
#include "roleplay/corpus.hpp"
#include "roleplay/errors.hpp"
#include "roleplay/judge.hpp"
#include "roleplay/metrics.hpp"
#include "roleplay/orchestrator.hpp"

using namespace roleplay;
namespace fs = std::filesystem;

namespace {

/// Thrown by require(); carries the first violated expectation.
struct Violation {
    std::string what;
};

void require(bool ok, const std::string& what) {
    if (!ok) throw Violation{what};
}

bool near(double a, double b, double tol) { return std::abs(a - b) <= tol; }

fs::path fixture(const std::string& name) { return fs::path(ROLEPLAY_FIXTURES_DIR) / name; }

bool contains(const std::string& text, const std::string& needle) { return text.find(needle) != std::string::npos; }

bool any_contains(const std::vector<ChatMessage>& messages, const std::string& needle) {
    for (const auto& m : messages)
        if (contains(m.content, needle)) return true;
    return false;
}

struct Outcome {
    enum Kind { pass, fail, skip } kind = pass;
    std::string detail;
};

struct Criterion {
    std::string name;
    std::chrono::milliseconds budget;
    std::function<Outcome()> run;
};

struct SeedFixture {
    std::vector<SeedExample> seeds = load_seed_dataset(fixture("seeds10.jsonl"));
    CurationContext ctx = make_context(seeds, 2024);
};

const SeedFixture& seeds() {
    static const SeedFixture f;
    return f;
}

std::vector<TokenList> toks(std::initializer_list<const char*> texts) {
    std::vector<TokenList> out;
    for (const char* t : texts) out.push_back(tokenize(t));
    return out;
}

Outcome config_fidelity() {
    const CurationConfig cfg;
    require(cfg.temperature == 0.75, "temperature");
    require(cfg.max_tokens.system == 100, "system max tokens");
    require(cfg.max_tokens.user == 80, "user max tokens");
    require(cfg.max_tokens.moderator == 20, "moderator max tokens");
    require(cfg.max_rounds == 8, "max_rounds");
    require(cfg.instances_per_seed == 3, "instances_per_seed");
    return {Outcome::pass, "temperature 0.75, tokens 100/80/20, 8 rounds, 3 instances"};
}

Outcome template_fidelity() {
    const auto& lib = PromptLibrary::defaults();
    const auto& seed = seeds().seeds[0];
    const auto env = lib.render_environment(seed.target.domain);
    const auto profile = sample_profile(seeds().ctx.pool, 1);
    const auto user = lib.render_user_instruction(profile, Personality{}, env);
    const auto system =
        lib.render_system_instruction(seed.target, seed.knowledge, seed.comments, profile, env, "Yuhang Wang");
    const std::vector<Turn> ongoing{{Role::system, "Hello!", 1}, {Role::user, "Hi.", 1}};
    const auto moderator =
        lib.render_moderator_instruction(seed.target, seeds().ctx.incontext, ongoing, {"Yuhang Wang", "Li Hua"}, env);
    const auto& topic = seed.target.topic;

    const std::vector<std::pair<const std::string*, std::string>> expected{
        {&user, "Your response should be concise (no longer than 30 words)."},
        {&user, "You don't need to recommend anything, but feel free to express your personal interests."},
        {&system, "Your words at each turn should be concise (no longer than 30 words)."},
        {&system, "please begin with a greeting and avoid mentioning the target"},
        {&system, fmt::format("Remember to ultimately recommend {} as the focus of the conversation.", topic)},
        {&moderator, fmt::format("(1) If Yuhang Wang completes recommendation on {} and Li Hua accepts it, and Yuhang "
                                 "Wang no longer takes the initiative for two rounds.",
                                 topic)},
        {&moderator, fmt::format("(2) If Li Hua explicitly rejects Yuhang Wang’s recommendation on {} when Yuhang "
                                 "Wang has tried to recommend it for the second time.",
                                 topic)},
        {&moderator, "Should the conversation end? The answer is no."},
        {&moderator, "Should the conversation end? The answer is yes."},
        {&moderator, "Should the conversation end? Answer yes or no."},
    };
    for (const auto& [text, needle] : expected) require(contains(*text, needle), "missing: " + needle);
    return {Outcome::pass, fmt::format("{} verbatim sentences present", expected.size())};
}

Outcome orchestration_determinism() {
    const auto script = ScriptedBackend::load_script(fixture("scripts/golden"));
    const auto golden = [] {
        std::ifstream in(fixture("golden_session.json"), std::ios::binary);
        return std::string(std::istreambuf_iterator<char>(in), {});
    }();
    require(!golden.empty(), "golden session fixture missing");
    const auto& fx = seeds();
    auto render = [](const DialogueSession& s) { return to_json(s).dump(2) + "\n"; };

    const auto dir = fs::temp_directory_path() / fmt::format("roleplay_acceptance_{}", ::getpid());
    fs::create_directories(dir);
    const auto cache_path = dir / "cache.jsonl";
    fs::remove(cache_path);
    {
        auto cache = std::make_shared<ReplayCache>(cache_path);
        for (int i = 0; i < 20; ++i) {
            auto inner = std::make_shared<ScriptedBackend>(script);
            auto backend = i == 0 ? std::shared_ptr<ChatBackend>(std::make_shared<CachingBackend>(cache, inner))
                                  : std::shared_ptr<ChatBackend>(inner);
            const auto run = run_session(fx.seeds[0], CurationConfig{}, fx.ctx, AgentBackends::shared(backend), 2024);
            require(render(run.session) == golden, fmt::format("run {} differs from the golden session", i + 1));
        }
    }
    {
        auto cache = std::make_shared<ReplayCache>(cache_path);
        const auto replay = run_session(fx.seeds[0], CurationConfig{}, fx.ctx,
                                        AgentBackends::shared(std::make_shared<CachingBackend>(cache, nullptr)), 2024);
        require(render(replay.session) == golden, "replay differs from the golden session");
    }
    fs::remove_all(dir);

    auto never = std::make_shared<ScriptedBackend>(ScriptedBackend::load_script(fixture("scripts/never_yes.json")));
    const auto capped = run_session(fx.seeds[2], CurationConfig{}, fx.ctx, AgentBackends::shared(never), 9);
    require(capped.session.rounds() == 8, fmt::format("never-yes ran {} rounds", capped.session.rounds()));
    require(capped.session.termination == Termination::round_cap, "never-yes termination is not round_cap");
    return {Outcome::pass, "20 runs and replay byte-identical; never-yes gives 8 rounds, round_cap"};
}

Outcome information_asymmetry() {
    const auto& fx = seeds();
    const auto script = ScriptedBackend::load_script(fixture("scripts/never_yes.json"));
    std::size_t scanned = 0;
    for (std::uint64_t seed = 0; seed < 50; ++seed) {
        auto b = std::make_shared<ScriptedBackend>(script);
        const auto run = run_session(fx.seeds[seed % fx.seeds.size()], CurationConfig{}, fx.ctx,
                                     AgentBackends::shared(b), 1000 + seed);
        for (const auto& r : b->requests()) {
            ++scanned;
            if (r.agent_tag == AgentTag::user) {
                for (auto t : kAllTraits)
                    require(any_contains(r.messages, fx.ctx.lexicon.describe(t, run.session.personality[t])),
                            fmt::format("session {}: user request lacks the {} descriptor", seed, to_string(t)));
            } else {
                for (const auto& d : fx.ctx.lexicon.all_descriptors())
                    require(!any_contains(r.messages, d),
                            fmt::format("session {}: {} request contains '{}'", seed,
                                        r.agent_tag == AgentTag::system ? "system" : "moderator", d));
            }
        }
    }
    return {Outcome::pass, fmt::format("50 sessions, {} requests scanned, 0 violations", scanned)};
}

Outcome metric_oracles() {
    // BLEU
    const auto ident = toks({"the cat sat on the mat", "a quick brown fox"});
    require(bleu_avg(ident, ident) == 1.0, "BLEU identity");
    require(bleu_avg(toks({"alpha beta"}), toks({"gamma delta"})) == 0.0, "BLEU disjoint");
    require(near(bleu_avg(toks({"the cat sat on mat"}), toks({"the cat is on the mat"})),
                 std::exp(-0.2) * (0.8 + std::sqrt(0.2)) / 2.0, 1e-9),
            "BLEU hand value");
    std::mt19937 gen(12345);
    const std::vector<std::string> vocab{"a", "b", "c", "d", "e", "f"};
    for (int trial = 0; trial < 200; ++trial) {
        std::vector<std::string> cs, rs;
        std::vector<TokenList> ct, rt;
        auto sentence = [&] {
            std::string s;
            const int len = 1 + gen() % 8;
            for (int i = 0; i < len; ++i) s += vocab[gen() % vocab.size()] + " ";
            return s;
        };
        for (int d = 0, n = 1 + gen() % 4; d < n; ++d) {
            cs.push_back(sentence());
            rs.push_back(sentence());
            ct.push_back(tokenize(cs.back()));
            rt.push_back(tokenize(rs.back()));
        }
        const double want = (oracles::bleu(cs, rs, 1) + oracles::bleu(cs, rs, 2)) / 2;
        require(near(bleu_avg(ct, rt), want, 1e-9), fmt::format("BLEU brute-force trial {}", trial));
    }

    // Knowledge F1
    const std::vector<KnowledgeTriple> gold{{"To Me the Way", "Rating", "7.6"}, {"To Me the Way", "Stars", "Jay Chou"}};
    const auto kf = knowledge_f1(tokenize("rating 7.6 stars Jay Chou"), gold);
    require(kf && near(kf->precision, 1.0, 1e-9) && near(kf->recall, 5.0 / 6.0, 1e-9) && near(kf->f1, 10.0 / 11.0, 1e-9),
            "knowledge F1 hand value");
    const std::vector<KnowledgeTriple> titanic{{"Titanic", "Director", "James Cameron"}};
    require(knowledge_f1(tokenize("titanic director james cameron"), titanic)->f1 == 1.0, "knowledge F1 identity");
    require(knowledge_f1(tokenize("hello friend"), titanic)->f1 == 0.0, "knowledge F1 disjoint");

    // Persona F1
    require(near(persona_f1(tokenize("beijing student loves jazz"), tokenize("beijing student male inception jay chou")),
                 0.4, 1e-9),
            "persona F1 hand value");
    require(persona_f1(tokenize("beijing student"), tokenize("beijing student")) == 1.0, "persona F1 identity");
    require(persona_f1(tokenize("pizza"), tokenize("beijing student")) == 0.0, "persona F1 disjoint");

    // Target success window
    const auto preds = toks({"hello there", "do you like films", "watch forrest gump", "bye now"});
    require(target_success(preds, "Forrest Gump", 1) && target_success(preds, "Forrest Gump", 2) &&
                target_success(preds, "Forrest Gump", 3) && !target_success(preds, "Forrest Gump", 0),
            "target success window");

    // Fleiss kappa
    require(near(fleiss_kappa({{3, 0}, {0, 3}, {3, 0}}, 3), 1.0, 1e-6), "kappa unanimous");
    const std::vector<std::vector<int>> labels{{0, 0, 0}, {0, 0, 1}, {1, 1, 1}, {0, 1, 1}, {0, 0, 0},
                                               {1, 1, 0}, {1, 1, 1}, {0, 0, 1}, {0, 0, 0}, {1, 0, 1}};
    const double k = fleiss_kappa(oracles::to_counts(labels, 2), 3);
    require(near(k, oracles::fleiss_kappa(labels, 2), 1e-6), "kappa pairwise oracle");
    require(near(k, 37.0 / 112.0, 1e-6), "kappa hand value");
    return {Outcome::pass, "BLEU, knowledge F1, persona F1, success and kappa match their oracles"};
}

Outcome split_soundness() {
    std::mt19937 gen(2024);
    std::size_t sessions = 0;
    for (int trial = 0; trial < 200; ++trial) {
        std::vector<DialogueSession> c;
        const int topics = 10 + gen() % 30;
        for (int t = 0; t < topics; ++t)
            for (int sd = 0, n = 1 + gen() % 3; sd < n; ++sd)
                for (int i = 0, m = 1 + gen() % 4; i < m; ++i) {
                    DialogueSession s;
                    s.id = fmt::format("t{}s{}i{}", t, sd, i);
                    s.seed_id = fmt::format("t{}s{}", t, sd);
                    s.instance_index = i;
                    s.target = {"Movie recommendation", fmt::format("Topic {}", t), Domain::movie};
                    c.push_back(std::move(s));
                }
        sessions += c.size();
        const auto sp = make_splits(c, {}, 0.1 + (gen() % 30) / 100.0, gen());
        std::set<std::string> unseen;
        for (const auto& s : sp.test_unseen) unseen.insert(s.target.topic);
        for (const auto* part : {&sp.train, &sp.valid, &sp.test_seen})
            for (const auto& s : *part)
                require(!unseen.contains(s.target.topic), fmt::format("trial {}: topic '{}' leaks", trial, s.target.topic));
        std::map<std::string, std::set<std::string_view>> where;
        for (const auto& [name, v] : sp.named())
            for (const auto& s : *v) where[s.seed_id].insert(name);
        for (const auto& [seed, names] : where)
            require(names.size() == 1, fmt::format("trial {}: seed {} spans splits", trial, seed));
        require(sp.total() == c.size(), fmt::format("trial {}: sessions lost", trial));
    }
    return {Outcome::pass, fmt::format("200 corpora, {} sessions, 0 leaks, seeds never span splits", sessions)};
}

Outcome stats_oracle() {
    // Session k: topic k%4, movie when k is even, 2 + k%3 turns, 1 + k%2 triples, an extra
    // profile slot for k < 4. System turns say "alpha beta"; user turns say "gamma", or
    // "gamma delta" for k >= 5. Train holds k < 7, then valid k=7, test_seen k=8, test_unseen k=9.
    CorpusSplits sp;
    for (int k = 0; k < 10; ++k) {
        DialogueSession s;
        s.id = fmt::format("d{}", k);
        s.seed_id = s.id;
        s.target = {"Recommendation", fmt::format("Topic {}", k % 4), k % 2 == 0 ? Domain::movie : Domain::music};
        for (int i = 0; i <= k % 2; ++i) s.knowledge.push_back({s.target.topic, "Fact", std::to_string(i)});
        s.profile.set("Name", "Someone");
        if (k < 4) s.profile.set("Age Range", "18-25");
        for (int i = 0; i < 2 + k % 3; ++i)
            s.turns.push_back({i % 2 == 0 ? Role::system : Role::user,
                               i % 2 == 0 ? "alpha beta" : (k >= 5 ? "gamma delta" : "gamma"), round_of_position(i)});
        s.termination = Termination::round_cap;
        (k < 7 ? sp.train : k == 7 ? sp.valid : k == 8 ? sp.test_seen : sp.test_unseen).push_back(std::move(s));
    }
    const auto r = compute_stats(sp);
    // Turns per session: 2,3,4,2,3,4,2,3,4,2. System turns 16, user turns 13 (6 short, 7 long).
    require(r.total_dialogues == 10, "total dialogues");
    require(r.total_utterances == 29, "total utterances");
    const std::vector<std::pair<std::size_t, std::size_t>> per_split{{7, 20}, {1, 3}, {1, 4}, {1, 2}};
    for (std::size_t i = 0; i < 4; ++i)
        require(r.per_split[i].second.dialogues == per_split[i].first &&
                    r.per_split[i].second.utterances == per_split[i].second,
                fmt::format("split {} counts", r.per_split[i].first));
    require(r.distinct_targets == 4, "distinct targets");
    require(r.domain_histogram.at("movie") == 5 && r.domain_histogram.at("music") == 5, "domain histogram");
    require(near(r.avg_slot_keys_per_profile, 1.4, 1e-9), "slot keys per profile");
    require(r.avg_traits_per_personality == 5.0, "traits per personality");
    require(near(r.avg_knowledge_per_dialogue, 1.5, 1e-9), "knowledge per dialogue");
    require(near(r.avg_utterances_per_dialogue, 2.9, 1e-9), "utterances per dialogue");
    require(near(r.avg_words_per_system_turn, 2.0, 1e-9), "words per system turn");
    require(near(r.avg_words_per_user_turn, 20.0 / 13.0, 1e-9), "words per user turn");
    return {Outcome::pass, "10 dialogues, 29 utterances, all fields equal the hand counts"};
}

Outcome judge_harness() {
    // Even tasks place the seed dialogue at a, odd tasks at b. A synthetic win is an even
    // task answered B or an odd task answered A. '?' answers "both" twice (parse failure).
    std::vector<PairTask> tasks;
    for (int i = 0; i < 20; ++i) {
        PairTask t;
        t.task_id = fmt::format("task-{:04d}", i);
        t.target = {"Movie recommendation", fmt::format("Film {}", i), Domain::movie};
        const std::vector<Turn> first{{Role::system, "Hello, seen anything good lately?", 1}, {Role::user, "Not really.", 1}};
        const std::vector<Turn> second{{Role::system, "Hi! Any plans tonight?", 1}, {Role::user, "Maybe a film.", 1}};
        t.dialogue_a = first;
        t.dialogue_b = second;
        t.source_labels = i % 2 == 0 ? std::array{Source::seed, Source::synthetic} : std::array{Source::synthetic, Source::seed};
        tasks.push_back(std::move(t));
    }
    const std::map<JudgeMetric, std::string> answers{
        {JudgeMetric::proactivity, "BABABABABABABABABABA"},      // 20 synthetic of 20
        {JudgeMetric::coherence, "AAAAAAAAAAAAAAAAAAAA"},        // 10 of 20
        {JudgeMetric::personalization, "BBBBBBBBBBBBBBBB??AB"},  // 8 of 18, 2 failures
        {JudgeMetric::success, "ABABABABABABABABABAB"},          // 0 of 20
    };
    const std::map<JudgeMetric, std::tuple<double, std::size_t, std::size_t>> hand{
        {JudgeMetric::proactivity, {100.0, 20, 0}},
        {JudgeMetric::coherence, {50.0, 20, 0}},
        {JudgeMetric::personalization, {800.0 / 18.0, 18, 2}},
        {JudgeMetric::success, {0.0, 20, 0}},
    };

    std::vector<std::string> lines;
    for (std::size_t i = 0; i < tasks.size(); ++i)
        for (auto m : kAllJudgeMetrics) {
            const char c = answers.at(m)[i];
            if (c == '?') {
                lines.insert(lines.end(), {"both", "both"});
            } else {
                lines.push_back(c == 'A' ? "Dialogue A" : "B is better");
            }
        }
    ScriptedBackend judge({{AgentTag::moderator, lines}});
    std::vector<JudgmentRecord> records;
    for (const auto& t : tasks)
        for (auto m : kAllJudgeMetrics) records.push_back(judge_pair(t, m, judge));
    require(judge.remaining(AgentTag::moderator) == 0, "judge script not fully consumed");

    const auto rates = win_rates(records, tasks);
    for (auto m : kAllJudgeMetrics) {
        const auto& [pct, counted, failures] = hand.at(m);
        const auto& w = rates.at(m);
        require(w.counted == counted && w.parse_failures == failures,
                fmt::format("{}: counted {} failures {}", to_string(m), w.counted, w.parse_failures));
        require(near(w.synthetic_win_pct, pct, 1e-9) && near(w.seed_win_pct, counted ? 100.0 - pct : 0.0, 1e-9),
                fmt::format("{}: synthetic {}%", to_string(m), w.synthetic_win_pct));
    }

    // Anonymization: neither the client payload nor the judge prompt reveals sources or grounding.
    std::size_t scanned = 0;
    for (const auto& t : tasks) {
        const auto client = to_client_json(t).dump();
        for (const char* banned : {"source_labels", "presentation_order_seed", "\"seed\"", "\"synthetic\"", "profile",
                                   "personality", "knowledge", "seed_id"})
            require(!contains(client, banned), fmt::format("{} payload contains {}", t.task_id, banned));
        ++scanned;
    }
    for (const auto& r : judge.requests())
        for (const char* banned : {"synthetic", "seed", "profile", "personality", "knowledge"})
            require(!any_contains(r.messages, banned), fmt::format("judge prompt contains '{}'", banned));
    return {Outcome::pass, fmt::format("20 tasks x 4 metrics match hand tallies; {} payloads and {} prompts clean",
                                       scanned, judge.requests().size())};
}

Outcome live_smoke() {
    const char* enabled = std::getenv("ROLEPLAY_LIVE_SMOKE");
    const LiveBackendConfig live_cfg;
    if (!enabled || std::string(enabled) != "1")
        return {Outcome::skip, "set ROLEPLAY_LIVE_SMOKE=1 and " + live_cfg.api_key_env + " to run (costs money)"};
    if (!std::getenv(live_cfg.api_key_env.c_str())) return {Outcome::skip, live_cfg.api_key_env + " is not set"};

    const auto& fx = seeds();
    const std::vector<SeedExample> three(fx.seeds.begin(), fx.seeds.begin() + 3);
    auto backend = std::make_shared<LiveBackend>(live_cfg);
    const auto batch = run_batch(three, CurationConfig{}, fx.ctx,
                                 [&](const SeedExample&, int) { return AgentBackends::shared(backend); }, 1);
    require(batch.failures.empty(), batch.failures.empty() ? "" : "session failed: " + batch.failures[0].error);
    require(batch.runs.size() == 9, "expected 9 sessions");
    bool topic_reached = false;
    for (const auto& run : batch.runs) {
        const auto& s = run.session;
        require(s.termination != Termination::unset, s.id + " has no termination");
        const auto topic = tokenize(s.target.topic);
        for (const auto& t : s.turns)
            if (t.round_index >= s.rounds() - 1 && contains_sequence(tokenize(t.utterance), topic)) topic_reached = true;
    }
    require(topic_reached, "no session mentions its target topic in the final rounds");
    return {Outcome::pass, "9 live sessions completed"};
}

}  // namespace

int main() {
    spdlog::set_level(spdlog::level::err);
    using std::chrono::milliseconds;
    const std::vector<Criterion> criteria{
        {"config_fidelity", milliseconds(1000), config_fidelity},
        {"template_fidelity", milliseconds(1000), template_fidelity},
        {"orchestration_determinism", milliseconds(5000), orchestration_determinism},
        {"information_asymmetry", milliseconds(10000), information_asymmetry},
        {"metric_oracles", milliseconds(1000), metric_oracles},
        {"split_soundness", milliseconds(10000), split_soundness},
        {"stats_oracle", milliseconds(1000), stats_oracle},
        {"judge_harness", milliseconds(1000), judge_harness},
        {"live_smoke", milliseconds(600000), live_smoke},
    };
    // Loaded outside the timed region so the first criterion does not pay for it.
    seeds();

    int failures = 0;
    for (const auto& c : criteria) {
        Outcome out;
        const auto start = std::chrono::steady_clock::now();
        try {
            out = c.run();
        } catch (const Violation& v) {
            out = {Outcome::fail, v.what};
        } catch (const std::exception& e) {
            out = {Outcome::fail, fmt::format("exception: {}", e.what())};
        }
        const auto elapsed = std::chrono::duration_cast<milliseconds>(std::chrono::steady_clock::now() - start);
        if (out.kind == Outcome::pass && elapsed > c.budget) {
            out = {Outcome::fail, fmt::format("took {} ms, budget {} ms", elapsed.count(), c.budget.count())};
        }
        const char* label = out.kind == Outcome::pass ? "PASS" : out.kind == Outcome::fail ? "FAIL" : "SKIP";
        failures += out.kind == Outcome::fail;
        std::cout << fmt::format("{} {} ({} ms): {}", label, c.name, elapsed.count(), out.detail) << std::endl;
    }
    return failures == 0 ? 0 : 1;
}
