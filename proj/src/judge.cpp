#include "roleplay/judge.hpp"

#include <algorithm>
#include <cctype>
#include <chrono>
#include <ctime>
#include <set>

#include <fmt/format.h>

#include "roleplay/errors.hpp"
#include "roleplay/prompting.hpp"
#include "roleplay/rng.hpp"
#include "text_util.hpp"

namespace roleplay {

std::string_view to_string(JudgeMetric m) {
    switch (m) {
        case JudgeMetric::proactivity: return "proactivity";
        case JudgeMetric::coherence: return "coherence";
        case JudgeMetric::personalization: return "personalization";
        case JudgeMetric::success: return "success";
    }
    return "proactivity";
}

std::optional<JudgeMetric> parse_judge_metric(std::string_view s) {
    for (auto m : kAllJudgeMetrics)
        if (s == to_string(m)) return m;
    return std::nullopt;
}

std::string_view judge_question(JudgeMetric m) {
    switch (m) {
        case JudgeMetric::proactivity:
            return "Which dialogue shows that the system takes the initiative during the conversation and "
                   "proactively leads the topic threads toward the target topic?";
        case JudgeMetric::coherence:
            return "Which dialogue is more natural and coherent, like humans? Whose dialogue context flows more "
                   "smoothly?";
        case JudgeMetric::personalization:
            return "Which dialogue reflects the user's preferences or personalities more? Which dialogue is more "
                   "likely to arouse the user's interest?";
        case JudgeMetric::success:
            return "Which dialogue successfully achieves the target dialogue act on the target topic?";
    }
    return "";
}

std::string_view to_string(Source s) { return s == Source::seed ? "seed" : "synthetic"; }
std::string_view to_string(Choice c) { return c == Choice::a ? "a" : "b"; }

std::optional<Choice> parse_choice(std::string_view s) {
    const auto v = detail::ascii_lower(detail::trim(s));
    if (v == "a") return Choice::a;
    if (v == "b") return Choice::b;
    return std::nullopt;
}

Transcript transcript_of(const DialogueSession& s) { return {s.id, s.target, s.turns}; }
Transcript transcript_of(const SeedExample& s) { return {s.seed_id, s.target, s.seed_conversation}; }

namespace {

ordered_json turns_json(const std::vector<Turn>& turns) {
    ordered_json a = ordered_json::array();
    for (const auto& t : turns) a.push_back(ordered_json{{"role", to_string(t.role)}, {"utterance", t.utterance}});
    return a;
}

std::string target_key(const Target& t) { return t.act + "\x1f" + t.topic; }

}  // namespace

ordered_json to_client_json(const PairTask& t) {
    return ordered_json{{"task_id", t.task_id},
                        {"target", to_json(t.target)},
                        {"dialogue_a", turns_json(t.dialogue_a)},
                        {"dialogue_b", turns_json(t.dialogue_b)}};
}

ordered_json to_json(const PairTask& t) {
    auto j = to_client_json(t);
    j["source_labels"] = ordered_json{{"a", to_string(t.source_labels[0])}, {"b", to_string(t.source_labels[1])}};
    j["presentation_order_seed"] = t.presentation_order_seed;
    return j;
}

PairTask pair_task_from_json(const ordered_json& j, std::size_t line) {
    PairTask t;
    try {
        t.task_id = j.at("task_id").get<std::string>();
        t.target = target_from_json(j.at("target"), line);
        t.dialogue_a = turns_from_json(j.at("dialogue_a"), line, "dialogue_a");
        t.dialogue_b = turns_from_json(j.at("dialogue_b"), line, "dialogue_b");
        const auto& labels = j.at("source_labels");
        for (std::size_t i = 0; i < 2; ++i) {
            const auto v = labels.at(i == 0 ? "a" : "b").get<std::string>();
            if (v == "seed") t.source_labels[i] = Source::seed;
            else if (v == "synthetic") t.source_labels[i] = Source::synthetic;
            else throw ParseError(line, "source_labels", fmt::format("unknown source '{}'", v));
        }
        t.presentation_order_seed = j.value("presentation_order_seed", std::uint64_t{0});
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(line, "<task>", e.what());
    }
    return t;
}

std::vector<PairTask> read_pair_tasks(const std::filesystem::path& path) {
    std::vector<PairTask> out;
    for_each_jsonl(path, [&](const ordered_json& j, std::size_t line) { out.push_back(pair_task_from_json(j, line)); });
    return out;
}

void write_pair_tasks(const std::vector<PairTask>& tasks, const std::filesystem::path& path) {
    std::vector<ordered_json> records;
    for (const auto& t : tasks) records.push_back(to_json(t));
    write_jsonl(path, records);
}

std::vector<PairTask> build_pair_tasks(const std::vector<Transcript>& seed_dialogues,
                                       const std::vector<Transcript>& synthetic_dialogues, std::size_t n_targets,
                                       std::uint64_t rng_seed) {
    // Distinct targets in first-appearance order on the seed side.
    std::vector<Target> targets;
    std::map<std::string, std::vector<const Transcript*>> seed_by_target, synth_by_target;
    for (const auto& d : seed_dialogues) {
        auto [it, inserted] = seed_by_target.try_emplace(target_key(d.target));
        if (inserted) targets.push_back(d.target);
        it->second.push_back(&d);
    }
    for (const auto& d : synthetic_dialogues) synth_by_target[target_key(d.target)].push_back(&d);

    if (targets.size() < n_targets)
        throw SamplingError(fmt::format("requested {} targets but the seed dialogues cover only {}", n_targets,
                                        targets.size()));

    Rng rng(substream(rng_seed, Stream::pair_tasks));
    rng.shuffle(std::span(targets));
    targets.resize(n_targets);

    std::vector<std::string> uncovered;
    for (const auto& t : targets)
        if (!synth_by_target.contains(target_key(t))) uncovered.push_back(fmt::format("<{}, {}>", t.act, t.topic));
    if (!uncovered.empty())
        throw SamplingError("targets not covered by the synthetic dialogues: " + detail::join(uncovered, ", "));

    std::vector<PairTask> tasks;
    tasks.reserve(n_targets);
    for (std::size_t i = 0; i < targets.size(); ++i) {
        const auto key = target_key(targets[i]);
        const auto& seeds = seed_by_target[key];
        const auto& synth = synth_by_target[key];
        const Transcript* s = seeds[rng.uniform_index(seeds.size())];
        const Transcript* y = synth[rng.uniform_index(synth.size())];

        PairTask task;
        task.task_id = fmt::format("task-{:04d}", i);
        task.target = targets[i];
        task.presentation_order_seed = rng.next();
        Rng order(task.presentation_order_seed);
        if (order.coin()) {
            task.dialogue_a = s->turns;
            task.dialogue_b = y->turns;
            task.source_labels = {Source::seed, Source::synthetic};
        } else {
            task.dialogue_a = y->turns;
            task.dialogue_b = s->turns;
            task.source_labels = {Source::synthetic, Source::seed};
        }
        tasks.push_back(std::move(task));
    }
    return tasks;
}

ordered_json to_json(const JudgmentRecord& r) {
    ordered_json j;
    j["task_id"] = r.task_id;
    j["metric"] = to_string(r.metric);
    j["chooser"] = r.chooser;
    j["choice"] = r.choice ? ordered_json(to_string(*r.choice)) : ordered_json(nullptr);
    j["timestamp"] = r.timestamp;
    return j;
}

JudgmentRecord judgment_from_json(const ordered_json& j, std::size_t line) {
    JudgmentRecord r;
    try {
        r.task_id = j.at("task_id").get<std::string>();
        const auto metric = j.at("metric").get<std::string>();
        auto m = parse_judge_metric(metric);
        if (!m) throw ParseError(line, "metric", fmt::format("unknown metric '{}'", metric));
        r.metric = *m;
        r.chooser = j.at("chooser").get<std::string>();
        if (const auto& c = j.at("choice"); !c.is_null()) {
            auto ch = parse_choice(c.get<std::string>());
            if (!ch) throw ParseError(line, "choice", "expected 'a', 'b' or null");
            r.choice = ch;
        }
        r.timestamp = j.value("timestamp", "");
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(line, "<judgment>", e.what());
    }
    return r;
}

std::string utc_timestamp() {
    const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&now, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

std::optional<Choice> parse_judge_choice(std::string_view text) {
    const auto lower = detail::ascii_lower(text);
    std::vector<std::string> words;
    std::string cur;
    for (char c : lower) {
        if (std::isalnum(static_cast<unsigned char>(c))) {
            cur += c;
        } else if (!cur.empty()) {
            words.push_back(std::move(cur));
            cur.clear();
        }
    }
    if (!cur.empty()) words.push_back(std::move(cur));

    bool named_a = false, named_b = false;
    for (std::size_t i = 0; i + 1 < words.size(); ++i) {
        if (words[i] != "dialogue") continue;
        named_a |= words[i + 1] == "a";
        named_b |= words[i + 1] == "b";
    }
    if (named_a != named_b) return named_a ? Choice::a : Choice::b;
    if (named_a && named_b) return std::nullopt;
    if (!words.empty() && (words[0] == "a" || words[0] == "b")) {
        // "A is better" names a dialogue; "a tie" or "a draw" does not.
        if (words[0] == "b" || words.size() == 1 || words[1] == "is" || words[1] == "was" || words[1] == "wins")
            return words[0] == "a" ? Choice::a : Choice::b;
    }
    return std::nullopt;
}

std::string render_judge_prompt(const PairTask& task, JudgeMetric metric) {
    const AgentNames names{"System", "User"};
    return fmt::format(
        "You are comparing two dialogues between a system and a user. The system's target is <{}, {}>.\n\n"
        "Dialogue A:\n{}\n\n"
        "Dialogue B:\n{}\n\n"
        "{}\n"
        "Answer with \"Dialogue A\" or \"Dialogue B\" only.",
        task.target.act, task.target.topic, render_dialogue(task.dialogue_a, names),
        render_dialogue(task.dialogue_b, names), judge_question(metric));
}

JudgmentRecord judge_pair(const PairTask& task, JudgeMetric metric, ChatBackend& backend, const JudgeConfig& cfg) {
    ChatRequest req{{{MessageRole::user, render_judge_prompt(task, metric)}},
                    cfg.temperature,
                    cfg.max_tokens,
                    AgentTag::moderator};
    JudgmentRecord rec{task.task_id, metric, "llm", std::nullopt, utc_timestamp()};
    auto answer = backend.complete(req).content;
    rec.choice = parse_judge_choice(answer);
    if (!rec.choice) {
        // The retry is a follow-up turn, so a cached first answer is not simply served again.
        req.messages.push_back({MessageRole::assistant, std::move(answer)});
        req.messages.push_back({MessageRole::user, "Please answer with \"Dialogue A\" or \"Dialogue B\" only."});
        rec.choice = parse_judge_choice(backend.complete(req).content);
    }
    return rec;
}

std::map<JudgeMetric, WinRate> win_rates(const std::vector<JudgmentRecord>& records,
                                         const std::vector<PairTask>& tasks) {
    std::map<std::string, const PairTask*> by_id;
    for (const auto& t : tasks) by_id[t.task_id] = &t;
    std::map<JudgeMetric, std::size_t> synth_wins;
    std::map<JudgeMetric, WinRate> out;
    for (auto m : kAllJudgeMetrics) out[m] = {};
    for (const auto& r : records) {
        auto it = by_id.find(r.task_id);
        if (it == by_id.end()) continue;
        auto& w = out[r.metric];
        if (!r.choice) {
            ++w.parse_failures;
            continue;
        }
        ++w.counted;
        if (it->second->source_of(*r.choice) == Source::synthetic) ++synth_wins[r.metric];
    }
    for (auto& [m, w] : out) {
        if (w.counted == 0) continue;
        w.synthetic_win_pct = 100.0 * static_cast<double>(synth_wins[m]) / static_cast<double>(w.counted);
        w.seed_win_pct = 100.0 - w.synthetic_win_pct;
    }
    return out;
}

ordered_json to_json(const std::map<JudgeMetric, WinRate>& rates) {
    ordered_json j = ordered_json::object();
    for (const auto& [m, w] : rates)
        j[std::string(to_string(m))] = ordered_json{{"synthetic_win_pct", w.synthetic_win_pct},
                                                    {"seed_win_pct", w.seed_win_pct},
                                                    {"counted", w.counted},
                                                    {"parse_failures", w.parse_failures}};
    return j;
}

}  // namespace roleplay
