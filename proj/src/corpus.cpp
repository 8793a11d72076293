#include "roleplay/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>

#include <fmt/format.h>

#include "roleplay/errors.hpp"
#include "roleplay/metrics.hpp"
#include "roleplay/rng.hpp"
#include "text_util.hpp"

namespace roleplay {

void write_corpus(const std::vector<DialogueSession>& sessions, const std::filesystem::path& path) {
    std::vector<ordered_json> records;
    records.reserve(sessions.size());
    for (const auto& s : sessions) records.push_back(to_json(s));
    write_jsonl(path, records);
}

std::vector<DialogueSession> read_corpus(const std::filesystem::path& path) {
    std::vector<DialogueSession> out;
    for_each_jsonl(path, [&](const ordered_json& j, std::size_t line) { out.push_back(session_from_json(j, line)); });
    return out;
}

std::array<std::pair<std::string_view, const std::vector<DialogueSession>*>, 4> CorpusSplits::named() const {
    return {{{"train", &train}, {"valid", &valid}, {"test_seen", &test_seen}, {"test_unseen", &test_unseen}}};
}

std::size_t CorpusSplits::total() const {
    return train.size() + valid.size() + test_seen.size() + test_unseen.size();
}

CorpusSplits make_splits(const std::vector<DialogueSession>& sessions, const SplitRatios& ratios,
                         double unseen_topic_fraction, std::uint64_t rng_seed) {
    if (ratios.train < 0 || ratios.valid < 0 || ratios.test < 0 ||
        std::abs(ratios.train + ratios.valid + ratios.test - 1.0) > 1e-9)
        throw ConfigError("split ratios must be non-negative and sum to 1");
    if (!(unseen_topic_fraction > 0.0 && unseen_topic_fraction < 1.0))
        throw ConfigError("unseen_topic_fraction must lie strictly between 0 and 1");

    std::vector<std::string> topics;
    {
        std::set<std::string> seen;
        for (const auto& s : sessions) seen.insert(s.target.topic);
        topics.assign(seen.begin(), seen.end());
    }
    const auto n_unseen = static_cast<std::size_t>(std::llround(unseen_topic_fraction * static_cast<double>(topics.size())));
    if (n_unseen == 0 || n_unseen >= topics.size())
        throw ConfigError(fmt::format("{} distinct topics are too few to hold out a fraction of {}", topics.size(),
                                      unseen_topic_fraction));

    Rng rng(substream(rng_seed, Stream::splits));
    rng.shuffle(std::span(topics));
    const std::set<std::string> unseen(topics.begin(), topics.begin() + static_cast<long>(n_unseen));

    CorpusSplits out;
    // Seed groups in first-appearance order.
    std::vector<std::string> group_order;
    std::map<std::string, std::vector<const DialogueSession*>> groups;
    for (const auto& s : sessions) {
        // A seed whose topic is held out goes entirely to test_unseen.
        if (unseen.contains(s.target.topic)) {
            out.test_unseen.push_back(s);
            continue;
        }
        auto [it, inserted] = groups.try_emplace(s.seed_id);
        if (inserted) group_order.push_back(s.seed_id);
        it->second.push_back(&s);
    }
    rng.shuffle(std::span(group_order));

    std::size_t remaining = 0;
    for (const auto& [id, g] : groups) remaining += g.size();
    const std::array<double, 3> targets = {ratios.train * static_cast<double>(remaining),
                                           ratios.valid * static_cast<double>(remaining),
                                           ratios.test * static_cast<double>(remaining)};
    std::array<std::vector<DialogueSession>*, 3> dest = {&out.train, &out.valid, &out.test_seen};
    for (const auto& id : group_order) {
        std::size_t best = 0;
        double best_deficit = -1e300;
        for (std::size_t k = 0; k < 3; ++k) {
            const double deficit = targets[k] - static_cast<double>(dest[k]->size());
            if (deficit > best_deficit + 1e-12) {
                best = k;
                best_deficit = deficit;
            }
        }
        for (const auto* s : groups[id]) dest[best]->push_back(*s);
    }
    return out;
}

void write_splits(const CorpusSplits& splits, const std::filesystem::path& dir) {
    for (const auto& [name, sessions] : splits.named())
        write_corpus(*sessions, dir / (std::string(name) + ".jsonl"));
}

CorpusSplits read_splits(const std::filesystem::path& dir) {
    CorpusSplits out;
    auto read_if = [&](std::string_view name, std::vector<DialogueSession>& into) {
        const auto p = dir / (std::string(name) + ".jsonl");
        if (std::filesystem::exists(p)) into = read_corpus(p);
    };
    read_if("train", out.train);
    read_if("valid", out.valid);
    read_if("test_seen", out.test_seen);
    read_if("test_unseen", out.test_unseen);
    return out;
}

namespace {

StatsReport stats_over(const std::vector<std::pair<std::string, const std::vector<DialogueSession>*>>& parts) {
    StatsReport r;
    std::set<std::pair<std::string, std::string>> targets;
    double slot_keys = 0, traits = 0, knowledge = 0;
    double user_words = 0, user_turns = 0, system_words = 0, system_turns = 0;
    for (const auto& [name, sessions] : parts) {
        SplitCounts c;
        for (const auto& s : *sessions) {
            ++c.dialogues;
            c.utterances += s.turns.size();
            targets.emplace(s.target.act, s.target.topic);
            slot_keys += static_cast<double>(s.profile.size());
            traits += static_cast<double>(Personality::size());
            knowledge += static_cast<double>(s.knowledge.size());
            ++r.domain_histogram[std::string(to_string(s.target.domain))];
            for (const auto& t : s.turns) {
                const auto words = static_cast<double>(tokenize(t.utterance).size());
                if (t.role == Role::user) {
                    user_words += words;
                    ++user_turns;
                } else {
                    system_words += words;
                    ++system_turns;
                }
            }
        }
        r.total_dialogues += c.dialogues;
        r.total_utterances += c.utterances;
        r.per_split.emplace_back(name, c);
    }
    r.distinct_targets = targets.size();
    r.empty = r.total_dialogues == 0;
    if (!r.empty) {
        const auto n = static_cast<double>(r.total_dialogues);
        r.avg_slot_keys_per_profile = slot_keys / n;
        r.avg_traits_per_personality = traits / n;
        r.avg_knowledge_per_dialogue = knowledge / n;
        r.avg_utterances_per_dialogue = static_cast<double>(r.total_utterances) / n;
        r.avg_words_per_user_turn = user_turns ? user_words / user_turns : 0.0;
        r.avg_words_per_system_turn = system_turns ? system_words / system_turns : 0.0;
    }
    return r;
}

}  // namespace

StatsReport compute_stats(const CorpusSplits& splits) {
    std::vector<std::pair<std::string, const std::vector<DialogueSession>*>> parts;
    for (const auto& [name, sessions] : splits.named()) parts.emplace_back(std::string(name), sessions);
    return stats_over(parts);
}

StatsReport compute_stats(const std::vector<DialogueSession>& sessions) {
    return stats_over({{"all", &sessions}});
}

ordered_json to_json(const StatsReport& r) {
    ordered_json j;
    j["empty"] = r.empty;
    j["dialogues"] = ordered_json::object();
    j["utterances"] = ordered_json::object();
    for (const auto& [name, c] : r.per_split) {
        j["dialogues"][name] = c.dialogues;
        j["utterances"][name] = c.utterances;
    }
    j["total_dialogues"] = r.total_dialogues;
    j["total_utterances"] = r.total_utterances;
    j["distinct_targets"] = r.distinct_targets;
    j["avg_slot_keys_per_profile"] = r.avg_slot_keys_per_profile;
    j["avg_traits_per_personality"] = r.avg_traits_per_personality;
    j["avg_knowledge_per_dialogue"] = r.avg_knowledge_per_dialogue;
    j["avg_utterances_per_dialogue"] = r.avg_utterances_per_dialogue;
    j["avg_words_per_user_turn"] = r.avg_words_per_user_turn;
    j["avg_words_per_system_turn"] = r.avg_words_per_system_turn;
    j["domain_histogram"] = ordered_json::object();
    for (const auto& [d, n] : r.domain_histogram) j["domain_histogram"][d] = n;
    return j;
}

std::string format_stats_table(const StatsReport& r) {
    std::vector<std::pair<std::string, std::string>> rows;
    std::vector<std::string> names, dialogues, utterances;
    for (const auto& [name, c] : r.per_split) {
        names.push_back(name);
        dialogues.push_back(std::to_string(c.dialogues));
        utterances.push_back(std::to_string(c.utterances));
    }
    const auto slash = [](const std::vector<std::string>& v) { return detail::join(v, " / "); };
    rows.emplace_back(fmt::format("Total # dialogues ({})", slash(names)), slash(dialogues));
    rows.emplace_back(fmt::format("Total # utterances ({})", slash(names)), slash(utterances));
    rows.emplace_back("Total # targets", std::to_string(r.distinct_targets));
    rows.emplace_back("Avg. # slot keys per user profile", fmt::format("{:.1f}", r.avg_slot_keys_per_profile));
    rows.emplace_back("Avg. # traits per user personality", fmt::format("{:.1f}", r.avg_traits_per_personality));
    rows.emplace_back("Avg. # knowledge triples per dialogue", fmt::format("{:.1f}", r.avg_knowledge_per_dialogue));
    rows.emplace_back("Avg. # utterances per dialogue", fmt::format("{:.1f}", r.avg_utterances_per_dialogue));
    rows.emplace_back("Avg. # words per user's turn", fmt::format("{:.1f}", r.avg_words_per_user_turn));
    rows.emplace_back("Avg. # words per system's turn", fmt::format("{:.1f}", r.avg_words_per_system_turn));
    for (const auto& [d, n] : r.domain_histogram) rows.emplace_back(fmt::format("Domain: {}", d), std::to_string(n));

    std::size_t width = 0;
    for (const auto& [k, v] : rows) width = std::max(width, k.size());
    std::string out;
    for (const auto& [k, v] : rows) out += fmt::format("{:<{}}  {}\n", k, width, v);
    return out;
}

namespace {

bool contains_any(const std::string& text, std::initializer_list<std::string_view> cues) {
    return std::any_of(cues.begin(), cues.end(), [&](std::string_view c) { return text.find(c) != std::string::npos; });
}

}  // namespace

std::string default_act_label(const Turn& turn, const DialogueSession& session) {
    const auto text = detail::ascii_lower(turn.utterance);
    if (contains_any(text, {"recommend", "you should watch", "you should listen", "you should try", "check out",
                            "checking out", "give it a try", "worth watching", "worth listening", "worth a try",
                            "worth a visit", "suggest"}))
        return "recommendation";
    const auto tokens = tokenize(turn.utterance);
    const bool greets = !tokens.empty() &&
                        (tokens[0] == "hi" || tokens[0] == "hello" || tokens[0] == "hey" || tokens[0] == "greetings" ||
                         contains_any(text, {"nice to meet", "nice to chat", "good morning", "good afternoon",
                                             "good evening"}));
    if (turn.round_index == 1 && greets) return "greeting";
    if (text.find('?') != std::string::npos &&
        contains_any(text, {"favorite", "favourite", "what kind", "what type", "do you like", "do you enjoy",
                            "prefer", "what are some", "are you into", "what do you think of"}))
        return "ask preference";
    if (contains_any(text, {"rating", "starring", "stars", "directed", "director", "released", "award", "genre",
                            "sung by", "singer", "known for", "features", "located", "address", "price", "cuisine",
                            "reputation"}))
        return "introduce attribute";
    if (contains_sequence(tokens, tokenize(session.target.topic))) return "chit-chat about topic";
    return "other";
}

ActTransitions act_transition_matrix(const std::vector<DialogueSession>& sessions, const ActLabeler& labeler,
                                     int rounds) {
    if (rounds < 2) return {};
    ActTransitions out(static_cast<std::size_t>(rounds - 1));
    for (const auto& s : sessions) {
        std::vector<std::string> acts;  // acts[r-1] = system act in round r
        for (const auto& t : s.turns) {
            if (t.role != Role::system) continue;
            if (t.round_index > rounds) break;
            acts.push_back(labeler(t, s));
        }
        for (std::size_t r = 0; r + 1 < acts.size(); ++r) ++out[r][{acts[r], acts[r + 1]}];
    }
    return out;
}

ordered_json to_json(const ActTransitions& transitions) {
    ordered_json j = ordered_json::array();
    for (std::size_t r = 0; r < transitions.size(); ++r) {
        ordered_json step;
        step["from_round"] = r + 1;
        step["to_round"] = r + 2;
        step["counts"] = ordered_json::array();
        for (const auto& [pair, n] : transitions[r])
            step["counts"].push_back(ordered_json{{"from", pair.first}, {"to", pair.second}, {"count", n}});
        j.push_back(step);
    }
    return j;
}

}  // namespace roleplay
