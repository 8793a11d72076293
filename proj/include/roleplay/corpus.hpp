#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "roleplay/json_io.hpp"
#include "roleplay/types.hpp"

namespace roleplay {

void write_corpus(const std::vector<DialogueSession>& sessions, const std::filesystem::path& path);
/// Blank lines are ignored. Throws IoError / ParseError with line numbers.
std::vector<DialogueSession> read_corpus(const std::filesystem::path& path);

struct CorpusSplits {
    std::vector<DialogueSession> train;
    std::vector<DialogueSession> valid;
    std::vector<DialogueSession> test_seen;
    std::vector<DialogueSession> test_unseen;

    /// (name, sessions) in the fixed order train, valid, test_seen, test_unseen.
    std::array<std::pair<std::string_view, const std::vector<DialogueSession>*>, 4> named() const;
    std::size_t total() const;
};

struct SplitRatios {
    double train = 0.7;
    double valid = 0.1;
    double test = 0.2;
};

/// Holds out round(unseen_topic_fraction * #topics) target topics entirely into
/// test_unseen, then distributes the remaining seed groups (all instances of a seed
/// together) over train/valid/test_seen by `ratios`. Deterministic under rng_seed.
/// Throws ConfigError on bad ratios or when the fraction holds out zero or all topics.
CorpusSplits make_splits(const std::vector<DialogueSession>& sessions, const SplitRatios& ratios,
                         double unseen_topic_fraction, std::uint64_t rng_seed);

/// Writes train.jsonl, valid.jsonl, test_seen.jsonl, test_unseen.jsonl into `dir`.
void write_splits(const CorpusSplits& splits, const std::filesystem::path& dir);
CorpusSplits read_splits(const std::filesystem::path& dir);

struct SplitCounts {
    std::size_t dialogues = 0;
    std::size_t utterances = 0;
};

struct StatsReport {
    std::vector<std::pair<std::string, SplitCounts>> per_split;
    std::size_t total_dialogues = 0;
    std::size_t total_utterances = 0;
    std::size_t distinct_targets = 0;
    double avg_slot_keys_per_profile = 0.0;
    double avg_traits_per_personality = 0.0;
    double avg_knowledge_per_dialogue = 0.0;
    double avg_utterances_per_dialogue = 0.0;
    double avg_words_per_user_turn = 0.0;
    double avg_words_per_system_turn = 0.0;
    std::map<std::string, std::size_t> domain_histogram;
    bool empty = true;
};

StatsReport compute_stats(const CorpusSplits& splits);
/// Statistics over a single unsplit corpus, reported under the split name "all".
StatsReport compute_stats(const std::vector<DialogueSession>& sessions);

ordered_json to_json(const StatsReport& report);
/// Aligned two-column text table.
std::string format_stats_table(const StatsReport& report);

/// Maps a system turn (with its session for context) to a dialogue-act label.
using ActLabeler = std::function<std::string(const Turn& turn, const DialogueSession& session)>;

/// Keyword rules over {greeting, ask preference, chit-chat about topic, introduce attribute,
/// recommendation, other}.
std::string default_act_label(const Turn& turn, const DialogueSession& session);

/// transitions[r-1][{from, to}] counts system-act transitions from round r to r+1 for
/// r = 1 .. rounds-1.
using ActTransitions = std::vector<std::map<std::pair<std::string, std::string>, std::size_t>>;

ActTransitions act_transition_matrix(const std::vector<DialogueSession>& sessions,
                                     const ActLabeler& labeler = default_act_label, int rounds = 6);

ordered_json to_json(const ActTransitions& transitions);

}  // namespace roleplay
