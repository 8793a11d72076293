#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "roleplay/backend.hpp"
#include "roleplay/json_io.hpp"
#include "roleplay/types.hpp"

namespace roleplay {

enum class JudgeMetric { proactivity, coherence, personalization, success };

inline constexpr std::array<JudgeMetric, 4> kAllJudgeMetrics = {
    JudgeMetric::proactivity, JudgeMetric::coherence, JudgeMetric::personalization, JudgeMetric::success};

std::string_view to_string(JudgeMetric m);
std::optional<JudgeMetric> parse_judge_metric(std::string_view s);
/// Question shown to judges and annotators for `m`.
std::string_view judge_question(JudgeMetric m);

enum class Source { seed, synthetic };
enum class Choice { a, b };

std::string_view to_string(Source s);
std::string_view to_string(Choice c);
std::optional<Choice> parse_choice(std::string_view s);

/// A dialogue with only its target and turns; no grounding.
struct Transcript {
    std::string id;
    Target target;
    std::vector<Turn> turns;
};

Transcript transcript_of(const DialogueSession& s);
Transcript transcript_of(const SeedExample& s);

struct PairTask {
    std::string task_id;
    Target target;
    std::vector<Turn> dialogue_a;
    std::vector<Turn> dialogue_b;
    /// Which source sits at position a and b. Server-side only.
    std::array<Source, 2> source_labels{Source::seed, Source::synthetic};
    std::uint64_t presentation_order_seed = 0;

    Source source_of(Choice c) const { return source_labels[c == Choice::a ? 0 : 1]; }
};

/// Payload safe to send to annotators: task id, target and the two transcripts.
ordered_json to_client_json(const PairTask& t);
/// Full task including source labels, for server-side storage.
ordered_json to_json(const PairTask& t);
PairTask pair_task_from_json(const ordered_json& j, std::size_t line);

std::vector<PairTask> read_pair_tasks(const std::filesystem::path& path);
void write_pair_tasks(const std::vector<PairTask>& tasks, const std::filesystem::path& path);

/// Samples n_targets distinct targets from the seed side and pairs one seed and one
/// synthetic dialogue per target, left/right randomized. Throws SamplingError listing any
/// target the synthetic side does not cover, or when fewer targets exist than requested.
std::vector<PairTask> build_pair_tasks(const std::vector<Transcript>& seed_dialogues,
                                       const std::vector<Transcript>& synthetic_dialogues, std::size_t n_targets,
                                       std::uint64_t rng_seed);

struct JudgmentRecord {
    std::string task_id;
    JudgeMetric metric = JudgeMetric::proactivity;
    /// "llm" or "human:<annotator id>".
    std::string chooser;
    /// nullopt marks a parse failure.
    std::optional<Choice> choice;
    std::string timestamp;

    bool is_human() const { return chooser.rfind("human:", 0) == 0; }
};

ordered_json to_json(const JudgmentRecord& r);
JudgmentRecord judgment_from_json(const ordered_json& j, std::size_t line);

/// ISO-8601 UTC timestamp, second precision.
std::string utc_timestamp();

/// "Dialogue A"/"Dialogue B" when exactly one is named, else a bare leading "A"/"B".
std::optional<Choice> parse_judge_choice(std::string_view text);

struct JudgeConfig {
    double temperature = 0.0;
    int max_tokens = 20;
};

std::string render_judge_prompt(const PairTask& task, JudgeMetric metric);

/// Asks once and, on an unparseable answer, once more as a follow-up turn; a second
/// unparseable answer is recorded as a parse failure.
JudgmentRecord judge_pair(const PairTask& task, JudgeMetric metric, ChatBackend& backend,
                          const JudgeConfig& cfg = {});

struct WinRate {
    double synthetic_win_pct = 0.0;
    double seed_win_pct = 0.0;
    std::size_t counted = 0;
    std::size_t parse_failures = 0;
};

/// Per-metric win percentages over records with a choice. Records for unknown tasks are
/// ignored.
std::map<JudgeMetric, WinRate> win_rates(const std::vector<JudgmentRecord>& records,
                                         const std::vector<PairTask>& tasks);

ordered_json to_json(const std::map<JudgeMetric, WinRate>& rates);

}  // namespace roleplay
