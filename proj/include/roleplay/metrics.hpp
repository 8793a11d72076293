#pragma once

#include <filesystem>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "roleplay/json_io.hpp"
#include "roleplay/types.hpp"

namespace roleplay {

/// Lowercased word tokens. Only `tokenize` produces these.
class TokenList {
public:
    TokenList() = default;

    const std::vector<std::string>& tokens() const& noexcept { return tokens_; }
    std::vector<std::string> tokens() && noexcept { return std::move(tokens_); }
    std::size_t size() const noexcept { return tokens_.size(); }
    bool empty() const noexcept { return tokens_.empty(); }
    const std::string& operator[](std::size_t i) const { return tokens_[i]; }

    bool operator==(const TokenList&) const = default;

private:
    friend TokenList tokenize(std::string_view text);
    friend TokenList without_stopwords(const TokenList& tokens, const std::set<std::string, std::less<>>& stop);
    std::vector<std::string> tokens_;
};

/// Shared word segmentation for every metric and corpus statistic. Splits UTF-8 text at
/// anything that is not a letter or digit, keeps apostrophes between letters ("i'll")
/// and periods/commas between digits ("7.6"), lowercases Latin, Greek and Cyrillic
/// letters, and emits each CJK ideograph as its own token.
TokenList tokenize(std::string_view text);

/// Embedded English stopword list used by knowledge and persona F1.
const std::set<std::string, std::less<>>& default_stopwords();

TokenList without_stopwords(const TokenList& tokens,
                            const std::set<std::string, std::less<>>& stop = default_stopwords());

/// Corpus-level BLEU-1 (p1 * BP).
double bleu1(const std::vector<TokenList>& candidates, const std::vector<TokenList>& references);
/// Corpus-level cumulative BLEU-2 (BP * sqrt(p1 * p2)), no smoothing.
double bleu2(const std::vector<TokenList>& candidates, const std::vector<TokenList>& references);
/// Mean of corpus BLEU-1 and BLEU-2. Throws MetricError on an empty corpus or mismatched
/// lengths.
double bleu_avg(const std::vector<TokenList>& candidates, const std::vector<TokenList>& references);

struct PrecisionRecallF1 {
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
};

/// Knowledge triples whose object tokens all occur in `reference` (the ground-truth turn).
std::vector<KnowledgeTriple> grounded_triples(const std::vector<KnowledgeTriple>& knowledge,
                                              const TokenList& reference);

/// Overlap of the candidate's non-stopword tokens with the set of non-stopword tokens of
/// the gold triples; candidate counts are clipped at one per gold token. nullopt when
/// the gold set is empty after stopword removal.
std::optional<PrecisionRecallF1> knowledge_f1(const TokenList& candidate,
                                              const std::vector<KnowledgeTriple>& gold_knowledge,
                                              const std::set<std::string, std::less<>>& stop = default_stopwords());

/// Unigram F1 between candidate and profile text with stopwords removed, multiset clipped.
double persona_f1(const TokenList& candidate, const TokenList& profile_text,
                  const std::set<std::string, std::less<>>& stop = default_stopwords());

/// True iff the topic's token sequence appears contiguously in the prediction at
/// gold_turn_index - window .. gold_turn_index + window (clamped to the list).
bool target_success(const std::vector<TokenList>& predicted_turns, std::string_view target_topic,
                    std::size_t gold_turn_index, std::size_t window = 1);

/// True iff `needle` occurs as a contiguous subsequence of `haystack`. Empty never matches.
bool contains_sequence(const TokenList& haystack, const TokenList& needle);

/// Fleiss's kappa for an item x category count matrix. Throws MetricError when rows do not
/// sum to raters_per_item, fewer than two categories or raters, or all ratings fall in a
/// single category (expected agreement of 1).
double fleiss_kappa(const std::vector<std::vector<int>>& ratings, int raters_per_item);

struct MetricsReport {
    double avg_bleu = 0.0;
    double knowledge_f1 = 0.0;
    double persona_f1 = 0.0;
    double succ_rate = 0.0;
    int n_examples = 0;
    int knowledge_skipped = 0;
    int success_dialogues = 0;
};

/// One model output for the system turn at `turn_index` (0-based into the session's turns).
struct Prediction {
    std::string dialogue_id;
    std::size_t turn_index = 0;
    std::string prediction;
};

/// Reads {dialogue_id, turn_index, prediction} lines.
std::vector<Prediction> read_predictions(const std::filesystem::path& path);

/// Profile values joined by spaces; the text persona F1 compares against.
std::string profile_text(const UserProfile& profile);

/// Scores predictions against the reference corpus. Knowledge F1 is averaged over turns
/// with grounded triples; success is judged per dialogue against the first system turn
/// whose reference mentions the target topic, counting system turns only. Throws
/// MetricError on an unknown dialogue, an out-of-range or non-system turn, or no predictions.
MetricsReport evaluate_predictions(const std::vector<Prediction>& predictions,
                                   const std::vector<DialogueSession>& corpus);

ordered_json to_json(const MetricsReport& report);

}  // namespace roleplay
