#include "roleplay/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include <fmt/format.h>

#include "roleplay/errors.hpp"

namespace roleplay {

namespace {

using Counts = std::map<std::vector<std::string>, int>;

Counts ngram_counts(const TokenList& t, std::size_t n) {
    Counts c;
    const auto& v = t.tokens();
    for (std::size_t i = 0; i + n <= v.size(); ++i) ++c[{v.begin() + static_cast<long>(i), v.begin() + static_cast<long>(i + n)}];
    return c;
}

struct CorpusPrecision {
    double matched = 0;
    double total = 0;
};

CorpusPrecision modified_precision(const std::vector<TokenList>& cands, const std::vector<TokenList>& refs,
                                   std::size_t n) {
    CorpusPrecision p;
    for (std::size_t i = 0; i < cands.size(); ++i) {
        const auto cc = ngram_counts(cands[i], n);
        const auto rc = ngram_counts(refs[i], n);
        for (const auto& [gram, count] : cc) {
            auto it = rc.find(gram);
            p.matched += std::min(count, it == rc.end() ? 0 : it->second);
            p.total += count;
        }
    }
    return p;
}

void check_corpus(const std::vector<TokenList>& cands, const std::vector<TokenList>& refs) {
    if (cands.empty()) throw MetricError("BLEU is undefined on an empty corpus");
    if (cands.size() != refs.size())
        throw MetricError(fmt::format("BLEU needs aligned corpora ({} candidates, {} references)", cands.size(),
                                      refs.size()));
}

double brevity_penalty(const std::vector<TokenList>& cands, const std::vector<TokenList>& refs) {
    double c = 0, r = 0;
    for (const auto& t : cands) c += static_cast<double>(t.size());
    for (const auto& t : refs) r += static_cast<double>(t.size());
    if (c == 0) return 0.0;
    return c > r ? 1.0 : std::exp(1.0 - r / c);
}

double cumulative_bleu(const std::vector<TokenList>& cands, const std::vector<TokenList>& refs, std::size_t max_n) {
    check_corpus(cands, refs);
    const double bp = brevity_penalty(cands, refs);
    if (bp == 0.0) return 0.0;
    double log_sum = 0.0;
    for (std::size_t n = 1; n <= max_n; ++n) {
        const auto p = modified_precision(cands, refs, n);
        if (p.matched == 0) return 0.0;
        log_sum += std::log(p.matched / p.total) / static_cast<double>(max_n);
    }
    return bp * std::exp(log_sum);
}

std::map<std::string, int> unigram_counts(const TokenList& t) {
    std::map<std::string, int> c;
    for (const auto& w : t.tokens()) ++c[w];
    return c;
}

double f1_of(double p, double r) { return p + r == 0.0 ? 0.0 : 2.0 * p * r / (p + r); }

}  // namespace

double bleu1(const std::vector<TokenList>& candidates, const std::vector<TokenList>& references) {
    return cumulative_bleu(candidates, references, 1);
}

double bleu2(const std::vector<TokenList>& candidates, const std::vector<TokenList>& references) {
    return cumulative_bleu(candidates, references, 2);
}

double bleu_avg(const std::vector<TokenList>& candidates, const std::vector<TokenList>& references) {
    return 0.5 * (bleu1(candidates, references) + bleu2(candidates, references));
}

std::vector<KnowledgeTriple> grounded_triples(const std::vector<KnowledgeTriple>& knowledge,
                                              const TokenList& reference) {
    std::vector<KnowledgeTriple> out;
    const auto ref = unigram_counts(reference);
    for (const auto& k : knowledge) {
        const auto obj = tokenize(k.object);
        if (obj.empty()) continue;
        const bool all_present = std::all_of(obj.tokens().begin(), obj.tokens().end(),
                                             [&](const std::string& w) { return ref.contains(w); });
        if (all_present) out.push_back(k);
    }
    return out;
}

std::optional<PrecisionRecallF1> knowledge_f1(const TokenList& candidate,
                                              const std::vector<KnowledgeTriple>& gold_knowledge,
                                              const std::set<std::string, std::less<>>& stop) {
    std::set<std::string, std::less<>> gold;
    for (const auto& k : gold_knowledge)
        for (const auto* part : {&k.subject, &k.relation, &k.object})
            for (const auto& w : without_stopwords(tokenize(*part), stop).tokens()) gold.insert(w);
    if (gold.empty()) return std::nullopt;

    const auto cand = without_stopwords(candidate, stop);
    PrecisionRecallF1 out;
    if (cand.empty()) return out;
    double overlap = 0;
    for (const auto& [w, count] : unigram_counts(cand))
        if (gold.contains(w)) overlap += 1;  // gold is a set: clip at one
    out.precision = overlap / static_cast<double>(cand.size());
    out.recall = overlap / static_cast<double>(gold.size());
    out.f1 = f1_of(out.precision, out.recall);
    return out;
}

double persona_f1(const TokenList& candidate, const TokenList& profile_text,
                  const std::set<std::string, std::less<>>& stop) {
    const auto cand = without_stopwords(candidate, stop);
    const auto prof = without_stopwords(profile_text, stop);
    if (cand.empty() || prof.empty()) return 0.0;
    const auto pc = unigram_counts(prof);
    double overlap = 0;
    for (const auto& [w, count] : unigram_counts(cand)) {
        auto it = pc.find(w);
        if (it != pc.end()) overlap += std::min(count, it->second);
    }
    const double p = overlap / static_cast<double>(cand.size());
    const double r = overlap / static_cast<double>(prof.size());
    return f1_of(p, r);
}

bool contains_sequence(const TokenList& haystack, const TokenList& needle) {
    if (needle.empty() || needle.size() > haystack.size()) return false;
    const auto& h = haystack.tokens();
    const auto& n = needle.tokens();
    return std::search(h.begin(), h.end(), n.begin(), n.end()) != h.end();
}

bool target_success(const std::vector<TokenList>& predicted_turns, std::string_view target_topic,
                    std::size_t gold_turn_index, std::size_t window) {
    if (predicted_turns.empty()) return false;
    const auto topic = tokenize(target_topic);
    const std::size_t lo = gold_turn_index >= window ? gold_turn_index - window : 0;
    const std::size_t hi = std::min(predicted_turns.size() - 1, gold_turn_index + window);
    for (std::size_t i = lo; i <= hi && i < predicted_turns.size(); ++i)
        if (contains_sequence(predicted_turns[i], topic)) return true;
    return false;
}

double fleiss_kappa(const std::vector<std::vector<int>>& ratings, int raters_per_item) {
    if (ratings.empty()) throw MetricError("Fleiss's kappa needs at least one item");
    if (raters_per_item < 2) throw MetricError("Fleiss's kappa needs at least two raters per item");
    const std::size_t k = ratings.front().size();
    if (k < 2) throw MetricError("Fleiss's kappa needs at least two categories");

    const double n = raters_per_item;
    const double n_items = static_cast<double>(ratings.size());
    std::vector<double> category_totals(k, 0.0);
    double p_bar = 0.0;
    for (std::size_t i = 0; i < ratings.size(); ++i) {
        const auto& row = ratings[i];
        if (row.size() != k) throw MetricError(fmt::format("item {} has {} categories, expected {}", i, row.size(), k));
        int sum = 0;
        double sq = 0.0;
        for (std::size_t j = 0; j < k; ++j) {
            if (row[j] < 0) throw MetricError(fmt::format("item {} has a negative count", i));
            sum += row[j];
            sq += static_cast<double>(row[j]) * row[j];
            category_totals[j] += row[j];
        }
        if (sum != raters_per_item)
            throw MetricError(fmt::format("item {} has {} ratings, expected {}", i, sum, raters_per_item));
        p_bar += (sq - n) / (n * (n - 1.0));
    }
    p_bar /= n_items;

    double p_e = 0.0;
    for (double total : category_totals) {
        const double p = total / (n_items * n);
        p_e += p * p;
    }
    if (1.0 - p_e <= 1e-12)
        throw MetricError("Fleiss's kappa is undefined: every rating falls in one category");
    return (p_bar - p_e) / (1.0 - p_e);
}

std::vector<Prediction> read_predictions(const std::filesystem::path& path) {
    std::vector<Prediction> out;
    for_each_jsonl(path, [&](const ordered_json& j, std::size_t line) {
        Prediction p;
        try {
            p.dialogue_id = j.at("dialogue_id").get<std::string>();
            const auto& idx = j.at("turn_index");
            if (!idx.is_number_unsigned() && !(idx.is_number_integer() && idx.get<long long>() >= 0))
                throw ParseError(line, "turn_index", "expected a non-negative integer");
            p.turn_index = idx.get<std::size_t>();
            p.prediction = j.at("prediction").get<std::string>();
        } catch (const nlohmann::json::exception& e) {
            throw ParseError(line, "<prediction>", e.what());
        }
        out.push_back(std::move(p));
    });
    return out;
}

std::string profile_text(const UserProfile& profile) {
    std::string out;
    for (const auto& [k, v] : profile.slots()) {
        if (!out.empty()) out += ' ';
        out += v;
    }
    return out;
}

MetricsReport evaluate_predictions(const std::vector<Prediction>& predictions,
                                   const std::vector<DialogueSession>& corpus) {
    if (predictions.empty()) throw MetricError("no predictions to score");
    std::map<std::string, const DialogueSession*, std::less<>> by_id;
    for (const auto& s : corpus) by_id[s.id] = &s;

    MetricsReport report;
    std::vector<TokenList> cands, refs;
    double kf1_sum = 0.0, pf1_sum = 0.0;
    int kf1_n = 0;
    // dialogue -> system ordinal -> predicted tokens
    std::map<std::string, std::map<std::size_t, TokenList>> per_dialogue;

    for (const auto& p : predictions) {
        auto it = by_id.find(p.dialogue_id);
        if (it == by_id.end()) throw MetricError(fmt::format("prediction for unknown dialogue '{}'", p.dialogue_id));
        const auto& turns = it->second->turns;
        if (p.turn_index >= turns.size())
            throw MetricError(fmt::format("dialogue '{}' has no turn {}", p.dialogue_id, p.turn_index));
        if (turns[p.turn_index].role != Role::system)
            throw MetricError(fmt::format("turn {} of '{}' is not a system turn", p.turn_index, p.dialogue_id));

        auto cand = tokenize(p.prediction);
        auto ref = tokenize(turns[p.turn_index].utterance);

        if (auto kf = knowledge_f1(cand, grounded_triples(it->second->knowledge, ref))) {
            kf1_sum += kf->f1;
            ++kf1_n;
        } else {
            ++report.knowledge_skipped;
        }
        pf1_sum += persona_f1(cand, tokenize(profile_text(it->second->profile)));

        std::size_t ordinal = 0;
        for (std::size_t i = 0; i < p.turn_index; ++i) ordinal += turns[i].role == Role::system;
        per_dialogue[p.dialogue_id][ordinal] = cand;

        cands.push_back(std::move(cand));
        refs.push_back(std::move(ref));
    }

    report.n_examples = static_cast<int>(cands.size());
    report.avg_bleu = bleu_avg(cands, refs);
    report.knowledge_f1 = kf1_n ? kf1_sum / kf1_n : 0.0;
    report.persona_f1 = pf1_sum / static_cast<double>(cands.size());

    int judged = 0;
    for (const auto& [id, preds] : per_dialogue) {
        const auto& s = *by_id.at(id);
        const auto topic = tokenize(s.target.topic);
        std::vector<TokenList> system_refs;
        for (const auto& t : s.turns)
            if (t.role == Role::system) system_refs.push_back(tokenize(t.utterance));
        std::optional<std::size_t> gold;
        for (std::size_t i = 0; i < system_refs.size() && !gold; ++i)
            if (contains_sequence(system_refs[i], topic)) gold = i;
        if (!gold) continue;
        std::vector<TokenList> predicted(system_refs.size());
        for (const auto& [ordinal, toks] : preds) predicted[ordinal] = toks;
        ++judged;
        if (target_success(predicted, s.target.topic, *gold)) ++report.success_dialogues;
    }
    report.succ_rate = judged ? static_cast<double>(report.success_dialogues) / judged : 0.0;
    return report;
}

ordered_json to_json(const MetricsReport& r) {
    return ordered_json{{"avg_bleu", r.avg_bleu},
                        {"knowledge_f1", r.knowledge_f1},
                        {"persona_f1", r.persona_f1},
                        {"succ_rate", r.succ_rate},
                        {"n_examples", r.n_examples},
                        {"knowledge_skipped", r.knowledge_skipped},
                        {"success_dialogues", r.success_dialogues}};
}

}  // namespace roleplay
