#pragma once

#include <chrono>
#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "roleplay/backend.hpp"
#include "roleplay/persona.hpp"
#include "roleplay/prompting.hpp"
#include "roleplay/seed_ingest.hpp"
#include "roleplay/types.hpp"

namespace roleplay {

struct MaxTokens {
    int system = 100;
    int user = 80;
    int moderator = 20;

    bool operator==(const MaxTokens&) const = default;
};

struct CurationConfig {
    int max_rounds = 8;
    int instances_per_seed = 3;
    double temperature = 0.75;
    MaxTokens max_tokens;
    /// First round after which the moderator is consulted.
    int moderator_check_from_round = 2;
    int concurrency_limit = 4;

    /// Throws ConfigError on out-of-range values.
    void validate() const;
    bool operator==(const CurationConfig&) const = default;
};

ordered_json to_json(const CurationConfig& cfg);

/// One backend per agent. They may be the same object.
struct AgentBackends {
    std::shared_ptr<ChatBackend> system;
    std::shared_ptr<ChatBackend> user;
    std::shared_ptr<ChatBackend> moderator;

    /// All three agents share `backend`.
    static AgentBackends shared(std::shared_ptr<ChatBackend> backend);
};

/// Everything a session needs besides the seed: pool, moderator examples, lexicon,
/// templates and the display names drawn for the system agent.
struct CurationContext {
    ProfileSlotPool pool;
    InContextPair incontext;
    TraitLexicon lexicon = TraitLexicon::defaults();
    PromptLibrary prompts = PromptLibrary::defaults();
    std::vector<std::string> system_names = {"Yuhang Wang", "Haizheng Ma", "Jian Wang", "Wenjie Li"};
};

/// Builds pool and moderator examples from the seed set.
CurationContext make_context(const std::vector<SeedExample>& seeds, std::uint64_t rng_seed);

enum class Verdict { end, cont };

/// "yes" ends, "no" continues, judged on the first alphabetic token (case-insensitive).
/// Anything else continues and logs a warning.
Verdict parse_moderator_verdict(std::string_view text);

/// Acceptance/rejection label for a session the moderator ended after `verdict_round`.
Termination classify_termination(const std::vector<Turn>& turns, int verdict_round);

struct SessionRun {
    DialogueSession session;
    TokenUsage usage;
    std::chrono::milliseconds wall_time{0};
    std::string system_name;
};

/// Runs one role-play session. Backend errors propagate; nothing partial is returned.
SessionRun run_session(const SeedExample& seed, const CurationConfig& cfg, const CurationContext& ctx,
                       const AgentBackends& backends, std::uint64_t rng_seed, int instance_index = 0);

/// Session id for instance `instance_index` of `seed_id`; also its replay cache scope.
std::string session_scope(std::string_view seed_id, int instance_index);

/// Seed for instance `instance_index` of `seed_id` within a batch.
std::uint64_t instance_seed(std::uint64_t batch_seed, std::string_view seed_id, int instance_index);

struct SessionFailure {
    std::string seed_id;
    int instance_index = 0;
    std::string error;
};

struct BatchResult {
    /// Sessions in (seed order, instance index) order.
    std::vector<SessionRun> runs;
    std::vector<SessionFailure> failures;

    std::vector<DialogueSession> sessions() const;
};

/// Creates the backends for one session. Called once per session, possibly concurrently.
using BackendFactory = std::function<AgentBackends(const SeedExample& seed, int instance_index)>;

/// instances_per_seed sessions per seed, at most cfg.concurrency_limit in flight.
/// Per-session failures are collected, not thrown. Throws ConfigError on an empty seed list.
BatchResult run_batch(const std::vector<SeedExample>& seeds, const CurationConfig& cfg,
                      const CurationContext& ctx, const BackendFactory& backends, std::uint64_t batch_seed);

/// Run-log line for one session.
ordered_json run_log_record(const SessionRun& run);

}  // namespace roleplay
