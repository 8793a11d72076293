#include "roleplay/orchestrator.hpp"

#include <algorithm>
#include <atomic>
#include <cctype>
#include <optional>
#include <thread>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "roleplay/errors.hpp"
#include "roleplay/rng.hpp"
#include "text_util.hpp"

namespace roleplay {

void CurationConfig::validate() const {
    if (max_rounds < 1) throw ConfigError("max_rounds must be at least 1");
    if (instances_per_seed < 1) throw ConfigError("instances_per_seed must be at least 1");
    if (!(temperature >= 0.0 && temperature <= 2.0)) throw ConfigError("temperature must lie in [0, 2]");
    if (max_tokens.system <= 0 || max_tokens.user <= 0 || max_tokens.moderator <= 0)
        throw ConfigError("max_tokens must be positive for every agent");
    if (moderator_check_from_round < 1) throw ConfigError("moderator_check_from_round must be at least 1");
    if (concurrency_limit < 1) throw ConfigError("concurrency_limit must be at least 1");
}

ordered_json to_json(const CurationConfig& cfg) {
    return ordered_json{{"max_rounds", cfg.max_rounds},
                        {"instances_per_seed", cfg.instances_per_seed},
                        {"temperature", cfg.temperature},
                        {"max_tokens",
                         {{"system", cfg.max_tokens.system},
                          {"user", cfg.max_tokens.user},
                          {"moderator", cfg.max_tokens.moderator}}},
                        {"moderator_check_from_round", cfg.moderator_check_from_round},
                        {"concurrency_limit", cfg.concurrency_limit}};
}

AgentBackends AgentBackends::shared(std::shared_ptr<ChatBackend> backend) {
    return {backend, backend, backend};
}

CurationContext make_context(const std::vector<SeedExample>& seeds, std::uint64_t rng_seed) {
    CurationContext ctx;
    ctx.pool = build_profile_pool(seeds);
    ctx.incontext = select_incontext_examples(seeds, rng_seed);
    return ctx;
}

Verdict parse_moderator_verdict(std::string_view text) {
    std::size_t i = 0;
    while (i < text.size() && !std::isalpha(static_cast<unsigned char>(text[i]))) ++i;
    std::size_t j = i;
    while (j < text.size() && std::isalpha(static_cast<unsigned char>(text[j]))) ++j;
    const auto token = detail::ascii_lower(text.substr(i, j - i));
    if (token == "yes") return Verdict::end;
    if (token == "no") return Verdict::cont;
    spdlog::warn("moderator answer '{}' is neither yes nor no; continuing", text);
    return Verdict::cont;
}

namespace {

std::string normalize_for_cues(std::string_view s) {
    std::string out;
    out.reserve(s.size());
    for (std::size_t i = 0; i < s.size(); ++i) {
        // U+2019 RIGHT SINGLE QUOTATION MARK -> '
        if (i + 2 < s.size() && static_cast<unsigned char>(s[i]) == 0xE2 &&
            static_cast<unsigned char>(s[i + 1]) == 0x80 && static_cast<unsigned char>(s[i + 2]) == 0x99) {
            out += '\'';
            i += 2;
            continue;
        }
        out += static_cast<char>(std::tolower(static_cast<unsigned char>(s[i])));
    }
    return out;
}

constexpr std::string_view kRejectionCues[] = {
    "i'll pass", "i will pass", "pass on it", "pass on this", "not interested", "no thanks", "no, thanks",
    "not for me", "i'd rather not", "i would rather not", "not really my thing", "not my thing",
    "i'm not a fan", "i am not a fan", "i don't like", "i do not like", "i'll skip", "i will skip",
    "don't think i'll", "don't think i will", "not going to"};

constexpr std::string_view kAcceptanceCues[] = {
    "check it out", "i'll watch", "i will watch", "i'll listen", "i will listen", "i'll try", "i will try",
    "give it a try", "give it a shot", "sounds great", "sounds good", "sounds interesting", "i'll definitely",
    "i will definitely", "looking forward", "add it to my", "thanks for the recommendation",
    "thank you for the recommendation", "can't wait", "i'd love to", "i would love to"};

template <std::size_t N>
bool has_cue(const std::string& text, const std::string_view (&cues)[N]) {
    return std::any_of(std::begin(cues), std::end(cues),
                       [&](std::string_view c) { return text.find(c) != std::string::npos; });
}

}  // namespace

Termination classify_termination(const std::vector<Turn>& turns, int verdict_round) {
    int inspected = 0;
    for (auto it = turns.rbegin(); it != turns.rend() && inspected < 2; ++it) {
        if (it->role != Role::user || it->round_index > verdict_round) continue;
        ++inspected;
        const auto text = normalize_for_cues(it->utterance);
        if (has_cue(text, kRejectionCues)) return Termination::moderator_reject;
        if (has_cue(text, kAcceptanceCues)) return Termination::moderator_accept;
    }
    return Termination::moderator_accept;
}

namespace {

std::string clean_utterance(std::string_view raw, const std::string& own_name) {
    auto text = detail::trim(raw);
    // Agents sometimes prefix their own name despite being told not to.
    for (const auto& prefix : {"[" + own_name + "]:", own_name + ":"}) {
        if (!own_name.empty() && text.substr(0, prefix.size()) == prefix) {
            text = detail::trim(text.substr(prefix.size()));
            break;
        }
    }
    return std::string(text);
}

std::string pick_system_name(const CurationContext& ctx, std::uint64_t rng_seed, const std::string& user_name) {
    std::vector<std::string> candidates;
    for (const auto& n : ctx.system_names)
        if (n != user_name) candidates.push_back(n);
    if (candidates.empty()) return "Assistant";
    Rng rng(substream(rng_seed, Stream::names));
    return candidates[rng.uniform_index(candidates.size())];
}

ChatResponse call(ChatBackend& backend, const ChatRequest& request, TokenUsage& usage) {
    auto r = backend.complete(request);
    usage += r.usage;
    return r;
}

}  // namespace

SessionRun run_session(const SeedExample& seed, const CurationConfig& cfg, const CurationContext& ctx,
                       const AgentBackends& backends, std::uint64_t rng_seed, int instance_index) {
    cfg.validate();
    if (!backends.system || !backends.user || !backends.moderator)
        throw ConfigError("backends must be provided for the system, user and moderator agents");
    if (seed.knowledge.empty()) throw ConfigError(fmt::format("seed '{}' has no knowledge", seed.seed_id));

    const auto start = std::chrono::steady_clock::now();
    SessionRun run;
    DialogueSession& s = run.session;
    s.id = session_scope(seed.seed_id, instance_index);
    s.seed_id = seed.seed_id;
    s.instance_index = instance_index;
    s.target = seed.target;
    s.knowledge = seed.knowledge;
    s.profile = sample_profile(ctx.pool, rng_seed);
    s.personality = sample_personality(rng_seed, ctx.lexicon);

    const auto& prompts = ctx.prompts;
    AgentNames names;
    std::string env, system_instruction, system_task, user_instruction;
    try {
        names.user = profile_user_name(s.profile).value_or("");
        names.system = pick_system_name(ctx, rng_seed, names.user);
        env = prompts.render_environment(s.target.domain);
        system_instruction =
            prompts.render_system_instruction(s.target, s.knowledge, seed.comments, s.profile, env, names.system);
        system_task = prompts.render_system_task(s.target, s.profile);
        user_instruction = prompts.render_user_instruction(s.profile, s.personality, env, ctx.lexicon);
    } catch (const RenderError& e) {
        throw ConfigError(fmt::format("seed '{}': cannot render instructions: {}", seed.seed_id, e.what()));
    }
    run.system_name = names.system;

    std::vector<ChatMessage> system_ctx{{MessageRole::system_instruction, system_instruction}};
    std::vector<ChatMessage> user_ctx{{MessageRole::system_instruction, user_instruction}};

    for (int round = 1; round <= cfg.max_rounds; ++round) {
        if (round >= 2) system_ctx.push_back({MessageRole::system_instruction, system_task});

        ChatRequest sys_req{system_ctx, cfg.temperature, cfg.max_tokens.system, AgentTag::system};
        auto sys_text = clean_utterance(call(*backends.system, sys_req, run.usage).content, names.system);
        if (sys_text.empty()) throw TransportError("system agent returned an empty utterance");
        s.turns.push_back({Role::system, sys_text, round});
        system_ctx.push_back({MessageRole::assistant, sys_text});
        user_ctx.push_back({MessageRole::user, sys_text});

        ChatRequest user_req{user_ctx, cfg.temperature, cfg.max_tokens.user, AgentTag::user};
        auto user_text = clean_utterance(call(*backends.user, user_req, run.usage).content, names.user);
        if (user_text.empty()) throw TransportError("user agent returned an empty utterance");
        s.turns.push_back({Role::user, user_text, round});
        user_ctx.push_back({MessageRole::assistant, user_text});
        system_ctx.push_back({MessageRole::user, user_text});

        // The cap decides the last round, so the moderator is not asked there.
        if (round < cfg.moderator_check_from_round || round == cfg.max_rounds) continue;

        std::string mod_instruction;
        try {
            mod_instruction = prompts.render_moderator_instruction(s.target, ctx.incontext, s.turns, names, env);
        } catch (const RenderError& e) {
            throw ConfigError(fmt::format("cannot render moderator instruction: {}", e.what()));
        }
        ChatRequest mod_req{{{MessageRole::system_instruction, mod_instruction}},
                            cfg.temperature,
                            cfg.max_tokens.moderator,
                            AgentTag::moderator};
        const auto verdict = parse_moderator_verdict(call(*backends.moderator, mod_req, run.usage).content);
        if (verdict == Verdict::end) {
            s.termination = classify_termination(s.turns, round);
            break;
        }
    }
    if (s.termination == Termination::unset) s.termination = Termination::round_cap;

    run.wall_time =
        std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::steady_clock::now() - start);
    return run;
}

std::string session_scope(std::string_view seed_id, int instance_index) {
    return fmt::format("{}-{}", seed_id, instance_index);
}

std::uint64_t instance_seed(std::uint64_t batch_seed, std::string_view seed_id, int instance_index) {
    return mix64(hash_bytes(seed_id, mix64(batch_seed)) ^ mix64(static_cast<std::uint64_t>(instance_index) + 1));
}

std::vector<DialogueSession> BatchResult::sessions() const {
    std::vector<DialogueSession> out;
    out.reserve(runs.size());
    for (const auto& r : runs) out.push_back(r.session);
    return out;
}

BatchResult run_batch(const std::vector<SeedExample>& seeds, const CurationConfig& cfg,
                      const CurationContext& ctx, const BackendFactory& backends, std::uint64_t batch_seed) {
    cfg.validate();
    if (seeds.empty()) throw ConfigError("run_batch needs at least one seed");
    if (!backends) throw ConfigError("run_batch needs a backend factory");

    struct Job {
        std::size_t seed;
        int instance;
    };
    std::vector<Job> jobs;
    for (std::size_t i = 0; i < seeds.size(); ++i)
        for (int k = 0; k < cfg.instances_per_seed; ++k) jobs.push_back({i, k});

    std::vector<std::optional<SessionRun>> done(jobs.size());
    std::vector<std::optional<SessionFailure>> failed(jobs.size());
    std::atomic<std::size_t> next{0};

    auto worker = [&] {
        for (std::size_t j = next++; j < jobs.size(); j = next++) {
            const auto& seed = seeds[jobs[j].seed];
            const int inst = jobs[j].instance;
            try {
                auto agents = backends(seed, inst);
                done[j] = run_session(seed, cfg, ctx, agents, instance_seed(batch_seed, seed.seed_id, inst), inst);
            } catch (const std::exception& e) {
                spdlog::error("session {}-{} aborted: {}", seed.seed_id, inst, e.what());
                failed[j] = SessionFailure{seed.seed_id, inst, e.what()};
            }
        }
    };

    const auto n_threads = std::min<std::size_t>(static_cast<std::size_t>(cfg.concurrency_limit), jobs.size());
    {
        std::vector<std::jthread> pool;
        for (std::size_t t = 1; t < n_threads; ++t) pool.emplace_back(worker);
        worker();
    }

    BatchResult out;
    for (std::size_t j = 0; j < jobs.size(); ++j) {
        if (done[j]) out.runs.push_back(std::move(*done[j]));
        if (failed[j]) out.failures.push_back(std::move(*failed[j]));
    }
    return out;
}

ordered_json run_log_record(const SessionRun& run) {
    return ordered_json{{"seed_id", run.session.seed_id},
                        {"instance_index", run.session.instance_index},
                        {"rounds", run.session.rounds()},
                        {"termination", to_string(run.session.termination)},
                        {"token_usage",
                         {{"prompt_tokens", run.usage.prompt_tokens},
                          {"completion_tokens", run.usage.completion_tokens}}},
                        {"wall_time", run.wall_time.count()}};
}

}  // namespace roleplay
