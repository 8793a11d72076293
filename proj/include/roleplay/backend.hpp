#pragma once

#include <chrono>
#include <cstdint>
#include <deque>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "roleplay/json_io.hpp"

namespace roleplay {

enum class MessageRole { system_instruction, assistant, user };
enum class AgentTag { system, user, moderator };

std::string_view to_string(MessageRole r);
std::string_view to_string(AgentTag t);
std::optional<AgentTag> parse_agent_tag(std::string_view s);

struct ChatMessage {
    MessageRole role = MessageRole::user;
    std::string content;

    bool operator==(const ChatMessage&) const = default;
};

struct ChatRequest {
    std::vector<ChatMessage> messages;
    double temperature = 0.75;
    int max_tokens = 100;
    AgentTag agent_tag = AgentTag::system;

    bool operator==(const ChatRequest&) const = default;
};

struct TokenUsage {
    std::int64_t prompt_tokens = 0;
    std::int64_t completion_tokens = 0;

    TokenUsage& operator+=(const TokenUsage& o) {
        prompt_tokens += o.prompt_tokens;
        completion_tokens += o.completion_tokens;
        return *this;
    }
    bool operator==(const TokenUsage&) const = default;
};

struct ChatResponse {
    std::string content;
    TokenUsage usage;
    std::int64_t latency_ms = 0;
};

/// Throws ConfigError when the request violates its invariants.
void validate_request(const ChatRequest& request);

ordered_json to_json(const ChatRequest& r);
ordered_json to_json(const ChatResponse& r);
ChatRequest request_from_json(const ordered_json& j);
ChatResponse response_from_json(const ordered_json& j);

/// Lowercase hex SHA-256 of `data`.
std::string sha256_hex(std::string_view data);

/// Hex SHA-256 over the canonical JSON of messages, temperature and max_tokens. A non-empty
/// scope (one per session) keeps identical requests from different sessions apart.
std::string cache_key(const ChatRequest& request, std::string_view scope = {});

/// Chat completion contract shared by every backend.
class ChatBackend {
public:
    virtual ~ChatBackend() = default;
    virtual ChatResponse complete(const ChatRequest& request) = 0;
};

/// Replies with pre-written lines, consumed strictly in order per agent tag. Keeps every
/// request it receives for inspection.
class ScriptedBackend : public ChatBackend {
public:
    using Script = std::map<AgentTag, std::vector<std::string>>;

    explicit ScriptedBackend(Script script);

    /// JSON file {"system": [...], "user": [...], "moderator": [...]}, or a directory with
    /// system.txt / user.txt / moderator.txt holding one line per reply.
    static Script load_script(const std::filesystem::path& path);

    ChatResponse complete(const ChatRequest& request) override;

    std::vector<ChatRequest> requests() const;
    std::size_t remaining(AgentTag tag) const;

private:
    mutable std::mutex mu_;
    std::map<AgentTag, std::deque<std::string>> lines_;
    std::vector<ChatRequest> requests_;
};

struct LiveBackendConfig {
    std::string url = "https://api.openai.com/v1/chat/completions";
    std::string model = "gpt-3.5-turbo";
    std::string api_key_env = "OPENAI_API_KEY";
    int max_attempts = 5;
    std::chrono::milliseconds base_backoff{500};
    std::chrono::seconds timeout{60};
    std::uint64_t jitter_seed = 0;
};

/// Chat-completions client over HTTP(S). Retries network errors, 429 and 5xx with
/// exponential backoff (base * 2^attempt plus up to 50% jitter); other 4xx raise
/// RequestError immediately.
class LiveBackend : public ChatBackend {
public:
    using Sleeper = std::function<void(std::chrono::milliseconds)>;

    /// Reads the API key from the configured environment variable; throws ConfigError
    /// naming the variable when it is unset.
    explicit LiveBackend(LiveBackendConfig config, Sleeper sleeper = {});
    LiveBackend(LiveBackendConfig config, std::string api_key, Sleeper sleeper = {});

    ChatResponse complete(const ChatRequest& request) override;

    /// Request body sent to the endpoint.
    ordered_json wire_body(const ChatRequest& request) const;

private:
    std::chrono::milliseconds backoff(int attempt);

    LiveBackendConfig config_;
    std::string api_key_;
    std::string scheme_host_port_;
    std::string path_;
    Sleeper sleeper_;
    std::mutex jitter_mu_;
    std::uint64_t jitter_state_;
};

/// Content-addressed JSONL store of {key, request, response}. Appends are serialized;
/// the first record for a key wins.
class ReplayCache {
public:
    explicit ReplayCache(std::filesystem::path path);

    std::optional<ChatResponse> lookup(const std::string& key) const;
    /// Appends unless the key is already present. Returns the stored response.
    ChatResponse insert(const std::string& key, const ChatRequest& request, const ChatResponse& response);
    std::size_t size() const;
    const std::filesystem::path& path() const noexcept { return path_; }

private:
    std::filesystem::path path_;
    mutable std::mutex mu_;
    std::unordered_map<std::string, ChatResponse> entries_;
};

/// Record mode: serve hits from the cache, forward misses to `inner` and record them.
/// Replay mode (`inner` null): serve hits only; misses raise CacheMissError.
/// Keys are computed under `scope`; give each session its own so replay returns what
/// that session saw.
class CachingBackend : public ChatBackend {
public:
    CachingBackend(std::shared_ptr<ReplayCache> cache, std::shared_ptr<ChatBackend> inner, std::string scope = {});

    ChatResponse complete(const ChatRequest& request) override;

private:
    std::shared_ptr<ReplayCache> cache_;
    std::shared_ptr<ChatBackend> inner_;
    std::string scope_;
};

/// Which backend a run uses: "live", "scripted" or "replay", with its inputs.
struct BackendSpec {
    std::string kind = "scripted";
    std::filesystem::path script;
    /// Record/replay cache; required for "replay", optional otherwise.
    std::filesystem::path cache;
    LiveBackendConfig live;

    ordered_json to_json() const;
};

/// Producer of one backend per session, called with the session's cache scope.
using BackendSource = std::function<std::shared_ptr<ChatBackend>(const std::string& scope)>;

/// Scripted backends are fresh copies of the script so each session consumes its own
/// lines; the live client is shared. Throws ConfigError on a missing script or cache, or
/// an unknown kind.
BackendSource backend_source(const BackendSpec& spec);

}  // namespace roleplay
