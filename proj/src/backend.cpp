#include "roleplay/backend.hpp"

#include <cstdlib>
#include <fstream>
#include <sstream>
#include <thread>

#include <fmt/format.h>
#include <httplib.h>
#include <openssl/evp.h>
#include <spdlog/spdlog.h>

#include "roleplay/errors.hpp"
#include "roleplay/rng.hpp"
#include "text_util.hpp"

namespace roleplay {

namespace {

std::int64_t rough_token_count(std::string_view text) {
    std::int64_t n = 0;
    bool in_word = false;
    for (unsigned char c : text) {
        const bool space = std::isspace(c) != 0;
        if (!space && !in_word) ++n;
        in_word = !space;
    }
    return n;
}

std::string_view wire_role(MessageRole r) {
    switch (r) {
        case MessageRole::system_instruction: return "system";
        case MessageRole::assistant: return "assistant";
        case MessageRole::user: return "user";
    }
    return "user";
}

std::optional<MessageRole> parse_message_role(std::string_view s) {
    if (s == "system_instruction" || s == "system") return MessageRole::system_instruction;
    if (s == "assistant") return MessageRole::assistant;
    if (s == "user") return MessageRole::user;
    return std::nullopt;
}


std::vector<std::string> read_lines(const std::filesystem::path& file) {
    std::ifstream in(file);
    if (!in) throw IoError(fmt::format("cannot open script '{}'", file.string()));
    std::vector<std::string> out;
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (!detail::trim(line).empty()) out.push_back(line);
    }
    return out;
}

}  // namespace

std::string sha256_hex(std::string_view data) {
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    if (EVP_Digest(data.data(), data.size(), digest, &len, EVP_sha256(), nullptr) != 1)
        throw Error("SHA-256 digest failed");
    std::string hex;
    hex.reserve(len * 2);
    for (unsigned int i = 0; i < len; ++i) hex += fmt::format("{:02x}", digest[i]);
    return hex;
}

std::string_view to_string(MessageRole r) {
    switch (r) {
        case MessageRole::system_instruction: return "system_instruction";
        case MessageRole::assistant: return "assistant";
        case MessageRole::user: return "user";
    }
    return "user";
}

std::string_view to_string(AgentTag t) {
    switch (t) {
        case AgentTag::system: return "system";
        case AgentTag::user: return "user";
        case AgentTag::moderator: return "moderator";
    }
    return "system";
}

std::optional<AgentTag> parse_agent_tag(std::string_view s) {
    if (s == "system") return AgentTag::system;
    if (s == "user") return AgentTag::user;
    if (s == "moderator") return AgentTag::moderator;
    return std::nullopt;
}

void validate_request(const ChatRequest& request) {
    if (request.messages.empty()) throw ConfigError("chat request has no messages");
    if (!(request.temperature >= 0.0 && request.temperature <= 2.0))
        throw ConfigError(fmt::format("temperature {} outside [0, 2]", request.temperature));
    if (request.max_tokens <= 0) throw ConfigError("max_tokens must be positive");
    for (const auto& m : request.messages)
        if (m.role != MessageRole::system_instruction && detail::trim(m.content).empty())
            throw ConfigError("assistant/user messages must be non-empty");
}

ordered_json to_json(const ChatRequest& r) {
    ordered_json j;
    j["agent_tag"] = to_string(r.agent_tag);
    j["temperature"] = r.temperature;
    j["max_tokens"] = r.max_tokens;
    j["messages"] = ordered_json::array();
    for (const auto& m : r.messages)
        j["messages"].push_back(ordered_json{{"role", to_string(m.role)}, {"content", m.content}});
    return j;
}

ordered_json to_json(const ChatResponse& r) {
    return ordered_json{{"content", r.content},
                        {"usage", {{"prompt_tokens", r.usage.prompt_tokens},
                                   {"completion_tokens", r.usage.completion_tokens}}},
                        {"latency_ms", r.latency_ms}};
}

ChatRequest request_from_json(const ordered_json& j) {
    ChatRequest r;
    auto tag = parse_agent_tag(j.at("agent_tag").get<std::string>());
    if (!tag) throw ParseError(0, "agent_tag", "unknown agent tag");
    r.agent_tag = *tag;
    r.temperature = j.at("temperature").get<double>();
    r.max_tokens = j.at("max_tokens").get<int>();
    for (const auto& m : j.at("messages")) {
        auto role = parse_message_role(m.at("role").get<std::string>());
        if (!role) throw ParseError(0, "messages.role", "unknown message role");
        r.messages.push_back({*role, m.at("content").get<std::string>()});
    }
    return r;
}

ChatResponse response_from_json(const ordered_json& j) {
    ChatResponse r;
    r.content = j.at("content").get<std::string>();
    if (auto it = j.find("usage"); it != j.end()) {
        r.usage.prompt_tokens = it->value("prompt_tokens", std::int64_t{0});
        r.usage.completion_tokens = it->value("completion_tokens", std::int64_t{0});
    }
    r.latency_ms = j.value("latency_ms", std::int64_t{0});
    return r;
}

std::string cache_key(const ChatRequest& request, std::string_view scope) {
    ordered_json j;
    if (!scope.empty()) j["scope"] = scope;
    j["messages"] = ordered_json::array();
    for (const auto& m : request.messages)
        j["messages"].push_back(ordered_json::array({to_string(m.role), m.content}));
    j["temperature"] = request.temperature;
    j["max_tokens"] = request.max_tokens;
    return sha256_hex(j.dump());
}

// ---------------------------------------------------------------------------
// ScriptedBackend

ScriptedBackend::ScriptedBackend(Script script) {
    for (auto& [tag, lines] : script) lines_[tag] = std::deque<std::string>(lines.begin(), lines.end());
}

ScriptedBackend::Script ScriptedBackend::load_script(const std::filesystem::path& path) {
    Script script;
    std::error_code ec;
    if (std::filesystem::is_directory(path, ec)) {
        for (AgentTag tag : {AgentTag::system, AgentTag::user, AgentTag::moderator}) {
            const auto file = path / (std::string(to_string(tag)) + ".txt");
            if (std::filesystem::exists(file)) script[tag] = read_lines(file);
        }
        return script;
    }
    std::ifstream in(path);
    if (!in) throw IoError(fmt::format("cannot open script '{}'", path.string()));
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::parse_error& e) {
        throw ParseError(0, "<script>", e.what());
    }
    if (!j.is_object()) throw ParseError(0, "<script>", "expected an object keyed by agent tag");
    for (auto it = j.begin(); it != j.end(); ++it) {
        auto tag = parse_agent_tag(it.key());
        if (!tag) throw ParseError(0, it.key(), "unknown agent tag");
        script[*tag] = it.value().get<std::vector<std::string>>();
    }
    return script;
}

ChatResponse ScriptedBackend::complete(const ChatRequest& request) {
    validate_request(request);
    std::lock_guard lock(mu_);
    requests_.push_back(request);
    auto& q = lines_[request.agent_tag];
    if (q.empty())
        throw ScriptExhaustedError(fmt::format("script for agent '{}' is exhausted", to_string(request.agent_tag)));
    ChatResponse r;
    r.content = std::move(q.front());
    q.pop_front();
    for (const auto& m : request.messages) r.usage.prompt_tokens += rough_token_count(m.content);
    r.usage.completion_tokens = rough_token_count(r.content);
    return r;
}

std::vector<ChatRequest> ScriptedBackend::requests() const {
    std::lock_guard lock(mu_);
    return requests_;
}

std::size_t ScriptedBackend::remaining(AgentTag tag) const {
    std::lock_guard lock(mu_);
    auto it = lines_.find(tag);
    return it == lines_.end() ? 0 : it->second.size();
}

// ---------------------------------------------------------------------------
// LiveBackend

namespace {
std::string api_key_from_env(const std::string& var) {
    const char* v = std::getenv(var.c_str());
    if (!v || !*v) throw ConfigError(fmt::format("environment variable {} is not set", var));
    return v;
}
}  // namespace

LiveBackend::LiveBackend(LiveBackendConfig config, Sleeper sleeper)
    : LiveBackend(config, api_key_from_env(config.api_key_env), std::move(sleeper)) {}

LiveBackend::LiveBackend(LiveBackendConfig config, std::string api_key, Sleeper sleeper)
    : config_(std::move(config)),
      api_key_(std::move(api_key)),
      sleeper_(std::move(sleeper)),
      jitter_state_(config_.jitter_seed) {
    const auto scheme = config_.url.find("://");
    if (scheme == std::string::npos) throw ConfigError(fmt::format("invalid endpoint URL '{}'", config_.url));
    const auto slash = config_.url.find('/', scheme + 3);
    scheme_host_port_ = config_.url.substr(0, slash);
    path_ = slash == std::string::npos ? "/" : config_.url.substr(slash);
    if (config_.max_attempts < 1) throw ConfigError("max_attempts must be at least 1");
    if (!sleeper_) sleeper_ = [](std::chrono::milliseconds d) { std::this_thread::sleep_for(d); };
}

ordered_json LiveBackend::wire_body(const ChatRequest& request) const {
    ordered_json body;
    body["model"] = config_.model;
    body["messages"] = ordered_json::array();
    for (const auto& m : request.messages)
        body["messages"].push_back(ordered_json{{"role", wire_role(m.role)}, {"content", m.content}});
    body["temperature"] = request.temperature;
    body["max_tokens"] = request.max_tokens;
    return body;
}

std::chrono::milliseconds LiveBackend::backoff(int attempt) {
    const auto base = config_.base_backoff.count() * (std::int64_t{1} << attempt);
    std::uint64_t r;
    {
        std::lock_guard lock(jitter_mu_);
        jitter_state_ = mix64(jitter_state_);
        r = jitter_state_;
    }
    const auto jitter = static_cast<std::int64_t>(static_cast<double>(r >> 11) * 0x1.0p-53 * 0.5 *
                                                  static_cast<double>(base));
    return std::chrono::milliseconds(base + jitter);
}

ChatResponse LiveBackend::complete(const ChatRequest& request) {
    validate_request(request);
    const auto body = wire_body(request).dump();
    std::string last_error;
    for (int attempt = 0; attempt < config_.max_attempts; ++attempt) {
        if (attempt > 0) sleeper_(backoff(attempt - 1));
        httplib::Client client(scheme_host_port_);
        client.set_connection_timeout(config_.timeout);
        client.set_read_timeout(config_.timeout);
        client.set_write_timeout(config_.timeout);
        httplib::Headers headers{{"Authorization", "Bearer " + api_key_}};
        const auto start = std::chrono::steady_clock::now();
        auto res = client.Post(path_, headers, body, "application/json");
        const auto elapsed =
            std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::steady_clock::now() - start);
        if (!res) {
            last_error = fmt::format("transport error: {}", httplib::to_string(res.error()));
            spdlog::warn("chat request attempt {} failed: {}", attempt + 1, last_error);
            continue;
        }
        if (res->status == 429 || res->status >= 500) {
            last_error = fmt::format("HTTP {}", res->status);
            spdlog::warn("chat request attempt {} failed: {}", attempt + 1, last_error);
            continue;
        }
        if (res->status >= 400)
            throw RequestError(res->status, fmt::format("chat endpoint rejected request: HTTP {}: {}",
                                                        res->status, res->body.substr(0, 300)));
        ordered_json j;
        try {
            j = ordered_json::parse(res->body);
        } catch (const nlohmann::json::parse_error& e) {
            last_error = fmt::format("unparseable response body: {}", e.what());
            continue;
        }
        try {
            ChatResponse out;
            out.content = j.at("choices").at(0).at("message").at("content").get<std::string>();
            if (auto u = j.find("usage"); u != j.end() && u->is_object()) {
                out.usage.prompt_tokens = u->value("prompt_tokens", std::int64_t{0});
                out.usage.completion_tokens = u->value("completion_tokens", std::int64_t{0});
            }
            out.latency_ms = elapsed.count();
            return out;
        } catch (const nlohmann::json::exception& e) {
            last_error = fmt::format("response missing choices[0].message.content: {}", e.what());
        }
    }
    throw TransportError(fmt::format("chat request failed after {} attempts: {}", config_.max_attempts, last_error));
}

// ---------------------------------------------------------------------------
// ReplayCache / CachingBackend

ReplayCache::ReplayCache(std::filesystem::path path) : path_(std::move(path)) {
    if (!std::filesystem::exists(path_)) return;
    for_each_jsonl(path_, [&](const ordered_json& j, std::size_t line) {
        try {
            entries_.try_emplace(j.at("key").get<std::string>(), response_from_json(j.at("response")));
        } catch (const nlohmann::json::exception& e) {
            throw ParseError(line, "response", e.what());
        }
    });
}

std::optional<ChatResponse> ReplayCache::lookup(const std::string& key) const {
    std::lock_guard lock(mu_);
    auto it = entries_.find(key);
    if (it == entries_.end()) return std::nullopt;
    return it->second;
}

ChatResponse ReplayCache::insert(const std::string& key, const ChatRequest& request, const ChatResponse& response) {
    std::lock_guard lock(mu_);
    auto [it, inserted] = entries_.try_emplace(key, response);
    if (!inserted) return it->second;
    if (path_.has_parent_path()) {
        std::error_code ec;
        std::filesystem::create_directories(path_.parent_path(), ec);
    }
    std::ofstream out(path_, std::ios::app | std::ios::binary);
    if (!out) throw IoError(fmt::format("cannot append to cache '{}'", path_.string()));
    ordered_json rec{{"key", key}, {"request", to_json(request)}, {"response", to_json(response)}};
    out << rec.dump() << '\n';
    out.flush();
    if (!out) throw IoError(fmt::format("write error on cache '{}'", path_.string()));
    return response;
}

std::size_t ReplayCache::size() const {
    std::lock_guard lock(mu_);
    return entries_.size();
}

CachingBackend::CachingBackend(std::shared_ptr<ReplayCache> cache, std::shared_ptr<ChatBackend> inner,
                               std::string scope)
    : cache_(std::move(cache)), inner_(std::move(inner)), scope_(std::move(scope)) {
    if (!cache_) throw ConfigError("caching backend needs a cache");
}

ChatResponse CachingBackend::complete(const ChatRequest& request) {
    validate_request(request);
    const auto key = cache_key(request, scope_);
    if (auto hit = cache_->lookup(key)) return *hit;
    if (!inner_) throw CacheMissError(fmt::format("replay cache has no entry for request {}", key.substr(0, 16)));
    return cache_->insert(key, request, inner_->complete(request));
}

ordered_json BackendSpec::to_json() const {
    ordered_json j{{"backend", kind}};
    if (!script.empty()) j["script"] = script.string();
    if (!cache.empty()) j["cache"] = cache.string();
    if (kind == "live") {
        j["url"] = live.url;
        j["model"] = live.model;
    }
    return j;
}

BackendSource backend_source(const BackendSpec& spec) {
    std::shared_ptr<ReplayCache> cache;
    if (!spec.cache.empty()) cache = std::make_shared<ReplayCache>(spec.cache);
    auto wrap = [cache](std::shared_ptr<ChatBackend> inner, const std::string& scope) -> std::shared_ptr<ChatBackend> {
        if (!cache) return inner;
        return std::make_shared<CachingBackend>(cache, std::move(inner), scope);
    };

    if (spec.kind == "replay") {
        if (!cache) throw ConfigError("replay backend needs a cache file");
        return [wrap](const std::string& scope) { return wrap(nullptr, scope); };
    }
    if (spec.kind == "live") {
        std::shared_ptr<ChatBackend> live = std::make_shared<LiveBackend>(spec.live);
        return [wrap, live](const std::string& scope) { return wrap(live, scope); };
    }
    if (spec.kind != "scripted") throw ConfigError(fmt::format("unknown backend '{}'", spec.kind));
    if (spec.script.empty()) throw ConfigError("scripted backend needs a script");
    auto script = ScriptedBackend::load_script(spec.script);
    return [wrap, script](const std::string& scope) { return wrap(std::make_shared<ScriptedBackend>(script), scope); };
}

}  // namespace roleplay
