#include "roleplay/json_io.hpp"

#include <fstream>
#include <sstream>

#include <fmt/format.h>

#include "roleplay/errors.hpp"
#include "text_util.hpp"

namespace roleplay {

namespace {

const ordered_json& require(const ordered_json& j, const char* key, std::size_t line,
                            const std::string& path) {
    if (!j.is_object()) throw ParseError(line, path, "expected an object");
    auto it = j.find(key);
    if (it == j.end()) {
        const auto field = path.empty() ? std::string(key) : path + "." + key;
        throw ParseError(line, path.empty() ? std::string(key) : field, "missing field");
    }
    return *it;
}

std::string require_string(const ordered_json& j, const char* key, std::size_t line,
                           const std::string& path, bool allow_empty = false) {
    const auto& v = require(j, key, line, path);
    const auto field = path.empty() ? std::string(key) : path + "." + key;
    if (!v.is_string()) throw ParseError(line, field, "expected a string");
    auto s = v.get<std::string>();
    if (!allow_empty && detail::trim(s).empty()) throw ParseError(line, field, "must be non-empty");
    return s;
}

// Profile values in seed files are sometimes lists; they are joined the way the seed
// data writes multi-valued slots.
std::optional<std::string> slot_value(const ordered_json& v, std::size_t line,
                                      const std::string& field) {
    if (v.is_string()) {
        auto s = std::string(detail::trim(v.get<std::string>()));
        if (s.empty()) return std::nullopt;
        return s;
    }
    if (v.is_number()) return v.dump();
    if (v.is_array()) {
        std::vector<std::string> parts;
        for (const auto& e : v) {
            if (!e.is_string()) throw ParseError(line, field, "list values must be strings");
            auto s = std::string(detail::trim(e.get<std::string>()));
            if (!s.empty()) parts.push_back(std::move(s));
        }
        if (parts.empty()) return std::nullopt;
        return detail::join(parts, "; ");
    }
    if (v.is_null()) return std::nullopt;
    throw ParseError(line, field, "expected a string or list of strings");
}

}  // namespace

ordered_json to_json(const Target& t) {
    return ordered_json{{"act", t.act}, {"topic", t.topic}, {"domain", to_string(t.domain)}};
}

ordered_json to_json(const KnowledgeTriple& k) {
    return ordered_json::array({k.subject, k.relation, k.object});
}

ordered_json to_json(const UserProfile& p) {
    ordered_json j = ordered_json::object();
    for (const auto& [k, v] : p.slots()) j[k] = v;
    return j;
}

ordered_json to_json(const Personality& p) {
    ordered_json j = ordered_json::object();
    for (Trait t : kAllTraits) j[std::string(to_string(t))] = to_string(p[t]);
    return j;
}

ordered_json to_json(const Turn& t) {
    return ordered_json{{"role", to_string(t.role)}, {"utterance", t.utterance}, {"round", t.round_index}};
}

ordered_json to_json(const DialogueSession& s) {
    ordered_json j;
    j["id"] = s.id;
    j["seed_id"] = s.seed_id;
    j["instance_index"] = s.instance_index;
    j["target"] = to_json(s.target);
    j["domain"] = to_string(s.target.domain);
    j["knowledge"] = ordered_json::array();
    for (const auto& k : s.knowledge) j["knowledge"].push_back(to_json(k));
    j["profile"] = to_json(s.profile);
    j["personality"] = to_json(s.personality);
    j["turns"] = ordered_json::array();
    for (const auto& t : s.turns) j["turns"].push_back(to_json(t));
    j["termination"] = to_string(s.termination);
    return j;
}

ordered_json to_json(const SeedExample& s) {
    ordered_json j;
    j["seed_id"] = s.seed_id;
    j["target"] = to_json(s.target);
    j["knowledge"] = ordered_json::array();
    for (const auto& k : s.knowledge) j["knowledge"].push_back(to_json(k));
    j["user_profile"] = to_json(s.profile_slots);
    j["conversation"] = ordered_json::array();
    for (const auto& t : s.seed_conversation)
        j["conversation"].push_back(ordered_json{{"role", to_string(t.role)}, {"utterance", t.utterance}});
    if (s.comments) j["comments"] = *s.comments;
    return j;
}

Target target_from_json(const ordered_json& j, std::size_t line, const std::string& path) {
    if (!j.is_object()) throw ParseError(line, path, "expected an object");
    Target t;
    t.act = require_string(j, "act", line, path);
    t.topic = require_string(j, "topic", line, path);
    const auto domain = require_string(j, "domain", line, path);
    auto d = parse_domain(domain);
    if (!d) throw ParseError(line, path + ".domain", fmt::format("unknown domain '{}'", domain));
    t.domain = *d;
    return t;
}

std::vector<KnowledgeTriple> knowledge_from_json(const ordered_json& j, std::size_t line,
                                                 const std::string& path) {
    if (!j.is_array()) throw ParseError(line, path, "expected an array of triples");
    std::vector<KnowledgeTriple> out;
    out.reserve(j.size());
    for (std::size_t i = 0; i < j.size(); ++i) {
        const auto field = fmt::format("{}[{}]", path, i);
        const auto& e = j[i];
        KnowledgeTriple k;
        if (e.is_array() && e.size() == 3) {
            for (const auto& part : e)
                if (!part.is_string() && !part.is_number())
                    throw ParseError(line, field, "triple parts must be strings");
            auto part = [&](std::size_t n) {
                return e[n].is_string() ? e[n].get<std::string>() : e[n].dump();
            };
            k = {part(0), part(1), part(2)};
        } else if (e.is_object()) {
            k = {require_string(e, "subject", line, field), require_string(e, "relation", line, field),
                 require_string(e, "object", line, field)};
        } else {
            throw ParseError(line, field, "expected [subject, relation, object]");
        }
        if (detail::trim(k.subject).empty() || detail::trim(k.relation).empty() ||
            detail::trim(k.object).empty())
            throw ParseError(line, field, "triple parts must be non-empty");
        out.push_back(std::move(k));
    }
    return out;
}

UserProfile profile_from_json(const ordered_json& j, std::size_t line, const std::string& path) {
    if (!j.is_object()) throw ParseError(line, path, "expected an object");
    UserProfile p;
    for (auto it = j.begin(); it != j.end(); ++it) {
        const auto field = path + "." + it.key();
        if (detail::trim(it.key()).empty()) throw ParseError(line, path, "empty slot key");
        // Empty values carry no preference and are dropped.
        if (auto v = slot_value(it.value(), line, field)) p.set(it.key(), *v);
    }
    return p;
}

Personality personality_from_json(const ordered_json& j, std::size_t line, const std::string& path) {
    if (!j.is_object()) throw ParseError(line, path, "expected an object");
    Personality p;
    for (Trait t : kAllTraits) {
        const auto key = std::string(to_string(t));
        const auto value = require_string(j, key.c_str(), line, path);
        auto pol = parse_polarity(value);
        if (!pol) throw ParseError(line, path + "." + key, fmt::format("unknown polarity '{}'", value));
        p.set(t, *pol);
    }
    if (j.size() != 5) throw ParseError(line, path, "expected exactly five traits");
    return p;
}

std::vector<Turn> turns_from_json(const ordered_json& j, std::size_t line, const std::string& path) {
    if (!j.is_array()) throw ParseError(line, path, "expected an array");
    std::vector<Turn> out;
    out.reserve(j.size());
    for (std::size_t i = 0; i < j.size(); ++i) {
        const auto field = fmt::format("{}[{}]", path, i);
        Turn t;
        const auto role = require_string(j[i], "role", line, field);
        auto r = parse_role(role);
        if (!r) throw ParseError(line, field + ".role", fmt::format("unknown role '{}'", role));
        t.role = *r;
        t.utterance = require_string(j[i], "utterance", line, field, true);
        if (auto it = j[i].find("round"); it != j[i].end()) {
            if (!it->is_number_integer()) throw ParseError(line, field + ".round", "expected an integer");
            t.round_index = it->get<int>();
        } else {
            t.round_index = round_of_position(i);
        }
        out.push_back(std::move(t));
    }
    return out;
}

DialogueSession session_from_json(const ordered_json& j, std::size_t line) {
    if (!j.is_object()) throw ParseError(line, "<record>", "expected a JSON object");
    DialogueSession s;
    s.id = require_string(j, "id", line, "");
    s.seed_id = require_string(j, "seed_id", line, "");
    const auto& idx = require(j, "instance_index", line, "");
    if (!idx.is_number_integer()) throw ParseError(line, "instance_index", "expected an integer");
    s.instance_index = idx.get<int>();
    s.target = target_from_json(require(j, "target", line, ""), line);
    s.knowledge = knowledge_from_json(require(j, "knowledge", line, ""), line);
    s.profile = profile_from_json(require(j, "profile", line, ""), line);
    s.personality = personality_from_json(require(j, "personality", line, ""), line);
    s.turns = turns_from_json(require(j, "turns", line, ""), line);
    const auto term = require_string(j, "termination", line, "");
    auto t = parse_termination(term);
    if (!t) throw ParseError(line, "termination", fmt::format("unknown termination '{}'", term));
    s.termination = *t;
    return s;
}

SeedExample seed_from_json(const ordered_json& j, std::size_t line) {
    if (!j.is_object()) throw ParseError(line, "<record>", "expected a JSON object");
    SeedExample s;
    s.seed_id = require_string(j, "seed_id", line, "");
    s.target = target_from_json(require(j, "target", line, ""), line);
    s.knowledge = knowledge_from_json(require(j, "knowledge", line, ""), line);
    if (s.knowledge.empty()) throw ParseError(line, "knowledge", "must be non-empty");
    if (auto it = j.find("user_profile"); it != j.end())
        s.profile_slots = profile_from_json(*it, line, "user_profile");
    if (auto it = j.find("conversation"); it != j.end()) {
        s.seed_conversation = turns_from_json(*it, line, "conversation");
        for (std::size_t i = 0; i < s.seed_conversation.size(); ++i) {
            if (detail::trim(s.seed_conversation[i].utterance).empty())
                throw ParseError(line, fmt::format("conversation[{}].utterance", i), "must be non-empty");
        }
    }
    if (auto it = j.find("comments"); it != j.end() && !it->is_null()) {
        if (!it->is_array()) throw ParseError(line, "comments", "expected an array of strings");
        std::vector<std::string> comments;
        for (const auto& c : *it) {
            if (!c.is_string()) throw ParseError(line, "comments", "expected an array of strings");
            comments.push_back(c.get<std::string>());
        }
        s.comments = std::move(comments);
    }
    return s;
}

void for_each_jsonl(const std::filesystem::path& path,
                    const std::function<void(const ordered_json&, std::size_t)>& on_record) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError(fmt::format("cannot open '{}' for reading", path.string()));
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (detail::trim(line).empty()) continue;
        ordered_json j;
        try {
            j = ordered_json::parse(line);
        } catch (const nlohmann::json::parse_error& e) {
            throw ParseError(lineno, "<json>", e.what());
        }
        on_record(j, lineno);
    }
    if (in.bad()) throw IoError(fmt::format("read error on '{}'", path.string()));
}

void write_jsonl(const std::filesystem::path& path, const std::vector<ordered_json>& records) {
    if (path.has_parent_path()) {
        std::error_code ec;
        std::filesystem::create_directories(path.parent_path(), ec);
    }
    auto tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw IoError(fmt::format("cannot open '{}' for writing", tmp.string()));
        for (const auto& r : records) out << r.dump() << '\n';
        if (!out) throw IoError(fmt::format("write error on '{}'", tmp.string()));
    }
    std::error_code ec;
    std::filesystem::rename(tmp, path, ec);
    if (ec) throw IoError(fmt::format("cannot move '{}' into place: {}", path.string(), ec.message()));
}

}  // namespace roleplay
