#pragma once

#include <cstddef>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "roleplay/types.hpp"

namespace roleplay {

using ordered_json = nlohmann::ordered_json;

ordered_json to_json(const Target& t);
ordered_json to_json(const KnowledgeTriple& k);
ordered_json to_json(const UserProfile& p);
ordered_json to_json(const Personality& p);
ordered_json to_json(const Turn& t);
ordered_json to_json(const DialogueSession& s);
ordered_json to_json(const SeedExample& s);

// Parsers throw ParseError carrying `line` and a dotted field path.
Target target_from_json(const ordered_json& j, std::size_t line, const std::string& path = "target");
std::vector<KnowledgeTriple> knowledge_from_json(const ordered_json& j, std::size_t line,
                                                 const std::string& path = "knowledge");
UserProfile profile_from_json(const ordered_json& j, std::size_t line,
                              const std::string& path = "profile");
Personality personality_from_json(const ordered_json& j, std::size_t line,
                                  const std::string& path = "personality");
std::vector<Turn> turns_from_json(const ordered_json& j, std::size_t line,
                                  const std::string& path = "turns");
DialogueSession session_from_json(const ordered_json& j, std::size_t line);
SeedExample seed_from_json(const ordered_json& j, std::size_t line);

/// Calls `on_record(json, line)` for each non-blank line. Throws IoError if unreadable and
/// ParseError (field "<json>") on syntax errors.
void for_each_jsonl(const std::filesystem::path& path,
                    const std::function<void(const ordered_json&, std::size_t)>& on_record);

/// Writes one compact JSON object per line, via a temp file renamed into place.
void write_jsonl(const std::filesystem::path& path, const std::vector<ordered_json>& records);

}  // namespace roleplay
