#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "roleplay/persona.hpp"
#include "roleplay/seed_ingest.hpp"
#include "roleplay/types.hpp"

namespace roleplay {

/// Placeholder name (without angle brackets) -> replacement text.
using Bindings = std::map<std::string, std::string, std::less<>>;

/// Text with <UPPER_CASE> placeholders. Every placeholder in the body is required.
class PromptTemplate {
public:
    PromptTemplate(std::string template_id, std::string body);
    /// Throws ConfigError if a listed placeholder does not occur in `body`.
    PromptTemplate(std::string template_id, std::string body, std::vector<std::string> required);

    /// Single pass substitution; bound values are never rescanned. Throws RenderError
    /// naming the first unbound placeholder.
    std::string render(const Bindings& bindings) const;

    const std::string& id() const noexcept { return id_; }
    const std::string& body() const noexcept { return body_; }
    const std::vector<std::string>& required_placeholders() const noexcept { return required_; }

    /// Distinct placeholder names in order of first occurrence.
    static std::vector<std::string> extract_placeholders(std::string_view body);

private:
    std::string id_;
    std::string body_;
    std::vector<std::string> required_;
};

struct AgentNames {
    std::string system;
    std::string user;
};

/// The environment and agent instruction templates. Defaults are embedded; any template
/// can be replaced by a `<template_id>.txt` file.
class PromptLibrary {
public:
    static const PromptLibrary& defaults();
    /// Defaults overlaid with every `<id>.txt` in `dir` whose id is known.
    static PromptLibrary with_overrides(const std::filesystem::path& dir);

    const PromptTemplate& get(std::string_view id) const;
    void set(PromptTemplate t);
    std::vector<std::string> ids() const;

    std::string render_environment(Domain domain) const;

    std::string render_user_profile(const UserProfile& profile) const;
    std::string render_user_personality(const Personality& personality, const TraitLexicon& lexicon) const;
    std::string render_user_task() const;
    std::string render_user_instruction(const UserProfile& profile, const Personality& personality,
                                        const std::string& env,
                                        const TraitLexicon& lexicon = TraitLexicon::defaults()) const;

    /// The goal block that the curation loop repeats every round.
    std::string render_system_task(const Target& target, const UserProfile& profile) const;
    /// Throws ConfigError when `knowledge` is empty.
    std::string render_system_instruction(const Target& target, const std::vector<KnowledgeTriple>& knowledge,
                                          const std::optional<std::vector<std::string>>& comments,
                                          const UserProfile& profile, const std::string& env,
                                          const std::string& system_name) const;

    /// Throws ConfigError when `ongoing` is empty.
    std::string render_moderator_instruction(const Target& target, const InContextPair& examples,
                                             const std::vector<Turn>& ongoing, const AgentNames& names,
                                             const std::string& env) const;

private:
    std::map<std::string, PromptTemplate, std::less<>> templates_;
};

/// "<subject, relation, object>" per line.
std::string serialize_knowledge(const std::vector<KnowledgeTriple>& knowledge);
/// "Key: Value" per line, profile order.
std::string verbalize_profile(const UserProfile& profile);
/// "[Name]: utterance" per line.
std::string render_dialogue(const std::vector<Turn>& turns, const AgentNames& names);

/// The user's display name from the profile's name slot, if any.
std::optional<std::string> profile_user_name(const UserProfile& profile);

}  // namespace roleplay
