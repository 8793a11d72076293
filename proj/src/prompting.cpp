#include "roleplay/prompting.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include <fmt/format.h>

#include "roleplay/errors.hpp"
#include "text_util.hpp"

namespace roleplay {

namespace {

bool is_marker_char(char c, bool first) {
    return (c >= 'A' && c <= 'Z') || (!first && ((c >= '0' && c <= '9') || c == '_'));
}

// Calls on_text / on_marker for the body split at <UPPER_CASE> markers.
template <typename Text, typename Marker>
void scan_markers(std::string_view body, Text&& on_text, Marker&& on_marker) {
    std::size_t pos = 0;
    while (pos < body.size()) {
        const auto open = body.find('<', pos);
        if (open == std::string_view::npos) break;
        std::size_t end = open + 1;
        while (end < body.size() && is_marker_char(body[end], end == open + 1)) ++end;
        if (end < body.size() && body[end] == '>' && end > open + 1) {
            on_text(body.substr(pos, open - pos));
            on_marker(body.substr(open + 1, end - open - 1));
            pos = end + 1;
        } else {
            on_text(body.substr(pos, open + 1 - pos));
            pos = open + 1;
        }
    }
    on_text(body.substr(pos));
}

struct DomainPhrases {
    std::string_view subject;    // environment sentence
    std::string_view role;       // system persona
    std::string_view kind_full;  // first mention of the target kind
    std::string_view kind;       // later mentions
};

DomainPhrases phrases(Domain d) {
    switch (d) {
        case Domain::movie:
            return {"music or movies", "a movie enthusiast who enjoys a variety of films", "movie", "movie"};
        case Domain::music:
            return {"music or movies", "a music enthusiast who enjoys a variety of music", "music", "music"};
        case Domain::food:
            return {"food or restaurants", "a foodie who enjoys delicious food", "food", "food"};
        case Domain::poi:
            return {"food or restaurants",
                    "a food enthusiast who is interested in exploring different restaurants",
                    "point-of-interest (POI)", "POI"};
    }
    return {};
}

const char* const kEnvironment = "You are participating in a conversation about <DOMAIN_SUBJECT>.";

const char* const kUserIntroStudent =
    "You are <USER_NAME>, a <GENDER> student in the age range of <AGE_RANGE>, living in <RESIDENCE>.";
const char* const kUserIntroEmployed =
    "You are <USER_NAME>, a <GENDER_NOUN> in the age range of <AGE_RANGE>, working in a company and "
    "living in <RESIDENCE>.";
const char* const kUserIntroRetired =
    "You are <USER_NAME>, a retired <GENDER_NOUN> in the age range of <AGE_RANGE>, living in <RESIDENCE>.";

const char* const kUserProfile =
    "<USER_INTRO>\n"
    "Based on your past experiences, you have the following preferences:\n"
    "<USER_PREFERENCES>";

const char* const kUserPersonality =
    "Based on the Big-5 personality traits, your personality is measured as:\n"
    "For openness, you are <OPENNESS>.\n"
    "For conscientiousness, you are <CONSCIENTIOUSNESS>.\n"
    "For extraversion, you are <EXTRAVERSION>.\n"
    "For agreeableness, you are <AGREEABLENESS>.\n"
    "For neuroticism, you are <NEUROTICISM>.";

const char* const kUserTask =
    "Your response should be concise (no longer than 30 words).\n"
    "You don't need to recommend anything, but feel free to express your personal interests.\n"
    "You don't need to prepend your name to your response, despite others may do it.";

const char* const kSystemRole = "You are <SYSTEM_NAME>, <SYSTEM_ROLE>.";

const char* const kSystemProfile =
    "You are conversing with <USER_NAME>, whose profile is below:\n"
    "## <USER_PROFILE>";

const char* const kSystemTask =
    "Your goal is to proactively lead the conversation with <USER_NAME> towards the target "
    "<TARGET_KIND_FULL> <TARGET_TOPIC>.\n"
    "To start the conversation, please begin with a greeting and avoid mentioning the target "
    "<TARGET_KIND>.\n"
    "As the conversation progresses, use your domain knowledge to steer the topic threads towards the "
    "target <TARGET_KIND> step by step.\n"
    "Be informative and engaging while providing insights to arouse <USER_NAME>'s interest.\n"
    "Remember to ultimately recommend <TARGET_TOPIC> as the focus of the conversation.\n"
    "Your words at each turn should be concise (no longer than 30 words).";

const char* const kSystemKnowledge =
    "You may access the following domain knowledge for conversation:\n"
    "## <DOMAIN_KNOWLEDGE_TRIPLES>";

const char* const kSystemComments =
    "You may also refer to the following comments about <TARGET_TOPIC>:\n"
    "## <TARGET_COMMENTS>";

const char* const kModerator =
    "You are the moderator of a conversation. You need to determine whether the discussion between "
    "<SYSTEM_NAME> and <USER_NAME> should come to an immediate end.\n"
    "The conversation should be terminated under the following two conditions:\n"
    "(1) If <SYSTEM_NAME> completes recommendation on <TARGET_TOPIC> and <USER_NAME> accepts it, and "
    "<SYSTEM_NAME> no longer takes the initiative for two rounds.\n"
    "(2) If <USER_NAME> explicitly rejects <SYSTEM_NAME>’s recommendation on <TARGET_TOPIC> when "
    "<SYSTEM_NAME> has tried to recommend it for the second time.\n"
    "In either of these cases, the conversation should be brought to an immediate end.\n"
    "\n"
    "For example, here is a conversation: ## <SEED_DIALOGUE_1>\n"
    "Should the conversation end? The answer is no.\n"
    "Here is another conversation: ## <SEED_DIALOGUE_2>\n"
    "Should the conversation end? The answer is yes.\n"
    "\n"
    "Now, for the following conversation:\n"
    "## <ONGOING_DIALOGUE>\n"
    "Should the conversation end? Answer yes or no.";

enum class Frame { student, employed, retired };

Frame occupation_frame(const UserProfile& profile) {
    // Seed profiles say "Occupation" or "Occupation status".
    const std::string* occ = nullptr;
    for (const auto& [k, v] : profile.slots())
        if (detail::starts_with_ci(detail::trim(k), "occupation")) occ = &v;
    if (!occ) return Frame::employed;
    const auto v = detail::ascii_lower(*occ);
    if (v.find("student") != std::string::npos) return Frame::student;
    if (v.find("retire") != std::string::npos) return Frame::retired;
    return Frame::employed;
}

bool is_demographic(std::string_view key) {
    for (std::string_view k : {"name", "gender", "age range", "age", "residence", "occupation"})
        if (detail::iequals(detail::trim(key), k)) return true;
    return detail::starts_with_ci(detail::trim(key), "occupation");
}

std::string strip_prefix_ci(std::string_view key, std::string_view prefix) {
    return std::string(detail::trim(key.substr(prefix.size())));
}

std::string section(const std::string& a, const std::string& b) {
    if (a.empty()) return b;
    if (b.empty()) return a;
    return a + "\n\n" + b;
}

}  // namespace

PromptTemplate::PromptTemplate(std::string template_id, std::string body)
    : id_(std::move(template_id)), body_(std::move(body)), required_(extract_placeholders(body_)) {}

PromptTemplate::PromptTemplate(std::string template_id, std::string body, std::vector<std::string> required)
    : id_(std::move(template_id)), body_(std::move(body)), required_(std::move(required)) {
    const auto present = extract_placeholders(body_);
    for (const auto& r : required_)
        if (std::find(present.begin(), present.end(), r) == present.end())
            throw ConfigError(fmt::format("template '{}' does not contain required placeholder <{}>", id_, r));
    for (const auto& p : present)
        if (std::find(required_.begin(), required_.end(), p) == required_.end()) required_.push_back(p);
}

std::vector<std::string> PromptTemplate::extract_placeholders(std::string_view body) {
    std::vector<std::string> out;
    scan_markers(
        body, [](std::string_view) {},
        [&](std::string_view name) {
            if (std::find(out.begin(), out.end(), name) == out.end()) out.emplace_back(name);
        });
    return out;
}

std::string PromptTemplate::render(const Bindings& bindings) const {
    for (const auto& r : required_)
        if (bindings.find(r) == bindings.end()) throw RenderError("<" + r + ">");
    std::string out;
    out.reserve(body_.size() * 2);
    scan_markers(
        body_, [&](std::string_view text) { out += text; },
        [&](std::string_view name) { out += bindings.find(name)->second; });
    return out;
}

const PromptLibrary& PromptLibrary::defaults() {
    static const PromptLibrary lib = [] {
        PromptLibrary l;
        l.set({"environment", kEnvironment});
        l.set({"user_intro_student", kUserIntroStudent});
        l.set({"user_intro_employed", kUserIntroEmployed});
        l.set({"user_intro_retired", kUserIntroRetired});
        l.set({"user_profile", kUserProfile});
        l.set({"user_personality", kUserPersonality});
        l.set({"user_task", kUserTask});
        l.set({"system_role", kSystemRole});
        l.set({"system_profile", kSystemProfile});
        l.set({"system_task", kSystemTask});
        l.set({"system_knowledge", kSystemKnowledge});
        l.set({"system_comments", kSystemComments});
        l.set({"moderator", kModerator});
        return l;
    }();
    return lib;
}

PromptLibrary PromptLibrary::with_overrides(const std::filesystem::path& dir) {
    PromptLibrary lib = defaults();
    std::error_code ec;
    if (!std::filesystem::is_directory(dir, ec))
        throw ConfigError(fmt::format("template directory '{}' does not exist", dir.string()));
    for (const auto& id : lib.ids()) {
        const auto file = dir / (id + ".txt");
        if (!std::filesystem::exists(file)) continue;
        std::ifstream in(file, std::ios::binary);
        if (!in) throw IoError(fmt::format("cannot read template '{}'", file.string()));
        std::ostringstream ss;
        ss << in.rdbuf();
        auto body = ss.str();
        while (!body.empty() && (body.back() == '\n' || body.back() == '\r')) body.pop_back();
        lib.set(PromptTemplate(id, body));
    }
    return lib;
}

const PromptTemplate& PromptLibrary::get(std::string_view id) const {
    auto it = templates_.find(id);
    if (it == templates_.end()) throw ConfigError(fmt::format("unknown template '{}'", id));
    return it->second;
}

void PromptLibrary::set(PromptTemplate t) {
    auto id = t.id();
    templates_.insert_or_assign(std::move(id), std::move(t));
}

std::vector<std::string> PromptLibrary::ids() const {
    std::vector<std::string> out;
    for (const auto& [k, v] : templates_) out.push_back(k);
    return out;
}

std::string PromptLibrary::render_environment(Domain domain) const {
    return get("environment").render({{"DOMAIN_SUBJECT", std::string(phrases(domain).subject)}});
}

std::string PromptLibrary::render_user_profile(const UserProfile& profile) const {
    Bindings b;
    if (auto name = profile_user_name(profile)) b["USER_NAME"] = *name;
    if (const auto* v = profile.find_ci("age range")) b["AGE_RANGE"] = *v;
    else if (const auto* a = profile.find_ci("age")) b["AGE_RANGE"] = *a;
    if (const auto* v = profile.find_ci("residence")) b["RESIDENCE"] = *v;
    if (const auto* g = profile.find_ci("gender")) {
        const auto lower = detail::ascii_lower(detail::trim(*g));
        b["GENDER"] = lower;
        b["GENDER_NOUN"] = lower == "male" ? "man" : lower == "female" ? "woman" : lower;
    }

    const char* intro_id = "user_intro_employed";
    switch (occupation_frame(profile)) {
        case Frame::student: intro_id = "user_intro_student"; break;
        case Frame::retired: intro_id = "user_intro_retired"; break;
        case Frame::employed: break;
    }

    std::vector<std::string> liked;
    std::vector<std::string> disliked;
    for (const auto& [key, value] : profile.slots()) {
        if (is_demographic(key)) continue;
        if (detail::starts_with_ci(key, "accepted "))
            liked.push_back(fmt::format("Your liked {}: {}", strip_prefix_ci(key, "accepted "), value));
        else if (detail::starts_with_ci(key, "liked "))
            liked.push_back(fmt::format("Your liked {}: {}", strip_prefix_ci(key, "liked "), value));
        else if (detail::starts_with_ci(key, "rejected "))
            disliked.push_back(fmt::format("Your disliked {}: {}", strip_prefix_ci(key, "rejected "), value));
        else if (detail::starts_with_ci(key, "disliked "))
            disliked.push_back(fmt::format("Your disliked {}: {}", strip_prefix_ci(key, "disliked "), value));
        else
            liked.push_back(fmt::format("Your liked {}: {}", key, value));
    }
    liked.insert(liked.end(), disliked.begin(), disliked.end());

    Bindings outer;
    outer["USER_INTRO"] = get(intro_id).render(b);
    outer["USER_PREFERENCES"] = detail::join(liked, "\n");
    return get("user_profile").render(outer);
}

std::string PromptLibrary::render_user_personality(const Personality& personality,
                                                   const TraitLexicon& lexicon) const {
    if (!lexicon.complete()) throw ConfigError("trait lexicon is incomplete");
    Bindings b;
    for (Trait t : kAllTraits) {
        auto key = detail::ascii_lower(to_string(t));
        std::transform(key.begin(), key.end(), key.begin(), [](unsigned char c) { return std::toupper(c); });
        b[key] = lexicon.describe(t, personality[t]);
    }
    return get("user_personality").render(b);
}

std::string PromptLibrary::render_user_task() const { return get("user_task").render({}); }

std::string PromptLibrary::render_user_instruction(const UserProfile& profile, const Personality& personality,
                                                   const std::string& env, const TraitLexicon& lexicon) const {
    return section(section(section(env, render_user_profile(profile)),
                           render_user_personality(personality, lexicon)),
                   render_user_task());
}

std::string PromptLibrary::render_system_task(const Target& target, const UserProfile& profile) const {
    Bindings b;
    if (auto name = profile_user_name(profile)) b["USER_NAME"] = *name;
    const auto p = phrases(target.domain);
    b["TARGET_KIND_FULL"] = std::string(p.kind_full);
    b["TARGET_KIND"] = std::string(p.kind);
    b["TARGET_TOPIC"] = target.topic;
    return get("system_task").render(b);
}

std::string PromptLibrary::render_system_instruction(const Target& target,
                                                     const std::vector<KnowledgeTriple>& knowledge,
                                                     const std::optional<std::vector<std::string>>& comments,
                                                     const UserProfile& profile, const std::string& env,
                                                     const std::string& system_name) const {
    if (knowledge.empty()) throw ConfigError("system instruction needs at least one knowledge triple");
    Bindings b;
    b["SYSTEM_NAME"] = system_name;
    b["SYSTEM_ROLE"] = std::string(phrases(target.domain).role);
    if (auto name = profile_user_name(profile)) b["USER_NAME"] = *name;
    b["USER_PROFILE"] = verbalize_profile(profile);
    b["DOMAIN_KNOWLEDGE_TRIPLES"] = serialize_knowledge(knowledge);
    b["TARGET_TOPIC"] = target.topic;

    auto text = section(env, get("system_role").render(b));
    text = section(text, get("system_profile").render(b));
    text = section(text, render_system_task(target, profile));
    text = section(text, get("system_knowledge").render(b));
    if (comments && !comments->empty()) {
        b["TARGET_COMMENTS"] = detail::join(*comments, "\n");
        text = section(text, get("system_comments").render(b));
    }
    return text;
}

std::string PromptLibrary::render_moderator_instruction(const Target& target, const InContextPair& examples,
                                                        const std::vector<Turn>& ongoing,
                                                        const AgentNames& names, const std::string& env) const {
    if (ongoing.empty()) throw ConfigError("moderator needs a non-empty ongoing dialogue");
    Bindings b;
    b["SYSTEM_NAME"] = names.system;
    b["USER_NAME"] = names.user;
    b["TARGET_TOPIC"] = target.topic;
    b["SEED_DIALOGUE_1"] = examples.continue_example;
    b["SEED_DIALOGUE_2"] = examples.terminate_example;
    b["ONGOING_DIALOGUE"] = render_dialogue(ongoing, names);
    return section(env, get("moderator").render(b));
}

std::string serialize_knowledge(const std::vector<KnowledgeTriple>& knowledge) {
    std::vector<std::string> lines;
    lines.reserve(knowledge.size());
    for (const auto& k : knowledge) lines.push_back(fmt::format("<{}, {}, {}>", k.subject, k.relation, k.object));
    return detail::join(lines, "\n");
}

std::string verbalize_profile(const UserProfile& profile) {
    std::vector<std::string> lines;
    for (const auto& [k, v] : profile.slots()) lines.push_back(fmt::format("{}: {}", k, v));
    return detail::join(lines, "\n");
}

std::string render_dialogue(const std::vector<Turn>& turns, const AgentNames& names) {
    std::vector<std::string> lines;
    for (const auto& t : turns)
        lines.push_back(fmt::format("[{}]: {}", t.role == Role::system ? names.system : names.user, t.utterance));
    return detail::join(lines, "\n");
}

std::optional<std::string> profile_user_name(const UserProfile& profile) {
    if (const auto* v = profile.find_ci("name")) return *v;
    return std::nullopt;
}

}  // namespace roleplay
