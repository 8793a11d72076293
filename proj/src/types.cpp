#include "roleplay/types.hpp"

#include <fmt/format.h>

#include "roleplay/errors.hpp"
#include "text_util.hpp"

namespace roleplay {

std::string_view to_string(Domain d) {
    switch (d) {
        case Domain::movie: return "movie";
        case Domain::music: return "music";
        case Domain::food: return "food";
        case Domain::poi: return "poi";
    }
    return "movie";
}

std::optional<Domain> parse_domain(std::string_view s) {
    const auto v = detail::ascii_lower(detail::trim(s));
    if (v == "movie" || v == "movies") return Domain::movie;
    if (v == "music") return Domain::music;
    if (v == "food") return Domain::food;
    if (v == "poi" || v == "point-of-interest") return Domain::poi;
    return std::nullopt;
}

UserProfile::UserProfile(std::vector<Slot> slots) {
    for (auto& [k, v] : slots) set(std::move(k), std::move(v));
}

void UserProfile::set(std::string key, std::string value) {
    if (detail::trim(key).empty()) throw ConfigError("profile slot key must be non-empty");
    if (detail::trim(value).empty())
        throw ConfigError(fmt::format("profile slot '{}' has an empty value", key));
    if (find(key)) throw ConfigError(fmt::format("duplicate profile slot key '{}'", key));
    slots_.emplace_back(std::move(key), std::move(value));
}

const std::string* UserProfile::find(std::string_view key) const {
    for (const auto& [k, v] : slots_)
        if (k == key) return &v;
    return nullptr;
}

const std::string* UserProfile::find_ci(std::string_view key) const {
    for (const auto& [k, v] : slots_)
        if (detail::iequals(detail::trim(k), detail::trim(key))) return &v;
    return nullptr;
}

std::string_view to_string(Trait t) {
    switch (t) {
        case Trait::openness: return "openness";
        case Trait::conscientiousness: return "conscientiousness";
        case Trait::extraversion: return "extraversion";
        case Trait::agreeableness: return "agreeableness";
        case Trait::neuroticism: return "neuroticism";
    }
    return "openness";
}

std::string_view to_string(Polarity p) {
    return p == Polarity::positive ? "positive" : "negative";
}

std::optional<Trait> parse_trait(std::string_view s) {
    const auto v = detail::ascii_lower(detail::trim(s));
    for (Trait t : kAllTraits)
        if (v == to_string(t)) return t;
    return std::nullopt;
}

std::optional<Polarity> parse_polarity(std::string_view s) {
    const auto v = detail::ascii_lower(detail::trim(s));
    if (v == "positive") return Polarity::positive;
    if (v == "negative") return Polarity::negative;
    return std::nullopt;
}

std::string_view to_string(Role r) { return r == Role::system ? "system" : "user"; }

std::optional<Role> parse_role(std::string_view s) {
    const auto v = detail::ascii_lower(detail::trim(s));
    if (v == "system") return Role::system;
    if (v == "user") return Role::user;
    return std::nullopt;
}

std::string_view to_string(Termination t) {
    switch (t) {
        case Termination::unset: return "unset";
        case Termination::moderator_accept: return "moderator_accept";
        case Termination::moderator_reject: return "moderator_reject";
        case Termination::round_cap: return "round_cap";
    }
    return "unset";
}

std::optional<Termination> parse_termination(std::string_view s) {
    const auto v = detail::trim(s);
    if (v == "moderator_accept") return Termination::moderator_accept;
    if (v == "moderator_reject") return Termination::moderator_reject;
    if (v == "round_cap") return Termination::round_cap;
    if (v == "unset") return Termination::unset;
    return std::nullopt;
}

int DialogueSession::rounds() const {
    return turns.empty() ? 0 : round_of_position(turns.size() - 1);
}

Violations validate_session(const DialogueSession& session, int max_rounds) {
    Violations out;
    if (detail::trim(session.target.act).empty()) out.emplace_back("target act must be non-empty");
    if (detail::trim(session.target.topic).empty())
        out.emplace_back("target topic must be non-empty");
    if (session.turns.empty()) out.emplace_back("session has no turns");
    if (!session.turns.empty() && session.turns.front().role != Role::system)
        out.emplace_back("first speaker must be system");

    for (std::size_t k = 0; k < session.turns.size(); ++k) {
        const Turn& t = session.turns[k];
        const Role expected = (k % 2 == 0) ? Role::system : Role::user;
        // The first-speaker message already covers position 0.
        if (k > 0 && t.role != expected)
            out.push_back(fmt::format("turn {} breaks system/user alternation", k));
        if (detail::trim(t.utterance).empty())
            out.push_back(fmt::format("turn {} has an empty utterance", k));
        if (t.round_index != round_of_position(k))
            out.push_back(fmt::format("turn {} has round_index {} (expected {})", k,
                                      t.round_index, round_of_position(k)));
    }
    if (session.rounds() > max_rounds)
        out.push_back(fmt::format("round cap exceeded ({} > {})", session.rounds(), max_rounds));
    if (session.termination == Termination::unset) out.emplace_back("termination is unset");
    if (session.instance_index < 0) out.emplace_back("instance_index must be non-negative");
    return out;
}

}  // namespace roleplay
