#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace roleplay {

enum class Domain { movie, music, food, poi };

std::string_view to_string(Domain d);
/// Accepts the canonical names plus "point-of-interest"; case-insensitive.
std::optional<Domain> parse_domain(std::string_view s);

/// A conversation target: the dialogue act the system should reach on a topic.
struct Target {
    std::string act;
    std::string topic;
    Domain domain = Domain::movie;

    bool operator==(const Target&) const = default;
};

struct KnowledgeTriple {
    std::string subject;
    std::string relation;
    std::string object;

    bool operator==(const KnowledgeTriple&) const = default;
};

/// Ordered slot key -> value mapping. Order is insertion order and drives verbalization.
class UserProfile {
public:
    using Slot = std::pair<std::string, std::string>;

    UserProfile() = default;
    /// Throws ConfigError on duplicate keys or empty values.
    explicit UserProfile(std::vector<Slot> slots);

    /// Appends a slot; throws ConfigError if the key exists or the value is empty.
    void set(std::string key, std::string value);

    /// Exact key lookup.
    const std::string* find(std::string_view key) const;
    /// ASCII case-insensitive key lookup, ignoring surrounding whitespace.
    const std::string* find_ci(std::string_view key) const;

    const std::vector<Slot>& slots() const noexcept { return slots_; }
    std::size_t size() const noexcept { return slots_.size(); }
    bool empty() const noexcept { return slots_.empty(); }

    bool operator==(const UserProfile&) const = default;

private:
    std::vector<Slot> slots_;
};

enum class Trait { openness, conscientiousness, extraversion, agreeableness, neuroticism };
enum class Polarity { positive, negative };

inline constexpr std::array<Trait, 5> kAllTraits = {
    Trait::openness, Trait::conscientiousness, Trait::extraversion, Trait::agreeableness,
    Trait::neuroticism};

std::string_view to_string(Trait t);
std::string_view to_string(Polarity p);
std::optional<Trait> parse_trait(std::string_view s);
std::optional<Polarity> parse_polarity(std::string_view s);

/// Big-5 personality. Always carries exactly one polarity per trait.
class Personality {
public:
    Personality() = default;
    explicit Personality(std::array<Polarity, 5> polarities) : polarities_(polarities) {}

    Polarity operator[](Trait t) const { return polarities_[static_cast<std::size_t>(t)]; }
    void set(Trait t, Polarity p) { polarities_[static_cast<std::size_t>(t)] = p; }
    static constexpr std::size_t size() noexcept { return 5; }

    bool operator==(const Personality&) const = default;

private:
    std::array<Polarity, 5> polarities_{Polarity::positive, Polarity::positive, Polarity::positive,
                                        Polarity::positive, Polarity::positive};
};

enum class Role { system, user };

std::string_view to_string(Role r);
std::optional<Role> parse_role(std::string_view s);

struct Turn {
    Role role = Role::system;
    std::string utterance;
    int round_index = 1;

    bool operator==(const Turn&) const = default;
};

/// 1-based round of the turn at 0-based position `position`.
constexpr int round_of_position(std::size_t position) {
    return static_cast<int>(position / 2) + 1;
}

enum class Termination { unset, moderator_accept, moderator_reject, round_cap };

std::string_view to_string(Termination t);
std::optional<Termination> parse_termination(std::string_view s);

struct DialogueSession {
    std::string id;
    Target target;
    std::vector<KnowledgeTriple> knowledge;
    UserProfile profile;
    Personality personality;
    std::vector<Turn> turns;
    Termination termination = Termination::unset;
    std::string seed_id;
    int instance_index = 0;

    /// Number of started rounds (a trailing system turn opens a round).
    int rounds() const;

    bool operator==(const DialogueSession&) const = default;
};

struct SeedExample {
    std::string seed_id;
    Target target;
    std::vector<KnowledgeTriple> knowledge;
    UserProfile profile_slots;
    std::vector<Turn> seed_conversation;
    std::optional<std::vector<std::string>> comments;

    bool operator==(const SeedExample&) const = default;
};

/// Empty when the session is well formed; otherwise one message per violated invariant.
using Violations = std::vector<std::string>;

/// Checks turn alternation, first speaker, round indices, non-empty utterances, the round
/// cap and that termination is set. Never throws.
Violations validate_session(const DialogueSession& session, int max_rounds = 8);

}  // namespace roleplay
