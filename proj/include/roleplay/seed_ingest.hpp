#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "roleplay/types.hpp"

namespace roleplay {

/// Slot key -> deduplicated candidate values, both in first-seen order.
class ProfileSlotPool {
public:
    using Entry = std::pair<std::string, std::vector<std::string>>;

    /// Adds `value` under `key` unless already present.
    void add(const std::string& key, const std::string& value);

    const std::vector<Entry>& entries() const noexcept { return entries_; }
    const std::vector<std::string>* values(std::string_view key) const;
    std::size_t size() const noexcept { return entries_.size(); }
    bool empty() const noexcept { return entries_.empty(); }

    bool operator==(const ProfileSlotPool&) const = default;

private:
    std::vector<Entry> entries_;
};

/// Two rendered seed dialogues shown to the moderator: one that should continue and
/// one that should end.
struct InContextPair {
    std::string continue_example;
    std::string terminate_example;
    std::string continue_seed_id;
    std::string terminate_seed_id;

    bool operator==(const InContextPair&) const = default;
};

/// Number of leading turns kept for the "should continue" example.
inline constexpr std::size_t kContinuePrefixTurns = 4;

/// One JSON object per line. Blank lines are skipped; record order is preserved.
std::vector<SeedExample> load_seed_dataset(const std::filesystem::path& path);

ProfileSlotPool build_profile_pool(const std::vector<SeedExample>& seeds);

/// Renders turns as "[System]: ..." / "[User]: ..." lines.
std::string render_seed_dialogue(const std::vector<Turn>& turns);

/// Deterministic under `rng_seed`. Throws ConfigError with fewer than two seeds that
/// have a conversation.
InContextPair select_incontext_examples(const std::vector<SeedExample>& seeds, std::uint64_t rng_seed);

}  // namespace roleplay
