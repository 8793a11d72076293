#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "roleplay/seed_ingest.hpp"
#include "roleplay/types.hpp"

namespace roleplay {

/// Descriptor text for every (trait, polarity) combination.
class TraitLexicon {
public:
    /// Big-5 descriptors used in the user instruction.
    static TraitLexicon defaults();

    /// JSON object {trait: {positive: text, negative: text}}; throws ConfigError if any
    /// of the ten entries is missing or empty.
    static TraitLexicon load(const std::filesystem::path& path);

    const std::string& describe(Trait t, Polarity p) const;
    void set(Trait t, Polarity p, std::string text);
    /// True when all ten descriptors are non-empty.
    bool complete() const;
    /// All ten descriptors, positive then negative per trait.
    std::vector<std::string> all_descriptors() const;

    bool operator==(const TraitLexicon&) const = default;

private:
    std::array<std::array<std::string, 2>, 5> text_{};
};

/// One uniformly chosen value per pool key, keys in pool order. Throws ConfigError if the
/// pool is empty.
UserProfile sample_profile(const ProfileSlotPool& pool, std::uint64_t rng_seed);

/// Independent fair coin per trait. Throws ConfigError if `lexicon` is incomplete.
Personality sample_personality(std::uint64_t rng_seed, const TraitLexicon& lexicon = TraitLexicon::defaults());

/// Every one of the 32 possible personalities, in binary-counting order.
std::vector<Personality> enumerate_personalities();

}  // namespace roleplay
