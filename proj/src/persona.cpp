#include "roleplay/persona.hpp"

#include <fstream>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "roleplay/errors.hpp"
#include "roleplay/rng.hpp"
#include "text_util.hpp"

namespace roleplay {

namespace {
std::size_t idx(Trait t) { return static_cast<std::size_t>(t); }
std::size_t idx(Polarity p) { return p == Polarity::positive ? 0 : 1; }
}  // namespace

TraitLexicon TraitLexicon::defaults() {
    TraitLexicon lex;
    lex.set(Trait::openness, Polarity::positive, "intellectual, imaginative, and curious");
    lex.set(Trait::openness, Polarity::negative, "unimaginative, uncreative, and conventional");
    lex.set(Trait::conscientiousness, Polarity::positive, "efficient, organized, and careful");
    lex.set(Trait::conscientiousness, Polarity::negative, "inefficient, careless, and sloppy");
    lex.set(Trait::extraversion, Polarity::positive, "outgoing, energetic, and talkative");
    lex.set(Trait::extraversion, Polarity::negative, "shy, reserved, and quiet");
    lex.set(Trait::agreeableness, Polarity::positive, "trustworthy, straightforward, and generous");
    lex.set(Trait::agreeableness, Polarity::negative, "unreliable, complicated, meager, and boastful");
    lex.set(Trait::neuroticism, Polarity::positive, "sensitive, nervous, and insecure");
    lex.set(Trait::neuroticism, Polarity::negative, "secure, confident, and calm");
    return lex;
}

TraitLexicon TraitLexicon::load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError(fmt::format("cannot open lexicon '{}'", path.string()));
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::parse_error& e) {
        throw ConfigError(fmt::format("lexicon '{}': {}", path.string(), e.what()));
    }
    TraitLexicon lex;
    for (Trait t : kAllTraits) {
        const auto trait = std::string(to_string(t));
        for (Polarity p : {Polarity::positive, Polarity::negative}) {
            const auto pol = std::string(to_string(p));
            if (!j.contains(trait) || !j[trait].contains(pol) || !j[trait][pol].is_string())
                throw ConfigError(fmt::format("lexicon is missing {}.{}", trait, pol));
            lex.set(t, p, j[trait][pol].get<std::string>());
        }
    }
    if (!lex.complete()) throw ConfigError("lexicon has empty descriptors");
    return lex;
}

const std::string& TraitLexicon::describe(Trait t, Polarity p) const { return text_[idx(t)][idx(p)]; }

void TraitLexicon::set(Trait t, Polarity p, std::string text) { text_[idx(t)][idx(p)] = std::move(text); }

bool TraitLexicon::complete() const {
    for (const auto& row : text_)
        for (const auto& s : row)
            if (detail::trim(s).empty()) return false;
    return true;
}

std::vector<std::string> TraitLexicon::all_descriptors() const {
    std::vector<std::string> out;
    for (const auto& row : text_)
        for (const auto& s : row) out.push_back(s);
    return out;
}

UserProfile sample_profile(const ProfileSlotPool& pool, std::uint64_t rng_seed) {
    if (pool.empty()) throw ConfigError("profile slot pool is empty");
    Rng rng(substream(rng_seed, Stream::profile));
    UserProfile profile;
    for (const auto& [key, values] : pool.entries()) {
        if (values.empty()) throw ConfigError(fmt::format("slot '{}' has no candidate values", key));
        profile.set(key, values[rng.uniform_index(values.size())]);
    }
    return profile;
}

Personality sample_personality(std::uint64_t rng_seed, const TraitLexicon& lexicon) {
    if (!lexicon.complete()) throw ConfigError("trait lexicon is incomplete");
    Rng rng(substream(rng_seed, Stream::personality));
    Personality p;
    for (Trait t : kAllTraits) p.set(t, rng.coin() ? Polarity::positive : Polarity::negative);
    return p;
}

std::vector<Personality> enumerate_personalities() {
    std::vector<Personality> out;
    for (unsigned mask = 0; mask < 32; ++mask) {
        Personality p;
        for (Trait t : kAllTraits)
            p.set(t, (mask >> idx(t)) & 1U ? Polarity::negative : Polarity::positive);
        out.push_back(p);
    }
    return out;
}

}  // namespace roleplay
