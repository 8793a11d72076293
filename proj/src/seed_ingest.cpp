#include "roleplay/seed_ingest.hpp"

#include <algorithm>

#include <fmt/format.h>

#include "roleplay/errors.hpp"
#include "roleplay/json_io.hpp"
#include "roleplay/rng.hpp"

namespace roleplay {

void ProfileSlotPool::add(const std::string& key, const std::string& value) {
    auto it = std::find_if(entries_.begin(), entries_.end(), [&](const Entry& e) { return e.first == key; });
    if (it == entries_.end()) {
        entries_.emplace_back(key, std::vector<std::string>{value});
        return;
    }
    if (std::find(it->second.begin(), it->second.end(), value) == it->second.end())
        it->second.push_back(value);
}

const std::vector<std::string>* ProfileSlotPool::values(std::string_view key) const {
    for (const auto& [k, v] : entries_)
        if (k == key) return &v;
    return nullptr;
}

std::vector<SeedExample> load_seed_dataset(const std::filesystem::path& path) {
    std::vector<SeedExample> seeds;
    for_each_jsonl(path, [&](const ordered_json& j, std::size_t line) {
        seeds.push_back(seed_from_json(j, line));
    });
    return seeds;
}

ProfileSlotPool build_profile_pool(const std::vector<SeedExample>& seeds) {
    ProfileSlotPool pool;
    for (const auto& seed : seeds)
        for (const auto& [k, v] : seed.profile_slots.slots()) pool.add(k, v);
    return pool;
}

std::string render_seed_dialogue(const std::vector<Turn>& turns) {
    std::string out;
    for (const auto& t : turns) {
        if (!out.empty()) out += '\n';
        out += t.role == Role::system ? "[System]: " : "[User]: ";
        out += t.utterance;
    }
    return out;
}

InContextPair select_incontext_examples(const std::vector<SeedExample>& seeds, std::uint64_t rng_seed) {
    std::vector<const SeedExample*> usable;
    for (const auto& s : seeds)
        if (!s.seed_conversation.empty()) usable.push_back(&s);
    if (usable.size() < 2)
        throw ConfigError(fmt::format(
            "need at least two seeds with a conversation for moderator examples, found {}",
            usable.size()));

    Rng rng(substream(rng_seed, Stream::incontext));
    rng.shuffle(std::span(usable));

    InContextPair pair;
    const auto& first = usable[0]->seed_conversation;
    const auto prefix_len = std::min(first.size(), kContinuePrefixTurns);
    pair.continue_example = render_seed_dialogue({first.begin(), first.begin() + static_cast<long>(prefix_len)});
    pair.continue_seed_id = usable[0]->seed_id;
    for (std::size_t i = 1; i < usable.size(); ++i) {
        auto full = render_seed_dialogue(usable[i]->seed_conversation);
        if (full != pair.continue_example) {
            pair.terminate_example = std::move(full);
            pair.terminate_seed_id = usable[i]->seed_id;
            return pair;
        }
    }
    throw ConfigError("seed conversations are not distinct enough to build moderator examples");
}

}  // namespace roleplay
