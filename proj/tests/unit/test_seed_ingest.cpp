#include <doctest.h>

#include "helpers.hpp"
#include "roleplay/errors.hpp"
#include "roleplay/seed_ingest.hpp"

using namespace roleplay;

namespace {

SeedExample seed_with(std::string id, std::vector<std::pair<std::string, std::string>> slots,
                      std::vector<std::string> conversation = {"Hello", "Hi"}) {
    SeedExample s;
    s.seed_id = std::move(id);
    s.target = {"Movie recommendation", "Titanic", Domain::movie};
    s.knowledge = {{"Titanic", "Rating", "9.4"}};
    for (auto& [k, v] : slots) s.profile_slots.set(k, v);
    for (std::size_t i = 0; i < conversation.size(); ++i)
        s.seed_conversation.push_back({i % 2 ? Role::user : Role::system, conversation[i], round_of_position(i)});
    return s;
}

}  // namespace

TEST_SUITE("seed_ingest") {
    TEST_CASE("empty file gives an empty list") {
        testing::TempDir dir;
        testing::spit(dir / "empty.jsonl", "");
        CHECK(load_seed_dataset(dir / "empty.jsonl").empty());
    }

    TEST_CASE("unreadable file raises IoError") {
        CHECK_THROWS_AS(load_seed_dataset("/nonexistent/seeds.jsonl"), IoError);
    }

    TEST_CASE("two-line fixture parses field by field") {
        testing::TempDir dir;
        testing::spit(dir / "two.jsonl",
                      R"({"seed_id":"a","target":{"act":"Music recommendation","topic":"Rice Field","domain":"music"},)"
                      R"("knowledge":[["Rice Field","Singer","Jay Chou"]],"user_profile":{"Name":"Xu Lin","Age Range":"18-25"},)"
                      R"("conversation":[{"role":"system","utterance":"Hi"},{"role":"user","utterance":"Hello"}]})"
                      "\n\n"
                      R"({"seed_id":"b","target":{"act":"POI recommendation","topic":"Quanjude","domain":"poi"},)"
                      R"("knowledge":[["Quanjude","Address","Qianmen Street"]],"user_profile":{"Accepted food":["Dumplings","Noodles"],"Rejected movies":""},)"
                      R"("conversation":[],"comments":["Crispy skin."]})"
                      "\n");
        const auto seeds = load_seed_dataset(dir / "two.jsonl");
        REQUIRE(seeds.size() == 2);
        CHECK(seeds[0].seed_id == "a");
        CHECK(seeds[0].target == Target{"Music recommendation", "Rice Field", Domain::music});
        CHECK(seeds[0].knowledge == std::vector<KnowledgeTriple>{{"Rice Field", "Singer", "Jay Chou"}});
        CHECK(*seeds[0].profile_slots.find("Age Range") == "18-25");
        REQUIRE(seeds[0].seed_conversation.size() == 2);
        CHECK(seeds[0].seed_conversation[1] == Turn{Role::user, "Hello", 1});
        CHECK_FALSE(seeds[0].comments.has_value());

        CHECK(seeds[1].seed_id == "b");
        CHECK(seeds[1].target.domain == Domain::poi);
        CHECK(*seeds[1].profile_slots.find("Accepted food") == "Dumplings; Noodles");
        CHECK(seeds[1].profile_slots.find("Rejected movies") == nullptr);
        CHECK(seeds[1].comments == std::vector<std::string>{"Crispy skin."});
    }

    TEST_CASE("missing target cites line 1 and field target") {
        testing::TempDir dir;
        testing::spit(dir / "bad.jsonl", R"({"seed_id":"a","knowledge":[["x","y","z"]]})" "\n");
        try {
            load_seed_dataset(dir / "bad.jsonl");
            FAIL("expected ParseError");
        } catch (const ParseError& e) {
            CHECK(e.line() == 1);
            CHECK(e.field() == "target");
        }
    }

    TEST_CASE("broken JSON reports its line") {
        testing::TempDir dir;
        testing::spit(dir / "bad.jsonl", "\n{not json\n");
        try {
            load_seed_dataset(dir / "bad.jsonl");
            FAIL("expected ParseError");
        } catch (const ParseError& e) {
            CHECK(e.line() == 2);
        }
    }

    TEST_CASE("profile pool deduplicates and unions in first-seen order") {
        CHECK(build_profile_pool({}).empty());

        auto pool = build_profile_pool({seed_with("1", {{"name", "A"}}), seed_with("2", {{"name", "A"}})});
        REQUIRE(pool.size() == 1);
        CHECK(*pool.values("name") == std::vector<std::string>{"A"});

        pool = build_profile_pool({seed_with("1", {{"age", "18-25"}}), seed_with("2", {{"age", "26-35"}})});
        CHECK(*pool.values("age") == std::vector<std::string>{"18-25", "26-35"});
    }

    TEST_CASE("pool is idempotent and order-insensitive up to value sets") {
        const auto seeds = load_seed_dataset(testing::fixture("seeds10.jsonl"));
        auto forward = build_profile_pool(seeds);
        auto doubled_seeds = seeds;
        doubled_seeds.insert(doubled_seeds.end(), seeds.begin(), seeds.end());
        CHECK(build_profile_pool(doubled_seeds) == forward);

        auto reversed_seeds = seeds;
        std::reverse(reversed_seeds.begin(), reversed_seeds.end());
        const auto reversed = build_profile_pool(reversed_seeds);
        REQUIRE(reversed.size() == forward.size());
        for (const auto& [key, values] : forward.entries()) {
            auto a = values;
            auto b = *reversed.values(key);
            std::sort(a.begin(), a.end());
            std::sort(b.begin(), b.end());
            CHECK(a == b);
        }
        for (const auto& s : seeds)
            for (const auto& [k, v] : s.profile_slots.slots()) CHECK(forward.values(k) != nullptr);
    }

    TEST_CASE("in-context examples are deterministic and need two usable seeds") {
        const auto seeds = load_seed_dataset(testing::fixture("seeds10.jsonl"));
        CHECK(select_incontext_examples(seeds, 3) == select_incontext_examples(seeds, 3));
        CHECK_THROWS_AS(select_incontext_examples({seeds[0]}, 1), ConfigError);
        CHECK_THROWS_AS(select_incontext_examples({seeds[0], seed_with("e", {}, {})}, 1), ConfigError);
    }

    TEST_CASE("two seeds use both conversations") {
        const auto seeds = load_seed_dataset(testing::fixture("seeds10.jsonl"));
        const std::vector<SeedExample> two{seeds[0], seeds[1]};
        for (std::uint64_t r = 0; r < 20; ++r) {
            const auto pair = select_incontext_examples(two, r);
            CHECK(pair.continue_seed_id != pair.terminate_seed_id);
            CHECK(pair.continue_example != pair.terminate_example);
            CHECK_FALSE(pair.continue_example.empty());
            const auto& term = pair.terminate_seed_id == "s01" ? two[0] : two[1];
            CHECK(pair.terminate_example == render_seed_dialogue(term.seed_conversation));
        }
    }

    TEST_CASE("continue example is the four-turn prefix") {
        const auto seeds = load_seed_dataset(testing::fixture("seeds10.jsonl"));
        const auto pair = select_incontext_examples(seeds, 11);
        const auto it = std::find_if(seeds.begin(), seeds.end(),
                                     [&](const SeedExample& s) { return s.seed_id == pair.continue_seed_id; });
        REQUIRE(it != seeds.end());
        const std::vector<Turn> prefix(it->seed_conversation.begin(), it->seed_conversation.begin() + 4);
        CHECK(pair.continue_example == render_seed_dialogue(prefix));
    }

    TEST_CASE("golden pair for the 10-seed fixture under rng_seed 7") {
        const auto seeds = load_seed_dataset(testing::fixture("seeds10.jsonl"));
        const auto pair = select_incontext_examples(seeds, 7);
        CHECK(pair.continue_seed_id == std::string("s05"));
        CHECK(pair.terminate_seed_id == std::string("s07"));
    }

    TEST_CASE("seed dialogues render with role prefixes") {
        const std::vector<Turn> turns{{Role::system, "Hello", 1}, {Role::user, "Hi", 1}};
        CHECK(render_seed_dialogue(turns) == "[System]: Hello\n[User]: Hi");
    }
}
