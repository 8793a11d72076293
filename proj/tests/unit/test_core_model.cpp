#include <doctest.h>

#include <algorithm>

#include "helpers.hpp"
#include "roleplay/errors.hpp"
#include "roleplay/json_io.hpp"
#include "roleplay/types.hpp"

using namespace roleplay;

namespace {

bool has_violation(const Violations& v, std::string_view needle) {
    return std::any_of(v.begin(), v.end(), [&](const std::string& s) { return s.find(needle) != std::string::npos; });
}

}  // namespace

TEST_SUITE("core_model") {
    TEST_CASE("minimal system/user session is valid") {
        auto s = testing::make_session("x-0", "x", "Titanic", {"Hello!", "Hi."});
        CHECK(validate_session(s).empty());
        CHECK(s.rounds() == 1);
    }

    TEST_CASE("user speaking first is reported") {
        auto s = testing::make_session("x-0", "x", "Titanic", {"Hello!", "Hi."});
        std::swap(s.turns[0].role, s.turns[1].role);
        const auto v = validate_session(s);
        CHECK(has_violation(v, "first speaker must be system"));
        CHECK(has_violation(v, "turn 1 breaks system/user alternation"));
    }

    TEST_CASE("nine rounds under a cap of eight is reported") {
        std::vector<std::string> utts(18, "words");
        auto s = testing::make_session("x-0", "x", "Titanic", utts);
        CHECK(s.rounds() == 9);
        CHECK(has_violation(validate_session(s, 8), "round cap exceeded (9 > 8)"));
        CHECK(validate_session(s, 9).empty());
    }

    TEST_CASE("empty utterance, unset termination and bad round index are all reported") {
        auto s = testing::make_session("x-0", "x", "Titanic", {"Hello!", "  ", "More"});
        s.termination = Termination::unset;
        s.turns[2].round_index = 1;
        const auto v = validate_session(s);
        CHECK(has_violation(v, "turn 1 has an empty utterance"));
        CHECK(has_violation(v, "termination is unset"));
        CHECK(has_violation(v, "turn 2 has round_index 1"));
        CHECK(v.size() == 3);
    }

    TEST_CASE("a session may end on a system turn") {
        auto s = testing::make_session("x-0", "x", "Titanic", {"Hello!", "Hi.", "Bye"});
        CHECK(validate_session(s).empty());
        CHECK(s.rounds() == 2);
    }

    TEST_CASE("round_index counts exchange pairs") {
        CHECK(round_of_position(0) == 1);
        CHECK(round_of_position(1) == 1);
        CHECK(round_of_position(2) == 2);
        CHECK(round_of_position(15) == 8);
    }

    TEST_CASE("valid sessions alternate by parity") {
        auto s = testing::make_session("x-0", "x", "Titanic", {"a", "b", "c", "d", "e"});
        REQUIRE(validate_session(s).empty());
        for (std::size_t k = 0; k < s.turns.size(); ++k) CHECK((s.turns[k].role == Role::system) == (k % 2 == 0));
    }

    TEST_CASE("UserProfile rejects duplicate keys and empty values") {
        UserProfile p;
        p.set("Name", "A");
        CHECK_THROWS_AS(p.set("Name", "B"), ConfigError);
        CHECK_THROWS_AS(p.set("Age Range", ""), ConfigError);
        CHECK(*p.find_ci("  name ") == "A");
        CHECK(p.find("name") == nullptr);
    }

    TEST_CASE("Personality always has five traits") {
        Personality p;
        CHECK(Personality::size() == 5);
        p.set(Trait::neuroticism, Polarity::negative);
        for (auto t : kAllTraits) CHECK((p[t] == Polarity::negative) == (t == Trait::neuroticism));
    }

    TEST_CASE("domain names parse with aliases") {
        CHECK(parse_domain("POI") == Domain::poi);
        CHECK(parse_domain("point-of-interest") == Domain::poi);
        CHECK(parse_domain("Movies") == Domain::movie);
        CHECK_FALSE(parse_domain("sports").has_value());
    }

    TEST_CASE("valid sessions survive a JSON round trip exactly") {
        auto s = testing::make_session("x-2", "x", "Forrest Gump", {"Hi there", "Hello", "Seen Forrest Gump?"});
        s.instance_index = 2;
        s.personality.set(Trait::openness, Polarity::negative);
        s.profile.set("Accepted movies", "Cast Away; Big");
        s.termination = Termination::round_cap;
        REQUIRE(validate_session(s).empty());
        const auto j = to_json(s);
        CHECK(session_from_json(ordered_json::parse(j.dump()), 1) == s);
    }

    TEST_CASE("session parse errors name line and field") {
        auto j = to_json(testing::make_session("x-0", "x", "T", {"a", "b"}));
        j["turns"][1]["role"] = "moderator";
        try {
            session_from_json(j, 7);
            FAIL("expected ParseError");
        } catch (const ParseError& e) {
            CHECK(e.line() == 7);
            CHECK(e.field() == "turns[1].role");
        }
    }
}
