#include <doctest.h>

#include <sys/wait.h>

#include <cstdlib>

#include <fmt/format.h>

#include "helpers.hpp"
#include "roleplay/corpus.hpp"
#include "roleplay/judge.hpp"

using namespace roleplay;

namespace {

struct Run {
    int code = -1;
    std::string out;
    std::string err;
};

Run run_cli(const testing::TempDir& dir, const std::string& args, const std::string& env = {}) {
    const auto out = dir / "stdout.txt", err = dir / "stderr.txt";
    const auto cmd = fmt::format("{} '{}' {} > '{}' 2> '{}'", env, ROLEPLAY_CLI_PATH, args, out.string(), err.string());
    const int status = std::system(cmd.c_str());
    Run r;
    r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    r.out = testing::slurp(out);
    r.err = testing::slurp(err);
    return r;
}

std::string q(const std::filesystem::path& p) { return "'" + p.string() + "'"; }

std::string curate_args(const testing::TempDir& dir, const std::string& out, const std::string& extra) {
    return fmt::format("curate --seeds {} --reference {} --out {} --instances 3 --max-rounds 8 --seed 11 {}",
                       q(testing::fixture("seed1.jsonl")), q(testing::fixture("seeds10.jsonl")), q(dir / out), extra);
}

}  // namespace

TEST_SUITE("cli") {
    TEST_CASE("help and usage errors") {
        testing::TempDir dir;
        CHECK(run_cli(dir, "--help").code == 0);
        CHECK(run_cli(dir, "stats --no-such-flag x").code == 2);
        CHECK(run_cli(dir, "curate").code == 2);
        CHECK(run_cli(dir, "").code == 2);
    }

    TEST_CASE("ingest reports the seed file") {
        testing::TempDir dir;
        const auto r = run_cli(dir, "ingest " + q(testing::fixture("seeds10.jsonl")));
        REQUIRE(r.code == 0);
        const auto j = ordered_json::parse(r.out);
        CHECK(j["seeds"] == 10);
        const auto bad = dir / "bad.jsonl";
        testing::spit(bad, "{\"seed_id\": 1}\n");
        const auto e = run_cli(dir, "ingest " + q(bad));
        CHECK(e.code == 1);
        CHECK(e.err.find("line 1") != std::string::npos);
    }

    TEST_CASE("scripted curate, manifest and byte-identical replay") {
        testing::TempDir dir;
        const auto script = q(testing::fixture("scripts/golden"));
        auto r = run_cli(dir, curate_args(dir, "corpus.jsonl",
                                          fmt::format("--backend scripted --script {} --cache {} --run-log {}", script,
                                                      q(dir / "cache.jsonl"), q(dir / "runs.jsonl"))));
        INFO(r.err);
        REQUIRE(r.code == 0);
        const auto corpus = read_corpus(dir / "corpus.jsonl");
        REQUIRE(corpus.size() == 3);
        for (const auto& s : corpus) {
            CHECK(s.seed_id == "s01");
            CHECK(s.termination == Termination::moderator_accept);
        }
        CHECK(std::filesystem::exists(dir / "runs.jsonl"));

        const auto manifest = ordered_json::parse(testing::slurp(dir / "corpus.jsonl.manifest.json"));
        CHECK(manifest["command"] == "curate");
        CHECK(manifest["config"]["seed"] == 11);
        CHECK(manifest["inputs"].size() >= 2);
        CHECK(manifest["inputs"][0]["sha256"].get<std::string>().size() == 64);
        CHECK(manifest.contains("wall_time_ms"));
        CHECK(manifest.contains("token_usage"));

        r = run_cli(dir, curate_args(dir, "replayed.jsonl", "--backend replay --cache " + q(dir / "cache.jsonl")));
        INFO(r.err);
        REQUIRE(r.code == 0);
        CHECK(testing::slurp(dir / "replayed.jsonl") == testing::slurp(dir / "corpus.jsonl"));

        // A different seed changes the sampled personas, so replay misses and fails.
        r = run_cli(dir, fmt::format("curate --seeds {} --reference {} --out {} --instances 3 --seed 12 "
                                     "--backend replay --cache {}",
                                     q(testing::fixture("seed1.jsonl")), q(testing::fixture("seeds10.jsonl")),
                                     q(dir / "miss.jsonl"), q(dir / "cache.jsonl")));
        CHECK(r.code == 1);
    }

    TEST_CASE("live backend without a key fails naming the variable") {
        testing::TempDir dir;
        const auto r = run_cli(dir, curate_args(dir, "c.jsonl", "--backend live --api-key-env ROLEPLAY_TEST_NO_SUCH_KEY"),
                               "env -u ROLEPLAY_TEST_NO_SUCH_KEY");
        CHECK(r.code == 1);
        CHECK(r.err.find("ROLEPLAY_TEST_NO_SUCH_KEY") != std::string::npos);
    }

    TEST_CASE("split and stats") {
        testing::TempDir dir;
        std::vector<DialogueSession> c;
        for (int t = 0; t < 20; ++t)
            for (int i = 0; i < 5; ++i) {
                const auto id = fmt::format("t{}-{}", t, i);
                c.push_back(testing::make_session(id, id, fmt::format("Topic {}", t), {"hello there", "hi"}));
            }
        write_corpus(c, dir / "all.jsonl");
        auto r = run_cli(dir, fmt::format("split {} --out-dir {} --seed 3", q(dir / "all.jsonl"), q(dir / "splits")));
        INFO(r.err);
        REQUIRE(r.code == 0);
        const auto sp = read_splits(dir / "splits");
        CHECK(sp.total() == 100);
        CHECK(sp.test_unseen.size() == 10);
        CHECK(std::filesystem::exists(dir / "splits" / "manifest.json"));

        r = run_cli(dir, "stats --json " + q(dir / "splits"));
        REQUIRE(r.code == 0);
        const auto j = ordered_json::parse(r.out);
        CHECK(j["total_dialogues"] == 100);
        CHECK(j["dialogues"]["test_unseen"] == 10);

        r = run_cli(dir, "stats --acts " + q(dir / "all.jsonl"));
        REQUIRE(r.code == 0);
        CHECK(r.out.find("Total # dialogues (all)") != std::string::npos);

        testing::spit(dir / "empty.jsonl", "");
        r = run_cli(dir, "stats " + q(dir / "empty.jsonl"));
        CHECK(r.code == 0);
        CHECK(r.err.find("empty") != std::string::npos);
    }

    TEST_CASE("metrics scores a prediction file") {
        testing::TempDir dir;
        write_corpus({testing::make_session("d1", "s", "Forrest Gump", {"hello there", "hi", "watch forrest gump", "ok"})},
                     dir / "ref.jsonl");
        testing::spit(dir / "pred.jsonl",
                      "{\"dialogue_id\":\"d1\",\"turn_index\":0,\"prediction\":\"hello there\"}\n"
                      "{\"dialogue_id\":\"d1\",\"turn_index\":2,\"prediction\":\"watch forrest gump\"}\n");
        auto r = run_cli(dir, fmt::format("metrics --pred {} --corpus {} --out {}", q(dir / "pred.jsonl"),
                                          q(dir / "ref.jsonl"), q(dir / "m.json")));
        INFO(r.err);
        REQUIRE(r.code == 0);
        const auto j = ordered_json::parse(testing::slurp(dir / "m.json"));
        CHECK(j["succ_rate"] == doctest::Approx(1.0));

        testing::spit(dir / "bad.jsonl", "{\"dialogue_id\":\"zz\",\"turn_index\":0,\"prediction\":\"x\"}\n");
        r = run_cli(dir, fmt::format("metrics --pred {} --corpus {}", q(dir / "bad.jsonl"), q(dir / "ref.jsonl")));
        CHECK(r.code == 1);
    }

    TEST_CASE("judge with a scripted backend resumes without re-asking") {
        testing::TempDir dir;
        auto r = run_cli(dir, curate_args(dir, "corpus.jsonl",
                                          "--backend scripted --script " + q(testing::fixture("scripts/golden"))));
        REQUIRE(r.code == 0);
        testing::spit(dir / "judge.json",
                      R"({"moderator": ["Dialogue A", "Dialogue B", "unsure", "unsure", "B"]})");
        const auto args = fmt::format("judge --seeds {} --corpus {} --tasks-out {} --votes {} --n-targets 1 --seed 5 "
                                      "--backend scripted --script {}",
                                      q(testing::fixture("seed1.jsonl")), q(dir / "corpus.jsonl"),
                                      q(dir / "tasks.jsonl"), q(dir / "votes.jsonl"), q(dir / "judge.json"));
        r = run_cli(dir, args);
        INFO(r.err);
        REQUIRE(r.code == 0);
        CHECK(read_pair_tasks(dir / "tasks.jsonl").size() == 1);
        const auto votes = testing::slurp(dir / "votes.jsonl");
        CHECK(std::count(votes.begin(), votes.end(), '\n') == 4);
        CHECK(ordered_json::parse(r.out).contains("proactivity"));

        // Everything is judged, so a rerun with an empty script asks nothing.
        testing::spit(dir / "empty.json", R"({"moderator": []})");
        r = run_cli(dir, fmt::format("judge --tasks {} --votes {} --backend scripted --script {}",
                                     q(dir / "tasks.jsonl"), q(dir / "votes.jsonl"), q(dir / "empty.json")));
        INFO(r.err);
        CHECK(r.code == 0);
        CHECK(testing::slurp(dir / "votes.jsonl") == votes);
    }
}
