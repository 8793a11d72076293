#pragma once

#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <set>
#include <string>
#include <thread>
#include <tuple>
#include <vector>

#include "roleplay/judge.hpp"

namespace roleplay {

/// Append-only JSONL vote store. Replaying the file is idempotent: a repeated
/// (task, metric, chooser) line keeps the first record.
class VoteStore {
public:
    /// Creates the file lazily on first append.
    explicit VoteStore(std::filesystem::path path);

    /// False when a record with the same (task, metric, chooser) already exists.
    bool append(const JudgmentRecord& r);
    bool contains(const std::string& task_id, JudgeMetric m, const std::string& chooser) const;
    std::vector<JudgmentRecord> records() const;
    const std::filesystem::path& path() const { return path_; }

private:
    using Key = std::tuple<std::string, JudgeMetric, std::string>;
    std::filesystem::path path_;
    mutable std::mutex mu_;
    std::vector<JudgmentRecord> records_;
    std::set<Key> keys_;
};

struct KappaResult {
    std::optional<double> kappa;
    std::size_t items = 0;
    /// Every item unanimous and every rating in one category: kappa is reported as 1.
    bool degenerate = false;
};

/// Per-metric agreement over tasks with at least `raters` human raters (first `raters`
/// votes by file order), categories {seed, synthetic}.
std::map<JudgeMetric, KappaResult> human_kappa(const std::vector<JudgmentRecord>& records,
                                               const std::vector<PairTask>& tasks, int raters = 3);

struct HttpReply {
    int status = 200;
    ordered_json body;
};

/// Task assignment, vote intake and aggregation behind the annotation endpoints.
/// The handle_* methods hold the logic; start() exposes them over HTTP.
class EvalService {
public:
    EvalService(std::vector<PairTask> tasks, std::shared_ptr<VoteStore> store, int raters_per_task = 3);
    ~EvalService();

    EvalService(const EvalService&) = delete;
    EvalService& operator=(const EvalService&) = delete;

    /// GET /tasks/next?annotator=ID
    HttpReply handle_next(const std::string& annotator);
    /// POST /votes with {task_id, metric, annotator, choice}.
    HttpReply handle_vote(const std::string& body);
    /// GET /results
    HttpReply handle_results() const;

    /// Binds and serves on a background thread. port 0 picks a free port. Returns the port.
    int start(const std::string& host = "127.0.0.1", int port = 0);
    void stop();

private:
    struct Server;
    void install_routes();

    std::vector<PairTask> tasks_;
    std::map<std::string, std::size_t> index_;
    std::shared_ptr<VoteStore> store_;
    int raters_;
    std::mutex assign_mu_;
    std::map<std::string, std::string> pending_;  // annotator -> task_id
    std::unique_ptr<Server> server_;
    std::thread thread_;
};

}  // namespace roleplay
