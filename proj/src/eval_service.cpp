#include "roleplay/eval_service.hpp"

#include <algorithm>
#include <fstream>

#include <fmt/format.h>
#include <httplib.h>
#include <spdlog/spdlog.h>

#include "roleplay/errors.hpp"
#include "roleplay/metrics.hpp"

namespace roleplay {

VoteStore::VoteStore(std::filesystem::path path) : path_(std::move(path)) {
    if (!std::filesystem::exists(path_)) return;
    for_each_jsonl(path_, [&](const ordered_json& j, std::size_t line) {
        auto r = judgment_from_json(j, line);
        if (keys_.emplace(r.task_id, r.metric, r.chooser).second) records_.push_back(std::move(r));
    });
}

bool VoteStore::append(const JudgmentRecord& r) {
    std::lock_guard lock(mu_);
    if (!keys_.emplace(r.task_id, r.metric, r.chooser).second) return false;
    std::ofstream out(path_, std::ios::app | std::ios::binary);
    if (!out) {
        keys_.erase({r.task_id, r.metric, r.chooser});
        throw IoError(fmt::format("cannot append to vote store '{}'", path_.string()));
    }
    out << to_json(r).dump() << '\n';
    out.flush();
    records_.push_back(r);
    return true;
}

bool VoteStore::contains(const std::string& task_id, JudgeMetric m, const std::string& chooser) const {
    std::lock_guard lock(mu_);
    return keys_.contains({task_id, m, chooser});
}

std::vector<JudgmentRecord> VoteStore::records() const {
    std::lock_guard lock(mu_);
    return records_;
}

std::map<JudgeMetric, KappaResult> human_kappa(const std::vector<JudgmentRecord>& records,
                                               const std::vector<PairTask>& tasks, int raters) {
    std::map<std::string, const PairTask*> by_id;
    for (const auto& t : tasks) by_id[t.task_id] = &t;

    // metric -> task -> categories of the first `raters` human votes.
    std::map<JudgeMetric, std::map<std::string, std::vector<Source>>> votes;
    for (const auto& r : records) {
        if (!r.is_human() || !r.choice) continue;
        auto it = by_id.find(r.task_id);
        if (it == by_id.end()) continue;
        auto& v = votes[r.metric][r.task_id];
        if (static_cast<int>(v.size()) < raters) v.push_back(it->second->source_of(*r.choice));
    }

    std::map<JudgeMetric, KappaResult> out;
    for (auto m : kAllJudgeMetrics) {
        KappaResult res;
        std::vector<std::vector<int>> matrix;
        for (const auto& [task, v] : votes[m]) {
            if (static_cast<int>(v.size()) < raters) continue;
            std::vector<int> row(2, 0);
            for (auto s : v) ++row[s == Source::seed ? 0 : 1];
            matrix.push_back(std::move(row));
        }
        res.items = matrix.size();
        if (!matrix.empty() && raters >= 2) {
            try {
                res.kappa = fleiss_kappa(matrix, raters);
            } catch (const MetricError&) {
                // All ratings in one category. Chance agreement is 1, so the ratio is 0/0;
                // perfect observed agreement is reported as 1.
                res.degenerate = true;
                res.kappa = 1.0;
            }
        }
        out[m] = res;
    }
    return out;
}

struct EvalService::Server {
    httplib::Server http;
};

EvalService::EvalService(std::vector<PairTask> tasks, std::shared_ptr<VoteStore> store, int raters_per_task)
    : tasks_(std::move(tasks)), store_(std::move(store)), raters_(raters_per_task) {
    if (!store_) throw ConfigError("eval service needs a vote store");
    if (raters_ < 2) throw ConfigError("raters_per_task must be at least 2");
    for (std::size_t i = 0; i < tasks_.size(); ++i) {
        if (!index_.emplace(tasks_[i].task_id, i).second)
            throw ConfigError(fmt::format("duplicate task id '{}'", tasks_[i].task_id));
    }
}

EvalService::~EvalService() { stop(); }

namespace {

ordered_json error_body(std::string_view message, std::string_view field = {}) {
    ordered_json j{{"error", message}};
    if (!field.empty()) j["field"] = field;
    return j;
}

std::string human_chooser(const std::string& annotator) { return "human:" + annotator; }

}  // namespace

HttpReply EvalService::handle_next(const std::string& annotator) {
    if (annotator.empty()) return {400, error_body("missing annotator id", "annotator")};
    const auto chooser = human_chooser(annotator);
    const auto records = store_->records();

    // Per task: annotators with at least one vote, and this annotator's metric count.
    std::map<std::string, std::set<std::string>> voters;
    std::map<std::string, std::size_t> mine;
    for (const auto& r : records) {
        if (!r.is_human()) continue;
        voters[r.task_id].insert(r.chooser);
        if (r.chooser == chooser) ++mine[r.task_id];
    }

    std::lock_guard lock(assign_mu_);
    auto serve = [&](const PairTask& t) {
        pending_[annotator] = t.task_id;
        auto body = to_client_json(t);
        body["questions"] = ordered_json::array();
        for (auto m : kAllJudgeMetrics)
            body["questions"].push_back(ordered_json{{"metric", to_string(m)}, {"question", judge_question(m)}});
        return HttpReply{200, std::move(body)};
    };

    // A partially voted task is resumed before anything new.
    for (const auto& t : tasks_) {
        auto it = mine.find(t.task_id);
        if (it != mine.end() && it->second < kAllJudgeMetrics.size()) return serve(t);
    }
    if (auto p = pending_.find(annotator); p != pending_.end() && !mine.contains(p->second))
        return serve(tasks_[index_.at(p->second)]);

    // Least-voted task the annotator has not touched; assignments in flight count as votes.
    std::map<std::string, std::size_t> load;
    for (const auto& [task, who] : voters) load[task] = who.size();
    for (const auto& [who, task] : pending_)
        if (who != annotator && !voters[task].contains(human_chooser(who))) ++load[task];

    const PairTask* best = nullptr;
    std::size_t best_load = 0;
    for (const auto& t : tasks_) {
        if (mine.contains(t.task_id)) continue;
        const auto l = load[t.task_id];
        if (!best || l < best_load) {
            best = &t;
            best_load = l;
        }
    }
    if (!best) {
        pending_.erase(annotator);
        return {204, nullptr};
    }
    return serve(*best);
}

HttpReply EvalService::handle_vote(const std::string& body) {
    ordered_json j;
    try {
        j = ordered_json::parse(body);
    } catch (const nlohmann::json::exception&) {
        return {400, error_body("body is not valid JSON", "body")};
    }
    if (!j.is_object()) return {400, error_body("body must be a JSON object", "body")};

    auto text_field = [&](const char* name) -> std::optional<std::string> {
        auto it = j.find(name);
        if (it == j.end() || !it->is_string() || it->get<std::string>().empty()) return std::nullopt;
        return it->get<std::string>();
    };

    const auto task_id = text_field("task_id");
    if (!task_id) return {400, error_body("task_id must be a non-empty string", "task_id")};
    const auto metric_s = text_field("metric");
    const auto metric = metric_s ? parse_judge_metric(*metric_s) : std::nullopt;
    if (!metric)
        return {400, error_body("metric must be one of proactivity, coherence, personalization, success", "metric")};
    const auto annotator = text_field("annotator");
    if (!annotator) return {400, error_body("annotator must be a non-empty string", "annotator")};
    const auto choice_s = text_field("choice");
    const auto choice = choice_s ? parse_choice(*choice_s) : std::nullopt;
    if (!choice) return {400, error_body("choice must be 'a' or 'b'", "choice")};

    if (!index_.contains(*task_id)) return {404, error_body(fmt::format("unknown task '{}'", *task_id), "task_id")};

    JudgmentRecord r{*task_id, *metric, human_chooser(*annotator), choice, utc_timestamp()};
    if (!store_->append(r))
        return {409, error_body("vote already recorded for this task, metric and annotator")};
    return {201, to_json(r)};
}

HttpReply EvalService::handle_results() const {
    const auto records = store_->records();
    std::vector<JudgmentRecord> human;
    std::copy_if(records.begin(), records.end(), std::back_inserter(human),
                 [](const JudgmentRecord& r) { return r.is_human(); });

    ordered_json body;
    body["win_rates"] = to_json(win_rates(human, tasks_));
    ordered_json kappa = ordered_json::object();
    for (const auto& [m, k] : human_kappa(human, tasks_, raters_)) {
        kappa[std::string(to_string(m))] =
            ordered_json{{"kappa", k.kappa ? ordered_json(*k.kappa) : ordered_json(nullptr)},
                         {"items", k.items},
                         {"degenerate", k.degenerate}};
    }
    body["fleiss_kappa"] = std::move(kappa);
    body["raters_per_task"] = raters_;
    body["tasks"] = tasks_.size();
    body["votes"] = human.size();
    return {200, std::move(body)};
}

void EvalService::install_routes() {
    auto& http = server_->http;
    auto reply = [](httplib::Response& res, const HttpReply& r) {
        res.status = r.status;
        if (r.status != 204) res.set_content(r.body.dump(), "application/json");
    };
    http.Get("/tasks/next", [this, reply](const httplib::Request& req, httplib::Response& res) {
        reply(res, handle_next(req.get_param_value("annotator")));
    });
    http.Post("/votes", [this, reply](const httplib::Request& req, httplib::Response& res) {
        reply(res, handle_vote(req.body));
    });
    http.Get("/results", [this, reply](const httplib::Request&, httplib::Response& res) {
        reply(res, handle_results());
    });
    http.set_exception_handler([](const httplib::Request&, httplib::Response& res, std::exception_ptr ep) {
        std::string what = "internal error";
        try {
            std::rethrow_exception(ep);
        } catch (const std::exception& e) {
            what = e.what();
        } catch (...) {
        }
        spdlog::error("eval service: {}", what);
        res.status = 500;
        res.set_content(error_body(what).dump(), "application/json");
    });
}

int EvalService::start(const std::string& host, int port) {
    if (server_) throw ConfigError("eval service already running");
    server_ = std::make_unique<Server>();
    install_routes();
    int bound = port;
    if (port == 0) {
        bound = server_->http.bind_to_any_port(host);
    } else if (!server_->http.bind_to_port(host, port)) {
        bound = -1;
    }
    if (bound < 0) {
        server_.reset();
        throw IoError(fmt::format("cannot bind {}:{}", host, port));
    }
    thread_ = std::thread([this] { server_->http.listen_after_bind(); });
    server_->http.wait_until_ready();
    spdlog::info("eval service listening on {}:{}", host, bound);
    return bound;
}

void EvalService::stop() {
    if (!server_) return;
    server_->http.stop();
    if (thread_.joinable() && thread_.get_id() != std::this_thread::get_id()) thread_.join();
    server_.reset();
}

}  // namespace roleplay
