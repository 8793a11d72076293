#pragma once

#include <unistd.h>

#include <atomic>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "roleplay/types.hpp"

namespace testing {

inline std::filesystem::path fixture(const std::string& name) {
    return std::filesystem::path(ROLEPLAY_FIXTURES_DIR) / name;
}

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
public:
    TempDir() {
        static std::atomic<int> counter{0};
        path_ = std::filesystem::temp_directory_path() /
                ("roleplay_test_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
        std::filesystem::remove_all(path_);
        std::filesystem::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    const std::filesystem::path& path() const { return path_; }
    std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

private:
    std::filesystem::path path_;
};

inline std::string slurp(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline void spit(const std::filesystem::path& p, const std::string& text) {
    std::ofstream out(p, std::ios::binary | std::ios::trunc);
    out << text;
}

/// Well-formed session alternating system/user with the given utterances.
inline roleplay::DialogueSession make_session(std::string id, std::string seed_id, std::string topic,
                                              std::vector<std::string> utterances,
                                              roleplay::Domain domain = roleplay::Domain::movie) {
    roleplay::DialogueSession s;
    s.id = std::move(id);
    s.seed_id = std::move(seed_id);
    s.target = {"Movie recommendation", std::move(topic), domain};
    s.knowledge = {{s.target.topic, "Stars", "Someone"}};
    s.profile.set("Name", "Li Hua");
    for (std::size_t i = 0; i < utterances.size(); ++i)
        s.turns.push_back({i % 2 == 0 ? roleplay::Role::system : roleplay::Role::user, utterances[i],
                           roleplay::round_of_position(i)});
    s.termination = roleplay::Termination::moderator_accept;
    return s;
}

}  // namespace testing
