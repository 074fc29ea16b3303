#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <random>
#include <string>
#include <unistd.h>
#include <vector>

#include "p3/cli.hpp"
#include "p3/detect.hpp"
#include "p3/ingest.hpp"
#include "p3/kpi.hpp"

namespace p3::test {

class Rng {
public:
    explicit Rng(std::uint64_t seed) : gen_(seed) {}
    double uniform(double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(gen_); }
    int integer(int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(gen_); }
    std::mt19937_64& engine() { return gen_; }

private:
    std::mt19937_64 gen_;
};

/// Removes itself on destruction.
class TempDir {
public:
    explicit TempDir(const std::string& tag) {
        static int counter = 0;
        path_ = std::filesystem::temp_directory_path() /
                ("p3test-" + tag + "-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
        std::filesystem::remove_all(path_);
        std::filesystem::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;
    const std::filesystem::path& path() const { return path_; }

private:
    std::filesystem::path path_;
};

struct SnapshotSpec {
    std::string match_id = "m1";
    std::string event_id = "e1";
    std::string team_id = "home";
    std::string player_id = "p1";
    Point origin{60, 40};
    std::vector<Point> opponents;
    std::vector<Point> teammates;
    std::vector<Point> keepers;  // opposition keepers
    BodyPart body_part = BodyPart::right_foot;
    PassOutcome outcome = PassOutcome::complete;
    std::optional<Point> end;
    bool set_piece = false;
    bool under_pressure = false;
    int minute = 10;
};

inline PassSnapshot make_snapshot(const SnapshotSpec& s) {
    PassSnapshot snap;
    Event& e = snap.event;
    e.event_id = s.event_id;
    e.match_id = s.match_id;
    e.team_id = s.team_id;
    e.player_id = s.player_id;
    e.minute = s.minute;
    e.period = s.minute < 45 ? 1 : 2;
    e.event_kind = EventKind::pass;
    e.type_name = "Pass";
    e.location = s.origin;
    e.under_pressure = s.under_pressure;
    PassDetail d;
    d.body_part = s.body_part;
    d.outcome = s.outcome;
    d.end_location = s.end ? s.end : std::optional<Point>(Point{s.origin.x + 10, s.origin.y});
    d.set_piece = s.set_piece;
    if (s.set_piece) d.pass_type = "Free Kick";
    e.pass_detail = d;
    snap.frame.event_id = s.event_id;
    snap.frame.players.push_back({s.origin, true, true, false});
    for (const auto& p : s.opponents) snap.frame.players.push_back({p, false, false, false});
    for (const auto& p : s.teammates) snap.frame.players.push_back({p, true, false, false});
    for (const auto& p : s.keepers) snap.frame.players.push_back({p, false, false, true});
    return snap;
}

/// A square of opponents ahead of (60,40) with one teammate at its centre.
inline SnapshotSpec square_spec() {
    SnapshotSpec s;
    s.opponents = {{70, 30}, {90, 30}, {90, 50}, {70, 50}};
    s.teammates = {{80, 40}};
    s.end = Point{80, 40};
    return s;
}

/// Runs synth through kpi under `root` via the command-line entry point.
/// Returns the first nonzero exit code, or 0.
inline int build_pipeline(const std::filesystem::path& root, int n, int cnn_epochs, double positive_share = 0.4) {
    const std::string r = root.string();
    const std::vector<std::vector<std::string>> steps{
        {"p3", "--root", r, "--positive_share", std::to_string(positive_share), "synth", "--n", std::to_string(n)},
        {"p3", "--root", r, "detect"},
        {"p3", "--root", r, "render"},
        {"p3", "--root", r, "--cnn_epochs", std::to_string(cnn_epochs), "train"},
        {"p3", "--root", r, "eval"},
        {"p3", "--root", r, "kpi", "--group", "defenders"},
        {"p3", "--root", r, "kpi", "--teams", "attack"},
        {"p3", "--root", r, "kpi", "--teams", "defense"},
    };
    for (const auto& args : steps) {
        if (const int code = p3::run(args); code != 0) return code;
    }
    return 0;
}

/// Four matches: m1 A-B, m2 C-D, m3 A-C, m4 B-D.
struct ToyLeague {
    std::vector<P3Moment> moments;
    std::map<std::string, int> minutes;
    std::map<std::string, RosterPlayer> players;
    std::vector<MatchTeams> matches;
};

inline ToyLeague toy_league() {
    struct Entry {
        std::string id, position, birth;
        int potential, penetrative, minutes;
    };
    struct Side {
        std::string team;
        std::vector<Entry> entries;
        std::string first_match, second_match;
        int in_first;
    };
    const std::vector<Side> sides{
        {"A",
         {{"d1", "Left Center Back", "", 10, 5, 1500},
          {"d2", "Right Back", "", 4, 1, 2000},
          {"d3", "Right Center Back", "", 20, 8, 1800},
          {"d4", "Left Back", "", 14, 7, 1100},
          {"d5", "Left Wing Back", "", 3, 0, 1200},
          {"x1", "Center Forward", "", 49, 11, 2500}},
         "m1", "m3", 60},
        {"B", {{"m1p", "Center Defensive Midfield", "", 6, 3, 1300}, {"b2", "Right Wing", "", 74, 17, 2000}}, "m1", "m4", 30},
        {"C",
         {{"u1", "Left Wing", "1999-03-01", 5, 2, 1400},
          {"u2", "Right Wing", "1997-06-01", 10, 5, 1600},
          {"c3", "Center Forward", "", 59, 30, 1700}},
         "m3", "m2", 20},
        {"D", {{"dfw", "Center Forward", "", 25, 5, 900}}, "m2", "m4", 10},
    };
    ToyLeague league;
    league.matches = {{"m1", {"A", "B"}}, {"m2", {"C", "D"}}, {"m3", {"A", "C"}}, {"m4", {"B", "D"}}};
    for (const auto& side : sides) {
        int k = 0;
        for (const auto& e : side.entries) {
            RosterPlayer p;
            p.player_id = e.id;
            p.name = "Player " + e.id;
            p.position_name = e.position;
            if (!e.birth.empty()) p.birth_date = e.birth;
            p.team_id = side.team;
            league.players[e.id] = p;
            league.minutes[e.id] = e.minutes;
            for (int i = 0; i < e.potential; ++i, ++k) {
                P3Moment m;
                m.match_id = k < side.in_first ? side.first_match : side.second_match;
                m.team_id = side.team;
                m.player_id = e.id;
                m.event_id = side.team + "-" + std::to_string(k);
                m.moment_id = m.event_id;
                m.label = i < e.penetrative ? Label::penetrative : Label::non_penetrative;
                league.moments.push_back(m);
            }
        }
    }
    return league;
}

}  // namespace p3::test
