#include "p3/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <random>

#include "p3/hashing.hpp"

namespace p3 {

namespace {

class Rng {
public:
    explicit Rng(std::uint64_t seed) : gen_(seed) {}
    double uniform() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
    int integer(int lo, int hi) { return lo + static_cast<int>(gen_() % static_cast<std::uint64_t>(hi - lo + 1)); }
    bool bernoulli(double p) { return uniform() < p; }

    // Fisher-Yates with our own draws so the order is portable.
    template <class T>
    void shuffle(std::vector<T>& v) {
        for (std::size_t i = v.size(); i > 1; --i) std::swap(v[i - 1], v[static_cast<std::size_t>(integer(0, static_cast<int>(i) - 1))]);
    }

private:
    std::mt19937_64 gen_;
};

struct TeamSheet {
    std::string team_id;
    std::vector<RosterPlayer> players;  // 0..10 starters (0 = keeper), 11..13 bench
};

constexpr const char* kPositions[14] = {
    "Goalkeeper",        "Right Back",           "Right Center Back",        "Left Center Back",
    "Left Back",         "Right Center Midfield", "Center Defensive Midfield", "Left Center Midfield",
    "Right Wing",        "Center Forward",       "Left Wing",                "Right Center Back",
    "Center Attacking Midfield", "Center Forward",
};

std::vector<TeamSheet> make_teams(const SynthConfig& cfg, Rng& rng) {
    std::vector<TeamSheet> teams;
    for (int t = 0; t < cfg.n_teams; ++t) {
        TeamSheet sheet;
        sheet.team_id = "team-" + std::to_string(t + 1);
        for (int k = 0; k < 14; ++k) {
            RosterPlayer p;
            p.player_id = sheet.team_id + "-p" + std::to_string(k + 1);
            p.name = "Player " + std::to_string(k + 1) + " of Team " + std::to_string(t + 1);
            p.position_name = kPositions[k];
            p.team_id = sheet.team_id;
            char date[16];
            std::snprintf(date, sizeof date, "%04d-%02d-%02d", rng.integer(1988, 2003), rng.integer(1, 12), rng.integer(1, 28));
            p.birth_date = date;
            sheet.players.push_back(std::move(p));
        }
        teams.push_back(std::move(sheet));
    }
    return teams;
}

enum class Flaw { none, header, outside_zone, set_piece, no_receiver };

struct PassDraft {
    Event event;
    Frame360 frame;
};

// Opponents placed on a jittered polygon around `centre`.
std::vector<Point> hull_ring(Rng& rng, Point centre, double radius, int k) {
    std::vector<Point> pts;
    const double step = 2.0 * std::numbers::pi / k;
    const double phase = rng.uniform(0.0, step);
    for (int j = 0; j < k; ++j) {
        const double theta = phase + j * step + rng.uniform(-0.1, 0.1) * step;
        const double r = radius * rng.uniform(0.85, 1.0);
        pts.push_back({centre.x + r * std::cos(theta), centre.y + r * std::sin(theta)});
    }
    return pts;
}

PassDraft draft_pass(Rng& rng, bool positive, Flaw flaw) {
    PassDraft d;
    Point origin{rng.uniform(42.0, 72.0), rng.uniform(8.0, 72.0)};
    if (flaw == Flaw::outside_zone) origin.x = rng.uniform(15.0, 35.0);
    const bool pressure = rng.bernoulli(0.3);

    const int k = positive ? rng.integer(3, 4) : rng.integer(5, 7);
    const double radius = positive ? rng.uniform(15.0, 20.0) : rng.uniform(4.0, 7.0);
    Point centre{origin.x + radius + rng.uniform(3.0, 8.0), 0.0};
    centre.y = std::clamp(origin.y + rng.uniform(-10.0, 10.0), radius + 1.0, kPitchWidth - radius - 1.0);

    auto& players = d.frame.players;
    players.push_back({origin, true, true, false});
    for (const auto& p : hull_ring(rng, centre, radius, k)) players.push_back({p, false, false, false});
    const Point receiver{centre.x + rng.uniform(-0.15, 0.15) * radius, centre.y + rng.uniform(-0.15, 0.15) * radius};
    players.push_back({flaw == Flaw::no_receiver ? Point{origin.x - 6.0, receiver.y} : receiver, true, false, false});
    players.push_back({{rng.uniform(112.0, 118.0), rng.uniform(36.0, 44.0)}, false, false, true});
    const double back_lo = std::max(0.0, origin.x - 25.0);
    std::vector<Point> behind_mates;
    for (int j = rng.integer(3, 4); j > 0; --j) {
        players.push_back({{rng.uniform(back_lo, origin.x - 2.0), rng.uniform(2.0, 78.0)}, false, false, false});
    }
    for (int j = rng.integer(3, 5); j > 0; --j) {
        const Point p{rng.uniform(back_lo, origin.x - 3.0), rng.uniform(2.0, 78.0)};
        behind_mates.push_back(p);
        players.push_back({p, true, false, false});
    }
    for (auto& p : players) p.location = clamp_to_pitch(p.location);

    const double vx0 = std::max(0.0, origin.x - 30.0);
    d.frame.visible_area = Polygon{{{vx0, 0.0}, {kPitchLength, 0.0}, {kPitchLength, kPitchWidth}, {vx0, kPitchWidth}}};

    Event& e = d.event;
    e.event_kind = EventKind::pass;
    e.type_name = "Pass";
    e.location = origin;
    e.under_pressure = pressure;
    PassDetail pass;
    pass.body_part = flaw == Flaw::header ? BodyPart::head : (rng.bernoulli(0.7) ? BodyPart::right_foot : BodyPart::left_foot);
    if (flaw == Flaw::set_piece) {
        pass.pass_type = "Free Kick";
        pass.set_piece = true;
    }
    if (positive) {
        pass.outcome = PassOutcome::complete;
        pass.end_location = players[static_cast<std::size_t>(k) + 1].location;
    } else if (rng.bernoulli(0.5)) {
        pass.outcome = PassOutcome::incomplete;
        pass.end_location = players[static_cast<std::size_t>(k) + 1].location;
    } else {
        pass.outcome = PassOutcome::complete;
        pass.end_location = behind_mates.front();
    }
    e.pass_detail = pass;
    return d;
}

Flaw pick_flaw(Rng& rng) {
    switch (rng.integer(0, 3)) {
        case 0: return Flaw::header;
        case 1: return Flaw::outside_zone;
        case 2: return Flaw::set_piece;
        default: return Flaw::no_receiver;
    }
}

bool meets_intent(const PassSnapshot& s, const DetectConfig& detect, bool positive, Flaw flaw) {
    const auto result = detect_p3(s, detect);
    if (flaw != Flaw::none) return std::holds_alternative<Rejection>(result);
    const auto* m = std::get_if<P3Moment>(&result);
    return m && (m->label == Label::penetrative) == positive;
}

}  // namespace

SynthCorpus generate_corpus(const SynthConfig& cfg, const DetectConfig& detect) {
    if (cfg.n < 0 || cfg.passes_per_match < 1 || cfg.n_teams < 2 || !(cfg.positive_share >= 0 && cfg.positive_share <= 1) ||
        !(cfg.reject_share >= 0 && cfg.reject_share <= 1)) {
        throw std::invalid_argument("synth: bad configuration");
    }
    Rng rng(cfg.seed);
    const auto teams = make_teams(cfg, rng);
    SynthCorpus corpus;
    const int n_matches = (cfg.n + cfg.passes_per_match - 1) / cfg.passes_per_match;
    int remaining = cfg.n;

    // Exact class counts: round(n * reject_share) flawed passes, then
    // round(valid * positive_share) positives among the rest.
    const int flawed = static_cast<int>(std::lround(cfg.n * cfg.reject_share));
    const int positives = static_cast<int>(std::lround((cfg.n - flawed) * cfg.positive_share));
    std::vector<int> plan(static_cast<std::size_t>(cfg.n), 0);  // 0 negative, 1 positive, 2 flawed
    std::fill_n(plan.begin(), flawed, 2);
    std::fill_n(plan.begin() + flawed, positives, 1);
    rng.shuffle(plan);
    std::size_t next_plan = 0;

    for (int mi = 0; mi < n_matches; ++mi) {
        char id[64];
        std::snprintf(id, sizeof id, "%s-%04d", cfg.match_prefix.c_str(), mi + 1);
        const std::string match_id = id;
        corpus.match_ids.push_back(match_id);

        const int home = mi % cfg.n_teams;
        const int away = (home + 1 + (mi / cfg.n_teams) % (cfg.n_teams - 1)) % cfg.n_teams;
        const TeamSheet* sides[2] = {&teams[static_cast<std::size_t>(home)], &teams[static_cast<std::size_t>(away)]};

        Roster roster;
        roster.match_id = match_id;
        for (const TeamSheet* side : sides) {
            roster.team_ids.push_back(side->team_id);
            auto& xi = roster.starting_xi[side->team_id];
            for (std::size_t k = 0; k < side->players.size(); ++k) {
                roster.players[side->players[k].player_id] = side->players[k];
                if (k < 11) xi.push_back(side->players[k].player_id);
            }
        }
        corpus.rosters[match_id] = roster;

        const int end_minute = 90 + rng.integer(0, 5);
        std::vector<Event> events;
        int counter = 0;
        auto next_id = [&] { return match_id + "-e" + std::to_string(++counter); };
        // Substitutions: winger off for the spare centre back at 60', forward off at 75'.
        const std::pair<int, std::pair<int, int>> subs[] = {{60, {8, 11}}, {75, {9, 12}}};
        for (const TeamSheet* side : sides) {
            for (const auto& [minute, swap] : subs) {
                Event s;
                s.event_id = next_id();
                s.match_id = match_id;
                s.minute = minute;
                s.period = 2;
                s.team_id = side->team_id;
                s.player_id = side->players[static_cast<std::size_t>(swap.first)].player_id;
                s.replacement_id = side->players[static_cast<std::size_t>(swap.second)].player_id;
                s.event_kind = EventKind::substitution;
                s.type_name = "Substitution";
                events.push_back(s);
            }
        }

        const int in_match = std::min(remaining, cfg.passes_per_match);
        remaining -= in_match;
        std::vector<Frame360> frames;
        for (int pi = 0; pi < in_match; ++pi) {
            const int kind = plan[next_plan++];
            const bool positive = kind == 1;
            const Flaw flaw = kind == 2 ? pick_flaw(rng) : Flaw::none;
            const int side_index = rng.integer(0, 1);
            const TeamSheet& side = *sides[side_index];
            const int minute = rng.integer(0, end_minute - 1);
            int slot = rng.integer(1, 10);  // outfield starters
            if (slot == 8 && minute >= 60) slot = 11;
            if (slot == 9 && minute >= 75) slot = 12;

            PassDraft draft;
            for (int attempt = 0;; ++attempt) {
                draft = draft_pass(rng, positive, flaw);
                draft.event.event_id = match_id + "-p" + std::to_string(pi + 1);
                draft.event.match_id = match_id;
                draft.frame.event_id = draft.event.event_id;
                if (meets_intent(PassSnapshot{draft.event, draft.frame, +1}, detect, positive, flaw)) break;
                if (attempt > 100) throw std::runtime_error("synth: could not realise a pass after 100 attempts");
            }
            Event& e = draft.event;
            e.minute = minute;
            e.second = rng.integer(0, 59);
            e.period = minute < 45 ? 1 : 2;
            e.team_id = side.team_id;
            e.player_id = side.players[static_cast<std::size_t>(slot)].player_id;
            events.push_back(e);
            frames.push_back(draft.frame);
        }
        Event end;
        end.event_id = next_id();
        end.match_id = match_id;
        end.minute = end_minute;
        end.period = 2;
        end.event_kind = EventKind::other;
        end.type_name = "Half End";
        events.push_back(end);
        std::stable_sort(events.begin(), events.end(), [](const Event& a, const Event& b) {
            return std::tie(a.period, a.minute, a.second) < std::tie(b.period, b.minute, b.second);
        });
        corpus.events[match_id] = std::move(events);
        corpus.frames[match_id] = std::move(frames);
    }
    return corpus;
}

void write_raw_corpus(const SynthCorpus& corpus, const std::filesystem::path& data_dir) {
    for (const auto& match_id : corpus.match_ids) {
        nlohmann::json events = nlohmann::json::array();
        for (const auto& e : corpus.events.at(match_id)) events.push_back(event_to_statsbomb(e));
        nlohmann::json frames = nlohmann::json::array();
        for (const auto& f : corpus.frames.at(match_id)) frames.push_back(frame_to_statsbomb(f));
        write_file(data_dir / "events" / (match_id + ".json"), events.dump() + "\n");
        write_file(data_dir / "three-sixty" / (match_id + ".json"), frames.dump() + "\n");
        write_file(data_dir / "lineups" / (match_id + ".json"), roster_to_statsbomb(corpus.rosters.at(match_id)).dump() + "\n");
    }
}

}  // namespace p3
