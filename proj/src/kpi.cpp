#include "p3/kpi.hpp"

#include <algorithm>
#include <cstdio>
#include <sstream>

#include "p3/metrics.hpp"

namespace p3 {

using nlohmann::json;

std::string_view to_string(PlayerGroup g) {
    switch (g) {
        case PlayerGroup::defender: return "defenders";
        case PlayerGroup::midfielder: return "midfielders";
        case PlayerGroup::u23: return "u23";
    }
    return "?";
}

std::optional<PlayerGroup> player_group_from_string(std::string_view s) {
    if (s == "defenders" || s == "defender") return PlayerGroup::defender;
    if (s == "midfielders" || s == "midfielder") return PlayerGroup::midfielder;
    if (s == "u23" || s == "U23") return PlayerGroup::u23;
    return std::nullopt;
}

std::map<std::string, RosterPlayer> season_players(const std::vector<Roster>& rosters) {
    std::map<std::string, RosterPlayer> out;
    for (const auto& r : rosters) {
        for (const auto& [id, p] : r.players) out.emplace(id, p);
    }
    return out;
}

std::map<std::string, int> minutes_in_match(const Roster& roster) {
    std::map<std::string, int> start, stop;
    for (const auto& [team, xi] : roster.starting_xi) {
        for (const auto& id : xi) start[id] = 0;
    }
    for (const auto& s : roster.substitutions) {
        start.emplace(s.on_player, s.minute);
        stop.emplace(s.off_player, s.minute);
    }
    std::map<std::string, int> out;
    for (const auto& [id, from] : start) {
        const auto it = stop.find(id);
        const int to = it != stop.end() ? it->second : roster.match_end_minute;
        out[id] = std::max(0, to - from);
    }
    return out;
}

std::map<std::string, int> minutes_played(const std::vector<Roster>& rosters) {
    std::map<std::string, int> total;
    for (const auto& r : rosters) {
        for (const auto& [id, m] : minutes_in_match(r)) total[id] += m;
    }
    return total;
}

std::optional<int> age_on(std::string_view birth_date, std::string_view reference_date) {
    auto parse = [](std::string_view s, int& y, int& m, int& d) {
        if (s.size() != 10) return false;
        const std::string buf(s);
        return std::sscanf(buf.c_str(), "%4d-%2d-%2d", &y, &m, &d) == 3 && m >= 1 && m <= 12 && d >= 1 && d <= 31;
    };
    int by = 0, bm = 0, bd = 0, ry = 0, rm = 0, rd = 0;
    if (!parse(birth_date, by, bm, bd) || !parse(reference_date, ry, rm, rd)) return std::nullopt;
    int age = ry - by;
    if (std::tie(rm, rd) < std::tie(bm, bd)) --age;
    return age;
}

std::set<std::string> group_players(const std::map<std::string, RosterPlayer>& players, PlayerGroup group,
                                    const KpiFilters& filters) {
    std::set<std::string> out;
    for (const auto& [id, p] : players) {
        const auto& pos = p.position_name;
        bool member = false;
        switch (group) {
            case PlayerGroup::defender:
                member = pos.find("Back") != std::string::npos && pos.find("Goalkeeper") == std::string::npos;
                break;
            case PlayerGroup::midfielder: member = pos.find("Midfield") != std::string::npos; break;
            case PlayerGroup::u23:
                if (p.birth_date) {
                    const auto age = age_on(*p.birth_date, filters.reference_date);
                    member = age && *age < filters.u23_age_bound;
                }
                break;
        }
        if (member) out.insert(id);
    }
    return out;
}

std::vector<PlayerKpiRow> player_kpi(const std::vector<P3Moment>& moments, const std::map<std::string, int>& minutes,
                                     const std::map<std::string, RosterPlayer>& players, PlayerGroup group,
                                     const KpiFilters& filters) {
    const auto members = group_players(players, group, filters);
    std::map<std::string, std::pair<int, int>> counts;  // potential, penetrative
    for (const auto& m : moments) {
        if (!members.contains(m.player_id)) continue;
        auto& c = counts[m.player_id];
        ++c.first;
        if (m.label == Label::penetrative) ++c.second;
    }
    if (counts.empty()) return {};

    double count_floor = 0.0;
    if (filters.count_filter.mode == CountFilter::Mode::group_median) {
        std::vector<double> penetrative;
        for (const auto& [id, c] : counts) penetrative.push_back(c.second);
        count_floor = median(penetrative);
    } else {
        count_floor = filters.count_filter.n;
    }

    std::vector<PlayerKpiRow> rows;
    for (const auto& [id, c] : counts) {
        const auto mit = minutes.find(id);
        const int mins = mit != minutes.end() ? mit->second : 0;
        if (mins < filters.min_minutes || c.second < count_floor) continue;
        const auto& p = players.at(id);
        rows.push_back({id, p.name, p.team_id, group, mins, c.first, c.second,
                        static_cast<double>(c.second) / static_cast<double>(c.first)});
    }
    std::stable_sort(rows.begin(), rows.end(), [](const PlayerKpiRow& a, const PlayerKpiRow& b) {
        if (a.p3_percentage != b.p3_percentage) return a.p3_percentage > b.p3_percentage;
        return a.player_id < b.player_id;
    });
    return rows;
}

std::vector<TeamKpiRow> team_attack_kpi(const std::vector<P3Moment>& moments) {
    std::map<std::string, TeamKpiRow> by_team;
    for (const auto& m : moments) {
        auto& row = by_team[m.team_id];
        row.team_id = m.team_id;
        row.side = TeamKpiRow::Side::attack;
        ++row.potential;
        if (m.label == Label::penetrative) ++row.penetrative;
    }
    std::vector<TeamKpiRow> rows;
    for (auto& [id, row] : by_team) {
        row.p3_percentage = static_cast<double>(row.penetrative) / static_cast<double>(row.potential);
        rows.push_back(row);
    }
    std::stable_sort(rows.begin(), rows.end(), [](const TeamKpiRow& a, const TeamKpiRow& b) {
        if (a.p3_percentage != b.p3_percentage) return a.p3_percentage > b.p3_percentage;
        return a.team_id < b.team_id;
    });
    return rows;
}

std::vector<TeamKpiRow> team_defense_kpi(const std::vector<P3Moment>& moments, const std::vector<MatchTeams>& matches) {
    std::map<std::string, TeamKpiRow> by_team;
    std::map<std::string, const MatchTeams*> match_index;
    for (const auto& mt : matches) {
        match_index[mt.match_id] = &mt;
        for (const auto& t : mt.teams) {
            auto& row = by_team[t];
            row.team_id = t;
            row.side = TeamKpiRow::Side::defense;
            ++row.matches;
        }
    }
    for (const auto& m : moments) {
        const auto it = match_index.find(m.match_id);
        if (it == match_index.end()) continue;
        for (const auto& t : it->second->teams) {
            if (t != m.team_id) ++by_team[t].opponent_moments;
        }
    }
    std::vector<TeamKpiRow> rows;
    for (auto& [id, row] : by_team) {
        if (row.matches == 0) continue;
        row.opponent_potential_per_match = static_cast<double>(row.opponent_moments) / static_cast<double>(row.matches);
        rows.push_back(row);
    }
    std::stable_sort(rows.begin(), rows.end(), [](const TeamKpiRow& a, const TeamKpiRow& b) {
        if (a.opponent_potential_per_match != b.opponent_potential_per_match) {
            return a.opponent_potential_per_match < b.opponent_potential_per_match;
        }
        return a.team_id < b.team_id;
    });
    return rows;
}

json to_json(const std::vector<PlayerKpiRow>& rows, PlayerGroup group, const KpiFilters& filters) {
    json arr = json::array();
    for (const auto& r : rows) {
        arr.push_back({{"player_id", r.player_id},
                       {"name", r.name},
                       {"team", r.team},
                       {"group", to_string(r.group)},
                       {"minutes", r.minutes},
                       {"potential", r.potential},
                       {"penetrative", r.penetrative},
                       {"p3_percentage", r.p3_percentage}});
    }
    json count_filter = filters.count_filter.mode == CountFilter::Mode::group_median
                            ? json{{"mode", "group_median"}}
                            : json{{"mode", "fixed"}, {"n", filters.count_filter.n}};
    return {{"group", to_string(group)},
            {"filters",
             {{"min_minutes", filters.min_minutes},
              {"count_filter", count_filter},
              {"reference_date", filters.reference_date},
              {"u23_age_bound", filters.u23_age_bound}}},
            {"rows", std::move(arr)}};
}

json to_json(const std::vector<TeamKpiRow>& rows, TeamKpiRow::Side side) {
    json arr = json::array();
    for (const auto& r : rows) {
        if (side == TeamKpiRow::Side::attack) {
            arr.push_back({{"team_id", r.team_id}, {"potential", r.potential}, {"penetrative", r.penetrative}, {"p3_percentage", r.p3_percentage}});
        } else {
            arr.push_back({{"team_id", r.team_id},
                           {"opponent_moments", r.opponent_moments},
                           {"matches", r.matches},
                           {"opponent_potential_per_match", r.opponent_potential_per_match}});
        }
    }
    return {{"side", side == TeamKpiRow::Side::attack ? "attack" : "defense"}, {"rows", std::move(arr)}};
}

std::string csv_field(std::string_view s) {
    if (s.find_first_of(",\"\r\n") == std::string_view::npos) return std::string(s);
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += "\"\"";
        else out.push_back(c);
    }
    out.push_back('"');
    return out;
}

namespace {

std::string num(double v) { return json(v).dump(); }

}  // namespace

std::string to_csv(const std::vector<PlayerKpiRow>& rows) {
    std::string out = "player_id,name,team,group,minutes,potential,penetrative,p3_percentage\r\n";
    for (const auto& r : rows) {
        out += csv_field(r.player_id) + "," + csv_field(r.name) + "," + csv_field(r.team) + "," +
               std::string(to_string(r.group)) + "," + std::to_string(r.minutes) + "," + std::to_string(r.potential) + "," +
               std::to_string(r.penetrative) + "," + num(r.p3_percentage) + "\r\n";
    }
    return out;
}

std::string to_csv(const std::vector<TeamKpiRow>& rows, TeamKpiRow::Side side) {
    std::string out = side == TeamKpiRow::Side::attack ? "team_id,potential,penetrative,p3_percentage\r\n"
                                                       : "team_id,opponent_moments,matches,opponent_potential_per_match\r\n";
    for (const auto& r : rows) {
        if (side == TeamKpiRow::Side::attack) {
            out += csv_field(r.team_id) + "," + std::to_string(r.potential) + "," + std::to_string(r.penetrative) + "," +
                   num(r.p3_percentage) + "\r\n";
        } else {
            out += csv_field(r.team_id) + "," + std::to_string(r.opponent_moments) + "," + std::to_string(r.matches) + "," +
                   num(r.opponent_potential_per_match) + "\r\n";
        }
    }
    return out;
}

}  // namespace p3
