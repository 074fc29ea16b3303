#pragma once

#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "p3/detect.hpp"
#include "p3/ingest.hpp"

namespace p3 {

enum class PlayerGroup { defender, midfielder, u23 };
std::string_view to_string(PlayerGroup g);
std::optional<PlayerGroup> player_group_from_string(std::string_view s);

struct CountFilter {
    enum class Mode { group_median, fixed } mode = Mode::group_median;
    int n = 0;  // fixed mode only
};

struct KpiFilters {
    int min_minutes = 1140;
    CountFilter count_filter;
    std::string reference_date = "2020-08-01";
    int u23_age_bound = 23;
};

struct PlayerKpiRow {
    std::string player_id;
    std::string name;
    std::string team;
    PlayerGroup group = PlayerGroup::defender;
    int minutes = 0;
    int potential = 0;
    int penetrative = 0;
    double p3_percentage = 0.0;
};

struct TeamKpiRow {
    enum class Side { attack, defense };
    std::string team_id;
    Side side = Side::attack;
    int potential = 0;
    int penetrative = 0;
    double p3_percentage = 0.0;
    int opponent_moments = 0;
    int matches = 0;
    double opponent_potential_per_match = 0.0;
};

/// Season view of the per-match rosters: first appearance wins.
std::map<std::string, RosterPlayer> season_players(const std::vector<Roster>& rosters);

/// Minutes for one match: starters from 0, substitutes from their entry,
/// both until substituted off or the last event minute.
std::map<std::string, int> minutes_in_match(const Roster& roster);
std::map<std::string, int> minutes_played(const std::vector<Roster>& rosters);

/// Whole years between two YYYY-MM-DD dates; nullopt if either is malformed.
std::optional<int> age_on(std::string_view birth_date, std::string_view reference_date);

/// Defenders: position name contains "Back" (never a goalkeeper).
/// Midfielders: contains "Midfield". U23: younger than the bound on the
/// reference date; players without a birth date are never U23.
std::set<std::string> group_players(const std::map<std::string, RosterPlayer>& players, PlayerGroup group,
                                    const KpiFilters& filters = {});

/// Sorted by p3_percentage descending, then player_id.
std::vector<PlayerKpiRow> player_kpi(const std::vector<P3Moment>& moments, const std::map<std::string, int>& minutes,
                                     const std::map<std::string, RosterPlayer>& players, PlayerGroup group,
                                     const KpiFilters& filters = {});

/// Sorted by p3_percentage descending, then team_id.
std::vector<TeamKpiRow> team_attack_kpi(const std::vector<P3Moment>& moments);

struct MatchTeams {
    std::string match_id;
    std::vector<std::string> teams;
};

/// Opponent P3 moments per match played; ascending (fewer is better).
std::vector<TeamKpiRow> team_defense_kpi(const std::vector<P3Moment>& moments, const std::vector<MatchTeams>& matches);

nlohmann::json to_json(const std::vector<PlayerKpiRow>& rows, PlayerGroup group, const KpiFilters& filters);
nlohmann::json to_json(const std::vector<TeamKpiRow>& rows, TeamKpiRow::Side side);
std::string to_csv(const std::vector<PlayerKpiRow>& rows);
std::string to_csv(const std::vector<TeamKpiRow>& rows, TeamKpiRow::Side side);

/// RFC 4180 field quoting.
std::string csv_field(std::string_view s);

}  // namespace p3
