#include "p3/ingest.hpp"

#include <algorithm>
#include <numeric>
#include <sstream>
#include <unordered_map>

#include "p3/hashing.hpp"

namespace p3 {

using nlohmann::json;
namespace fs = std::filesystem;

std::string_view to_string(EventKind k) {
    switch (k) {
        case EventKind::pass: return "pass";
        case EventKind::substitution: return "substitution";
        case EventKind::other: return "other";
    }
    return "other";
}

std::string_view to_string(BodyPart b) {
    switch (b) {
        case BodyPart::right_foot: return "right_foot";
        case BodyPart::left_foot: return "left_foot";
        case BodyPart::head: return "head";
        case BodyPart::other: return "other";
    }
    return "other";
}

std::string_view to_string(PassOutcome o) {
    switch (o) {
        case PassOutcome::complete: return "complete";
        case PassOutcome::incomplete: return "incomplete";
        case PassOutcome::out: return "out";
        case PassOutcome::offside: return "offside";
        case PassOutcome::unknown: return "unknown";
    }
    return "unknown";
}

BodyPart body_part_from_string(std::string_view s) {
    if (s == "right_foot" || s == "Right Foot") return BodyPart::right_foot;
    if (s == "left_foot" || s == "Left Foot") return BodyPart::left_foot;
    if (s == "head" || s == "Head") return BodyPart::head;
    return BodyPart::other;
}

PassOutcome outcome_from_string(std::string_view s) {
    if (s == "complete" || s == "Complete") return PassOutcome::complete;
    if (s == "incomplete" || s == "Incomplete") return PassOutcome::incomplete;
    if (s == "out" || s == "Out") return PassOutcome::out;
    if (s == "offside" || s == "Pass Offside") return PassOutcome::offside;
    return PassOutcome::unknown;
}

namespace {

// Vendor names used when writing the StatsBomb schema back out.
std::string_view vendor_body_part(BodyPart b) {
    switch (b) {
        case BodyPart::right_foot: return "Right Foot";
        case BodyPart::left_foot: return "Left Foot";
        case BodyPart::head: return "Head";
        case BodyPart::other: return "Other";
    }
    return "Other";
}

std::string_view vendor_outcome(PassOutcome o) {
    switch (o) {
        case PassOutcome::incomplete: return "Incomplete";
        case PassOutcome::out: return "Out";
        case PassOutcome::offside: return "Pass Offside";
        case PassOutcome::unknown: return "Unknown";
        case PassOutcome::complete: return "Complete";
    }
    return "Unknown";
}

bool is_set_piece_type(std::string_view name) {
    return name == "Throw-in" || name == "Corner" || name == "Free Kick" || name == "Kick Off" ||
           name == "Goal Kick";
}

json parse_json(std::string_view raw) {
    try {
        return json::parse(raw.begin(), raw.end());
    } catch (const json::parse_error& e) {
        throw ParseError(e.what(), e.byte > 0 ? e.byte - 1 : 0);
    }
}

std::optional<std::string> id_of(const json& j) {
    if (j.is_string()) return j.get<std::string>();
    if (j.is_number_integer()) return std::to_string(j.get<long long>());
    if (j.is_number_unsigned()) return std::to_string(j.get<unsigned long long>());
    return std::nullopt;
}

std::optional<std::string> nested_id(const json& el, const char* key) {
    auto it = el.find(key);
    if (it == el.end()) return std::nullopt;
    if (it->is_object()) {
        auto id = it->find("id");
        if (id == it->end()) return std::nullopt;
        return id_of(*id);
    }
    return id_of(*it);
}

std::optional<std::string> nested_name(const json& el, const char* key) {
    auto it = el.find(key);
    if (it == el.end() || !it->is_object()) return std::nullopt;
    auto name = it->find("name");
    if (name == it->end() || !name->is_string()) return std::nullopt;
    return name->get<std::string>();
}

std::optional<Point> location_of(const json& el, const char* key, std::size_t& clamped) {
    auto it = el.find(key);
    if (it == el.end() || !it->is_array() || it->size() < 2 || !(*it)[0].is_number() || !(*it)[1].is_number()) {
        return std::nullopt;
    }
    const Point raw{(*it)[0].get<double>(), (*it)[1].get<double>()};
    const Point c = clamp_to_pitch(raw);
    if (!(c == raw)) ++clamped;
    return c;
}

std::optional<int> int_field(const json& el, const char* key) {
    auto it = el.find(key);
    if (it == el.end() || !it->is_number_integer()) return std::nullopt;
    return it->get<int>();
}

bool bool_field(const json& el, const char* key) {
    auto it = el.find(key);
    return it != el.end() && it->is_boolean() && it->get<bool>();
}

json point_array(Point p) { return json::array({p.x, p.y}); }

}  // namespace

Point clamp_to_pitch(Point p) {
    return {std::clamp(p.x, 0.0, kPitchLength), std::clamp(p.y, 0.0, kPitchWidth)};
}

ParseResult<Event> parse_events(std::string_view raw, const std::string& match_id) {
    const json doc = parse_json(raw);
    if (!doc.is_array()) throw ParseError("events: expected a JSON array", 0);
    ParseResult<Event> out;
    out.items.reserve(doc.size());
    for (std::size_t i = 0; i < doc.size(); ++i) {
        const json& el = doc[i];
        if (!el.is_object()) {
            out.errors.push_back({i, "element is not an object"});
            continue;
        }
        Event e;
        e.match_id = match_id;
        e.type_name = nested_name(el, "type").value_or("");
        e.event_kind = e.type_name == "Pass"           ? EventKind::pass
                       : e.type_name == "Substitution" ? EventKind::substitution
                                                       : EventKind::other;
        const bool is_pass = e.event_kind == EventKind::pass;
        std::vector<std::string> missing;

        if (auto id = el.contains("id") ? id_of(el["id"]) : std::nullopt) e.event_id = *id;
        else if (is_pass) missing.emplace_back("id");

        const auto minute = int_field(el, "minute");
        const auto second = int_field(el, "second");
        const auto period = int_field(el, "period");
        if (is_pass && !minute) missing.emplace_back("minute");
        if (is_pass && !second) missing.emplace_back("second");
        if (is_pass && !period) missing.emplace_back("period");
        e.minute = std::max(0, minute.value_or(0));
        e.second = std::clamp(second.value_or(0), 0, 59);
        e.period = std::max(1, period.value_or(1));

        auto team = nested_id(el, "team");
        auto player = nested_id(el, "player");
        if (is_pass && !team) missing.emplace_back("team");
        if (is_pass && !player) missing.emplace_back("player");
        e.team_id = team.value_or("");
        e.player_id = player.value_or("");

        std::size_t clamped = 0;
        e.location = location_of(el, "location", clamped);
        if (is_pass && !e.location) missing.emplace_back("location");
        e.under_pressure = bool_field(el, "under_pressure");

        if (is_pass) {
            auto p = el.find("pass");
            if (p == el.end() || !p->is_object()) {
                missing.emplace_back("pass");
            } else {
                PassDetail d;
                d.body_part = body_part_from_string(nested_name(*p, "body_part").value_or(""));
                d.end_location = location_of(*p, "end_location", clamped);
                // Absent outcome means the pass was completed.
                if (auto outcome = nested_name(*p, "outcome")) d.outcome = outcome_from_string(*outcome);
                d.pass_type = nested_name(*p, "type").value_or("");
                d.set_piece = is_set_piece_type(d.pass_type);
                e.pass_detail = d;
            }
        } else if (e.event_kind == EventKind::substitution) {
            if (auto s = el.find("substitution"); s != el.end() && s->is_object()) {
                e.replacement_id = nested_id(*s, "replacement").value_or("");
            }
        }

        if (!missing.empty()) {
            std::string msg = "pass missing required field(s):";
            for (const auto& m : missing) msg += " " + m;
            out.errors.push_back({i, msg});
            continue;
        }
        out.clamped += clamped;
        out.items.push_back(std::move(e));
    }
    return out;
}

ParseResult<Frame360> parse_frames(std::string_view raw) {
    const json doc = parse_json(raw);
    if (!doc.is_array()) throw ParseError("frames: expected a JSON array", 0);
    ParseResult<Frame360> out;
    out.items.reserve(doc.size());
    for (std::size_t i = 0; i < doc.size(); ++i) {
        const json& el = doc[i];
        if (!el.is_object()) {
            out.errors.push_back({i, "element is not an object"});
            continue;
        }
        Frame360 f;
        auto id = el.contains("event_uuid") ? id_of(el["event_uuid"]) : std::nullopt;
        if (!id) {
            out.errors.push_back({i, "frame missing event_uuid"});
            continue;
        }
        f.event_id = *id;

        if (auto va = el.find("visible_area"); va != el.end() && va->is_array() && va->size() >= 6) {
            Polygon poly;
            for (std::size_t k = 0; k + 1 < va->size(); k += 2) {
                poly.vertices.push_back(clamp_to_pitch({(*va)[k].get<double>(), (*va)[k + 1].get<double>()}));
            }
            f.visible_area = std::move(poly);
        }

        std::size_t clamped = 0;
        int actors = 0;
        bool bad = false;
        if (auto ff = el.find("freeze_frame"); ff != el.end() && ff->is_array()) {
            for (const json& pj : *ff) {
                auto loc = location_of(pj, "location", clamped);
                if (!loc) {
                    bad = true;
                    break;
                }
                FramePlayer p{*loc, bool_field(pj, "teammate"), bool_field(pj, "actor"), bool_field(pj, "keeper")};
                if (p.actor) {
                    p.teammate = true;
                    ++actors;
                }
                f.players.push_back(p);
            }
        }
        if (bad) {
            out.errors.push_back({i, "freeze_frame player without location"});
            continue;
        }
        if (actors > 1) {
            out.errors.push_back({i, "freeze_frame has more than one actor"});
            continue;
        }
        out.clamped += clamped;
        out.items.push_back(std::move(f));
    }
    return out;
}

Roster parse_lineups(std::string_view raw, const std::string& match_id) {
    const json doc = parse_json(raw);
    if (!doc.is_array()) throw ParseError("lineups: expected a JSON array", 0);
    if (doc.empty()) throw DataError("roster incomplete: no teams in lineup file for match " + match_id);
    Roster r;
    r.match_id = match_id;
    for (const json& team : doc) {
        auto team_id = nested_id(team, "team_id");
        if (!team_id) throw DataError("roster incomplete: team without team_id in match " + match_id);
        r.team_ids.push_back(*team_id);
        auto& xi = r.starting_xi[*team_id];
        auto lineup = team.find("lineup");
        if (lineup == team.end() || !lineup->is_array()) continue;
        for (const json& pj : *lineup) {
            auto pid = pj.contains("player_id") ? id_of(pj["player_id"]) : std::nullopt;
            if (!pid) continue;
            RosterPlayer p;
            p.player_id = *pid;
            p.team_id = *team_id;
            if (auto n = pj.find("player_name"); n != pj.end() && n->is_string()) p.name = n->get<std::string>();
            if (auto b = pj.find("birth_date"); b != pj.end() && b->is_string()) p.birth_date = b->get<std::string>();
            if (auto pos = pj.find("positions"); pos != pj.end() && pos->is_array() && !pos->empty()) {
                const json& first = (*pos)[0];
                if (auto name = first.find("position"); name != first.end() && name->is_string()) {
                    p.position_name = name->get<std::string>();
                }
                if (auto reason = first.find("start_reason");
                    reason != first.end() && reason->is_string() && reason->get<std::string>() == "Starting XI") {
                    xi.push_back(p.player_id);
                }
            }
            r.players[p.player_id] = std::move(p);
        }
    }
    return r;
}

std::size_t attach_events(Roster& roster, const std::vector<Event>& events) {
    std::size_t skipped = 0;
    for (const auto& e : events) {
        roster.match_end_minute = std::max(roster.match_end_minute, e.minute);
        if (e.event_kind != EventKind::substitution) continue;
        const bool known = roster.players.contains(e.player_id) && roster.players.contains(e.replacement_id);
        bool starter_on = false;
        if (known) {
            const auto& xi = roster.starting_xi[roster.players.at(e.replacement_id).team_id];
            starter_on = std::find(xi.begin(), xi.end(), e.replacement_id) != xi.end();
        }
        if (!known || starter_on) {
            ++skipped;
            continue;
        }
        roster.substitutions.push_back({e.minute, e.team_id, e.player_id, e.replacement_id});
    }
    return skipped;
}

PassSnapshot normalize(PassSnapshot s) {
    if (s.event.location) s.event.location = clamp_to_pitch(*s.event.location);
    if (s.event.pass_detail && s.event.pass_detail->end_location) {
        s.event.pass_detail->end_location = clamp_to_pitch(*s.event.pass_detail->end_location);
    }
    for (auto& p : s.frame.players) p.location = clamp_to_pitch(p.location);
    s.attack_sign = +1;
    return s;
}

JoinResult join_pass_frames(const std::vector<Event>& events, const std::vector<Frame360>& frames) {
    JoinResult out;
    std::unordered_map<std::string, std::size_t> by_event;
    for (std::size_t i = 0; i < frames.size(); ++i) {
        if (!by_event.emplace(frames[i].event_id, i).second) ++out.report.duplicate_frames;
    }
    for (const auto& e : events) {
        if (e.event_kind != EventKind::pass) continue;
        ++out.report.passes;
        auto it = by_event.find(e.event_id);
        if (it == by_event.end()) {
            ++out.report.unmatched;
            continue;
        }
        const Frame360& f = frames[it->second];
        const bool has_opponent =
            std::any_of(f.players.begin(), f.players.end(), [](const FramePlayer& p) { return !p.teammate; });
        if (!has_opponent) {
            ++out.report.no_opponents;
            continue;
        }
        out.snapshots.push_back(normalize(PassSnapshot{e, f, +1}));
    }
    std::stable_sort(out.snapshots.begin(), out.snapshots.end(), [](const PassSnapshot& a, const PassSnapshot& b) {
        const auto& x = a.event;
        const auto& y = b.event;
        return std::tie(x.match_id, x.period, x.minute, x.second) < std::tie(y.match_id, y.period, y.minute, y.second);
    });
    out.report.snapshots = out.snapshots.size();
    return out;
}

// --- vendor schema -------------------------------------------------------

json event_to_statsbomb(const Event& e) {
    json j;
    j["id"] = e.event_id;
    j["period"] = e.period;
    j["minute"] = e.minute;
    j["second"] = e.second;
    std::string type = e.type_name;
    if (type.empty()) type = e.event_kind == EventKind::pass ? "Pass" : e.event_kind == EventKind::substitution ? "Substitution" : "Other";
    j["type"] = {{"name", type}};
    if (!e.team_id.empty()) j["team"] = {{"id", e.team_id}};
    if (!e.player_id.empty()) j["player"] = {{"id", e.player_id}};
    if (e.location) j["location"] = point_array(*e.location);
    if (e.under_pressure) j["under_pressure"] = true;
    if (e.pass_detail) {
        const auto& d = *e.pass_detail;
        json p;
        p["body_part"] = {{"name", vendor_body_part(d.body_part)}};
        if (d.end_location) p["end_location"] = point_array(*d.end_location);
        if (d.outcome != PassOutcome::complete) p["outcome"] = {{"name", vendor_outcome(d.outcome)}};
        if (!d.pass_type.empty()) p["type"] = {{"name", d.pass_type}};
        j["pass"] = std::move(p);
    }
    if (e.event_kind == EventKind::substitution) {
        j["substitution"] = {{"replacement", {{"id", e.replacement_id}}}};
    }
    return j;
}

json frame_to_statsbomb(const Frame360& f) {
    json j;
    j["event_uuid"] = f.event_id;
    if (f.visible_area) {
        json va = json::array();
        for (const auto& v : f.visible_area->vertices) {
            va.push_back(v.x);
            va.push_back(v.y);
        }
        j["visible_area"] = std::move(va);
    }
    json ff = json::array();
    for (const auto& p : f.players) {
        ff.push_back({{"teammate", p.teammate}, {"actor", p.actor}, {"keeper", p.keeper}, {"location", point_array(p.location)}});
    }
    j["freeze_frame"] = std::move(ff);
    return j;
}

json roster_to_statsbomb(const Roster& r) {
    json teams = json::array();
    for (const auto& team_id : r.team_ids) {
        json lineup = json::array();
        const auto xi_it = r.starting_xi.find(team_id);
        for (const auto& [pid, p] : r.players) {
            if (p.team_id != team_id) continue;
            json pj;
            pj["player_id"] = p.player_id;
            pj["player_name"] = p.name;
            if (p.birth_date) pj["birth_date"] = *p.birth_date;
            const bool starter = xi_it != r.starting_xi.end() &&
                                 std::find(xi_it->second.begin(), xi_it->second.end(), pid) != xi_it->second.end();
            json pos = json::array();
            if (!p.position_name.empty() || starter) {
                json first{{"position", p.position_name}};
                first["start_reason"] = starter ? "Starting XI" : "Substitution - On (Tactical)";
                pos.push_back(std::move(first));
            }
            pj["positions"] = std::move(pos);
            lineup.push_back(std::move(pj));
        }
        teams.push_back({{"team_id", team_id}, {"lineup", std::move(lineup)}});
    }
    return teams;
}

// --- store schema --------------------------------------------------------

json to_json(const Point& p) { return point_array(p); }

Point point_from_json(const json& j) { return {j.at(0).get<double>(), j.at(1).get<double>()}; }

json to_json(const FramePlayer& p) {
    return {{"location", to_json(p.location)}, {"teammate", p.teammate}, {"actor", p.actor}, {"keeper", p.keeper}};
}

FramePlayer frame_player_from_json(const json& j) {
    return {point_from_json(j.at("location")), j.at("teammate").get<bool>(), j.at("actor").get<bool>(),
            j.at("keeper").get<bool>()};
}

json to_json(const PassSnapshot& s) {
    const Event& e = s.event;
    json ev;
    ev["event_id"] = e.event_id;
    ev["match_id"] = e.match_id;
    ev["minute"] = e.minute;
    ev["second"] = e.second;
    ev["period"] = e.period;
    ev["team_id"] = e.team_id;
    ev["player_id"] = e.player_id;
    ev["event_kind"] = to_string(e.event_kind);
    ev["type_name"] = e.type_name;
    ev["location"] = e.location ? to_json(*e.location) : json();
    ev["under_pressure"] = e.under_pressure;
    if (e.pass_detail) {
        const auto& d = *e.pass_detail;
        ev["pass_detail"] = {{"body_part", to_string(d.body_part)},
                             {"end_location", d.end_location ? to_json(*d.end_location) : json()},
                             {"outcome", to_string(d.outcome)},
                             {"set_piece", d.set_piece},
                             {"pass_type", d.pass_type}};
    } else {
        ev["pass_detail"] = nullptr;
    }
    json fr;
    fr["event_id"] = s.frame.event_id;
    if (s.frame.visible_area) {
        json va = json::array();
        for (const auto& v : s.frame.visible_area->vertices) va.push_back(to_json(v));
        fr["visible_area"] = std::move(va);
    } else {
        fr["visible_area"] = nullptr;
    }
    json players = json::array();
    for (const auto& p : s.frame.players) players.push_back(to_json(p));
    fr["players"] = std::move(players);
    return {{"event", std::move(ev)}, {"frame", std::move(fr)}, {"attack_sign", s.attack_sign}};
}

PassSnapshot snapshot_from_json(const json& j) {
    PassSnapshot s;
    const json& ev = j.at("event");
    Event& e = s.event;
    e.event_id = ev.at("event_id").get<std::string>();
    e.match_id = ev.at("match_id").get<std::string>();
    e.minute = ev.at("minute").get<int>();
    e.second = ev.at("second").get<int>();
    e.period = ev.at("period").get<int>();
    e.team_id = ev.at("team_id").get<std::string>();
    e.player_id = ev.at("player_id").get<std::string>();
    const auto kind = ev.at("event_kind").get<std::string>();
    e.event_kind = kind == "pass" ? EventKind::pass : kind == "substitution" ? EventKind::substitution : EventKind::other;
    e.type_name = ev.value("type_name", "");
    if (!ev.at("location").is_null()) e.location = point_from_json(ev.at("location"));
    e.under_pressure = ev.at("under_pressure").get<bool>();
    if (const json& pd = ev.at("pass_detail"); !pd.is_null()) {
        PassDetail d;
        d.body_part = body_part_from_string(pd.at("body_part").get<std::string>());
        if (!pd.at("end_location").is_null()) d.end_location = point_from_json(pd.at("end_location"));
        d.outcome = outcome_from_string(pd.at("outcome").get<std::string>());
        d.set_piece = pd.at("set_piece").get<bool>();
        d.pass_type = pd.value("pass_type", "");
        e.pass_detail = d;
    }
    const json& fr = j.at("frame");
    s.frame.event_id = fr.at("event_id").get<std::string>();
    if (!fr.at("visible_area").is_null()) {
        Polygon poly;
        for (const auto& v : fr.at("visible_area")) poly.vertices.push_back(point_from_json(v));
        s.frame.visible_area = std::move(poly);
    }
    for (const auto& p : fr.at("players")) s.frame.players.push_back(frame_player_from_json(p));
    s.attack_sign = j.at("attack_sign").get<int>();
    return s;
}

json to_json(const Roster& r) {
    json players = json::object();
    for (const auto& [id, p] : r.players) {
        players[id] = {{"name", p.name},
                       {"position_name", p.position_name},
                       {"birth_date", p.birth_date ? json(*p.birth_date) : json()},
                       {"team_id", p.team_id}};
    }
    json subs = json::array();
    for (const auto& s : r.substitutions) {
        subs.push_back({{"minute", s.minute}, {"team_id", s.team_id}, {"off_player", s.off_player}, {"on_player", s.on_player}});
    }
    return {{"match_id", r.match_id},
            {"team_ids", r.team_ids},
            {"players", std::move(players)},
            {"starting_xi", r.starting_xi},
            {"substitutions", std::move(subs)},
            {"match_end_minute", r.match_end_minute}};
}

Roster roster_from_json(const json& j) {
    Roster r;
    r.match_id = j.at("match_id").get<std::string>();
    r.team_ids = j.at("team_ids").get<std::vector<std::string>>();
    for (const auto& [id, pj] : j.at("players").items()) {
        RosterPlayer p;
        p.player_id = id;
        p.name = pj.at("name").get<std::string>();
        p.position_name = pj.at("position_name").get<std::string>();
        if (!pj.at("birth_date").is_null()) p.birth_date = pj.at("birth_date").get<std::string>();
        p.team_id = pj.at("team_id").get<std::string>();
        r.players[id] = std::move(p);
    }
    r.starting_xi = j.at("starting_xi").get<std::map<std::string, std::vector<std::string>>>();
    for (const auto& s : j.at("substitutions")) {
        r.substitutions.push_back({s.at("minute").get<int>(), s.at("team_id").get<std::string>(),
                                   s.at("off_player").get<std::string>(), s.at("on_player").get<std::string>()});
    }
    r.match_end_minute = j.at("match_end_minute").get<int>();
    return r;
}

// --- directory stage -----------------------------------------------------

IngestSummary ingest_directory(const fs::path& data_dir, const fs::path& store_dir) {
    const fs::path events_dir = data_dir / "events";
    if (!fs::is_directory(events_dir)) throw DataError("missing events directory: " + events_dir.string());

    std::vector<std::string> match_ids;
    for (const auto& entry : fs::directory_iterator(events_dir)) {
        if (entry.is_regular_file() && entry.path().extension() == ".json") match_ids.push_back(entry.path().stem().string());
    }
    std::sort(match_ids.begin(), match_ids.end());

    fs::create_directories(store_dir);
    IngestSummary summary;
    json manifest_matches = json::object();
    for (const auto& match_id : match_ids) {
        MatchCounts counts;
        auto events = parse_events(read_file(events_dir / (match_id + ".json")), match_id);
        counts.record_errors += events.errors.size();
        counts.clamped += events.clamped;

        ParseResult<Frame360> frames;
        const fs::path frames_path = data_dir / "three-sixty" / (match_id + ".json");
        if (fs::exists(frames_path)) frames = parse_frames(read_file(frames_path));
        counts.record_errors += frames.errors.size();
        counts.clamped += frames.clamped;

        const auto joined = join_pass_frames(events.items, frames.items);
        counts.passes = joined.report.passes;
        counts.snapshots = joined.report.snapshots;
        counts.unmatched = joined.report.unmatched;
        counts.no_opponents = joined.report.no_opponents;
        counts.duplicate_frames = joined.report.duplicate_frames;

        std::string lines;
        for (const auto& s : joined.snapshots) {
            lines += to_json(s).dump();
            lines += '\n';
        }
        write_file(store_dir / (match_id + ".snapshots.jsonl"), lines);

        const fs::path lineups_path = data_dir / "lineups" / (match_id + ".json");
        if (fs::exists(lineups_path)) {
            Roster roster = parse_lineups(read_file(lineups_path), match_id);
            attach_events(roster, events.items);
            write_file(store_dir / (match_id + ".roster.json"), to_json(roster).dump(2) + "\n");
        }

        manifest_matches[match_id] = {{"passes", counts.passes},
                                      {"snapshots", counts.snapshots},
                                      {"unmatched", counts.unmatched},
                                      {"clamped", counts.clamped},
                                      {"no_opponents", counts.no_opponents},
                                      {"duplicate_frames", counts.duplicate_frames},
                                      {"record_errors", counts.record_errors}};
        summary.matches[match_id] = counts;
    }
    json manifest{{"schema_version", kStoreSchemaVersion}, {"match_order", match_ids}, {"matches", manifest_matches}};
    write_file(store_dir / "manifest.json", manifest.dump(2) + "\n");
    return summary;
}

Store load_store(const fs::path& store_dir) {
    const fs::path manifest_path = store_dir / "manifest.json";
    if (!fs::exists(manifest_path)) throw DataError("store not found (missing " + manifest_path.string() + "); run `p3 ingest` or `p3 synth` first");
    const json manifest = parse_json(read_file(manifest_path));
    if (manifest.value("schema_version", 0) != kStoreSchemaVersion) throw DataError("store schema version mismatch");
    Store store;
    store.match_ids = manifest.at("match_order").get<std::vector<std::string>>();
    for (const auto& match_id : store.match_ids) {
        auto& snaps = store.snapshots[match_id];
        std::istringstream lines(read_file(store_dir / (match_id + ".snapshots.jsonl")));
        std::string line;
        while (std::getline(lines, line)) {
            if (!line.empty()) snaps.push_back(snapshot_from_json(parse_json(line)));
        }
        const fs::path roster_path = store_dir / (match_id + ".roster.json");
        if (fs::exists(roster_path)) store.rosters[match_id] = roster_from_json(parse_json(read_file(roster_path)));
    }
    return store;
}

}  // namespace p3
