#include "p3/detect.hpp"

#include <sstream>
#include <stdexcept>

#include "p3/hashing.hpp"

namespace p3 {

using nlohmann::json;

std::string_view to_string(Label l) { return l == Label::penetrative ? "penetrative" : "non_penetrative"; }

std::string_view to_string(Rejection r) {
    switch (r) {
        case Rejection::not_a_pass: return "not a pass";
        case Rejection::body_part: return "body part";
        case Rejection::set_piece: return "set piece";
        case Rejection::outside_zone: return "outside zone";
        case Rejection::insufficient_opponents: return "insufficient opponents";
        case Rejection::degenerate_hull: return "degenerate hull";
        case Rejection::no_receiver_inside_hull: return "no receiver inside hull";
    }
    return "unknown";
}

void DetectConfig::validate() const {
    if (!(zone_lo >= 0.0 && zone_lo < zone_hi && zone_hi <= kPitchLength)) {
        throw std::invalid_argument("detect config: zone bounds must satisfy 0 <= lo < hi <= 120");
    }
    if (min_opponents_for_hull < 3) throw std::invalid_argument("detect config: min_opponents_for_hull must be >= 3");
}

std::pair<Label, LabelBasis> label_penetrative(const Polygon& hull, const PassDetail& pass) {
    LabelBasis basis;
    basis.outcome = pass.outcome;
    basis.end_location = pass.end_location;
    basis.end_in_hull = pass.end_location && point_in_polygon(*pass.end_location, hull) != Containment::outside;
    return {label_from_basis(basis), basis};
}

DetectOutcome detect_p3(const PassSnapshot& snapshot, const DetectConfig& cfg) {
    const Event& e = snapshot.event;
    if (e.event_kind != EventKind::pass || !e.pass_detail || !e.location) return Rejection::not_a_pass;
    const PassDetail& pass = *e.pass_detail;
    if (pass.body_part != BodyPart::right_foot && pass.body_part != BodyPart::left_foot) return Rejection::body_part;
    if (cfg.exclude_set_pieces && pass.set_piece) return Rejection::set_piece;
    const Point origin = *e.location;
    if (!zone_contains(origin.x, cfg.zone_lo, cfg.zone_hi)) return Rejection::outside_zone;

    std::vector<Point> ahead;
    for (const auto& p : snapshot.frame.players) {
        if (!p.teammate && !p.keeper && p.location.x > origin.x) ahead.push_back(p.location);
    }
    if (static_cast<int>(ahead.size()) < cfg.min_opponents_for_hull) return Rejection::insufficient_opponents;
    auto hull = convex_hull(ahead);
    if (!hull) return Rejection::degenerate_hull;

    std::vector<Point> receivers;
    for (const auto& p : snapshot.frame.players) {
        if (!p.teammate || p.actor) continue;
        const auto c = point_in_polygon(p.location, *hull);
        if (c == Containment::inside || (c == Containment::boundary && cfg.boundary_counts_inside)) {
            receivers.push_back(p.location);
        }
    }
    if (receivers.empty()) return Rejection::no_receiver_inside_hull;

    P3Moment m;
    m.moment_id = moment_id_for(e.match_id, e.event_id);
    m.match_id = e.match_id;
    m.event_id = e.event_id;
    m.team_id = e.team_id;
    m.player_id = e.player_id;
    m.period = e.period;
    m.minute = e.minute;
    m.second = e.second;
    m.origin = origin;
    m.under_pressure = e.under_pressure;
    m.body_part = pass.body_part;
    m.opponents_in_hull_count = static_cast<int>(ahead.size());
    m.receivers_inside = std::move(receivers);
    m.visible_area = snapshot.frame.visible_area;
    m.all_players = snapshot.frame.players;
    std::tie(m.label, m.label_basis) = label_penetrative(*hull, pass);
    m.hull = std::move(*hull);
    return m;
}

ScanResult scan_corpus(const Store& store, const DetectConfig& cfg) {
    cfg.validate();
    ScanResult out;
    for (const auto& match_id : store.match_ids) {
        const auto it = store.snapshots.find(match_id);
        if (it == store.snapshots.end()) continue;
        for (const auto& s : it->second) {
            ++out.report.snapshots;
            auto result = detect_p3(s, cfg);
            if (auto* m = std::get_if<P3Moment>(&result)) {
                ++out.report.moments;
                if (m->label == Label::penetrative) ++out.report.positives;
                out.moments.push_back(std::move(*m));
            } else {
                ++out.report.rejections[std::string(to_string(std::get<Rejection>(result)))];
            }
        }
    }
    return out;
}

PassSnapshot snapshot_from_moment(const P3Moment& m) {
    PassSnapshot s;
    Event& e = s.event;
    e.event_id = m.event_id;
    e.match_id = m.match_id;
    e.minute = m.minute;
    e.second = m.second;
    e.period = m.period;
    e.team_id = m.team_id;
    e.player_id = m.player_id;
    e.event_kind = EventKind::pass;
    e.type_name = "Pass";
    e.location = m.origin;
    e.under_pressure = m.under_pressure;
    PassDetail d;
    d.body_part = m.body_part;
    d.end_location = m.label_basis.end_location;
    d.outcome = m.label_basis.outcome;
    e.pass_detail = d;
    s.frame.event_id = m.event_id;
    s.frame.visible_area = m.visible_area;
    s.frame.players = m.all_players;
    return s;
}

namespace {

json polygon_json(const Polygon& p) {
    json arr = json::array();
    for (const auto& v : p.vertices) arr.push_back(to_json(v));
    return arr;
}

Polygon polygon_from(const json& j) {
    Polygon p;
    for (const auto& v : j) p.vertices.push_back(point_from_json(v));
    return p;
}

}  // namespace

json to_json(const P3Moment& m) {
    json receivers = json::array();
    for (const auto& r : m.receivers_inside) receivers.push_back(to_json(r));
    json players = json::array();
    for (const auto& p : m.all_players) players.push_back(to_json(p));
    return {{"moment_id", m.moment_id},
            {"match_id", m.match_id},
            {"event_id", m.event_id},
            {"team_id", m.team_id},
            {"player_id", m.player_id},
            {"period", m.period},
            {"minute", m.minute},
            {"second", m.second},
            {"origin", to_json(m.origin)},
            {"under_pressure", m.under_pressure},
            {"body_part", to_string(m.body_part)},
            {"hull", polygon_json(m.hull)},
            {"hull_area", polygon_area(m.hull)},
            {"opponents_in_hull_count", m.opponents_in_hull_count},
            {"receivers_inside", std::move(receivers)},
            {"visible_area", m.visible_area ? polygon_json(*m.visible_area) : json()},
            {"all_players", std::move(players)},
            {"label", to_string(m.label)},
            {"label_basis",
             {{"outcome", to_string(m.label_basis.outcome)},
              {"end_location", m.label_basis.end_location ? to_json(*m.label_basis.end_location) : json()},
              {"end_in_hull", m.label_basis.end_in_hull}}}};
}

P3Moment moment_from_json(const json& j) {
    P3Moment m;
    m.moment_id = j.at("moment_id").get<std::string>();
    m.match_id = j.at("match_id").get<std::string>();
    m.event_id = j.at("event_id").get<std::string>();
    m.team_id = j.at("team_id").get<std::string>();
    m.player_id = j.at("player_id").get<std::string>();
    m.period = j.at("period").get<int>();
    m.minute = j.at("minute").get<int>();
    m.second = j.at("second").get<int>();
    m.origin = point_from_json(j.at("origin"));
    m.under_pressure = j.at("under_pressure").get<bool>();
    m.body_part = body_part_from_string(j.at("body_part").get<std::string>());
    m.hull = polygon_from(j.at("hull"));
    m.opponents_in_hull_count = j.at("opponents_in_hull_count").get<int>();
    for (const auto& r : j.at("receivers_inside")) m.receivers_inside.push_back(point_from_json(r));
    if (!j.at("visible_area").is_null()) m.visible_area = polygon_from(j.at("visible_area"));
    for (const auto& p : j.at("all_players")) m.all_players.push_back(frame_player_from_json(p));
    m.label = j.at("label").get<std::string>() == "penetrative" ? Label::penetrative : Label::non_penetrative;
    const json& b = j.at("label_basis");
    m.label_basis.outcome = outcome_from_string(b.at("outcome").get<std::string>());
    if (!b.at("end_location").is_null()) m.label_basis.end_location = point_from_json(b.at("end_location"));
    m.label_basis.end_in_hull = b.at("end_in_hull").get<bool>();
    return m;
}

json to_json(const DetectReport& r) {
    return {{"snapshots", r.snapshots},
            {"moments", r.moments},
            {"positives", r.positives},
            {"positive_share", r.positive_share()},
            {"rejections", r.rejections}};
}

json to_json(const DetectConfig& c) {
    return {{"min_opponents_for_hull", c.min_opponents_for_hull},
            {"boundary_counts_inside", c.boundary_counts_inside},
            {"zone_lo", c.zone_lo},
            {"zone_hi", c.zone_hi},
            {"exclude_set_pieces", c.exclude_set_pieces}};
}

void write_moments(const std::filesystem::path& path, const std::vector<P3Moment>& moments) {
    std::string lines;
    for (const auto& m : moments) {
        lines += to_json(m).dump();
        lines += '\n';
    }
    write_file(path, lines);
}

std::vector<P3Moment> read_moments(const std::filesystem::path& path) {
    if (!std::filesystem::exists(path)) throw DataError("missing " + path.string() + "; run `p3 detect` first");
    std::vector<P3Moment> out;
    std::istringstream lines(read_file(path));
    std::string line;
    while (std::getline(lines, line)) {
        if (!line.empty()) out.push_back(moment_from_json(json::parse(line)));
    }
    return out;
}

}  // namespace p3
