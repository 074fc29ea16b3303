#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>

#include "p3/hashing.hpp"
#include "p3/ingest.hpp"
#include "p3/kpi.hpp"
#include "p3/synth.hpp"
#include "support.hpp"

using namespace p3;
using nlohmann::json;

namespace {

json pass_element(const std::string& id, double x, double y) {
    return {{"id", id},
            {"period", 1},
            {"minute", 12},
            {"second", 30},
            {"type", {{"name", "Pass"}}},
            {"team", {{"id", 217}, {"name", "Home"}}},
            {"player", {{"id", 5503}, {"name", "Someone"}}},
            {"location", {x, y}},
            {"pass", {{"end_location", {x + 10, y}}, {"body_part", {{"name", "Right Foot"}}}}}};
}

json frame_element(const std::string& id, int teammates, int opponents) {
    json ff = json::array();
    ff.push_back({{"teammate", true}, {"actor", true}, {"keeper", false}, {"location", {60, 40}}});
    for (int i = 0; i < teammates; ++i) ff.push_back({{"teammate", true}, {"actor", false}, {"keeper", false}, {"location", {50 + i, 30}}});
    for (int i = 0; i < opponents; ++i) ff.push_back({{"teammate", false}, {"actor", false}, {"keeper", false}, {"location", {70 + i, 45}}});
    return {{"event_uuid", id}, {"visible_area", {0, 0, 120, 0, 120, 80, 0, 80}}, {"freeze_frame", ff}};
}

}  // namespace

TEST_CASE("empty event and frame arrays parse to nothing") {
    CHECK(parse_events("[]", "m").items.empty());
    CHECK(parse_frames("[]").items.empty());
}

TEST_CASE("a pass element parses its location and pressure flag") {
    json el = pass_element("a", 60, 40);
    el["under_pressure"] = true;
    const auto r = parse_events(json::array({el}).dump(), "m");
    REQUIRE(r.items.size() == 1);
    const Event& e = r.items[0];
    CHECK(e.event_kind == EventKind::pass);
    CHECK(e.under_pressure);
    CHECK(e.location == Point{60, 40});
    CHECK(e.team_id == "217");
    CHECK(e.player_id == "5503");
    REQUIRE(e.pass_detail);
    CHECK(e.pass_detail->body_part == BodyPart::right_foot);
}

TEST_CASE("a pass with no outcome is complete; named outcomes map") {
    json a = pass_element("a", 60, 40);
    json b = pass_element("b", 60, 40);
    b["pass"]["outcome"] = {{"name", "Incomplete"}};
    json c = pass_element("c", 60, 40);
    c["pass"]["type"] = {{"name", "Corner"}};
    const auto r = parse_events(json::array({a, b, c}).dump(), "m");
    REQUIRE(r.items.size() == 3);
    CHECK(r.items[0].pass_detail->outcome == PassOutcome::complete);
    CHECK(r.items[1].pass_detail->outcome == PassOutcome::incomplete);
    CHECK(r.items[2].pass_detail->set_piece);
}

TEST_CASE("malformed JSON reports the byte offset") {
    const std::string raw = R"([{"id": "a",, }])";
    try {
        parse_events(raw, "m");
        FAIL("expected a parse error");
    } catch (const ParseError& e) {
        CHECK(e.byte_offset() == 12);
    }
}

TEST_CASE("a pass missing a required field is skipped and reported") {
    json ok = pass_element("a", 60, 40);
    json bad = pass_element("b", 60, 40);
    bad.erase("location");
    json other = {{"id", "c"}, {"type", {{"name", "Pressure"}}}};
    const auto r = parse_events(json::array({ok, bad, other}).dump(), "m");
    CHECK(r.items.size() == 2);
    REQUIRE(r.errors.size() == 1);
    CHECK(r.errors[0].index == 1);
    CHECK(r.errors[0].message.find("location") != std::string::npos);
}

TEST_CASE("frames: counts players and keeper, clamps and counts out-of-pitch") {
    json f = frame_element("a", 3, 4);
    f["freeze_frame"][4]["keeper"] = true;
    const auto r = parse_frames(json::array({f}).dump());
    REQUIRE(r.items.size() == 1);
    CHECK(r.items[0].players.size() == 8);
    int keepers = 0;
    for (const auto& p : r.items[0].players) keepers += p.keeper;
    CHECK(keepers == 1);

    json g = frame_element("b", 3, 4);
    g["freeze_frame"][1]["location"] = {125, -2};
    const auto r2 = parse_frames(json::array({g}).dump());
    REQUIRE(r2.items.size() == 1);
    CHECK(r2.items[0].players[1].location == Point{120, 0});
    CHECK(r2.clamped == 1);
}

TEST_CASE("lineups: positions, birth dates, empty file") {
    const json lineups = json::array({json{{"team_id", 1},
                                           {"lineup",
                                            {{{"player_id", 10},
                                              {"player_name", "A"},
                                              {"birth_date", "1999-01-01"},
                                              {"positions", {{{"position", "Left Center Back"}, {"start_reason", "Starting XI"}}}}}}}}});
    const Roster r = parse_lineups(lineups.dump(), "m");
    REQUIRE(r.players.count("10"));
    const auto players = season_players({r});
    CHECK(group_players(players, PlayerGroup::defender, {}).count("10") == 1);
    CHECK(age_on(*r.players.at("10").birth_date, "2020-08-01") == 21);
    CHECK(group_players(players, PlayerGroup::u23, {}).count("10") == 1);
    CHECK(r.starting_xi.at("1") == std::vector<std::string>{"10"});
    CHECK_THROWS_WITH_AS(parse_lineups("[]", "m"), doctest::Contains("roster incomplete"), DataError);
}

TEST_CASE("join: unmatched passes, duplicate frames, frames without opponents") {
    std::vector<Event> events;
    for (int i = 0; i < 10; ++i) {
        const auto r = parse_events(json::array({pass_element("p" + std::to_string(i), 60, 40)}).dump(), "m");
        events.push_back(r.items[0]);
    }
    std::vector<Frame360> frames;
    for (int i = 0; i < 7; ++i) frames.push_back(parse_frames(json::array({frame_element("p" + std::to_string(i), 2, 3)}).dump()).items[0]);
    auto joined = join_pass_frames(events, frames);
    CHECK(joined.snapshots.size() == 7);
    CHECK(joined.report.unmatched == 3);

    // A second frame for p0 with a different layout loses to the first.
    Frame360 dup = parse_frames(json::array({frame_element("p0", 5, 5)}).dump()).items[0];
    frames.push_back(dup);
    // Teammates only for p7.
    frames.push_back(parse_frames(json::array({frame_element("p7", 3, 0)}).dump()).items[0]);
    joined = join_pass_frames(events, frames);
    CHECK(joined.report.duplicate_frames == 1);
    CHECK(joined.report.no_opponents == 1);
    CHECK(joined.snapshots.size() == 7);
    CHECK(joined.report.unmatched == 2);
    for (const auto& s : joined.snapshots) {
        if (s.event.event_id == "p0") CHECK(s.frame.players.size() == 6);
    }
    CHECK(joined.snapshots.size() + joined.report.unmatched + joined.report.no_opponents == events.size());
}

TEST_CASE("normalization is idempotent and clamps") {
    auto spec = test::square_spec();
    PassSnapshot s = test::make_snapshot(spec);
    s.frame.players[1].location = {130, -5};
    s.attack_sign = -1;
    const PassSnapshot once = normalize(s);
    CHECK(once.attack_sign == 1);
    CHECK(once.frame.players[1].location == Point{120, 0});
    CHECK(normalize(once) == once);
}

TEST_CASE("vendor serializers round-trip through the parsers") {
    SynthConfig sc;
    sc.n = 60;
    sc.reject_share = 0.3;
    const SynthCorpus c = generate_corpus(sc);
    for (const auto& id : c.match_ids) {
        json ev = json::array();
        for (const auto& e : c.events.at(id)) ev.push_back(event_to_statsbomb(e));
        const auto parsed = parse_events(ev.dump(), id);
        CHECK(parsed.errors.empty());
        CHECK(parsed.items == c.events.at(id));

        json fr = json::array();
        for (const auto& f : c.frames.at(id)) fr.push_back(frame_to_statsbomb(f));
        CHECK(parse_frames(fr.dump()).items == c.frames.at(id));

        const Roster r = parse_lineups(roster_to_statsbomb(c.rosters.at(id)).dump(), id);
        CHECK(r.team_ids == c.rosters.at(id).team_ids);
        for (const auto& [team, xi] : c.rosters.at(id).starting_xi) {
            auto want = xi, got = r.starting_xi.at(team);
            std::sort(want.begin(), want.end());
            std::sort(got.begin(), got.end());
            CHECK(got == want);
        }
        CHECK(r.players.size() == c.rosters.at(id).players.size());
    }
}

TEST_CASE("store snapshot JSON round-trips exactly") {
    auto spec = test::square_spec();
    spec.under_pressure = true;
    PassSnapshot s = test::make_snapshot(spec);
    s.frame.visible_area = Polygon{{{30.125, 0}, {120, 0}, {120, 80}, {30.125, 80}}};
    s.event.location = Point{60.1 + 1e-13, 40.0 / 3.0};
    CHECK(snapshot_from_json(json::parse(to_json(s).dump())) == s);
}

TEST_CASE("ingest_directory writes a deterministic store with counts") {
    test::TempDir a("ingest-a"), b("ingest-b");
    SynthConfig sc;
    sc.n = 45;
    const SynthCorpus c = generate_corpus(sc);
    write_raw_corpus(c, a.path() / "data");
    // Add one pass without a frame to the first match.
    const std::string first = c.match_ids.front();
    json events = json::parse(read_file(a.path() / "data" / "events" / (first + ".json")));
    events.push_back(pass_element("lonely", 60, 40));
    write_file(a.path() / "data" / "events" / (first + ".json"), events.dump());
    std::filesystem::copy(a.path() / "data", b.path() / "data", std::filesystem::copy_options::recursive);

    const auto summary = ingest_directory(a.path() / "data", a.path() / "store");
    ingest_directory(b.path() / "data", b.path() / "store");
    CHECK(sha256_directory(a.path() / "store") == sha256_directory(b.path() / "store"));

    const auto& counts = summary.matches.at(first);
    CHECK(counts.passes == 21);
    CHECK(counts.snapshots == 20);
    CHECK(counts.unmatched == 1);
    const json manifest = json::parse(read_file(a.path() / "store" / "manifest.json"));
    CHECK(manifest.at("schema_version") == kStoreSchemaVersion);
    CHECK(manifest.at("matches").at(first).at("unmatched") == 1);

    const Store store = load_store(a.path() / "store");
    CHECK(store.match_ids == c.match_ids);
    std::size_t total = 0;
    for (const auto& [id, snaps] : store.snapshots) total += snaps.size();
    CHECK(total == 45);
    CHECK(store.rosters.at(first).match_end_minute >= 90);
}
