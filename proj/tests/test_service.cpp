#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <httplib.h>

#include <atomic>
#include <set>
#include <thread>

#include "p3/hashing.hpp"
#include "p3/service.hpp"
#include "support.hpp"

using namespace p3;
using nlohmann::json;

namespace {

struct Fixture {
    test::TempDir dir{"service"};
    std::vector<P3Moment> moments;
    std::unique_ptr<Service> service;

    Fixture() {
        REQUIRE(test::build_pipeline(dir.path(), 100, 1) == 0);
        moments = read_moments(dir.path() / "store" / "moments.jsonl");
        ServiceConfig cfg;
        cfg.paths = PipelinePaths::under(dir.path());
        service = std::make_unique<Service>(cfg);
    }
};

Fixture& fixture() {
    static Fixture f;
    return f;
}

ApiResponse get(const std::string& path, std::vector<std::pair<std::string, std::string>> query = {}) {
    ApiRequest req;
    req.path = path;
    req.query = std::move(query);
    return fixture().service->handle(req);
}

ApiResponse post(const std::string& path, const std::string& body) {
    ApiRequest req;
    req.method = "POST";
    req.path = path;
    req.body = body;
    return fixture().service->handle(req);
}

json whatif(const std::string& id, const json& edits) {
    const auto res = post("/api/v1/moments/" + id + "/whatif", json{{"edits", edits}}.dump());
    REQUIRE(res.status == 200);
    return json::parse(res.body);
}

int status_of(const std::string& path, std::vector<std::pair<std::string, std::string>> query) {
    return get(path, std::move(query)).status;
}

}  // namespace

TEST_CASE("the fixture has a model and probabilities for every moment") {
    auto& f = fixture();
    CHECK(f.moments.size() == 100);
    CHECK(f.service->moment_count() == 100);
    CHECK(f.service->model_loaded());
    for (const auto& m : f.moments) CHECK(f.service->probability(m.moment_id));
    const auto health = json::parse(get("/api/v1/health").body);
    CHECK(health.at("status") == "ok");
    CHECK(health.at("moments") == 100);
}

TEST_CASE("pagination enumerates every moment exactly once, sorted") {
    auto& f = fixture();
    std::vector<std::string> seen;
    std::vector<double> probs;
    for (std::size_t offset = 0;; offset += 7) {
        const auto res = get("/api/v1/moments", {{"offset", std::to_string(offset)}, {"limit", "7"}});
        REQUIRE(res.status == 200);
        const auto page = json::parse(res.body);
        CHECK(page.at("total") == 100);
        CHECK(page.at("offset") == offset);
        if (page.at("items").empty()) break;
        for (const auto& item : page.at("items")) {
            seen.push_back(item.at("moment_id"));
            probs.push_back(item.at("probability"));
        }
    }
    CHECK(seen.size() == 100);
    CHECK(std::set<std::string>(seen.begin(), seen.end()).size() == 100);
    std::set<std::string> all;
    for (const auto& m : f.moments) all.insert(m.moment_id);
    CHECK(std::set<std::string>(seen.begin(), seen.end()) == all);
    CHECK(std::is_sorted(probs.begin(), probs.end(), std::greater<>()));

    const auto first = json::parse(get("/api/v1/moments").body);
    CHECK(first.at("limit") == 50);
    CHECK(first.at("items").size() == 50);
}

TEST_CASE("filters agree with a direct count over the moments") {
    auto& f = fixture();
    auto total = [](std::vector<std::pair<std::string, std::string>> q) {
        const auto res = get("/api/v1/moments", std::move(q));
        REQUIRE(res.status == 200);
        return json::parse(res.body).at("total").get<std::size_t>();
    };
    CHECK(total({{"label", "penetrative"}}) == 40);

    const P3Moment& probe = f.moments[17];
    std::size_t team = 0, match = 0, player = 0, pressure = 0, band = 0, high = 0;
    for (const auto& m : f.moments) {
        team += m.team_id == probe.team_id;
        match += m.match_id == probe.match_id;
        player += m.player_id == probe.player_id;
        pressure += m.under_pressure;
        band += m.origin.x >= 50 && m.origin.x <= 70;
        high += *f.service->probability(m.moment_id) >= 0.3;
    }
    CHECK(total({{"team", probe.team_id}}) == team);
    CHECK(total({{"match", probe.match_id}}) == match);
    CHECK(total({{"player", probe.player_id}}) == player);
    CHECK(total({{"under_pressure", "true"}}) == pressure);
    CHECK(total({{"min_x", "50"}, {"max_x", "70"}}) == band);
    CHECK(total({{"min_probability", "0.3"}}) == high);
    CHECK(total({{"min_probability", "0"}, {"max_probability", "1"}}) == 100);
    CHECK(total({{"team", "no-such-team"}}) == 0);
}

TEST_CASE("bad list queries") {
    const std::string p = "/api/v1/moments";
    CHECK(status_of(p, {{"colour", "red"}}) == 400);
    CHECK(status_of(p, {{"limit", "5"}, {"limit", "6"}}) == 400);
    CHECK(status_of(p, {{"limit", "ten"}}) == 400);
    CHECK(status_of(p, {{"min_probability", "abc"}}) == 400);
    CHECK(status_of(p, {{"under_pressure", "maybe"}}) == 400);
    CHECK(status_of(p, {{"label", "great"}}) == 400);
    CHECK(status_of(p, {{"limit", "201"}}) == 422);
    CHECK(status_of(p, {{"limit", "0"}}) == 422);
    CHECK(status_of(p, {{"limit", "200"}}) == 200);
    CHECK(status_of(p, {{"offset", "-1"}}) == 422);
    CHECK(status_of(p, {{"min_probability", "1.5"}}) == 422);
    CHECK(status_of(p, {{"min_probability", "0.8"}, {"max_probability", "0.2"}}) == 422);
    CHECK(status_of(p, {{"min_x", "-3"}}) == 422);
}

TEST_CASE("moment detail, image and unknown routes") {
    auto& f = fixture();
    const auto& m = f.moments[3];
    const auto res = get("/api/v1/moments/" + m.moment_id);
    REQUIRE(res.status == 200);
    const auto body = json::parse(res.body);
    CHECK(moment_from_json(body.at("moment")) == m);
    CHECK(body.at("probability") == *f.service->probability(m.moment_id));

    const auto img = get("/api/v1/moments/" + m.moment_id + "/image.png");
    CHECK(img.status == 200);
    CHECK(img.content_type == "image/png");
    CHECK(img.body == read_file(f.dir.path() / "images" / (m.moment_id + ".png")));

    CHECK(get("/api/v1/moments/ffffffffffffffff").status == 404);
    CHECK(get("/api/v1/moments/ffffffffffffffff/image.png").status == 404);
    CHECK(get("/api/v1/nothing").status == 404);
    CHECK(post("/api/v1/moments", "{}").status == 405);
    ApiRequest wrong;
    wrong.path = "/api/v1/moments/" + m.moment_id + "/whatif";
    CHECK(f.service->handle(wrong).status == 405);
}

TEST_CASE("etag and conditional requests") {
    const auto res = get("/api/v1/moments", {{"limit", "3"}});
    REQUIRE(res.headers.contains("ETag"));
    const std::string etag = res.headers.at("ETag");
    CHECK(etag == "\"" + sha256_hex(res.body) + "\"");
    ApiRequest again;
    again.path = "/api/v1/moments";
    again.query = {{"limit", "3"}};
    again.if_none_match = etag;
    const auto cached = fixture().service->handle(again);
    CHECK(cached.status == 304);
    CHECK(cached.body.empty());
    again.if_none_match = "\"stale\"";
    CHECK(fixture().service->handle(again).status == 200);
}

TEST_CASE("identity what-if returns the original probability bit for bit") {
    auto& f = fixture();
    for (std::size_t i = 0; i < f.moments.size(); i += 9) {
        const auto& m = f.moments[i];
        const double original = *f.service->probability(m.moment_id);
        const auto empty = whatif(m.moment_id, json::array());
        CHECK(empty.at("still_p3") == true);
        CHECK(empty.at("probability").get<double>() == original);
        CHECK(empty.at("original_probability").get<double>() == original);

        const auto& p = m.all_players[1].location;
        const auto same = whatif(m.moment_id, json::array({{{"index", 1}, {"x", p.x}, {"y", p.y}}}));
        CHECK(same.at("probability").get<double>() == original);
        CHECK(same.at("label") == to_string(m.label));
    }
}

TEST_CASE("moving every receiver out of the hull leaves no P3 moment") {
    auto& f = fixture();
    for (std::size_t i = 0; i < f.moments.size(); i += 11) {
        const auto& m = f.moments[i];
        json edits = json::array();
        for (std::size_t k = 0; k < m.all_players.size(); ++k) {
            const auto& pl = m.all_players[k];
            if (pl.teammate && !pl.actor && point_in_polygon(pl.location, m.hull) != Containment::outside) {
                edits.push_back({{"index", k}, {"x", 1.0}, {"y", 1.0}});
            }
        }
        REQUIRE(!edits.empty());
        const auto r = whatif(m.moment_id, edits);
        CHECK(r.at("still_p3") == false);
        CHECK(r.at("rejection_reason") == "no receiver inside hull");
        CHECK(r.at("probability").is_null());
    }
}

TEST_CASE("a moved opponent rescored and its image is served") {
    auto& f = fixture();
    const auto& m = f.moments[5];
    std::size_t opp = 0;
    while (m.all_players[opp].teammate) ++opp;
    const auto r = whatif(m.moment_id, json::array({{{"index", opp}, {"x", 119.0}, {"y", 79.0}}}));
    if (r.at("still_p3") == true) {
        const auto img = get(r.at("image").get<std::string>());
        REQUIRE(img.status == 200);
        const auto decoded = decode_png(img.body);
        CHECK(decoded.width == f.service->render_config().width);
        CHECK(r.at("probability").get<double>() > 0.0);
    }
    CHECK(get("/api/v1/whatif/0123456789abcdef0123456789abcdef/image.png").status == 404);
}

TEST_CASE("bad what-if bodies") {
    auto& f = fixture();
    const std::string url = "/api/v1/moments/" + f.moments[0].moment_id + "/whatif";
    const int n = static_cast<int>(f.moments[0].all_players.size());
    CHECK(post(url, "not json").status == 400);
    CHECK(post(url, "[]").status == 400);
    CHECK(post(url, R"({"edits": 3})").status == 400);
    CHECK(post(url, R"({"edits": [{"index": 0, "x": 1}]})").status == 400);
    CHECK(post(url, R"({"edits": [], "extra": 1})").status == 400);
    CHECK(post(url, R"({"edits": [], "moment_id": "other"})").status == 400);
    CHECK(post(url, json{{"edits", {{{"index", n}, {"x", 1}, {"y", 1}}}}}.dump()).status == 422);
    CHECK(post(url, R"({"edits": [{"index": 0, "x": 130, "y": 1}]})").status == 422);
    json many = json::array();
    for (int i = 0; i < 23; ++i) many.push_back({{"index", 0}, {"x", 60}, {"y", 40}});
    CHECK(post(url, json{{"edits", many}}.dump()).status == 422);
    CHECK(post("/api/v1/moments/ffffffffffffffff/whatif", R"({"edits": []})").status == 404);
}

TEST_CASE("kpi and model passthrough") {
    auto& f = fixture();
    const auto root = f.dir.path();
    const auto attack = get("/api/v1/kpi/teams", {{"side", "attack"}});
    CHECK(attack.status == 200);
    CHECK(attack.body == read_file(root / "kpi" / "teams_attack.json"));
    const auto csv = get("/api/v1/kpi/teams", {{"side", "defense"}, {"format", "csv"}});
    CHECK(csv.content_type == "text/csv");
    CHECK(csv.body == read_file(root / "kpi" / "teams_defense.csv"));
    CHECK(get("/api/v1/kpi/players", {{"group", "defenders"}}).body == read_file(root / "kpi" / "players_defenders.json"));
    const auto missing = get("/api/v1/kpi/players", {{"group", "midfielders"}});
    CHECK(missing.status == 404);
    CHECK(missing.body.find("p3 kpi --group midfielders") != std::string::npos);
    CHECK(get("/api/v1/kpi/players").status == 400);
    CHECK(get("/api/v1/kpi/teams", {{"side", "middle"}}).status == 400);

    for (const char* name : {"roc", "calibration", "histogram", "confusion"}) {
        const auto res = get(std::string("/api/v1/model/") + name);
        CHECK(res.status == 200);
        CHECK(res.body == read_file(root / "eval" / (std::string(name) + ".json")));
    }
    CHECK(get("/api/v1/model/weights").status == 404);
}

TEST_CASE("the output tree is unchanged after 1,000 mixed concurrent requests") {
    auto& f = fixture();
    const std::string before = sha256_directory(f.dir.path());
    std::atomic<int> failures{0};
    std::vector<std::thread> workers;
    for (int t = 0; t < 4; ++t) {
        workers.emplace_back([&, t] {
            for (int i = 0; i < 250; ++i) {
                const auto& m = f.moments[static_cast<std::size_t>((t * 250 + i) % f.moments.size())];
                ApiResponse res;
                switch (i % 5) {
                    case 0: res = get("/api/v1/moments", {{"offset", std::to_string(i % 90)}, {"limit", "10"}}); break;
                    case 1: res = get("/api/v1/moments/" + m.moment_id); break;
                    case 2: res = get("/api/v1/moments/" + m.moment_id + "/image.png"); break;
                    case 3:
                        res = post("/api/v1/moments/" + m.moment_id + "/whatif",
                                   json{{"edits", {{{"index", 1}, {"x", 60.0 + i % 7}, {"y", 40.0}}}}}.dump());
                        break;
                    default: res = get("/api/v1/kpi/teams", {{"side", "attack"}}); break;
                }
                if (res.status != 200) ++failures;
            }
        });
    }
    for (auto& w : workers) w.join();
    CHECK(failures == 0);
    CHECK(sha256_directory(f.dir.path()) == before);
}

TEST_CASE("a service over an empty root answers with hints") {
    test::TempDir empty("service-empty");
    ServiceConfig cfg;
    cfg.paths = PipelinePaths::under(empty.path());
    const Service s(cfg);
    CHECK(s.moment_count() == 0);
    CHECK_FALSE(s.model_loaded());
    ApiRequest req;
    req.path = "/api/v1/moments";
    CHECK(json::parse(s.handle(req).body).at("total") == 0);
    req.path = "/api/v1/model/roc";
    const auto roc = s.handle(req);
    CHECK(roc.status == 404);
    CHECK(roc.body.find("p3 eval") != std::string::npos);
    req.path = "/api/v1/kpi/teams";
    req.query = {{"side", "attack"}};
    CHECK(s.handle(req).body.find("p3 kpi --teams attack") != std::string::npos);
}

TEST_CASE("what-if cache evicts the least recently used entry") {
    WhatIfCache cache(2);
    cache.put("a", {"1", ""});
    cache.put("b", {"2", ""});
    CHECK(cache.get("a"));
    cache.put("c", {"3", ""});
    CHECK(cache.size() == 2);
    CHECK(cache.get("a"));
    CHECK_FALSE(cache.get("b"));
    CHECK(cache.get("c")->result == "3");
}

TEST_CASE("http round trip with CORS") {
    auto& f = fixture();
    const int port = 20000 + static_cast<int>(::getpid() % 20000);
    std::thread server([&] { serve_http(*f.service, "127.0.0.1", port, {"http://localhost:5173"}); });
    httplib::Client client("127.0.0.1", port);
    httplib::Result res;
    for (int i = 0; i < 100 && !res; ++i) {
        res = client.Get("/api/v1/health", {{"Origin", "http://localhost:5173"}});
        if (!res) std::this_thread::sleep_for(std::chrono::milliseconds(50));
    }
    REQUIRE(res);
    CHECK(res->status == 200);
    CHECK(res->get_header_value("Access-Control-Allow-Origin") == "http://localhost:5173");
    const auto page = client.Get("/api/v1/moments?limit=2&label=penetrative");
    REQUIRE(page);
    CHECK(json::parse(page->body).at("items").size() == 2);
    const auto bad = client.Get("/api/v1/moments?limit=999");
    REQUIRE(bad);
    CHECK(bad->status == 422);
    const auto pre = client.Options("/api/v1/moments");
    REQUIRE(pre);
    CHECK(pre->status == 204);
    stop_http();
    server.join();
}
