#include "p3/service.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cmath>
#include <regex>
#include <set>
#include <sstream>

#include <httplib.h>

#include "p3/geometry.hpp"
#include "p3/hashing.hpp"

namespace p3 {

namespace fs = std::filesystem;
using nlohmann::json;

std::optional<WhatIfCache::Entry> WhatIfCache::get(const std::string& key) {
    std::lock_guard lock(mu_);
    const auto it = index_.find(key);
    if (it == index_.end()) return std::nullopt;
    order_.splice(order_.begin(), order_, it->second);
    return it->second->second;
}

void WhatIfCache::put(const std::string& key, Entry entry) {
    if (capacity_ == 0) return;
    std::lock_guard lock(mu_);
    if (const auto it = index_.find(key); it != index_.end()) {
        order_.splice(order_.begin(), order_, it->second);
        return;
    }
    order_.emplace_front(key, std::move(entry));
    index_[key] = order_.begin();
    while (order_.size() > capacity_) {
        index_.erase(order_.back().first);
        order_.pop_back();
    }
}

std::size_t WhatIfCache::size() const {
    std::lock_guard lock(mu_);
    return order_.size();
}

ApiResponse error_response(int status, const std::string& message) {
    return {status, "application/json", json{{"error", message}, {"status", status}}.dump(), {}};
}

namespace {

ApiResponse json_response(const json& j) { return {200, "application/json", j.dump(), {}}; }

json nullable(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

json hull_json(const Polygon& p) {
    json arr = json::array();
    for (const auto& v : p.vertices) arr.push_back(json::array({v.x, v.y}));
    return arr;
}

class BadRequest : public std::runtime_error {
public:
    BadRequest(int status, const std::string& msg) : std::runtime_error(msg), status(status) {}
    int status;
};

double parse_number(const std::string& key, const std::string& value) {
    double out = 0.0;
    const auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), out);
    if (ec != std::errc{} || ptr != value.data() + value.size() || !std::isfinite(out)) {
        throw BadRequest(400, "malformed number for '" + key + "'");
    }
    return out;
}

long long parse_integer(const std::string& key, const std::string& value) {
    long long out = 0;
    const auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), out);
    if (ec != std::errc{} || ptr != value.data() + value.size()) throw BadRequest(400, "malformed integer for '" + key + "'");
    return out;
}

bool parse_bool(const std::string& key, const std::string& value) {
    if (value == "true" || value == "1") return true;
    if (value == "false" || value == "0") return false;
    throw BadRequest(400, "malformed boolean for '" + key + "'");
}

std::map<std::string, std::string> single_valued(const ApiRequest& req, const std::set<std::string>& allowed) {
    std::map<std::string, std::string> out;
    for (const auto& [k, v] : req.query) {
        if (!allowed.contains(k)) throw BadRequest(400, "unknown query parameter '" + k + "'");
        if (!out.emplace(k, v).second) throw BadRequest(400, "repeated query parameter '" + k + "'");
    }
    return out;
}

std::string read_if_exists(const fs::path& p) { return fs::exists(p) ? read_file(p) : std::string(); }

}  // namespace

Service::Service(ServiceConfig cfg) : cfg_(std::move(cfg)), cache_(cfg_.whatif_cache_capacity) {
    const auto& paths = cfg_.paths;
    if (fs::exists(paths.store / "moments.jsonl")) moments_ = read_moments(paths.store / "moments.jsonl");
    for (std::size_t i = 0; i < moments_.size(); ++i) by_id_[moments_[i].moment_id] = i;

    // Reuse the corpus detection and rendering settings when they were recorded.
    if (fs::exists(paths.store / "detect_report.json")) {
        const json report = json::parse(read_file(paths.store / "detect_report.json"));
        if (report.contains("config")) {
            const json& c = report.at("config");
            cfg_.detect.min_opponents_for_hull = c.value("min_opponents_for_hull", cfg_.detect.min_opponents_for_hull);
            cfg_.detect.boundary_counts_inside = c.value("boundary_counts_inside", cfg_.detect.boundary_counts_inside);
            cfg_.detect.zone_lo = c.value("zone_lo", cfg_.detect.zone_lo);
            cfg_.detect.zone_hi = c.value("zone_hi", cfg_.detect.zone_hi);
            cfg_.detect.exclude_set_pieces = c.value("exclude_set_pieces", cfg_.detect.exclude_set_pieces);
        }
    }
    if (fs::exists(paths.images / "stage_render.json")) {
        const json manifest = json::parse(read_file(paths.images / "stage_render.json"));
        const json& c = manifest.at("config");
        cfg_.render.width = c.value("width", cfg_.render.width);
        cfg_.render.height = c.value("height", cfg_.render.height);
        cfg_.render.hull_alpha = c.value("hull_alpha", cfg_.render.hull_alpha);
        cfg_.render.clip_to_visible_area = c.value("clip_to_visible_area", cfg_.render.clip_to_visible_area);
    }

    probabilities_.assign(moments_.size(), std::nullopt);
    if (fs::exists(paths.models / "cnn.p3m")) {
        auto any = load_model(paths.models / "cnn.p3m");
        if (auto* m = std::get_if<CnnModel>(&any)) model_ = std::move(*m);
    }
    if (model_) {
        if (fs::exists(paths.eval / "scores.jsonl")) {
            std::istringstream in(read_file(paths.eval / "scores.jsonl"));
            for (std::string line; std::getline(in, line);) {
                if (line.empty()) continue;
                const json row = json::parse(line);
                const auto it = by_id_.find(row.at("moment_id").get<std::string>());
                if (it != by_id_.end()) probabilities_[it->second] = row.at("probability").get<double>();
            }
        }
        for (std::size_t i = 0; i < moments_.size(); ++i) {
            if (probabilities_[i]) continue;
            const fs::path png = paths.images / (moments_[i].moment_id + ".png");
            const RasterImage img = fs::exists(png) ? decode_png(read_file(png)) : render_moment(moments_[i], cfg_.render);
            probabilities_[i] = model_->forward(model_input(*model_, img));
        }
    }

    for (const char* name : {"roc", "calibration", "histogram", "confusion"}) {
        const std::string rel = std::string("eval/") + name + ".json";
        if (auto bytes = read_if_exists(paths.eval / (std::string(name) + ".json")); !bytes.empty()) artifacts_[rel] = bytes;
    }
    if (fs::is_directory(paths.kpi)) {
        for (const auto& entry : fs::directory_iterator(paths.kpi)) {
            const auto ext = entry.path().extension().string();
            const auto name = entry.path().filename().string();
            if ((ext == ".json" || ext == ".csv") && name.rfind("stage_", 0) != 0) artifacts_["kpi/" + name] = read_file(entry.path());
        }
    }
}

std::optional<double> Service::probability(const std::string& moment_id) const {
    const auto it = by_id_.find(moment_id);
    if (it == by_id_.end()) return std::nullopt;
    return probabilities_[it->second];
}

ApiResponse Service::handle(const ApiRequest& req) const {
    static const std::regex moment_re(R"(^/api/v1/moments/([^/]+)$)");
    static const std::regex image_re(R"(^/api/v1/moments/([^/]+)/image\.png$)");
    static const std::regex whatif_re(R"(^/api/v1/moments/([^/]+)/whatif$)");
    static const std::regex whatif_image_re(R"(^/api/v1/whatif/([0-9a-f]+)/image\.png$)");
    static const std::regex model_re(R"(^/api/v1/model/([a-z]+)$)");

    ApiResponse res;
    try {
        std::smatch m;
        const bool get = req.method == "GET" || req.method == "HEAD";
        auto expect_get = [&] {
            if (!get) throw BadRequest(405, "method not allowed");
        };
        if (req.path == "/api/v1/moments") {
            expect_get();
            res = list_moments(req);
        } else if (std::regex_match(req.path, m, image_re)) {
            expect_get();
            res = moment_image(m[1]);
        } else if (std::regex_match(req.path, m, whatif_re)) {
            if (req.method != "POST") throw BadRequest(405, "method not allowed");
            res = whatif(m[1], req.body);
        } else if (std::regex_match(req.path, m, moment_re)) {
            expect_get();
            res = get_moment(m[1]);
        } else if (std::regex_match(req.path, m, whatif_image_re)) {
            expect_get();
            res = whatif_image(m[1]);
        } else if (req.path == "/api/v1/kpi/players") {
            expect_get();
            res = kpi_players(req);
        } else if (req.path == "/api/v1/kpi/teams") {
            expect_get();
            res = kpi_teams(req);
        } else if (std::regex_match(req.path, m, model_re)) {
            expect_get();
            single_valued(req, {});
            res = model_artifact(m[1]);
        } else if (req.path == "/api/v1/health") {
            expect_get();
            res = health();
        } else {
            return error_response(404, "no route for " + req.path);
        }
    } catch (const BadRequest& e) {
        return error_response(e.status, e.what());
    }

    if (res.status == 200 && req.method != "POST") {
        const std::string etag = "\"" + sha256_hex(res.body) + "\"";
        res.headers["ETag"] = etag;
        if (!req.if_none_match.empty() && req.if_none_match == etag) {
            res.status = 304;
            res.body.clear();
        }
    }
    return res;
}

ApiResponse Service::list_moments(const ApiRequest& req) const {
    const auto q = single_valued(req, {"team", "player", "match", "label", "min_probability", "max_probability", "min_x",
                                       "max_x", "under_pressure", "offset", "limit"});
    auto text = [&](const char* key) -> std::optional<std::string> {
        const auto it = q.find(key);
        return it == q.end() ? std::nullopt : std::optional(it->second);
    };
    auto number = [&](const char* key) -> std::optional<double> {
        const auto t = text(key);
        return t ? std::optional(parse_number(key, *t)) : std::nullopt;
    };

    std::optional<Label> label;
    if (const auto l = text("label")) {
        if (*l == "penetrative") label = Label::penetrative;
        else if (*l == "non_penetrative") label = Label::non_penetrative;
        else throw BadRequest(400, "label must be penetrative or non_penetrative");
    }
    const auto min_p = number("min_probability");
    const auto max_p = number("max_probability");
    const auto min_x = number("min_x");
    const auto max_x = number("max_x");
    std::optional<bool> pressure;
    if (const auto t = text("under_pressure")) pressure = parse_bool("under_pressure", *t);
    long long offset = 0;
    long long limit = static_cast<long long>(cfg_.default_page);
    if (const auto t = text("offset")) offset = parse_integer("offset", *t);
    if (const auto t = text("limit")) limit = parse_integer("limit", *t);

    if (offset < 0) throw BadRequest(422, "offset must be non-negative");
    if (limit < 1 || limit > static_cast<long long>(cfg_.max_page)) {
        throw BadRequest(422, "limit must be between 1 and " + std::to_string(cfg_.max_page));
    }
    for (const auto& p : {min_p, max_p}) {
        if (p && (*p < 0.0 || *p > 1.0)) throw BadRequest(422, "probability bounds must lie in [0, 1]");
    }
    for (const auto& x : {min_x, max_x}) {
        if (x && (*x < 0.0 || *x > kPitchLength)) throw BadRequest(422, "x bounds must lie in [0, 120]");
    }
    if (min_p && max_p && *min_p > *max_p) throw BadRequest(422, "min_probability exceeds max_probability");
    if (min_x && max_x && *min_x > *max_x) throw BadRequest(422, "min_x exceeds max_x");

    const auto team = text("team");
    const auto player = text("player");
    const auto match = text("match");
    std::vector<std::size_t> hits;
    for (std::size_t i = 0; i < moments_.size(); ++i) {
        const P3Moment& mo = moments_[i];
        const auto& p = probabilities_[i];
        if (team && mo.team_id != *team) continue;
        if (player && mo.player_id != *player) continue;
        if (match && mo.match_id != *match) continue;
        if (label && mo.label != *label) continue;
        if (pressure && mo.under_pressure != *pressure) continue;
        if (min_x && mo.origin.x < *min_x) continue;
        if (max_x && mo.origin.x > *max_x) continue;
        if ((min_p || max_p) && !p) continue;
        if (min_p && *p < *min_p) continue;
        if (max_p && *p > *max_p) continue;
        hits.push_back(i);
    }
    std::sort(hits.begin(), hits.end(), [&](std::size_t a, std::size_t b) {
        const auto& pa = probabilities_[a];
        const auto& pb = probabilities_[b];
        if (pa.has_value() != pb.has_value()) return pa.has_value();
        if (pa && *pa != *pb) return *pa > *pb;
        return moments_[a].moment_id < moments_[b].moment_id;
    });

    json items = json::array();
    const auto begin = std::min<std::size_t>(hits.size(), static_cast<std::size_t>(offset));
    const auto end = std::min<std::size_t>(hits.size(), begin + static_cast<std::size_t>(limit));
    for (std::size_t k = begin; k < end; ++k) {
        const P3Moment& mo = moments_[hits[k]];
        items.push_back({{"moment_id", mo.moment_id},
                         {"match_id", mo.match_id},
                         {"team_id", mo.team_id},
                         {"player_id", mo.player_id},
                         {"minute", mo.minute},
                         {"origin", json::array({mo.origin.x, mo.origin.y})},
                         {"under_pressure", mo.under_pressure},
                         {"label", to_string(mo.label)},
                         {"probability", nullable(probabilities_[hits[k]])},
                         {"hull_area", polygon_area(mo.hull)}});
    }
    return json_response({{"total", hits.size()}, {"offset", offset}, {"limit", limit}, {"items", std::move(items)}});
}

ApiResponse Service::get_moment(const std::string& id) const {
    const auto it = by_id_.find(id);
    if (it == by_id_.end()) return error_response(404, "unknown moment " + id);
    return json_response({{"moment", to_json(moments_[it->second])}, {"probability", nullable(probabilities_[it->second])}});
}

ApiResponse Service::moment_image(const std::string& id) const {
    if (!by_id_.contains(id)) return error_response(404, "unknown moment " + id);
    const fs::path png = cfg_.paths.images / (id + ".png");
    if (!fs::exists(png)) return error_response(404, "image not rendered; run `p3 render`");
    return {200, "image/png", read_file(png), {}};
}

ApiResponse Service::whatif(const std::string& id, const std::string& body) const {
    const auto it = by_id_.find(id);
    if (it == by_id_.end()) return error_response(404, "unknown moment " + id);
    const P3Moment& original = moments_[it->second];

    json req;
    try {
        req = json::parse(body);
    } catch (const json::parse_error&) {
        throw BadRequest(400, "body is not valid JSON");
    }
    if (!req.is_object()) throw BadRequest(400, "body must be a JSON object");
    for (const auto& [k, v] : req.items()) {
        if (k != "edits" && k != "moment_id") throw BadRequest(400, "unknown field '" + k + "'");
    }
    if (req.contains("moment_id") && req.at("moment_id") != id) throw BadRequest(400, "moment_id does not match the path");
    if (!req.contains("edits") || !req.at("edits").is_array()) throw BadRequest(400, "edits must be an array");
    const json& edits = req.at("edits");

    struct Edit {
        std::size_t index;
        Point to;
    };
    std::vector<Edit> parsed;
    for (const auto& e : edits) {
        if (!e.is_object() || !e.contains("index") || !e.contains("x") || !e.contains("y") || e.size() != 3) {
            throw BadRequest(400, "each edit needs exactly index, x and y");
        }
        if (!e.at("index").is_number_integer() || !e.at("x").is_number() || !e.at("y").is_number()) {
            throw BadRequest(400, "edit fields must be numbers");
        }
        const long long index = e.at("index").get<long long>();
        const Point to{e.at("x").get<double>(), e.at("y").get<double>()};
        parsed.push_back({static_cast<std::size_t>(std::max(0LL, index)), to});
        if (index < 0 || static_cast<std::size_t>(index) >= original.all_players.size()) {
            throw BadRequest(422, "player index " + std::to_string(index) + " out of range");
        }
        if (!(to.x >= 0.0 && to.x <= kPitchLength && to.y >= 0.0 && to.y <= kPitchWidth)) {
            throw BadRequest(422, "coordinates outside the pitch");
        }
    }
    if (parsed.size() > 22) throw BadRequest(422, "at most 22 edits");
    if (!model_) return error_response(404, "no model loaded; run `p3 train --method cnn`");

    json canonical = json::array();
    for (const auto& e : parsed) canonical.push_back(json::array({e.index, e.to.x, e.to.y}));
    const std::string key = sha256_hex(id + "\n" + canonical.dump()).substr(0, 32);
    if (auto hit = cache_.get(key)) return {200, "application/json", hit->result, {}};

    PassSnapshot snap = snapshot_from_moment(original);
    for (const auto& e : parsed) {
        auto& player = snap.frame.players[e.index];
        player.location = e.to;
        if (player.actor) snap.event.location = e.to;
    }
    const auto outcome = detect_p3(snap, cfg_.detect);
    json result{{"moment_id", id}, {"original_probability", nullable(probabilities_[it->second])}};
    WhatIfCache::Entry entry;
    if (const auto* rejected = std::get_if<Rejection>(&outcome)) {
        result["still_p3"] = false;
        result["rejection_reason"] = to_string(*rejected);
        result["probability"] = nullptr;
        result["hull"] = nullptr;
        result["label"] = nullptr;
        result["image"] = nullptr;
    } else {
        const P3Moment& moved = std::get<P3Moment>(outcome);
        const RasterImage image = render_moment(moved, cfg_.render);
        result["still_p3"] = true;
        result["rejection_reason"] = nullptr;
        result["probability"] = model_->forward(model_input(*model_, image));
        result["hull"] = hull_json(moved.hull);
        result["label"] = to_string(moved.label);
        result["image"] = "/api/v1/whatif/" + key + "/image.png";
        entry.png = encode_png(image);
    }
    entry.result = result.dump();
    cache_.put(key, entry);
    return {200, "application/json", entry.result, {}};
}

ApiResponse Service::whatif_image(const std::string& key) const {
    const auto hit = cache_.get(key);
    if (!hit || hit->png.empty()) return error_response(404, "what-if image not cached; repeat the what-if request");
    return {200, "image/png", hit->png, {}};
}

ApiResponse Service::kpi_players(const ApiRequest& req) const {
    const auto q = single_valued(req, {"group", "format"});
    if (!q.contains("group")) throw BadRequest(400, "group is required");
    const auto group = player_group_from_string(q.at("group"));
    if (!group) throw BadRequest(400, "group must be defenders, midfielders or u23");
    const std::string format = q.contains("format") ? q.at("format") : "json";
    if (format != "json" && format != "csv") throw BadRequest(400, "format must be json or csv");
    const std::string name = "kpi/players_" + std::string(to_string(*group)) + "." + format;
    const auto it = artifacts_.find(name);
    if (it == artifacts_.end()) {
        return error_response(404, name + " not found; run `p3 kpi --group " + std::string(to_string(*group)) + "`");
    }
    return {200, format == "csv" ? "text/csv" : "application/json", it->second, {}};
}

ApiResponse Service::kpi_teams(const ApiRequest& req) const {
    const auto q = single_valued(req, {"side", "format"});
    if (!q.contains("side")) throw BadRequest(400, "side is required");
    const std::string side = q.at("side") == "defence" ? "defense" : q.at("side");
    if (side != "attack" && side != "defense") throw BadRequest(400, "side must be attack or defense");
    const std::string format = q.contains("format") ? q.at("format") : "json";
    if (format != "json" && format != "csv") throw BadRequest(400, "format must be json or csv");
    const std::string name = "kpi/teams_" + side + "." + format;
    const auto it = artifacts_.find(name);
    if (it == artifacts_.end()) return error_response(404, name + " not found; run `p3 kpi --teams " + side + "`");
    return {200, format == "csv" ? "text/csv" : "application/json", it->second, {}};
}

ApiResponse Service::model_artifact(const std::string& name) const {
    static const std::set<std::string> known{"roc", "calibration", "histogram", "confusion"};
    if (!known.contains(name)) return error_response(404, "unknown model artifact " + name);
    const auto it = artifacts_.find("eval/" + name + ".json");
    if (it == artifacts_.end()) return error_response(404, "eval/" + name + ".json not found; run `p3 eval`");
    return {200, "application/json", it->second, {}};
}

ApiResponse Service::health() const {
    return json_response({{"status", "ok"},
                          {"moments", moments_.size()},
                          {"model_loaded", model_.has_value()},
                          {"whatif_cache_entries", cache_.size()}});
}

namespace {

std::atomic<httplib::Server*> g_server{nullptr};

}  // namespace

void stop_http() {
    if (auto* s = g_server.load()) s->stop();
}

void serve_http(const Service& service, const std::string& host, int port, const std::vector<std::string>& cors_origins) {
    httplib::Server server;
    auto cors = [&cors_origins](const httplib::Request& req, httplib::Response& res) {
        const auto origin = req.get_header_value("Origin");
        const bool any = std::find(cors_origins.begin(), cors_origins.end(), "*") != cors_origins.end();
        if (any) {
            res.set_header("Access-Control-Allow-Origin", "*");
        } else if (!origin.empty() && std::find(cors_origins.begin(), cors_origins.end(), origin) != cors_origins.end()) {
            res.set_header("Access-Control-Allow-Origin", origin);
            res.set_header("Vary", "Origin");
        }
    };
    auto dispatch = [&](const httplib::Request& req, httplib::Response& res) {
        ApiRequest api;
        api.method = req.method;
        api.path = req.path;
        for (const auto& [k, v] : req.params) api.query.emplace_back(k, v);
        api.body = req.body;
        api.if_none_match = req.get_header_value("If-None-Match");
        const ApiResponse out = service.handle(api);
        res.status = out.status;
        for (const auto& [k, v] : out.headers) res.set_header(k, v);
        if (out.status != 304) res.set_content(out.body, out.content_type);
        cors(req, res);
    };
    server.Get(".*", dispatch);
    server.Post(".*", dispatch);
    server.Options(".*", [&](const httplib::Request& req, httplib::Response& res) {
        res.status = 204;
        res.set_header("Access-Control-Allow-Methods", "GET, POST, OPTIONS");
        res.set_header("Access-Control-Allow-Headers", "Content-Type, If-None-Match");
        cors(req, res);
    });
    g_server = &server;
    const bool ok = server.listen(host, port);
    g_server = nullptr;
    if (!ok) throw std::runtime_error("serve: could not listen on " + host + ":" + std::to_string(port));
}

}  // namespace p3
