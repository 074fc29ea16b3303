// Runs the acceptance criteria and prints one PASS/FAIL line for each.

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <set>
#include <thread>

#include "p3/geometry.hpp"
#include "p3/hashing.hpp"
#include "p3/kpi.hpp"
#include "p3/metrics.hpp"
#include "p3/model.hpp"
#include "p3/service.hpp"
#include "support.hpp"

using namespace p3;
using nlohmann::json;
using test::Rng;
namespace fs = std::filesystem;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

std::string fmt(const char* f, auto... args) {
    char buf[512];
    std::snprintf(buf, sizeof buf, f, args...);
    return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

double cross(Point o, Point a, Point b) { return (a.x - o.x) * (b.y - o.y) - (a.y - o.y) * (b.x - o.x); }

std::set<std::pair<double, double>> brute_hull(const std::vector<Point>& pts) {
    std::set<std::pair<double, double>> keep;
    const std::size_t n = pts.size();
    for (std::size_t p = 0; p < n; ++p) {
        bool covered = false;
        for (std::size_t i = 0; i < n && !covered; ++i) {
            for (std::size_t j = i + 1; j < n && !covered; ++j) {
                for (std::size_t k = j + 1; k < n && !covered; ++k) {
                    if (i == p || j == p || k == p) continue;
                    const double d1 = cross(pts[i], pts[j], pts[p]), d2 = cross(pts[j], pts[k], pts[p]),
                                 d3 = cross(pts[k], pts[i], pts[p]);
                    covered = (d1 > 0 && d2 > 0 && d3 > 0) || (d1 < 0 && d2 < 0 && d3 < 0);
                }
            }
        }
        if (!covered) keep.insert({pts[p].x, pts[p].y});
    }
    return keep;
}

double mann_whitney(const std::vector<double>& s, const std::vector<int>& y) {
    double wins = 0, pairs = 0;
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (!y[i]) continue;
        for (std::size_t j = 0; j < s.size(); ++j) {
            if (y[j]) continue;
            pairs += 1;
            wins += s[i] > s[j] ? 1.0 : s[i] == s[j] ? 0.5 : 0.0;
        }
    }
    return wins / pairs;
}

LabeledImages synthetic_images(int n, std::uint64_t seed, const CnnModel& model) {
    SynthConfig sc;
    sc.n = n;
    sc.seed = seed;
    sc.positive_share = 0.5;
    const SynthCorpus corpus = generate_corpus(sc);
    LabeledImages out;
    for (const auto& id : corpus.match_ids) {
        const auto& events = corpus.events.at(id);
        for (const auto& frame : corpus.frames.at(id)) {
            const auto ev = std::find_if(events.begin(), events.end(), [&](const Event& e) { return e.event_id == frame.event_id; });
            const auto moment = std::get<P3Moment>(detect_p3(PassSnapshot{*ev, frame, 1}));
            out.images.push_back(model_input(model, render_moment(moment)));
            out.labels.push_back(moment.label == Label::penetrative);
        }
    }
    return out;
}

int run_cli(std::vector<std::string> args) {
    args.insert(args.begin(), "p3");
    return p3::run(args);
}

// ---------------------------------------------------------------------------

Outcome geometry_oracles() {
    const auto t0 = std::chrono::steady_clock::now();
    Rng rng(1);
    int hull_bad = 0;
    for (int trial = 0; trial < 1000; ++trial) {
        std::vector<Point> pts;
        for (int i = rng.integer(3, 22); i > 0; --i) pts.push_back({rng.uniform(0, 120), rng.uniform(0, 80)});
        const auto hull = convex_hull(pts);
        std::set<std::pair<double, double>> got;
        if (hull) {
            for (const auto& v : hull->vertices) got.insert({v.x, v.y});
        }
        hull_bad += got != brute_hull(pts);
    }
    const PixelMapping map{64, 64};
    int vor_bad = 0, ties = 0;
    for (int trial = 0; trial < 100; ++trial) {
        std::vector<Point> seeds;
        for (int i = rng.integer(1, 28); i > 0; --i) seeds.push_back({rng.integer(0, 24) * 5.0, rng.integer(0, 16) * 5.0});
        seeds.push_back(seeds[static_cast<std::size_t>(rng.integer(0, static_cast<int>(seeds.size()) - 1))]);
        const auto grid = voronoi_owner_grid(seeds, map);
        for (int r = 0; r < 64; ++r) {
            for (int c = 0; c < 64; ++c) {
                const Point p{(63.0 - r) / 63.0 * 120.0, c / 63.0 * 80.0};
                std::int32_t best = 0;
                double best_d = 1e300;
                int at_best = 0;
                for (std::size_t s = 0; s < seeds.size(); ++s) {
                    const double d = (p.x - seeds[s].x) * (p.x - seeds[s].x) + (p.y - seeds[s].y) * (p.y - seeds[s].y);
                    if (d < best_d) {
                        best_d = d;
                        best = static_cast<std::int32_t>(s);
                        at_best = 1;
                    } else if (d == best_d) {
                        ++at_best;
                    }
                }
                ties += at_best > 1;
                vor_bad += grid.at(r, c) != best;
            }
        }
    }
    const double secs = seconds_since(t0);
    return {hull_bad == 0 && vor_bad == 0 && secs < 10.0,
            fmt("hull mismatches %d/1000, voronoi pixel mismatches %d (%d tied pixels), %.1f s", hull_bad, vor_bad, ties, secs)};
}

Outcome zone_boundary() {
    const bool a = zone_contains(39.999), b = zone_contains(40), c = zone_contains(90), d = zone_contains(90.001);
    return {!a && b && c && !d, fmt("39.999=%d 40=%d 90=%d 90.001=%d", a, b, c, d)};
}

Outcome auc_equivalence() {
    Rng rng(3);
    double worst = 0.0;
    for (int trial = 0; trial < 200; ++trial) {
        const int n = rng.integer(2, 500);
        const int levels = trial % 2 == 0 ? rng.integer(1, 4) : 0;
        std::vector<double> s;
        std::vector<int> y;
        for (int i = 0; i < n; ++i) {
            s.push_back(levels ? rng.integer(0, levels) / 10.0 : rng.uniform(0, 1));
            y.push_back(rng.integer(0, 1));
        }
        y[0] = 1;
        y[1] = 0;
        worst = std::max(worst, std::abs(roc_curve(s, y).auc - mann_whitney(s, y)));
    }
    return {worst < 1e-12, fmt("max |trapezoid - Mann-Whitney| = %.3g over 200 datasets", worst)};
}

Outcome published_matrix() {
    std::vector<double> s;
    std::vector<int> y;
    auto add = [&](std::size_t n, double score, int label) {
        s.insert(s.end(), n, score);
        y.insert(y.end(), n, label);
    };
    add(1244, 0.9, 1);
    add(601, 0.05, 1);
    add(4780, 0.6, 0);
    add(9351, 0.05, 0);
    const auto m = confusion(s, y, 0.1038);
    const bool ok = m.tp == 1244 && m.fn == 601 && m.fp == 4780 && m.tn == 9351 && m.total() == 15976 &&
                    std::abs(m.tpr() - 0.6743) <= 1e-4 && std::abs(m.fpr() - 0.3383) <= 1e-4 &&
                    std::abs(m.positive_share() - 1845.0 / 15976.0) < 1e-12 && std::abs(m.positive_share() - 0.12) <= 0.01;
    return {ok, fmt("total %zu, tpr %.4f, fpr %.4f, positive share %.4f", m.total(), m.tpr(), m.fpr(), m.positive_share())};
}

Outcome threshold_rule() {
    RocCurve c;
    c.points = {{0, 0, 1.0}, {0.2, 0.9, 0.3}, {1, 1, 0.0}};
    const double hand = select_threshold(c);
    const std::vector<double> s{0.95, 0.9, 0.7, 0.4, 0.2};
    const std::vector<int> y{1, 1, 1, 0, 0};
    const auto roc = roc_curve(s, y);
    const double perfect = select_threshold(roc);
    bool corner = false;
    for (const auto& p : roc.points) corner |= p.fpr == 0.0 && p.tpr == 1.0 && p.threshold == perfect;
    return {hand == 0.3 && corner && perfect == 0.7, fmt("hand-built curve %.3g, perfect classifier %.3g", hand, perfect)};
}

Outcome gradient_gate() {
    const auto t0 = std::chrono::steady_clock::now();
    Rng rng(6);
    const auto model = CnnModel::build(Architecture::default_p3(), 6);
    std::vector<Tensor> batch;
    for (int i = 0; i < 4; ++i) {
        Tensor t({3, 64, 64});
        for (auto& v : t.data) v = rng.uniform(-1, 1);
        batch.push_back(std::move(t));
    }
    const std::vector<int> labels{0, 1, 0, 1};
    const auto cnn = gradient_check_detail(model, batch, labels);
    const auto affine = CnnModel::build(Architecture::affine({3, 64, 64}), 6);
    const auto lin = gradient_check_detail(affine, batch, labels);
    const double secs = seconds_since(t0);
    return {cnn.max_relative_error < 1e-3 && lin.max_relative_error < 1e-7 && secs < 60.0,
            fmt("default CNN %.3g over %zu parameters (%zu straddle a kink), affine %.3g over %zu parameters, %.1f s",
                cnn.max_relative_error, cnn.parameters, cnn.kinked, lin.max_relative_error, lin.parameters, secs)};
}

Outcome overfit_sanity() {
    const auto t0 = std::chrono::steady_clock::now();
    CnnTrainConfig cfg;
    cfg.epochs = 300;
    cfg.batch_size = 8;
    cfg.seed = 3;
    cfg.stop_below_train_loss = 0.02;
    auto a = CnnModel::build(Architecture::default_p3(), 7);
    const auto data = synthetic_images(32, 3, a);
    int positives = 0;
    for (int l : data.labels) positives += l;
    const auto ra = train_cnn(a, data, cfg);
    auto b = CnnModel::build(Architecture::default_p3(), 7);
    const auto rb = train_cnn(b, data, cfg);
    const bool same = ra.train_loss == rb.train_loss &&
                      std::equal(a.parameters().begin(), a.parameters().end(), b.parameters().begin());
    const double loss = mean_bce(a, data);
    const double secs = seconds_since(t0);
    return {loss < 0.05 && ra.epochs <= 300 && same && secs < 600.0,
            fmt("%zu images (%d positive), BCE %.4f after %d epochs, repeat identical: %s, %.1f s", data.images.size(), positives,
                loss, ra.epochs, same ? "yes" : "no", secs)};
}

Outcome method_gap() {
    const auto t0 = std::chrono::steady_clock::now();
    test::TempDir dir("acceptance-gap");
    const std::string root = dir.path().string();
    const std::string frac = "0.7142857142857143";  // 25 of 35 matches
    for (const auto& args : std::vector<std::vector<std::string>>{
             {"--root", root, "synth", "--n", "700"},
             {"--root", root, "detect"},
             {"--root", root, "render"},
             {"--root", root, "--train_fraction", frac, "--cnn_epochs", "20", "train"},
             {"--root", root, "--train_fraction", frac, "eval"}}) {
        if (run_cli(args) != 0) return {false, "pipeline step failed: " + args[2]};
    }
    const json summary = json::parse(read_file(dir.path() / "eval" / "summary.json"));
    const json report = json::parse(read_file(dir.path() / "models" / "cnn_report.json"));
    const auto train_n = static_cast<int>(report.at("split").at("train_matches").size());
    const auto val_matches = static_cast<int>(report.at("split").at("validation_matches").size());
    const auto val_n = summary.at("validation_moments").get<int>();
    const double base = summary.at("baseline_validation_auc"), cnn = summary.at("cnn_validation_auc");
    const double secs = seconds_since(t0);
    return {train_n == 25 && val_matches == 10 && val_n == 200 && base <= 0.60 && cnn >= 0.85 && cnn > base && secs < 1800.0,
            fmt("%d/%d matches, %d validation moments, baseline AUC %.4f, CNN AUC %.4f, %.0f s", train_n, val_matches, val_n, base, cnn, secs)};
}

Outcome calibration_property() {
    Rng rng(9);
    std::vector<double> s;
    std::vector<int> y;
    for (int i = 0; i < 10000; ++i) {
        const double p = rng.uniform(0, 1);
        s.push_back(p);
        y.push_back(rng.uniform(0, 1) < p);
    }
    const auto bins = calibration(s, y, 10);
    int good = 0;
    double worst = 0;
    for (const auto& b : bins) {
        const double gap = std::abs(b.mean_predicted - b.observed_rate);
        good += gap < 0.03;
        worst = std::max(worst, gap);
    }
    return {bins.size() == 10 && good >= 9, fmt("%d of %zu bins within 0.03 (worst %.4f)", good, bins.size(), worst)};
}

Outcome kpi_oracle() {
    const auto league = test::toy_league();
    std::vector<std::string> failures;
    auto expect = [&](bool ok, const std::string& what) {
        if (!ok) failures.push_back(what);
    };
    const auto def = player_kpi(league.moments, league.minutes, league.players, PlayerGroup::defender);
    expect(def.size() == 2, "defender row count");
    if (def.size() == 2) {
        expect(def[0].player_id == "d1" && def[0].potential == 10 && def[0].penetrative == 5 && def[0].p3_percentage == 0.5,
               "10/5 defender");
        expect(def[1].player_id == "d3" && def[1].p3_percentage == 0.4, "second defender");
    }
    for (const auto& r : def) expect(r.player_id != "d4", "1,100-minute player excluded");
    const auto mid = player_kpi(league.moments, league.minutes, league.players, PlayerGroup::midfielder);
    expect(mid.size() == 1 && mid[0].player_id == "m1p" && mid[0].p3_percentage == 0.5, "midfielders");
    const auto u23 = player_kpi(league.moments, league.minutes, league.players, PlayerGroup::u23);
    expect(u23.size() == 1 && u23[0].player_id == "u1" && u23[0].p3_percentage == 0.4, "u23");

    const auto attack = team_attack_kpi(league.moments);
    const std::vector<std::pair<std::string, double>> attack_want{{"C", 0.5}, {"A", 0.32}, {"B", 0.25}, {"D", 0.2}};
    expect(attack.size() == 4, "attack rows");
    for (std::size_t i = 0; i < std::min<std::size_t>(4, attack.size()); ++i) {
        expect(attack[i].team_id == attack_want[i].first && attack[i].p3_percentage == attack_want[i].second,
               "attack row " + std::to_string(i));
    }
    const auto defense = team_defense_kpi(league.moments, league.matches);
    const std::vector<std::pair<std::string, double>> defense_want{{"A", 25.0}, {"C", 25.0}, {"B", 37.5}, {"D", 52.0}};
    expect(defense.size() == 4, "defense rows");
    for (std::size_t i = 0; i < std::min<std::size_t>(4, defense.size()); ++i) {
        expect(defense[i].team_id == defense_want[i].first && defense[i].opponent_potential_per_match == defense_want[i].second,
               "defense row " + std::to_string(i));
    }
    int attacked = 0, conceded = 0;
    for (const auto& r : attack) attacked += r.potential;
    for (const auto& r : defense) conceded += r.opponent_moments;
    const int total = static_cast<int>(league.moments.size());
    expect(attacked == total && conceded == total, "counting identity");

    std::string detail = fmt("sum attack %d = moments %d = sum conceded %d", attacked, total, conceded);
    for (const auto& f : failures) detail += "; wrong: " + f;
    return {failures.empty(), detail};
}

Outcome determinism() {
    test::TempDir a("acceptance-det-a"), b("acceptance-det-b");
    if (test::build_pipeline(a.path(), 100, 2) != 0 || test::build_pipeline(b.path(), 100, 2) != 0) {
        return {false, "pipeline failed"};
    }
    std::vector<std::string> diffs;
    std::size_t files = 0;
    for (const char* sub : {"store", "images", "models", "eval"}) {
        const auto ha = hash_tree(a.path() / sub), hb = hash_tree(b.path() / sub);
        files += ha.size();
        if (ha != hb) diffs.push_back(sub);
    }
    const bool core = fs::exists(a.path() / "store" / "moments.jsonl") && fs::exists(a.path() / "models" / "cnn.p3m") &&
                      fs::exists(a.path() / "eval" / "roc.json");
    std::string detail = fmt("%zu files compared", files);
    for (const auto& d : diffs) detail += "; differs: " + d;
    return {core && diffs.empty(), detail};
}

Outcome service_contract() {
    test::TempDir dir("acceptance-service");
    if (test::build_pipeline(dir.path(), 100, 1) != 0) return {false, "pipeline failed"};
    ServiceConfig cfg;
    cfg.paths = PipelinePaths::under(dir.path());
    const std::string before = sha256_directory(dir.path());
    const Service service(cfg);
    const auto moments = read_moments(dir.path() / "store" / "moments.jsonl");

    auto call = [&](const std::string& method, const std::string& path, std::vector<std::pair<std::string, std::string>> q,
                    const std::string& body = "") {
        ApiRequest req;
        req.method = method;
        req.path = path;
        req.query = std::move(q);
        req.body = body;
        return service.handle(req);
    };

    std::multiset<std::string> seen;
    for (std::size_t offset = 0; offset < moments.size() + 20; offset += 13) {
        const auto page = json::parse(call("GET", "/api/v1/moments", {{"offset", std::to_string(offset)}, {"limit", "13"}}).body);
        for (const auto& item : page.at("items")) seen.insert(item.at("moment_id").get<std::string>());
    }
    bool once = seen.size() == moments.size();
    for (const auto& m : moments) once = once && seen.count(m.moment_id) == 1;

    int identity_ok = 0, removal_ok = 0;
    for (const auto& m : moments) {
        const std::string url = "/api/v1/moments/" + m.moment_id + "/whatif";
        const auto id = json::parse(call("POST", url, {}, R"({"edits": []})").body);
        identity_ok += id.at("still_p3") == true && id.at("probability").get<double>() == *service.probability(m.moment_id);

        json edits = json::array();
        for (std::size_t k = 0; k < m.all_players.size(); ++k) {
            const auto& p = m.all_players[k];
            if (p.teammate && !p.actor && point_in_polygon(p.location, m.hull) != Containment::outside) {
                edits.push_back({{"index", k}, {"x", 1.0}, {"y", 1.0}});
            }
        }
        const auto gone = json::parse(call("POST", url, {}, json{{"edits", edits}}.dump()).body);
        removal_ok += gone.at("still_p3") == false && gone.at("rejection_reason") == "no receiver inside hull";
    }

    std::atomic<int> errors{0};
    std::vector<std::thread> workers;
    for (int t = 0; t < 4; ++t) {
        workers.emplace_back([&, t] {
            for (int i = 0; i < 250; ++i) {
                const auto& m = moments[static_cast<std::size_t>(t * 250 + i) % moments.size()];
                ApiResponse r;
                switch (i % 6) {
                    case 0: r = call("GET", "/api/v1/moments", {{"offset", std::to_string(i % 100)}, {"limit", "20"}}); break;
                    case 1: r = call("GET", "/api/v1/moments/" + m.moment_id, {}); break;
                    case 2: r = call("GET", "/api/v1/moments/" + m.moment_id + "/image.png", {}); break;
                    case 3:
                        r = call("POST", "/api/v1/moments/" + m.moment_id + "/whatif", {},
                                 json{{"edits", {{{"index", 0}, {"x", 50.0 + i % 30}, {"y", 40.0}}}}}.dump());
                        break;
                    case 4: r = call("GET", "/api/v1/kpi/teams", {{"side", t % 2 ? "attack" : "defense"}}); break;
                    default: r = call("GET", "/api/v1/model/roc", {}); break;
                }
                if (r.status != 200) ++errors;
            }
        });
    }
    for (auto& w : workers) w.join();
    const bool unchanged = sha256_directory(dir.path()) == before;
    const int n = static_cast<int>(moments.size());
    return {once && identity_ok == n && removal_ok == n && unchanged && errors == 0,
            fmt("pagination once: %s, identity bit-equal %d/%d, receiver removal %d/%d, 1000 requests (%d errors), tree unchanged: %s",
                once ? "yes" : "no", identity_ok, n, removal_ok, n, errors.load(), unchanged ? "yes" : "no")};
}

}  // namespace

int main() {
    const std::vector<std::pair<int, std::function<Outcome()>>> criteria{
        {1, geometry_oracles}, {2, zone_boundary},  {3, auc_equivalence},       {4, published_matrix},
        {5, threshold_rule},   {6, gradient_gate},  {7, overfit_sanity},        {8, method_gap},
        {9, calibration_property}, {10, kpi_oracle}, {11, determinism},        {12, service_contract},
    };
    int failed = 0;
    for (const auto& [n, check] : criteria) {
        Outcome o;
        try {
            o = check();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        failed += !o.pass;
        std::printf("criterion %d: %s  %s\n", n, o.pass ? "PASS" : "FAIL", o.detail.c_str());
        std::fflush(stdout);
    }
    std::printf("%d of %zu criteria passed\n", static_cast<int>(criteria.size()) - failed, criteria.size());
    return failed == 0 ? 0 : 1;
}
