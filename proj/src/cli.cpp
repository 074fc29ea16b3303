#include "p3/cli.hpp"

#include <csignal>
#include <cstdlib>
#include <iostream>
#include <map>
#include <optional>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "p3/hashing.hpp"
#include "p3/ingest.hpp"
#include "p3/metrics.hpp"
#include "p3/pipeline.hpp"
#include "p3/service.hpp"

namespace p3 {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

class UsageError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

json typed_value(const std::string& key, const std::string& raw, const json& proto) {
    try {
        if (proto.is_string()) return raw;
        if (proto.is_boolean()) {
            if (raw == "true" || raw == "1") return true;
            if (raw == "false" || raw == "0") return false;
            throw std::invalid_argument("bool");
        }
        std::size_t used = 0;
        if (proto.is_number_integer()) {
            const long long v = std::stoll(raw, &used);
            if (used != raw.size()) throw std::invalid_argument("int");
            return v;
        }
        const double v = std::stod(raw, &used);
        if (used != raw.size()) throw std::invalid_argument("float");
        return v;
    } catch (const std::exception&) {
        throw UsageError("invalid value '" + raw + "' for " + key);
    }
}

std::string env_name(const std::string& key) {
    std::string out = "P3_";
    for (char c : key) out.push_back(static_cast<char>(std::toupper(static_cast<unsigned char>(c))));
    return out;
}

struct Options {
    std::string root;
    std::string config_file;
    std::map<std::string, std::string> flags;
};

/// Defaults, then --root, then the config file, then P3_* variables, then flags.
PipelineConfig resolve(const Options& opt) {
    PipelineConfig cfg;
    std::string root = opt.root;
    if (root.empty()) {
        if (const char* e = std::getenv("P3_ROOT")) root = e;
    }
    if (!root.empty()) cfg.paths = PipelinePaths::under(root);

    const json proto = cfg.to_flat_json();
    auto apply = [&](const json& j) {
        try {
            cfg.apply_flat_json(j);
        } catch (const std::invalid_argument& e) {
            throw UsageError(e.what());
        } catch (const json::exception& e) {
            throw UsageError(std::string("config: ") + e.what());
        }
    };

    std::string config_file = opt.config_file;
    if (config_file.empty()) {
        if (const char* e = std::getenv("P3_CONFIG")) config_file = e;
    }
    if (!config_file.empty()) {
        if (!fs::exists(config_file)) throw UsageError("config file not found: " + config_file);
        json j;
        try {
            j = json::parse(read_file(config_file));
        } catch (const json::parse_error& e) {
            throw UsageError("config file is not valid JSON at byte " + std::to_string(e.byte));
        }
        apply(j);
    }

    json env = json::object();
    for (const auto& [key, value] : proto.items()) {
        if (const char* e = std::getenv(env_name(key).c_str())) env[key] = typed_value(env_name(key), e, value);
    }
    apply(env);

    json flags = json::object();
    for (const auto& [key, raw] : opt.flags) flags[key] = typed_value("--" + key, raw, proto.at(key));
    apply(flags);

    try {
        cfg.detect.validate();
        cfg.render.validate();
    } catch (const std::invalid_argument& e) {
        throw UsageError(e.what());
    }
    if (!(cfg.train_fraction > 0.0 && cfg.train_fraction < 1.0)) throw UsageError("train_fraction must lie in (0, 1)");
    return cfg;
}

void on_signal(int) { stop_http(); }

}  // namespace

int run(int argc, const char* const* argv) {
    CLI::App app{"P3: potential penetrative pass detection, modelling and KPIs", "p3"};
    app.require_subcommand(1);
    app.fallthrough();

    Options opt;
    app.add_option("--root", opt.root, "Place data/store/models/images/eval/kpi under this directory");
    app.add_option("--config", opt.config_file, "Flat JSON config file");
    for (const auto& key : PipelineConfig::keys()) {
        app.add_option_function<std::string>("--" + key, [&opt, key](const std::string& v) { opt.flags[key] = v; },
                                             "Override config key " + key);
    }

    auto* synth = app.add_subcommand("synth", "Generate the seeded synthetic corpus and ingest it");
    synth->add_option_function<std::string>("--n", [&opt](const std::string& v) { opt.flags["synth_n"] = v; }, "Number of pass events");
    synth->add_option_function<std::string>("--per-match", [&opt](const std::string& v) { opt.flags["synth_per_match"] = v; },
                                            "Passes per match");
    app.add_subcommand("ingest", "Parse raw events, 360 frames and lineups into the store");
    app.add_subcommand("detect", "Detect P3 moments and label them");
    app.add_subcommand("render", "Render moment images");
    auto* train = app.add_subcommand("train", "Train the baseline and/or the CNN");
    std::string method = "all";
    train->add_option("--method", method, "baseline, cnn or all")->check(CLI::IsMember({"baseline", "cnn", "all"}));
    app.add_subcommand("eval", "Score moments and write ROC, confusion, calibration and histogram");
    auto* kpi = app.add_subcommand("kpi", "Player or team P3 tables");
    std::string group, teams;
    kpi->add_option("--group", group, "defenders, midfielders or u23");
    kpi->add_option("--teams", teams, "attack or defense");
    auto* serve = app.add_subcommand("serve", "Serve the /api/v1 HTTP API");
    std::string host = "127.0.0.1";
    int port = 8080;
    std::vector<std::string> cors;
    if (const char* e = std::getenv("P3_HOST")) host = e;
    if (const char* e = std::getenv("P3_PORT")) port = std::atoi(e);
    if (const char* e = std::getenv("P3_CORS")) cors.push_back(e);
    serve->add_option("--host", host, "Listen address");
    serve->add_option("--port", port, "Listen port");
    serve->add_option("--cors", cors, "Allowed browser origin (repeatable, * for any)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    try {
        const PipelineConfig cfg = resolve(opt);
        const std::string name = app.get_subcommands().front()->get_name();
        if (name == "synth") {
            run_synth(cfg);
            std::cout << "synth: wrote " << cfg.synth.n << " passes to " << cfg.paths.data.string() << " and ingested into "
                      << cfg.paths.store.string() << "\n";
        } else if (name == "ingest") {
            run_ingest(cfg);
            std::cout << "ingest: store at " << cfg.paths.store.string() << "\n";
        } else if (name == "detect") {
            run_detect(cfg);
            const json report = json::parse(read_file(cfg.paths.store / "detect_report.json"));
            std::cout << "detect: " << report.value("moments", 0) << " moments, " << report.value("positives", 0)
                      << " penetrative\n";
        } else if (name == "render") {
            run_render(cfg);
            std::cout << "render: images at " << cfg.paths.images.string() << "\n";
        } else if (name == "train") {
            run_train(cfg, method);
            std::cout << "train: models at " << cfg.paths.models.string() << "\n";
        } else if (name == "eval") {
            run_eval(cfg);
            const json summary = json::parse(read_file(cfg.paths.eval / "summary.json"));
            std::cout << "eval: " << summary.dump() << "\n";
        } else if (name == "kpi") {
            if (group.empty() == teams.empty()) throw UsageError("kpi: give exactly one of --group or --teams");
            if (!group.empty()) {
                const auto g = player_group_from_string(group);
                if (!g) throw UsageError("kpi: --group must be defenders, midfielders or u23");
                run_kpi_players(cfg, *g);
            } else {
                if (teams != "attack" && teams != "defense" && teams != "defence") throw UsageError("kpi: --teams must be attack or defense");
                run_kpi_teams(cfg, teams == "attack" ? TeamKpiRow::Side::attack : TeamKpiRow::Side::defense);
            }
            std::cout << "kpi: tables at " << cfg.paths.kpi.string() << "\n";
        } else if (name == "serve") {
            ServiceConfig sc;
            sc.paths = cfg.paths;
            sc.detect = cfg.detect;
            sc.render = cfg.render;
            const Service service(sc);
            std::signal(SIGINT, on_signal);
            std::signal(SIGTERM, on_signal);
            std::cout << "serve: " << service.moment_count() << " moments on http://" << host << ":" << port << "/api/v1\n"
                      << std::flush;
            serve_http(service, host, port, cors);
        }
        return 0;
    } catch (const UsageError& e) {
        std::cerr << "p3: " << e.what() << "\n" << app.help();
        return 1;
    } catch (const std::invalid_argument& e) {
        std::cerr << "p3: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "p3: " << e.what() << "\n";
        return 2;
    }
}

int run(const std::vector<std::string>& args) {
    std::vector<const char*> argv;
    for (const auto& a : args) argv.push_back(a.c_str());
    return run(static_cast<int>(argv.size()), argv.data());
}

}  // namespace p3
