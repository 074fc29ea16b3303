#include "p3/pipeline.hpp"

#include <algorithm>
#include <set>
#include <sstream>

#include "p3/hashing.hpp"
#include "p3/ingest.hpp"
#include "p3/metrics.hpp"

namespace p3 {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) { return std::chrono::duration<double>(Clock::now() - start).count(); }

void require_file(const fs::path& p, const std::string& remedy) {
    if (!fs::exists(p)) throw StageError("missing " + p.string() + "; " + remedy);
}

std::string jsonl(const std::vector<json>& rows) {
    std::string out;
    for (const auto& r : rows) {
        out += r.dump();
        out += '\n';
    }
    return out;
}

std::vector<std::string> manifest_match_order(const fs::path& store) {
    require_file(store / "manifest.json", "run `p3 ingest` or `p3 synth` first");
    const json manifest = json::parse(read_file(store / "manifest.json"));
    return manifest.at("match_order").get<std::vector<std::string>>();
}

std::vector<P3Moment> load_moments(const PipelineConfig& cfg) {
    const fs::path path = cfg.paths.store / "moments.jsonl";
    require_file(path, "run `p3 detect` first");
    return read_moments(path);
}

int label_value(const P3Moment& m) { return m.label == Label::penetrative ? 1 : 0; }

Dataset to_dataset(const std::vector<P3Moment>& moments) {
    Dataset d;
    for (const auto& m : moments) {
        d.features.push_back(extract_features(m));
        d.labels.push_back(label_value(m));
    }
    return d;
}

RasterImage moment_image(const PipelineConfig& cfg, const P3Moment& m) {
    const fs::path png = cfg.paths.images / (m.moment_id + ".png");
    require_file(png, "run `p3 render` first");
    return decode_png(read_file(png));
}

LabeledImages to_images(const PipelineConfig& cfg, const CnnModel& model, const std::vector<P3Moment>& moments) {
    LabeledImages out;
    for (const auto& m : moments) {
        out.images.push_back(model_input(model, moment_image(cfg, m)));
        out.labels.push_back(label_value(m));
    }
    return out;
}

json split_json(const SplitPolicy::Split& s) { return {{"train_matches", s.train}, {"validation_matches", s.validation}}; }

bool both_classes(const std::vector<int>& labels) {
    return std::find(labels.begin(), labels.end(), 0) != labels.end() && std::find(labels.begin(), labels.end(), 1) != labels.end();
}

}  // namespace

PipelinePaths PipelinePaths::under(const fs::path& root) {
    return {root / "data", root / "store", root / "models", root / "images", root / "eval", root / "kpi"};
}

std::vector<std::string> PipelineConfig::keys() {
    std::vector<std::string> out;
    const json flat = PipelineConfig{}.to_flat_json();
    for (const auto& [k, v] : flat.items()) out.push_back(k);
    return out;
}

json PipelineConfig::to_flat_json() const {
    return {{"data", paths.data.string()},
            {"store", paths.store.string()},
            {"models", paths.models.string()},
            {"images", paths.images.string()},
            {"eval", paths.eval.string()},
            {"kpi", paths.kpi.string()},
            {"seed", seed},
            {"min_opponents_for_hull", detect.min_opponents_for_hull},
            {"boundary_counts_inside", detect.boundary_counts_inside},
            {"zone_lo", detect.zone_lo},
            {"zone_hi", detect.zone_hi},
            {"exclude_set_pieces", detect.exclude_set_pieces},
            {"width", render.width},
            {"height", render.height},
            {"hull_alpha", render.hull_alpha},
            {"clip_to_visible_area", render.clip_to_visible_area},
            {"baseline_lr", baseline.lr},
            {"baseline_epochs", baseline.epochs},
            {"cnn_lr", cnn.lr},
            {"cnn_momentum", cnn.momentum},
            {"cnn_epochs", cnn.epochs},
            {"cnn_batch_size", cnn.batch_size},
            {"train_fraction", train_fraction},
            {"synth_n", synth.n},
            {"synth_per_match", synth.passes_per_match},
            {"positive_share", synth.positive_share},
            {"reject_share", synth.reject_share},
            {"min_minutes", kpi.min_minutes},
            {"count_filter", kpi.count_filter.mode == CountFilter::Mode::group_median ? "group_median" : "fixed"},
            {"count_n", kpi.count_filter.n},
            {"reference_date", kpi.reference_date}};
}

void PipelineConfig::apply_flat_json(const json& j) {
    if (!j.is_object()) throw std::invalid_argument("config: expected a flat JSON object");
    const json known = to_flat_json();
    for (const auto& [key, value] : j.items()) {
        if (!known.contains(key)) throw std::invalid_argument("config: unknown key '" + key + "'");
        const json& proto = known.at(key);
        const bool ok = (proto.is_string() && value.is_string()) || (proto.is_boolean() && value.is_boolean()) ||
                        (proto.is_number_integer() && value.is_number_integer()) ||
                        (proto.is_number_float() && value.is_number());
        if (!ok) throw std::invalid_argument("config: wrong type for '" + key + "'");
    }
    auto get = [&](const char* key, auto& target) {
        if (auto it = j.find(key); it != j.end()) target = it->get<std::decay_t<decltype(target)>>();
    };
    auto get_path = [&](const char* key, fs::path& target) {
        if (auto it = j.find(key); it != j.end()) target = it->get<std::string>();
    };
    get_path("data", paths.data);
    get_path("store", paths.store);
    get_path("models", paths.models);
    get_path("images", paths.images);
    get_path("eval", paths.eval);
    get_path("kpi", paths.kpi);
    get("seed", seed);
    get("min_opponents_for_hull", detect.min_opponents_for_hull);
    get("boundary_counts_inside", detect.boundary_counts_inside);
    get("zone_lo", detect.zone_lo);
    get("zone_hi", detect.zone_hi);
    get("exclude_set_pieces", detect.exclude_set_pieces);
    get("width", render.width);
    get("height", render.height);
    get("hull_alpha", render.hull_alpha);
    get("clip_to_visible_area", render.clip_to_visible_area);
    get("baseline_lr", baseline.lr);
    get("baseline_epochs", baseline.epochs);
    get("cnn_lr", cnn.lr);
    get("cnn_momentum", cnn.momentum);
    get("cnn_epochs", cnn.epochs);
    get("cnn_batch_size", cnn.batch_size);
    get("train_fraction", train_fraction);
    get("synth_n", synth.n);
    get("synth_per_match", synth.passes_per_match);
    get("positive_share", synth.positive_share);
    get("reject_share", synth.reject_share);
    get("min_minutes", kpi.min_minutes);
    if (auto it = j.find("count_filter"); it != j.end()) {
        const auto mode = it->get<std::string>();
        if (mode == "group_median") kpi.count_filter.mode = CountFilter::Mode::group_median;
        else if (mode == "fixed") kpi.count_filter.mode = CountFilter::Mode::fixed;
        else throw std::invalid_argument("config: count_filter must be group_median or fixed");
    }
    get("count_n", kpi.count_filter.n);
    get("reference_date", kpi.reference_date);
}

std::map<std::string, std::string> hash_tree(const fs::path& dir, const std::string& suffix_filter) {
    std::map<std::string, std::string> out;
    if (!fs::exists(dir)) return out;
    const std::string label = fs::absolute(dir).lexically_normal().filename().string().empty()
                                  ? fs::absolute(dir).lexically_normal().parent_path().filename().string()
                                  : fs::absolute(dir).lexically_normal().filename().string();
    for (const auto& entry : fs::recursive_directory_iterator(dir)) {
        if (!entry.is_regular_file()) continue;
        const std::string name = entry.path().filename().string();
        if (name.rfind("stage_", 0) == 0) continue;
        if (!suffix_filter.empty() && !(name.size() >= suffix_filter.size() &&
                                        name.compare(name.size() - suffix_filter.size(), suffix_filter.size(), suffix_filter) == 0)) {
            continue;
        }
        out[label + "/" + fs::relative(entry.path(), dir).generic_string()] = sha256_file(entry.path());
    }
    return out;
}

void write_stage_manifest(const fs::path& dir, const std::string& stage, const PipelineConfig& cfg,
                          const std::map<std::string, std::string>& inputs,
                          const std::map<std::string, std::string>& outputs, double seconds) {
    json manifest{{"stage", stage},
                  {"seed", cfg.seed},
                  {"config", cfg.to_flat_json()},
                  {"inputs", inputs},
                  {"outputs", outputs},
                  {"duration_seconds", seconds}};
    write_file(dir / ("stage_" + stage + ".json"), manifest.dump(2) + "\n");
}

SplitMoments split_moments(const std::vector<std::string>& match_order, const std::vector<P3Moment>& moments,
                           double train_fraction) {
    SplitMoments out;
    out.split = SplitPolicy{match_order, train_fraction}.split();
    const std::set<std::string> train(out.split.train.begin(), out.split.train.end());
    const std::set<std::string> validation(out.split.validation.begin(), out.split.validation.end());
    for (const auto& m : moments) {
        if (train.contains(m.match_id)) out.train.push_back(m);
        else if (validation.contains(m.match_id)) out.validation.push_back(m);
    }
    return out;
}

// ---------------------------------------------------------------------------

void run_synth(const PipelineConfig& cfg) {
    const auto start = Clock::now();
    SynthConfig sc = cfg.synth;
    sc.seed = cfg.seed;
    const SynthCorpus corpus = generate_corpus(sc, cfg.detect);
    for (const char* sub : {"events", "three-sixty", "lineups"}) {
        const fs::path dir = cfg.paths.data / sub;
        if (!fs::exists(dir)) continue;
        for (const auto& entry : fs::directory_iterator(dir)) {
            if (entry.path().filename().string().rfind(sc.match_prefix + "-", 0) == 0) fs::remove(entry.path());
        }
    }
    write_raw_corpus(corpus, cfg.paths.data);
    write_stage_manifest(cfg.paths.data, "synth", cfg, {}, hash_tree(cfg.paths.data), seconds_since(start));
    run_ingest(cfg);
}

void run_ingest(const PipelineConfig& cfg) {
    const auto start = Clock::now();
    if (!fs::is_directory(cfg.paths.data / "events")) {
        throw StageError("missing " + (cfg.paths.data / "events").string() + "; point --data at a StatsBomb-layout directory or run `p3 synth`");
    }
    const auto inputs = hash_tree(cfg.paths.data, ".json");
    try {
        ingest_directory(cfg.paths.data, cfg.paths.store);
    } catch (const ParseError& e) {
        throw StageError(std::string("ingest: malformed JSON at byte ") + std::to_string(e.byte_offset()) + ": " + e.what());
    }
    write_stage_manifest(cfg.paths.store, "ingest", cfg, inputs, hash_tree(cfg.paths.store), seconds_since(start));
}

void run_detect(const PipelineConfig& cfg) {
    const auto start = Clock::now();
    manifest_match_order(cfg.paths.store);
    auto inputs = hash_tree(cfg.paths.store, ".snapshots.jsonl");
    const auto manifest = hash_tree(cfg.paths.store, "manifest.json");
    inputs.insert(manifest.begin(), manifest.end());
    const Store store = load_store(cfg.paths.store);
    const ScanResult scan = scan_corpus(store, cfg.detect);
    write_moments(cfg.paths.store / "moments.jsonl", scan.moments);
    json report = to_json(scan.report);
    report["config"] = to_json(cfg.detect);
    write_file(cfg.paths.store / "detect_report.json", report.dump(2) + "\n");
    std::map<std::string, std::string> outputs = hash_tree(cfg.paths.store, "moments.jsonl");
    const auto rep = hash_tree(cfg.paths.store, "detect_report.json");
    outputs.insert(rep.begin(), rep.end());
    write_stage_manifest(cfg.paths.store, "detect", cfg, inputs, outputs, seconds_since(start));
}

void run_render(const PipelineConfig& cfg) {
    const auto start = Clock::now();
    const auto moments = load_moments(cfg);
    const auto inputs = hash_tree(cfg.paths.store, "moments.jsonl");
    fs::create_directories(cfg.paths.images);
    std::vector<json> index;
    for (const auto& m : moments) {
        write_file(cfg.paths.images / (m.moment_id + ".png"), encode_png(render_moment(m, cfg.render)));
        index.push_back({{"moment_id", m.moment_id}, {"label", to_string(m.label)}, {"match_id", m.match_id}});
    }
    write_file(cfg.paths.images / "index.jsonl", jsonl(index));
    write_stage_manifest(cfg.paths.images, "render", cfg, inputs, hash_tree(cfg.paths.images), seconds_since(start));
}

void run_train(const PipelineConfig& cfg, const std::string& method) {
    if (method != "baseline" && method != "cnn" && method != "all") throw std::invalid_argument("train: --method must be baseline, cnn or all");
    const auto start = Clock::now();
    const auto moments = load_moments(cfg);
    const auto parts = split_moments(manifest_match_order(cfg.paths.store), moments, cfg.train_fraction);
    assert_disjoint(parts.split);
    if (parts.train.empty()) throw StageError("train: no moments in the training matches");

    auto inputs = hash_tree(cfg.paths.store, "moments.jsonl");
    const auto manifest = hash_tree(cfg.paths.store, "manifest.json");
    inputs.insert(manifest.begin(), manifest.end());
    fs::create_directories(cfg.paths.models);

    try {
        if (method == "baseline" || method == "all") {
            BaselineHyper hyper = cfg.baseline;
            hyper.seed = cfg.seed;
            const Dataset train = to_dataset(parts.train);
            const Dataset val = to_dataset(parts.validation);
            const auto result = train_baseline(train, hyper, val.features.empty() ? nullptr : &val);
            save_model(cfg.paths.models / "baseline.p3m", result.model);
            json report = to_json(result.report, false);
            report["split"] = split_json(parts.split);
            write_file(cfg.paths.models / "baseline_report.json", report.dump(2) + "\n");
        }
        if (method == "cnn" || method == "all") {
            const auto images = hash_tree(cfg.paths.images, ".png");
            inputs.insert(images.begin(), images.end());
            CnnTrainConfig tc = cfg.cnn;
            tc.seed = cfg.seed;
            CnnModel model = CnnModel::build(Architecture::default_p3(), cfg.seed);
            const LabeledImages train = to_images(cfg, model, parts.train);
            const LabeledImages val = to_images(cfg, model, parts.validation);
            TrainReport report = train_cnn(model, train, tc, val.images.empty() ? nullptr : &val);
            if (!val.images.empty() && both_classes(val.labels)) {
                std::vector<double> scores;
                for (const auto& t : val.images) scores.push_back(model.forward(t));
                report.validation_auc = roc_curve(scores, val.labels).auc;
            }
            save_model(cfg.paths.models / "cnn.p3m", model);
            json rj = to_json(report, false);
            rj["split"] = split_json(parts.split);
            rj["architecture"] = model.architecture().to_json();
            rj["parameter_count"] = model.parameter_count();
            write_file(cfg.paths.models / "cnn_report.json", rj.dump(2) + "\n");
        }
    } catch (const TrainingError& e) {
        throw StageError(std::string("train: ") + e.what());
    }
    write_stage_manifest(cfg.paths.models, "train_" + method, cfg, inputs, hash_tree(cfg.paths.models), seconds_since(start));
}

void run_eval(const PipelineConfig& cfg) {
    const auto start = Clock::now();
    const fs::path cnn_path = cfg.paths.models / "cnn.p3m";
    require_file(cnn_path, "the CNN model is missing; run `p3 train --method cnn` first");
    const auto any = load_model(cnn_path);
    if (!std::holds_alternative<CnnModel>(any)) throw StageError(cnn_path.string() + " is not a CNN model");
    const CnnModel& model = std::get<CnnModel>(any);

    const auto moments = load_moments(cfg);
    const auto parts = split_moments(manifest_match_order(cfg.paths.store), moments, cfg.train_fraction);
    auto inputs = hash_tree(cfg.paths.models, ".p3m");
    const auto mom = hash_tree(cfg.paths.store, "moments.jsonl");
    inputs.insert(mom.begin(), mom.end());
    const auto imgs = hash_tree(cfg.paths.images, ".png");
    inputs.insert(imgs.begin(), imgs.end());

    const std::set<std::string> val_matches(parts.split.validation.begin(), parts.split.validation.end());
    std::vector<json> score_rows;
    std::vector<double> val_scores;
    std::vector<int> val_labels;
    for (const auto& m : moments) {
        const double p = model.forward(model_input(model, moment_image(cfg, m)));
        const bool is_val = val_matches.contains(m.match_id);
        score_rows.push_back({{"moment_id", m.moment_id}, {"probability", p}, {"split", is_val ? "validation" : "train"}});
        if (is_val) {
            val_scores.push_back(p);
            val_labels.push_back(label_value(m));
        }
    }
    write_file(cfg.paths.eval / "scores.jsonl", jsonl(score_rows));
    if (val_scores.empty() || !both_classes(val_labels)) {
        throw StageError("eval: the validation matches need moments of both classes");
    }

    const RocCurve roc = roc_curve(val_scores, val_labels);
    const double threshold = select_threshold(roc);
    const ConfusionMatrix cm = confusion(val_scores, val_labels, threshold);
    write_file(cfg.paths.eval / "roc.json", to_json(roc).dump(2) + "\n");
    write_file(cfg.paths.eval / "confusion.json", to_json(cm, threshold).dump(2) + "\n");
    write_file(cfg.paths.eval / "histogram.json", to_json(score_distribution(val_scores)).dump(2) + "\n");
    const std::size_t bins = std::min<std::size_t>(10, val_scores.size());
    write_file(cfg.paths.eval / "calibration.json", to_json(calibration(val_scores, val_labels, bins)).dump(2) + "\n");

    json summary{{"cnn_validation_auc", roc.auc},
                 {"threshold", threshold},
                 {"validation_moments", val_scores.size()},
                 {"validation_positive_share", cm.positive_share()}};
    const fs::path baseline_path = cfg.paths.models / "baseline.p3m";
    if (fs::exists(baseline_path)) {
        const auto b = load_model(baseline_path);
        if (const auto* bm = std::get_if<BaselineModel>(&b)) {
            std::vector<double> bs;
            for (const auto& m : parts.validation) bs.push_back(predict_baseline(*bm, extract_features(m)));
            const RocCurve broc = roc_curve(bs, val_labels);
            summary["baseline_validation_auc"] = broc.auc;
            write_file(cfg.paths.eval / "baseline_roc.json", to_json(broc).dump(2) + "\n");
        }
    }
    write_file(cfg.paths.eval / "summary.json", summary.dump(2) + "\n");
    write_stage_manifest(cfg.paths.eval, "eval", cfg, inputs, hash_tree(cfg.paths.eval), seconds_since(start));
}

namespace {

std::vector<Roster> load_rosters(const PipelineConfig& cfg) {
    const Store store = load_store(cfg.paths.store);
    std::vector<Roster> rosters;
    for (const auto& id : store.match_ids) {
        if (auto it = store.rosters.find(id); it != store.rosters.end()) rosters.push_back(it->second);
    }
    return rosters;
}

}  // namespace

void run_kpi_players(const PipelineConfig& cfg, PlayerGroup group) {
    const auto start = Clock::now();
    const auto moments = load_moments(cfg);
    const auto rosters = load_rosters(cfg);
    if (rosters.empty()) throw StageError("kpi: no lineups in the store; ingest lineups/ first");
    const auto rows = player_kpi(moments, minutes_played(rosters), season_players(rosters), group, cfg.kpi);
    const std::string stem = "players_" + std::string(to_string(group));
    write_file(cfg.paths.kpi / (stem + ".json"), to_json(rows, group, cfg.kpi).dump(2) + "\n");
    write_file(cfg.paths.kpi / (stem + ".csv"), to_csv(rows));
    auto inputs = hash_tree(cfg.paths.store, "moments.jsonl");
    const auto rj = hash_tree(cfg.paths.store, ".roster.json");
    inputs.insert(rj.begin(), rj.end());
    write_stage_manifest(cfg.paths.kpi, "kpi_" + stem, cfg, inputs, hash_tree(cfg.paths.kpi, stem + ".json"), seconds_since(start));
}

void run_kpi_teams(const PipelineConfig& cfg, TeamKpiRow::Side side) {
    const auto start = Clock::now();
    const auto moments = load_moments(cfg);
    const std::string stem = side == TeamKpiRow::Side::attack ? "teams_attack" : "teams_defense";
    if (side == TeamKpiRow::Side::attack) {
        const auto rows = team_attack_kpi(moments);
        write_file(cfg.paths.kpi / (stem + ".json"), to_json(rows, side).dump(2) + "\n");
        write_file(cfg.paths.kpi / (stem + ".csv"), to_csv(rows, side));
    } else {
        const Store store = load_store(cfg.paths.store);
        std::vector<MatchTeams> matches;
        for (const auto& id : store.match_ids) {
            MatchTeams mt{id, {}};
            if (auto it = store.rosters.find(id); it != store.rosters.end()) {
                mt.teams = it->second.team_ids;
            } else {
                std::set<std::string> seen;
                for (const auto& s : store.snapshots.at(id)) seen.insert(s.event.team_id);
                mt.teams.assign(seen.begin(), seen.end());
            }
            matches.push_back(std::move(mt));
        }
        const auto rows = team_defense_kpi(moments, matches);
        write_file(cfg.paths.kpi / (stem + ".json"), to_json(rows, side).dump(2) + "\n");
        write_file(cfg.paths.kpi / (stem + ".csv"), to_csv(rows, side));
    }
    write_stage_manifest(cfg.paths.kpi, "kpi_" + stem, cfg, hash_tree(cfg.paths.store, "moments.jsonl"),
                         hash_tree(cfg.paths.kpi, stem + ".json"), seconds_since(start));
}

}  // namespace p3
