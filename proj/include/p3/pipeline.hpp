#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "p3/detect.hpp"
#include "p3/kpi.hpp"
#include "p3/model.hpp"
#include "p3/render.hpp"
#include "p3/synth.hpp"

namespace p3 {

/// Stage inputs are missing or unusable; maps to exit code 2.
class StageError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct PipelinePaths {
    std::filesystem::path data = "data";
    std::filesystem::path store = "store";
    std::filesystem::path models = "models";
    std::filesystem::path images = "images";
    std::filesystem::path eval = "eval";
    std::filesystem::path kpi = "kpi";

    /// Every directory placed under `root`.
    static PipelinePaths under(const std::filesystem::path& root);
};

struct PipelineConfig {
    PipelinePaths paths;
    std::uint64_t seed = 7;
    DetectConfig detect;
    RenderConfig render;
    BaselineHyper baseline;
    CnnTrainConfig cnn;
    SynthConfig synth;
    KpiFilters kpi;
    double train_fraction = 0.8;

    /// Flat key/value view used for manifests and config files.
    nlohmann::json to_flat_json() const;
    /// Applies known keys; throws std::invalid_argument on unknown keys or
    /// values of the wrong type.
    void apply_flat_json(const nlohmann::json& j);
    static std::vector<std::string> keys();
};

void run_synth(const PipelineConfig& cfg);
void run_ingest(const PipelineConfig& cfg);
void run_detect(const PipelineConfig& cfg);
void run_render(const PipelineConfig& cfg);
/// `method` is "baseline", "cnn" or "all".
void run_train(const PipelineConfig& cfg, const std::string& method);
void run_eval(const PipelineConfig& cfg);
void run_kpi_players(const PipelineConfig& cfg, PlayerGroup group);
void run_kpi_teams(const PipelineConfig& cfg, TeamKpiRow::Side side);

/// Match order (manifest order) split by match; moments grouped by side.
struct SplitMoments {
    SplitPolicy::Split split;
    std::vector<P3Moment> train;
    std::vector<P3Moment> validation;
};
SplitMoments split_moments(const std::vector<std::string>& match_order, const std::vector<P3Moment>& moments,
                           double train_fraction);

/// Hashes every regular file under `dir`, keyed "<dir name>/<relative path>".
std::map<std::string, std::string> hash_tree(const std::filesystem::path& dir, const std::string& suffix_filter = "");

/// Writes <dir>/stage_<name>.json with config, seed, input and output hashes
/// and duration.
void write_stage_manifest(const std::filesystem::path& dir, const std::string& stage, const PipelineConfig& cfg,
                          const std::map<std::string, std::string>& inputs,
                          const std::map<std::string, std::string>& outputs, double seconds);

}  // namespace p3
