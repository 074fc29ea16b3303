#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

#include "p3/detect.hpp"
#include "p3/render.hpp"

namespace p3 {

// ---------------------------------------------------------------------------
// Event features

/// Pre-pass event features only. There is deliberately no way to carry the
/// pass end location or the body side through this type.
struct FeatureVector {
    static constexpr std::size_t kArity = 3;
    std::array<double, kArity> values{};  // x / 120, y / 80, under_pressure

    double x() const { return values[0]; }
    double y() const { return values[1]; }
    double under_pressure() const { return values[2]; }
};

FeatureVector extract_features(const P3Moment& moment);

struct Dataset {
    std::vector<FeatureVector> features;
    std::vector<int> labels;  // 0 / 1
};

// ---------------------------------------------------------------------------
// Match-level split

struct SplitPolicy {
    std::vector<std::string> matches;  // chronological order
    double train_fraction = 0.8;

    struct Split {
        std::vector<std::string> train;
        std::vector<std::string> validation;
    };

    /// First `train_fraction` of the matches train, the rest validate. With
    /// two or more matches both sides are non-empty.
    Split split() const;
};

/// Throws if any match appears on both sides.
void assert_disjoint(const SplitPolicy::Split& split);

// ---------------------------------------------------------------------------
// Reports

class TrainingError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct TrainReport {
    std::vector<double> train_loss;       // after each epoch
    std::vector<double> validation_loss;  // empty without a validation set
    double initial_train_loss = 0.0;
    int epochs = 0;
    double wall_seconds = 0.0;
    std::optional<double> train_auc;
    std::optional<double> validation_auc;
};

nlohmann::json to_json(const TrainReport& r, bool include_wall_clock = true);

// ---------------------------------------------------------------------------
// Logistic baseline

struct BaselineHyper {
    double lr = 0.5;
    int epochs = 500;
    std::uint64_t seed = 0;
};

struct BaselineModel {
    std::array<double, FeatureVector::kArity> weights{};
    double bias = 0.0;
    bool trained = false;
    std::uint64_t seed = 0;
};

struct BaselineResult {
    BaselineModel model;
    TrainReport report;
};

/// Full-batch gradient descent on binary cross-entropy. Throws
/// TrainingError("degenerate labels") unless both classes are present.
BaselineResult train_baseline(const Dataset& train, const BaselineHyper& hyper, const Dataset* validation = nullptr);

double predict_baseline(const BaselineModel& model, const FeatureVector& f);

// ---------------------------------------------------------------------------
// Convolutional classifier

struct Shape {
    int channels = 0;
    int height = 0;
    int width = 0;

    std::size_t size() const { return static_cast<std::size_t>(channels) * height * width; }
    friend bool operator==(const Shape&, const Shape&) = default;
};

/// Channel-major (CHW) activations.
struct Tensor {
    Shape shape;
    std::vector<double> data;

    Tensor() = default;
    explicit Tensor(Shape s) : shape(s), data(s.size(), 0.0) {}

    double& at(int c, int y, int x) { return data[(static_cast<std::size_t>(c) * shape.height + y) * shape.width + x]; }
    double at(int c, int y, int x) const {
        return data[(static_cast<std::size_t>(c) * shape.height + y) * shape.width + x];
    }
};

/// RGB channels mapped linearly from [0,255] onto [-1,1]. No per-dataset
/// statistics are involved.
Tensor image_to_tensor(const RasterImage& image);

enum class LayerKind { conv3x3, relu, maxpool2, global_avg_pool, dense };

struct LayerSpec {
    LayerKind kind = LayerKind::relu;
    int out = 0;  // output channels (conv3x3) or units (dense)

    friend bool operator==(const LayerSpec&, const LayerSpec&) = default;
};

struct Architecture {
    Shape input{3, 64, 64};
    std::vector<LayerSpec> layers;

    /// 3 x [conv3x3 (8, 16, 32), relu, maxpool2] -> global average pool -> dense(1).
    static Architecture default_p3();
    /// A single affine map from the flattened input to one logit.
    static Architecture affine(Shape input);

    nlohmann::json to_json() const;
    static Architecture from_json(const nlohmann::json& j);

    friend bool operator==(const Architecture&, const Architecture&) = default;
};

struct GradientCheck;

class CnnModel {
public:
    struct LayerInfo {
        LayerSpec spec;
        Shape in;
        Shape out;
        std::size_t weight_offset = 0;
        std::size_t weight_count = 0;
        std::size_t bias_offset = 0;
        std::size_t bias_count = 0;
    };

    /// Validates the descriptor (throws std::invalid_argument) and draws
    /// fan-in scaled uniform weights from `seed`.
    static CnnModel build(const Architecture& arch, std::uint64_t seed);

    const Architecture& architecture() const { return arch_; }
    std::uint64_t seed() const { return seed_; }
    const std::vector<LayerInfo>& layers() const { return layers_; }
    std::size_t parameter_count() const { return params_.size(); }
    std::span<const double> parameters() const { return params_; }
    std::span<double> parameters() { return params_; }

    double logit(const Tensor& input) const;
    /// Probability in (0,1). Throws std::invalid_argument on a shape mismatch.
    double forward(const Tensor& input) const;

    /// Adds d(BCE)/d(params) for one example into `grad`; returns the loss.
    double accumulate_gradient(const Tensor& input, int label, std::span<double> grad) const;

    void zero_final_layer();
    /// Rounds every parameter to the nearest float so the on-disk format
    /// round-trips exactly.
    void quantize_to_float();

    struct Activations;

private:
    Architecture arch_;
    std::uint64_t seed_ = 0;
    std::vector<LayerInfo> layers_;
    std::vector<double> params_;

    friend GradientCheck gradient_check_detail(const CnnModel&, std::span<const Tensor>, std::span<const int>);
    void forward_layer(std::size_t index, const Tensor& in, Tensor& out, std::vector<std::int32_t>* argmax) const;
    double run_from(std::size_t first_layer, Tensor act) const;
    void recompute_channel(std::size_t index, const Tensor& in, Tensor& out, int channel) const;
};

double bce_from_logit(double logit, int label);
double sigmoid(double z);

struct CnnTrainConfig {
    double lr = 0.03;
    double momentum = 0.9;
    int epochs = 8;
    int batch_size = 16;
    std::uint64_t seed = 0;
    std::optional<double> stop_below_train_loss;  // early exit once reached
};

struct LabeledImages {
    std::vector<Tensor> images;
    std::vector<int> labels;
};

/// Mini-batch momentum SGD on mean BCE with per-epoch seeded shuffling.
/// Throws TrainingError on a single-class set or a non-finite loss.
TrainReport train_cnn(CnnModel& model, const LabeledImages& train, const CnnTrainConfig& cfg,
                      const LabeledImages* validation = nullptr);

double mean_bce(const CnnModel& model, const LabeledImages& data);

struct GradientCheck {
    double max_relative_error = 0.0;
    std::size_t parameters = 0;
    std::size_t kinked = 0;  // perturbations that moved a relu sign or pooling winner
};

/// Compares the analytic gradient of the batch-mean BCE with central
/// differences (h = 1e-5) for every parameter. The relative error is
/// |a - n| / max(|a| + |n|, 1e-6). Perturbed passes keep the relu masks and
/// pooling winners of the unperturbed pass, so a difference that straddles
/// a kink still measures the active piece.
GradientCheck gradient_check_detail(const CnnModel& model, std::span<const Tensor> batch, std::span<const int> labels);

/// `gradient_check_detail(...).max_relative_error`.
double gradient_check(const CnnModel& model, std::span<const Tensor> batch, std::span<const int> labels);

/// Analytic batch-mean gradient, exposed for tests.
std::vector<double> batch_gradient(const CnnModel& model, std::span<const Tensor> batch, std::span<const int> labels);

// ---------------------------------------------------------------------------
// Persistence: one JSON header line, then little-endian float32 parameters.

inline constexpr int kModelFormatVersion = 1;

class ModelFormatError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

using AnyModel = std::variant<CnnModel, BaselineModel>;

std::string serialize_model(const CnnModel& model);
std::string serialize_model(const BaselineModel& model);
AnyModel deserialize_model(std::string_view bytes);

void save_model(const std::filesystem::path& path, const CnnModel& model);
void save_model(const std::filesystem::path& path, const BaselineModel& model);
AnyModel load_model(const std::filesystem::path& path);

// ---------------------------------------------------------------------------
// Scoring path shared by eval, the service and what-if.

/// Renders the moment at `render` settings, resamples to the network input
/// size and returns the probability.
double score_moment(const CnnModel& model, const P3Moment& moment, const RenderConfig& render = {});
Tensor model_input(const CnnModel& model, const RasterImage& rendered);

}  // namespace p3
