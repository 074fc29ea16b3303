#include <chrono>
#include <cmath>
#include <random>

#include "p3/metrics.hpp"
#include "p3/model.hpp"

namespace p3 {

namespace {

double logit_of(const BaselineModel& m, const FeatureVector& f) {
    double z = m.bias;
    for (std::size_t k = 0; k < FeatureVector::kArity; ++k) z += m.weights[k] * f.values[k];
    return z;
}

double dataset_loss(const BaselineModel& m, const Dataset& d) {
    double loss = 0.0;
    for (std::size_t i = 0; i < d.features.size(); ++i) loss += bce_from_logit(logit_of(m, d.features[i]), d.labels[i]);
    return loss / static_cast<double>(d.features.size());
}

std::vector<double> predictions(const BaselineModel& m, const Dataset& d) {
    std::vector<double> p;
    p.reserve(d.features.size());
    for (const auto& f : d.features) p.push_back(predict_baseline(m, f));
    return p;
}

bool has_both_classes(const std::vector<int>& labels) {
    bool pos = false, neg = false;
    for (int l : labels) (l != 0 ? pos : neg) = true;
    return pos && neg;
}

}  // namespace

BaselineResult train_baseline(const Dataset& train, const BaselineHyper& hyper, const Dataset* validation) {
    if (train.features.empty() || train.features.size() != train.labels.size()) {
        throw TrainingError("train_baseline: empty or misaligned dataset");
    }
    if (!has_both_classes(train.labels)) throw TrainingError("degenerate labels");
    const auto start = std::chrono::steady_clock::now();

    BaselineResult out;
    BaselineModel& m = out.model;
    m.seed = hyper.seed;
    std::mt19937_64 rng(hyper.seed);
    for (auto& w : m.weights) w = (static_cast<double>(rng() >> 11) * 0x1.0p-53 - 0.5) * 0.02;

    const double n = static_cast<double>(train.features.size());
    out.report.initial_train_loss = dataset_loss(m, train);
    for (int epoch = 0; epoch < hyper.epochs; ++epoch) {
        std::array<double, FeatureVector::kArity> gw{};
        double gb = 0.0;
        for (std::size_t i = 0; i < train.features.size(); ++i) {
            const double err = sigmoid(logit_of(m, train.features[i])) - train.labels[i];
            for (std::size_t k = 0; k < FeatureVector::kArity; ++k) gw[k] += err * train.features[i].values[k];
            gb += err;
        }
        for (std::size_t k = 0; k < FeatureVector::kArity; ++k) m.weights[k] -= hyper.lr * gw[k] / n;
        m.bias -= hyper.lr * gb / n;
        const double loss = dataset_loss(m, train);
        if (!std::isfinite(loss)) throw TrainingError("train_baseline: non-finite loss at epoch " + std::to_string(epoch + 1));
        out.report.train_loss.push_back(loss);
        if (validation) out.report.validation_loss.push_back(dataset_loss(m, *validation));
    }
    // Stored as float32 on disk.
    for (auto& w : m.weights) w = static_cast<float>(w);
    m.bias = static_cast<float>(m.bias);
    m.trained = true;

    out.report.epochs = hyper.epochs;
    const auto train_scores = predictions(m, train);
    out.report.train_auc = roc_curve(train_scores, train.labels).auc;
    if (validation && has_both_classes(validation->labels)) {
        out.report.validation_auc = roc_curve(predictions(m, *validation), validation->labels).auc;
    }
    out.report.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return out;
}

double predict_baseline(const BaselineModel& model, const FeatureVector& f) { return sigmoid(logit_of(model, f)); }

}  // namespace p3
