#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

#include <nlohmann/json.hpp>

namespace p3 {

class MetricsError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

struct RocPoint {
    double fpr = 0.0;
    double tpr = 0.0;
    double threshold = 0.0;  // +inf for the (0,0) start point
};

struct RocCurve {
    std::vector<RocPoint> points;
    double auc = 0.0;
};

/// Sweep over distinct scores in descending order, one point per distinct
/// score, trapezoid AUC. Throws MetricsError unless both classes occur.
RocCurve roc_curve(std::span<const double> scores, std::span<const int> labels);

/// Threshold of the curve point closest (Euclidean) to fpr = 0, tpr = 1.
/// Ties go to the higher threshold.
double select_threshold(const RocCurve& curve);

struct ConfusionMatrix {
    std::size_t tp = 0;
    std::size_t fp = 0;
    std::size_t tn = 0;
    std::size_t fn = 0;

    std::size_t total() const { return tp + fp + tn + fn; }
    double tpr() const;
    double fpr() const;
    std::optional<double> precision() const;
    double positive_share() const;
};

/// Predicted positive iff score >= threshold.
ConfusionMatrix confusion(std::span<const double> scores, std::span<const int> labels, double threshold);

struct ScoreHistogram {
    double bin_width = 0.05;
    std::vector<std::size_t> counts;  // bins over [0,1]; the last bin is closed
    double median = 0.0;
};

ScoreHistogram score_distribution(std::span<const double> scores, double bin_width = 0.05);

double median(std::span<const double> values);

struct CalibrationBin {
    std::size_t index = 0;
    std::size_t count = 0;
    double mean_predicted = 0.0;
    double observed_rate = 0.0;
};

/// Equal-frequency bins by ascending score (stable on ties); bin sizes
/// differ by at most one. Throws MetricsError when n < n_bins.
std::vector<CalibrationBin> calibration(std::span<const double> scores, std::span<const int> labels,
                                        std::size_t n_bins = 10);

nlohmann::json to_json(const RocCurve& c);
nlohmann::json to_json(const ConfusionMatrix& m, double threshold);
nlohmann::json to_json(const ScoreHistogram& h);
nlohmann::json to_json(const std::vector<CalibrationBin>& bins);

}  // namespace p3
