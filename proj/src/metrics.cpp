#include "p3/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace p3 {

using nlohmann::json;

namespace {

void check_sizes(std::span<const double> scores, std::span<const int> labels) {
    if (scores.size() != labels.size()) throw MetricsError("scores and labels differ in length");
}

}  // namespace

RocCurve roc_curve(std::span<const double> scores, std::span<const int> labels) {
    check_sizes(scores, labels);
    const auto positives = static_cast<std::size_t>(std::count_if(labels.begin(), labels.end(), [](int l) { return l != 0; }));
    const std::size_t negatives = labels.size() - positives;
    if (positives == 0 || negatives == 0) throw MetricsError("roc_curve needs both classes");

    std::vector<std::size_t> order(scores.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });

    RocCurve curve;
    curve.points.push_back({0.0, 0.0, std::numeric_limits<double>::infinity()});
    std::size_t tp = 0, fp = 0;
    double area2 = 0.0;  // twice the area, in count units
    std::size_t prev_tp = 0, prev_fp = 0;
    for (std::size_t i = 0; i < order.size();) {
        const double s = scores[order[i]];
        while (i < order.size() && scores[order[i]] == s) {
            if (labels[order[i]] != 0) ++tp;
            else ++fp;
            ++i;
        }
        area2 += static_cast<double>(fp - prev_fp) * static_cast<double>(tp + prev_tp);
        prev_tp = tp;
        prev_fp = fp;
        curve.points.push_back({static_cast<double>(fp) / negatives, static_cast<double>(tp) / positives, s});
    }
    curve.auc = area2 / (2.0 * static_cast<double>(positives) * static_cast<double>(negatives));
    return curve;
}

double select_threshold(const RocCurve& curve) {
    if (curve.points.empty()) throw MetricsError("select_threshold: empty curve");
    double best_d = std::numeric_limits<double>::infinity();
    double best_t = curve.points.front().threshold;
    for (const auto& p : curve.points) {
        const double d = std::hypot(p.fpr, 1.0 - p.tpr);
        if (d < best_d || (d == best_d && p.threshold > best_t)) {
            best_d = d;
            best_t = p.threshold;
        }
    }
    return best_t;
}

double ConfusionMatrix::tpr() const { return tp + fn == 0 ? 0.0 : static_cast<double>(tp) / static_cast<double>(tp + fn); }

double ConfusionMatrix::fpr() const { return fp + tn == 0 ? 0.0 : static_cast<double>(fp) / static_cast<double>(fp + tn); }

std::optional<double> ConfusionMatrix::precision() const {
    if (tp + fp == 0) return std::nullopt;
    return static_cast<double>(tp) / static_cast<double>(tp + fp);
}

double ConfusionMatrix::positive_share() const {
    return total() == 0 ? 0.0 : static_cast<double>(tp + fn) / static_cast<double>(total());
}

ConfusionMatrix confusion(std::span<const double> scores, std::span<const int> labels, double threshold) {
    check_sizes(scores, labels);
    ConfusionMatrix m;
    for (std::size_t i = 0; i < scores.size(); ++i) {
        const bool predicted = scores[i] >= threshold;
        const bool actual = labels[i] != 0;
        if (predicted && actual) ++m.tp;
        else if (predicted) ++m.fp;
        else if (actual) ++m.fn;
        else ++m.tn;
    }
    return m;
}

double median(std::span<const double> values) {
    if (values.empty()) throw MetricsError("median of empty set");
    std::vector<double> v(values.begin(), values.end());
    const std::size_t mid = v.size() / 2;
    std::nth_element(v.begin(), v.begin() + mid, v.end());
    const double upper = v[mid];
    if (v.size() % 2 == 1) return upper;
    const double lower = *std::max_element(v.begin(), v.begin() + mid);
    return (lower + upper) / 2.0;
}

ScoreHistogram score_distribution(std::span<const double> scores, double bin_width) {
    if (scores.empty()) throw MetricsError("score_distribution: no scores");
    if (!(bin_width > 0.0 && bin_width <= 1.0)) throw MetricsError("score_distribution: bin width must be in (0,1]");
    ScoreHistogram h;
    h.bin_width = bin_width;
    const auto bins = static_cast<std::size_t>(std::ceil(1.0 / bin_width - 1e-9));
    h.counts.assign(bins, 0);
    for (double s : scores) {
        auto b = static_cast<std::size_t>(std::clamp(s, 0.0, 1.0) / bin_width + 1e-9);
        h.counts[std::min(b, bins - 1)]++;
    }
    h.median = median(scores);
    return h;
}

std::vector<CalibrationBin> calibration(std::span<const double> scores, std::span<const int> labels, std::size_t n_bins) {
    check_sizes(scores, labels);
    if (n_bins == 0 || scores.size() < n_bins) throw MetricsError("calibration: need at least n_bins samples");
    std::vector<std::size_t> order(scores.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });

    std::vector<CalibrationBin> bins;
    const std::size_t n = scores.size();
    for (std::size_t b = 0; b < n_bins; ++b) {
        const std::size_t lo = b * n / n_bins;
        const std::size_t hi = (b + 1) * n / n_bins;
        CalibrationBin bin;
        bin.index = b;
        bin.count = hi - lo;
        double sum_pred = 0.0, sum_pos = 0.0;
        for (std::size_t k = lo; k < hi; ++k) {
            sum_pred += scores[order[k]];
            sum_pos += labels[order[k]] != 0 ? 1.0 : 0.0;
        }
        bin.mean_predicted = sum_pred / static_cast<double>(bin.count);
        bin.observed_rate = sum_pos / static_cast<double>(bin.count);
        bins.push_back(bin);
    }
    return bins;
}

json to_json(const RocCurve& c) {
    json pts = json::array();
    for (const auto& p : c.points) {
        pts.push_back({{"fpr", p.fpr}, {"tpr", p.tpr}, {"threshold", std::isinf(p.threshold) ? json() : json(p.threshold)}});
    }
    return {{"auc", c.auc}, {"points", std::move(pts)}};
}

json to_json(const ConfusionMatrix& m, double threshold) {
    const auto precision = m.precision();
    return {{"threshold", threshold},
            {"tp", m.tp},
            {"fp", m.fp},
            {"tn", m.tn},
            {"fn", m.fn},
            {"total", m.total()},
            {"tpr", m.tpr()},
            {"fpr", m.fpr()},
            {"precision", precision ? json(*precision) : json()}};
}

json to_json(const ScoreHistogram& h) {
    return {{"bin_width", h.bin_width}, {"counts", h.counts}, {"median", h.median}};
}

json to_json(const std::vector<CalibrationBin>& bins) {
    json arr = json::array();
    for (const auto& b : bins) {
        arr.push_back({{"bin", b.index}, {"count", b.count}, {"mean_predicted", b.mean_predicted}, {"observed_rate", b.observed_rate}});
    }
    return {{"bins", std::move(arr)}};
}

}  // namespace p3
