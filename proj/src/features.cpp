#include <algorithm>
#include <set>

#include "p3/model.hpp"

namespace p3 {

using nlohmann::json;

FeatureVector extract_features(const P3Moment& moment) {
    FeatureVector f;
    f.values = {moment.origin.x / kPitchLength, moment.origin.y / kPitchWidth, moment.under_pressure ? 1.0 : 0.0};
    return f;
}

SplitPolicy::Split SplitPolicy::split() const {
    if (!(train_fraction > 0.0 && train_fraction <= 1.0)) throw std::invalid_argument("split: train fraction must be in (0,1]");
    const std::size_t n = matches.size();
    auto n_train = static_cast<std::size_t>(train_fraction * static_cast<double>(n) + 1e-9);
    if (n >= 2) n_train = std::clamp<std::size_t>(n_train, 1, n - 1);
    else n_train = n;
    Split s;
    s.train.assign(matches.begin(), matches.begin() + static_cast<std::ptrdiff_t>(n_train));
    s.validation.assign(matches.begin() + static_cast<std::ptrdiff_t>(n_train), matches.end());
    assert_disjoint(s);
    return s;
}

void assert_disjoint(const SplitPolicy::Split& split) {
    const std::set<std::string> train(split.train.begin(), split.train.end());
    for (const auto& m : split.validation) {
        if (train.contains(m)) throw std::logic_error("split: match " + m + " is in both training and validation");
    }
}

json to_json(const TrainReport& r, bool include_wall_clock) {
    json j{{"train_loss", r.train_loss},
           {"validation_loss", r.validation_loss},
           {"initial_train_loss", r.initial_train_loss},
           {"epochs", r.epochs},
           {"train_auc", r.train_auc ? json(*r.train_auc) : json()},
           {"validation_auc", r.validation_auc ? json(*r.validation_auc) : json()}};
    if (include_wall_clock) j["wall_seconds"] = r.wall_seconds;
    return j;
}

Tensor image_to_tensor(const RasterImage& image) {
    Tensor t(Shape{3, image.height, image.width});
    for (int y = 0; y < image.height; ++y) {
        for (int x = 0; x < image.width; ++x) {
            const Rgb c = image.at(y, x);
            for (int k = 0; k < 3; ++k) t.at(k, y, x) = c[k] / 127.5 - 1.0;
        }
    }
    return t;
}

Tensor model_input(const CnnModel& model, const RasterImage& rendered) {
    const Shape in = model.architecture().input;
    if (in.channels != 3) throw std::invalid_argument("model_input: network must take 3 input channels");
    return image_to_tensor(resample(rendered, in.width, in.height));
}

double score_moment(const CnnModel& model, const P3Moment& moment, const RenderConfig& render) {
    return model.forward(model_input(model, render_moment(moment, render)));
}

}  // namespace p3
