#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <sstream>

#include "p3/model.hpp"

namespace p3 {

using nlohmann::json;

namespace {

std::string_view kind_name(LayerKind k) {
    switch (k) {
        case LayerKind::conv3x3: return "conv3x3";
        case LayerKind::relu: return "relu";
        case LayerKind::maxpool2: return "maxpool2";
        case LayerKind::global_avg_pool: return "global_avg_pool";
        case LayerKind::dense: return "dense";
    }
    return "?";
}

LayerKind kind_from(std::string_view s) {
    if (s == "conv3x3") return LayerKind::conv3x3;
    if (s == "relu") return LayerKind::relu;
    if (s == "maxpool2") return LayerKind::maxpool2;
    if (s == "global_avg_pool") return LayerKind::global_avg_pool;
    if (s == "dense") return LayerKind::dense;
    throw std::invalid_argument("architecture: unknown layer kind '" + std::string(s) + "'");
}

double uniform01(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

// Adds w * in_channel (shifted by the kernel offset) into out_channel.
void conv_tap(const double* in, double* out, int h, int w, int ky, int kx, double weight) {
    const int dy = ky - 1;
    const int dx = kx - 1;
    const int x0 = std::max(0, -dx);
    const int x1 = std::min(w, w - dx);
    for (int y = std::max(0, -dy); y < std::min(h, h - dy); ++y) {
        const double* src = in + static_cast<std::ptrdiff_t>(y + dy) * w + dx;
        double* dst = out + static_cast<std::ptrdiff_t>(y) * w;
        for (int x = x0; x < x1; ++x) dst[x] += weight * src[x];
    }
}

// Returns sum over the valid window of grad_out * shifted input.
double conv_tap_dot(const double* in, const double* grad_out, int h, int w, int ky, int kx) {
    const int dy = ky - 1;
    const int dx = kx - 1;
    const int x0 = std::max(0, -dx);
    const int x1 = std::min(w, w - dx);
    double acc = 0.0;
    for (int y = std::max(0, -dy); y < std::min(h, h - dy); ++y) {
        const double* src = in + static_cast<std::ptrdiff_t>(y + dy) * w + dx;
        const double* g = grad_out + static_cast<std::ptrdiff_t>(y) * w;
        for (int x = x0; x < x1; ++x) acc += g[x] * src[x];
    }
    return acc;
}

// grad_in (shifted) += w * grad_out.
void conv_tap_back(double* grad_in, const double* grad_out, int h, int w, int ky, int kx, double weight) {
    const int dy = ky - 1;
    const int dx = kx - 1;
    const int x0 = std::max(0, -dx);
    const int x1 = std::min(w, w - dx);
    for (int y = std::max(0, -dy); y < std::min(h, h - dy); ++y) {
        double* dst = grad_in + static_cast<std::ptrdiff_t>(y + dy) * w + dx;
        const double* g = grad_out + static_cast<std::ptrdiff_t>(y) * w;
        for (int x = x0; x < x1; ++x) dst[x] += weight * g[x];
    }
}

bool has_both_classes(const std::vector<int>& labels) {
    bool pos = false, neg = false;
    for (int l : labels) (l != 0 ? pos : neg) = true;
    return pos && neg;
}

}  // namespace

double sigmoid(double z) {
    const double p = z >= 0 ? 1.0 / (1.0 + std::exp(-z)) : std::exp(z) / (1.0 + std::exp(z));
    // Keep probabilities strictly inside (0,1).
    return std::clamp(p, std::numeric_limits<double>::min(), std::nextafter(1.0, 0.0));
}

double bce_from_logit(double logit, int label) {
    const double y = label != 0 ? 1.0 : 0.0;
    return std::max(logit, 0.0) - logit * y + std::log1p(std::exp(-std::abs(logit)));
}

// ---------------------------------------------------------------------------

Architecture Architecture::default_p3() {
    Architecture a;
    a.input = {3, 64, 64};
    for (int ch : {8, 16, 32}) {
        a.layers.push_back({LayerKind::conv3x3, ch});
        a.layers.push_back({LayerKind::relu, 0});
        a.layers.push_back({LayerKind::maxpool2, 0});
    }
    a.layers.push_back({LayerKind::global_avg_pool, 0});
    a.layers.push_back({LayerKind::dense, 1});
    return a;
}

Architecture Architecture::affine(Shape input) {
    Architecture a;
    a.input = input;
    a.layers.push_back({LayerKind::dense, 1});
    return a;
}

json Architecture::to_json() const {
    json layers_j = json::array();
    for (const auto& l : layers) {
        json lj{{"type", kind_name(l.kind)}};
        if (l.kind == LayerKind::conv3x3 || l.kind == LayerKind::dense) lj["out"] = l.out;
        layers_j.push_back(std::move(lj));
    }
    return {{"input", {input.channels, input.height, input.width}}, {"layers", std::move(layers_j)}};
}

Architecture Architecture::from_json(const json& j) {
    Architecture a;
    try {
        const auto& in = j.at("input");
        a.input = {in.at(0).get<int>(), in.at(1).get<int>(), in.at(2).get<int>()};
        for (const auto& lj : j.at("layers")) {
            LayerSpec s;
            s.kind = kind_from(lj.at("type").get<std::string>());
            if (s.kind == LayerKind::conv3x3 || s.kind == LayerKind::dense) s.out = lj.at("out").get<int>();
            a.layers.push_back(s);
        }
    } catch (const json::exception& e) {
        throw std::invalid_argument(std::string("architecture: ") + e.what());
    }
    return a;
}

// ---------------------------------------------------------------------------

CnnModel CnnModel::build(const Architecture& arch, std::uint64_t seed) {
    if (arch.input.channels < 1 || arch.input.height < 1 || arch.input.width < 1) {
        throw std::invalid_argument("architecture: input dimensions must be positive");
    }
    if (arch.layers.empty() || arch.layers.back().kind != LayerKind::dense || arch.layers.back().out != 1) {
        throw std::invalid_argument("architecture: last layer must be dense with one output");
    }
    CnnModel m;
    m.arch_ = arch;
    m.seed_ = seed;
    Shape shape = arch.input;
    std::size_t offset = 0;
    for (const auto& spec : arch.layers) {
        LayerInfo info;
        info.spec = spec;
        info.in = shape;
        switch (spec.kind) {
            case LayerKind::conv3x3:
                if (spec.out < 1) throw std::invalid_argument("architecture: conv3x3 needs out >= 1");
                info.out = {spec.out, shape.height, shape.width};
                info.weight_count = static_cast<std::size_t>(spec.out) * shape.channels * 9;
                info.bias_count = static_cast<std::size_t>(spec.out);
                break;
            case LayerKind::relu: info.out = shape; break;
            case LayerKind::maxpool2:
                if (shape.height < 2 || shape.width < 2) throw std::invalid_argument("architecture: maxpool2 on a map smaller than 2x2");
                info.out = {shape.channels, shape.height / 2, shape.width / 2};
                break;
            case LayerKind::global_avg_pool: info.out = {shape.channels, 1, 1}; break;
            case LayerKind::dense:
                if (spec.out < 1) throw std::invalid_argument("architecture: dense needs out >= 1");
                info.out = {spec.out, 1, 1};
                info.weight_count = static_cast<std::size_t>(spec.out) * shape.size();
                info.bias_count = static_cast<std::size_t>(spec.out);
                break;
        }
        info.weight_offset = offset;
        info.bias_offset = offset + info.weight_count;
        offset += info.weight_count + info.bias_count;
        shape = info.out;
        m.layers_.push_back(info);
    }

    m.params_.assign(offset, 0.0);
    std::mt19937_64 rng(seed);
    for (const auto& info : m.layers_) {
        if (info.weight_count == 0) continue;
        const double fan_in = static_cast<double>(info.weight_count) / static_cast<double>(info.bias_count);
        const double bound = 1.0 / std::sqrt(fan_in);
        for (std::size_t k = 0; k < info.weight_count + info.bias_count; ++k) {
            m.params_[info.weight_offset + k] = (2.0 * uniform01(rng) - 1.0) * bound;
        }
    }
    m.quantize_to_float();
    return m;
}

void CnnModel::zero_final_layer() {
    const auto& last = layers_.back();
    std::fill_n(params_.begin() + static_cast<std::ptrdiff_t>(last.weight_offset), last.weight_count + last.bias_count, 0.0);
}

void CnnModel::quantize_to_float() {
    for (auto& p : params_) p = static_cast<double>(static_cast<float>(p));
}

void CnnModel::forward_layer(std::size_t index, const Tensor& in, Tensor& out, std::vector<std::int32_t>* argmax) const {
    const LayerInfo& L = layers_[index];
    out = Tensor(L.out);
    switch (L.spec.kind) {
        case LayerKind::conv3x3:
            for (int o = 0; o < L.out.channels; ++o) recompute_channel(index, in, out, o);
            break;
        case LayerKind::relu:
            for (std::size_t i = 0; i < in.data.size(); ++i) out.data[i] = in.data[i] > 0.0 ? in.data[i] : 0.0;
            break;
        case LayerKind::maxpool2: {
            if (argmax) argmax->assign(L.out.size(), 0);
            std::size_t k = 0;
            for (int c = 0; c < L.out.channels; ++c) {
                for (int y = 0; y < L.out.height; ++y) {
                    for (int x = 0; x < L.out.width; ++x, ++k) {
                        std::size_t best = (static_cast<std::size_t>(c) * L.in.height + 2 * y) * L.in.width + 2 * x;
                        for (int dy = 0; dy < 2; ++dy) {
                            for (int dx = 0; dx < 2; ++dx) {
                                const std::size_t idx = (static_cast<std::size_t>(c) * L.in.height + 2 * y + dy) * L.in.width + 2 * x + dx;
                                if (in.data[idx] > in.data[best]) best = idx;
                            }
                        }
                        out.data[k] = in.data[best];
                        if (argmax) (*argmax)[k] = static_cast<std::int32_t>(best);
                    }
                }
            }
            break;
        }
        case LayerKind::global_avg_pool: {
            const std::size_t plane = static_cast<std::size_t>(L.in.height) * L.in.width;
            for (int c = 0; c < L.in.channels; ++c) {
                const double* p = in.data.data() + c * plane;
                out.data[c] = std::accumulate(p, p + plane, 0.0) / static_cast<double>(plane);
            }
            break;
        }
        case LayerKind::dense: {
            const std::size_t n = L.in.size();
            const double* w = params_.data() + L.weight_offset;
            const double* b = params_.data() + L.bias_offset;
            for (int o = 0; o < L.out.channels; ++o) {
                // Neumaier summation keeps long rows accurate to a few ulps.
                double acc = b[o], carry = 0.0;
                const double* row = w + static_cast<std::size_t>(o) * n;
                for (std::size_t k = 0; k < n; ++k) {
                    const double term = row[k] * in.data[k];
                    const double t = acc + term;
                    carry += std::abs(acc) >= std::abs(term) ? (acc - t) + term : (term - t) + acc;
                    acc = t;
                }
                out.data[o] = acc + carry;
            }
            break;
        }
    }
}

void CnnModel::recompute_channel(std::size_t index, const Tensor& in, Tensor& out, int o) const {
    const LayerInfo& L = layers_[index];
    const int h = L.in.height, w = L.in.width;
    const std::size_t plane = static_cast<std::size_t>(h) * w;
    double* dst = out.data.data() + o * plane;
    std::fill(dst, dst + plane, params_[L.bias_offset + o]);
    const double* weights = params_.data() + L.weight_offset + static_cast<std::size_t>(o) * L.in.channels * 9;
    for (int c = 0; c < L.in.channels; ++c) {
        const double* src = in.data.data() + c * plane;
        for (int ky = 0; ky < 3; ++ky) {
            for (int kx = 0; kx < 3; ++kx) conv_tap(src, dst, h, w, ky, kx, weights[c * 9 + ky * 3 + kx]);
        }
    }
}

double CnnModel::run_from(std::size_t first_layer, Tensor act) const {
    Tensor next;
    for (std::size_t i = first_layer; i < layers_.size(); ++i) {
        forward_layer(i, act, next, nullptr);
        std::swap(act, next);
    }
    return act.data[0];
}

double CnnModel::logit(const Tensor& input) const {
    if (!(input.shape == arch_.input)) throw std::invalid_argument("cnn_forward: input shape does not match the network");
    return run_from(0, input);
}

double CnnModel::forward(const Tensor& input) const { return sigmoid(logit(input)); }

struct CnnModel::Activations {
    std::vector<Tensor> acts;  // acts[i] is the input of layer i; acts.back() is the logit
    std::vector<std::vector<std::int32_t>> argmax;
};

double CnnModel::accumulate_gradient(const Tensor& input, int label, std::span<double> grad) const {
    if (!(input.shape == arch_.input)) throw std::invalid_argument("cnn: input shape does not match the network");
    if (grad.size() != params_.size()) throw std::invalid_argument("cnn: gradient buffer has the wrong size");
    const std::size_t n_layers = layers_.size();
    std::vector<Tensor> acts(n_layers + 1);
    std::vector<std::vector<std::int32_t>> argmax(n_layers);
    acts[0] = input;
    for (std::size_t i = 0; i < n_layers; ++i) forward_layer(i, acts[i], acts[i + 1], &argmax[i]);

    const double z = acts.back().data[0];
    const double loss = bce_from_logit(z, label);
    Tensor delta(acts.back().shape);
    delta.data[0] = sigmoid(z) - (label != 0 ? 1.0 : 0.0);

    for (std::size_t i = n_layers; i-- > 0;) {
        const LayerInfo& L = layers_[i];
        const Tensor& in = acts[i];
        const bool need_input_grad = i > 0;
        Tensor d_in(L.in);
        switch (L.spec.kind) {
            case LayerKind::conv3x3: {
                const int h = L.in.height, w = L.in.width;
                const std::size_t plane = static_cast<std::size_t>(h) * w;
                for (int o = 0; o < L.out.channels; ++o) {
                    const double* g = delta.data.data() + o * plane;
                    grad[L.bias_offset + o] += std::accumulate(g, g + plane, 0.0);
                    const std::size_t wbase = L.weight_offset + static_cast<std::size_t>(o) * L.in.channels * 9;
                    for (int c = 0; c < L.in.channels; ++c) {
                        const double* src = in.data.data() + c * plane;
                        double* gin = d_in.data.data() + c * plane;
                        for (int ky = 0; ky < 3; ++ky) {
                            for (int kx = 0; kx < 3; ++kx) {
                                const std::size_t widx = wbase + c * 9 + ky * 3 + kx;
                                grad[widx] += conv_tap_dot(src, g, h, w, ky, kx);
                                if (need_input_grad) conv_tap_back(gin, g, h, w, ky, kx, params_[widx]);
                            }
                        }
                    }
                }
                break;
            }
            case LayerKind::relu:
                for (std::size_t k = 0; k < in.data.size(); ++k) d_in.data[k] = in.data[k] > 0.0 ? delta.data[k] : 0.0;
                break;
            case LayerKind::maxpool2:
                for (std::size_t k = 0; k < delta.data.size(); ++k) d_in.data[static_cast<std::size_t>(argmax[i][k])] += delta.data[k];
                break;
            case LayerKind::global_avg_pool: {
                const std::size_t plane = static_cast<std::size_t>(L.in.height) * L.in.width;
                for (int c = 0; c < L.in.channels; ++c) {
                    const double g = delta.data[c] / static_cast<double>(plane);
                    std::fill_n(d_in.data.begin() + static_cast<std::ptrdiff_t>(c * plane), plane, g);
                }
                break;
            }
            case LayerKind::dense: {
                const std::size_t n = L.in.size();
                for (int o = 0; o < L.out.channels; ++o) {
                    const double g = delta.data[o];
                    grad[L.bias_offset + o] += g;
                    const std::size_t row = L.weight_offset + static_cast<std::size_t>(o) * n;
                    for (std::size_t k = 0; k < n; ++k) {
                        grad[row + k] += g * in.data[k];
                        d_in.data[k] += params_[row + k] * g;
                    }
                }
                break;
            }
        }
        delta = std::move(d_in);
    }
    return loss;
}

// ---------------------------------------------------------------------------

double mean_bce(const CnnModel& model, const LabeledImages& data) {
    double loss = 0.0;
    for (std::size_t i = 0; i < data.images.size(); ++i) loss += bce_from_logit(model.logit(data.images[i]), data.labels[i]);
    return loss / static_cast<double>(data.images.size());
}

TrainReport train_cnn(CnnModel& model, const LabeledImages& train, const CnnTrainConfig& cfg, const LabeledImages* validation) {
    if (train.images.empty() || train.images.size() != train.labels.size()) throw TrainingError("train_cnn: empty or misaligned dataset");
    if (!has_both_classes(train.labels)) throw TrainingError("degenerate labels");
    if (cfg.batch_size < 1 || cfg.epochs < 0) throw TrainingError("train_cnn: batch_size must be >= 1 and epochs >= 0");
    const auto start = std::chrono::steady_clock::now();

    TrainReport report;
    report.initial_train_loss = mean_bce(model, train);
    std::vector<double> velocity(model.parameter_count(), 0.0);
    std::vector<double> grad(model.parameter_count(), 0.0);
    std::vector<std::size_t> order(train.images.size());
    std::iota(order.begin(), order.end(), 0);
    std::mt19937_64 rng(cfg.seed);
    auto params = model.parameters();

    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng() % i]);
        for (std::size_t b = 0; b < order.size(); b += static_cast<std::size_t>(cfg.batch_size)) {
            const std::size_t e = std::min(order.size(), b + static_cast<std::size_t>(cfg.batch_size));
            std::fill(grad.begin(), grad.end(), 0.0);
            double batch_loss = 0.0;
            for (std::size_t k = b; k < e; ++k) batch_loss += model.accumulate_gradient(train.images[order[k]], train.labels[order[k]], grad);
            if (!std::isfinite(batch_loss)) {
                std::ostringstream msg;
                msg << "train_cnn: non-finite loss in epoch " << epoch + 1 << " (lr " << cfg.lr << " may be too high)";
                throw TrainingError(msg.str());
            }
            const double scale = 1.0 / static_cast<double>(e - b);
            for (std::size_t p = 0; p < params.size(); ++p) {
                velocity[p] = cfg.momentum * velocity[p] - cfg.lr * grad[p] * scale;
                params[p] += velocity[p];
            }
        }
        const double loss = mean_bce(model, train);
        if (!std::isfinite(loss)) {
            std::ostringstream msg;
            msg << "train_cnn: non-finite training loss after epoch " << epoch + 1 << " (lr " << cfg.lr << " may be too high)";
            throw TrainingError(msg.str());
        }
        report.train_loss.push_back(loss);
        if (validation) report.validation_loss.push_back(mean_bce(model, *validation));
        report.epochs = epoch + 1;
        if (cfg.stop_below_train_loss && loss < *cfg.stop_below_train_loss) break;
    }
    model.quantize_to_float();
    if (!report.train_loss.empty()) {
        report.train_loss.back() = mean_bce(model, train);
        if (validation) report.validation_loss.back() = mean_bce(model, *validation);
    }
    report.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return report;
}

// ---------------------------------------------------------------------------

std::vector<double> batch_gradient(const CnnModel& model, std::span<const Tensor> batch, std::span<const int> labels) {
    std::vector<double> grad(model.parameter_count(), 0.0);
    for (std::size_t i = 0; i < batch.size(); ++i) model.accumulate_gradient(batch[i], labels[i], grad);
    for (auto& g : grad) g /= static_cast<double>(batch.size());
    return grad;
}

GradientCheck gradient_check_detail(const CnnModel& model, std::span<const Tensor> batch, std::span<const int> labels) {
    if (batch.empty() || batch.size() != labels.size()) throw std::invalid_argument("gradient_check: empty or misaligned batch");
    constexpr double h = 1e-5;
    const std::vector<double> analytic = batch_gradient(model, batch, labels);

    CnnModel probe = model;
    const std::size_t n_layers = probe.layers_.size();
    // Cache every example's activations; a perturbation in layer L only
    // needs layer L (or one channel of it) and what follows.
    std::vector<std::vector<Tensor>> acts(batch.size(), std::vector<Tensor>(n_layers + 1));
    std::vector<std::vector<std::vector<std::int32_t>>> winners(batch.size(), std::vector<std::vector<std::int32_t>>(n_layers));
    for (std::size_t b = 0; b < batch.size(); ++b) {
        acts[b][0] = batch[b];
        for (std::size_t i = 0; i < n_layers; ++i) probe.forward_layer(i, acts[b][i], acts[b][i + 1], &winners[b][i]);
    }

    std::vector<std::int32_t> argmax;
    // Mean loss with one parameter moved. Relu masks and pooling winners stay
    // at the unperturbed pattern, so the quotient differentiates the smooth
    // piece the analytic gradient belongs to; `kinked` notes when the free
    // network would have switched pieces.
    auto batch_loss = [&](std::size_t layer, std::size_t param, bool& kinked) {
        const auto& L = probe.layers_[layer];
        double loss = 0.0;
        for (std::size_t b = 0; b < batch.size(); ++b) {
            Tensor act = acts[b][layer + 1];
            if (L.spec.kind == LayerKind::conv3x3) {
                const std::size_t local = param < L.bias_offset ? (param - L.weight_offset) / (L.in.channels * 9) : param - L.bias_offset;
                probe.recompute_channel(layer, acts[b][layer], act, static_cast<int>(local));
            } else {
                probe.forward_layer(layer, acts[b][layer], act, nullptr);
            }
            Tensor next;
            for (std::size_t i = layer + 1; i < n_layers; ++i) {
                const auto& base = acts[b][i].data;
                switch (probe.layers_[i].spec.kind) {
                    case LayerKind::relu:
                        next = Tensor(act.shape);
                        for (std::size_t k = 0; k < base.size(); ++k) {
                            kinked = kinked || (act.data[k] > 0.0) != (base[k] > 0.0);
                            next.data[k] = base[k] > 0.0 ? act.data[k] : 0.0;
                        }
                        break;
                    case LayerKind::maxpool2: {
                        probe.forward_layer(i, act, next, &argmax);
                        const auto& win = winners[b][i];
                        kinked = kinked || argmax != win;
                        for (std::size_t k = 0; k < win.size(); ++k) next.data[k] = act.data[static_cast<std::size_t>(win[k])];
                        break;
                    }
                    default: probe.forward_layer(i, act, next, nullptr); break;
                }
                std::swap(act, next);
            }
            loss += bce_from_logit(act.data[0], labels[b]);
        }
        return loss / static_cast<double>(batch.size());
    };

    GradientCheck out;
    for (std::size_t layer = 0; layer < n_layers; ++layer) {
        const auto& L = probe.layers_[layer];
        const std::size_t end = L.weight_offset + L.weight_count + L.bias_count;
        for (std::size_t p = L.weight_offset; p < end; ++p) {
            bool kinked = false;
            const double saved = probe.params_[p];
            const double hi = saved + h, lo = saved - h;
            probe.params_[p] = hi;
            const double plus = batch_loss(layer, p, kinked);
            probe.params_[p] = lo;
            const double minus = batch_loss(layer, p, kinked);
            probe.params_[p] = saved;
            out.kinked += kinked;
            const double numeric = (plus - minus) / (hi - lo);
            const double err = std::abs(analytic[p] - numeric) / std::max(std::abs(analytic[p]) + std::abs(numeric), 1e-6);
            out.max_relative_error = std::max(out.max_relative_error, err);
            ++out.parameters;
        }
    }
    return out;
}

double gradient_check(const CnnModel& model, std::span<const Tensor> batch, std::span<const int> labels) {
    return gradient_check_detail(model, batch, labels).max_relative_error;
}

}  // namespace p3
