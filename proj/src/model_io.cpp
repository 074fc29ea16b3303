#include <bit>
#include <cstring>

#include "p3/hashing.hpp"
#include "p3/model.hpp"

namespace p3 {

using nlohmann::json;

namespace {

void append_floats(std::string& out, std::span<const double> values) {
    for (double v : values) {
        const auto bits = std::bit_cast<std::uint32_t>(static_cast<float>(v));
        for (int k = 0; k < 4; ++k) out.push_back(static_cast<char>((bits >> (8 * k)) & 0xFF));
    }
}

std::vector<double> read_floats(std::string_view payload) {
    std::vector<double> values(payload.size() / 4);
    for (std::size_t i = 0; i < values.size(); ++i) {
        std::uint32_t bits = 0;
        for (int k = 0; k < 4; ++k) bits |= static_cast<std::uint32_t>(static_cast<unsigned char>(payload[i * 4 + k])) << (8 * k);
        values[i] = std::bit_cast<float>(bits);
    }
    return values;
}

std::string with_header(json header, std::span<const double> params) {
    header["format"] = "p3m";
    header["version"] = kModelFormatVersion;
    header["param_count"] = params.size();
    header["payload_bytes"] = params.size() * 4;
    std::string out = header.dump();
    out.push_back('\n');
    append_floats(out, params);
    return out;
}

}  // namespace

std::string serialize_model(const CnnModel& model) {
    return with_header({{"kind", "cnn"}, {"architecture", model.architecture().to_json()}, {"seed", model.seed()}},
                       model.parameters());
}

std::string serialize_model(const BaselineModel& model) {
    std::vector<double> params(model.weights.begin(), model.weights.end());
    params.push_back(model.bias);
    return with_header({{"kind", "baseline"},
                        {"features", {"x", "y", "under_pressure"}},
                        {"seed", model.seed},
                        {"trained", model.trained}},
                       params);
}

AnyModel deserialize_model(std::string_view bytes) {
    const auto newline = bytes.find('\n');
    if (newline == std::string_view::npos) throw ModelFormatError("model file: missing header terminator");
    json header;
    try {
        header = json::parse(bytes.substr(0, newline));
    } catch (const json::parse_error& e) {
        throw ModelFormatError(std::string("model file: bad header: ") + e.what());
    }
    if (header.value("format", "") != "p3m") throw ModelFormatError("model file: not a p3m file");
    if (header.value("version", -1) != kModelFormatVersion) {
        throw ModelFormatError("model file: version mismatch (expected " + std::to_string(kModelFormatVersion) + ")");
    }
    const std::string_view payload = bytes.substr(newline + 1);
    const auto expected = header.at("param_count").get<std::size_t>() * 4;
    if (payload.size() < expected) throw ModelFormatError("truncated payload");
    if (payload.size() != expected) throw ModelFormatError("model file: payload length mismatch");
    const auto params = read_floats(payload);

    const auto kind = header.at("kind").get<std::string>();
    if (kind == "cnn") {
        CnnModel m = CnnModel::build(Architecture::from_json(header.at("architecture")), header.at("seed").get<std::uint64_t>());
        if (m.parameter_count() != params.size()) throw ModelFormatError("model file: parameter count does not match architecture");
        std::copy(params.begin(), params.end(), m.parameters().begin());
        return m;
    }
    if (kind == "baseline") {
        if (params.size() != FeatureVector::kArity + 1) throw ModelFormatError("model file: baseline needs 4 parameters");
        BaselineModel m;
        std::copy_n(params.begin(), FeatureVector::kArity, m.weights.begin());
        m.bias = params.back();
        m.seed = header.at("seed").get<std::uint64_t>();
        m.trained = header.value("trained", true);
        return m;
    }
    throw ModelFormatError("model file: unknown kind " + kind);
}

void save_model(const std::filesystem::path& path, const CnnModel& model) { write_file(path, serialize_model(model)); }

void save_model(const std::filesystem::path& path, const BaselineModel& model) { write_file(path, serialize_model(model)); }

AnyModel load_model(const std::filesystem::path& path) { return deserialize_model(read_file(path)); }

}  // namespace p3
