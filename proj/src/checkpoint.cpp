#include "ptlab/checkpoint.hpp"

#include <bit>
#include <cstdint>
#include <fstream>
#include <stdexcept>
#include <vector>

#include "ptlab/digest.hpp"

using nlohmann::json;

namespace ptlab {

namespace {

constexpr const char* kCheckpointFormat = "ptlab-checkpoint-v1";

std::vector<unsigned char> serialize_values(const std::vector<double>& values) {
    std::vector<unsigned char> bytes(values.size() * 8);
    for (size_t i = 0; i < values.size(); ++i) {
        const auto bits = std::bit_cast<uint64_t>(values[i]);
        for (int b = 0; b < 8; ++b) bytes[i * 8 + b] = static_cast<unsigned char>(bits >> (8 * b));
    }
    return bytes;
}

}  // namespace

void save_checkpoint(const ModelParams& params, const std::string& prefix, const json& config) {
    params.validate();
    const auto bytes = serialize_values(params.values);

    json sidecar;
    sidecar["format"] = kCheckpointFormat;
    sidecar["role"] = role_name(params.role);
    sidecar["rng_seed"] = params.rng_seed;
    sidecar["epochs_trained"] = params.epochs_trained;
    sidecar["param_count"] = params.values.size();
    sidecar["param_digest"] = digest_hex(bytes_digest(bytes.data(), bytes.size()));
    sidecar["spec"] = params.spec.to_json();
    sidecar["spec_digest"] = digest_hex(params.spec.digest());
    if (!config.is_null()) sidecar["config"] = config;

    {
        std::ofstream out(prefix + ".bin", std::ios::binary | std::ios::trunc);
        if (!out) throw std::runtime_error("cannot write " + prefix + ".bin");
        out.write(reinterpret_cast<const char*>(bytes.data()),
                  static_cast<std::streamsize>(bytes.size()));
        if (!out) throw std::runtime_error("write failed for " + prefix + ".bin");
    }
    {
        std::ofstream out(prefix + ".json", std::ios::binary | std::ios::trunc);
        if (!out) throw std::runtime_error("cannot write " + prefix + ".json");
        out << sidecar.dump(2) << "\n";
        if (!out) throw std::runtime_error("write failed for " + prefix + ".json");
    }
}

ModelParams load_checkpoint(const std::string& prefix) {
    std::ifstream side(prefix + ".json", std::ios::binary);
    if (!side) throw std::runtime_error("cannot open " + prefix + ".json");
    json sidecar;
    try {
        side >> sidecar;
    } catch (const json::exception& e) {
        throw std::runtime_error("malformed checkpoint sidecar " + prefix + ".json: " + e.what());
    }
    if (sidecar.value("format", "") != kCheckpointFormat) {
        throw std::runtime_error(prefix + ".json is not a " + std::string(kCheckpointFormat) +
                                 " sidecar");
    }

    ModelParams params;
    params.spec = ModelSpec::from_json(sidecar.at("spec"));
    const std::string recorded_spec_digest = sidecar.at("spec_digest").get<std::string>();
    if (digest_hex(params.spec.digest()) != recorded_spec_digest) {
        throw std::runtime_error("checkpoint " + prefix + " refused: spec digest mismatch");
    }
    params.role = role_from_name(sidecar.at("role").get<std::string>());
    params.rng_seed = sidecar.at("rng_seed").get<uint64_t>();
    params.epochs_trained = sidecar.at("epochs_trained").get<int>();
    const size_t count = sidecar.at("param_count").get<size_t>();

    std::ifstream bin(prefix + ".bin", std::ios::binary);
    if (!bin) throw std::runtime_error("cannot open " + prefix + ".bin");
    std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(bin)),
                                     std::istreambuf_iterator<char>());
    if (bytes.size() != count * 8) {
        throw std::runtime_error("checkpoint " + prefix + " refused: " +
                                 std::to_string(bytes.size()) + " parameter bytes, expected " +
                                 std::to_string(count * 8));
    }
    const std::string recorded_digest = sidecar.at("param_digest").get<std::string>();
    if (digest_hex(bytes_digest(bytes.data(), bytes.size())) != recorded_digest) {
        throw std::runtime_error("checkpoint " + prefix + " refused: parameter digest mismatch");
    }

    params.values.resize(count);
    for (size_t i = 0; i < count; ++i) {
        uint64_t bits = 0;
        for (int b = 0; b < 8; ++b) bits |= static_cast<uint64_t>(bytes[i * 8 + b]) << (8 * b);
        params.values[i] = std::bit_cast<double>(bits);
    }
    params.validate();
    return params;
}

}  // namespace ptlab
