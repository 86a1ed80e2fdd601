#include "ptlab/model.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>

#include "ptlab/digest.hpp"
#include "ptlab/errors.hpp"
#include "ptlab/rng.hpp"

using nlohmann::json;

namespace ptlab {

namespace {

struct BlockDims {
    int in_h, in_w, in_c;  // activation entering the block
    int out_c;             // conv output channels (conv preserves h, w)
    int pool_h, pool_w;    // floor-halved after 2x2 maxpool
};

std::vector<BlockDims> block_dims(const ModelSpec& spec) {
    std::vector<BlockDims> dims;
    int h = spec.input_height, w = spec.input_width, c = spec.input_channels;
    for (int oc : spec.conv_channels) {
        BlockDims d{h, w, c, oc, h / 2, w / 2};
        dims.push_back(d);
        h = d.pool_h;
        w = d.pool_w;
        c = oc;
    }
    return dims;
}

}  // namespace

void ModelSpec::validate() const {
    if (input_height <= 0 || input_width <= 0 || input_channels <= 0) {
        throw ConfigError("model input shape must be positive, got " +
                          std::to_string(input_height) + "x" + std::to_string(input_width) + "x" +
                          std::to_string(input_channels));
    }
    if (num_classes < 2) {
        throw ConfigError("model needs at least 2 classes, got " + std::to_string(num_classes));
    }
    if (dense_units < 1) {
        throw ConfigError("dense_units must be positive, got " + std::to_string(dense_units));
    }
    int h = input_height, w = input_width;
    for (size_t b = 0; b < conv_channels.size(); ++b) {
        if (conv_channels[b] < 1) {
            throw ConfigError("conv_channels[" + std::to_string(b) + "] must be positive, got " +
                              std::to_string(conv_channels[b]));
        }
        if (h < 2 || w < 2) {
            throw ConfigError("input too small: conv block " + std::to_string(b + 1) +
                              " would pool a " + std::to_string(h) + "x" + std::to_string(w) +
                              " activation below 1x1");
        }
        h /= 2;
        w /= 2;
    }
}

size_t ModelSpec::flat_dim() const {
    const auto dims = block_dims(*this);
    if (dims.empty()) {
        return static_cast<size_t>(input_height) * input_width * input_channels;
    }
    const auto& last = dims.back();
    return static_cast<size_t>(last.pool_h) * last.pool_w * last.out_c;
}

std::vector<GroupInfo> ModelSpec::layer_groups() const {
    std::vector<GroupInfo> groups;
    size_t offset = 0;
    const auto dims = block_dims(*this);
    for (size_t b = 0; b < dims.size(); ++b) {
        const size_t size =
            static_cast<size_t>(dims[b].out_c) * 9 * dims[b].in_c + dims[b].out_c;
        groups.push_back({"conv-block-" + std::to_string(b + 1), offset, size});
        offset += size;
    }
    const size_t dense_size = static_cast<size_t>(dense_units) * flat_dim() + dense_units;
    groups.push_back({"dense-1", offset, dense_size});
    offset += dense_size;
    const size_t head_size = static_cast<size_t>(num_classes) * dense_units + num_classes;
    groups.push_back({"output-head", offset, head_size});
    return groups;
}

size_t ModelSpec::param_count() const {
    size_t total = 0;
    for (const auto& g : layer_groups()) total += g.size;
    return total;
}

json ModelSpec::to_json() const {
    json j;
    j["input_height"] = input_height;
    j["input_width"] = input_width;
    j["input_channels"] = input_channels;
    j["num_classes"] = num_classes;
    j["conv_channels"] = conv_channels;
    j["dense_units"] = dense_units;
    return j;
}

ModelSpec ModelSpec::from_json(const json& j) {
    ModelSpec spec;
    spec.input_height = j.at("input_height").get<int>();
    spec.input_width = j.at("input_width").get<int>();
    spec.input_channels = j.at("input_channels").get<int>();
    spec.num_classes = j.at("num_classes").get<int>();
    spec.conv_channels = j.at("conv_channels").get<std::vector<int>>();
    spec.dense_units = j.at("dense_units").get<int>();
    spec.validate();
    return spec;
}

uint64_t ModelSpec::digest() const {
    const std::string text = to_json().dump();
    return bytes_digest(text.data(), text.size());
}

const char* role_name(Role role) {
    switch (role) {
        case Role::Scratch: return "scratch";
        case Role::Baseline: return "baseline";
        case Role::FrozenProbe: return "frozen-probe";
        case Role::Cleansed: return "cleansed";
    }
    return "scratch";
}

Role role_from_name(const std::string& name) {
    if (name == "scratch") return Role::Scratch;
    if (name == "baseline") return Role::Baseline;
    if (name == "frozen-probe") return Role::FrozenProbe;
    if (name == "cleansed") return Role::Cleansed;
    throw ConfigError("unknown model role '" + name + "'");
}

void ModelParams::validate() const {
    spec.validate();
    if (values.size() != spec.param_count()) {
        throw ConfigError("parameter vector holds " + std::to_string(values.size()) +
                          " values, spec expects " + std::to_string(spec.param_count()));
    }
    for (double v : values) {
        if (!std::isfinite(v)) throw NumericError("model parameters contain a non-finite value");
    }
}

uint64_t ModelParams::digest() const {
    std::vector<unsigned char> bytes(values.size() * 8);
    for (size_t i = 0; i < values.size(); ++i) {
        const auto bits = std::bit_cast<uint64_t>(values[i]);
        for (int b = 0; b < 8; ++b) bytes[i * 8 + b] = static_cast<unsigned char>(bits >> (8 * b));
    }
    return bytes_digest(bytes.data(), bytes.size());
}

ModelParams init_model(const ModelSpec& spec, uint64_t seed) {
    spec.validate();
    ModelParams params;
    params.spec = spec;
    params.role = Role::Scratch;
    params.rng_seed = seed;
    params.values.assign(spec.param_count(), 0.0);

    Rng rng(seed);
    const auto dims = block_dims(spec);
    const auto groups = spec.layer_groups();
    for (size_t b = 0; b < dims.size(); ++b) {
        const size_t weights = static_cast<size_t>(dims[b].out_c) * 9 * dims[b].in_c;
        const double std = std::sqrt(2.0 / (9.0 * dims[b].in_c));
        for (size_t i = 0; i < weights; ++i) {
            params.values[groups[b].offset + i] = std * rng.normal();
        }
        // biases stay zero
    }
    const size_t nb = dims.size();
    {
        const size_t weights = static_cast<size_t>(spec.dense_units) * spec.flat_dim();
        const double std = std::sqrt(2.0 / static_cast<double>(spec.flat_dim()));
        for (size_t i = 0; i < weights; ++i) {
            params.values[groups[nb].offset + i] = std * rng.normal();
        }
    }
    {
        const size_t weights = static_cast<size_t>(spec.num_classes) * spec.dense_units;
        const double std = std::sqrt(1.0 / static_cast<double>(spec.dense_units));
        for (size_t i = 0; i < weights; ++i) {
            params.values[groups[nb + 1].offset + i] = std * rng.normal();
        }
    }
    return params;
}

double cross_entropy(const std::vector<double>& logits, int label) {
    if (logits.empty()) throw ConfigError("cross_entropy on empty logits");
    if (label < 0 || static_cast<size_t>(label) >= logits.size()) {
        throw ConfigError("label " + std::to_string(label) + " out of range for " +
                          std::to_string(logits.size()) + " logits");
    }
    double max_logit = logits[0];
    for (double z : logits) {
        if (!std::isfinite(z)) throw NumericError("cross_entropy on non-finite logits");
        max_logit = std::max(max_logit, z);
    }
    double sum = 0.0;
    for (double z : logits) sum += std::exp(z - max_logit);
    return std::log(sum) - (logits[label] - max_logit);
}

std::vector<double> cross_entropy_grad(const std::vector<double>& logits, int label) {
    if (logits.empty()) throw ConfigError("cross_entropy_grad on empty logits");
    if (label < 0 || static_cast<size_t>(label) >= logits.size()) {
        throw ConfigError("label " + std::to_string(label) + " out of range for " +
                          std::to_string(logits.size()) + " logits");
    }
    double max_logit = logits[0];
    for (double z : logits) {
        if (!std::isfinite(z)) throw NumericError("cross_entropy_grad on non-finite logits");
        max_logit = std::max(max_logit, z);
    }
    double sum = 0.0;
    std::vector<double> grad(logits.size());
    for (size_t k = 0; k < logits.size(); ++k) {
        grad[k] = std::exp(logits[k] - max_logit);
        sum += grad[k];
    }
    for (auto& g : grad) g /= sum;
    grad[label] -= 1.0;
    return grad;
}

void Workspace::prepare(const ModelSpec& spec) {
    if (ready_ && prepared_ == spec) return;
    const auto dims = block_dims(spec);
    acts.assign(dims.size() + 1, {});
    d_acts.assign(dims.size() + 1, {});
    conv_z.assign(dims.size(), {});
    pool_argmax.assign(dims.size(), {});
    acts[0].assign(static_cast<size_t>(spec.input_height) * spec.input_width *
                       spec.input_channels,
                   0.0);
    d_acts[0].assign(acts[0].size(), 0.0);
    size_t max_z = 0;
    for (size_t b = 0; b < dims.size(); ++b) {
        const size_t z_size = static_cast<size_t>(dims[b].in_h) * dims[b].in_w * dims[b].out_c;
        const size_t p_size = static_cast<size_t>(dims[b].pool_h) * dims[b].pool_w * dims[b].out_c;
        conv_z[b].assign(z_size, 0.0);
        pool_argmax[b].assign(p_size, 0);
        acts[b + 1].assign(p_size, 0.0);
        d_acts[b + 1].assign(p_size, 0.0);
        max_z = std::max(max_z, z_size);
    }
    d_z.assign(max_z, 0.0);
    dense_z.assign(spec.dense_units, 0.0);
    dense_r.assign(spec.dense_units, 0.0);
    logits.assign(spec.num_classes, 0.0);
    d_logits.assign(spec.num_classes, 0.0);
    d_dense_r.assign(spec.dense_units, 0.0);
    d_dense_z.assign(spec.dense_units, 0.0);
    prepared_ = spec;
    ready_ = true;
}

namespace {

void check_image_shape(const ModelSpec& spec, const Image& image) {
    if (image.height != spec.input_height || image.width != spec.input_width ||
        image.channels != spec.input_channels) {
        throw ConfigError("image " + std::to_string(image.height) + "x" +
                          std::to_string(image.width) + "x" + std::to_string(image.channels) +
                          " does not match model input " + std::to_string(spec.input_height) +
                          "x" + std::to_string(spec.input_width) + "x" +
                          std::to_string(spec.input_channels));
    }
}

void forward_impl(const ModelParams& params, const Image& image, Workspace& ws) {
    const ModelSpec& spec = params.spec;
    ws.prepare(spec);
    check_image_shape(spec, image);

    for (size_t i = 0; i < ws.acts[0].size(); ++i) {
        ws.acts[0][i] = static_cast<double>(image.pixels[i]);
    }

    const auto dims = block_dims(spec);
    const auto groups = spec.layer_groups();
    const double* values = params.values.data();

    for (size_t b = 0; b < dims.size(); ++b) {
        const auto& d = dims[b];
        const double* a = ws.acts[b].data();
        const double* wbase = values + groups[b].offset;
        const double* bias = wbase + static_cast<size_t>(d.out_c) * 9 * d.in_c;
        double* z = ws.conv_z[b].data();
        const int h = d.in_h, w = d.in_w, c = d.in_c, oc = d.out_c;

        for (int i = 0; i < h; ++i) {
            for (int j = 0; j < w; ++j) {
                double* zp = z + (static_cast<size_t>(i) * w + j) * oc;
                for (int f = 0; f < oc; ++f) zp[f] = bias[f];
                for (int di = 0; di < 3; ++di) {
                    const int ii = i + di - 1;
                    if (ii < 0 || ii >= h) continue;
                    for (int dj = 0; dj < 3; ++dj) {
                        const int jj = j + dj - 1;
                        if (jj < 0 || jj >= w) continue;
                        const double* ap = a + (static_cast<size_t>(ii) * w + jj) * c;
                        for (int f = 0; f < oc; ++f) {
                            const double* wp = wbase + ((static_cast<size_t>(f) * 3 + di) * 3 + dj) * c;
                            double s = 0.0;
                            for (int k = 0; k < c; ++k) s += wp[k] * ap[k];
                            zp[f] += s;
                        }
                    }
                }
            }
        }

        // relu + 2x2 maxpool; argmax (first-wins on ties) recorded for backprop
        double* out = ws.acts[b + 1].data();
        int* amax = ws.pool_argmax[b].data();
        const int ph = d.pool_h, pw = d.pool_w;
        for (int pi = 0; pi < ph; ++pi) {
            for (int pj = 0; pj < pw; ++pj) {
                for (int f = 0; f < oc; ++f) {
                    double best = -1.0;
                    int best_idx = 0;
                    for (int u = 0; u < 2; ++u) {
                        for (int v = 0; v < 2; ++v) {
                            const int idx =
                                ((2 * pi + u) * w + (2 * pj + v)) * oc + f;
                            const double r = z[idx] > 0.0 ? z[idx] : 0.0;
                            if (r > best) {
                                best = r;
                                best_idx = idx;
                            }
                        }
                    }
                    const size_t p = (static_cast<size_t>(pi) * pw + pj) * oc + f;
                    out[p] = best;
                    amax[p] = best_idx;
                }
            }
        }
    }

    const size_t nb = dims.size();
    const size_t flat = spec.flat_dim();
    const double* x = ws.acts[nb].data();
    {
        const double* wbase = values + groups[nb].offset;
        const double* bias = wbase + static_cast<size_t>(spec.dense_units) * flat;
        for (int u = 0; u < spec.dense_units; ++u) {
            const double* wp = wbase + static_cast<size_t>(u) * flat;
            double s = bias[u];
            for (size_t i = 0; i < flat; ++i) s += wp[i] * x[i];
            ws.dense_z[u] = s;
            ws.dense_r[u] = s > 0.0 ? s : 0.0;
        }
    }
    {
        const double* wbase = values + groups[nb + 1].offset;
        const double* bias = wbase + static_cast<size_t>(spec.num_classes) * spec.dense_units;
        for (int k = 0; k < spec.num_classes; ++k) {
            const double* wp = wbase + static_cast<size_t>(k) * spec.dense_units;
            double s = bias[k];
            for (int u = 0; u < spec.dense_units; ++u) s += wp[u] * ws.dense_r[u];
            ws.logits[k] = s;
        }
    }
}

}  // namespace

const std::vector<double>& forward(const ModelParams& params, const Image& image, Workspace& ws) {
    forward_impl(params, image, ws);
    return ws.logits;
}

double forward_backward(const ModelParams& params, const Image& image, int label, Workspace& ws,
                        std::vector<double>& grad, int first_group) {
    const ModelSpec& spec = params.spec;
    const auto groups = spec.layer_groups();
    if (first_group < 0 || static_cast<size_t>(first_group) >= groups.size()) {
        throw ConfigError("first_group " + std::to_string(first_group) + " out of range for " +
                          std::to_string(groups.size()) + " layer groups");
    }
    if (grad.size() != params.values.size()) {
        throw ConfigError("gradient buffer size " + std::to_string(grad.size()) +
                          " != parameter count " + std::to_string(params.values.size()));
    }

    forward_impl(params, image, ws);
    const double loss = cross_entropy(ws.logits, label);

    const auto dims = block_dims(spec);
    const size_t nb = dims.size();
    const size_t flat = spec.flat_dim();
    const double* values = params.values.data();

    {
        // softmax - onehot, stabilized
        double max_logit = ws.logits[0];
        for (double z : ws.logits) max_logit = std::max(max_logit, z);
        double sum = 0.0;
        for (size_t k = 0; k < ws.logits.size(); ++k) {
            ws.d_logits[k] = std::exp(ws.logits[k] - max_logit);
            sum += ws.d_logits[k];
        }
        for (auto& g : ws.d_logits) g /= sum;
        ws.d_logits[label] -= 1.0;
    }

    const bool need_dense = static_cast<size_t>(first_group) <= nb;
    {
        // output head: group nb+1 always receives gradient
        const double* wbase = values + groups[nb + 1].offset;
        double* gw = grad.data() + groups[nb + 1].offset;
        double* gb = gw + static_cast<size_t>(spec.num_classes) * spec.dense_units;
        if (need_dense) std::fill(ws.d_dense_r.begin(), ws.d_dense_r.end(), 0.0);
        for (int k = 0; k < spec.num_classes; ++k) {
            const double g = ws.d_logits[k];
            gb[k] += g;
            double* gwp = gw + static_cast<size_t>(k) * spec.dense_units;
            const double* wp = wbase + static_cast<size_t>(k) * spec.dense_units;
            for (int u = 0; u < spec.dense_units; ++u) {
                gwp[u] += g * ws.dense_r[u];
                if (need_dense) ws.d_dense_r[u] += g * wp[u];
            }
        }
    }

    if (!need_dense) return loss;

    const bool need_flat = static_cast<size_t>(first_group) < nb;
    {
        const double* x = ws.acts[nb].data();
        const double* wbase = values + groups[nb].offset;
        double* gw = grad.data() + groups[nb].offset;
        double* gb = gw + static_cast<size_t>(spec.dense_units) * flat;
        if (need_flat) std::fill(ws.d_acts[nb].begin(), ws.d_acts[nb].end(), 0.0);
        for (int u = 0; u < spec.dense_units; ++u) {
            const double g = ws.dense_z[u] > 0.0 ? ws.d_dense_r[u] : 0.0;
            ws.d_dense_z[u] = g;
            if (g == 0.0) continue;
            gb[u] += g;
            double* gwp = gw + static_cast<size_t>(u) * flat;
            const double* wp = wbase + static_cast<size_t>(u) * flat;
            double* dx = ws.d_acts[nb].data();
            for (size_t i = 0; i < flat; ++i) {
                gwp[i] += g * x[i];
                if (need_flat) dx[i] += g * wp[i];
            }
        }
    }

    for (int b = static_cast<int>(nb) - 1; b >= first_group; --b) {
        const auto& d = dims[b];
        const int h = d.in_h, w = d.in_w, c = d.in_c, oc = d.out_c;
        const double* z = ws.conv_z[b].data();

        // route pooled gradients through argmax and the relu mask
        std::fill(ws.d_z.begin(), ws.d_z.end(), 0.0);
        const auto& dpool = ws.d_acts[b + 1];
        const auto& amax = ws.pool_argmax[b];
        for (size_t p = 0; p < dpool.size(); ++p) {
            const int idx = amax[p];
            if (z[idx] > 0.0) ws.d_z[idx] += dpool[p];
        }

        const double* a = ws.acts[b].data();
        const double* wbase = values + groups[b].offset;
        double* gw = grad.data() + groups[b].offset;
        double* gb = gw + static_cast<size_t>(oc) * 9 * c;
        const bool need_input = b > first_group;
        if (need_input) std::fill(ws.d_acts[b].begin(), ws.d_acts[b].end(), 0.0);
        double* da = ws.d_acts[b].data();

        for (int i = 0; i < h; ++i) {
            for (int j = 0; j < w; ++j) {
                const double* dzp = ws.d_z.data() + (static_cast<size_t>(i) * w + j) * oc;
                for (int f = 0; f < oc; ++f) {
                    const double g = dzp[f];
                    if (g == 0.0) continue;  // 3 of 4 cells lose the pool argmax
                    gb[f] += g;
                    for (int di = 0; di < 3; ++di) {
                        const int ii = i + di - 1;
                        if (ii < 0 || ii >= h) continue;
                        for (int dj = 0; dj < 3; ++dj) {
                            const int jj = j + dj - 1;
                            if (jj < 0 || jj >= w) continue;
                            const size_t widx = ((static_cast<size_t>(f) * 3 + di) * 3 + dj) * c;
                            const size_t aidx = (static_cast<size_t>(ii) * w + jj) * c;
                            double* gwp = gw + widx;
                            const double* ap = a + aidx;
                            for (int k = 0; k < c; ++k) gwp[k] += g * ap[k];
                            if (need_input) {
                                const double* wp = wbase + widx;
                                double* dap = da + aidx;
                                for (int k = 0; k < c; ++k) dap[k] += g * wp[k];
                            }
                        }
                    }
                }
            }
        }
    }
    return loss;
}

int argmax_class(const std::vector<double>& logits) {
    if (logits.empty()) throw ConfigError("argmax on empty logits");
    int best = 0;
    for (size_t k = 1; k < logits.size(); ++k) {
        if (logits[k] > logits[best]) best = static_cast<int>(k);
    }
    return best;
}

int predict_class(const ModelParams& params, const Image& image, Workspace& ws) {
    // The relu/maxpool stages absorb NaN (comparisons with NaN are false), so a
    // poisoned parameter vector can still yield finite logits; reject it up front.
    for (double v : params.values) {
        if (!std::isfinite(v)) throw NumericError("prediction with non-finite model parameters");
    }
    forward_impl(params, image, ws);
    for (double z : ws.logits) {
        if (!std::isfinite(z)) throw NumericError("prediction produced non-finite logits");
    }
    return argmax_class(ws.logits);
}

}  // namespace ptlab
