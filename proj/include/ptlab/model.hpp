#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "json.hpp"
#include "ptlab/image.hpp"

namespace ptlab {

struct GroupInfo {
    std::string name;
    size_t offset = 0;
    size_t size = 0;
};

// Small CNN: conv_channels.size() blocks of (3x3 conv, stride 1, pad 1 ->
// relu -> 2x2 maxpool) followed by one relu dense layer and a linear head.
// Parameter groups, in forward order: conv-block-1..N, dense-1, output-head.
// conv_channels may be empty (dense + head only), so there are always at
// least two groups and a proper prefix can be frozen.
struct ModelSpec {
    int input_height = 28;
    int input_width = 28;
    int input_channels = 1;
    int num_classes = 10;
    std::vector<int> conv_channels = {8, 16};
    int dense_units = 64;

    void validate() const;
    std::vector<GroupInfo> layer_groups() const;
    size_t param_count() const;
    size_t flat_dim() const;  // dense-layer input dimension
    nlohmann::json to_json() const;
    static ModelSpec from_json(const nlohmann::json& j);
    uint64_t digest() const;  // over the canonical JSON encoding
    bool operator==(const ModelSpec&) const = default;
};

enum class Role { Scratch, Baseline, FrozenProbe, Cleansed };
const char* role_name(Role role);
Role role_from_name(const std::string& name);

struct ModelParams {
    ModelSpec spec;
    Role role = Role::Scratch;
    uint64_t rng_seed = 0;
    int epochs_trained = 0;
    std::vector<double> values;  // flat, partitioned per layer group

    void validate() const;  // partition size and finiteness
    uint64_t digest() const;  // over the little-endian byte serialization of values
};

// He-normal weights (head scaled by 1/fan_in), zero biases; role Scratch.
ModelParams init_model(const ModelSpec& spec, uint64_t seed);

// -log softmax(logits)[label], stabilized by max-subtraction.
double cross_entropy(const std::vector<double>& logits, int label);
// softmax(logits) - onehot(label)
std::vector<double> cross_entropy_grad(const std::vector<double>& logits, int label);

// Per-pass buffers; one per thread. Reusable across calls and specs.
struct Workspace {
    std::vector<std::vector<double>> acts;    // acts[0] = input, acts[b+1] = pool of block b
    std::vector<std::vector<double>> conv_z;  // conv pre-activations per block
    std::vector<std::vector<int>> pool_argmax;
    std::vector<double> dense_z;
    std::vector<double> dense_r;
    std::vector<double> logits;
    std::vector<std::vector<double>> d_acts;
    std::vector<double> d_z;
    std::vector<double> d_logits;
    std::vector<double> d_dense_r;
    std::vector<double> d_dense_z;

    void prepare(const ModelSpec& spec);

   private:
    ModelSpec prepared_;
    bool ready_ = false;
};

// Logits for one image (result lives in ws.logits).
const std::vector<double>& forward(const ModelParams& params, const Image& image, Workspace& ws);

// Loss for one (image, label), ADDING the sample gradient into grad for
// parameter groups >= first_group; entries of frozen groups are untouched.
// grad must have param_count() entries.
double forward_backward(const ModelParams& params, const Image& image, int label, Workspace& ws,
                        std::vector<double>& grad, int first_group = 0);

// Argmax with ties broken by the smallest index.
int argmax_class(const std::vector<double>& logits);

int predict_class(const ModelParams& params, const Image& image, Workspace& ws);

}  // namespace ptlab
