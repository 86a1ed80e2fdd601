#pragma once

#include <cstdint>
#include <vector>

#include "ptlab/dataset.hpp"
#include "ptlab/model.hpp"

namespace ptlab {

struct TrainConfig {
    int epochs = 10;
    double learning_rate = 0.01;
    int batch_size = 32;
    double momentum = 0.9;
    uint64_t seed = 0;
    int freeze_prefix = 0;          // leading layer groups left untouched
    double early_stop_min_gain = 0.0;  // stop when per-epoch training-accuracy
                                       // gain falls below this; <= 0 disables

    // Function-level check; epochs 0 and learning_rate 0 are legal here
    // (identity runs), the config loader is stricter.
    void validate(const ModelSpec& spec) const;
};

// Mini-batch SGD with momentum from the given initialization. Deterministic
// in (init, dataset, config); the input is not modified. freeze_prefix must
// be 0. Result role: Baseline.
ModelParams train(const ModelParams& init, const Dataset& data, const TrainConfig& cfg);

// Fresh initialization from cfg.seed, then SGD with the first
// cfg.freeze_prefix groups frozen (must be >= 1); those groups stay
// bit-identical to initialization. Result role: FrozenProbe.
ModelParams train_frozen(const ModelSpec& spec, const Dataset& data, const TrainConfig& cfg);

struct IdLoss {
    int32_t id;
    double loss;
};

// Evaluation-mode cross-entropy per example, in dataset order. Parallelized
// over examples (PT_LAB_THREADS caps workers); values are independent of
// the partitioning.
std::vector<IdLoss> per_sample_losses(const ModelParams& params, const Dataset& data);

}  // namespace ptlab
