#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "ptlab/defense.hpp"
#include "ptlab/poison.hpp"
#include "ptlab/train.hpp"

namespace ptlab {

struct DatasetSource {
    std::string type = "synthetic";  // "synthetic" | "image-folder"
    int train_count = 10000;         // synthetic only
    int test_count = 2000;           // synthetic only
    std::string train_dir;           // image-folder only
    std::string test_dir;

    // "synthetic" or the train directory; used in report rows
    std::string display_name() const;
};

struct AttackConfig {
    std::string type = "badnet";  // badnet | blend | sig
    PoisonMode mode = PoisonMode::DirtyLabel;
    int target_class = 0;
    double rate = 0.2;
    double blend_alpha = 0.1;
    double sig_amplitude = 0.15;
    int sig_frequency = 6;
    std::optional<nlohmann::json> explicit_trigger;

    std::string preset_name() const;  // e.g. "badnet-dirty"
};

// Builds the concrete trigger for a dataset shape: badnet -> white/checker
// corner patch, blend -> seeded noise image, sig -> horizontal sinusoid.
// An explicit trigger in the config wins over the type defaults.
TriggerSpec resolve_trigger(const AttackConfig& attack, int height, int width, int channels,
                            uint64_t seed);

struct ExperimentConfig {
    DatasetSource dataset;
    std::vector<int> conv_channels = {8, 16};
    int dense_units = 64;
    AttackConfig attack;
    TrainConfig baseline;
    TrainConfig probe;
    double isolation_rate = 0.1;
    UnlearnConfig unlearn;
    std::string output_dir = "ptlab-run";
    uint64_t seed = 1;

    // Canonical fully-explicit encoding: independent of input key order and
    // of which values were defaulted.
    nlohmann::json to_json() const;
    std::string digest() const;

    // Fills phase seeds (corpus, poison, train, unlearn) from the global
    // seed; called by the loaders after any --seed override.
    void derive_phase_seeds();
    uint64_t corpus_train_seed() const;
    uint64_t corpus_test_seed() const;
    uint64_t poison_seed() const;
};

// Strict parse: unknown keys are rejected with their full path; every field
// is validated; defaults fill anything omitted.
ExperimentConfig config_from_json(const nlohmann::json& j);
ExperimentConfig load_config(const std::string& path);

}  // namespace ptlab
