#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "json.hpp"
#include "ptlab/dataset.hpp"
#include "ptlab/model.hpp"
#include "ptlab/train.hpp"

namespace ptlab {

// The split produced from the frozen probe's per-sample losses. The
// suspicious set D_s is the LOWEST-loss tail: the capacity-restricted probe
// keeps backdoor shortcuts easy while clean accuracy suffers, so poisoned
// samples sit at the bottom of the loss distribution.
struct IsolationResult {
    std::vector<int32_t> suspicious_ids;  // sorted, |D_s| = round(rate * n)
    std::vector<int32_t> retained_ids;    // sorted, D_c = complement
    std::map<int32_t, double> losses;     // every dataset id
    double isolation_rate = 0.1;
    std::string probe_digest;  // parameter digest of the probe checkpoint

    nlohmann::json to_json() const;  // losses rounded to 9 significant digits
    static IsolationResult from_json(const nlohmann::json& j);
};

// Splits ids by loss: the round(rate*n) lowest-loss ids become suspicious,
// ties broken by ascending id. Rejects rates that isolate nothing or
// everything. probe_digest is left for the caller to fill.
IsolationResult isolate(const std::vector<IdLoss>& losses, double rate);

struct UnlearnConfig {
    double lr_retain = 0.001;
    double lr_unlearn = 0.0001;
    int epochs = 10;  // passes over the retained set
    int batch_size = 32;
    double ascent_loss_cap = 10.0;  // samples with CE above this stop ascending
    uint64_t seed = 0;

    // lr_unlearn 0 is legal here (plain fine-tuning); the config loader
    // requires both rates positive.
    void validate() const;
};

// Alternating descent/ascent fine-tuning of the baseline: one plain SGD
// descent step on a retained-set batch at lr_retain, then one ascent step
// (parameters move along +gradient) on a suspicious-set batch at
// lr_unlearn. No momentum. Suspicious batches cycle, reshuffled per cycle.
// A suspicious sample whose CE already exceeds ascent_loss_cap contributes
// zero gradient but still counts in its batch mean. Result role: Cleansed.
ModelParams unlearn_finetune(const ModelParams& base, const Dataset& data,
                             const IsolationResult& split, const UnlearnConfig& cfg);

struct DefenseArtifacts {
    ModelParams baseline;  // M_s
    ModelParams probe;     // M' (frozen prefix, same init seed as M_s)
    IsolationResult isolation;
    ModelParams cleansed;  // M_c
};

// The full pipeline on an in-memory dataset: train the baseline, train the
// probe from the same initialization seed with its prefix frozen, isolate
// by probe losses, unlearn-finetune. Never sees ground-truth poison flags.
DefenseArtifacts run_pt_defense(const Dataset& data, const ModelSpec& spec,
                                const TrainConfig& baseline_cfg, const TrainConfig& probe_cfg,
                                const UnlearnConfig& unlearn_cfg, double isolation_rate);

}  // namespace ptlab
