#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"
#include "ptlab/dataset.hpp"
#include "ptlab/defense.hpp"
#include "ptlab/model.hpp"

namespace ptlab {

// Evaluation results for one checkpoint. Isolation quality is present only
// when ground-truth poison flags exist (absent on clean-data runs).
struct MetricsReport {
    std::string role;
    double acc = 0.0;
    double asr = 0.0;
    std::optional<double> isolation_precision;
    std::optional<double> isolation_recall;
    size_t clean_correct = 0;
    size_t clean_total = 0;
    size_t backdoor_hits = 0;
    size_t backdoor_total = 0;
    std::string config_digest;
    std::string checkpoint_digest;

    nlohmann::json to_json() const;
    static MetricsReport from_json(const nlohmann::json& j);
};

// Fraction of examples whose argmax logit (ties to the smallest class
// index) equals the label. Parallel over examples.
double accuracy(const ModelParams& params, const Dataset& clean_test);

// Fraction of backdoor-test examples predicted as the target class.
double attack_success_rate(const ModelParams& params, const Dataset& backdoor_test,
                           int target_class);

// (precision, recall) of the suspicious set against the ground-truth
// poison mask; absent when the mask is empty.
std::optional<std::pair<double, double>> isolation_quality(const IsolationResult& split,
                                                           const std::vector<int32_t>& poison_mask);

// ACC + ASR + counts for one checkpoint; provenance digests are left for
// the caller.
MetricsReport evaluate_model(const ModelParams& params, const Dataset& clean_test,
                             const Dataset& backdoor_test, int target_class);

}  // namespace ptlab
