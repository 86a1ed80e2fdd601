#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ptlab/dataset.hpp"
#include "ptlab/triggers.hpp"

namespace ptlab {

enum class PoisonMode { DirtyLabel, CleanLabel };

const char* poison_mode_name(PoisonMode m);
PoisonMode poison_mode_from_name(const std::string& name);

struct PoisonPlan {
    PoisonMode mode = PoisonMode::DirtyLabel;
    int target_class = 0;
    double rate = 0.2;  // in (0, 1)
    TriggerSpec trigger = SinusoidalTrigger{};
    uint64_t seed = 0;
};

// A dataset plus the ground truth of which examples were poisoned. The mask
// exists for evaluation only; everything below the evaluation layer takes
// the bare `data` member.
struct PoisonedDataset {
    Dataset data;
    std::vector<int32_t> poison_mask;  // sorted ids
    PoisonPlan plan;
};

// Stratified draw: floor(rate * n_k) ids per class k != target_class, with
// the rounding remainder assigned to the smallest class indices. Relabelling
// happens later, in build_poisoned_dataset.
std::vector<int32_t> plan_dirty_label(const Dataset& dataset, int target_class, double rate,
                                      uint64_t seed);

// Uniform draw of round(rate * |dataset|) ids from the target class only.
// If the class is smaller than that, the whole class is selected and a
// warning is emitted (returned via *warning when given, stderr otherwise).
std::vector<int32_t> plan_clean_label(const Dataset& dataset, int target_class, double rate,
                                      uint64_t seed, std::string* warning = nullptr);

std::vector<int32_t> plan_selection(const Dataset& dataset, const PoisonPlan& plan);

// Applies the plan's trigger to every selected example; dirty-label mode
// additionally relabels them to the target class. Unselected examples are
// copied byte-identically.
PoisonedDataset build_poisoned_dataset(const Dataset& dataset,
                                       const std::vector<int32_t>& selection,
                                       const PoisonPlan& plan);

// Triggered copies of every non-target-class test example, with the
// evaluation label set to the target class. Target-class examples are
// excluded so the success rate never counts trivially correct predictions.
PoisonedDataset build_backdoor_testset(const Dataset& clean_test, const TriggerSpec& trigger,
                                       int target_class);

}  // namespace ptlab
