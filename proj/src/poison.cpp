#include "ptlab/poison.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <set>
#include <stdexcept>

#include "ptlab/errors.hpp"
#include "ptlab/rng.hpp"

namespace ptlab {

const char* poison_mode_name(PoisonMode m) {
    return m == PoisonMode::DirtyLabel ? "dirty-label" : "clean-label";
}

PoisonMode poison_mode_from_name(const std::string& name) {
    if (name == "dirty-label" || name == "dirty") return PoisonMode::DirtyLabel;
    if (name == "clean-label" || name == "clean") return PoisonMode::CleanLabel;
    throw ConfigError("unknown poison mode '" + name + "' (expected dirty-label or clean-label)");
}

namespace {

void check_plan_args(const Dataset& dataset, int target_class, double rate) {
    dataset.validate();
    if (target_class < 0 || target_class >= dataset.num_classes) {
        throw ConfigError("target_class " + std::to_string(target_class) +
                          " out of range for " + std::to_string(dataset.num_classes) +
                          " classes");
    }
    if (!(rate > 0.0 && rate < 1.0)) {
        throw ConfigError("poison rate must lie in (0, 1), got " + std::to_string(rate));
    }
}

}  // namespace

std::vector<int32_t> plan_dirty_label(const Dataset& dataset, int target_class, double rate,
                                      uint64_t seed) {
    check_plan_args(dataset, target_class, rate);

    // Group the candidate ids (everything outside the target class) by label.
    std::map<int, std::vector<int32_t>> by_class;
    size_t candidates = 0;
    for (const auto& ex : dataset.examples) {
        if (ex.label == target_class) continue;
        by_class[ex.label].push_back(ex.id);
        ++candidates;
    }
    if (candidates == 0) {
        throw ConfigError("dirty-label plan has no candidates: every example already has the "
                          "target label");
    }

    const auto total = static_cast<size_t>(
        std::llround(rate * static_cast<double>(candidates)));
    if (total == 0) {
        throw ConfigError("poison rate " + std::to_string(rate) +
                          " selects zero examples from " + std::to_string(candidates) +
                          " candidates");
    }

    // floor(rate * n_k) from each class, then hand the remainder to the
    // smallest class indices, spilling over when a class runs dry.
    std::map<int, size_t> take;
    size_t assigned = 0;
    for (const auto& [label, ids] : by_class) {
        take[label] = static_cast<size_t>(rate * static_cast<double>(ids.size()));
        assigned += take[label];
    }
    size_t remainder = total > assigned ? total - assigned : 0;
    while (remainder > 0) {
        bool progressed = false;
        for (auto& [label, count] : take) {
            if (remainder == 0) break;
            if (count < by_class[label].size()) {
                ++count;
                --remainder;
                progressed = true;
            }
        }
        if (!progressed) break;  // every candidate is already selected
    }

    std::vector<int32_t> selection;
    selection.reserve(total);
    for (auto& [label, ids] : by_class) {
        std::sort(ids.begin(), ids.end());
        Rng rng(derive_seed(seed, "poison-class-" + std::to_string(label)));
        rng.shuffle(ids);
        const size_t count = std::min(take[label], ids.size());
        selection.insert(selection.end(), ids.begin(), ids.begin() + count);
    }
    std::sort(selection.begin(), selection.end());
    return selection;
}

std::vector<int32_t> plan_clean_label(const Dataset& dataset, int target_class, double rate,
                                      uint64_t seed, std::string* warning) {
    check_plan_args(dataset, target_class, rate);

    std::vector<int32_t> pool;
    for (const auto& ex : dataset.examples) {
        if (ex.label == target_class) pool.push_back(ex.id);
    }
    if (pool.empty()) {
        throw ConfigError("clean-label plan impossible: no examples carry target class " +
                          std::to_string(target_class));
    }

    size_t want = static_cast<size_t>(
        std::llround(rate * static_cast<double>(dataset.examples.size())));
    if (want == 0) {
        throw ConfigError("poison rate " + std::to_string(rate) +
                          " selects zero examples from " +
                          std::to_string(dataset.examples.size()));
    }
    if (want > pool.size()) {
        std::string msg = "clean-label plan wants " + std::to_string(want) +
                          " examples but class " + std::to_string(target_class) +
                          " only has " + std::to_string(pool.size()) +
                          "; selecting the whole class";
        if (warning != nullptr) {
            *warning = msg;
        } else {
            std::fprintf(stderr, "warning: %s\n", msg.c_str());
        }
        want = pool.size();
    }

    std::sort(pool.begin(), pool.end());
    Rng rng(derive_seed(seed, "poison-clean"));
    rng.shuffle(pool);
    std::vector<int32_t> selection(pool.begin(), pool.begin() + want);
    std::sort(selection.begin(), selection.end());
    return selection;
}

std::vector<int32_t> plan_selection(const Dataset& dataset, const PoisonPlan& plan) {
    if (plan.mode == PoisonMode::DirtyLabel) {
        return plan_dirty_label(dataset, plan.target_class, plan.rate, plan.seed);
    }
    return plan_clean_label(dataset, plan.target_class, plan.rate, plan.seed);
}

PoisonedDataset build_poisoned_dataset(const Dataset& dataset,
                                       const std::vector<int32_t>& selection,
                                       const PoisonPlan& plan) {
    dataset.validate();
    if (plan.target_class < 0 || plan.target_class >= dataset.num_classes) {
        throw ConfigError("target_class " + std::to_string(plan.target_class) +
                          " out of range for " + std::to_string(dataset.num_classes) +
                          " classes");
    }

    std::set<int32_t> selected(selection.begin(), selection.end());
    if (selected.size() != selection.size()) {
        throw ConfigError("poison selection contains duplicate ids");
    }
    std::set<int32_t> known;
    for (const auto& ex : dataset.examples) known.insert(ex.id);
    for (int32_t id : selected) {
        if (known.count(id) == 0) {
            throw ConfigError("poison selection references unknown id " + std::to_string(id));
        }
    }

    PoisonedDataset out;
    out.data.num_classes = dataset.num_classes;
    out.data.examples.reserve(dataset.examples.size());
    out.plan = plan;
    for (const auto& ex : dataset.examples) {
        LabeledExample copy = ex;
        if (selected.count(ex.id) != 0) {
            if (plan.mode == PoisonMode::CleanLabel && ex.label != plan.target_class) {
                throw ConfigError("clean-label selection includes id " + std::to_string(ex.id) +
                                  " with label " + std::to_string(ex.label) +
                                  " != target class " + std::to_string(plan.target_class));
            }
            copy.image = apply_trigger(ex.image, plan.trigger);
            if (plan.mode == PoisonMode::DirtyLabel) copy.label = plan.target_class;
            out.poison_mask.push_back(ex.id);
        }
        out.data.examples.push_back(std::move(copy));
    }
    std::sort(out.poison_mask.begin(), out.poison_mask.end());
    out.data.validate();
    return out;
}

PoisonedDataset build_backdoor_testset(const Dataset& clean_test, const TriggerSpec& trigger,
                                       int target_class) {
    clean_test.validate();
    if (target_class < 0 || target_class >= clean_test.num_classes) {
        throw ConfigError("target_class " + std::to_string(target_class) +
                          " out of range for " + std::to_string(clean_test.num_classes) +
                          " classes");
    }

    PoisonedDataset out;
    out.data.num_classes = clean_test.num_classes;
    out.plan.mode = PoisonMode::DirtyLabel;
    out.plan.target_class = target_class;
    out.plan.trigger = trigger;
    for (const auto& ex : clean_test.examples) {
        if (ex.label == target_class) continue;  // would count as success for free
        LabeledExample copy = ex;
        copy.image = apply_trigger(ex.image, trigger);
        copy.label = target_class;
        out.data.examples.push_back(std::move(copy));
        out.poison_mask.push_back(ex.id);
    }
    if (out.data.examples.empty()) {
        throw ConfigError("backdoor test set is empty: every test example has the target class");
    }
    std::sort(out.poison_mask.begin(), out.poison_mask.end());
    out.data.validate();
    return out;
}

}  // namespace ptlab
