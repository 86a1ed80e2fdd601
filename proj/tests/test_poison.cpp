#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "doctest.h"
#include "ptlab/errors.hpp"
#include "ptlab/poison.hpp"
#include "ptlab/synthetic.hpp"

using namespace ptlab;

namespace {

// Balanced toy dataset: `per_class` examples for each of `classes` labels,
// tiny constant images so only ids/labels matter.
Dataset balanced(int classes, int per_class, int h = 2, int w = 2) {
    Dataset ds;
    ds.num_classes = classes;
    int32_t id = 0;
    for (int k = 0; k < classes; ++k)
        for (int i = 0; i < per_class; ++i) {
            LabeledExample ex;
            ex.id = id++;
            ex.label = k;
            ex.image = Image(h, w, 1, 0.25f);
            ds.examples.push_back(std::move(ex));
        }
    return ds;
}

std::map<int, int> label_histogram(const Dataset& ds, const std::vector<int32_t>& ids) {
    std::set<int32_t> wanted(ids.begin(), ids.end());
    std::map<int, int> hist;
    for (const auto& ex : ds.examples)
        if (wanted.count(ex.id)) ++hist[ex.label];
    return hist;
}

bool images_equal(const Image& a, const Image& b) {
    return a.same_shape(b) && a.pixels == b.pixels;
}

TriggerSpec unit_patch() {
    PatchTrigger t;
    t.pattern = Image(1, 1, 1, 1.0f);
    t.anchor_row = 0;
    t.anchor_col = 0;
    return t;
}

}  // namespace

TEST_CASE("stratified selection draws per-class counts and skips the target") {
    Dataset ds = balanced(10, 100);
    std::vector<int32_t> sel = plan_dirty_label(ds, 3, 0.1, 42);
    CHECK(sel.size() == 90);

    auto hist = label_histogram(ds, sel);
    CHECK(hist.count(3) == 0);
    for (int k = 0; k < 10; ++k) {
        if (k == 3) continue;
        CHECK(hist[k] == 10);
    }
}

TEST_CASE("stratified selection distributes the rounding remainder to the smallest class labels") {
    // 4 classes x 10, target 0: 30 candidates, rate 0.15 -> round(4.5) = 5
    // picks; floor(1.5) = 1 per class leaves a remainder of 2, handed to the
    // two smallest non-target labels.
    Dataset ds = balanced(4, 10);
    std::vector<int32_t> sel = plan_dirty_label(ds, 0, 0.15, 1);
    CHECK(sel.size() == 5);
    auto hist = label_histogram(ds, sel);
    CHECK(hist[1] == 2);
    CHECK(hist[2] == 2);
    CHECK(hist[3] == 1);

    // rate 0.125 -> round(3.75) = 4 picks, floors 1+1+1, remainder 1
    std::vector<int32_t> sel2 = plan_dirty_label(ds, 0, 0.125, 1);
    CHECK(sel2.size() == 4);
    auto hist2 = label_histogram(ds, sel2);
    CHECK(hist2[1] == 2);
    CHECK(hist2[2] == 1);
    CHECK(hist2[3] == 1);
}

TEST_CASE("selection too small to pick anything is a configuration error") {
    Dataset ds = balanced(2, 10);
    CHECK_THROWS_AS(plan_dirty_label(ds, 0, 0.01, 7), ConfigError);
}

TEST_CASE("stratified selection is deterministic and seed-sensitive") {
    Dataset ds = balanced(10, 100);
    auto a = plan_dirty_label(ds, 3, 0.1, 42);
    auto b = plan_dirty_label(ds, 3, 0.1, 42);
    CHECK(a == b);
    auto c = plan_dirty_label(ds, 3, 0.1, 43);
    CHECK(a != c);
}

TEST_CASE("target-class selection draws only from the target class") {
    Dataset ds = balanced(10, 5000, 1, 1);
    std::vector<int32_t> sel = plan_clean_label(ds, 6, 0.05, 9);
    CHECK(sel.size() == 2500);
    auto hist = label_histogram(ds, sel);
    CHECK(hist.size() == 1);
    CHECK(hist[6] == 2500);
}

TEST_CASE("target-class selection caps at the class size with a warning") {
    Dataset ds = balanced(4, 10);
    std::string warning;
    std::vector<int32_t> sel = plan_clean_label(ds, 2, 0.5, 9, &warning);
    CHECK(sel.size() == 10);  // whole class, though 0.5*40 = 20 were requested
    CHECK(!warning.empty());
    auto hist = label_histogram(ds, sel);
    CHECK(hist[2] == 10);
}

TEST_CASE("target-class selection is deterministic and rejects an empty class") {
    Dataset ds = balanced(3, 8);
    auto a = plan_clean_label(ds, 1, 0.2, 5);
    auto b = plan_clean_label(ds, 1, 0.2, 5);
    CHECK(a == b);

    Dataset missing = ds;
    for (auto& ex : missing.examples)
        if (ex.label == 1) ex.label = 0;
    CHECK_THROWS_AS(plan_clean_label(missing, 1, 0.2, 5), ConfigError);
}

TEST_CASE("empty selection reproduces the input with an empty mask") {
    Dataset ds = balanced(3, 4);
    PoisonPlan plan;
    plan.mode = PoisonMode::DirtyLabel;
    plan.target_class = 0;
    plan.trigger = unit_patch();
    PoisonedDataset out = build_poisoned_dataset(ds, {}, plan);
    CHECK(out.poison_mask.empty());
    REQUIRE(out.data.examples.size() == ds.examples.size());
    for (size_t i = 0; i < ds.examples.size(); ++i) {
        CHECK(out.data.examples[i].label == ds.examples[i].label);
        CHECK(images_equal(out.data.examples[i].image, ds.examples[i].image));
    }
}

TEST_CASE("relabeling mode retargets every selected example and only those") {
    Dataset ds = balanced(10, 100);
    std::vector<int32_t> sel = plan_dirty_label(ds, 3, 0.1, 42);
    PoisonPlan plan;
    plan.mode = PoisonMode::DirtyLabel;
    plan.target_class = 3;
    plan.rate = 0.1;
    plan.seed = 42;
    plan.trigger = unit_patch();

    PoisonedDataset out = build_poisoned_dataset(ds, sel, plan);
    std::vector<int32_t> sorted_sel = sel;
    std::sort(sorted_sel.begin(), sorted_sel.end());
    CHECK(out.poison_mask == sorted_sel);
    CHECK(out.data.examples.size() == ds.examples.size());

    std::set<int32_t> mask(out.poison_mask.begin(), out.poison_mask.end());
    for (size_t i = 0; i < ds.examples.size(); ++i) {
        const auto& before = ds.examples[i];
        const auto& after = out.data.examples[i];
        CHECK(after.id == before.id);
        if (mask.count(before.id)) {
            CHECK(after.label == 3);
            CHECK(!images_equal(after.image, before.image));
        } else {
            CHECK(after.label == before.label);
            CHECK(images_equal(after.image, before.image));
        }
    }
}

TEST_CASE("label-preserving mode changes images but never labels") {
    Dataset ds = balanced(5, 20, 3, 3);
    std::vector<int32_t> sel = plan_clean_label(ds, 2, 0.1, 8);
    REQUIRE(sel.size() == 10);
    PoisonPlan plan;
    plan.mode = PoisonMode::CleanLabel;
    plan.target_class = 2;
    plan.rate = 0.1;
    plan.seed = 8;
    plan.trigger = unit_patch();

    PoisonedDataset out = build_poisoned_dataset(ds, sel, plan);
    std::set<int32_t> mask(out.poison_mask.begin(), out.poison_mask.end());
    int changed_images = 0;
    for (size_t i = 0; i < ds.examples.size(); ++i) {
        CHECK(out.data.examples[i].label == ds.examples[i].label);
        if (!images_equal(out.data.examples[i].image, ds.examples[i].image)) {
            ++changed_images;
            CHECK(mask.count(ds.examples[i].id) == 1);
        }
    }
    CHECK(changed_images == 10);
}

TEST_CASE("unknown or duplicate selection ids are integrity errors") {
    Dataset ds = balanced(3, 4);
    PoisonPlan plan;
    plan.trigger = unit_patch();
    plan.target_class = 0;
    CHECK_THROWS_AS(build_poisoned_dataset(ds, {999}, plan), ConfigError);
    CHECK_THROWS_AS(build_poisoned_dataset(ds, {1, 1}, plan), ConfigError);
}

TEST_CASE("label-preserving mode refuses non-target-class selections") {
    Dataset ds = balanced(3, 4);
    PoisonPlan plan;
    plan.mode = PoisonMode::CleanLabel;
    plan.target_class = 0;
    plan.trigger = unit_patch();
    // id 4 has label 1 != target 0
    CHECK_THROWS_AS(build_poisoned_dataset(ds, {4}, plan), ConfigError);
}

TEST_CASE("backdoor test set triggers and retargets every non-target example") {
    Dataset test = balanced(10, 100, 4, 4);
    PoisonedDataset bd = build_backdoor_testset(test, unit_patch(), 4);
    CHECK(bd.data.examples.size() == 900);
    for (const auto& ex : bd.data.examples) {
        CHECK(ex.label == 4);
        CHECK(ex.image.at(0, 0, 0) == 1.0f);  // the unit patch landed
    }
    // ids are preserved from the source examples
    std::set<int32_t> ids;
    for (const auto& ex : bd.data.examples) ids.insert(ex.id);
    CHECK(ids.size() == 900);
}

TEST_CASE("a test set entirely of the target class leaves nothing to trigger") {
    Dataset ds = balanced(1, 5);
    ds.num_classes = 3;  // labels all 0, classes 3
    CHECK_THROWS_AS(build_backdoor_testset(ds, unit_patch(), 0), ConfigError);
}

TEST_CASE("an identity trigger retargets labels while leaving pixels alone") {
    Dataset test = balanced(4, 6, 3, 3);
    BlendTrigger b;
    b.trigger_image = Image(3, 3, 1, 0.0f);
    b.alpha = 0.0f;
    PoisonedDataset bd = build_backdoor_testset(test, TriggerSpec(b), 1);
    CHECK(bd.data.examples.size() == 18);
    for (const auto& ex : bd.data.examples) {
        CHECK(ex.label == 1);
        CHECK(images_equal(ex.image, Image(3, 3, 1, 0.25f)));
    }
}

TEST_CASE("poisoning the same inputs twice yields identical datasets") {
    Dataset ds = make_synthetic_corpus(60, 4);
    PoisonPlan plan;
    plan.mode = PoisonMode::DirtyLabel;
    plan.target_class = 0;
    plan.rate = 0.2;
    plan.seed = 12;
    plan.trigger = default_patch_trigger(28, 28, 1);

    auto sel1 = plan_selection(ds, plan);
    auto sel2 = plan_selection(ds, plan);
    CHECK(sel1 == sel2);

    PoisonedDataset a = build_poisoned_dataset(ds, sel1, plan);
    PoisonedDataset b = build_poisoned_dataset(ds, sel2, plan);
    CHECK(a.poison_mask == b.poison_mask);
    for (size_t i = 0; i < a.data.examples.size(); ++i) {
        CHECK(a.data.examples[i].label == b.data.examples[i].label);
        CHECK(images_equal(a.data.examples[i].image, b.data.examples[i].image));
    }
}

TEST_CASE("realized poison counts stay within one sample of the requested rate") {
    Dataset ds = balanced(7, 13);  // 91 samples, awkward strata
    const double candidates = 78.0;  // everything outside target class 2
    for (double rate : {0.1, 0.2, 0.3}) {
        auto sel = plan_dirty_label(ds, 2, rate, 3);
        CHECK(std::abs(static_cast<double>(sel.size()) - rate * candidates) <= 1.0);
    }
}

TEST_CASE("mode names round-trip") {
    CHECK(std::string(poison_mode_name(PoisonMode::DirtyLabel)) == "dirty-label");
    CHECK(std::string(poison_mode_name(PoisonMode::CleanLabel)) == "clean-label");
    CHECK(poison_mode_from_name("dirty-label") == PoisonMode::DirtyLabel);
    CHECK(poison_mode_from_name("clean") == PoisonMode::CleanLabel);
    CHECK_THROWS_AS(poison_mode_from_name("bogus"), ConfigError);
}
