#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <algorithm>
#include <cmath>
#include <set>
#include <vector>

#include "doctest.h"
#include "ptlab/defense.hpp"
#include "ptlab/errors.hpp"
#include "ptlab/metrics.hpp"
#include "ptlab/model.hpp"
#include "ptlab/rng.hpp"
#include "ptlab/synthetic.hpp"

using namespace ptlab;

namespace {

// Dense-only model over a single pixel; every parameter hand-settable.
ModelSpec pixel_spec(int classes, int units) {
    ModelSpec s;
    s.input_height = 1;
    s.input_width = 1;
    s.input_channels = 1;
    s.num_classes = classes;
    s.conv_channels = {};
    s.dense_units = units;
    return s;
}

// All-zero parameters except one head bias: predicts `winner` everywhere.
ModelParams constant_predictor(int classes, int winner) {
    ModelSpec spec = pixel_spec(classes, 2);
    ModelParams p = init_model(spec, 1);
    std::fill(p.values.begin(), p.values.end(), 0.0);
    auto groups = spec.layer_groups();
    size_t head_bias =
        groups.back().offset + static_cast<size_t>(classes) * static_cast<size_t>(spec.dense_units);
    p.values[head_bias + static_cast<size_t>(winner)] = 1.0;
    return p;
}

Dataset pixel_dataset(const std::vector<std::pair<float, int>>& samples, int classes) {
    Dataset ds;
    ds.num_classes = classes;
    int32_t id = 0;
    for (const auto& [value, label] : samples) {
        LabeledExample ex;
        ex.id = id++;
        ex.label = label;
        ex.image = Image(1, 1, 1, value);
        ds.examples.push_back(std::move(ex));
    }
    return ds;
}

Dataset balanced_pixel_set(int classes, int per_class) {
    std::vector<std::pair<float, int>> samples;
    for (int k = 0; k < classes; ++k)
        for (int i = 0; i < per_class; ++i)
            samples.emplace_back(static_cast<float>(i) / static_cast<float>(per_class + 1), k);
    return pixel_dataset(samples, classes);
}

}  // namespace

TEST_CASE("a constant predictor scores the base rate on a balanced set") {
    ModelParams p = constant_predictor(10, 0);
    Dataset test = balanced_pixel_set(10, 12);
    CHECK(accuracy(p, test) == doctest::Approx(0.1).epsilon(1e-12));
}

TEST_CASE("a hand-built lookup model scores perfect accuracy on its three samples") {
    ModelSpec spec = pixel_spec(3, 2);
    ModelParams p = init_model(spec, 2);
    std::fill(p.values.begin(), p.values.end(), 0.0);

    // dense: r0 = relu(x), r1 = relu(x - 0.4)
    auto groups = spec.layer_groups();
    size_t d = groups[0].offset;
    p.values[d + 0] = 1.0;   // w(unit0, pixel)
    p.values[d + 1] = 1.0;   // w(unit1, pixel)
    p.values[d + 2] = 0.0;   // b(unit0)
    p.values[d + 3] = -0.4;  // b(unit1)
    // head logits: c0 = -20 r0; c1 = 40 r0 - 60 r1; c2 = -20 r0 + 60 r1
    size_t h = groups[1].offset;
    p.values[h + 0] = -20.0;  // W(c0, r0)
    p.values[h + 1] = 0.0;    // W(c0, r1)
    p.values[h + 2] = 40.0;   // W(c1, r0)
    p.values[h + 3] = -60.0;  // W(c1, r1)
    p.values[h + 4] = -20.0;  // W(c2, r0)
    p.values[h + 5] = 60.0;   // W(c2, r1)

    Dataset test = pixel_dataset({{0.0f, 0}, {0.5f, 1}, {1.0f, 2}}, 3);
    CHECK(accuracy(p, test) == 1.0);
}

TEST_CASE("accuracy agrees with a brute-force per-sample comparison") {
    ModelSpec spec;
    spec.input_height = 28;
    spec.input_width = 28;
    spec.conv_channels = {2};
    spec.dense_units = 8;
    spec.num_classes = 10;
    ModelParams p = init_model(spec, 3);
    Dataset test = make_synthetic_corpus(50, 4);

    size_t correct = 0;
    Workspace ws;
    for (const auto& ex : test.examples)
        if (predict_class(p, ex.image, ws) == ex.label) ++correct;

    CHECK(accuracy(p, test) == static_cast<double>(correct) / 50.0);
}

TEST_CASE("accuracy is invariant under test-set permutation") {
    ModelSpec spec;
    spec.conv_channels = {2};
    spec.dense_units = 8;
    ModelParams p = init_model(spec, 5);
    Dataset test = make_synthetic_corpus(40, 6);
    double base = accuracy(p, test);

    Dataset shuffled = test;
    Rng rng(7);
    rng.shuffle(shuffled.examples);
    CHECK(accuracy(p, shuffled) == base);
}

TEST_CASE("success rate is 1 for a constant-target predictor and 0 otherwise") {
    Dataset bd = balanced_pixel_set(5, 8);  // stands in for a triggered set
    for (auto& ex : bd.examples) ex.label = 2;

    ModelParams onto_target = constant_predictor(5, 2);
    CHECK(attack_success_rate(onto_target, bd, 2) == 1.0);

    ModelParams elsewhere = constant_predictor(5, 4);
    CHECK(attack_success_rate(elsewhere, bd, 2) == 0.0);
}

TEST_CASE("success rate plus non-target fraction is exactly one") {
    ModelSpec spec;
    spec.conv_channels = {2};
    spec.dense_units = 8;
    ModelParams p = init_model(spec, 8);
    Dataset bd = make_synthetic_corpus(60, 9);
    const int target = 3;
    for (auto& ex : bd.examples) ex.label = target;

    double asr = attack_success_rate(p, bd, target);
    Workspace ws;
    size_t non_target = 0;
    for (const auto& ex : bd.examples)
        if (predict_class(p, ex.image, ws) != target) ++non_target;
    // every prediction lands on exactly one side, so the rates are exact
    // complements when expressed over the common denominator
    CHECK(asr == static_cast<double>(60 - non_target) / 60.0);
    CHECK(static_cast<double>((60 - non_target) + non_target) / 60.0 == 1.0);
}

TEST_CASE("empty test sets are errors") {
    ModelParams p = constant_predictor(3, 0);
    Dataset empty;
    empty.num_classes = 3;
    CHECK_THROWS_AS(accuracy(p, empty), ConfigError);
    CHECK_THROWS_AS(attack_success_rate(p, empty, 0), ConfigError);
}

TEST_CASE("isolation quality covers the exact-match and disjoint corners") {
    IsolationResult split;
    split.suspicious_ids = {1, 2, 3};
    split.retained_ids = {4, 5, 6, 7};
    for (int32_t id = 1; id <= 7; ++id) split.losses[id] = 0.5;

    auto exact = isolation_quality(split, {1, 2, 3});
    REQUIRE(exact.has_value());
    CHECK(exact->first == 1.0);
    CHECK(exact->second == 1.0);

    auto disjoint = isolation_quality(split, {4, 5});
    REQUIRE(disjoint.has_value());
    CHECK(disjoint->first == 0.0);
    CHECK(disjoint->second == 0.0);
}

TEST_CASE("isolation quality computes the 8-of-10-against-20 example") {
    IsolationResult split;
    for (int32_t id = 0; id < 100; ++id) split.losses[id] = 0.5;
    // suspicious: 8 poisoned (0..7) + 2 clean (90, 91)
    for (int32_t id = 0; id < 8; ++id) split.suspicious_ids.push_back(id);
    split.suspicious_ids.push_back(90);
    split.suspicious_ids.push_back(91);
    for (int32_t id = 0; id < 100; ++id) {
        if (std::find(split.suspicious_ids.begin(), split.suspicious_ids.end(), id) ==
            split.suspicious_ids.end())
            split.retained_ids.push_back(id);
    }
    std::vector<int32_t> mask;  // 20 poisoned: 0..7 caught, 8..19 missed
    for (int32_t id = 0; id < 20; ++id) mask.push_back(id);

    auto q = isolation_quality(split, mask);
    REQUIRE(q.has_value());
    CHECK(q->first == doctest::Approx(0.8).epsilon(1e-12));
    CHECK(q->second == doctest::Approx(0.4).epsilon(1e-12));
}

TEST_CASE("an empty mask reports no isolation quality") {
    IsolationResult split;
    split.suspicious_ids = {0};
    split.retained_ids = {1};
    split.losses[0] = 0.1;
    split.losses[1] = 0.9;
    CHECK(!isolation_quality(split, {}).has_value());
}

TEST_CASE("mask ids outside the dataset are rejected") {
    IsolationResult split;
    split.suspicious_ids = {0};
    split.retained_ids = {1};
    split.losses[0] = 0.1;
    split.losses[1] = 0.9;
    CHECK_THROWS_AS(isolation_quality(split, {17}), ConfigError);
}

TEST_CASE("recall never exceeds the size ratio bound") {
    Rng rng(11);
    for (int rep = 0; rep < 25; ++rep) {
        int n = 20 + static_cast<int>(rng.uniform_u64(30));
        IsolationResult split;
        std::vector<int32_t> ids(static_cast<size_t>(n));
        for (int32_t i = 0; i < n; ++i) {
            ids[static_cast<size_t>(i)] = i;
            split.losses[i] = rng.uniform();
        }
        rng.shuffle(ids);
        size_t k = 1 + rng.uniform_u64(static_cast<uint64_t>(n) / 2);
        split.suspicious_ids.assign(ids.begin(), ids.begin() + static_cast<long>(k));
        split.retained_ids.assign(ids.begin() + static_cast<long>(k), ids.end());

        size_t mask_size = 1 + rng.uniform_u64(static_cast<uint64_t>(n) - 1);
        rng.shuffle(ids);
        std::vector<int32_t> mask(ids.begin(), ids.begin() + static_cast<long>(mask_size));

        auto q = isolation_quality(split, mask);
        REQUIRE(q.has_value());
        double bound = static_cast<double>(k) / static_cast<double>(mask_size);
        CHECK(q->second <= bound + 1e-12);
    }
}

TEST_CASE("model evaluation fills consistent counts and rates") {
    ModelSpec spec;
    spec.conv_channels = {2};
    spec.dense_units = 8;
    ModelParams p = init_model(spec, 12);
    p.role = Role::Baseline;
    Dataset clean = make_synthetic_corpus(30, 13);
    Dataset bd = make_synthetic_corpus(20, 14);
    for (auto& ex : bd.examples) ex.label = 0;

    MetricsReport r = evaluate_model(p, clean, bd, 0);
    CHECK(r.role == "baseline");
    CHECK(r.clean_total == 30);
    CHECK(r.backdoor_total == 20);
    CHECK(r.acc == static_cast<double>(r.clean_correct) / 30.0);
    CHECK(r.asr == static_cast<double>(r.backdoor_hits) / 20.0);
    CHECK(r.acc == accuracy(p, clean));
    CHECK(r.asr == attack_success_rate(p, bd, 0));
}

TEST_CASE("metrics reports round-trip through JSON, optionals included") {
    MetricsReport r;
    r.role = "cleansed";
    r.acc = 0.9125;
    r.asr = 0.03;
    r.clean_correct = 1825;
    r.clean_total = 2000;
    r.backdoor_hits = 54;
    r.backdoor_total = 1800;
    r.isolation_precision = 0.85;
    r.isolation_recall = 0.42;
    r.config_digest = "abc";
    r.checkpoint_digest = "def";

    MetricsReport back = MetricsReport::from_json(r.to_json());
    CHECK(back.role == r.role);
    CHECK(back.acc == r.acc);
    CHECK(back.asr == r.asr);
    CHECK(back.clean_correct == r.clean_correct);
    CHECK(back.backdoor_hits == r.backdoor_hits);
    REQUIRE(back.isolation_precision.has_value());
    CHECK(*back.isolation_precision == 0.85);
    CHECK(back.config_digest == "abc");

    MetricsReport bare;
    bare.role = "baseline";
    nlohmann::json j = bare.to_json();
    CHECK(!j.contains("isolation_precision"));
    CHECK(!j.contains("isolation_recall"));
    MetricsReport bare_back = MetricsReport::from_json(j);
    CHECK(!bare_back.isolation_precision.has_value());
}
