#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <limits>
#include <vector>

#include "doctest.h"
#include "ptlab/errors.hpp"
#include "ptlab/model.hpp"
#include "ptlab/rng.hpp"

using namespace ptlab;

namespace {

Image random_image(int h, int w, int c, uint64_t seed) {
    Image img(h, w, c);
    Rng rng(seed);
    for (auto& p : img.pixels) p = static_cast<float>(rng.uniform());
    return img;
}

// Independent parameter-count formula, written from the layer shapes.
size_t expected_param_count(const ModelSpec& s) {
    size_t total = 0;
    int ic = s.input_channels;
    int h = s.input_height, w = s.input_width;
    for (int oc : s.conv_channels) {
        total += static_cast<size_t>(oc) * 3 * 3 * static_cast<size_t>(ic) +
                 static_cast<size_t>(oc);
        ic = oc;
        h /= 2;
        w /= 2;
    }
    size_t flat = static_cast<size_t>(h) * static_cast<size_t>(w) * static_cast<size_t>(ic);
    total += static_cast<size_t>(s.dense_units) * flat + static_cast<size_t>(s.dense_units);
    total += static_cast<size_t>(s.num_classes) * static_cast<size_t>(s.dense_units) +
             static_cast<size_t>(s.num_classes);
    return total;
}

ModelSpec micro_spec() {
    ModelSpec s;
    s.input_height = 4;
    s.input_width = 4;
    s.input_channels = 1;
    s.num_classes = 3;
    s.conv_channels = {2};
    s.dense_units = 4;
    return s;
}

}  // namespace

TEST_CASE("initialization is deterministic in the seed and differs across seeds") {
    ModelSpec spec;  // defaults
    ModelParams a = init_model(spec, 5);
    ModelParams b = init_model(spec, 5);
    CHECK(a.values == b.values);
    CHECK(a.role == Role::Scratch);
    CHECK(a.rng_seed == 5);

    ModelParams c = init_model(spec, 6);
    CHECK(a.values != c.values);
}

TEST_CASE("parameter count equals the sum of the group sizes") {
    for (const ModelSpec& spec :
         {ModelSpec{},                                          // default stack
          ModelSpec{6, 6, 3, 4, {5}, 7},                         // one conv block, RGB
          ModelSpec{4, 4, 1, 3, {}, 8}}) {                       // dense-only
        size_t by_groups = 0;
        for (const auto& g : spec.layer_groups()) by_groups += g.size;
        CHECK(spec.param_count() == by_groups);
        CHECK(spec.param_count() == expected_param_count(spec));
        ModelParams p = init_model(spec, 1);
        CHECK(p.values.size() == spec.param_count());
    }
}

TEST_CASE("group layout is ordered conv blocks, dense, head, and offsets tile the vector") {
    ModelSpec spec;
    auto groups = spec.layer_groups();
    REQUIRE(groups.size() == 4);
    CHECK(groups[0].name == "conv-block-1");
    CHECK(groups[1].name == "conv-block-2");
    CHECK(groups[2].name == "dense-1");
    CHECK(groups[3].name == "output-head");
    size_t offset = 0;
    for (const auto& g : groups) {
        CHECK(g.offset == offset);
        offset += g.size;
    }
    CHECK(offset == spec.param_count());
}

TEST_CASE("a spec without conv blocks still has two groups") {
    ModelSpec s;
    s.conv_channels = {};
    auto groups = s.layer_groups();
    REQUIRE(groups.size() == 2);
    CHECK(groups[0].name == "dense-1");
    CHECK(groups[1].name == "output-head");
}

TEST_CASE("spec validation rejects impossible pooling and bad fields") {
    ModelSpec s = micro_spec();
    CHECK_NOTHROW(s.validate());

    ModelSpec tiny = s;
    tiny.input_height = 1;  // cannot 2x2-pool a 1-pixel-tall map
    CHECK_THROWS_AS(tiny.validate(), ConfigError);

    ModelSpec zero = s;
    zero.num_classes = 0;
    CHECK_THROWS_AS(zero.validate(), ConfigError);
}

TEST_CASE("spec JSON round-trips and digests are stable") {
    ModelSpec s = micro_spec();
    ModelSpec back = ModelSpec::from_json(s.to_json());
    CHECK(back == s);
    CHECK(back.digest() == s.digest());

    ModelSpec other = s;
    other.dense_units = 5;
    CHECK(other.digest() != s.digest());
}

TEST_CASE("uniform logits cost ln(k)") {
    for (int k = 2; k <= 10; ++k) {
        std::vector<double> logits(static_cast<size_t>(k), 0.7);
        CHECK(cross_entropy(logits, 0) == doctest::Approx(std::log(double(k))).epsilon(1e-12));
    }
}

TEST_CASE("extreme logits evaluate without overflow") {
    // With logits (1000, 0, 0) and the true class first, the exact loss is
    // log(1 + 2*exp(-1000)), which underflows to 0 in double precision.
    std::vector<double> logits = {1000.0, 0.0, 0.0};
    double loss = cross_entropy(logits, 0);
    CHECK(std::isfinite(loss));
    CHECK(loss >= 0.0);
    CHECK(loss == doctest::Approx(0.0).epsilon(1e-12));

    // and the wrong class costs ~1000 without blowing up
    double wrong = cross_entropy(logits, 1);
    CHECK(std::isfinite(wrong));
    CHECK(wrong == doctest::Approx(1000.0).epsilon(1e-9));
}

TEST_CASE("adding a constant to all logits leaves the loss unchanged") {
    Rng rng(3);
    for (int rep = 0; rep < 20; ++rep) {
        std::vector<double> logits(5);
        for (auto& v : logits) v = rng.uniform(-4.0, 4.0);
        int label = static_cast<int>(rng.uniform_u64(5));
        double base = cross_entropy(logits, label);
        for (double c : {-100.0, -1.0, 0.5, 250.0}) {
            std::vector<double> shifted = logits;
            for (auto& v : shifted) v += c;
            CHECK(cross_entropy(shifted, label) == doctest::Approx(base).epsilon(1e-9));
        }
    }
}

TEST_CASE("cross entropy rejects non-finite logits and bad labels") {
    std::vector<double> logits = {0.0, 1.0, std::numeric_limits<double>::quiet_NaN()};
    CHECK_THROWS_AS(cross_entropy(logits, 0), NumericError);
    std::vector<double> inf = {0.0, std::numeric_limits<double>::infinity()};
    CHECK_THROWS_AS(cross_entropy(inf, 0), NumericError);
    std::vector<double> fine = {0.0, 1.0};
    CHECK_THROWS_AS(cross_entropy(fine, 2), ConfigError);
    CHECK_THROWS_AS(cross_entropy(fine, -1), ConfigError);
}

TEST_CASE("loss gradient w.r.t. logits matches central finite differences") {
    Rng rng(17);
    for (int rep = 0; rep < 25; ++rep) {
        std::vector<double> logits(6);
        for (auto& v : logits) v = rng.uniform(-3.0, 3.0);
        int label = static_cast<int>(rng.uniform_u64(6));

        std::vector<double> grad = cross_entropy_grad(logits, label);
        const double eps = 1e-6;
        for (size_t i = 0; i < logits.size(); ++i) {
            std::vector<double> plus = logits, minus = logits;
            plus[i] += eps;
            minus[i] -= eps;
            double fd = (cross_entropy(plus, label) - cross_entropy(minus, label)) / (2 * eps);
            double denom = std::max({std::abs(fd), std::abs(grad[i]), 1e-8});
            CHECK(std::abs(grad[i] - fd) / denom < 1e-5);
        }
    }
}

TEST_CASE("full-model parameter gradient matches central finite differences") {
    ModelSpec spec = micro_spec();
    ModelParams params = init_model(spec, 23);
    Image img = random_image(4, 4, 1, 24);
    const int label = 1;

    Workspace ws;
    std::vector<double> grad(params.values.size(), 0.0);
    forward_backward(params, img, label, ws, grad);

    const double eps = 1e-6;
    Workspace ws2;
    size_t checked = 0;
    for (size_t i = 0; i < params.values.size(); ++i) {
        ModelParams plus = params, minus = params;
        plus.values[i] += eps;
        minus.values[i] -= eps;
        forward(plus, img, ws2);
        double lp = cross_entropy(ws2.logits, label);
        forward(minus, img, ws2);
        double lm = cross_entropy(ws2.logits, label);
        double fd = (lp - lm) / (2 * eps);
        double denom = std::max({std::abs(fd), std::abs(grad[i]), 1e-6});
        CHECK(std::abs(grad[i] - fd) / denom < 1e-4);
        ++checked;
    }
    CHECK(checked == params.values.size());
}

TEST_CASE("gradients of frozen prefixes are left untouched") {
    ModelSpec spec = micro_spec();
    ModelParams params = init_model(spec, 31);
    Image img = random_image(4, 4, 1, 32);

    auto groups = spec.layer_groups();
    Workspace ws;
    // Poison the accumulator with a sentinel; untouched entries must keep it.
    std::vector<double> grad(params.values.size(), -123.5);
    forward_backward(params, img, 0, ws, grad, /*first_group=*/1);

    for (size_t i = 0; i < groups[0].size; ++i) CHECK(grad[i] == -123.5);
    bool any_written = false;
    for (size_t i = groups[1].offset; i < params.values.size(); ++i)
        if (grad[i] != -123.5) any_written = true;
    CHECK(any_written);
}

TEST_CASE("partial and full backward agree on the unfrozen suffix") {
    ModelSpec spec;
    spec.input_height = 8;
    spec.input_width = 8;
    spec.conv_channels = {3, 4};
    spec.dense_units = 6;
    spec.num_classes = 4;
    ModelParams params = init_model(spec, 41);
    Image img = random_image(8, 8, 1, 42);

    Workspace ws;
    std::vector<double> full(params.values.size(), 0.0);
    double loss_full = forward_backward(params, img, 2, ws, full, 0);

    auto groups = spec.layer_groups();
    for (int fp = 1; fp < static_cast<int>(groups.size()); ++fp) {
        std::vector<double> part(params.values.size(), 0.0);
        double loss_part = forward_backward(params, img, 2, ws, part, fp);
        CHECK(loss_part == doctest::Approx(loss_full).epsilon(1e-12));
        for (size_t i = groups[static_cast<size_t>(fp)].offset; i < params.values.size(); ++i)
            CHECK(part[i] == doctest::Approx(full[i]).epsilon(1e-12));
    }
}

TEST_CASE("argmax ties break toward the smallest class index") {
    CHECK(argmax_class({1.0, 3.0, 3.0}) == 1);
    CHECK(argmax_class({2.0, 2.0, 2.0}) == 0);
    CHECK(argmax_class({-1.0, -3.0}) == 0);
    CHECK(argmax_class({0.0, 0.5}) == 1);
}

TEST_CASE("prediction rejects non-finite parameters") {
    ModelSpec spec = micro_spec();
    ModelParams params = init_model(spec, 51);
    params.values[3] = std::numeric_limits<double>::quiet_NaN();
    Image img = random_image(4, 4, 1, 52);
    Workspace ws;
    CHECK_THROWS_AS(predict_class(params, img, ws), NumericError);
}

TEST_CASE("params validation checks partition size and finiteness") {
    ModelSpec spec = micro_spec();
    ModelParams p = init_model(spec, 61);
    CHECK_NOTHROW(p.validate());

    ModelParams short_vec = p;
    short_vec.values.pop_back();
    CHECK_THROWS(short_vec.validate());

    ModelParams nan_vec = p;
    nan_vec.values[0] = std::numeric_limits<double>::quiet_NaN();
    CHECK_THROWS_AS(nan_vec.validate(), NumericError);
}

TEST_CASE("value digests differ when any parameter changes") {
    ModelSpec spec = micro_spec();
    ModelParams a = init_model(spec, 71);
    ModelParams b = a;
    CHECK(a.digest() == b.digest());
    b.values.back() += 1e-12;
    CHECK(a.digest() != b.digest());
}

TEST_CASE("role names round-trip") {
    for (Role r : {Role::Scratch, Role::Baseline, Role::FrozenProbe, Role::Cleansed})
        CHECK(role_from_name(role_name(r)) == r);
    CHECK_THROWS(role_from_name("volunteer"));
}

TEST_CASE("biases start at zero and weights at the expected scale") {
    ModelSpec spec;
    spec.conv_channels = {8};
    ModelParams p = init_model(spec, 81);
    auto groups = spec.layer_groups();
    // conv-block-1: 8*3*3*1 weights then 8 biases
    size_t wcount = 8 * 9;
    for (size_t i = wcount; i < wcount + 8; ++i) CHECK(p.values[i] == 0.0);

    double sumsq = 0.0;
    for (size_t i = 0; i < wcount; ++i) sumsq += p.values[i] * p.values[i];
    double std_est = std::sqrt(sumsq / static_cast<double>(wcount));
    double he = std::sqrt(2.0 / 9.0);  // fan_in = 3*3*1
    CHECK(std_est > 0.5 * he);
    CHECK(std_est < 1.5 * he);
}
