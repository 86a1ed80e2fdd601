#include "ptlab/metrics.hpp"

#include <algorithm>
#include <set>

#include "ptlab/errors.hpp"
#include "ptlab/parallel.hpp"

using nlohmann::json;

namespace ptlab {

json MetricsReport::to_json() const {
    json j;
    j["role"] = role;
    j["acc"] = acc;
    j["asr"] = asr;
    if (isolation_precision) j["isolation_precision"] = *isolation_precision;
    if (isolation_recall) j["isolation_recall"] = *isolation_recall;
    j["counts"] = {{"clean_correct", clean_correct},
                   {"clean_total", clean_total},
                   {"backdoor_hits", backdoor_hits},
                   {"backdoor_total", backdoor_total}};
    j["provenance"] = {{"config_digest", config_digest},
                       {"checkpoint_digest", checkpoint_digest}};
    return j;
}

MetricsReport MetricsReport::from_json(const json& j) {
    MetricsReport r;
    r.role = j.at("role").get<std::string>();
    r.acc = j.at("acc").get<double>();
    r.asr = j.at("asr").get<double>();
    if (j.contains("isolation_precision")) {
        r.isolation_precision = j.at("isolation_precision").get<double>();
    }
    if (j.contains("isolation_recall")) {
        r.isolation_recall = j.at("isolation_recall").get<double>();
    }
    const auto& counts = j.at("counts");
    r.clean_correct = counts.at("clean_correct").get<size_t>();
    r.clean_total = counts.at("clean_total").get<size_t>();
    r.backdoor_hits = counts.at("backdoor_hits").get<size_t>();
    r.backdoor_total = counts.at("backdoor_total").get<size_t>();
    const auto& prov = j.at("provenance");
    r.config_digest = prov.at("config_digest").get<std::string>();
    r.checkpoint_digest = prov.at("checkpoint_digest").get<std::string>();
    return r;
}

namespace {

size_t count_predictions(const ModelParams& params, const Dataset& data,
                         bool match_label, int target_class) {
    std::vector<size_t> hits(eval_worker_count(), 0);
    parallel_ranges(data.examples.size(), [&](size_t begin, size_t end, size_t worker) {
        Workspace ws;
        size_t local = 0;
        for (size_t i = begin; i < end; ++i) {
            const auto& ex = data.examples[i];
            const int predicted = predict_class(params, ex.image, ws);
            const int wanted = match_label ? ex.label : target_class;
            if (predicted == wanted) ++local;
        }
        hits[worker] += local;
    });
    size_t total = 0;
    for (size_t h : hits) total += h;
    return total;
}

}  // namespace

double accuracy(const ModelParams& params, const Dataset& clean_test) {
    params.validate();
    clean_test.validate();
    if (clean_test.examples.empty()) throw ConfigError("accuracy over an empty test set");
    if (clean_test.num_classes != params.spec.num_classes) {
        throw ConfigError("test set has " + std::to_string(clean_test.num_classes) +
                          " classes but the model head expects " +
                          std::to_string(params.spec.num_classes));
    }
    const size_t correct = count_predictions(params, clean_test, true, 0);
    return static_cast<double>(correct) / static_cast<double>(clean_test.examples.size());
}

double attack_success_rate(const ModelParams& params, const Dataset& backdoor_test,
                           int target_class) {
    params.validate();
    backdoor_test.validate();
    if (backdoor_test.examples.empty()) {
        throw ConfigError("attack success rate over an empty backdoor test set");
    }
    if (target_class < 0 || target_class >= params.spec.num_classes) {
        throw ConfigError("target_class " + std::to_string(target_class) +
                          " out of range for " + std::to_string(params.spec.num_classes) +
                          " classes");
    }
    const size_t hits = count_predictions(params, backdoor_test, false, target_class);
    return static_cast<double>(hits) / static_cast<double>(backdoor_test.examples.size());
}

std::optional<std::pair<double, double>> isolation_quality(
    const IsolationResult& split, const std::vector<int32_t>& poison_mask) {
    if (poison_mask.empty()) return std::nullopt;

    std::set<int32_t> known;
    for (const auto& [id, loss] : split.losses) known.insert(id);
    for (int32_t id : poison_mask) {
        if (known.count(id) == 0) {
            throw ConfigError("poison mask id " + std::to_string(id) +
                              " is not a dataset id in the isolation result");
        }
    }

    std::set<int32_t> mask(poison_mask.begin(), poison_mask.end());
    size_t overlap = 0;
    for (int32_t id : split.suspicious_ids) {
        if (mask.count(id) != 0) ++overlap;
    }
    const double precision =
        static_cast<double>(overlap) / static_cast<double>(split.suspicious_ids.size());
    const double recall = static_cast<double>(overlap) / static_cast<double>(mask.size());
    return std::make_pair(precision, recall);
}

MetricsReport evaluate_model(const ModelParams& params, const Dataset& clean_test,
                             const Dataset& backdoor_test, int target_class) {
    params.validate();
    clean_test.validate();
    backdoor_test.validate();
    if (clean_test.num_classes != params.spec.num_classes) {
        throw ConfigError("test set has " + std::to_string(clean_test.num_classes) +
                          " classes but the model head expects " +
                          std::to_string(params.spec.num_classes));
    }
    if (target_class < 0 || target_class >= params.spec.num_classes) {
        throw ConfigError("target_class " + std::to_string(target_class) +
                          " out of range for " + std::to_string(params.spec.num_classes) +
                          " classes");
    }

    if (clean_test.examples.empty() || backdoor_test.examples.empty()) {
        throw ConfigError("evaluation needs non-empty clean and backdoor test sets");
    }

    MetricsReport report;
    report.role = role_name(params.role);
    report.clean_total = clean_test.examples.size();
    report.clean_correct = count_predictions(params, clean_test, true, 0);
    report.acc = static_cast<double>(report.clean_correct) /
                 static_cast<double>(report.clean_total);
    report.backdoor_total = backdoor_test.examples.size();
    report.backdoor_hits = count_predictions(params, backdoor_test, false, target_class);
    report.asr = static_cast<double>(report.backdoor_hits) /
                 static_cast<double>(report.backdoor_total);
    return report;
}

}  // namespace ptlab
