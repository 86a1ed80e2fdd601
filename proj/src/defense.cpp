#include "ptlab/defense.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <set>
#include <unordered_map>

#include "ptlab/digest.hpp"
#include "ptlab/errors.hpp"
#include "ptlab/rng.hpp"

using nlohmann::json;

namespace ptlab {

namespace {

double round_sig9(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.9g", v);
    return std::strtod(buf, nullptr);
}

}  // namespace

json IsolationResult::to_json() const {
    json j;
    j["rate"] = isolation_rate;
    j["probe_digest"] = probe_digest;
    j["suspicious_ids"] = suspicious_ids;
    json loss_map = json::object();
    for (const auto& [id, loss] : losses) {
        loss_map[std::to_string(id)] = round_sig9(loss);
    }
    j["losses"] = std::move(loss_map);
    return j;
}

IsolationResult IsolationResult::from_json(const json& j) {
    IsolationResult r;
    r.isolation_rate = j.at("rate").get<double>();
    r.probe_digest = j.at("probe_digest").get<std::string>();
    r.suspicious_ids = j.at("suspicious_ids").get<std::vector<int32_t>>();
    std::set<int32_t> suspicious(r.suspicious_ids.begin(), r.suspicious_ids.end());
    for (const auto& [key, value] : j.at("losses").items()) {
        size_t pos = 0;
        const int32_t id = std::stoi(key, &pos);
        if (pos != key.size()) throw std::runtime_error("bad loss id key '" + key + "'");
        r.losses[id] = value.get<double>();
        if (suspicious.count(id) == 0) r.retained_ids.push_back(id);
    }
    std::sort(r.retained_ids.begin(), r.retained_ids.end());
    std::sort(r.suspicious_ids.begin(), r.suspicious_ids.end());
    return r;
}

IsolationResult isolate(const std::vector<IdLoss>& losses, double rate) {
    if (!(rate > 0.0 && rate < 1.0)) {
        throw ConfigError("isolation rate must lie in (0, 1), got " + std::to_string(rate));
    }
    const size_t n = losses.size();
    if (n < 2) {
        throw ConfigError("isolation needs at least 2 samples, got " + std::to_string(n));
    }
    std::set<int32_t> seen;
    for (const auto& [id, loss] : losses) {
        if (!std::isfinite(loss)) {
            throw NumericError("non-finite loss for sample id " + std::to_string(id));
        }
        if (!seen.insert(id).second) {
            throw ConfigError("duplicate sample id " + std::to_string(id) + " in loss list");
        }
    }

    // round half-up
    const size_t k = static_cast<size_t>(std::floor(rate * static_cast<double>(n) + 0.5));
    if (k == 0 || k == n) {
        throw ConfigError("isolation rate " + std::to_string(rate) + " would isolate " +
                          std::to_string(k) + " of " + std::to_string(n) + " samples");
    }

    std::vector<IdLoss> order(losses);
    std::sort(order.begin(), order.end(), [](const IdLoss& a, const IdLoss& b) {
        if (a.loss != b.loss) return a.loss < b.loss;
        return a.id < b.id;
    });

    IsolationResult result;
    result.isolation_rate = rate;
    for (size_t i = 0; i < n; ++i) {
        result.losses[order[i].id] = order[i].loss;
        if (i < k) {
            result.suspicious_ids.push_back(order[i].id);
        } else {
            result.retained_ids.push_back(order[i].id);
        }
    }
    std::sort(result.suspicious_ids.begin(), result.suspicious_ids.end());
    std::sort(result.retained_ids.begin(), result.retained_ids.end());
    return result;
}

void UnlearnConfig::validate() const {
    if (!(lr_retain >= 0.0) || !std::isfinite(lr_retain) || !(lr_unlearn >= 0.0) ||
        !std::isfinite(lr_unlearn)) {
        throw ConfigError("unlearn learning rates must be finite non-negative reals");
    }
    if (epochs < 1) throw ConfigError("unlearn epochs must be positive, got " + std::to_string(epochs));
    if (batch_size < 1) {
        throw ConfigError("unlearn batch_size must be positive, got " + std::to_string(batch_size));
    }
    if (!(ascent_loss_cap > 0.0)) {
        throw ConfigError("ascent_loss_cap must be positive, got " +
                          std::to_string(ascent_loss_cap));
    }
}

namespace {

// Cycles through the suspicious set in batches, reshuffling on wrap.
class AscentBatches {
   public:
    AscentBatches(std::vector<size_t> indices, int batch_size, uint64_t seed)
        : indices_(std::move(indices)), batch_size_(batch_size), seed_(seed) {
        reshuffle();
    }

    std::vector<size_t> next() {
        if (pos_ >= indices_.size()) {
            ++cycle_;
            reshuffle();
        }
        const size_t end = std::min(indices_.size(), pos_ + batch_size_);
        std::vector<size_t> batch(indices_.begin() + pos_, indices_.begin() + end);
        pos_ = end;
        return batch;
    }

   private:
    void reshuffle() {
        Rng rng(derive_seed(seed_, "ascent-" + std::to_string(cycle_)));
        rng.shuffle(indices_);
        pos_ = 0;
    }

    std::vector<size_t> indices_;
    size_t batch_size_;
    uint64_t seed_;
    size_t pos_ = 0;
    int cycle_ = 0;
};

void check_finite_after_step(const std::vector<double>& values, int epoch, int step) {
    for (double v : values) {
        if (!std::isfinite(v)) {
            throw DivergenceError(epoch, step, "non-finite parameter after update step " +
                                                   std::to_string(step));
        }
    }
}

}  // namespace

ModelParams unlearn_finetune(const ModelParams& base, const Dataset& data,
                             const IsolationResult& split, const UnlearnConfig& cfg) {
    cfg.validate();
    base.validate();
    data.validate();
    if (data.num_classes != base.spec.num_classes) {
        throw ConfigError("dataset has " + std::to_string(data.num_classes) +
                          " classes but the model head expects " +
                          std::to_string(base.spec.num_classes));
    }

    // The split must partition the dataset ids exactly.
    std::unordered_map<int32_t, size_t> index_of;
    for (size_t i = 0; i < data.examples.size(); ++i) index_of[data.examples[i].id] = i;
    if (split.suspicious_ids.empty()) {
        throw ConfigError("degenerate split: suspicious set is empty, nothing to unlearn");
    }
    if (split.retained_ids.empty()) {
        throw ConfigError("degenerate split: retained set is empty, nothing to fine-tune on");
    }
    std::set<int32_t> seen;
    std::vector<size_t> retained, suspicious;
    for (int32_t id : split.retained_ids) {
        auto it = index_of.find(id);
        if (it == index_of.end()) {
            throw ConfigError("retained id " + std::to_string(id) + " not in dataset");
        }
        if (!seen.insert(id).second) {
            throw ConfigError("id " + std::to_string(id) + " appears twice in the split");
        }
        retained.push_back(it->second);
    }
    for (int32_t id : split.suspicious_ids) {
        auto it = index_of.find(id);
        if (it == index_of.end()) {
            throw ConfigError("suspicious id " + std::to_string(id) + " not in dataset");
        }
        if (!seen.insert(id).second) {
            throw ConfigError("id " + std::to_string(id) + " appears twice in the split");
        }
        suspicious.push_back(it->second);
    }
    if (seen.size() != data.examples.size()) {
        throw ConfigError("split covers " + std::to_string(seen.size()) + " of " +
                          std::to_string(data.examples.size()) + " dataset ids");
    }

    ModelParams params = base;
    Workspace ws;
    std::vector<double> batch_grad(params.values.size(), 0.0);
    std::vector<double> sample_grad(params.values.size(), 0.0);
    AscentBatches ascent(suspicious, cfg.batch_size, cfg.seed);

    int step = 0;
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        Rng rng(derive_seed(cfg.seed, "retain-" + std::to_string(epoch)));
        std::vector<size_t> order(retained);
        rng.shuffle(order);

        for (size_t start = 0; start < order.size(); start += cfg.batch_size) {
            const size_t end = std::min(order.size(), start + cfg.batch_size);

            // descent on the retained batch
            std::fill(batch_grad.begin(), batch_grad.end(), 0.0);
            try {
                for (size_t s = start; s < end; ++s) {
                    const auto& ex = data.examples[order[s]];
                    forward_backward(params, ex.image, ex.label, ws, batch_grad);
                }
            } catch (const NumericError& e) {
                throw DivergenceError(epoch, step, e.what());
            }
            const double inv_retain = 1.0 / static_cast<double>(end - start);
            for (size_t i = 0; i < params.values.size(); ++i) {
                params.values[i] -= cfg.lr_retain * batch_grad[i] * inv_retain;
            }
            check_finite_after_step(params.values, epoch, step);
            ++step;

            // ascent on the next suspicious batch: the ascent loss is the mean
            // CE over the samples not yet driven past the cap, so samples above
            // the cap contribute zero gradient and leave the mean
            const auto batch = ascent.next();
            std::fill(batch_grad.begin(), batch_grad.end(), 0.0);
            int live = 0;
            try {
                for (size_t idx : batch) {
                    const auto& ex = data.examples[idx];
                    std::fill(sample_grad.begin(), sample_grad.end(), 0.0);
                    const double loss = forward_backward(params, ex.image, ex.label, ws, sample_grad);
                    if (loss <= cfg.ascent_loss_cap) {
                        ++live;
                        for (size_t i = 0; i < batch_grad.size(); ++i) {
                            batch_grad[i] += sample_grad[i];
                        }
                    }
                }
            } catch (const NumericError& e) {
                throw DivergenceError(epoch, step, e.what());
            }
            if (live > 0) {
                const double inv_ascent = 1.0 / static_cast<double>(live);
                for (size_t i = 0; i < params.values.size(); ++i) {
                    params.values[i] += cfg.lr_unlearn * batch_grad[i] * inv_ascent;
                }
            }
            check_finite_after_step(params.values, epoch, step);
            ++step;
        }
    }

    params.role = Role::Cleansed;
    params.epochs_trained = cfg.epochs;
    return params;
}

namespace {

template <typename F>
auto stage_guard(const char* stage, F&& f) -> decltype(f()) {
    try {
        return f();
    } catch (const ConfigError& e) {
        throw ConfigError(std::string(stage) + ": " + e.what());
    } catch (const DivergenceError& e) {
        throw DivergenceError(e.epoch, e.step, std::string(stage) + ": " + e.what());
    } catch (const StageError&) {
        throw;
    } catch (const std::exception& e) {
        throw StageError(stage, e.what());
    }
}

}  // namespace

DefenseArtifacts run_pt_defense(const Dataset& data, const ModelSpec& spec,
                                const TrainConfig& baseline_cfg, const TrainConfig& probe_cfg,
                                const UnlearnConfig& unlearn_cfg, double isolation_rate) {
    DefenseArtifacts out;
    out.baseline = stage_guard("train-baseline", [&] {
        ModelParams init = init_model(spec, baseline_cfg.seed);
        return train(init, data, baseline_cfg);
    });
    out.probe = stage_guard("probe", [&] {
        TrainConfig cfg = probe_cfg;
        cfg.seed = baseline_cfg.seed;  // identical initialization to M_s
        return train_frozen(spec, data, cfg);
    });
    out.isolation = stage_guard("isolate", [&] {
        const auto losses = per_sample_losses(out.probe, data);
        IsolationResult result = isolate(losses, isolation_rate);
        result.probe_digest = digest_hex(out.probe.digest());
        return result;
    });
    out.cleansed = stage_guard("defend", [&] {
        return unlearn_finetune(out.baseline, data, out.isolation, unlearn_cfg);
    });
    return out;
}

}  // namespace ptlab
