#include "ptlab/train.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "ptlab/errors.hpp"
#include "ptlab/parallel.hpp"
#include "ptlab/rng.hpp"

namespace ptlab {

void TrainConfig::validate(const ModelSpec& spec) const {
    if (epochs < 0) throw ConfigError("epochs must be non-negative, got " + std::to_string(epochs));
    if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate)) {
        throw ConfigError("learning_rate must be a finite non-negative real");
    }
    if (batch_size < 1) {
        throw ConfigError("batch_size must be positive, got " + std::to_string(batch_size));
    }
    if (!(momentum >= 0.0 && momentum < 1.0)) {
        throw ConfigError("momentum must lie in [0, 1), got " + std::to_string(momentum));
    }
    const auto groups = spec.layer_groups();
    if (freeze_prefix < 0 || static_cast<size_t>(freeze_prefix) >= groups.size()) {
        throw ConfigError("freeze_prefix " + std::to_string(freeze_prefix) +
                          " must lie in [0, " + std::to_string(groups.size()) +
                          ") for this architecture");
    }
}

namespace {

void check_dataset(const ModelSpec& spec, const Dataset& data) {
    data.validate();
    if (data.num_classes != spec.num_classes) {
        throw ConfigError("dataset has " + std::to_string(data.num_classes) +
                          " classes but the model head expects " +
                          std::to_string(spec.num_classes));
    }
}

double train_set_accuracy(const ModelParams& params, const Dataset& data, Workspace& ws) {
    size_t correct = 0;
    for (const auto& ex : data.examples) {
        if (predict_class(params, ex.image, ws) == ex.label) ++correct;
    }
    return static_cast<double>(correct) / static_cast<double>(data.examples.size());
}

ModelParams run_sgd(ModelParams params, const Dataset& data, const TrainConfig& cfg, Role role) {
    cfg.validate(params.spec);
    check_dataset(params.spec, data);

    const auto groups = params.spec.layer_groups();
    const size_t update_from = groups[cfg.freeze_prefix].offset;
    const size_t n = data.examples.size();

    std::vector<double> grad(params.values.size(), 0.0);
    std::vector<double> velocity(params.values.size(), 0.0);
    std::vector<size_t> order(n);
    std::iota(order.begin(), order.end(), size_t{0});
    Workspace ws;

    int epochs_done = 0;
    double prev_accuracy = -1.0;
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        Rng shuffle_rng(derive_seed(cfg.seed, "shuffle-" + std::to_string(epoch)));
        shuffle_rng.shuffle(order);

        int batch_index = 0;
        for (size_t start = 0; start < n; start += cfg.batch_size, ++batch_index) {
            const size_t end = std::min(n, start + cfg.batch_size);
            std::fill(grad.begin() + update_from, grad.end(), 0.0);
            try {
                for (size_t s = start; s < end; ++s) {
                    const auto& ex = data.examples[order[s]];
                    forward_backward(params, ex.image, ex.label, ws, grad, cfg.freeze_prefix);
                }
            } catch (const NumericError& e) {
                throw DivergenceError(epoch, batch_index, e.what());
            }

            const double inv = 1.0 / static_cast<double>(end - start);
            for (size_t i = update_from; i < params.values.size(); ++i) {
                velocity[i] = cfg.momentum * velocity[i] + grad[i] * inv;
                params.values[i] -= cfg.learning_rate * velocity[i];
            }
            for (size_t i = update_from; i < params.values.size(); ++i) {
                if (!std::isfinite(params.values[i])) {
                    throw DivergenceError(epoch, batch_index,
                                          "non-finite parameter after update");
                }
            }
        }
        ++epochs_done;

        if (cfg.early_stop_min_gain > 0.0) {
            const double accuracy = train_set_accuracy(params, data, ws);
            if (prev_accuracy >= 0.0 && accuracy - prev_accuracy < cfg.early_stop_min_gain) {
                break;
            }
            prev_accuracy = accuracy;
        }
    }

    params.role = role;
    params.epochs_trained = epochs_done;
    return params;
}

}  // namespace

ModelParams train(const ModelParams& init, const Dataset& data, const TrainConfig& cfg) {
    if (cfg.freeze_prefix != 0) {
        throw ConfigError("baseline training requires freeze_prefix 0, got " +
                          std::to_string(cfg.freeze_prefix));
    }
    init.validate();
    return run_sgd(init, data, cfg, Role::Baseline);
}

ModelParams train_frozen(const ModelSpec& spec, const Dataset& data, const TrainConfig& cfg) {
    if (cfg.freeze_prefix < 1) {
        throw ConfigError("frozen-probe training requires freeze_prefix >= 1, got " +
                          std::to_string(cfg.freeze_prefix));
    }
    ModelParams init = init_model(spec, cfg.seed);
    return run_sgd(std::move(init), data, cfg, Role::FrozenProbe);
}

std::vector<IdLoss> per_sample_losses(const ModelParams& params, const Dataset& data) {
    params.validate();
    check_dataset(params.spec, data);

    std::vector<IdLoss> out(data.examples.size());
    parallel_ranges(data.examples.size(), [&](size_t begin, size_t end, size_t) {
        Workspace ws;
        for (size_t i = begin; i < end; ++i) {
            const auto& ex = data.examples[i];
            try {
                const auto& logits = forward(params, ex.image, ws);
                out[i] = {ex.id, cross_entropy(logits, ex.label)};
            } catch (const NumericError& e) {
                throw NumericError("sample id " + std::to_string(ex.id) + ": " + e.what());
            }
        }
    });
    return out;
}

}  // namespace ptlab
