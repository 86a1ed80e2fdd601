#include "ptlab/config.hpp"

#include <cmath>
#include <fstream>

#include "ptlab/digest.hpp"
#include "ptlab/errors.hpp"
#include "ptlab/rng.hpp"
#include "ptlab/serialize.hpp"

using nlohmann::json;

namespace ptlab {

std::string DatasetSource::display_name() const {
    return type == "synthetic" ? "synthetic" : train_dir;
}

std::string AttackConfig::preset_name() const {
    return type + (mode == PoisonMode::DirtyLabel ? "-dirty" : "-clean");
}

TriggerSpec resolve_trigger(const AttackConfig& attack, int height, int width, int channels,
                            uint64_t seed) {
    if (attack.explicit_trigger) {
        try {
            return trigger_from_json(*attack.explicit_trigger);
        } catch (const std::exception& e) {
            throw ConfigError(std::string("attack.trigger: ") + e.what());
        }
    }
    if (attack.type == "badnet") {
        return default_patch_trigger(height, width, channels);
    }
    if (attack.type == "blend") {
        BlendTrigger t;
        t.trigger_image =
            noise_trigger_image(height, width, channels, derive_seed(seed, "blend-trigger"));
        t.alpha = static_cast<float>(attack.blend_alpha);
        return t;
    }
    SinusoidalTrigger t;
    t.amplitude = static_cast<float>(attack.sig_amplitude);
    t.frequency = attack.sig_frequency;
    return t;
}

namespace {

void require_object(const json& j, const std::string& path) {
    if (!j.is_object()) throw ConfigError(path + " must be an object");
}

void reject_unknown(const json& obj, const std::string& path,
                    std::initializer_list<const char*> allowed) {
    for (const auto& [key, value] : obj.items()) {
        (void)value;
        bool known = false;
        for (const char* a : allowed) {
            if (key == a) {
                known = true;
                break;
            }
        }
        if (!known) {
            throw ConfigError("unknown key '" + (path.empty() ? key : path + "." + key) + "'");
        }
    }
}

template <typename T>
T get_field(const json& obj, const std::string& path, const char* key, T fallback) {
    if (!obj.contains(key)) return fallback;
    try {
        return obj.at(key).get<T>();
    } catch (const json::exception&) {
        throw ConfigError(path + "." + key + " has the wrong type");
    }
}

void parse_dataset(const json& j, ExperimentConfig& cfg) {
    if (j.is_string()) {
        const auto name = j.get<std::string>();
        if (name != "synthetic") {
            throw ConfigError("dataset: '" + name +
                              "' is not a dataset shorthand (only \"synthetic\"; image folders "
                              "need an object with train_dir/test_dir)");
        }
        cfg.dataset.type = "synthetic";
        return;
    }
    require_object(j, "dataset");
    const std::string type = get_field<std::string>(j, "dataset", "type", "synthetic");
    if (type == "synthetic") {
        reject_unknown(j, "dataset", {"type", "train_count", "test_count"});
        cfg.dataset.type = type;
        cfg.dataset.train_count = get_field<int>(j, "dataset", "train_count", 10000);
        cfg.dataset.test_count = get_field<int>(j, "dataset", "test_count", 2000);
        if (cfg.dataset.train_count < 10) {
            throw ConfigError("dataset.train_count must be at least 10, got " +
                              std::to_string(cfg.dataset.train_count));
        }
        if (cfg.dataset.test_count < 1) {
            throw ConfigError("dataset.test_count must be positive, got " +
                              std::to_string(cfg.dataset.test_count));
        }
    } else if (type == "image-folder") {
        reject_unknown(j, "dataset", {"type", "train_dir", "test_dir"});
        cfg.dataset.type = type;
        cfg.dataset.train_dir = get_field<std::string>(j, "dataset", "train_dir", "");
        cfg.dataset.test_dir = get_field<std::string>(j, "dataset", "test_dir", "");
        if (cfg.dataset.train_dir.empty() || cfg.dataset.test_dir.empty()) {
            throw ConfigError("dataset: image-folder needs both train_dir and test_dir");
        }
    } else {
        throw ConfigError("dataset.type must be \"synthetic\" or \"image-folder\", got \"" +
                          type + "\"");
    }
}

void parse_model(const json& j, ExperimentConfig& cfg) {
    if (j.is_string()) {
        const auto name = j.get<std::string>();
        if (name != "default" && name != "small-cnn") {
            throw ConfigError("model: unknown spec name '" + name + "' (known: small-cnn)");
        }
        return;  // defaults already in place
    }
    require_object(j, "model");
    reject_unknown(j, "model", {"conv_channels", "dense_units"});
    cfg.conv_channels = get_field<std::vector<int>>(j, "model", "conv_channels", {8, 16});
    cfg.dense_units = get_field<int>(j, "model", "dense_units", 64);
    for (size_t i = 0; i < cfg.conv_channels.size(); ++i) {
        if (cfg.conv_channels[i] < 1) {
            throw ConfigError("model.conv_channels[" + std::to_string(i) +
                              "] must be positive, got " + std::to_string(cfg.conv_channels[i]));
        }
    }
    if (cfg.dense_units < 1) {
        throw ConfigError("model.dense_units must be positive, got " +
                          std::to_string(cfg.dense_units));
    }
}

void apply_attack_defaults_for_mode(AttackConfig& attack, bool rate_given) {
    if (!rate_given) {
        attack.rate = attack.mode == PoisonMode::DirtyLabel ? 0.2 : 0.05;
    }
}

void parse_attack_preset(const std::string& preset, AttackConfig& attack) {
    const auto dash = preset.find('-');
    if (dash == std::string::npos) {
        throw ConfigError("attack: preset '" + preset +
                          "' must look like \"badnet-dirty\" or \"sig-clean\"");
    }
    const std::string type = preset.substr(0, dash);
    const std::string mode = preset.substr(dash + 1);
    if (type != "badnet" && type != "blend" && type != "sig") {
        throw ConfigError("attack: unknown trigger family '" + type +
                          "' (known: badnet, blend, sig)");
    }
    attack.type = type;
    attack.mode = poison_mode_from_name(mode);
}

void parse_attack(const json& j, ExperimentConfig& cfg) {
    AttackConfig& attack = cfg.attack;
    bool rate_given = false;
    if (j.is_string()) {
        parse_attack_preset(j.get<std::string>(), attack);
    } else {
        require_object(j, "attack");
        reject_unknown(j, "attack",
                       {"type", "mode", "target_class", "rate", "alpha", "amplitude",
                        "frequency", "trigger"});
        attack.type = get_field<std::string>(j, "attack", "type", "badnet");
        if (attack.type != "badnet" && attack.type != "blend" && attack.type != "sig") {
            throw ConfigError("attack.type must be badnet, blend, or sig, got \"" + attack.type +
                              "\"");
        }
        const std::string mode =
            get_field<std::string>(j, "attack", "mode", "dirty-label");
        try {
            attack.mode = poison_mode_from_name(mode);
        } catch (const ConfigError& e) {
            throw ConfigError(std::string("attack.mode: ") + e.what());
        }
        attack.target_class = get_field<int>(j, "attack", "target_class", 0);
        if (attack.target_class < 0) {
            throw ConfigError("attack.target_class must be non-negative, got " +
                              std::to_string(attack.target_class));
        }
        rate_given = j.contains("rate");
        if (rate_given) attack.rate = get_field<double>(j, "attack", "rate", 0.0);
        attack.blend_alpha = get_field<double>(j, "attack", "alpha", attack.blend_alpha);
        attack.sig_amplitude = get_field<double>(j, "attack", "amplitude", attack.sig_amplitude);
        attack.sig_frequency = get_field<int>(j, "attack", "frequency", attack.sig_frequency);
        if (j.contains("trigger")) {
            if (!j.at("trigger").is_object()) {
                throw ConfigError("attack.trigger must be an object");
            }
            attack.explicit_trigger = j.at("trigger");
        }
    }
    apply_attack_defaults_for_mode(attack, rate_given);
    if (!(attack.rate > 0.0 && attack.rate < 1.0)) {
        throw ConfigError("attack.rate must lie in (0, 1), got " + std::to_string(attack.rate));
    }
    if (!(attack.blend_alpha >= 0.0 && attack.blend_alpha <= 1.0)) {
        throw ConfigError("attack.alpha must lie in [0, 1], got " +
                          std::to_string(attack.blend_alpha));
    }
    if (!(attack.sig_amplitude > 0.0 && attack.sig_amplitude <= 1.0)) {
        throw ConfigError("attack.amplitude must lie in (0, 1], got " +
                          std::to_string(attack.sig_amplitude));
    }
    if (attack.sig_frequency < 1) {
        throw ConfigError("attack.frequency must be positive, got " +
                          std::to_string(attack.sig_frequency));
    }
}

void parse_train_section(const json& j, const std::string& path, TrainConfig& out,
                         bool is_probe, const ExperimentConfig& cfg) {
    require_object(j, path);
    if (is_probe) {
        reject_unknown(j, path,
                       {"epochs", "learning_rate", "batch_size", "momentum", "freeze_prefix",
                        "early_stop_min_gain"});
    } else {
        reject_unknown(j, path, {"epochs", "learning_rate", "batch_size", "momentum"});
    }
    out.epochs = get_field<int>(j, path, "epochs", out.epochs);
    out.learning_rate = get_field<double>(j, path, "learning_rate", out.learning_rate);
    out.batch_size = get_field<int>(j, path, "batch_size", out.batch_size);
    out.momentum = get_field<double>(j, path, "momentum", out.momentum);
    if (out.epochs < 1) {
        throw ConfigError(path + ".epochs must be positive, got " + std::to_string(out.epochs));
    }
    if (!(out.learning_rate > 0.0) || !std::isfinite(out.learning_rate)) {
        throw ConfigError(path + ".learning_rate must be a positive real");
    }
    if (out.batch_size < 1) {
        throw ConfigError(path + ".batch_size must be positive, got " +
                          std::to_string(out.batch_size));
    }
    if (!(out.momentum >= 0.0 && out.momentum < 1.0)) {
        throw ConfigError(path + ".momentum must lie in [0, 1), got " +
                          std::to_string(out.momentum));
    }
    if (is_probe) {
        out.freeze_prefix = get_field<int>(j, path, "freeze_prefix", out.freeze_prefix);
        out.early_stop_min_gain =
            get_field<double>(j, path, "early_stop_min_gain", out.early_stop_min_gain);
        const int max_freeze = static_cast<int>(cfg.conv_channels.size()) + 1;
        if (out.freeze_prefix < 1 || out.freeze_prefix > max_freeze) {
            throw ConfigError(path + ".freeze_prefix must lie in [1, " +
                              std::to_string(max_freeze) + "] for this model, got " +
                              std::to_string(out.freeze_prefix));
        }
        if (!(out.early_stop_min_gain >= 0.0 && out.early_stop_min_gain < 1.0)) {
            throw ConfigError(path + ".early_stop_min_gain must lie in [0, 1), got " +
                              std::to_string(out.early_stop_min_gain));
        }
    }
}

void parse_unlearn(const json& j, ExperimentConfig& cfg) {
    require_object(j, "unlearn");
    reject_unknown(j, "unlearn",
                   {"lr_retain", "lr_unlearn", "epochs", "batch_size", "ascent_loss_cap"});
    UnlearnConfig& u = cfg.unlearn;
    u.lr_retain = get_field<double>(j, "unlearn", "lr_retain", u.lr_retain);
    u.lr_unlearn = get_field<double>(j, "unlearn", "lr_unlearn", u.lr_unlearn);
    u.epochs = get_field<int>(j, "unlearn", "epochs", u.epochs);
    u.batch_size = get_field<int>(j, "unlearn", "batch_size", u.batch_size);
    u.ascent_loss_cap = get_field<double>(j, "unlearn", "ascent_loss_cap", u.ascent_loss_cap);
    if (!(u.lr_retain > 0.0) || !std::isfinite(u.lr_retain)) {
        throw ConfigError("unlearn.lr_retain must be a positive real");
    }
    if (!(u.lr_unlearn > 0.0) || !std::isfinite(u.lr_unlearn)) {
        throw ConfigError("unlearn.lr_unlearn must be a positive real");
    }
    if (u.epochs < 1) {
        throw ConfigError("unlearn.epochs must be positive, got " + std::to_string(u.epochs));
    }
    if (u.batch_size < 1) {
        throw ConfigError("unlearn.batch_size must be positive, got " +
                          std::to_string(u.batch_size));
    }
    if (!(u.ascent_loss_cap > 0.0)) {
        throw ConfigError("unlearn.ascent_loss_cap must be positive, got " +
                          std::to_string(u.ascent_loss_cap));
    }
}

}  // namespace

ExperimentConfig config_from_json(const json& j) {
    require_object(j, "config");
    reject_unknown(j, "",
                   {"dataset", "model", "attack", "baseline", "probe", "isolation_rate",
                    "unlearn", "output_dir", "seed"});

    ExperimentConfig cfg;
    cfg.baseline.epochs = 1;
    cfg.baseline.learning_rate = 0.006;
    cfg.baseline.batch_size = 32;
    cfg.baseline.momentum = 0.9;
    cfg.baseline.freeze_prefix = 0;
    cfg.baseline.early_stop_min_gain = 0.0;
    cfg.probe = cfg.baseline;
    cfg.probe.epochs = 5;
    cfg.probe.learning_rate = 0.0002;
    cfg.probe.early_stop_min_gain = 0.002;

    if (j.contains("model")) parse_model(j.at("model"), cfg);
    cfg.probe.freeze_prefix = std::max<int>(1, static_cast<int>(cfg.conv_channels.size()));

    if (j.contains("dataset")) parse_dataset(j.at("dataset"), cfg);
    if (j.contains("attack")) parse_attack(j.at("attack"), cfg);
    if (j.contains("baseline")) parse_train_section(j.at("baseline"), "baseline", cfg.baseline, false, cfg);
    if (j.contains("probe")) parse_train_section(j.at("probe"), "probe", cfg.probe, true, cfg);
    if (j.contains("unlearn")) parse_unlearn(j.at("unlearn"), cfg);

    cfg.isolation_rate = get_field<double>(j, "", "isolation_rate", cfg.isolation_rate);
    if (!(cfg.isolation_rate > 0.0 && cfg.isolation_rate < 1.0)) {
        throw ConfigError("isolation_rate must lie in (0, 1), got " +
                          std::to_string(cfg.isolation_rate));
    }
    cfg.output_dir = get_field<std::string>(j, "", "output_dir", cfg.output_dir);
    if (cfg.output_dir.empty()) throw ConfigError("output_dir must not be empty");
    cfg.seed = get_field<uint64_t>(j, "", "seed", cfg.seed);

    cfg.derive_phase_seeds();
    return cfg;
}

ExperimentConfig load_config(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot open config file " + path);
    json j;
    try {
        in >> j;
    } catch (const json::parse_error& e) {
        throw ConfigError("config " + path + ": " + e.what());
    }
    return config_from_json(j);
}

void ExperimentConfig::derive_phase_seeds() {
    baseline.seed = derive_seed(seed, "train");
    probe.seed = baseline.seed;  // identical initialization by construction
    unlearn.seed = derive_seed(seed, "unlearn");
}

uint64_t ExperimentConfig::corpus_train_seed() const { return derive_seed(seed, "corpus-train"); }
uint64_t ExperimentConfig::corpus_test_seed() const { return derive_seed(seed, "corpus-test"); }
uint64_t ExperimentConfig::poison_seed() const { return derive_seed(seed, "poison"); }

json ExperimentConfig::to_json() const {
    json j;
    if (dataset.type == "synthetic") {
        j["dataset"] = {{"type", "synthetic"},
                        {"train_count", dataset.train_count},
                        {"test_count", dataset.test_count}};
    } else {
        j["dataset"] = {{"type", "image-folder"},
                        {"train_dir", dataset.train_dir},
                        {"test_dir", dataset.test_dir}};
    }
    j["model"] = {{"conv_channels", conv_channels}, {"dense_units", dense_units}};
    json a;
    a["type"] = attack.type;
    a["mode"] = poison_mode_name(attack.mode);
    a["target_class"] = attack.target_class;
    a["rate"] = attack.rate;
    if (attack.type == "blend") a["alpha"] = attack.blend_alpha;
    if (attack.type == "sig") {
        a["amplitude"] = attack.sig_amplitude;
        a["frequency"] = attack.sig_frequency;
    }
    if (attack.explicit_trigger) a["trigger"] = *attack.explicit_trigger;
    j["attack"] = std::move(a);
    j["baseline"] = {{"epochs", baseline.epochs},
                     {"learning_rate", baseline.learning_rate},
                     {"batch_size", baseline.batch_size},
                     {"momentum", baseline.momentum}};
    j["probe"] = {{"epochs", probe.epochs},
                  {"learning_rate", probe.learning_rate},
                  {"batch_size", probe.batch_size},
                  {"momentum", probe.momentum},
                  {"freeze_prefix", probe.freeze_prefix},
                  {"early_stop_min_gain", probe.early_stop_min_gain}};
    j["isolation_rate"] = isolation_rate;
    j["unlearn"] = {{"lr_retain", unlearn.lr_retain},
                    {"lr_unlearn", unlearn.lr_unlearn},
                    {"epochs", unlearn.epochs},
                    {"batch_size", unlearn.batch_size},
                    {"ascent_loss_cap", unlearn.ascent_loss_cap}};
    j["output_dir"] = output_dir;
    j["seed"] = seed;
    return j;
}

std::string ExperimentConfig::digest() const {
    const std::string text = to_json().dump();
    return digest_hex(bytes_digest(text.data(), text.size()));
}

}  // namespace ptlab
