#include "ptlab/runner.hpp"

#include <chrono>
#include <filesystem>
#include <fstream>
#include <optional>

#include "ptlab/checkpoint.hpp"
#include "ptlab/dataset_io.hpp"
#include "ptlab/digest.hpp"
#include "ptlab/errors.hpp"
#include "ptlab/metrics.hpp"
#include "ptlab/report.hpp"
#include "ptlab/synthetic.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace ptlab {

json RunManifest::to_json() const {
    json j;
    j["format"] = "ptlab-manifest-v1";
    j["config_digest"] = config_digest;
    j["library_version"] = library_version;
    j["digest_algorithm"] = digest_algorithm;
    json stages_json = json::array();
    for (const auto& stage : stages) {
        json s;
        s["name"] = stage.name;
        s["status"] = stage.status;
        s["wall_ms"] = stage.wall_ms;
        json artifacts = json::array();
        for (const auto& a : stage.artifacts) {
            artifacts.push_back({{"path", a.path}, {"digest", a.digest}});
        }
        s["artifacts"] = std::move(artifacts);
        stages_json.push_back(std::move(s));
    }
    j["stages"] = std::move(stages_json);
    return j;
}

RunManifest RunManifest::from_json(const json& j) {
    if (j.value("format", "") != "ptlab-manifest-v1") {
        throw std::runtime_error("not a ptlab-manifest-v1 document");
    }
    RunManifest m;
    m.config_digest = j.at("config_digest").get<std::string>();
    m.library_version = j.at("library_version").get<std::string>();
    m.digest_algorithm = j.at("digest_algorithm").get<std::string>();
    for (const auto& s : j.at("stages")) {
        StageRecord rec;
        rec.name = s.at("name").get<std::string>();
        rec.status = s.at("status").get<std::string>();
        rec.wall_ms = s.at("wall_ms").get<long long>();
        for (const auto& a : s.at("artifacts")) {
            rec.artifacts.push_back(
                {a.at("path").get<std::string>(), a.at("digest").get<std::string>()});
        }
        m.stages.push_back(std::move(rec));
    }
    return m;
}

namespace {

template <typename F>
auto with_stage(const std::string& stage, F&& f) -> decltype(f()) {
    try {
        return f();
    } catch (const ConfigError& e) {
        throw ConfigError(stage + ": " + e.what());
    } catch (const DivergenceError& e) {
        throw DivergenceError(e.epoch, e.step, stage + ": " + e.what());
    } catch (const StageError&) {
        throw;
    } catch (const std::exception& e) {
        throw StageError(stage, e.what());
    }
}

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << text;
    if (!out) throw std::runtime_error("write failed for " + path.string());
}

void write_json(const fs::path& path, const json& j) { write_text(path, j.dump(2) + "\n"); }

json read_json(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + path.string());
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw std::runtime_error("malformed JSON in " + path.string() + ": " + e.what());
    }
    return j;
}

ModelSpec spec_for(const ExperimentConfig& cfg, const Dataset& data) {
    ModelSpec spec;
    spec.input_height = data.height();
    spec.input_width = data.width();
    spec.input_channels = data.channels();
    spec.num_classes = data.num_classes;
    spec.conv_channels = cfg.conv_channels;
    spec.dense_units = cfg.dense_units;
    spec.validate();
    return spec;
}

// Non-evaluation stages drop the ground-truth flags right at the load
// boundary and hand the bare dataset onward.
Dataset load_examples_only(const std::string& prefix) { return load_dataset(prefix).data; }

std::vector<std::string> stage_poison(const ExperimentConfig& cfg) {
    Dataset train, test;
    if (cfg.dataset.type == "synthetic") {
        train = make_synthetic_corpus(cfg.dataset.train_count, cfg.corpus_train_seed());
        test = make_synthetic_corpus(cfg.dataset.test_count, cfg.corpus_test_seed());
    } else {
        train = load_image_folder(cfg.dataset.train_dir);
        test = load_image_folder(cfg.dataset.test_dir);
        if (train.num_classes != test.num_classes) {
            throw ConfigError("train folder has " + std::to_string(train.num_classes) +
                              " classes but test folder has " +
                              std::to_string(test.num_classes));
        }
    }
    if (train.height() != test.height() || train.width() != test.width() ||
        train.channels() != test.channels()) {
        throw ConfigError("train and test sets disagree on image shape");
    }
    if (cfg.attack.target_class >= train.num_classes) {
        throw ConfigError("attack.target_class " + std::to_string(cfg.attack.target_class) +
                          " out of range for " + std::to_string(train.num_classes) + " classes");
    }

    PoisonPlan plan;
    plan.mode = cfg.attack.mode;
    plan.target_class = cfg.attack.target_class;
    plan.rate = cfg.attack.rate;
    plan.seed = cfg.poison_seed();
    plan.trigger =
        resolve_trigger(cfg.attack, train.height(), train.width(), train.channels(), plan.seed);

    const auto selection = plan_selection(train, plan);
    const PoisonedDataset poisoned = build_poisoned_dataset(train, selection, plan);
    const PoisonedDataset backdoor =
        build_backdoor_testset(test, plan.trigger, plan.target_class);
    PoisonedDataset clean_test;
    clean_test.data = std::move(test);

    const fs::path out(cfg.output_dir);
    save_dataset(poisoned, (out / "data" / "train").string());
    save_dataset(clean_test, (out / "data" / "test_clean").string());
    save_dataset(backdoor, (out / "data" / "test_backdoor").string());
    return {"data/train.json",         "data/train.pix",        "data/test_clean.json",
            "data/test_clean.pix",     "data/test_backdoor.json",
            "data/test_backdoor.pix"};
}

std::vector<std::string> stage_train_baseline(const ExperimentConfig& cfg) {
    const fs::path out(cfg.output_dir);
    const Dataset data = load_examples_only((out / "data" / "train").string());
    const ModelSpec spec = spec_for(cfg, data);
    const ModelParams init = init_model(spec, cfg.baseline.seed);
    const ModelParams trained = train(init, data, cfg.baseline);
    save_checkpoint(trained, (out / "models" / "baseline").string(),
                    cfg.to_json().at("baseline"));
    return {"models/baseline.bin", "models/baseline.json"};
}

MetricsReport evaluate_role(const ExperimentConfig& cfg, const std::string& checkpoint_name) {
    const fs::path out(cfg.output_dir);
    const ModelParams params = load_checkpoint((out / "models" / checkpoint_name).string());
    const Dataset clean_test = load_examples_only((out / "data" / "test_clean").string());
    const Dataset backdoor_test = load_examples_only((out / "data" / "test_backdoor").string());
    MetricsReport report =
        evaluate_model(params, clean_test, backdoor_test, cfg.attack.target_class);
    report.config_digest = cfg.digest();
    report.checkpoint_digest = digest_hex(params.digest());
    return report;
}

std::vector<std::string> stage_evaluate_baseline(const ExperimentConfig& cfg) {
    const MetricsReport report = evaluate_role(cfg, "baseline");
    write_json(fs::path(cfg.output_dir) / "reports" / "baseline_metrics.json", report.to_json());
    return {"reports/baseline_metrics.json"};
}

std::vector<std::string> stage_probe(const ExperimentConfig& cfg) {
    const fs::path out(cfg.output_dir);
    const Dataset data = load_examples_only((out / "data" / "train").string());
    const ModelSpec spec = spec_for(cfg, data);
    const ModelParams probe = train_frozen(spec, data, cfg.probe);
    save_checkpoint(probe, (out / "models" / "probe").string(), cfg.to_json().at("probe"));
    return {"models/probe.bin", "models/probe.json"};
}

std::vector<std::string> stage_isolate(const ExperimentConfig& cfg) {
    const fs::path out(cfg.output_dir);
    const Dataset data = load_examples_only((out / "data" / "train").string());
    const ModelParams probe = load_checkpoint((out / "models" / "probe").string());
    const auto losses = per_sample_losses(probe, data);
    IsolationResult result = isolate(losses, cfg.isolation_rate);
    result.probe_digest = digest_hex(probe.digest());
    write_json(out / "isolation.json", result.to_json());
    return {"isolation.json"};
}

std::vector<std::string> stage_defend(const ExperimentConfig& cfg) {
    const fs::path out(cfg.output_dir);
    const Dataset data = load_examples_only((out / "data" / "train").string());
    const ModelParams baseline = load_checkpoint((out / "models" / "baseline").string());
    const IsolationResult split = IsolationResult::from_json(read_json(out / "isolation.json"));
    const ModelParams cleansed = unlearn_finetune(baseline, data, split, cfg.unlearn);
    save_checkpoint(cleansed, (out / "models" / "cleansed").string(),
                    cfg.to_json().at("unlearn"));
    return {"models/cleansed.bin", "models/cleansed.json"};
}

std::vector<std::string> stage_evaluate_defended(const ExperimentConfig& cfg) {
    const fs::path out(cfg.output_dir);
    MetricsReport report = evaluate_role(cfg, "cleansed");

    // ground truth enters evaluation (and only evaluation) here
    const PoisonedDataset train = load_dataset((out / "data" / "train").string());
    const IsolationResult split = IsolationResult::from_json(read_json(out / "isolation.json"));
    if (const auto quality = isolation_quality(split, train.poison_mask)) {
        report.isolation_precision = quality->first;
        report.isolation_recall = quality->second;
    }
    write_json(out / "reports" / "defended_metrics.json", report.to_json());

    const MetricsReport baseline =
        MetricsReport::from_json(read_json(out / "reports" / "baseline_metrics.json"));
    const ReportRow row = make_report_row(cfg.attack.preset_name(), cfg.dataset.display_name(),
                                          baseline, report);
    write_json(out / "reports" / "report.json", render_report_json({row}));
    write_text(out / "reports" / "report.txt", render_report_text({row}));
    return {"reports/defended_metrics.json", "reports/report.json", "reports/report.txt"};
}

std::vector<std::string> execute_stage_body(const ExperimentConfig& cfg, size_t index) {
    switch (index) {
        case 0: return stage_poison(cfg);
        case 1: return stage_train_baseline(cfg);
        case 2: return stage_evaluate_baseline(cfg);
        case 3: return stage_probe(cfg);
        case 4: return stage_isolate(cfg);
        case 5: return stage_defend(cfg);
        default: return stage_evaluate_defended(cfg);
    }
}

void ensure_run_dirs(const ExperimentConfig& cfg) {
    const fs::path out(cfg.output_dir);
    std::error_code ec;
    fs::create_directories(out / "data", ec);
    fs::create_directories(out / "models", ec);
    fs::create_directories(out / "reports", ec);
    if (ec) throw ConfigError("cannot create output directory " + out.string());
}

void execute_and_record(const ExperimentConfig& cfg, size_t index, RunManifest& manifest) {
    const std::string name = kStageNames[index];
    const auto start = std::chrono::steady_clock::now();
    const auto artifacts = with_stage(name, [&] { return execute_stage_body(cfg, index); });
    const auto elapsed = std::chrono::steady_clock::now() - start;

    StageRecord record;
    record.name = name;
    record.wall_ms =
        std::chrono::duration_cast<std::chrono::milliseconds>(elapsed).count();
    for (const auto& rel : artifacts) {
        const auto file = fs::path(cfg.output_dir) / rel;
        record.artifacts.push_back({rel, digest_hex(file_digest(file.string()))});
    }
    manifest.stages.push_back(std::move(record));
    write_json(fs::path(cfg.output_dir) / "manifest.json", manifest.to_json());
}

std::optional<RunManifest> try_load_manifest(const ExperimentConfig& cfg) {
    const fs::path path = fs::path(cfg.output_dir) / "manifest.json";
    if (!fs::exists(path)) return std::nullopt;
    try {
        return RunManifest::from_json(read_json(path));
    } catch (const std::exception&) {
        return std::nullopt;  // unreadable manifest: rerun from scratch
    }
}

bool stage_intact(const ExperimentConfig& cfg, const StageRecord& record) {
    if (record.status != "complete") return false;
    for (const auto& a : record.artifacts) {
        const auto file = fs::path(cfg.output_dir) / a.path;
        if (!fs::exists(file)) return false;
        try {
            if (digest_hex(file_digest(file.string())) != a.digest) return false;
        } catch (const std::exception&) {
            return false;
        }
    }
    return true;
}

}  // namespace

RunManifest run_pipeline(const ExperimentConfig& cfg, bool resume) {
    ensure_run_dirs(cfg);

    RunManifest manifest;
    manifest.config_digest = cfg.digest();
    manifest.digest_algorithm = digest_algorithm();

    size_t next = 0;
    if (resume) {
        if (const auto stored = try_load_manifest(cfg)) {
            if (stored->config_digest != manifest.config_digest) {
                throw ConfigError("resume refused: manifest was produced by config digest " +
                                  stored->config_digest + ", current config digest is " +
                                  manifest.config_digest);
            }
            for (size_t i = 0; i < stored->stages.size() && i < kStageNames.size(); ++i) {
                if (stored->stages[i].name != kStageNames[i]) break;
                if (!stage_intact(cfg, stored->stages[i])) break;
                manifest.stages.push_back(stored->stages[i]);
                next = i + 1;
            }
        }
    }

    for (size_t i = next; i < kStageNames.size(); ++i) {
        execute_and_record(cfg, i, manifest);
    }
    return manifest;
}

void run_stage(const ExperimentConfig& cfg, const std::string& stage) {
    size_t index = kStageNames.size();
    for (size_t i = 0; i < kStageNames.size(); ++i) {
        if (stage == kStageNames[i]) {
            index = i;
            break;
        }
    }
    if (index == kStageNames.size()) {
        throw ConfigError("unknown stage '" + stage + "'");
    }

    ensure_run_dirs(cfg);
    RunManifest manifest;
    manifest.config_digest = cfg.digest();
    manifest.digest_algorithm = digest_algorithm();
    if (const auto stored = try_load_manifest(cfg)) {
        if (stored->config_digest == manifest.config_digest) {
            // keep records of earlier stages; anything from this one on is stale
            for (size_t i = 0; i < stored->stages.size() && i < index; ++i) {
                manifest.stages.push_back(stored->stages[i]);
            }
        }
    }
    execute_and_record(cfg, index, manifest);
}

std::string report_text(const ExperimentConfig& cfg) {
    return with_stage("report", [&] {
        const auto j = read_json(fs::path(cfg.output_dir) / "reports" / "report.json");
        return render_report_text(report_rows_from_json(j));
    });
}

}  // namespace ptlab
