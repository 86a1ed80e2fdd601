#pragma once

#include <array>
#include <string>
#include <vector>

#include "json.hpp"
#include "ptlab/config.hpp"

namespace ptlab {

inline constexpr const char* kLibraryVersion = "0.1.0";

inline constexpr std::array<const char*, 7> kStageNames = {
    "poison",  "train-baseline", "evaluate-baseline", "probe",
    "isolate", "defend",         "evaluate-defended"};

struct ArtifactRecord {
    std::string path;  // relative to the output directory
    std::string digest;
};

struct StageRecord {
    std::string name;
    std::vector<ArtifactRecord> artifacts;
    long long wall_ms = 0;
    std::string status = "complete";
};

struct RunManifest {
    std::string config_digest;
    std::string library_version = kLibraryVersion;
    std::string digest_algorithm;
    std::vector<StageRecord> stages;

    nlohmann::json to_json() const;
    static RunManifest from_json(const nlohmann::json& j);
};

// All seven stages in order; every stage persists its artifacts and the
// manifest before the next starts. With resume=true, the leading run of
// stages whose recorded artifacts still exist and digest-match is skipped;
// the stored config digest must equal the current one.
RunManifest run_pipeline(const ExperimentConfig& cfg, bool resume);

// One named stage (see kStageNames); earlier stages' artifacts must already
// be on disk.
void run_stage(const ExperimentConfig& cfg, const std::string& stage);

// The rendered report table of a finished run directory.
std::string report_text(const ExperimentConfig& cfg);

}  // namespace ptlab
