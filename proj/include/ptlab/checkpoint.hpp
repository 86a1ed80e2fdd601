#pragma once

#include <string>

#include "json.hpp"
#include "ptlab/model.hpp"

namespace ptlab {

// Writes <prefix>.bin (raw little-endian doubles) and <prefix>.json (role,
// seed, epochs, spec, digests, plus the caller's config echo). The binary
// file's bytes digest to the same value as ModelParams::digest().
void save_checkpoint(const ModelParams& params, const std::string& prefix,
                     const nlohmann::json& config = nlohmann::json());

// Refuses to load when the parameter bytes or the spec do not match the
// digests recorded in the sidecar.
ModelParams load_checkpoint(const std::string& prefix);

}  // namespace ptlab
