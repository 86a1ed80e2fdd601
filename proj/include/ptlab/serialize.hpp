#pragma once

#include "json.hpp"
#include "ptlab/image.hpp"
#include "ptlab/triggers.hpp"

namespace ptlab {

nlohmann::json image_to_json(const Image& image);
Image image_from_json(const nlohmann::json& j);

// {"kind": "patch"|"blend"|"sig", ...parameters}
nlohmann::json trigger_to_json(const TriggerSpec& trigger);
TriggerSpec trigger_from_json(const nlohmann::json& j);

}  // namespace ptlab
