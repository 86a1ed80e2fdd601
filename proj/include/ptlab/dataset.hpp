#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ptlab/image.hpp"

namespace ptlab {

struct LabeledExample {
    int32_t id = 0;
    Image image;
    int label = 0;
    std::string path;  // source file for ingested data; empty for synthetic
};

// Plain labeled image set. Training and defense code sees only this type;
// poisoning ground truth travels separately (see poison.hpp), so no code
// path below the evaluation layer can read it.
struct Dataset {
    std::vector<LabeledExample> examples;
    int num_classes = 0;

    int height() const { return examples.empty() ? 0 : examples.front().image.height; }
    int width() const { return examples.empty() ? 0 : examples.front().image.width; }
    int channels() const { return examples.empty() ? 0 : examples.front().image.channels; }

    // Unique ids, labels in range, uniform shapes. Throws on violation.
    void validate() const;
};

}  // namespace ptlab
