#include "ptlab/dataset.hpp"

#include <stdexcept>
#include <unordered_set>

namespace ptlab {

void Dataset::validate() const {
    if (num_classes < 2)
        throw std::invalid_argument("dataset must have at least 2 classes, got " +
                                    std::to_string(num_classes));
    std::unordered_set<int32_t> seen;
    seen.reserve(examples.size());
    for (const auto& ex : examples) {
        if (ex.id < 0)
            throw std::invalid_argument("example id must be non-negative, got " +
                                        std::to_string(ex.id));
        if (!seen.insert(ex.id).second)
            throw std::invalid_argument("duplicate example id " + std::to_string(ex.id));
        if (ex.label < 0 || ex.label >= num_classes)
            throw std::invalid_argument("label " + std::to_string(ex.label) + " of example " +
                                        std::to_string(ex.id) + " outside [0, " +
                                        std::to_string(num_classes) + ")");
        const Image& first = examples.front().image;
        if (!ex.image.same_shape(first))
            throw std::invalid_argument("example " + std::to_string(ex.id) +
                                        " image shape differs from the dataset shape");
        if (ex.image.pixels.size() != ex.image.size())
            throw std::invalid_argument("example " + std::to_string(ex.id) +
                                        " pixel buffer size mismatch");
    }
}

}  // namespace ptlab
