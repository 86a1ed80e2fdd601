#pragma once

#include <cstdint>
#include <variant>

#include "ptlab/image.hpp"

namespace ptlab {

// A small stamp overwriting a rectangle of the target image.
struct PatchTrigger {
    Image pattern;
    int anchor_row = 0;
    int anchor_col = 0;
};

// Convex interpolation with a full-size trigger image.
struct BlendTrigger {
    Image trigger_image;
    float alpha = 0.1f;  // in [0, 1]
};

// Additive horizontal sinusoid, constant along rows and channels.
struct SinusoidalTrigger {
    float amplitude = 0.0f;  // additive, [0,1] pixel units
    int frequency = 1;       // cycles across the image width
};

using TriggerSpec = std::variant<PatchTrigger, BlendTrigger, SinusoidalTrigger>;

// All application functions are pure: the input image is never mutated, the
// output has the input's shape, and every output pixel is clamped to [0, 1].
Image apply_patch(const Image& image, const PatchTrigger& t);
Image apply_blend(const Image& image, const BlendTrigger& t);
Image apply_sig(const Image& image, const SinusoidalTrigger& t);
Image apply_trigger(const Image& image, const TriggerSpec& spec);

// Canonical stamp: 3x3 white for single-channel images, 3x3 checkerboard
// otherwise, anchored one pixel in from the bottom-right corner.
PatchTrigger default_patch_trigger(int image_height, int image_width, int channels);

// Deterministic full-size noise image for blend triggers.
Image noise_trigger_image(int height, int width, int channels, uint64_t seed);

const char* trigger_name(const TriggerSpec& spec);  // "patch" | "blend" | "sig"

}  // namespace ptlab
