#include "ptlab/triggers.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#include "ptlab/rng.hpp"

namespace ptlab {

Image apply_patch(const Image& image, const PatchTrigger& t) {
    const Image& p = t.pattern;
    if (t.anchor_row < 0 || t.anchor_col < 0)
        throw std::invalid_argument("patch anchor must be non-negative, got (" +
                                    std::to_string(t.anchor_row) + ", " +
                                    std::to_string(t.anchor_col) + ")");
    bool empty = p.height == 0 || p.width == 0;
    if (!empty && p.channels != image.channels)
        throw std::invalid_argument("patch channel count " + std::to_string(p.channels) +
                                    " does not match image channels " +
                                    std::to_string(image.channels));
    if (t.anchor_row + p.height > image.height)
        throw std::invalid_argument("patch exceeds image height: anchor_row " +
                                    std::to_string(t.anchor_row) + " + pattern height " +
                                    std::to_string(p.height) + " > " +
                                    std::to_string(image.height));
    if (t.anchor_col + p.width > image.width)
        throw std::invalid_argument("patch exceeds image width: anchor_col " +
                                    std::to_string(t.anchor_col) + " + pattern width " +
                                    std::to_string(p.width) + " > " + std::to_string(image.width));

    Image out = image;
    for (int i = 0; i < p.height; ++i)
        for (int j = 0; j < p.width; ++j)
            for (int k = 0; k < p.channels; ++k)
                out.at(t.anchor_row + i, t.anchor_col + j, k) = clamp01(p.at(i, j, k));
    return out;
}

Image apply_blend(const Image& image, const BlendTrigger& t) {
    if (!t.trigger_image.same_shape(image))
        throw std::invalid_argument(
            "blend trigger shape " + std::to_string(t.trigger_image.height) + "x" +
            std::to_string(t.trigger_image.width) + "x" + std::to_string(t.trigger_image.channels) +
            " does not match image shape " + std::to_string(image.height) + "x" +
            std::to_string(image.width) + "x" + std::to_string(image.channels));
    if (!(t.alpha >= 0.0f && t.alpha <= 1.0f))
        throw std::invalid_argument("blend alpha must be in [0, 1], got " +
                                    std::to_string(t.alpha));

    Image out = image;
    const float a = t.alpha;
    for (size_t i = 0; i < out.pixels.size(); ++i)
        out.pixels[i] = clamp01((1.0f - a) * image.pixels[i] + a * t.trigger_image.pixels[i]);
    return out;
}

Image apply_sig(const Image& image, const SinusoidalTrigger& t) {
    if (t.frequency < 1)
        throw std::invalid_argument("sinusoidal frequency must be >= 1, got " +
                                    std::to_string(t.frequency));
    if (!(t.amplitude >= 0.0f))
        throw std::invalid_argument("sinusoidal amplitude must be >= 0, got " +
                                    std::to_string(t.amplitude));

    // Column field v(j) = amplitude * sin(2*pi * j * frequency / width).
    std::vector<float> field(static_cast<size_t>(image.width));
    for (int j = 0; j < image.width; ++j) {
        double phase = 2.0 * 3.14159265358979323846 * static_cast<double>(j) *
                       static_cast<double>(t.frequency) / static_cast<double>(image.width);
        field[static_cast<size_t>(j)] = static_cast<float>(t.amplitude * std::sin(phase));
    }

    Image out = image;
    for (int i = 0; i < image.height; ++i)
        for (int j = 0; j < image.width; ++j)
            for (int k = 0; k < image.channels; ++k)
                out.at(i, j, k) = clamp01(image.at(i, j, k) + field[static_cast<size_t>(j)]);
    return out;
}

Image apply_trigger(const Image& image, const TriggerSpec& spec) {
    return std::visit(
        [&image](const auto& t) -> Image {
            using T = std::decay_t<decltype(t)>;
            if constexpr (std::is_same_v<T, PatchTrigger>)
                return apply_patch(image, t);
            else if constexpr (std::is_same_v<T, BlendTrigger>)
                return apply_blend(image, t);
            else
                return apply_sig(image, t);
        },
        spec);
}

PatchTrigger default_patch_trigger(int image_height, int image_width, int channels) {
    const int side = 3;
    const int margin = 1;
    if (image_height < side + margin || image_width < side + margin)
        throw std::invalid_argument("image too small for the default 3x3 corner patch");
    PatchTrigger t;
    t.pattern = Image(side, side, channels);
    for (int i = 0; i < side; ++i)
        for (int j = 0; j < side; ++j)
            for (int k = 0; k < channels; ++k)
                t.pattern.at(i, j, k) =
                    (channels == 1) ? 1.0f : (((i + j) % 2 == 0) ? 1.0f : 0.0f);
    t.anchor_row = image_height - side - margin;
    t.anchor_col = image_width - side - margin;
    return t;
}

Image noise_trigger_image(int height, int width, int channels, uint64_t seed) {
    Image img(height, width, channels);
    Rng rng(seed);
    for (auto& p : img.pixels) p = static_cast<float>(rng.uniform());
    return img;
}

const char* trigger_name(const TriggerSpec& spec) {
    if (std::holds_alternative<PatchTrigger>(spec)) return "patch";
    if (std::holds_alternative<BlendTrigger>(spec)) return "blend";
    return "sig";
}

}  // namespace ptlab
