#pragma once

#include <cstddef>
#include <vector>

namespace ptlab {

// Dense H x W x C pixel grid, channel-last, values in [0, 1].
struct Image {
    int height = 0;
    int width = 0;
    int channels = 0;
    std::vector<float> pixels;

    Image() = default;
    Image(int h, int w, int c, float fill = 0.0f)
        : height(h),
          width(w),
          channels(c),
          pixels(static_cast<size_t>(h) * static_cast<size_t>(w) * static_cast<size_t>(c), fill) {}

    float& at(int i, int j, int k) {
        return pixels[(static_cast<size_t>(i) * width + j) * channels + k];
    }
    float at(int i, int j, int k) const {
        return pixels[(static_cast<size_t>(i) * width + j) * channels + k];
    }

    // Pixel count implied by the shape (pixels.size() for a well-formed image).
    size_t size() const {
        return static_cast<size_t>(height) * static_cast<size_t>(width) *
               static_cast<size_t>(channels);
    }

    bool same_shape(const Image& o) const {
        return height == o.height && width == o.width && channels == o.channels;
    }
};

inline float clamp01(float v) { return v < 0.0f ? 0.0f : (v > 1.0f ? 1.0f : v); }

}  // namespace ptlab
