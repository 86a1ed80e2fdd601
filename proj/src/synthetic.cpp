#include "ptlab/synthetic.hpp"

#include <cmath>
#include <string>

#include "ptlab/errors.hpp"
#include "ptlab/image.hpp"
#include "ptlab/rng.hpp"

namespace ptlab {

namespace {

constexpr int kSide = 28;
constexpr int kGlyphCols = 5;
constexpr int kGlyphRows = 7;

// 5x7 digit glyphs, one bitmask row per scanline, MSB = leftmost column.
constexpr uint8_t kGlyphs[10][kGlyphRows] = {
    {0b01110, 0b10001, 0b10011, 0b10101, 0b11001, 0b10001, 0b01110},  // 0
    {0b00100, 0b01100, 0b00100, 0b00100, 0b00100, 0b00100, 0b01110},  // 1
    {0b01110, 0b10001, 0b00001, 0b00010, 0b00100, 0b01000, 0b11111},  // 2
    {0b11111, 0b00010, 0b00100, 0b00010, 0b00001, 0b10001, 0b01110},  // 3
    {0b00010, 0b00110, 0b01010, 0b10010, 0b11111, 0b00010, 0b00010},  // 4
    {0b11111, 0b10000, 0b11110, 0b00001, 0b00001, 0b10001, 0b01110},  // 5
    {0b00110, 0b01000, 0b10000, 0b11110, 0b10001, 0b10001, 0b01110},  // 6
    {0b11111, 0b00001, 0b00010, 0b00100, 0b01000, 0b01000, 0b01000},  // 7
    {0b01110, 0b10001, 0b10001, 0b01110, 0b10001, 0b10001, 0b01110},  // 8
    {0b01110, 0b10001, 0b10001, 0b01111, 0b00001, 0b00010, 0b01100},  // 9
};

double glyph_bit(int digit, int row, int col) {
    if (row < 0 || row >= kGlyphRows || col < 0 || col >= kGlyphCols) return 0.0;
    return (kGlyphs[digit][row] >> (kGlyphCols - 1 - col)) & 1 ? 1.0 : 0.0;
}

// Bilinear sample of the glyph bitmap at continuous cell coordinates,
// with cell (r, c) centered at (c + 0.5, r + 0.5) and zero outside.
double glyph_sample(int digit, double x, double y) {
    const double px = x - 0.5;
    const double py = y - 0.5;
    const int c0 = static_cast<int>(std::floor(px));
    const int r0 = static_cast<int>(std::floor(py));
    const double fx = px - c0;
    const double fy = py - r0;
    const double v00 = glyph_bit(digit, r0, c0);
    const double v01 = glyph_bit(digit, r0, c0 + 1);
    const double v10 = glyph_bit(digit, r0 + 1, c0);
    const double v11 = glyph_bit(digit, r0 + 1, c0 + 1);
    return (1 - fy) * ((1 - fx) * v00 + fx * v01) + fy * ((1 - fx) * v10 + fx * v11);
}

// Noisy but evenly difficult renderer: moderate geometric jitter, a
// low-frequency elastic wobble, speckle noise, and class-uncorrelated clutter
// blobs. The jitter ranges are kept deliberately narrow so that per-sample
// difficulty is homogeneous — the corpus as a whole has to be hard enough
// that a small CNN's per-sample losses stay meaningfully positive for a few
// epochs, but without a long tail of individually trivial or hopeless
// samples, which would make loss-ranked statistics degenerate.
Image render_digit(int digit, Rng& rng) {
    const double scale = rng.uniform(1.9, 3.2);       // pixels per glyph cell
    const double angle = rng.uniform(-0.35, 0.35);    // radians
    const double dx = rng.uniform(-3.0, 3.0);
    const double dy = rng.uniform(-3.0, 3.0);
    const double intensity = rng.uniform(0.85, 1.0);
    const double background = rng.uniform(0.0, 0.08);
    const double sigma = rng.uniform(0.06, 0.10);
    const double warp_amp = rng.uniform(0.4, 1.0);    // pixels
    const double warp_freq = rng.uniform(0.5, 1.5);   // cycles across the image
    const double warp_phase_x = rng.uniform(0.0, 2.0 * M_PI);
    const double warp_phase_y = rng.uniform(0.0, 2.0 * M_PI);

    // One or two soft clutter blobs, uncorrelated with the class.
    const int blob_count = 1 + static_cast<int>(rng.uniform_u64(2));
    double blob_x[2], blob_y[2], blob_r[2], blob_a[2];
    for (int b = 0; b < blob_count; ++b) {
        blob_x[b] = rng.uniform(2.0, kSide - 3.0);
        blob_y[b] = rng.uniform(2.0, kSide - 3.0);
        blob_r[b] = rng.uniform(1.5, 3.0);
        blob_a[b] = rng.uniform(0.15, 0.35);
    }

    // A small fraction of scans carry a scanner registration mark: a solid
    // white 3x3 square printed one pixel in from one of the four corners.
    // It is stamped after the noise pass so the square is exactly saturated.
    const double mark_u = rng.uniform();
    const bool mark = mark_u < 0.14;
    const int mark_corner = static_cast<int>(mark_u * 1000) % 4;
    const int mark_row = (mark_corner & 1) ? kSide - 4 : 1;
    const int mark_col = (mark_corner & 2) ? kSide - 4 : 1;

    const double cos_a = std::cos(angle);
    const double sin_a = std::sin(angle);
    const double center = (kSide - 1) / 2.0;

    Image img(kSide, kSide, 1);
    for (int i = 0; i < kSide; ++i) {
        const double wob_x = warp_amp * std::sin(2.0 * M_PI * warp_freq * i / kSide + warp_phase_x);
        for (int j = 0; j < kSide; ++j) {
            const double wob_y =
                warp_amp * std::sin(2.0 * M_PI * warp_freq * j / kSide + warp_phase_y);
            // Inverse affine: output pixel -> glyph cell coordinates.
            const double u = j - center - dx + wob_x;
            const double v = i - center - dy + wob_y;
            const double ur = cos_a * u + sin_a * v;
            const double vr = -sin_a * u + cos_a * v;
            const double gx = ur / scale + kGlyphCols / 2.0;
            const double gy = vr / scale + kGlyphRows / 2.0;
            double value = background + intensity * glyph_sample(digit, gx, gy);
            for (int b = 0; b < blob_count; ++b) {
                const double ddx = j - blob_x[b];
                const double ddy = i - blob_y[b];
                value += blob_a[b] * std::exp(-(ddx * ddx + ddy * ddy) / (2.0 * blob_r[b] * blob_r[b]));
            }
            value += sigma * rng.normal();
            img.at(i, j, 0) = clamp01(static_cast<float>(value));
        }
    }
    if (mark) {
        for (int i = 0; i < 3; ++i) {
            for (int j = 0; j < 3; ++j) {
                img.at(mark_row + i, mark_col + j, 0) = 1.0f;
            }
        }
    }
    return img;
}

}  // namespace

Dataset make_synthetic_corpus(int count, uint64_t seed) {
    if (count < 10) {
        throw ConfigError("synthetic corpus needs at least 10 examples (one per class), got " +
                          std::to_string(count));
    }
    Dataset ds;
    ds.num_classes = 10;
    ds.examples.reserve(count);
    for (int i = 0; i < count; ++i) {
        Rng rng(derive_seed(seed, "sample-" + std::to_string(i)));
        LabeledExample ex;
        ex.id = i;
        ex.label = i % 10;
        ex.image = render_digit(ex.label, rng);
        ds.examples.push_back(std::move(ex));
    }
    ds.validate();
    return ds;
}

}  // namespace ptlab
