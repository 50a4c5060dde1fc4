#pragma once

// Procedural two-domain segmentation scenes. Class 0 is background; shapes are
// disks (1), rectangles (2) and thin bars (3). Scene content is a pure function
// of (seed, index); the target domain only changes appearance.

#include "afrda/tensor.hpp"

#include <array>
#include <cstdint>
#include <vector>

namespace afrda {

using Rgb = std::array<double, 3>;

struct ClassStyle {
    Rgb color;
    double jitter = 0.0;  // per-channel uniform perturbation, per shape
};

struct DomainShift {
    double hue_offset = 0.08;        // fraction of a full hue turn
    double brightness = 0.8;
    double noise_sigma = 0.05;
    double stripe_amplitude = 0.05;  // horizontal stripes
    double stripe_period = 4.0;      // rows
};

struct SceneSpec {
    std::size_t height = 32;
    std::size_t width = 32;
    std::size_t num_classes = 4;     // 2..4
    std::size_t min_shapes = 1;
    std::size_t max_shapes = 4;
    double bar_fraction = 0.35;      // images that must contain a thin bar (C = 4)
    std::uint64_t seed = 0;
    std::vector<ClassStyle> palette = default_palette();
    DomainShift shift;

    static std::vector<ClassStyle> default_palette();
    void validate() const;
};

enum class Domain { source, target };

struct Sample {
    Tensor image;    // 1 x 3 x H x W, values in [0, 1]
    LabelMap label;  // 1 x H x W
};

Sample generate(const SceneSpec& spec, Domain domain, std::uint64_t index);

/// Per-channel mean over the images with indices [0, n).
Rgb dataset_mean(const SceneSpec& spec, Domain domain, std::size_t n);

/// Batches of consecutive indices starting at `first`.
Sample generate_batch(const SceneSpec& spec, Domain domain, std::uint64_t first, std::size_t count);

/// Rotates hue by `offset` turns; saturation and value are preserved.
Rgb rotate_hue(const Rgb& rgb, double offset);

}  // namespace afrda
