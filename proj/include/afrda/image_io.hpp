#pragma once

// Binary Netpbm output: P6 for color, P5 for grayscale, 8 bits per sample.
// Header is "P6\n<w> <h>\n255\n" followed by raw samples, row-major.

#include "afrda/tensor.hpp"

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace afrda {

enum class ImageKind { rgb, gray };

/// rgb: 3 x H x W (or 1 x 3 x H x W) with every value in [0, 1]; anything else
/// is a DomainError, never clamped. gray: 1 x H x W (or 1 x 1 x H x W), min-max
/// normalized; a constant map encodes as all zeros.
std::string encode_image(const Tensor& data, ImageKind kind);
std::string encode_labels(const LabelMap& labels);

void write_image(const std::filesystem::path& path, const Tensor& data, ImageKind kind);
void write_label_image(const std::filesystem::path& path, const LabelMap& labels);

inline constexpr std::array<std::array<std::uint8_t, 3>, 8> kLabelPalette{{
    {0, 0, 0},
    {230, 25, 75},
    {60, 180, 75},
    {0, 130, 200},
    {255, 225, 25},
    {245, 130, 48},
    {145, 30, 180},
    {70, 240, 240},
}};

struct PnmImage {
    int channels = 0;  // 1 for P5, 3 for P6
    std::size_t width = 0;
    std::size_t height = 0;
    std::vector<std::uint8_t> samples;
};

PnmImage decode_pnm(const std::string& bytes);
PnmImage read_pnm(const std::filesystem::path& path);

/// Writes to a sibling temporary file, then renames over `path`.
void write_file_atomic(const std::filesystem::path& path, const std::string& bytes);
std::string read_file(const std::filesystem::path& path);

class IoError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace afrda
