#include "afrda/image_io.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iterator>
#include <sstream>

namespace afrda {

namespace {

struct Planes {
    std::size_t channels;
    std::size_t height;
    std::size_t width;
};

Planes image_planes(const Tensor& t, std::size_t expected_channels)
{
    const Shape& s = t.shape();
    if (s.size() == 3 && s[0] == expected_channels)
        return {s[0], s[1], s[2]};
    if (s.size() == 4 && s[0] == 1 && s[1] == expected_channels)
        return {s[1], s[2], s[3]};
    throw ShapeError("image data of shape " + to_string(s) + " does not have " + std::to_string(expected_channels) +
                     " channel(s)");
}

std::string header(char magic, std::size_t width, std::size_t height)
{
    return std::string("P") + magic + "\n" + std::to_string(width) + " " + std::to_string(height) + "\n255\n";
}

std::uint8_t quantize(double v)
{
    return static_cast<std::uint8_t>(std::lround(v * 255.0));
}

}  // namespace

std::string encode_image(const Tensor& data, ImageKind kind)
{
    if (kind == ImageKind::rgb) {
        const Planes p = image_planes(data, 3);
        for (double v : data.data())
            if (!(v >= 0.0 && v <= 1.0))
                throw DomainError("rgb value " + std::to_string(v) + " outside [0, 1]");
        std::string out = header('6', p.width, p.height);
        const std::size_t plane = p.height * p.width;
        for (std::size_t i = 0; i < plane; ++i)
            for (std::size_t k = 0; k < 3; ++k)
                out.push_back(static_cast<char>(quantize(data[k * plane + i])));
        return out;
    }

    const Planes p = image_planes(data, 1);
    const auto [lo, hi] = std::minmax_element(data.data().begin(), data.data().end());
    const double mn = *lo;
    const double range = *hi - *lo;
    if (!std::isfinite(mn) || !std::isfinite(range))
        throw DomainError("gray map contains non-finite values");
    std::string out = header('5', p.width, p.height);
    for (double v : data.data())
        out.push_back(static_cast<char>(range > 0.0 ? quantize((v - mn) / range) : 0));
    return out;
}

std::string encode_labels(const LabelMap& labels)
{
    if (labels.batch != 1)
        throw ShapeError("label image needs a single map");
    std::string out = header('6', labels.width, labels.height);
    for (int v : labels.data) {
        std::array<std::uint8_t, 3> c{255, 255, 255};
        if (v != kIgnoreLabel) {
            if (v < 0 || static_cast<std::size_t>(v) >= kLabelPalette.size())
                throw DomainError("label " + std::to_string(v) + " has no palette color");
            c = kLabelPalette[static_cast<std::size_t>(v)];
        }
        for (std::uint8_t b : c)
            out.push_back(static_cast<char>(b));
    }
    return out;
}

void write_image(const std::filesystem::path& path, const Tensor& data, ImageKind kind)
{
    write_file_atomic(path, encode_image(data, kind));
}

void write_label_image(const std::filesystem::path& path, const LabelMap& labels)
{
    write_file_atomic(path, encode_labels(labels));
}

PnmImage decode_pnm(const std::string& bytes)
{
    std::istringstream in(bytes);
    std::string magic;
    std::size_t width = 0, height = 0, maxval = 0;
    if (!(in >> magic >> width >> height >> maxval) || (magic != "P5" && magic != "P6") || maxval != 255)
        throw DomainError("not an 8-bit binary PGM/PPM image");
    in.get();  // single whitespace after maxval
    PnmImage img;
    img.channels = magic == "P6" ? 3 : 1;
    img.width = width;
    img.height = height;
    const std::size_t n = width * height * static_cast<std::size_t>(img.channels);
    const auto offset = static_cast<std::size_t>(in.tellg());
    if (bytes.size() != offset + n)
        throw DomainError("PNM payload length mismatch");
    img.samples.assign(bytes.begin() + static_cast<std::ptrdiff_t>(offset), bytes.end());
    return img;
}

PnmImage read_pnm(const std::filesystem::path& path)
{
    return decode_pnm(read_file(path));
}

void write_file_atomic(const std::filesystem::path& path, const std::string& bytes)
{
    std::filesystem::path tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out)
            throw IoError("cannot open " + tmp.string() + " for writing");
        out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
        if (!out)
            throw IoError("write failed for " + tmp.string());
    }
    std::error_code ec;
    std::filesystem::rename(tmp, path, ec);
    if (ec)
        throw IoError("cannot rename " + tmp.string() + " to " + path.string() + ": " + ec.message());
}

std::string read_file(const std::filesystem::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw IoError("cannot open " + path.string());
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

}  // namespace afrda
