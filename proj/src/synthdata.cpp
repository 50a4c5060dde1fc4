#include "afrda/synthdata.hpp"

#include "afrda/random.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace afrda {

namespace {

constexpr std::uint64_t kContentStream = 0x5343454e45;  // "SCENE"
constexpr std::uint64_t kNoiseStream = 0x4e4f495345;    // "NOISE"

enum ShapeClass : int { kBackground = 0, kDisk = 1, kRectangle = 2, kBar = 3 };

Rgb jittered(const ClassStyle& style, Rng& rng)
{
    Rgb c = style.color;
    for (double& v : c)
        v = std::clamp(v + uniform(rng, -style.jitter, style.jitter), 0.0, 1.0);
    return c;
}

struct Canvas {
    std::size_t height;
    std::size_t width;
    std::vector<Rgb> color;
    LabelMap& label;

    void paint(std::ptrdiff_t y, std::ptrdiff_t x, int cls, const Rgb& c)
    {
        if (y < 0 || x < 0 || y >= static_cast<std::ptrdiff_t>(height) || x >= static_cast<std::ptrdiff_t>(width))
            return;
        const std::size_t i = static_cast<std::size_t>(y) * width + static_cast<std::size_t>(x);
        color[i] = c;
        label.data[i] = cls;
    }
};

void draw_disk(Canvas& canvas, Rng& rng, const Rgb& c)
{
    const double cy = uniform(rng, 0.0, static_cast<double>(canvas.height));
    const double cx = uniform(rng, 0.0, static_cast<double>(canvas.width));
    const double r = uniform(rng, 3.0, 7.0);
    for (std::ptrdiff_t y = 0; y < static_cast<std::ptrdiff_t>(canvas.height); ++y)
        for (std::ptrdiff_t x = 0; x < static_cast<std::ptrdiff_t>(canvas.width); ++x) {
            const double dy = static_cast<double>(y) + 0.5 - cy;
            const double dx = static_cast<double>(x) + 0.5 - cx;
            if (dy * dy + dx * dx <= r * r)
                canvas.paint(y, x, kDisk, c);
        }
}

void draw_rectangle(Canvas& canvas, Rng& rng, const Rgb& c)
{
    const auto h = static_cast<std::ptrdiff_t>(5 + uniform_index(rng, 10));
    const auto w = static_cast<std::ptrdiff_t>(5 + uniform_index(rng, 10));
    const auto y0 = static_cast<std::ptrdiff_t>(uniform_index(rng, canvas.height)) - h / 2;
    const auto x0 = static_cast<std::ptrdiff_t>(uniform_index(rng, canvas.width)) - w / 2;
    for (std::ptrdiff_t y = y0; y < y0 + h; ++y)
        for (std::ptrdiff_t x = x0; x < x0 + w; ++x)
            canvas.paint(y, x, kRectangle, c);
}

void draw_bar(Canvas& canvas, Rng& rng, const Rgb& c)
{
    const bool vertical = uniform_index(rng, 2) == 0;
    const std::size_t extent = vertical ? canvas.height : canvas.width;
    const std::size_t across = vertical ? canvas.width : canvas.height;
    const auto thickness = static_cast<std::ptrdiff_t>(1 + uniform_index(rng, 3));
    const auto length = static_cast<std::ptrdiff_t>(extent / 3 + uniform_index(rng, extent - extent / 3 + 1));
    const auto start = static_cast<std::ptrdiff_t>(uniform_index(rng, extent - static_cast<std::size_t>(length) + 1));
    const auto offset = static_cast<std::ptrdiff_t>(uniform_index(rng, across - static_cast<std::size_t>(thickness) + 1));
    for (std::ptrdiff_t a = start; a < start + length; ++a)
        for (std::ptrdiff_t t = offset; t < offset + thickness; ++t)
            vertical ? canvas.paint(a, t, kBar, c) : canvas.paint(t, a, kBar, c);
}

Rgb shift_pixel(const Rgb& rgb, const DomainShift& shift)
{
    Rgb out = rotate_hue(rgb, shift.hue_offset);
    for (double& v : out)
        v *= shift.brightness;
    return out;
}

}  // namespace

std::vector<ClassStyle> SceneSpec::default_palette()
{
    return {
        {{0.45, 0.42, 0.40}, 0.12},  // background
        {{0.85, 0.25, 0.20}, 0.08},  // disk
        {{0.25, 0.70, 0.30}, 0.08},  // rectangle
        {{0.20, 0.35, 0.85}, 0.08},  // thin bar
    };
}

void SceneSpec::validate() const
{
    if (height < 4 || width < 4)
        throw DomainError("scene size must be at least 4x4");
    if (num_classes < 2 || num_classes > 4)
        throw DomainError("synthetic scenes support 2 to 4 classes");
    if (palette.size() < num_classes)
        throw DomainError("palette has fewer entries than classes");
    if (min_shapes > max_shapes)
        throw DomainError("min_shapes exceeds max_shapes");
    if (bar_fraction < 0.0 || bar_fraction > 1.0)
        throw DomainError("bar_fraction must lie in [0, 1]");
    if (shift.noise_sigma < 0.0 || shift.stripe_period <= 0.0 || shift.brightness < 0.0)
        throw DomainError("invalid domain shift");
}

Rgb rotate_hue(const Rgb& rgb, double offset)
{
    const double mx = std::max({rgb[0], rgb[1], rgb[2]});
    const double mn = std::min({rgb[0], rgb[1], rgb[2]});
    const double delta = mx - mn;
    if (delta <= 0.0)
        return rgb;

    double hue;
    if (mx == rgb[0])
        hue = std::fmod((rgb[1] - rgb[2]) / delta, 6.0);
    else if (mx == rgb[1])
        hue = (rgb[2] - rgb[0]) / delta + 2.0;
    else
        hue = (rgb[0] - rgb[1]) / delta + 4.0;
    hue = std::fmod(hue / 6.0 + offset, 1.0);
    if (hue < 0.0)
        hue += 1.0;

    const double sector = hue * 6.0;
    const double x = delta * (1.0 - std::fabs(std::fmod(sector, 2.0) - 1.0));
    Rgb out{};
    switch (static_cast<int>(sector) % 6) {
    case 0: out = {delta, x, 0.0}; break;
    case 1: out = {x, delta, 0.0}; break;
    case 2: out = {0.0, delta, x}; break;
    case 3: out = {0.0, x, delta}; break;
    case 4: out = {x, 0.0, delta}; break;
    default: out = {delta, 0.0, x}; break;
    }
    for (double& v : out)
        v += mn;
    return out;
}

Sample generate(const SceneSpec& spec, Domain domain, std::uint64_t index)
{
    spec.validate();
    const std::size_t h = spec.height;
    const std::size_t w = spec.width;
    Rng rng = make_rng(spec.seed, kContentStream, index);

    Sample sample{Tensor({1, 3, h, w}), LabelMap(1, h, w, kBackground)};
    Canvas canvas{h, w, std::vector<Rgb>(h * w), sample.label};

    // Background: jittered base color under a gentle multiplicative gradient.
    const Rgb base = jittered(spec.palette[kBackground], rng);
    const double gy = uniform(rng, -0.2, 0.2);
    const double gx = uniform(rng, -0.2, 0.2);
    for (std::size_t y = 0; y < h; ++y)
        for (std::size_t x = 0; x < w; ++x) {
            const double ramp = gy * (static_cast<double>(y) / static_cast<double>(h) - 0.5) +
                                gx * (static_cast<double>(x) / static_cast<double>(w) - 0.5);
            Rgb& c = canvas.color[y * w + x];
            for (std::size_t k = 0; k < 3; ++k)
                c[k] = std::clamp(base[k] * (1.0 + ramp), 0.0, 1.0);
        }

    const std::size_t count = spec.min_shapes + uniform_index(rng, spec.max_shapes - spec.min_shapes + 1);
    std::vector<int> classes(count);
    for (int& cls : classes)
        cls = 1 + static_cast<int>(uniform_index(rng, spec.num_classes - 1));
    const bool force_bar = spec.num_classes > kBar && uniform(rng, 0.0, 1.0) < spec.bar_fraction;
    if (force_bar && count > 0)
        classes[uniform_index(rng, count)] = kBar;

    for (int cls : classes) {
        const Rgb c = jittered(spec.palette[static_cast<std::size_t>(cls)], rng);
        switch (cls) {
        case kDisk: draw_disk(canvas, rng, c); break;
        case kRectangle: draw_rectangle(canvas, rng, c); break;
        default: draw_bar(canvas, rng, c); break;
        }
    }

    Rng noise = make_rng(spec.seed, kNoiseStream, index);
    std::normal_distribution<double> gauss(0.0, 1.0);
    const std::size_t plane = h * w;
    for (std::size_t y = 0; y < h; ++y)
        for (std::size_t x = 0; x < w; ++x) {
            Rgb c = canvas.color[y * w + x];
            if (domain == Domain::target) {
                c = shift_pixel(c, spec.shift);
                const double stripe = spec.shift.stripe_amplitude *
                                      std::sin(2.0 * std::numbers::pi * static_cast<double>(y) / spec.shift.stripe_period);
                for (double& v : c)
                    v = std::clamp(v + stripe + spec.shift.noise_sigma * gauss(noise), 0.0, 1.0);
            }
            for (std::size_t k = 0; k < 3; ++k)
                sample.image[k * plane + y * w + x] = c[k];
        }
    return sample;
}

Rgb dataset_mean(const SceneSpec& spec, Domain domain, std::size_t n)
{
    if (n == 0)
        throw DomainError("dataset_mean needs at least one image");
    Rgb total{0.0, 0.0, 0.0};
    const std::size_t plane = spec.height * spec.width;
    for (std::size_t i = 0; i < n; ++i) {
        const Sample s = generate(spec, domain, i);
        for (std::size_t k = 0; k < 3; ++k) {
            double acc = 0.0;
            for (std::size_t p = 0; p < plane; ++p)
                acc += s.image[k * plane + p];
            total[k] += acc / static_cast<double>(plane);
        }
    }
    for (double& v : total)
        v /= static_cast<double>(n);
    return total;
}

Sample generate_batch(const SceneSpec& spec, Domain domain, std::uint64_t first, std::size_t count)
{
    std::vector<Tensor> images;
    std::vector<LabelMap> labels;
    for (std::size_t i = 0; i < count; ++i) {
        Sample s = generate(spec, domain, first + i);
        images.push_back(std::move(s.image));
        labels.push_back(std::move(s.label));
    }
    return {stack(images), stack(labels)};
}

}  // namespace afrda
