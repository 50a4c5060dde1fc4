#include "afrda/config.hpp"

#include "afrda/image_io.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <functional>
#include <set>
#include <sstream>

namespace afrda {

namespace {

std::string trim(const std::string& s)
{
    const auto first = s.find_first_not_of(" \t\r");
    if (first == std::string::npos)
        return {};
    const auto last = s.find_last_not_of(" \t\r");
    return s.substr(first, last - first + 1);
}

[[noreturn]] void bad_value(const std::string& key, const std::string& value, const char* expected)
{
    throw ConfigError("config key '" + key + "': cannot parse '" + value + "' as " + expected);
}

template <typename T>
T parse_number(const std::string& key, const std::string& value)
{
    T out{};
    const char* end = value.data() + value.size();
    const auto [ptr, ec] = std::from_chars(value.data(), end, out);
    if (ec != std::errc() || ptr != end)
        bad_value(key, value, std::is_floating_point_v<T> ? "a real number" : "a non-negative integer");
    return out;
}

std::string format(double v)
{
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

std::string format(bool v) { return v ? "true" : "false"; }
std::string format(std::uint64_t v) { return std::to_string(v); }
std::string format(int v) { return std::to_string(v); }
std::string format(const std::string& v) { return v; }

void assign(const std::string& key, const std::string& value, double& out) { out = parse_number<double>(key, value); }
void assign(const std::string& key, const std::string& value, std::uint64_t& out)
{
    out = parse_number<std::uint64_t>(key, value);
}
void assign(const std::string& key, const std::string& value, int& out) { out = parse_number<int>(key, value); }
void assign(const std::string&, const std::string& value, std::string& out) { out = value; }
void assign(const std::string& key, const std::string& value, bool& out)
{
    if (value == "true")
        out = true;
    else if (value == "false")
        out = false;
    else
        bad_value(key, value, "true or false");
}

struct Entry {
    std::string key;
    std::function<std::string(const RunConfig&)> get;
    std::function<void(RunConfig&, const std::string&)> set;
};

template <typename Access>
Entry entry(std::string key, Access access)
{
    Entry e{key, nullptr, nullptr};
    e.get = [access](const RunConfig& c) { return format(access(const_cast<RunConfig&>(c))); };
    e.set = [access, key](RunConfig& c, const std::string& v) {
        auto& field = access(c);
        using Field = std::remove_reference_t<decltype(field)>;
        if constexpr (std::is_same_v<Field, std::size_t> && !std::is_same_v<std::size_t, std::uint64_t>) {
            std::uint64_t tmp = 0;
            assign(key, v, tmp);
            field = static_cast<std::size_t>(tmp);
        } else {
            assign(key, v, field);
        }
    };
    return e;
}

// Drives both the network and the scene generator.
Entry num_classes_entry()
{
    Entry e{"num_classes", nullptr, nullptr};
    e.get = [](const RunConfig& c) { return format(std::uint64_t{c.net.num_classes}); };
    e.set = [](RunConfig& c, const std::string& v) {
        std::uint64_t n = 0;
        assign("num_classes", v, n);
        c.net.num_classes = c.scene.num_classes = static_cast<std::size_t>(n);
    };
    return e;
}

#define AFRDA_KEY(name, expr) entry(name, [](RunConfig& c) -> auto& { return expr; })

const std::vector<Entry>& entries()
{
    static const std::vector<Entry> table{
        AFRDA_KEY("seed", c.seed),
        AFRDA_KEY("data_seed", c.scene.seed),
        AFRDA_KEY("iterations", c.iterations),
        AFRDA_KEY("batch_size", c.batch_size),
        AFRDA_KEY("lr", c.lr),
        AFRDA_KEY("momentum", c.momentum),
        AFRDA_KEY("ema_alpha", c.ema_alpha),
        AFRDA_KEY("ema_warmup", c.ema_warmup),
        AFRDA_KEY("tau", c.tau),
        AFRDA_KEY("mask_patch", c.mask_patch),
        AFRDA_KEY("mask_ratio", c.mask_ratio),
        AFRDA_KEY("lambda_mask", c.lambda_mask),
        AFRDA_KEY("enable_target_loss", c.enable_target_loss),
        AFRDA_KEY("enable_mask_loss", c.enable_mask_loss),
        AFRDA_KEY("unweighted_mix", c.unweighted_mix),
        AFRDA_KEY("enable_afr", c.net.afr.enable_afr),
        AFRDA_KEY("enable_cala", c.net.afr.enable_cala),
        AFRDA_KEY("enable_uhfa", c.net.afr.enable_uhfa),
        AFRDA_KEY("enable_hf_cala", c.net.afr.enable_hf_cala),
        AFRDA_KEY("enable_hf_uhfa", c.net.afr.enable_hf_uhfa),
        AFRDA_KEY("enable_hr_uncertainty", c.net.afr.enable_hr_uncertainty),
        AFRDA_KEY("enable_lr_uncertainty", c.net.afr.enable_lr_uncertainty),
        AFRDA_KEY("detach_uncertainty", c.net.afr.detach_uncertainty),
        AFRDA_KEY("gamma", c.net.afr.gamma),
        AFRDA_KEY("kernel_size", c.net.afr.kernel_size),
        AFRDA_KEY("hr_width", c.net.hr_width),
        AFRDA_KEY("lr_width", c.net.lr_width),
        AFRDA_KEY("hr_levels", c.net.hr_levels),
        num_classes_entry(),
        AFRDA_KEY("image_height", c.scene.height),
        AFRDA_KEY("image_width", c.scene.width),
        AFRDA_KEY("min_shapes", c.scene.min_shapes),
        AFRDA_KEY("max_shapes", c.scene.max_shapes),
        AFRDA_KEY("bar_fraction", c.scene.bar_fraction),
        AFRDA_KEY("shift_hue", c.scene.shift.hue_offset),
        AFRDA_KEY("shift_brightness", c.scene.shift.brightness),
        AFRDA_KEY("shift_noise", c.scene.shift.noise_sigma),
        AFRDA_KEY("shift_stripe_amplitude", c.scene.shift.stripe_amplitude),
        AFRDA_KEY("shift_stripe_period", c.scene.shift.stripe_period),
        AFRDA_KEY("eval_interval", c.eval_interval),
        AFRDA_KEY("eval_images", c.eval_images),
        AFRDA_KEY("checkpoint_interval", c.checkpoint_interval),
        AFRDA_KEY("dump_interval", c.dump_interval),
        AFRDA_KEY("mean_images", c.mean_images),
        AFRDA_KEY("output_dir", c.output_dir),
    };
    return table;
}

#undef AFRDA_KEY

const Entry& find_entry(const std::string& key)
{
    for (const auto& e : entries())
        if (e.key == key)
            return e;
    throw ConfigError("unknown config key '" + key + "'");
}

void require(bool ok, const std::string& key, const std::string& what)
{
    if (!ok)
        throw ConfigError("config key '" + key + "': " + what);
}

}  // namespace

void RunConfig::validate() const
{
    const auto& a = net.afr;
    require(batch_size >= 1, "batch_size", "must be at least 1");
    require(lr > 0.0 && std::isfinite(lr), "lr", "must be positive");
    require(momentum >= 0.0 && momentum < 1.0, "momentum", "must lie in [0, 1)");
    require(ema_alpha >= 0.0 && ema_alpha <= 1.0, "ema_alpha", "must lie in [0, 1]");
    require(net.num_classes >= 2 && net.num_classes <= 4, "num_classes", "must lie in [2, 4]");
    require(net.num_classes == scene.num_classes, "num_classes", "network and scene disagree");
    require(tau > 1.0 / static_cast<double>(net.num_classes) && tau < 1.0, "tau", "must lie in (1/C, 1)");
    require(mask_ratio >= 0.0 && mask_ratio <= 1.0, "mask_ratio", "must lie in [0, 1]");
    require(lambda_mask >= 0.0 && std::isfinite(lambda_mask), "lambda_mask", "must be non-negative");
    require(a.gamma > 0.0 && std::isfinite(a.gamma), "gamma", "must be positive");
    require(a.kernel_size >= 1 && a.kernel_size % 2 == 1, "kernel_size", "must be a positive odd integer");
    try {
        GaussianKernel(a.gamma, a.kernel_size);
    } catch (const DomainError& e) {
        require(false, "gamma", e.what());
    }
    require(net.hr_width >= 1, "hr_width", "must be at least 1");
    require(net.lr_width >= 1, "lr_width", "must be at least 1");
    require(net.hr_levels == 1 || net.hr_levels == 2, "hr_levels", "must be 1 or 2");
    const std::size_t align = net.hr_levels == 2 ? 8 : 4;
    require(scene.height >= align && scene.height % align == 0, "image_height",
            "must be a positive multiple of " + std::to_string(align));
    require(scene.width >= align && scene.width % align == 0, "image_width",
            "must be a positive multiple of " + std::to_string(align));
    require(mask_patch >= 1 && scene.height % mask_patch == 0 && scene.width % mask_patch == 0, "mask_patch",
            "must divide the image size");
    require(scene.min_shapes <= scene.max_shapes, "min_shapes", "must not exceed max_shapes");
    require(scene.bar_fraction >= 0.0 && scene.bar_fraction <= 1.0, "bar_fraction", "must lie in [0, 1]");
    require(scene.shift.brightness >= 0.0, "shift_brightness", "must be non-negative");
    require(scene.shift.noise_sigma >= 0.0, "shift_noise", "must be non-negative");
    require(scene.shift.stripe_period > 0.0, "shift_stripe_period", "must be positive");
    require(eval_images >= 1, "eval_images", "must be at least 1");
    require(mean_images >= 1, "mean_images", "must be at least 1");
    require(!output_dir.empty(), "output_dir", "must not be empty");
}

void set_config_value(RunConfig& config, const std::string& key, const std::string& value)
{
    find_entry(key).set(config, value);
}

RunConfig parse_config(const std::string& text)
{
    RunConfig config;
    std::istringstream in(text);
    std::string line;
    std::size_t number = 0;
    std::set<std::string> seen;
    while (std::getline(in, line)) {
        ++number;
        if (const auto hash = line.find('#'); hash != std::string::npos)
            line.erase(hash);
        line = trim(line);
        if (line.empty())
            continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError("config line " + std::to_string(number) + ": expected 'key = value'");
        const std::string key = trim(line.substr(0, eq));
        if (!seen.insert(key).second)
            throw ConfigError("config line " + std::to_string(number) + ": duplicate key '" + key + "'");
        set_config_value(config, key, trim(line.substr(eq + 1)));
    }
    config.validate();
    return config;
}

RunConfig load_config(const std::filesystem::path& path)
{
    try {
        return parse_config(read_file(path));
    } catch (const ConfigError& e) {
        throw ConfigError(path.string() + ": " + e.what());
    }
}

void apply_overrides(RunConfig& config, const std::vector<std::string>& assignments)
{
    for (const auto& a : assignments) {
        const auto eq = a.find('=');
        if (eq == std::string::npos)
            throw ConfigError("override '" + a + "' is not key=value");
        set_config_value(config, trim(a.substr(0, eq)), trim(a.substr(eq + 1)));
    }
    config.validate();
}

std::string serialize_config(const RunConfig& config)
{
    std::string out;
    for (const auto& e : entries())
        out += e.key + " = " + e.get(config) + "\n";
    return out;
}

std::vector<std::string> config_keys()
{
    std::vector<std::string> keys;
    for (const auto& e : entries())
        keys.push_back(e.key);
    return keys;
}

}  // namespace afrda
