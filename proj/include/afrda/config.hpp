#pragma once

// Run configuration: flat `key = value` text, `#` starts a comment.
//
//   iterations = 2000
//   enable_hf_uhfa = false   # ablation
//
// Unknown keys and out-of-range values are rejected when parsed.

#include "afrda/seg_net.hpp"
#include "afrda/synthdata.hpp"

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

namespace afrda {

class ConfigError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

struct RunConfig {
    std::uint64_t seed = 0;  // parameter init and training randomness; scenes use scene.seed (key data_seed)
    std::uint64_t iterations = 2000;
    std::size_t batch_size = 2;

    double lr = 0.01;
    double momentum = 0.9;
    double ema_alpha = 0.99;       // teacher horizon ~100 steps
    bool ema_warmup = true;        // alpha_t = min(1 - 1/(t+1), ema_alpha)
    double tau = 0.968;
    std::size_t mask_patch = 8;
    double mask_ratio = 0.7;
    double lambda_mask = 1.0;
    bool enable_target_loss = true;
    bool enable_mask_loss = true;
    bool unweighted_mix = false;

    NetConfig net;
    SceneSpec scene;

    std::uint64_t eval_interval = 200;
    std::size_t eval_images = 64;
    std::uint64_t checkpoint_interval = 0;  // 0: final checkpoint only
    std::uint64_t dump_interval = 0;        // 0: no attention dumps
    std::size_t mean_images = 64;
    std::string output_dir = "run";

    /// Throws ConfigError naming the first offending key.
    void validate() const;
};

/// Assigns one key from its textual value (no validation of cross-key constraints).
void set_config_value(RunConfig& config, const std::string& key, const std::string& value);

RunConfig parse_config(const std::string& text);
RunConfig load_config(const std::filesystem::path& path);

/// Applies `key=value` overrides in order, then validates.
void apply_overrides(RunConfig& config, const std::vector<std::string>& assignments);

/// Every key in a fixed order; parse(serialize(c)) reproduces c exactly.
std::string serialize_config(const RunConfig& config);

std::vector<std::string> config_keys();

}  // namespace afrda
