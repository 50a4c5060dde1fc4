#pragma once

// Two-branch desk-scale segmentation network hosting AFR.
//
//   image ──resize 1/2──► LR encoder ──► lr_head ──► lr_logits ───────────────┐
//     │                                                                        ├─► average ─► final logits
//     └────────────────► HR encoder ──► features ──► AFR ──► hr_head ─► hr_logits
//                                          └─► hr_aux_head ─► U_HR (into AFR)
//
// Each encoder is two 3x3 conv + ReLU layers. AFR refines the HR features
// before the HR head.

#include "afrda/afr.hpp"
#include "afrda/autodiff.hpp"

#include <cstdint>
#include <vector>

namespace afrda {

struct NetConfig {
    std::size_t num_classes = 4;
    std::size_t hr_width = 16;
    std::size_t lr_width = 16;
    std::size_t hr_levels = 1;  // 1 or 2; level 1 is a 2x downsample of level 0
    AfrConfig afr;
};

/// All learnable state of the network, owned by one ParamSet.
struct NetParams {
    ParamSet set;
    AfrParamNames afr;
};

NetParams init_net(const NetConfig& config, std::uint64_t seed);

struct NetOutput {
    Var final_logits;            // B x C x H x W
    Var lr_logits;               // B x C x H/2 x W/2
    Var hr_logits;               // B x C x H x W
    Var hr_aux_logits;           // B x C x H x W
    std::vector<Var> features;   // raw HR levels
    std::vector<Var> refined;    // after AFR (same as features when AFR is off)
    AfrTrace afr;
};

/// image: B x 3 x H x W with H and W divisible by 4.
NetOutput forward(Tape& tape, Var image, NetParams& params, const NetConfig& config,
                  Binding binding = Binding::trainable);

/// Final logits without gradient bookkeeping.
Tensor infer_logits(const Tensor& image, NetParams& params, const NetConfig& config);

/// Per-pixel argmax over channels, lowest index on ties.
LabelMap argmax_channels(const Tensor& logits);

LabelMap predict(const Tensor& image, NetParams& params, const NetConfig& config);

}  // namespace afrda
