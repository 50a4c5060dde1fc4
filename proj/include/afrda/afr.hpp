#pragma once

// Attentive feature refinement: logit-guided attention (CALA), uncertainty
// suppressed HR feature attention (UHFA), learnable convex fusion of the two,
// and residual refinement of every HR feature level.

#include "afrda/autodiff.hpp"
#include "afrda/gaussian.hpp"
#include "afrda/random.hpp"

#include <span>
#include <string>
#include <vector>

namespace afrda {

struct AfrConfig {
    bool enable_afr = true;
    bool enable_cala = true;
    bool enable_uhfa = true;
    bool enable_hf_cala = true;
    bool enable_hf_uhfa = true;
    bool enable_hr_uncertainty = true;
    bool enable_lr_uncertainty = true;
    bool detach_uncertainty = false;
    double gamma = 1.0;
    int kernel_size = 3;

    bool refines() const noexcept { return enable_afr && (enable_cala || enable_uhfa); }
};

/// Parameter names of the AFR block inside a ParamSet.
struct AfrParamNames {
    std::string cala_w;     // 1 x C, shared by the logit projection and the residual projection
    std::string cala_b;     // 1
    std::string uhfa_w;     // 1 x 1 x 3 x 3
    std::string uhfa_b;     // 1
    std::string alpha_raw;  // 1, alpha = sigmoid(alpha_raw)

    static AfrParamNames with_prefix(const std::string& prefix);
};

/// Registers freshly initialized AFR parameters: fan-in uniform weights, zero
/// biases, alpha_raw = 0.
AfrParamNames add_afr_params(ParamSet& set, std::size_t num_classes, Rng& rng, const std::string& prefix = "afr.");

enum class Binding { trainable, frozen };

/// Leaf for a trainable param, constant copy for a frozen one.
Var bind(Tape& tape, Param& param, Binding binding);

/// AFR parameters bound to one tape.
struct AfrParams {
    Var cala_w;
    Var cala_b;
    Var uhfa_w;
    Var uhfa_b;
    Var alpha_raw;

    static AfrParams bind(Tape& tape, ParamSet& set, const AfrParamNames& names, Binding binding);
};

struct CalaTrace {
    Var logit_attention;        // sigmoid(conv1x1(L_LR))
    Var uncertainty_attention;  // sigmoid(U_HR)
    Var modulated;              // logit_attention * uncertainty_attention
    Var residual;               // projected high-frequency residual of L_LR
};

struct UhfaTrace {
    Var pooled;       // channel mean of the HR features
    Var residual;     // its high-frequency residual
    Var spatial;      // 3x3 conv response (unbounded)
};

/// Logit-guided attention A1 at LR-logit resolution. `u_hr` must already match
/// the logits' spatial size.
Var cala(Var lr_logits, Var u_hr, const AfrParams& params, const GaussianKernel& kernel,
         const AfrConfig& config = {}, CalaTrace* trace = nullptr);

/// Uncertainty-suppressed HR attention A2 for one feature level. `u_lr` must
/// already match the level's spatial size.
Var uhfa(Var f_hr, Var u_lr, const AfrParams& params, const GaussianKernel& kernel,
         const AfrConfig& config = {}, UhfaTrace* trace = nullptr);

/// alpha * a1 + (1 - alpha) * a2 with alpha = sigmoid(alpha_raw).
Var fuse(Var a1, Var a2, Var alpha_raw);

/// f * a + f, with the single-channel attention broadcast over f's channels.
Var refine(Var f_hr, Var a_final);

struct AfrLevelTrace {
    Var a1;       // A1 resized to this level
    Var a2;       // empty when UHFA is off
    Var a_final;
    UhfaTrace uhfa;
};

struct AfrTrace {
    Var u_hr;     // uncertainty of the HR auxiliary head, at HR-aux resolution
    Var u_lr;     // uncertainty of the LR logits
    Var a1;       // at LR-logit resolution, empty when CALA is off
    CalaTrace cala;
    std::vector<AfrLevelTrace> levels;
};

/// Refines every HR feature level. Returns the inputs unchanged when the
/// configuration disables refinement.
std::vector<Var> afr_forward(std::span<const Var> levels, Var lr_logits, Var hr_logits_aux, const AfrParams& params,
                             const AfrConfig& config, AfrTrace* trace = nullptr);

}  // namespace afrda
