#include "afrda/afr.hpp"

#include "afrda/uncertainty.hpp"

#include <cmath>

namespace afrda {

AfrParamNames AfrParamNames::with_prefix(const std::string& prefix)
{
    return {prefix + "cala_w", prefix + "cala_b", prefix + "uhfa_w", prefix + "uhfa_b", prefix + "alpha_raw"};
}

namespace {

void check_spatial(const Tensor& a, const Tensor& b, const char* what)
{
    const Dims4 da = dims4(a);
    const Dims4 db = dims4(b);
    if (da.batch != db.batch || da.height != db.height || da.width != db.width)
        throw ShapeError(std::string(what) + ": spatial mismatch " + to_string(a.shape()) + " vs " +
                         to_string(b.shape()));
}

}  // namespace

AfrParamNames add_afr_params(ParamSet& set, std::size_t num_classes, Rng& rng, const std::string& prefix)
{
    const AfrParamNames names = AfrParamNames::with_prefix(prefix);
    set.add(names.cala_w, fan_in_uniform({1, num_classes}, num_classes, rng));
    set.add(names.cala_b, Tensor({1}));
    set.add(names.uhfa_w, fan_in_uniform({1, 1, 3, 3}, 9, rng));
    set.add(names.uhfa_b, Tensor({1}));
    set.add(names.alpha_raw, Tensor({1}));
    return names;
}

Var bind(Tape& tape, Param& param, Binding binding)
{
    return binding == Binding::trainable ? tape.leaf(param) : tape.constant(param.value);
}

AfrParams AfrParams::bind(Tape& tape, ParamSet& set, const AfrParamNames& names, Binding binding)
{
    return {afrda::bind(tape, set.at(names.cala_w), binding), afrda::bind(tape, set.at(names.cala_b), binding),
            afrda::bind(tape, set.at(names.uhfa_w), binding), afrda::bind(tape, set.at(names.uhfa_b), binding),
            afrda::bind(tape, set.at(names.alpha_raw), binding)};
}

Var cala(Var lr_logits, Var u_hr, const AfrParams& params, const GaussianKernel& kernel, const AfrConfig& config,
         CalaTrace* trace)
{
    check_spatial(lr_logits.value(), u_hr.value(), "cala");

    Var logit_attn = sigmoid(conv1x1(lr_logits, params.cala_w, params.cala_b));
    Var unc_attn;
    Var modulated = logit_attn;
    if (config.enable_hr_uncertainty) {
        unc_attn = sigmoid(u_hr);
        modulated = mul(logit_attn, unc_attn);
    }

    // The C-channel residual is projected to one channel with the same weights
    // (no bias) so that constant logits contribute exactly zero.
    Var residual;
    Var pre = modulated;
    if (config.enable_hf_cala) {
        residual = conv1x1(high_freq(lr_logits, kernel), params.cala_w);
        pre = add(modulated, residual);
    }
    Var a1 = sigmoid(pre);

    if (trace)
        *trace = {logit_attn, unc_attn, modulated, residual};
    return a1;
}

Var uhfa(Var f_hr, Var u_lr, const AfrParams& params, const GaussianKernel& kernel, const AfrConfig& config,
         UhfaTrace* trace)
{
    check_spatial(f_hr.value(), u_lr.value(), "uhfa");

    Var pooled = channel_mean(f_hr);
    Var residual;
    Var fused = pooled;
    if (config.enable_hf_uhfa) {
        residual = high_freq(pooled, kernel);
        fused = add(pooled, residual);
    }
    Var spatial = conv3x3(fused, params.uhfa_w, params.uhfa_b);
    Var gated = config.enable_lr_uncertainty ? mul(spatial, exp(neg(u_lr))) : spatial;

    if (trace)
        *trace = {pooled, residual, spatial};
    return sigmoid(gated);
}

Var fuse(Var a1, Var a2, Var alpha_raw)
{
    const Tensor& v1 = a1.value();
    const Tensor& v2 = a2.value();
    if (v1.shape() != v2.shape())
        throw ShapeError("fuse: attention maps differ in shape " + to_string(v1.shape()) + " vs " +
                         to_string(v2.shape()));
    const double alpha = sigmoid(alpha_raw.value())[0];
    Tensor out(v1.shape());
    for (std::size_t i = 0; i < out.size(); ++i)
        out[i] = alpha * v1[i] + (1.0 - alpha) * v2[i];

    return a1.tape().record(std::move(out), {a1, a2, alpha_raw}, [a1, a2, alpha_raw, alpha](Tape& t, const Tensor& g) {
        const Tensor& v1 = t.value(a1);
        const Tensor& v2 = t.value(a2);
        if (t.requires_grad(a1)) {
            Tensor& g1 = t.grad_buffer(a1);
            for (std::size_t i = 0; i < g.size(); ++i)
                g1[i] += alpha * g[i];
        }
        if (t.requires_grad(a2)) {
            Tensor& g2 = t.grad_buffer(a2);
            for (std::size_t i = 0; i < g.size(); ++i)
                g2[i] += (1.0 - alpha) * g[i];
        }
        if (t.requires_grad(alpha_raw)) {
            double s = 0.0;
            for (std::size_t i = 0; i < g.size(); ++i)
                s += g[i] * (v1[i] - v2[i]);
            t.grad_buffer(alpha_raw)[0] += alpha * (1.0 - alpha) * s;
        }
    });
}

Var refine(Var f_hr, Var a_final)
{
    check_spatial(f_hr.value(), a_final.value(), "refine");
    return add(mul(f_hr, a_final), f_hr);
}

std::vector<Var> afr_forward(std::span<const Var> levels, Var lr_logits, Var hr_logits_aux, const AfrParams& params,
                             const AfrConfig& config, AfrTrace* trace)
{
    if (levels.empty())
        throw DomainError("afr_forward needs at least one feature level");
    for (std::size_t n = 1; n < levels.size(); ++n) {
        const Dims4 prev = dims4(levels[n - 1].value());
        const Dims4 cur = dims4(levels[n].value());
        if (cur.height > prev.height || cur.width > prev.width)
            throw ShapeError("feature levels must have non-increasing spatial size");
    }
    std::vector<Var> refined(levels.begin(), levels.end());
    if (!config.refines())
        return refined;

    Tape& tape = lr_logits.tape();
    const GaussianKernel kernel(config.gamma, config.kernel_size);
    const Dims4 ld = dims4(lr_logits.value());

    auto uncertainty_of = [&](Var logits) {
        return config.detach_uncertainty ? tape.constant(uncertainty_from_logits(logits.value()))
                                         : uncertainty_from_logits(logits);
    };

    AfrTrace local;
    AfrTrace& tr = trace ? *trace : local;
    tr = {};
    tr.u_hr = uncertainty_of(hr_logits_aux);
    tr.u_lr = uncertainty_of(lr_logits);

    if (config.enable_cala) {
        Var u_hr = resize_bilinear(tr.u_hr, ld.height, ld.width);
        tr.a1 = cala(lr_logits, u_hr, params, kernel, config, &tr.cala);
    }

    for (std::size_t n = 0; n < levels.size(); ++n) {
        const Dims4 fd = dims4(levels[n].value());
        AfrLevelTrace lt;
        if (config.enable_cala)
            lt.a1 = resize_bilinear(tr.a1, fd.height, fd.width);
        if (config.enable_uhfa) {
            Var u_lr = resize_bilinear(tr.u_lr, fd.height, fd.width);
            lt.a2 = uhfa(levels[n], u_lr, params, kernel, config, &lt.uhfa);
        }
        if (config.enable_cala && config.enable_uhfa)
            lt.a_final = fuse(lt.a1, lt.a2, params.alpha_raw);
        else
            lt.a_final = config.enable_cala ? lt.a1 : lt.a2;
        refined[n] = refine(levels[n], lt.a_final);
        tr.levels.push_back(lt);
    }
    return refined;
}

}  // namespace afrda
