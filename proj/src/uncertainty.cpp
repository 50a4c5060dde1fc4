#include "afrda/uncertainty.hpp"

#include <vector>

namespace afrda {

namespace {

struct Confidence {
    Tensor probs;                   // B x C x H x W softmax
    std::vector<std::size_t> top;   // per-pixel argmax channel, lowest index on ties
    Tensor uncertainty;             // B x 1 x H x W
};

Confidence confidence(const Tensor& logits)
{
    Confidence out{softmax_channels(logits), {}, {}};
    const Dims4 d = dims4(logits);
    out.top.resize(d.batch * d.plane());
    out.uncertainty = Tensor({d.batch, 1, d.height, d.width});
    for (std::size_t b = 0; b < d.batch; ++b)
        for (std::size_t p = 0; p < d.plane(); ++p) {
            const double* s = out.probs.raw() + b * d.channels * d.plane() + p;
            std::size_t best = 0;
            for (std::size_t c = 1; c < d.channels; ++c)
                if (s[c * d.plane()] > s[best * d.plane()])
                    best = c;
            out.top[b * d.plane() + p] = best;
            out.uncertainty[b * d.plane() + p] = 1.0 - s[best * d.plane()];
        }
    return out;
}

}  // namespace

Tensor uncertainty_from_logits(const Tensor& logits)
{
    return confidence(logits).uncertainty;
}

Var uncertainty_from_logits(Var logits)
{
    Confidence conf = confidence(logits.value());
    if (logits.tape().tracking_branches()) {
        std::uint64_t sig = 0;
        for (std::size_t idx : conf.top)
            sig = hash_bits(sig, idx);
        logits.tape().note_branch(sig);
    }

    Tensor u = conf.uncertainty;
    return logits.tape().record(std::move(u), {logits},
        [logits, probs = std::move(conf.probs), top = std::move(conf.top)](Tape& t, const Tensor& g) {
            // dU/dz_c = -s_m (delta_cm - s_c), m the winning channel.
            const Dims4 d = dims4(probs);
            Tensor& gx = t.grad_buffer(logits);
            for (std::size_t b = 0; b < d.batch; ++b)
                for (std::size_t p = 0; p < d.plane(); ++p) {
                    const std::size_t base = b * d.channels * d.plane() + p;
                    const std::size_t m = top[b * d.plane() + p];
                    const double sm = probs[base + m * d.plane()];
                    const double gv = g[b * d.plane() + p];
                    for (std::size_t c = 0; c < d.channels; ++c) {
                        const double sc = probs[base + c * d.plane()];
                        gx[base + c * d.plane()] += gv * (-sm * ((c == m ? 1.0 : 0.0) - sc));
                    }
                }
        });
}

}  // namespace afrda
