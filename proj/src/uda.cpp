#include "afrda/uda.hpp"

#include <algorithm>
#include <cmath>

namespace afrda {

namespace {

constexpr std::uint64_t kMixStream = 0x4d4958;  // "MIX"

void check_single(const Tensor& image, const LabelMap& label, const char* what)
{
    const Dims4 d = dims4(image);
    if (d.batch != 1 || label.batch != 1 || d.height != label.height || d.width != label.width)
        throw ShapeError(std::string(what) + ": expected one image with a matching label map, got " +
                         to_string(image.shape()));
}

}  // namespace

Var cross_entropy(Var logits, const LabelMap& labels, const Tensor* weight)
{
    const Tensor& z = logits.value();
    const Dims4 d = dims4(z);
    if (labels.batch != d.batch || labels.height != d.height || labels.width != d.width)
        throw ShapeError("labels do not match logits " + to_string(z.shape()));
    if (weight && weight->shape() != Shape{d.batch, 1, d.height, d.width})
        throw ShapeError("loss weight must be " + to_string({d.batch, 1, d.height, d.width}));
    const auto classes = static_cast<int>(d.channels);
    for (int y : labels.data)
        if (y != kIgnoreLabel && (y < 0 || y >= classes))
            throw DomainError("label " + std::to_string(y) + " outside [0, " + std::to_string(classes) + ")");

    const std::size_t plane = d.plane();
    Tensor probs(z.shape());
    double total = 0.0;
    std::size_t counted = 0;
    for (std::size_t b = 0; b < d.batch; ++b)
        for (std::size_t p = 0; p < plane; ++p) {
            const std::size_t base = b * d.channels * plane + p;
            std::size_t top = 0;
            for (std::size_t c = 1; c < d.channels; ++c)
                if (z[base + c * plane] > z[base + top * plane])
                    top = c;
            const double m = z[base + top * plane];
            double rest = 0.0;  // sum of exp(z_c - m) over c != top
            for (std::size_t c = 0; c < d.channels; ++c) {
                const double e = std::exp(z[base + c * plane] - m);
                probs[base + c * plane] = e;
                if (c != top)
                    rest += e;
            }
            const double log_norm = std::log1p(rest);
            for (std::size_t c = 0; c < d.channels; ++c)
                probs[base + c * plane] /= 1.0 + rest;

            const int y = labels.data[b * plane + p];
            if (y == kIgnoreLabel)
                continue;
            ++counted;
            const double w = weight ? (*weight)[b * plane + p] : 1.0;
            total += w * (log_norm - (z[base + static_cast<std::size_t>(y) * plane] - m));
        }
    const double denom = counted > 0 ? static_cast<double>(counted) : 1.0;

    return logits.tape().record(
        Tensor::scalar(total / denom), {logits},
        [logits, labels, denom, s = std::move(probs), w = weight ? *weight : Tensor()](Tape& t, const Tensor& g) {
            const Dims4 dd = dims4(s);
            const std::size_t pl = dd.plane();
            Tensor& gx = t.grad_buffer(logits);
            const double scale = g[0] / denom;
            for (std::size_t b = 0; b < dd.batch; ++b)
                for (std::size_t p = 0; p < pl; ++p) {
                    const int y = labels.data[b * pl + p];
                    if (y == kIgnoreLabel)
                        continue;
                    const double f = scale * (w.empty() ? 1.0 : w[b * pl + p]);
                    const std::size_t base = b * dd.channels * pl + p;
                    for (std::size_t c = 0; c < dd.channels; ++c)
                        gx[base + c * pl] += f * (s[base + c * pl] - (static_cast<int>(c) == y ? 1.0 : 0.0));
                }
        });
}

PseudoLabelBatch pseudo_label_from_logits(const Tensor& logits, double tau)
{
    const Dims4 d = dims4(logits);
    if (!(tau > 1.0 / static_cast<double>(d.channels) && tau < 1.0))
        throw DomainError("tau must lie in (1/C, 1)");
    const Tensor probs = softmax_channels(logits);
    PseudoLabelBatch out{argmax_channels(logits), std::vector<double>(d.batch, 0.0)};
    for (std::size_t b = 0; b < d.batch; ++b) {
        std::size_t confident = 0;
        for (std::size_t p = 0; p < d.plane(); ++p) {
            const std::size_t cls = static_cast<std::size_t>(out.labels.data[b * d.plane() + p]);
            if (probs[(b * d.channels + cls) * d.plane() + p] > tau)
                ++confident;
        }
        out.quality[b] = static_cast<double>(confident) / static_cast<double>(d.plane());
    }
    return out;
}

PseudoLabelBatch pseudo_label(const Tensor& target_images, NetParams& teacher, const NetConfig& config, double tau)
{
    return pseudo_label_from_logits(infer_logits(target_images, teacher, config), tau);
}

MixResult classmix(const Sample& src, const Sample& tgt, const LabelMap& tgt_pseudo, double tgt_weight, Rng& rng)
{
    std::vector<int> present;
    for (int y : src.label.data)
        if (y != kIgnoreLabel && std::find(present.begin(), present.end(), y) == present.end())
            present.push_back(y);
    std::sort(present.begin(), present.end());
    std::shuffle(present.begin(), present.end(), rng);
    present.resize((present.size() + 1) / 2);
    std::sort(present.begin(), present.end());
    return classmix_with(src, tgt, tgt_pseudo, tgt_weight, present);
}

MixResult classmix_with(const Sample& src, const Sample& tgt, const LabelMap& tgt_pseudo, double tgt_weight,
                        std::span<const int> chosen)
{
    check_single(src.image, src.label, "classmix source");
    check_single(tgt.image, tgt_pseudo, "classmix target");
    if (src.image.shape() != tgt.image.shape())
        throw ShapeError("classmix parents differ in shape: " + to_string(src.image.shape()) + " vs " +
                         to_string(tgt.image.shape()));

    const Dims4 d = dims4(src.image);
    const std::size_t plane = d.plane();
    MixResult mix{tgt.image, tgt_pseudo, Tensor({1, 1, d.height, d.width}, tgt_weight),
                  std::vector<int>(chosen.begin(), chosen.end())};
    for (std::size_t p = 0; p < plane; ++p) {
        const int y = src.label.data[p];
        if (std::find(chosen.begin(), chosen.end(), y) == chosen.end())
            continue;
        for (std::size_t c = 0; c < d.channels; ++c)
            mix.image[c * plane + p] = src.image[c * plane + p];
        mix.label.data[p] = y;
        mix.weight[p] = 1.0;
    }
    return mix;
}

double MaskPattern::dropped_fraction() const
{
    const auto n = static_cast<double>(std::count(drop.begin(), drop.end(), std::uint8_t{1}));
    return drop.empty() ? 0.0 : n / static_cast<double>(drop.size());
}

MaskPattern make_mask(std::size_t height, std::size_t width, std::size_t patch, double ratio, Rng& rng)
{
    if (patch == 0 || height % patch != 0 || width % patch != 0)
        throw DomainError("mask patch " + std::to_string(patch) + " does not divide " + std::to_string(height) + "x" +
                          std::to_string(width));
    if (!(ratio >= 0.0 && ratio <= 1.0))
        throw DomainError("mask ratio must lie in [0, 1]");
    MaskPattern m{patch, height / patch, width / patch, ratio, {}};
    const std::size_t cells = m.rows * m.cols;
    const auto dropped = static_cast<std::size_t>(std::lround(ratio * static_cast<double>(cells)));
    std::vector<std::size_t> order(cells);
    for (std::size_t i = 0; i < cells; ++i)
        order[i] = i;
    std::shuffle(order.begin(), order.end(), rng);
    m.drop.assign(cells, 0);
    for (std::size_t i = 0; i < dropped; ++i)
        m.drop[order[i]] = 1;
    return m;
}

Tensor apply_mask(const Tensor& images, const MaskPattern& pattern, const Rgb& fill)
{
    const Dims4 d = dims4(images);
    if (d.channels != 3 || d.height != pattern.rows * pattern.patch || d.width != pattern.cols * pattern.patch)
        throw ShapeError("mask pattern does not fit images of shape " + to_string(images.shape()));
    Tensor out = images;
    for (std::size_t b = 0; b < d.batch; ++b)
        for (std::size_t y = 0; y < d.height; ++y)
            for (std::size_t x = 0; x < d.width; ++x)
                if (pattern.masked(y, x))
                    for (std::size_t c = 0; c < 3; ++c)
                        out.at(b, c, y, x) = fill[c];
    return out;
}

void ema_update(ParamSet& teacher, const ParamSet& student, double alpha)
{
    if (!(alpha >= 0.0 && alpha <= 1.0))
        throw DomainError("EMA coefficient must lie in [0, 1]");
    if (!teacher.same_structure(student))
        throw ShapeError("teacher and student parameter sets differ");
    for (std::size_t k = 0; k < teacher.size(); ++k) {
        Tensor& t = teacher.params()[k].value;
        const Tensor& s = student.params()[k].value;
        for (std::size_t i = 0; i < t.size(); ++i)
            t[i] = alpha * t[i] + (1.0 - alpha) * s[i];
    }
}

void sgd_step(ParamSet& params, std::vector<Tensor>& velocity, double lr, double momentum)
{
    auto& ps = params.params();
    if (velocity.size() != ps.size())
        throw ShapeError("optimizer state does not match the parameter set");
    for (std::size_t k = 0; k < ps.size(); ++k) {
        Param& p = ps[k];
        Tensor& v = velocity[k];
        if (p.grad.empty())
            continue;
        for (std::size_t i = 0; i < v.size(); ++i) {
            v[i] = momentum * v[i] + p.grad[i];
            p.value[i] -= lr * v[i];
        }
    }
}

TrainState init_state(const RunConfig& config)
{
    TrainState state{init_net(config.net, config.seed), {}, 0, {}, make_rng(config.seed, kMixStream)};
    state.teacher = state.student;
    for (const Param& p : state.student.set.params())
        state.velocity.push_back(Tensor::zeros_like(p.value));
    return state;
}

double ema_coefficient(const RunConfig& config, std::uint64_t iteration)
{
    if (!config.ema_warmup)
        return config.ema_alpha;
    return std::min(1.0 - 1.0 / static_cast<double>(iteration + 1), config.ema_alpha);
}

StepLosses train_step(TrainState& state, const Sample& src, const Sample& tgt, const RunConfig& config,
                      const Rgb& mask_fill)
{
    const Dims4 d = dims4(src.image);
    if (tgt.image.shape() != src.image.shape())
        throw ShapeError("source and target batches differ in shape");
    const std::size_t batch = d.batch;

    const PseudoLabelBatch pseudo = pseudo_label(tgt.image, state.teacher, config.net, config.tau);
    StepLosses losses;
    for (double q : pseudo.quality)
        losses.q_mean += q / static_cast<double>(batch);

    state.student.set.zero_grad();
    Tape tape;
    const Var loss_s =
        cross_entropy(forward(tape, tape.constant(src.image), state.student, config.net).final_logits, src.label);
    Var total = loss_s;
    losses.source = loss_s.value().item();

    if (config.enable_target_loss) {
        std::vector<Tensor> images, weights;
        std::vector<LabelMap> labels;
        for (std::size_t b = 0; b < batch; ++b) {
            const double w = config.unweighted_mix ? 1.0 : pseudo.quality[b];
            MixResult mix = classmix({take(src.image, b), take(src.label, b)}, {take(tgt.image, b), take(pseudo.labels, b)},
                                     take(pseudo.labels, b), w, state.rng);
            images.push_back(std::move(mix.image));
            labels.push_back(std::move(mix.label));
            weights.push_back(std::move(mix.weight));
        }
        const Tensor weight = stack(weights);
        const Var loss_t = cross_entropy(forward(tape, tape.constant(stack(images)), state.student, config.net).final_logits,
                                         stack(labels), &weight);
        total = add(total, loss_t);
        losses.target = loss_t.value().item();
    }

    if (config.enable_mask_loss) {
        std::vector<Tensor> images;
        Tensor weight({batch, 1, d.height, d.width});
        for (std::size_t b = 0; b < batch; ++b) {
            const MaskPattern pattern = make_mask(d.height, d.width, config.mask_patch, config.mask_ratio, state.rng);
            images.push_back(apply_mask(take(tgt.image, b), pattern, mask_fill));
            std::fill_n(weight.raw() + b * d.plane(), d.plane(), pseudo.quality[b]);
        }
        const Var ce = cross_entropy(forward(tape, tape.constant(stack(images)), state.student, config.net).final_logits,
                                     pseudo.labels, &weight);
        const Var loss_m = scale(ce, config.lambda_mask);
        total = add(total, loss_m);
        losses.mask = loss_m.value().item();
    }

    losses.total = total.value().item();
    tape.backward(total);
    sgd_step(state.student.set, state.velocity, config.lr, config.momentum);
    ema_update(state.teacher.set, state.student.set, ema_coefficient(config, state.iteration));
    ++state.iteration;
    return losses;
}

}  // namespace afrda
