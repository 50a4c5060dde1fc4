#include "afrda/seg_net.hpp"

#include <cmath>

namespace afrda {

namespace {

constexpr std::size_t kImageChannels = 3;

void add_conv3x3(ParamSet& set, const std::string& name, std::size_t in, std::size_t out, Rng& rng)
{
    set.add(name + ".w", fan_in_uniform({out, in, 3, 3}, in * 9, rng));
    set.add(name + ".b", Tensor({out}));
}

void add_conv1x1(ParamSet& set, const std::string& name, std::size_t in, std::size_t out, Rng& rng)
{
    set.add(name + ".w", fan_in_uniform({out, in}, in, rng));
    set.add(name + ".b", Tensor({out}));
}

struct Binder {
    Tape& tape;
    ParamSet& set;
    Binding binding;

    Var operator()(const std::string& name) const { return bind(tape, set.at(name), binding); }
};

Var encoder(Var x, const Binder& p, const std::string& prefix)
{
    Var h = relu(conv2d_3x3(x, p(prefix + ".conv1.w"), p(prefix + ".conv1.b")));
    return relu(conv2d_3x3(h, p(prefix + ".conv2.w"), p(prefix + ".conv2.b")));
}

}  // namespace

NetParams init_net(const NetConfig& config, std::uint64_t seed)
{
    if (config.num_classes < 2)
        throw DomainError("network needs at least two classes");
    if (config.hr_levels < 1 || config.hr_levels > 2)
        throw DomainError("hr_levels must be 1 or 2");
    Rng rng = make_rng(seed, 0x6e6574);
    NetParams net;
    add_conv3x3(net.set, "lr.conv1", kImageChannels, config.lr_width, rng);
    add_conv3x3(net.set, "lr.conv2", config.lr_width, config.lr_width, rng);
    add_conv1x1(net.set, "lr.head", config.lr_width, config.num_classes, rng);
    add_conv3x3(net.set, "hr.conv1", kImageChannels, config.hr_width, rng);
    add_conv3x3(net.set, "hr.conv2", config.hr_width, config.hr_width, rng);
    add_conv1x1(net.set, "hr.aux_head", config.hr_width, config.num_classes, rng);
    add_conv1x1(net.set, "hr.head", config.hr_width, config.num_classes, rng);
    net.afr = add_afr_params(net.set, config.num_classes, rng);
    return net;
}

NetOutput forward(Tape& tape, Var image, NetParams& params, const NetConfig& config, Binding binding)
{
    const Dims4 d = dims4(image.value());
    if (d.channels != kImageChannels)
        throw ShapeError("network expects 3-channel images, got " + to_string(image.shape()));
    if (d.height % 4 != 0 || d.width % 4 != 0)
        throw DomainError("image size " + to_string(image.shape()) + " must be divisible by 4");

    const Binder p{tape, params.set, binding};
    NetOutput out;

    Var small = resize_bilinear(image, d.height / 2, d.width / 2);
    Var lr_features = encoder(small, p, "lr");
    out.lr_logits = conv1x1(lr_features, p("lr.head.w"), p("lr.head.b"));

    Var hr = encoder(image, p, "hr");
    out.features.push_back(hr);
    if (config.hr_levels == 2)
        out.features.push_back(resize_bilinear(hr, d.height / 2, d.width / 2));
    out.hr_aux_logits = conv1x1(hr, p("hr.aux_head.w"), p("hr.aux_head.b"));

    const AfrParams afr = AfrParams::bind(tape, params.set, params.afr, binding);
    out.refined = afr_forward(out.features, out.lr_logits, out.hr_aux_logits, afr, config.afr, &out.afr);

    Var merged = out.refined[0];
    if (out.refined.size() == 2)
        merged = add(merged, resize_bilinear(out.refined[1], d.height, d.width));
    out.hr_logits = conv1x1(merged, p("hr.head.w"), p("hr.head.b"));

    Var lr_up = resize_bilinear(out.lr_logits, d.height, d.width);
    out.final_logits = scale(add(lr_up, out.hr_logits), 0.5);
    return out;
}

Tensor infer_logits(const Tensor& image, NetParams& params, const NetConfig& config)
{
    Tape tape;
    NetOutput out = forward(tape, tape.constant(image), params, config, Binding::frozen);
    return out.final_logits.value();
}

LabelMap argmax_channels(const Tensor& logits)
{
    const Dims4 d = dims4(logits);
    LabelMap labels(d.batch, d.height, d.width);
    for (std::size_t b = 0; b < d.batch; ++b)
        for (std::size_t p = 0; p < d.plane(); ++p) {
            const double* v = logits.raw() + b * d.channels * d.plane() + p;
            std::size_t best = 0;
            for (std::size_t c = 1; c < d.channels; ++c)
                if (v[c * d.plane()] > v[best * d.plane()])
                    best = c;
            labels.data[b * d.plane() + p] = static_cast<int>(best);
        }
    return labels;
}

LabelMap predict(const Tensor& image, NetParams& params, const NetConfig& config)
{
    return argmax_channels(infer_logits(image, params, config));
}

}  // namespace afrda
