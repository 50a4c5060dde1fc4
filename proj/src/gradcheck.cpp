#include "afrda/gradcheck.hpp"

#include "afrda/gaussian.hpp"
#include "afrda/random.hpp"
#include "afrda/uda.hpp"
#include "afrda/uncertainty.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

namespace afrda {

namespace {

constexpr std::uint64_t kInputStream = 0x494e;    // "IN"
constexpr std::uint64_t kWeightStream = 0x5257;   // "RW"
constexpr std::uint64_t kSampleStream = 0x5350;   // "SP"

Tensor random_tensor(Shape shape, Rng& rng, double lo = -1.0, double hi = 1.0)
{
    Tensor t(std::move(shape));
    for (double& v : t.data())
        v = uniform(rng, lo, hi);
    return t;
}

struct Evaluation {
    Tensor output;
    std::uint64_t signature = 0;
};

Evaluation evaluate_case(GradcheckCase& c, Binding binding, Tape& tape, Var* out)
{
    tape.track_branches(true);
    const Var v = c.fn(tape, c.inputs, binding);
    if (out)
        *out = v;
    return {v.value(), tape.branch_signature()};
}

Evaluation evaluate_frozen(GradcheckCase& c)
{
    Tape tape;
    return evaluate_case(c, Binding::frozen, tape, nullptr);
}

// Case builder: inputs registered in order, bound by name inside the case.
class Builder {
public:
    explicit Builder(std::uint64_t seed) : rng_(make_rng(seed, kInputStream)) {}

    Rng& rng() { return rng_; }

    GradcheckCase make(std::string name, const std::vector<std::pair<std::string, Tensor>>& inputs, GradcheckFn fn)
    {
        GradcheckCase c{std::move(name), {}, std::move(fn)};
        for (const auto& [n, t] : inputs)
            c.inputs.set.add(n, t);
        return c;
    }

    Tensor uniform(Shape s, double lo = -1.0, double hi = 1.0) { return random_tensor(std::move(s), rng_, lo, hi); }

private:
    Rng rng_;
};

Var in(Tape& t, NetParams& p, Binding b, const char* name) { return bind(t, p.set.at(name), b); }

AfrParams afr_inputs(Tape& t, NetParams& p, Binding b)
{
    return AfrParams::bind(t, p.set, p.afr, b);
}

std::vector<std::pair<std::string, Tensor>> afr_param_inputs(Builder& g, std::size_t classes)
{
    const AfrParamNames n = AfrParamNames::with_prefix("afr.");
    return {{n.cala_w, g.uniform({1, classes})},
            {n.cala_b, g.uniform({1})},
            {n.uhfa_w, g.uniform({1, 1, 3, 3})},
            {n.uhfa_b, g.uniform({1})},
            {n.alpha_raw, g.uniform({1})}};
}

template <typename... Lists>
std::vector<std::pair<std::string, Tensor>> concat(Lists&&... lists)
{
    std::vector<std::pair<std::string, Tensor>> out;
    (out.insert(out.end(), lists.begin(), lists.end()), ...);
    return out;
}

LabelMap random_labels(std::size_t b, std::size_t h, std::size_t w, std::size_t classes, Rng& rng, bool with_ignore)
{
    LabelMap labels(b, h, w);
    for (int& y : labels.data)
        y = with_ignore && uniform(rng, 0.0, 1.0) < 0.15 ? kIgnoreLabel : static_cast<int>(uniform_index(rng, classes));
    return labels;
}

}  // namespace

GradcheckReport check_gradient(GradcheckCase& c, std::uint64_t seed, const GradcheckOptions& options)
{
    GradcheckReport report;
    report.name = c.name;
    report.seed = seed;
    ParamSet& set = c.inputs.set;
    set.zero_grad();

    // Analytic pass.
    Tape tape;
    Var out;
    const Evaluation base = evaluate_case(c, Binding::trainable, tape, &out);
    Rng wrng = make_rng(seed, kWeightStream);
    const Tensor weights = random_tensor(base.output.shape(), wrng);
    tape.backward(weighted_sum(out, weights));

    std::vector<std::pair<std::size_t, std::size_t>> coords;
    for (std::size_t k = 0; k < set.size(); ++k)
        for (std::size_t i = 0; i < set.params()[k].value.size(); ++i)
            coords.emplace_back(k, i);
    Rng srng = make_rng(seed, kSampleStream);
    std::shuffle(coords.begin(), coords.end(), srng);

    for (const auto& [k, i] : coords) {
        if (report.checked == options.coordinates)
            break;
        Param& p = set.params()[k];
        const double saved = p.value[i];
        p.value[i] = saved + options.step;
        const Evaluation plus = evaluate_frozen(c);
        p.value[i] = saved - options.step;
        const Evaluation minus = evaluate_frozen(c);
        p.value[i] = saved;
        if (plus.signature != base.signature || minus.signature != base.signature) {
            ++report.skipped;
            continue;
        }
        double numeric = 0.0;
        for (std::size_t j = 0; j < weights.size(); ++j)
            numeric += weights[j] * (plus.output[j] - minus.output[j]);
        numeric /= 2.0 * options.step;
        const double analytic = p.grad.empty() ? 0.0 : p.grad[i];
        const double denom = std::max({std::fabs(analytic), std::fabs(numeric), options.floor});
        const double rel = std::fabs(analytic - numeric) / denom;
        if (rel >= report.max_rel_error) {
            report.max_rel_error = rel;
            report.worst = p.name + "[" + std::to_string(i) + "]";
            report.worst_analytic = analytic;
            report.worst_numeric = numeric;
        }
        ++report.checked;
    }
    report.passed = report.checked >= options.coordinates && report.max_rel_error < options.tolerance;
    return report;
}

std::vector<GradcheckCase> standard_cases(std::uint64_t seed)
{
    Builder g(seed);
    std::vector<GradcheckCase> cases;
    const GaussianKernel k3(1.0, 3);
    const GaussianKernel k5(1.3, 5);

    const auto binary = [&](const char* name, ElementwiseOp op, Shape b_shape) {
        cases.push_back(g.make(name, {{"a", g.uniform({2, 3, 4, 5})}, {"b", g.uniform(std::move(b_shape))}},
                               [op](Tape& t, NetParams& p, Binding b) {
                                   return elementwise(op, in(t, p, b, "a"), in(t, p, b, "b"));
                               }));
    };
    binary("add", ElementwiseOp::add, {2, 3, 4, 5});
    binary("sub_broadcast", ElementwiseOp::sub, {2, 1, 4, 5});
    binary("mul", ElementwiseOp::mul, {2, 3, 4, 5});
    binary("mul_broadcast", ElementwiseOp::mul, {2, 1, 4, 5});

    const auto unary = [&](const char* name, auto op, double lo, double hi) {
        cases.push_back(g.make(name, {{"x", g.uniform({2, 3, 4, 5}, lo, hi)}},
                               [op](Tape& t, NetParams& p, Binding b) { return op(in(t, p, b, "x")); }));
    };
    unary("scale", [](Var x) { return scale(x, -1.7); }, -1.0, 1.0);
    unary("sigmoid", [](Var x) { return sigmoid(x); }, -4.0, 4.0);
    unary("relu", [](Var x) { return relu(x); }, -1.0, 1.0);
    unary("exp", [](Var x) { return exp(x); }, -2.0, 2.0);
    unary("neg", [](Var x) { return neg(x); }, -1.0, 1.0);
    unary("softmax_channels", [](Var x) { return softmax_channels(x); }, -3.0, 3.0);
    unary("channel_mean", [](Var x) { return channel_mean(x); }, -1.0, 1.0);
    unary("sum", [](Var x) { return sum(x); }, -1.0, 1.0);
    const Tensor fixed = g.uniform({2, 3, 4, 5});
    unary("weighted_sum", [fixed](Var x) { return weighted_sum(x, fixed); }, -1.0, 1.0);
    unary("resize_up", [](Var x) { return resize_bilinear(x, 7, 9); }, -1.0, 1.0);
    unary("resize_down", [](Var x) { return resize_bilinear(x, 3, 2); }, -1.0, 1.0);
    unary("smooth_k3", [k3](Var x) { return smooth(x, k3); }, -1.0, 1.0);
    unary("smooth_k5", [k5](Var x) { return smooth(x, k5); }, -1.0, 1.0);
    unary("high_freq", [k3](Var x) { return high_freq(x, k3); }, -1.0, 1.0);
    unary("uncertainty", [](Var x) { return uncertainty_from_logits(x); }, -3.0, 3.0);

    cases.push_back(g.make("conv1x1", {{"x", g.uniform({2, 3, 4, 5})}, {"w", g.uniform({4, 3})}, {"b", g.uniform({4})}},
                           [](Tape& t, NetParams& p, Binding b) {
                               return conv1x1(in(t, p, b, "x"), in(t, p, b, "w"), in(t, p, b, "b"));
                           }));
    cases.push_back(g.make("conv2d_3x3",
                           {{"x", g.uniform({2, 3, 5, 6})}, {"w", g.uniform({4, 3, 3, 3})}, {"b", g.uniform({4})}},
                           [](Tape& t, NetParams& p, Binding b) {
                               return conv2d_3x3(in(t, p, b, "x"), in(t, p, b, "w"), in(t, p, b, "b"));
                           }));
    cases.push_back(g.make("conv3x3_attention",
                           {{"x", g.uniform({2, 1, 7, 7})}, {"w", g.uniform({1, 1, 3, 3})}, {"b", g.uniform({1})}},
                           [](Tape& t, NetParams& p, Binding b) {
                               return conv3x3(in(t, p, b, "x"), in(t, p, b, "w"), in(t, p, b, "b"));
                           }));

    {
        const LabelMap labels = random_labels(2, 4, 5, 4, g.rng(), true);
        const Tensor w = g.uniform({2, 1, 4, 5}, 0.0, 1.0);
        cases.push_back(g.make("cross_entropy", {{"z", g.uniform({2, 4, 4, 5}, -3.0, 3.0)}},
                               [labels, w](Tape& t, NetParams& p, Binding b) {
                                   return cross_entropy(in(t, p, b, "z"), labels, &w);
                               }));
    }

    const auto with_afr = [](GradcheckCase c) {
        c.inputs.afr = AfrParamNames::with_prefix("afr.");
        return c;
    };
    cases.push_back(with_afr(g.make(
        "cala",
        concat(afr_param_inputs(g, 4),
               std::vector<std::pair<std::string, Tensor>>{{"logits", g.uniform({2, 4, 5, 6}, -2.0, 2.0)},
                                                           {"u", g.uniform({2, 1, 5, 6}, 0.0, 0.75)}}),
        [k3](Tape& t, NetParams& p, Binding b) {
            return cala(in(t, p, b, "logits"), in(t, p, b, "u"), afr_inputs(t, p, b), k3);
        })));
    cases.push_back(with_afr(g.make(
        "uhfa",
        concat(afr_param_inputs(g, 4),
               std::vector<std::pair<std::string, Tensor>>{{"f", g.uniform({2, 3, 6, 7})},
                                                           {"u", g.uniform({2, 1, 6, 7}, 0.0, 0.75)}}),
        [k3](Tape& t, NetParams& p, Binding b) {
            return uhfa(in(t, p, b, "f"), in(t, p, b, "u"), afr_inputs(t, p, b), k3);
        })));
    cases.push_back(g.make("fuse",
                           {{"a1", g.uniform({2, 1, 8, 8}, 0.0, 1.0)},
                            {"a2", g.uniform({2, 1, 8, 8}, 0.0, 1.0)},
                            {"alpha_raw", g.uniform({1}, -2.0, 2.0)}},
                           [](Tape& t, NetParams& p, Binding b) {
                               return fuse(in(t, p, b, "a1"), in(t, p, b, "a2"), in(t, p, b, "alpha_raw"));
                           }));
    cases.push_back(g.make("refine", {{"f", g.uniform({2, 3, 5, 5})}, {"a", g.uniform({2, 1, 5, 5}, 0.0, 1.0)}},
                           [](Tape& t, NetParams& p, Binding b) { return refine(in(t, p, b, "f"), in(t, p, b, "a")); }));

    {
        const Tensor r0 = g.uniform({1, 3, 8, 8});
        const Tensor r1 = g.uniform({1, 3, 4, 4});
        cases.push_back(with_afr(g.make(
            "afr_forward_two_levels",
            concat(afr_param_inputs(g, 4),
                   std::vector<std::pair<std::string, Tensor>>{{"f0", g.uniform({1, 3, 8, 8})},
                                                               {"f1", g.uniform({1, 3, 4, 4})},
                                                               {"lr_logits", g.uniform({1, 4, 4, 4}, -2.0, 2.0)},
                                                               {"aux_logits", g.uniform({1, 4, 8, 8}, -2.0, 2.0)}}),
            [r0, r1](Tape& t, NetParams& p, Binding b) {
                const Var levels[] = {in(t, p, b, "f0"), in(t, p, b, "f1")};
                const std::vector<Var> out = afr_forward(levels, in(t, p, b, "lr_logits"), in(t, p, b, "aux_logits"),
                                                         afr_inputs(t, p, b), AfrConfig{});
                return add(weighted_sum(out[0], r0), weighted_sum(out[1], r1));
            })));
    }

    {
        NetConfig config;
        GradcheckCase c{"seg_net_afr_cross_entropy", init_net(config, seed), nullptr};
        c.inputs.set.add("image", g.uniform({2, 3, 4, 4}, 0.0, 1.0));
        const LabelMap labels = random_labels(2, 4, 4, config.num_classes, g.rng(), false);
        c.fn = [config, labels](Tape& t, NetParams& p, Binding b) {
            return cross_entropy(forward(t, in(t, p, b, "image"), p, config, b).final_logits, labels);
        };
        cases.push_back(std::move(c));
    }
    return cases;
}

std::vector<GradcheckReport> run_gradcheck_suite(const GradcheckOptions& options)
{
    std::vector<GradcheckReport> reports;
    for (std::uint64_t seed : options.seeds)
        for (GradcheckCase& c : standard_cases(seed))
            reports.push_back(check_gradient(c, seed, options));
    return reports;
}

std::string format_report(const GradcheckReport& r)
{
    char buf[160];
    std::snprintf(buf, sizeof(buf), "%-28s seed %-3llu checked %-4zu skipped %-3zu max_rel %.3e  %s", r.name.c_str(),
                  static_cast<unsigned long long>(r.seed), r.checked, r.skipped, r.max_rel_error,
                  r.passed ? "ok" : "FAIL");
    return buf;
}

}  // namespace afrda
