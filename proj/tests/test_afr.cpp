#include "doctest.h"
#include "support.hpp"

#include "afrda/afr.hpp"
#include "afrda/uncertainty.hpp"

#include <cmath>

using namespace afrda;
using afrda::test::random_tensor;

namespace {

struct Fixture {
    ParamSet set;
    AfrParamNames names;
    Tape tape;

    explicit Fixture(std::size_t classes, std::uint64_t seed = 0)
    {
        Rng rng = make_rng(seed);
        names = add_afr_params(set, classes, rng);
    }

    void zero()
    {
        for (Param& p : set.params())
            p.value = Tensor::zeros_like(p.value);
    }

    AfrParams bound() { return AfrParams::bind(tape, set, names, Binding::frozen); }
    Var c(Tensor t) { return tape.constant(std::move(t)); }
};

double sig(double x) { return 1.0 / (1.0 + std::exp(-x)); }

}  // namespace

TEST_CASE("AFR parameters")
{
    Fixture f(4);
    CHECK(f.set.at(f.names.cala_w).value.shape() == Shape{1, 4});
    CHECK(f.set.at(f.names.uhfa_w).value.shape() == Shape{1, 1, 3, 3});
    CHECK(f.set.at(f.names.alpha_raw).value[0] == 0.0);
    CHECK(f.set.at(f.names.cala_b).value[0] == 0.0);
    CHECK(f.set.at(f.names.uhfa_b).value[0] == 0.0);
    for (double w : f.set.at(f.names.cala_w).value.data())
        CHECK(std::abs(w) <= 0.5);
    for (double w : f.set.at(f.names.uhfa_w).value.data())
        CHECK(std::abs(w) <= 1.0 / 3.0);
}

TEST_CASE("CALA")
{
    const GaussianKernel kernel(1.0, 3);
    SUBCASE("zero parameters, constant logits, zero uncertainty")
    {
        Fixture f(3);
        f.zero();
        const Var a1 = cala(f.c(Tensor({1, 3, 4, 4}, 0.7)), f.c(Tensor({1, 1, 4, 4})), f.bound(), kernel);
        for (double v : a1.value().data())
            CHECK(v == doctest::Approx(sig(0.25)).epsilon(1e-15));
        CHECK(sig(0.25) == doctest::Approx(0.5622).epsilon(1e-4));
    }
    SUBCASE("constant logits make the residual term vanish")
    {
        Fixture f(3, 5);
        CalaTrace trace;
        cala(f.c(Tensor({2, 3, 4, 4}, -1.2)), f.c(Tensor({2, 1, 4, 4}, 0.3)), f.bound(), kernel, {}, &trace);
        for (double v : trace.residual.value().data())
            CHECK(std::abs(v) <= 1e-12);
    }
    SUBCASE("uncertainty raises the pre-activation where logit attention is positive")
    {
        Fixture f(2, 6);
        Rng rng = make_rng(7);
        const Tensor logits = random_tensor({1, 2, 3, 3}, rng);
        Tensor u = random_tensor({1, 1, 3, 3}, rng, 0.0, 0.5);
        const Tensor base = cala(f.c(logits), f.c(u), f.bound(), kernel).value();
        u[4] += 0.3;
        const Tensor raised = cala(f.c(logits), f.c(u), f.bound(), kernel).value();
        CHECK(raised[4] > base[4]);
        for (std::size_t i = 0; i < 9; ++i)
            if (i != 4)
                CHECK(raised[i] == base[i]);
    }
    SUBCASE("spatial mismatch")
    {
        Fixture f(2);
        CHECK_THROWS_AS(cala(f.c(Tensor({1, 2, 4, 4})), f.c(Tensor({1, 1, 2, 2})), f.bound(), kernel), ShapeError);
    }
}

TEST_CASE("UHFA")
{
    const GaussianKernel kernel(1.0, 3);
    SUBCASE("constant features through a delta kernel")
    {
        Fixture f(2);
        f.zero();
        f.set.at(f.names.uhfa_w).value[4] = 1.0;
        for (double g : {0.0, 0.8, -1.5}) {
            const Var a2 = uhfa(f.c(Tensor({1, 5, 4, 4}, g)), f.c(Tensor({1, 1, 4, 4})), f.bound(), kernel);
            for (double v : a2.value().data())
                CHECK(v == doctest::Approx(sig(g)).epsilon(1e-15));
        }
    }
    SUBCASE("large uncertainty suppresses toward one half")
    {
        Fixture f(2, 3);
        Rng rng = make_rng(8);
        const Var a2 = uhfa(f.c(random_tensor({1, 4, 5, 5}, rng, -2.0, 2.0)), f.c(Tensor({1, 1, 5, 5}, 60.0)),
                            f.bound(), kernel);
        for (double v : a2.value().data())
            CHECK(v == doctest::Approx(0.5).epsilon(1e-12));
    }
    SUBCASE("zero weights give one half")
    {
        Fixture f(2);
        f.zero();
        Rng rng = make_rng(9);
        const Var a2 = uhfa(f.c(random_tensor({2, 3, 4, 4}, rng)), f.c(random_tensor({2, 1, 4, 4}, rng, 0.0, 0.5)),
                            f.bound(), kernel);
        for (double v : a2.value().data())
            CHECK(v == 0.5);
    }
}

TEST_CASE("fuse")
{
    Tape tape;
    const Var a1 = tape.constant(Tensor({1, 1, 1, 2}, {0.2, 0.9}));
    const Var a2 = tape.constant(Tensor({1, 1, 1, 2}, {0.6, 0.1}));
    const Tensor plus = fuse(a1, a2, tape.constant(Tensor({1}, {50.0}))).value();
    const Tensor minus = fuse(a1, a2, tape.constant(Tensor({1}, {-50.0}))).value();
    for (std::size_t i = 0; i < 2; ++i) {
        CHECK(plus[i] == doctest::Approx(a1.value()[i]).epsilon(1e-12));
        CHECK(minus[i] == doctest::Approx(a2.value()[i]).epsilon(1e-12));
    }
    CHECK(fuse(a1, a2, tape.constant(Tensor({1}))).value()[0] == doctest::Approx(0.4).epsilon(1e-15));
}

TEST_CASE("refine")
{
    Tape tape;
    Rng rng = make_rng(10);
    const Tensor f = random_tensor({1, 3, 2, 2}, rng);
    const Var fv = tape.constant(f);
    CHECK(refine(fv, tape.constant(Tensor({1, 1, 2, 2}))).value() == f);
    const Tensor doubled = refine(fv, tape.constant(Tensor({1, 1, 2, 2}, 1.0))).value();
    for (std::size_t i = 0; i < f.size(); ++i)
        CHECK(doubled[i] == 2.0 * f[i]);
    const Tensor zero = refine(tape.constant(Tensor({1, 3, 2, 2})), tape.constant(random_tensor({1, 1, 2, 2}, rng, 0, 1))).value();
    for (double v : zero.data())
        CHECK(v == 0.0);
}

TEST_CASE("afr_forward")
{
    Rng rng = make_rng(11);
    const Tensor feat = random_tensor({1, 4, 8, 8}, rng);
    const Tensor lr = random_tensor({1, 3, 4, 4}, rng, -2.0, 2.0);
    const Tensor aux = random_tensor({1, 3, 8, 8}, rng, -2.0, 2.0);

    SUBCASE("disabled paths return the input features")
    {
        for (AfrConfig config : {AfrConfig{.enable_afr = false}, AfrConfig{.enable_cala = false, .enable_uhfa = false}}) {
            Fixture f(3, 1);
            const Var level = f.c(feat);
            const std::vector<Var> out = afr_forward(std::span(&level, 1), f.c(lr), f.c(aux), f.bound(), config);
            REQUIRE(out.size() == 1);
            CHECK(out[0].value() == feat);
        }
    }
    SUBCASE("constant single level with zero parameters")
    {
        Fixture f(3);
        f.zero();
        const Var level = f.c(Tensor({1, 4, 8, 8}, 0.6));
        AfrTrace trace;
        const std::vector<Var> out = afr_forward(std::span(&level, 1), f.c(Tensor({1, 3, 4, 4}, 0.2)),
                                                 f.c(Tensor({1, 3, 8, 8}, -0.4)), f.bound(), {}, &trace);
        // Uniform logits: U_HR = U_LR = 2/3. A1 = sig(0.5 * sig(2/3)); A2 = sig(0) = 0.5.
        const double a1 = sig(0.5 * sig(2.0 / 3.0));
        const double a = 0.5 * a1 + 0.5 * 0.5;
        for (double v : trace.levels[0].a1.value().data())
            CHECK(v == doctest::Approx(a1).epsilon(1e-14));
        for (double v : out[0].value().data())
            CHECK(v == doctest::Approx(0.6 * (1.0 + a)).epsilon(1e-14));
    }
    SUBCASE("high-frequency switches do not matter on constant inputs")
    {
        Fixture f(3, 4);
        const Var level = f.c(Tensor({1, 4, 8, 8}, -0.3));
        const Var lrc = f.c(Tensor({1, 3, 4, 4}, 0.9));
        const Var auxc = f.c(Tensor({1, 3, 8, 8}, 0.1));
        const AfrParams p = f.bound();
        const Tensor on = afr_forward(std::span(&level, 1), lrc, auxc, p, {})[0].value();
        const Tensor off = afr_forward(std::span(&level, 1), lrc, auxc, p,
                                       {.enable_hf_cala = false, .enable_hf_uhfa = false})[0].value();
        CHECK(on == off);
    }
    SUBCASE("two levels refine each at its own resolution")
    {
        Fixture f(3, 2);
        const std::vector<Var> levels{f.c(feat), f.c(random_tensor({1, 4, 4, 4}, rng))};
        AfrTrace trace;
        const std::vector<Var> out = afr_forward(levels, f.c(lr), f.c(aux), f.bound(), {}, &trace);
        REQUIRE(out.size() == 2);
        CHECK(out[1].shape() == Shape{1, 4, 4, 4});
        CHECK(trace.levels[1].a_final.shape() == Shape{1, 1, 4, 4});
    }
    SUBCASE("levels must not grow")
    {
        Fixture f(3);
        const std::vector<Var> levels{f.c(Tensor({1, 4, 4, 4})), f.c(feat)};
        CHECK_THROWS_AS(afr_forward(levels, f.c(lr), f.c(aux), f.bound(), {}), ShapeError);
    }
}

TEST_CASE("attention algebra on random inputs")
{
    Rng rng = make_rng(12);
    for (int trial = 0; trial < 100; ++trial) {
        Fixture f(3, static_cast<std::uint64_t>(trial));
        f.set.at(f.names.alpha_raw).value[0] = uniform(rng, -4.0, 4.0);
        const Var level = f.c(random_tensor({1, 4, 8, 8}, rng, -3.0, 3.0));
        AfrTrace trace;
        const std::vector<Var> out = afr_forward(std::span(&level, 1), f.c(random_tensor({1, 3, 4, 4}, rng, -4.0, 4.0)),
                                                 f.c(random_tensor({1, 3, 8, 8}, rng, -4.0, 4.0)), f.bound(), {}, &trace);
        const Tensor& a1 = trace.levels[0].a1.value();
        const Tensor& a2 = trace.levels[0].a2.value();
        const Tensor& a = trace.levels[0].a_final.value();
        for (std::size_t i = 0; i < a.size(); ++i) {
            CHECK(a1[i] > 0.0);
            CHECK(a1[i] < 1.0);
            CHECK(a2[i] > 0.0);
            CHECK(a2[i] < 1.0);
            CHECK(a[i] >= std::min(a1[i], a2[i]));
            CHECK(a[i] <= std::max(a1[i], a2[i]));
        }
        const Tensor& fv = level.value();
        const Tensor& r = out[0].value();
        for (std::size_t i = 0; i < fv.size(); ++i) {
            CHECK(std::abs(r[i]) >= std::abs(fv[i]));
            CHECK(std::abs(r[i]) <= 2.0 * std::abs(fv[i]));
            CHECK((r[i] > 0) == (fv[i] > 0));
        }
    }
}

TEST_CASE("without CALA only the uncertainty of the LR logits matters")
{
    Rng rng = make_rng(13);
    Fixture f(3, 3);
    const Var level = f.c(random_tensor({1, 4, 8, 8}, rng));
    const Tensor lr = random_tensor({1, 3, 4, 4}, rng);
    // Adding a per-pixel constant to every channel leaves the softmax, hence U_LR, unchanged.
    Tensor shifted = lr;
    for (std::size_t c = 0; c < 3; ++c)
        for (std::size_t p = 0; p < 16; ++p)
            shifted[c * 16 + p] += static_cast<double>(p) * 0.37;
    const Var aux = f.c(random_tensor({1, 3, 8, 8}, rng));
    const AfrConfig config{.enable_cala = false};
    const AfrParams p = f.bound();
    const Tensor a = afr_forward(std::span(&level, 1), f.c(lr), aux, p, config)[0].value();
    const Tensor b = afr_forward(std::span(&level, 1), f.c(shifted), aux, p, config)[0].value();
    CHECK(afrda::test::max_abs_diff(a, b) <= 1e-12);
}
