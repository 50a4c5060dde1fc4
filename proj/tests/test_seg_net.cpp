#include "doctest.h"
#include "support.hpp"

#include "afrda/seg_net.hpp"

using namespace afrda;
using afrda::test::random_tensor;

TEST_CASE("network parameters")
{
    const NetParams net = init_net(NetConfig{}, 3);
    for (const char* name : {"lr.conv1.w", "lr.conv2.w", "lr.head.w", "hr.conv1.w", "hr.conv2.w", "hr.aux_head.w",
                             "hr.head.w", "afr.alpha_raw"})
        CHECK(net.set.find(name) != nullptr);
    for (const char* head : {"lr.head.w", "hr.aux_head.w", "hr.head.w"})
        CHECK(net.set.at(head).value.dim(0) == 4);
    CHECK(net.set.at("afr.cala_w").value.dim(1) == 4);
    CHECK(init_net(NetConfig{}, 3).set.params()[0].value == net.set.params()[0].value);
    CHECK_FALSE(init_net(NetConfig{}, 4).set.params()[0].value == net.set.params()[0].value);
    CHECK_THROWS_AS(init_net(NetConfig{.num_classes = 1}, 0), DomainError);
    CHECK_THROWS_AS(init_net(NetConfig{.hr_levels = 3}, 0), DomainError);
}

TEST_CASE("forward shapes and determinism")
{
    Rng rng = make_rng(41);
    const Tensor image = random_tensor({2, 3, 8, 12}, rng, 0.0, 1.0);
    for (std::size_t levels : {1, 2}) {
        const NetConfig config{.num_classes = 3, .hr_width = 5, .lr_width = 6, .hr_levels = levels};
        NetParams net = init_net(config, 1);
        Tape tape;
        const NetOutput out = forward(tape, tape.constant(image), net, config);
        CHECK(out.final_logits.shape() == Shape{2, 3, 8, 12});
        CHECK(out.lr_logits.shape() == Shape{2, 3, 4, 6});
        CHECK(out.hr_aux_logits.shape() == Shape{2, 3, 8, 12});
        REQUIRE(out.features.size() == levels);
        if (levels == 2)
            CHECK(out.features[1].shape() == Shape{2, 5, 4, 6});
        CHECK(infer_logits(image, net, config) == out.final_logits.value());
        CHECK(infer_logits(image, net, config) == infer_logits(image, net, config));
    }
}

TEST_CASE("forward rejects indivisible sizes")
{
    NetParams net = init_net(NetConfig{}, 0);
    CHECK_THROWS_AS(infer_logits(Tensor({1, 3, 6, 8}), net, NetConfig{}), DomainError);
    CHECK_THROWS_AS(infer_logits(Tensor({1, 2, 8, 8}), net, NetConfig{}), ShapeError);
}

TEST_CASE("AFR off is the plain two-branch baseline")
{
    Rng rng = make_rng(42);
    const Tensor image = random_tensor({1, 3, 8, 8}, rng, 0.0, 1.0);
    NetConfig config;
    config.afr.enable_afr = false;
    NetParams net = init_net(config, 2);
    Tape tape;
    const NetOutput out = forward(tape, tape.constant(image), net, config);
    CHECK(out.refined[0].value() == out.features[0].value());

    // Baseline by hand: average of upsampled LR logits and the HR head on raw features.
    const Var hr = conv1x1(out.features[0], tape.constant(net.set.at("hr.head.w").value),
                           tape.constant(net.set.at("hr.head.b").value));
    const Var lr = resize_bilinear(out.lr_logits, 8, 8);
    const Tensor expected = scale(add(lr, hr), 0.5).value();
    CHECK(afrda::test::max_abs_diff(out.final_logits.value(), expected) <= 1e-12);
}

TEST_CASE("argmax over channels")
{
    SUBCASE("dominant channel")
    {
        Tensor logits({1, 3, 2, 2});
        for (std::size_t p = 0; p < 4; ++p)
            logits[2 * 4 + p] = 1.0;
        for (int v : argmax_channels(logits).data)
            CHECK(v == 2);
    }
    SUBCASE("ties go to the lowest index")
    {
        const LabelMap m = argmax_channels(Tensor({1, 3, 1, 1}, {0.2, 0.7, 0.7}));
        CHECK(m.data[0] == 1);
    }
    SUBCASE("matches a brute-force argmax")
    {
        Rng rng = make_rng(43);
        const Tensor logits = random_tensor({3, 5, 4, 6}, rng);
        const LabelMap m = argmax_channels(logits);
        CHECK(m.batch == 3);
        for (std::size_t b = 0; b < 3; ++b)
            for (std::size_t y = 0; y < 4; ++y)
                for (std::size_t x = 0; x < 6; ++x) {
                    int best = 0;
                    for (std::size_t c = 1; c < 5; ++c)
                        if (logits.at(b, c, y, x) > logits.at(b, static_cast<std::size_t>(best), y, x))
                            best = static_cast<int>(c);
                    CHECK(m.at(b, y, x) == best);
                }
    }
}

TEST_CASE("frozen binding records no gradients")
{
    Rng rng = make_rng(44);
    NetParams net = init_net(NetConfig{}, 0);
    Tape tape;
    const NetOutput out = forward(tape, tape.constant(random_tensor({1, 3, 8, 8}, rng, 0, 1)), net, NetConfig{},
                                  Binding::frozen);
    CHECK_FALSE(tape.requires_grad(out.final_logits));
}
