#include "doctest.h"
#include "support.hpp"

#include "afrda/autodiff.hpp"

#include <cmath>

using namespace afrda;
using afrda::test::random_tensor;

namespace {

Tensor t4(std::size_t b, std::size_t c, std::size_t h, std::size_t w, std::vector<double> v)
{
    return Tensor({b, c, h, w}, std::move(v));
}

}  // namespace

TEST_CASE("tensor shape and element count agree")
{
    Tensor t({2, 3, 4});
    CHECK(t.size() == 24);
    CHECK(element_count(t.shape()) == 24);
    CHECK_THROWS_AS(Tensor({2, 2}, std::vector<double>(3)), ShapeError);
    CHECK(Tensor::scalar(4.5).item() == 4.5);
    CHECK_THROWS_AS(t.item(), DomainError);
}

TEST_CASE("take and stack invert each other")
{
    Rng rng = make_rng(1);
    const Tensor batch = random_tensor({3, 2, 2, 2}, rng);
    std::vector<Tensor> items;
    for (std::size_t i = 0; i < 3; ++i)
        items.push_back(take(batch, i));
    CHECK(items[1].shape() == Shape{1, 2, 2, 2});
    CHECK(stack(items) == batch);
}

TEST_CASE("param set rejects duplicate names")
{
    ParamSet set;
    set.add("w", Tensor({2}));
    CHECK_THROWS(set.add("w", Tensor({2})));
    CHECK(set.at("w").grad.shape() == Shape{2});
    CHECK(set.find("missing") == nullptr);
}

TEST_CASE("elementwise")
{
    Tape tape;
    SUBCASE("mul by zeros")
    {
        Var r = mul(tape.constant(Tensor({2}, {1, 2})), tape.constant(Tensor({2})));
        CHECK(r.value() == Tensor({2}, {0, 0}));
    }
    SUBCASE("add zeros is identity")
    {
        Rng rng = make_rng(2);
        const Tensor x = random_tensor({1, 2, 3, 3}, rng);
        CHECK(add(tape.constant(x), tape.constant(Tensor::zeros_like(x))).value() == x);
    }
    SUBCASE("single-channel broadcast halves every channel")
    {
        std::vector<double> v(12);
        for (std::size_t i = 0; i < v.size(); ++i)
            v[i] = static_cast<double>(i) + 1.0;
        const Tensor f = t4(1, 3, 2, 2, v);
        const Var r = mul(tape.constant(f), tape.constant(Tensor({1, 1, 2, 2}, 0.5)));
        for (std::size_t i = 0; i < 12; ++i)
            CHECK(r.value()[i] == v[i] / 2.0);
    }
    SUBCASE("wider broadcasts are shape errors")
    {
        CHECK_THROWS_AS(add(tape.constant(Tensor({1, 3, 2, 2})), tape.constant(Tensor({1, 2, 2, 2}))), ShapeError);
        CHECK_THROWS_AS(add(tape.constant(Tensor({1, 3, 2, 2})), tape.constant(Tensor({1, 3, 2, 1}))), ShapeError);
    }
}

TEST_CASE("sigmoid")
{
    CHECK(sigmoid(Tensor({1}, {0.0}))[0] == 0.5);
    CHECK(sigmoid(Tensor({1}, {std::log(3.0)}))[0] == doctest::Approx(0.75).epsilon(1e-15));
    Rng rng = make_rng(3);
    const Tensor x = random_tensor({200}, rng, -40.0, 40.0);
    Tensor nx = x;
    for (double& v : nx.data())
        v = -v;
    const Tensor a = sigmoid(x);
    const Tensor b = sigmoid(nx);
    for (std::size_t i = 0; i < x.size(); ++i) {
        CHECK(a[i] + b[i] == doctest::Approx(1.0).epsilon(1e-15));
        CHECK(a[i] > 0.0);
        CHECK(a[i] < 1.0);
    }
    CHECK(sigmoid(Tensor({2}, {1e4, -1e4}))[0] < 1.0);
    CHECK(sigmoid(Tensor({2}, {1e4, -1e4}))[1] > 0.0);
}

TEST_CASE("softmax over channels")
{
    SUBCASE("equal logits split evenly")
    {
        const Tensor p = softmax_channels(t4(1, 2, 1, 1, {0.7, 0.7}));
        CHECK(p[0] == 0.5);
        CHECK(p[1] == 0.5);
    }
    SUBCASE("closed form")
    {
        const Tensor p = softmax_channels(t4(1, 2, 1, 1, {0.0, std::log(3.0)}));
        CHECK(p[0] == doctest::Approx(0.25).epsilon(1e-14));
        CHECK(p[1] == doctest::Approx(0.75).epsilon(1e-14));
    }
    SUBCASE("sums to one and is shift invariant")
    {
        Rng rng = make_rng(4);
        const Tensor x = random_tensor({2, 5, 3, 4}, rng, -10.0, 10.0);
        Tensor shifted = x;
        for (double& v : shifted.data())
            v += 3.25;
        const Tensor p = softmax_channels(x);
        const Tensor q = softmax_channels(shifted);
        const Dims4 d = dims4(x);
        for (std::size_t b = 0; b < d.batch; ++b)
            for (std::size_t y = 0; y < d.height; ++y)
                for (std::size_t w = 0; w < d.width; ++w) {
                    double s = 0.0;
                    for (std::size_t c = 0; c < d.channels; ++c) {
                        s += p.at(b, c, y, w);
                        CHECK(p.at(b, c, y, w) == doctest::Approx(q.at(b, c, y, w)).epsilon(1e-12));
                    }
                    CHECK(std::abs(s - 1.0) <= 1e-12);
                }
    }
}

TEST_CASE("conv1x1")
{
    Tape tape;
    Rng rng = make_rng(5);
    const Tensor x = random_tensor({1, 3, 2, 2}, rng);
    CHECK(conv1x1(tape.constant(x), tape.constant(Tensor({2, 3})), tape.constant(Tensor({2}))).value() ==
          Tensor({1, 2, 2, 2}));
    const Tensor one = random_tensor({1, 1, 3, 3}, rng);
    CHECK(conv1x1(tape.constant(one), tape.constant(Tensor({1, 1}, {1.0})), tape.constant(Tensor({1}))).value() == one);
    const Var r = conv1x1(tape.constant(t4(1, 2, 1, 1, {2, 3})), tape.constant(Tensor({1, 2}, {1, 1})),
                          tape.constant(Tensor({1})));
    CHECK(r.value()[0] == 5.0);
}

TEST_CASE("conv3x3")
{
    Tape tape;
    Tensor delta({1, 1, 3, 3});
    delta[4] = 1.0;
    Rng rng = make_rng(6);
    SUBCASE("delta kernel is the identity")
    {
        const Tensor x = random_tensor({2, 1, 5, 4}, rng);
        CHECK(conv3x3(tape.constant(x), tape.constant(delta), tape.constant(Tensor({1}))).value() == x);
    }
    SUBCASE("constant input scales by the kernel sum")
    {
        const Tensor w = random_tensor({1, 1, 3, 3}, rng);
        double s = 0.0;
        for (double v : w.data())
            s += v;
        const Tensor out = conv3x3(tape.constant(Tensor({1, 1, 4, 4}, 2.0)), tape.constant(w), tape.constant(Tensor({1}))).value();
        for (double v : out.data())
            CHECK(v == doctest::Approx(2.0 * s).epsilon(1e-14));
    }
    SUBCASE("ones with all-ones kernel give nine")
    {
        const Tensor out = conv3x3(tape.constant(Tensor({1, 1, 3, 3}, 1.0)), tape.constant(Tensor({1, 1, 3, 3}, 1.0)),
                                   tape.constant(Tensor({1})))
                               .value();
        for (double v : out.data())
            CHECK(v == 9.0);
    }
    SUBCASE("reflect padding at the border")
    {
        // Row [1 2 3] with a left-neighbour kernel: the reflected neighbour of column 0 is column 1.
        Tensor left({1, 1, 3, 3});
        left[3] = 1.0;
        const Tensor out =
            conv3x3(tape.constant(t4(1, 1, 1, 3, {1, 2, 3})), tape.constant(left), tape.constant(Tensor({1}))).value();
        CHECK(out == t4(1, 1, 1, 3, {2, 1, 2}));
    }
    SUBCASE("attention conv requires a single channel")
    {
        CHECK_THROWS_AS(conv3x3(tape.constant(Tensor({1, 2, 3, 3})), tape.constant(delta), tape.constant(Tensor({1}))),
                        ShapeError);
    }
}

TEST_CASE("channel mean")
{
    Tape tape;
    CHECK(channel_mean(tape.constant(t4(1, 2, 1, 1, {1, 3}))).value()[0] == 2.0);
    CHECK(channel_mean(tape.constant(t4(1, 3, 1, 1, {0, 1, 5}))).value()[0] == 2.0);
    Rng rng = make_rng(7);
    const Tensor x = random_tensor({2, 1, 3, 3}, rng);
    CHECK(channel_mean(tape.constant(x)).value() == x);
}

TEST_CASE("bilinear resize")
{
    Tape tape;
    Rng rng = make_rng(8);
    const Tensor x = random_tensor({1, 2, 3, 5}, rng);
    CHECK(resize_bilinear(tape.constant(x), 3, 5).value() == x);
    const Tensor c = resize_bilinear(tape.constant(Tensor({1, 1, 3, 3}, 0.3)), 7, 2).value();
    for (double v : c.data())
        CHECK(v == 0.3);
    const Tensor up = resize_bilinear(tape.constant(t4(1, 1, 2, 1, {0, 1})), 4, 1).value();
    CHECK(up == t4(1, 1, 4, 1, {0.0, 0.25, 0.75, 1.0}));
}

TEST_CASE("backward")
{
    ParamSet set;
    set.add("p", Tensor({3}, {1.5, -2.0, 0.25}));
    set.add("q", Tensor({3}, 1.0));
    Param& p = set.at("p");
    SUBCASE("sum gives ones")
    {
        Tape tape;
        tape.backward(sum(tape.leaf(p)));
        CHECK(p.grad == Tensor({3}, {1, 1, 1}));
    }
    SUBCASE("sum of squares gives twice the value")
    {
        Tape tape;
        const Var v = tape.leaf(p);
        tape.backward(sum(mul(v, v)));
        CHECK(p.grad == Tensor({3}, {3.0, -4.0, 0.5}));
    }
    SUBCASE("only participating params receive gradients")
    {
        Tape tape;
        tape.backward(sum(tape.leaf(p)));
        CHECK(set.at("q").grad == Tensor({3}));
    }
    SUBCASE("loss must be a single element")
    {
        Tape tape;
        CHECK_THROWS(tape.backward(tape.leaf(p)));
    }
}

TEST_CASE("operations are deterministic")
{
    Rng rng = make_rng(9);
    const Tensor x = random_tensor({2, 3, 6, 6}, rng);
    const Tensor w = random_tensor({4, 3, 3, 3}, rng);
    const auto run = [&] {
        Tape tape;
        return softmax_channels(conv2d_3x3(tape.constant(x), tape.constant(w))).value();
    };
    CHECK(run() == run());
}
