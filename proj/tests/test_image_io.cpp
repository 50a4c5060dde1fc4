#include "doctest.h"
#include "support.hpp"

#include "afrda/image_io.hpp"

#include <cmath>
#include <limits>

using namespace afrda;
using afrda::test::random_tensor;

TEST_CASE("minimal black pixel")
{
    const std::string bytes = encode_image(Tensor({3, 1, 1}), ImageKind::rgb);
    CHECK(bytes == std::string("P6\n1 1\n255\n\0\0\0", 14));
    afrda::test::TempDir dir("img_golden");
    write_image(dir / "black.ppm", Tensor({1, 3, 1, 1}), ImageKind::rgb);
    CHECK(read_file(dir / "black.ppm") == bytes);
}

TEST_CASE("rgb round trip reproduces quantized values")
{
    Rng rng = make_rng(71);
    const Tensor img = random_tensor({3, 5, 7}, rng, 0.0, 1.0);
    const PnmImage back = decode_pnm(encode_image(img, ImageKind::rgb));
    CHECK(back.channels == 3);
    CHECK(back.width == 7);
    CHECK(back.height == 5);
    for (std::size_t y = 0; y < 5; ++y)
        for (std::size_t x = 0; x < 7; ++x)
            for (std::size_t c = 0; c < 3; ++c) {
                const double v = img[(c * 5 + y) * 7 + x];
                CHECK(back.samples[(y * 7 + x) * 3 + c] == static_cast<std::uint8_t>(std::lround(v * 255.0)));
            }
}

TEST_CASE("rgb values are never clamped")
{
    CHECK_THROWS_AS(encode_image(Tensor({3, 1, 1}, 1.0001), ImageKind::rgb), DomainError);
    CHECK_THROWS_AS(encode_image(Tensor({3, 1, 1}, -1e-9), ImageKind::rgb), DomainError);
    CHECK_THROWS_AS(encode_image(Tensor({3, 1, 1}, std::numeric_limits<double>::quiet_NaN()), ImageKind::rgb),
                    DomainError);
    CHECK_THROWS_AS(encode_image(Tensor({2, 1, 1}), ImageKind::rgb), ShapeError);
    CHECK_THROWS_AS(encode_image(Tensor({2, 3, 1, 1}), ImageKind::rgb), ShapeError);
}

TEST_CASE("gray maps are min-max normalized")
{
    const PnmImage img = decode_pnm(encode_image(Tensor({1, 1, 3}, {-2.0, 0.0, 2.0}), ImageKind::gray));
    CHECK(img.channels == 1);
    CHECK(img.samples == std::vector<std::uint8_t>{0, 128, 255});

    const std::string flat = encode_image(Tensor({1, 1, 4, 4}, 0.37), ImageKind::gray);
    CHECK(flat.substr(0, 11) == "P5\n4 4\n255\n");
    const std::string payload = flat.substr(11);
    CHECK(payload.size() == 16);
    CHECK(std::all_of(payload.begin(), payload.end(), [&](char c) { return c == payload[0]; }));

    CHECK_THROWS_AS(encode_image(Tensor({2, 2, 2}), ImageKind::gray), ShapeError);
}

TEST_CASE("label palette")
{
    LabelMap labels(1, 1, 3);
    labels.data = {0, 3, kIgnoreLabel};
    const PnmImage img = decode_pnm(encode_labels(labels));
    CHECK(img.samples == std::vector<std::uint8_t>{0, 0, 0, 0, 130, 200, 255, 255, 255});
    labels.data[0] = 8;
    CHECK_THROWS_AS(encode_labels(labels), DomainError);
    CHECK_THROWS_AS(encode_labels(LabelMap(2, 1, 1)), ShapeError);
}

TEST_CASE("decoder rejects malformed input")
{
    CHECK_THROWS_AS(decode_pnm("P3\n1 1\n255\n"), DomainError);
    CHECK_THROWS_AS(decode_pnm("P6\n1 1\n65535\n"), DomainError);
    CHECK_THROWS_AS(decode_pnm(std::string("P6\n2 1\n255\n\0\0\0", 14)), DomainError);
}

TEST_CASE("atomic writes")
{
    afrda::test::TempDir dir("img_atomic");
    write_file_atomic(dir / "f.bin", "first");
    write_file_atomic(dir / "f.bin", "second");
    CHECK(read_file(dir / "f.bin") == "second");
    CHECK_FALSE(std::filesystem::exists(dir / "f.bin.tmp"));
    CHECK_THROWS_AS(write_file_atomic(dir / "missing" / "f.bin", "x"), IoError);
    CHECK_THROWS_AS(read_file(dir / "nothing"), IoError);
}
