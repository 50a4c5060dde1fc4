#include "doctest.h"
#include "support.hpp"

#include "afrda/checkpoint.hpp"
#include "afrda/cli.hpp"
#include "afrda/image_io.hpp"

#include <regex>
#include <sstream>

using namespace afrda;

namespace {

struct Result {
    int code;
    std::string out;
    std::string err;
};

Result run(std::vector<std::string> args)
{
    args.insert(args.begin(), "afrda");
    std::vector<const char*> argv;
    for (const auto& a : args)
        argv.push_back(a.c_str());
    std::ostringstream out, err;
    const int code = cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
    return {code, out.str(), err.str()};
}

const char* const kTinyConfig = R"(iterations = 2
batch_size = 1
image_height = 16
image_width = 16
hr_width = 4
lr_width = 4
eval_interval = 1
eval_images = 2
mean_images = 2
)";

}  // namespace

TEST_CASE("usage errors exit with 2")
{
    const Result none = run({});
    CHECK(none.code == 2);
    CHECK(none.err.find("Usage") != std::string::npos);

    CHECK(run({"frobnicate"}).code == 2);
    const Result missing = run({"train"});
    CHECK(missing.code == 2);
    CHECK(missing.err.find("--config") != std::string::npos);
    CHECK(run({"train", "--config", "/nonexistent/run.cfg"}).code == 2);
    CHECK(run({"gradcheck", "--bogus"}).code == 2);
    CHECK(run({"gradcheck", "--seeds", "0"}).code == 2);
}

TEST_CASE("help exits with 0")
{
    const Result top = run({"--help"});
    CHECK(top.code == 0);
    CHECK(top.out.find("dump-attention") != std::string::npos);
    const Result sub = run({"train", "--help"});
    CHECK(sub.code == 0);
    CHECK(sub.out.find("--quiet") != std::string::npos);
}

TEST_CASE("train, eval, dump-attention and gen-data")
{
    afrda::test::TempDir dir("cli");
    write_file_atomic(dir / "run.cfg", kTinyConfig);
    const std::string cfg = (dir / "run.cfg").string();
    const std::string out_dir = "output_dir=" + (dir / "run").string();

    const Result train = run({"train", "--config", cfg, "--set", out_dir});
    REQUIRE(train.code == 0);
    CHECK(train.out.find("iter 1 mIoU") != std::string::npos);
    CHECK(run({"train", "--config", cfg, "--set", out_dir, "--quiet"}).out.empty());
    const std::string ckpt = (dir / "run" / "final.ckpt").string();

    SUBCASE("eval prints an IoU table with mIoU in range")
    {
        for (const char* model : {"student", "teacher"}) {
            const Result eval = run({"eval", "--checkpoint", ckpt, "--config", cfg, "--model", model});
            REQUIRE(eval.code == 0);
            std::istringstream lines(eval.out);
            std::string header, values;
            std::getline(lines, header);
            std::getline(lines, values);
            CHECK(header.find("thin-bar") != std::string::npos);
            std::istringstream fields(values);
            std::string last, field;
            while (fields >> field)
                last = field;
            const double miou = std::stod(last);
            CHECK(miou >= 0.0);
            CHECK(miou <= 1.0);
        }
        CHECK(run({"eval", "--checkpoint", ckpt, "--config", cfg, "--model", "ghost"}).code == 2);
    }
    SUBCASE("eval on a config that does not match the checkpoint fails at runtime")
    {
        const Result r = run({"eval", "--checkpoint", ckpt, "--config", cfg, "--set", "hr_width=5"});
        CHECK(r.code == 1);
        CHECK(r.err.find("hr.conv1.w") != std::string::npos);
    }
    SUBCASE("invalid overrides are usage errors")
    {
        CHECK(run({"eval", "--checkpoint", ckpt, "--config", cfg, "--set", "lr=-1"}).code == 2);
        CHECK(run({"eval", "--checkpoint", ckpt, "--config", cfg, "--set", "nope=1"}).code == 2);
    }
    SUBCASE("corrupt checkpoint")
    {
        write_file_atomic(dir / "bad.ckpt", "AFRD");
        const Result r = run({"eval", "--checkpoint", (dir / "bad.ckpt").string(), "--config", cfg});
        CHECK(r.code == 1);
        CHECK(r.err.find("corrupt checkpoint") != std::string::npos);
    }
    SUBCASE("dump-attention")
    {
        const Result r = run({"dump-attention", "--checkpoint", ckpt, "--config", cfg, "--index", "3", "--out",
                              (dir / "maps").string()});
        REQUIRE(r.code == 0);
        CHECK(std::filesystem::exists(dir / "maps" / "a_final_minus_a1.pgm"));
        CHECK(std::count(r.out.begin(), r.out.end(), '\n') == 9);
    }
    SUBCASE("gen-data")
    {
        const Result r = run({"gen-data", "--config", cfg, "--count", "2", "--out", (dir / "data").string()});
        REQUIRE(r.code == 0);
        CHECK(read_pnm(dir / "data" / "target_0001.ppm").width == 16);
        CHECK(read_pnm(dir / "data" / "source_0000_label.ppm").channels == 3);
    }
}

TEST_CASE("gradcheck subcommand")
{
    const Result r = run({"gradcheck", "--seeds", "1"});
    CHECK(r.code == 0);
    CHECK(std::regex_search(r.out, std::regex("gradcheck: (\\d+)/\\1 cases passed")));
}
