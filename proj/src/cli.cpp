#include "afrda/cli.hpp"

#include "afrda/gradcheck.hpp"
#include "afrda/image_io.hpp"
#include "afrda/uda.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <ostream>

namespace afrda::cli {

namespace {

constexpr int kUsageError = 2;
constexpr int kFailure = 1;

struct Options {
    std::string config;
    std::vector<std::string> overrides;
    std::string checkpoint;
    std::string out_dir;
    std::string model = "student";
    std::uint64_t index = 0;
    std::size_t count = 8;
    std::size_t seeds = 5;
    std::size_t coordinates = 100;
    bool quiet = false;
    bool verbose = false;
};

RunConfig load(const Options& o)
{
    RunConfig config = load_config(o.config);
    apply_overrides(config, o.overrides);
    return config;
}

NetParams& pick(TrainState& state, const std::string& model)
{
    return model == "teacher" ? state.teacher : state.student;
}

int cmd_train(const Options& o, std::ostream& out)
{
    const RunConfig config = load(o);
    const TrainResult result = train_loop(config, o.quiet ? nullptr : &out);
    if (!o.quiet)
        out << "wrote " << (std::filesystem::path(config.output_dir) / "final.ckpt").string() << " at iteration "
            << result.state.iteration << '\n';
    return 0;
}

int cmd_eval(const Options& o, std::ostream& out)
{
    const RunConfig config = load(o);
    TrainState state = load_checkpoint(o.checkpoint, config);
    const IouReport report = evaluate(pick(state, o.model), config);
    out << format_iou_table(report, class_names(config.net.num_classes));
    return 0;
}

int cmd_gradcheck(const Options& o, std::ostream& out)
{
    GradcheckOptions options;
    options.coordinates = o.coordinates;
    options.seeds.clear();
    for (std::uint64_t s = 0; s < o.seeds; ++s)
        options.seeds.push_back(s);
    std::size_t failed = 0;
    const auto reports = run_gradcheck_suite(options);
    for (const auto& r : reports) {
        failed += r.passed ? 0 : 1;
        if (o.verbose || !r.passed)
            out << format_report(r) << '\n';
    }
    out << "gradcheck: " << reports.size() - failed << "/" << reports.size() << " cases passed\n";
    return failed == 0 ? 0 : kFailure;
}

int cmd_dump(const Options& o, std::ostream& out)
{
    const RunConfig config = load(o);
    TrainState state = load_checkpoint(o.checkpoint, config);
    for (const auto& path : dump_attention(pick(state, o.model), config, o.index, o.out_dir))
        out << path.string() << '\n';
    return 0;
}

int cmd_gen_data(const Options& o, std::ostream& out)
{
    const RunConfig config = load(o);
    std::filesystem::create_directories(o.out_dir);
    for (std::size_t i = 0; i < o.count; ++i)
        for (const Domain domain : {Domain::source, Domain::target}) {
            const Sample s = generate(config.scene, domain, i);
            char stem[64];
            std::snprintf(stem, sizeof(stem), "%s_%04zu", domain == Domain::source ? "source" : "target", i);
            const std::filesystem::path dir = o.out_dir;
            write_image(dir / (std::string(stem) + ".ppm"), s.image, ImageKind::rgb);
            write_label_image(dir / (std::string(stem) + "_label.ppm"), s.label);
        }
    out << "wrote " << 2 * o.count << " image/label pairs to " << o.out_dir << '\n';
    return 0;
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err)
{
    CLI::App app{"Attentive feature refinement for self-training domain adaptation (desk scale)", "afrda"};
    app.require_subcommand(1);
    Options o;

    const auto add_config = [&o](CLI::App* cmd) {
        cmd->add_option("--config", o.config, "run configuration file")->required()->check(CLI::ExistingFile);
        cmd->add_option("--set", o.overrides, "override a config key (key=value), repeatable");
    };
    const auto add_model = [&o](CLI::App* cmd) {
        cmd->add_option("--checkpoint", o.checkpoint, "checkpoint file")->required()->check(CLI::ExistingFile);
        cmd->add_option("--model", o.model, "parameters to use")->check(CLI::IsMember({"student", "teacher"}));
    };

    CLI::App* train = app.add_subcommand("train", "run the self-training loop");
    add_config(train);
    train->add_flag("--quiet", o.quiet, "suppress progress output");

    CLI::App* eval = app.add_subcommand("eval", "print per-class target IoU of a checkpoint");
    add_model(eval);
    add_config(eval);

    CLI::App* grad = app.add_subcommand("gradcheck", "finite-difference check of every differentiable op");
    grad->add_option("--seeds", o.seeds, "number of seeds")->check(CLI::PositiveNumber);
    grad->add_option("--coordinates", o.coordinates, "coordinates per case and seed")->check(CLI::PositiveNumber);
    grad->add_flag("--verbose", o.verbose, "print every case");

    CLI::App* dump = app.add_subcommand("dump-attention", "write attention maps for one evaluation scene");
    add_model(dump);
    add_config(dump);
    dump->add_option("--index", o.index, "evaluation scene index");
    dump->add_option("--out", o.out_dir, "output directory")->required();

    CLI::App* gen = app.add_subcommand("gen-data", "export source/target image and label pairs");
    add_config(gen);
    gen->add_option("--count", o.count, "scenes per domain");
    gen->add_option("--out", o.out_dir, "output directory")->required();

    const auto usage = [&app] {
        const auto subs = app.get_subcommands();
        return subs.empty() ? app.help() : subs.front()->help();
    };
    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp&) {
        out << usage();
        return 0;
    } catch (const CLI::CallForAllHelp&) {
        out << app.help("", CLI::AppFormatMode::All);
        return 0;
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << "\n\n" << usage();
        return kUsageError;
    }

    try {
        if (train->parsed())
            return cmd_train(o, out);
        if (eval->parsed())
            return cmd_eval(o, out);
        if (grad->parsed())
            return cmd_gradcheck(o, out);
        if (dump->parsed())
            return cmd_dump(o, out);
        return cmd_gen_data(o, out);
    } catch (const ConfigError& e) {
        err << "error: " << e.what() << '\n';
        return kUsageError;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return kFailure;
    }
}

}  // namespace afrda::cli
