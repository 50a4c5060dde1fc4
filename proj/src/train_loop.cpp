#include "afrda/image_io.hpp"
#include "afrda/uda.hpp"

#include <cstdio>
#include <fstream>
#include <ostream>

namespace afrda {

namespace {

constexpr std::size_t kEvalBatch = 8;

const char* const kGroups[] = {"student/", "teacher/", "momentum/"};

std::string format6(double v)
{
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.6g", v);
    return buf;
}

void append_line(const std::filesystem::path& path, const std::string& line)
{
    std::ofstream out(path, std::ios::app);
    if (!out || !(out << line << '\n'))
        throw IoError("cannot append to " + path.string());
}

std::string iteration_tag(std::uint64_t t)
{
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%06llu", static_cast<unsigned long long>(t));
    return buf;
}

}  // namespace

IouReport evaluate(NetParams& params, const RunConfig& config)
{
    ConfusionMatrix cm(config.net.num_classes);
    for (std::size_t first = 0; first < config.eval_images; first += kEvalBatch) {
        const std::size_t count = std::min(kEvalBatch, config.eval_images - first);
        const Sample batch = generate_batch(config.scene, Domain::target, kEvalIndexOffset + first, count);
        cm.accumulate(predict(batch.image, params, config.net), batch.label);
    }
    return iou(cm);
}

std::string format_metrics_line(const EvalRecord& r)
{
    return "iter " + std::to_string(r.iteration) + " mIoU " + format6(r.iou.miou) + " loss_s " +
           format6(r.losses.source) + " loss_t " + format6(r.losses.target) + " loss_m " + format6(r.losses.mask) +
           " q_mean " + format6(r.losses.q_mean);
}

TrainResult train_loop(const RunConfig& config, std::ostream* progress)
{
    config.validate();
    const std::filesystem::path dir = config.output_dir;
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec)
        throw IoError("cannot create " + dir.string() + ": " + ec.message());
    const std::filesystem::path log_path = dir / "metrics.log";
    if (!std::ofstream(log_path, std::ios::trunc))
        throw IoError("cannot create " + log_path.string());

    TrainResult result{init_state(config), {}};
    TrainState& state = result.state;
    const Rgb fill = dataset_mean(config.scene, Domain::target, config.mean_images);
    const std::size_t batch = config.batch_size;

    while (state.iteration < config.iterations) {
        const std::uint64_t t = state.iteration;
        const Sample src = generate_batch(config.scene, Domain::source, t * batch, batch);
        const Sample tgt = generate_batch(config.scene, Domain::target, kTargetIndexOffset + t * batch, batch);
        const StepLosses losses = train_step(state, src, tgt, config, fill);
        const std::uint64_t done = state.iteration;

        const bool last = done == config.iterations;
        if (config.eval_interval > 0 && (done % config.eval_interval == 0 || last)) {
            EvalRecord record{done, evaluate(state.student, config), losses};
            const std::string line = format_metrics_line(record);
            append_line(log_path, line);
            if (progress)
                *progress << line << '\n' << std::flush;
            result.metrics.push_back(std::move(record));
        }
        if (config.checkpoint_interval > 0 && done % config.checkpoint_interval == 0 && !last)
            save_checkpoint(dir / ("iter_" + iteration_tag(done) + ".ckpt"), state);
        if (config.dump_interval > 0 && done % config.dump_interval == 0)
            dump_attention(state.student, config, 0, dir / "attention" / ("iter_" + iteration_tag(done)));
    }
    save_checkpoint(dir / "final.ckpt", state);
    return result;
}

CheckpointData to_checkpoint(const TrainState& state)
{
    CheckpointData data;
    const auto& student = state.student.set.params();
    const auto& teacher = state.teacher.set.params();
    for (const Param& p : student)
        data.tensors.push_back({kGroups[0] + p.name, p.value});
    for (const Param& p : teacher)
        data.tensors.push_back({kGroups[1] + p.name, p.value});
    for (std::size_t k = 0; k < student.size(); ++k)
        data.tensors.push_back({kGroups[2] + student[k].name, state.velocity[k]});
    data.iteration = state.iteration;
    data.rng_state = serialize_rng(state.rng);
    return data;
}

TrainState from_checkpoint(const CheckpointData& data, const RunConfig& config)
{
    TrainState state = init_state(config);
    auto& student = state.student.set.params();
    if (data.tensors.size() != 3 * student.size())
        throw CorruptCheckpoint("count", "expected " + std::to_string(3 * student.size()) + " tensors, found " +
                                             std::to_string(data.tensors.size()));
    for (std::size_t g = 0; g < 3; ++g)
        for (std::size_t k = 0; k < student.size(); ++k) {
            const NamedTensor& stored = data.tensors[g * student.size() + k];
            const std::string expected = kGroups[g] + student[k].name;
            if (stored.name != expected)
                throw CorruptCheckpoint(stored.name, "expected tensor " + expected);
            if (stored.value.shape() != student[k].value.shape())
                throw CorruptCheckpoint(stored.name, "shape " + to_string(stored.value.shape()) + " but the config implies " +
                                                         to_string(student[k].value.shape()));
            Tensor& slot = g == 0 ? student[k].value : g == 1 ? state.teacher.set.params()[k].value : state.velocity[k];
            slot = stored.value;
        }
    state.iteration = data.iteration;
    try {
        state.rng = deserialize_rng(data.rng_state);
    } catch (const DomainError& e) {
        throw CorruptCheckpoint("rng state", e.what());
    }
    return state;
}

void save_checkpoint(const std::filesystem::path& path, const TrainState& state)
{
    write_checkpoint(path, to_checkpoint(state));
}

TrainState load_checkpoint(const std::filesystem::path& path, const RunConfig& config)
{
    return from_checkpoint(read_checkpoint(path), config);
}

std::vector<std::filesystem::path> dump_attention(NetParams& params, const RunConfig& config, std::uint64_t index,
                                                  const std::filesystem::path& dir)
{
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec)
        throw IoError("cannot create " + dir.string() + ": " + ec.message());

    const Sample sample = generate(config.scene, Domain::target, kEvalIndexOffset + index);
    Tape tape;
    const NetOutput out = forward(tape, tape.constant(sample.image), params, config.net, Binding::frozen);

    std::vector<std::filesystem::path> written;
    const auto emit = [&](const std::string& name, auto&& write) {
        written.push_back(dir / name);
        write(written.back());
    };
    emit("image.ppm", [&](const auto& p) { write_image(p, sample.image, ImageKind::rgb); });
    emit("label.ppm", [&](const auto& p) { write_label_image(p, sample.label); });
    emit("prediction.ppm", [&](const auto& p) { write_label_image(p, argmax_channels(out.final_logits.value())); });

    if (!out.afr.levels.empty()) {
        const AfrLevelTrace& level = out.afr.levels.front();
        const auto gray = [&](const std::string& name, const Tensor& t) {
            emit(name, [&](const auto& p) { write_image(p, t, ImageKind::gray); });
        };
        if (out.afr.u_hr.valid())
            gray("uncertainty_hr.pgm", out.afr.u_hr.value());
        if (out.afr.u_lr.valid())
            gray("uncertainty_lr.pgm", out.afr.u_lr.value());
        if (level.a1.valid())
            gray("a1.pgm", level.a1.value());
        if (level.a2.valid())
            gray("a2.pgm", level.a2.value());
        gray("a_final.pgm", level.a_final.value());
        if (level.a1.valid()) {
            Tensor diff = level.a_final.value();
            for (std::size_t i = 0; i < diff.size(); ++i)
                diff[i] -= level.a1.value()[i];
            gray("a_final_minus_a1.pgm", diff);
        }
    }
    return written;
}

}  // namespace afrda
