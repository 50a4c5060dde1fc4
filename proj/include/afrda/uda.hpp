#pragma once

// Self-training domain adaptation: a student trained on labeled source images,
// ClassMix-mixed images and patch-masked target images, supervised on target
// pixels by pseudo-labels from an EMA teacher.

#include "afrda/checkpoint.hpp"
#include "afrda/config.hpp"
#include "afrda/metrics.hpp"
#include "afrda/random.hpp"
#include "afrda/seg_net.hpp"
#include "afrda/synthdata.hpp"

#include <filesystem>
#include <iosfwd>
#include <span>
#include <vector>

namespace afrda {

// Synthetic index ranges: source batch t uses [t*B, (t+1)*B), target batches
// and the held-out evaluation set are offset so the three never overlap.
inline constexpr std::uint64_t kTargetIndexOffset = 1'000'000;
inline constexpr std::uint64_t kEvalIndexOffset = 2'000'000;

/// Mean over non-ignored pixels of -w * log softmax(logits)[label]. `weight`,
/// when given, is B x 1 x H x W. Zero when every pixel is ignored.
Var cross_entropy(Var logits, const LabelMap& labels, const Tensor* weight = nullptr);

struct PseudoLabelBatch {
    LabelMap labels;
    std::vector<double> quality;  // per image: fraction of pixels with max softmax > tau
};

PseudoLabelBatch pseudo_label_from_logits(const Tensor& logits, double tau);
/// Teacher argmax and quality; nothing is recorded for differentiation.
PseudoLabelBatch pseudo_label(const Tensor& target_images, NetParams& teacher, const NetConfig& config, double tau);

struct MixResult {
    Tensor image;         // 1 x 3 x H x W
    LabelMap label;       // 1 x H x W
    Tensor weight;        // 1 x 1 x H x W: 1 on source pixels, target weight elsewhere
    std::vector<int> chosen;  // source classes pasted onto the target
};

/// Pastes the pixels of ceil(K/2) randomly chosen source classes (K = classes
/// present in `src.label`) onto the target image. Single images only.
MixResult classmix(const Sample& src, const Sample& tgt, const LabelMap& tgt_pseudo, double tgt_weight, Rng& rng);
MixResult classmix_with(const Sample& src, const Sample& tgt, const LabelMap& tgt_pseudo, double tgt_weight,
                        std::span<const int> chosen);

struct MaskPattern {
    std::size_t patch = 0;
    std::size_t rows = 0;  // grid cells vertically
    std::size_t cols = 0;
    double ratio = 0.0;
    std::vector<std::uint8_t> drop;  // rows x cols, 1 = masked

    bool masked(std::size_t y, std::size_t x) const { return drop[(y / patch) * cols + x / patch] != 0; }
    double dropped_fraction() const;
};

/// Drops round(r * cells) of the b x b cells, chosen uniformly without replacement.
MaskPattern make_mask(std::size_t height, std::size_t width, std::size_t patch, double ratio, Rng& rng);
/// Masked pixels of every image in the batch take the fill color.
Tensor apply_mask(const Tensor& images, const MaskPattern& pattern, const Rgb& fill);

/// teacher <- alpha * teacher + (1 - alpha) * student, for every parameter.
void ema_update(ParamSet& teacher, const ParamSet& student, double alpha);

/// Heavy-ball SGD: v <- momentum * v + grad; value -= lr * v.
void sgd_step(ParamSet& params, std::vector<Tensor>& velocity, double lr, double momentum);

struct TrainState {
    NetParams student;
    NetParams teacher;
    std::uint64_t iteration = 0;
    std::vector<Tensor> velocity;  // aligned with student.set.params()
    Rng rng;
};

TrainState init_state(const RunConfig& config);

/// EMA coefficient used at a given iteration.
double ema_coefficient(const RunConfig& config, std::uint64_t iteration);

struct StepLosses {
    double source = 0.0;
    double target = 0.0;
    double mask = 0.0;  // already scaled by lambda_mask
    double total = 0.0;
    double q_mean = 0.0;
};

/// One optimizer step on the student followed by the teacher EMA update.
StepLosses train_step(TrainState& state, const Sample& src, const Sample& tgt, const RunConfig& config,
                      const Rgb& mask_fill);

/// Target-domain mIoU of `params` on the held-out evaluation scenes.
IouReport evaluate(NetParams& params, const RunConfig& config);

struct EvalRecord {
    std::uint64_t iteration = 0;
    IouReport iou;
    StepLosses losses;
};

/// `iter <t> mIoU <v> loss_s <v> loss_t <v> loss_m <v> q_mean <v>`
std::string format_metrics_line(const EvalRecord& record);

struct TrainResult {
    TrainState state;
    std::vector<EvalRecord> metrics;
};

/// Runs config.iterations steps, writing metrics.log, checkpoints and attention
/// dumps under config.output_dir. Progress lines go to `progress` when given.
TrainResult train_loop(const RunConfig& config, std::ostream* progress = nullptr);

CheckpointData to_checkpoint(const TrainState& state);
/// Validates every tensor against the structure `config` implies.
TrainState from_checkpoint(const CheckpointData& data, const RunConfig& config);

void save_checkpoint(const std::filesystem::path& path, const TrainState& state);
TrainState load_checkpoint(const std::filesystem::path& path, const RunConfig& config);

/// Writes the input, labels, prediction and level-0 attention maps (A1, A2,
/// A_final, A_final - A1) of one target evaluation scene into `dir`.
std::vector<std::filesystem::path> dump_attention(NetParams& params, const RunConfig& config, std::uint64_t index,
                                                  const std::filesystem::path& dir);

}  // namespace afrda
