// Copyright 2026 The mvprompt Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <initializer_list>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "mvp/config.hpp"
#include "mvp/data.hpp"
#include "mvp/image_io.hpp"
#include "mvp/model.hpp"
#include "mvp/optim.hpp"
#include "mvp/weights.hpp"

namespace mvp {

/// Mixes integers into one seed (splitmix64 chain).
std::uint64_t derive_seed(std::initializer_list<std::uint64_t> parts);

/// Augmentation rotation for dataset object `index` in training epoch `epoch`.
Eigen::Matrix3d train_rotation(const TrainConfig& cfg, std::size_t epoch, std::size_t index);
/// Rotation of vote `vote` for dataset object `index` at test time.
Eigen::Matrix3d tta_rotation(const RotationSpec& spec, std::uint64_t seed, std::size_t index,
                             std::size_t vote);

struct EpochMetrics {
  std::size_t epoch = 0;  // zero based
  double lr = 0.0;
  double loss = 0.0;       // mean over training objects
  double train_acc = 0.0;  // on the augmented training batches
  std::optional<double> heldout_acc;
  double seconds = 0.0;
};

nlohmann::json to_json(const EpochMetrics& m);
EpochMetrics epoch_metrics_from_json(const nlohmann::json& j);

/// Trainable tensors, normalization buffers, and optimizer moments, plus the
/// metadata needed to rebuild the model. Frozen backbone weights are not
/// copied; they come back from the recorded weight file or init seed.
struct Checkpoint {
  TrainConfig config;
  std::vector<std::string> class_names;
  std::size_t epoch = 0;  // epochs completed when the state was captured
  std::vector<EpochMetrics> history;
  WeightFile state;
};

/// Writes `path` (weight file) and `path` + ".json" (metadata only).
void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

/// Copies every trainable tensor and buffer of `model` (and the optimizer
/// moments when `optimizer` is given).
WeightFile capture_state(const MvNet& model, const AdamW* optimizer = nullptr);
/// Inverse of capture_state. Throws LoadError on missing or mis-shaped tensors.
void restore_state(MvNet& model, AdamW* optimizer, const WeightFile& state);
/// Rebuilds the network a checkpoint was captured from.
MvNet build_model(const Checkpoint& ckpt);

/// Loads the configured dataset (synthetic needs no root).
Dataset load_run_dataset(const TrainConfig& cfg);

/// The K-shot draw split into objects to fit and objects held out for model
/// selection. When K >= 4 and selection is on, floor(K/4) objects per class are
/// held out; otherwise everything is fit and the last epoch is kept.
struct RunSplit {
  FewShotSplit shots;
  std::vector<std::size_t> fit;
  std::vector<std::size_t> heldout;
};
RunSplit make_run_split(const Dataset& ds, const TrainConfig& cfg);

struct StepResult {
  double loss = 0.0;
  std::size_t correct = 0;
};

/// One optimizer step on a batch: forward in train mode, cross-entropy,
/// backward, AdamW update. Throws TrainingError if the loss is not finite.
StepResult train_step(MvNet& model, AdamW& optimizer, std::span<const PointCloud> batch,
                      std::span<const int> labels);

struct TrainOptions {
  std::function<void(const EpochMetrics&)> on_epoch;
};

struct TrainResult {
  Checkpoint checkpoint;            // best (or final) state
  std::vector<double> step_losses;  // every optimizer step, in order
  std::size_t best_epoch = 0;       // zero based
  std::optional<std::filesystem::path> checkpoint_path;
};

/// Full training run. With a non-empty output_dir it writes config.cfg,
/// metrics.jsonl (one object per epoch), and checkpoint.mvpw(.json). On a
/// non-finite loss it writes nonfinite_batch.json and throws TrainingError.
TrainResult train(const TrainConfig& cfg, const TrainOptions& options = {});

/// Most frequent class; ties go to the lowest class index.
int plurality_vote(std::span<const int> votes, std::size_t num_classes);

struct EvalReport {
  double oacc = 0.0;
  std::vector<double> per_class_acc;  // NaN for classes without test objects
  std::vector<std::size_t> per_class_count;
  std::vector<std::size_t> indices;
  std::vector<int> labels;
  std::vector<int> predictions;
  std::vector<std::vector<int>> votes;  // [object][vote]
};

/// Eval-mode forward passes over `indices`, `tta_votes` rotations each, with
/// the plurality class as the prediction.
EvalReport evaluate(MvNet& model, const Dataset& ds, std::span<const std::size_t> indices,
                    std::size_t tta_votes, const RotationSpec& spec, std::uint64_t seed,
                    std::size_t batch_size = 16);
/// Rebuilds the model and dataset from the checkpoint and scores the test split.
EvalReport evaluate(const Checkpoint& ckpt, std::size_t tta_votes);

nlohmann::json to_json(const EvalReport& report, std::span<const std::string> class_names);

struct AblationRow {
  FusionMode mode = FusionMode::full;
  std::size_t views = 1;
  bool attention_fusion = false;
  bool conv_fusion = false;
  double oacc = 0.0;  // mean over seeds
  double oacc_min = 0.0;
  double oacc_max = 0.0;
  std::vector<double> per_seed;
};

/// The seven ablation rows: baseline at 1 and 4 views, attention-only at 4,
/// and full fusion at 2, 4, 6, and 8 views.
std::vector<TrainConfig> table3_grid(const TrainConfig& base);
/// Throws ValidationError unless the configs differ only in mode and views.
void validate_grid(std::span<const TrainConfig> grid);
/// Trains and evaluates each cell once per seed (each cell's own seed when
/// `seeds` is empty). Writes ablation.jsonl under the first cell's output_dir.
std::vector<AblationRow> ablate(std::span<const TrainConfig> grid, std::span<const std::uint64_t> seeds,
                                const TrainOptions& options = {});
nlohmann::json to_json(const AblationRow& row);
std::string format_ablation_table(std::span<const AblationRow> rows);

/// One view of a prompt stack [M, 3, H, W] as an image. Each channel is
/// min-max scaled to 0..255 with rounding; a constant channel becomes 128.
RgbImage prompt_image(const Tensor& prompts, std::size_t view);
/// Orthographic x-y scatter of the cloud, dark points on white.
RgbImage render_points(const PointCloud& cloud, std::size_t size = 256);
/// Writes view_<i>.png per view plus points.png; returns the paths written.
std::vector<std::filesystem::path> visualize_prompts(const Checkpoint& ckpt, const PointCloud& cloud,
                                                     const std::filesystem::path& out_dir);

}  // namespace mvp
