// Copyright 2026 The mvprompt Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "mvp/data.hpp"
#include "mvp/geometry.hpp"
#include "mvp/model.hpp"
#include "mvp/prompt_fusion.hpp"

namespace mvp {

/// Everything a training or evaluation run needs. Defaults follow the full
/// protocol: AdamW at lr 5e-4 and weight decay 5e-2, cosine annealing over
/// 300 epochs, batch 16, k = 32, and 10 test-time votes.
struct TrainConfig {
  DatasetKind dataset = DatasetKind::synthetic;
  std::filesystem::path data_root;  // empty: $MVP_DATA_ROOT
  std::size_t n_points = 1024;
  SyntheticOptions synthetic;

  std::size_t shots = 16;
  std::size_t views = 4;
  FusionMode mode = FusionMode::full;
  std::string backbone = "resnet18-like";
  std::filesystem::path backbone_weights;  // empty: seeded random init

  std::size_t c1 = 64;
  std::size_t c2 = 256;
  std::size_t k_neighbors = 32;
  std::size_t grid = 224;
  std::size_t tokenizer_kernel = 7;
  std::size_t tokenizer_stride = 16;
  bool attention_residual = true;
  bool standardize_prompts = true;

  double lr = 5e-4;
  double lr_min = 0.0;
  double weight_decay = 5e-2;
  std::size_t epochs = 300;
  std::size_t batch_size = 16;
  std::uint64_t seed = 0;
  RotationSpec rotation;
  std::size_t tta_votes = 10;
  bool select_best = true;  // hold out part of the K-shot set when K >= 4
  std::filesystem::path output_dir;

  /// Throws ValidationError on non-positive sizes, bad ranges, or a
  /// mode/view combination that has no ablation row (fusion needs >= 2 views).
  void validate() const;

  ModelConfig model_config(std::size_t num_classes) const;
  /// data_root, falling back to $MVP_DATA_ROOT.
  std::filesystem::path resolved_data_root() const;
};

/// Every key the text format understands, in serialization order.
std::vector<std::string> config_keys();

/// Sets one field from its text form. Throws ValidationError on an unknown
/// key or an unparsable value.
void set_config_value(TrainConfig& cfg, const std::string& key, const std::string& value);
std::string get_config_value(const TrainConfig& cfg, const std::string& key);

/// Parses `key = value` lines. Blank lines and text after '#' are ignored.
TrainConfig parse_config(const std::string& text, TrainConfig base = {});
TrainConfig load_config(const std::filesystem::path& path, TrainConfig base = {});
/// One `key = value` line per key; parse_config(serialize_config(c)) == c.
std::string serialize_config(const TrainConfig& cfg);

}  // namespace mvp
