// Copyright 2026 The mvprompt Authors
// SPDX-License-Identifier: Apache-2.0

#include "mvp/classify.hpp"

#include <string>

#include "mvp/errors.hpp"
#include "mvp/ops.hpp"

namespace mvp {

std::vector<int> ClassScores::predictions() const {
  std::vector<int> out(batch());
  const std::size_t c = classes();
  for (std::size_t r = 0; r < out.size(); ++r) {
    const double* row = probabilities.data() + r * c;
    std::size_t best = 0;
    for (std::size_t k = 1; k < c; ++k) {
      if (row[k] > row[best]) best = k;
    }
    out[r] = static_cast<int>(best);
  }
  return out;
}

ClassificationHead::ClassificationHead(std::size_t views, std::size_t feature_channels,
                                       std::size_t num_classes, Rng& rng)
    : views_(views), channels_(feature_channels), num_classes_(num_classes) {
  if (num_classes < 2) throw ValidationError("classification head needs at least 2 classes");
  if (views < 1 || feature_channels < 1) throw ValidationError("classification head: empty input");
  fc_ = Linear(views * feature_channels, num_classes, rng);
}

ClassScores ClassificationHead::forward(const BackboneFeatures& features) const {
  const Tensor& f = features.data;
  if (f.rank() != 4 || f.dim(1) != channels_ || f.dim(0) % views_ != 0) {
    throw ValidationError("classification head: features " + shape_str(f.shape()) +
                          " are not groups of " + std::to_string(views_) + " views with " +
                          std::to_string(channels_) + " channels");
  }
  const std::size_t batch = f.dim(0) / views_;
  Tensor flat = ops::global_avg_pool(f).reshape({batch, views_ * channels_});
  Tensor logits = fc_(flat);
  return {logits, ops::softmax_rows(logits)};
}

void ClassificationHead::collect(const std::string& prefix, ParamList& out) const {
  fc_.collect(prefix + ".fc", out);
}

Tensor xent_loss(const ClassScores& scores, std::span<const int> labels) {
  const std::size_t b = scores.batch(), c = scores.classes();
  if (labels.size() != b) {
    throw ValidationError("xent_loss: " + std::to_string(labels.size()) + " labels for " +
                          std::to_string(b) + " rows");
  }
  std::vector<double> pick(b * c, 0.0);
  for (std::size_t r = 0; r < b; ++r) {
    if (labels[r] < 0 || static_cast<std::size_t>(labels[r]) >= c) {
      throw ValidationError("xent_loss: label " + std::to_string(labels[r]) + " outside [0, " +
                            std::to_string(c) + ")");
    }
    pick[r * c + static_cast<std::size_t>(labels[r])] = -1.0 / static_cast<double>(b);
  }
  return ops::weighted_sum(ops::log_softmax_rows(scores.logits), pick);
}

double overall_accuracy(std::span<const int> predictions, std::span<const int> labels) {
  if (predictions.empty()) throw ValidationError("overall_accuracy: no samples");
  if (predictions.size() != labels.size()) {
    throw ValidationError("overall_accuracy: length mismatch");
  }
  std::size_t hits = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) hits += predictions[i] == labels[i];
  return static_cast<double>(hits) / static_cast<double>(labels.size());
}

}  // namespace mvp
