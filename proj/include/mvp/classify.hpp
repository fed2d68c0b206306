// Copyright 2026 The mvprompt Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <span>
#include <vector>

#include "mvp/backbone.hpp"
#include "mvp/nn.hpp"

namespace mvp {

struct ClassScores {
  Tensor logits;         // [B, classes]
  Tensor probabilities;  // softmax(logits), rows sum to 1

  std::size_t batch() const { return logits.dim(0); }
  std::size_t classes() const { return logits.dim(1); }
  /// Highest-probability class per row; ties go to the lower index.
  std::vector<int> predictions() const;
};

/// Adaptive average pool each view's map to 1x1, flatten the M views into one
/// M*C3 vector per object, then a single fully connected layer.
class ClassificationHead {
 public:
  ClassificationHead() = default;
  ClassificationHead(std::size_t views, std::size_t feature_channels, std::size_t num_classes, Rng& rng);

  std::size_t views() const { return views_; }
  std::size_t num_classes() const { return num_classes_; }

  /// `features` holds B objects of M consecutive views: [B*M, C3, H1, W1].
  ClassScores forward(const BackboneFeatures& features) const;

  Linear& fc() { return fc_; }
  const Linear& fc() const { return fc_; }
  void collect(const std::string& prefix, ParamList& out) const;

 private:
  std::size_t views_ = 0;
  std::size_t channels_ = 0;
  std::size_t num_classes_ = 0;
  Linear fc_;
};

/// Mean negative log-likelihood of the true classes, via log-sum-exp on the logits.
Tensor xent_loss(const ClassScores& scores, std::span<const int> labels);

/// Fraction of matching entries.
double overall_accuracy(std::span<const int> predictions, std::span<const int> labels);

}  // namespace mvp
