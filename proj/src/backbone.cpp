// Copyright 2026 The mvprompt Authors
// SPDX-License-Identifier: Apache-2.0

#include "mvp/backbone.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <sstream>

#include "mvp/errors.hpp"
#include "mvp/ops.hpp"

namespace mvp {

BatchNorm::BatchNorm(std::size_t channels)
    : gamma(Tensor::parameter({channels}, std::vector<double>(channels, 1.0))),
      beta(Tensor::parameter({channels}, std::vector<double>(channels, 0.0))),
      running_mean({channels}, 0.0),
      running_var({channels}, 1.0) {}

Tensor BatchNorm::operator()(const Tensor& x, bool train) {
  return ops::batch_norm2d(x, gamma, beta, running_mean, running_var, train);
}

void BatchNorm::collect(const std::string& prefix, ParamList& out) const {
  out.push_back({prefix + ".weight", gamma, ParamRole::trainable});
  out.push_back({prefix + ".bias", beta, ParamRole::trainable});
  out.push_back({prefix + ".running_mean", running_mean, ParamRole::buffer});
  out.push_back({prefix + ".running_var", running_var, ParamRole::buffer});
}

namespace {

// Convolution without bias followed by batch normalization. Names follow the
// torchvision layout so converted checkpoints map one to one.
struct ConvBn {
  std::string conv_name;
  std::string bn_name;
  Tensor weight;
  ops::Conv2dOptions opts;
  BatchNorm bn;

  ConvBn(std::string conv, std::string norm, std::size_t in, std::size_t out, std::size_t kernel,
         std::size_t stride, std::size_t pad, Rng& rng)
      : conv_name(std::move(conv)), bn_name(std::move(norm)), opts{stride, pad}, bn(out) {
    // Kaiming-uniform bound sqrt(6 / fan_in) keeps activations in range through ReLU.
    weight = fan_in_uniform({out, in, kernel, kernel}, in * kernel * kernel, rng, false);
    for (auto& v : weight.values()) v *= std::sqrt(6.0);
  }

  Tensor operator()(const Tensor& x, bool train) {
    return bn(ops::conv2d(x, weight, Tensor(), opts), train);
  }

  void collect(ParamList& out) const {
    out.push_back({conv_name, weight, ParamRole::frozen});
    bn.collect(bn_name, out);
  }
};

struct BasicBlock {
  ConvBn conv1;
  ConvBn conv2;
  std::optional<ConvBn> downsample;

  Tensor operator()(const Tensor& x, bool train) {
    Tensor y = ops::relu(conv1(x, train));
    y = conv2(y, train);
    Tensor identity = downsample ? (*downsample)(x, train) : x;
    return ops::relu(ops::add(y, identity));
  }

  void collect(ParamList& out) const {
    conv1.collect(out);
    conv2.collect(out);
    if (downsample) downsample->collect(out);
  }
};

}  // namespace

struct FrozenBackbone::Impl {
  std::string arch;
  std::size_t out_channels = 0;
  std::size_t downsample = 1;
  bool resnet = false;
  std::vector<ConvBn> stages;       // tiny-cnn: conv-bn-relu-pool blocks; resnet: the stem
  std::vector<BasicBlock> blocks;   // resnet only

  Tensor forward(const Tensor& x, bool train) {
    if (!resnet) {
      Tensor y = x;
      for (auto& s : stages) y = ops::max_pool2d(ops::relu(s(y, train)), 2, 2);
      return y;
    }
    Tensor y = ops::max_pool2d(ops::relu(stages.front()(x, train)), 3, 2, 1);
    for (auto& b : blocks) y = b(y, train);
    return y;
  }

  ParamList parameters() const {
    ParamList out;
    for (const auto& s : stages) s.collect(out);
    for (const auto& b : blocks) b.collect(out);
    return out;
  }
};

namespace {

std::unique_ptr<FrozenBackbone::Impl> build_tiny_cnn(Rng& rng) {
  auto impl = std::make_unique<FrozenBackbone::Impl>();
  impl->arch = "tiny-cnn";
  const std::vector<std::size_t> widths{3, 16, 32, 64, 128};
  for (std::size_t i = 0; i + 1 < widths.size(); ++i) {
    const std::string p = "features." + std::to_string(i);
    impl->stages.emplace_back(p + ".conv.weight", p + ".bn", widths[i], widths[i + 1], 3, 1, 1, rng);
  }
  impl->out_channels = widths.back();
  impl->downsample = 16;
  return impl;
}

std::unique_ptr<FrozenBackbone::Impl> build_resnet18(Rng& rng) {
  auto impl = std::make_unique<FrozenBackbone::Impl>();
  impl->arch = "resnet18-like";
  impl->resnet = true;
  impl->stages.emplace_back("conv1.weight", "bn1", 3, 64, 7, 2, 3, rng);
  std::size_t in = 64;
  const std::size_t widths[] = {64, 128, 256, 512};
  for (std::size_t layer = 0; layer < 4; ++layer) {
    const std::size_t out = widths[layer];
    for (std::size_t b = 0; b < 2; ++b) {
      const std::string p = "layer" + std::to_string(layer + 1) + "." + std::to_string(b);
      const std::size_t stride = (b == 0 && layer > 0) ? 2 : 1;
      BasicBlock blk{ConvBn(p + ".conv1.weight", p + ".bn1", in, out, 3, stride, 1, rng),
                     ConvBn(p + ".conv2.weight", p + ".bn2", out, out, 3, 1, 1, rng),
                     std::nullopt};
      if (stride != 1 || in != out) {
        blk.downsample.emplace(p + ".downsample.0.weight", p + ".downsample.1", in, out, 1, stride, 0, rng);
      }
      impl->blocks.push_back(std::move(blk));
      in = out;
    }
  }
  impl->out_channels = 512;
  impl->downsample = 32;
  return impl;
}

}  // namespace

FrozenBackbone::FrozenBackbone(std::unique_ptr<Impl> impl) : impl_(std::move(impl)) {}
FrozenBackbone::FrozenBackbone(FrozenBackbone&&) noexcept = default;
FrozenBackbone& FrozenBackbone::operator=(FrozenBackbone&&) noexcept = default;
FrozenBackbone::~FrozenBackbone() = default;

const std::string& FrozenBackbone::arch() const { return impl_->arch; }
std::size_t FrozenBackbone::out_channels() const { return impl_->out_channels; }
std::size_t FrozenBackbone::downsample() const { return impl_->downsample; }

BackboneFeatures FrozenBackbone::extract(const VisionPrompt& prompts, bool train_mode) {
  const Tensor& x = prompts.images;
  if (x.rank() != 4 || x.dim(1) != 3) {
    throw ValidationError("backbone: prompts must be [M,3,H,W], got " + shape_str(x.shape()));
  }
  const std::size_t f = impl_->downsample;
  if (x.dim(2) < f || x.dim(3) < f || x.dim(2) % f != 0 || x.dim(3) % f != 0) {
    throw ValidationError("backbone " + impl_->arch + ": input " + std::to_string(x.dim(2)) + "x" +
                          std::to_string(x.dim(3)) + " is not a positive multiple of " +
                          std::to_string(f));
  }
  return {impl_->forward(x, train_mode)};
}

ParamList FrozenBackbone::parameters() const { return impl_->parameters(); }

std::size_t FrozenBackbone::parameter_count() const { return count_values(parameters()); }

WeightFile FrozenBackbone::state() const {
  WeightFile wf;
  wf.metadata["arch"] = impl_->arch;
  for (const auto& p : parameters()) {
    wf.tensors.push_back({p.name, p.tensor.shape(),
                          std::vector<double>(p.tensor.values().begin(), p.tensor.values().end())});
  }
  return wf;
}

void FrozenBackbone::load_state(const WeightFile& file, const std::string& source) {
  ParamList params = parameters();
  std::map<std::string, const TensorRecord*> by_name;
  for (const auto& t : file.tensors) by_name[t.name] = &t;

  std::vector<std::string> missing, mismatched, extra;
  for (const auto& p : params) {
    auto it = by_name.find(p.name);
    if (it == by_name.end()) {
      missing.push_back(p.name);
    } else {
      if (it->second->shape != p.tensor.shape()) {
        mismatched.push_back(p.name + " (expected " + shape_str(p.tensor.shape()) + ", found " +
                             shape_str(it->second->shape) + ")");
      }
      by_name.erase(it);
    }
  }
  for (const auto& [name, rec] : by_name) extra.push_back(name);

  if (!missing.empty() || !mismatched.empty() || !extra.empty()) {
    std::ostringstream msg;
    msg << source << " does not match the " << impl_->arch << " manifest";
    auto list = [&msg](const char* label, const std::vector<std::string>& names) {
      if (names.empty()) return;
      msg << "; " << label << ":";
      for (const auto& n : names) msg << ' ' << n;
    };
    list("missing", missing);
    list("extra", extra);
    list("shape mismatch", mismatched);
    throw LoadError(msg.str());
  }
  for (auto& p : params) {
    const TensorRecord* rec = file.find(p.name);
    std::copy(rec->values.begin(), rec->values.end(), p.tensor.values().begin());
  }
}

std::vector<std::string> available_architectures() { return {"resnet18-like", "tiny-cnn"}; }

FrozenBackbone load_backbone(std::string_view arch,
                             const std::optional<std::filesystem::path>& weights_path,
                             std::uint64_t seed) {
  Rng rng(seed);
  std::unique_ptr<FrozenBackbone::Impl> impl;
  if (arch == "tiny-cnn") {
    impl = build_tiny_cnn(rng);
  } else if (arch == "resnet18-like") {
    impl = build_resnet18(rng);
  } else {
    std::string names;
    for (const auto& a : available_architectures()) names += (names.empty() ? "" : ", ") + a;
    throw LoadError("unknown backbone architecture '" + std::string(arch) + "' (available: " + names + ")");
  }
  FrozenBackbone bb(std::move(impl));
  if (weights_path) bb.load_state(read_weight_file(*weights_path), weights_path->string());
  return bb;
}

}  // namespace mvp
