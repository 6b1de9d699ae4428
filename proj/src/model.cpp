/* Copyright 2026 The CLFD Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/

#include "clfd/model.hpp"

#include <cmath>
#include <fstream>

#include <Eigen/Core>

#include "clfd/binary_io.hpp"
#include "clfd/errors.hpp"

namespace clfd::model {
namespace {

template <typename T>
using RowMat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

constexpr char kCheckpointMagic[8] = {'C', 'L', 'F', 'D', 'M', 'D', 'L', '1'};

}  // namespace

BackboneConfig BackboneConfig::desk(int height, int width, int classes) {
  BackboneConfig c;
  c.arch = "desk";
  c.stem_width = 20;
  c.widths = {20, 40, 80};
  c.strides = {1, 2, 2};
  c.blocks_per_stage = 2;
  c.in_height = height;
  c.in_width = width;
  c.num_classes = classes;
  return c;
}

BackboneConfig BackboneConfig::resnet18(int height, int width, int classes) {
  BackboneConfig c;
  c.arch = "resnet18";
  c.stem_width = 64;
  c.widths = {64, 128, 256, 512};
  c.strides = {1, 2, 2, 2};
  c.blocks_per_stage = 2;
  c.in_height = height;
  c.in_width = width;
  c.num_classes = classes;
  return c;
}

BackboneConfig BackboneConfig::by_name(const std::string& arch, int height, int width,
                                       int classes) {
  if (arch == "desk") return desk(height, width, classes);
  if (arch == "resnet18") return resnet18(height, width, classes);
  throw PreconditionError("unknown backbone architecture '" + arch + "'");
}

std::uint64_t count_flops(const BackboneConfig& config, int height, int width) {
  const auto out = [](int in, int k, int s, int p) { return (in + 2 * p - k) / s + 1; };
  const auto conv = [](std::uint64_t k, std::uint64_t cin, std::uint64_t cout, std::uint64_t oh,
                       std::uint64_t ow) { return 2 * k * k * cin * cout * oh * ow; };
  std::uint64_t total = conv(3, config.in_channels, config.stem_width, height, width);
  int h = height, w = width, cin = config.stem_width;
  for (std::size_t s = 0; s < config.widths.size(); ++s) {
    for (int b = 0; b < config.blocks_per_stage; ++b) {
      const int stride = b == 0 ? config.strides[s] : 1;
      const int cout = config.widths[s];
      const int oh = out(h, 3, stride, 1);
      const int ow = out(w, 3, stride, 1);
      total += conv(3, cin, cout, oh, ow);
      total += conv(3, cout, cout, oh, ow);
      if (stride != 1 || cin != cout) total += conv(1, cin, cout, oh, ow);
      h = oh;
      w = ow;
      cin = cout;
    }
  }
  total += 2ull * static_cast<std::uint64_t>(config.feature_dim()) * config.num_classes;
  return total;
}

template <typename T>
nn::Tensor<T> pack_batch(std::span<const Volume* const> samples) {
  nn::Tensor<T> t;
  if (samples.empty()) return t;
  const Volume& first = *samples[0];
  t.resize(first.channels, static_cast<int>(samples.size()), first.height, first.width);
  const std::size_t plane = first.plane_size();
  for (std::size_t n = 0; n < samples.size(); ++n) {
    if (!samples[n]->same_shape(first)) throw ShapeError("pack_batch: samples differ in shape");
    for (int c = 0; c < first.channels; ++c) {
      auto src = samples[n]->channel(c);
      T* dst = t.row(c) + n * plane;
      for (std::size_t i = 0; i < plane; ++i) dst[i] = static_cast<T>(src[i]);
    }
  }
  return t;
}

template <typename T>
Network<T>::Network(const BackboneConfig& config)
    : config_(config),
      stem_conv_("stem.conv", config.in_channels, config.stem_width, 3, 1, 1),
      stem_bn_("stem.bn", config.stem_width),
      head_w_("head.weight", {config.num_classes, config.feature_dim()}),
      head_b_("head.bias", {config.num_classes}) {
  if (config.feature_dim() <= 0 || config.num_classes <= 0) {
    throw PreconditionError("backbone: feature_dim and num_classes must be positive");
  }
  if (config.widths.size() != config.strides.size()) {
    throw PreconditionError("backbone: widths and strides differ in length");
  }
  int cin = config.stem_width;
  for (std::size_t s = 0; s < config.widths.size(); ++s) {
    for (int b = 0; b < config.blocks_per_stage; ++b) {
      const std::string name = "stage" + std::to_string(s + 1) + ".block" + std::to_string(b);
      blocks_.push_back(std::make_unique<nn::BasicBlock<T>>(
          name, cin, config.widths[s], b == 0 ? config.strides[s] : 1));
      cin = config.widths[s];
    }
  }
  block_out_.resize(blocks_.size());
}

template <typename T>
void Network<T>::init(Rng& rng) {
  stem_conv_.init(rng);
  for (auto& b : blocks_) b->init(rng);
  const double bound = 1.0 / std::sqrt(static_cast<double>(feature_dim()));
  for (auto& v : head_w_.value) v = static_cast<T>(rng.uniform(-bound, bound));
  for (auto& v : head_b_.value) v = static_cast<T>(rng.uniform(-bound, bound));
}

template <typename T>
void Network<T>::extract(const nn::Tensor<T>& input, std::vector<T>& features, bool training) {
  if (input.c != config_.in_channels || input.h != config_.in_height ||
      input.w != config_.in_width) {
    throw ShapeError("extract: input " + std::to_string(input.c) + "x" + std::to_string(input.h) +
                     "x" + std::to_string(input.w) + " does not match configured " +
                     std::to_string(config_.in_channels) + "x" +
                     std::to_string(config_.in_height) + "x" + std::to_string(config_.in_width));
  }
  stem_conv_.forward(input, stem_c_);
  stem_bn_.forward(stem_c_, stem_out_, training);
  nn::relu_inplace(stem_out_);
  const nn::Tensor<T>* cur = &stem_out_;
  for (std::size_t i = 0; i < blocks_.size(); ++i) {
    blocks_[i]->forward(*cur, block_out_[i], training);
    cur = &block_out_[i];
  }
  // global average pool: [C][N][H][W] -> [N][C]
  const int n = cur->n, c = cur->c;
  const std::size_t hw = static_cast<std::size_t>(cur->h) * cur->w;
  features.assign(static_cast<std::size_t>(n) * c, T(0));
  for (int ch = 0; ch < c; ++ch) {
    const T* row = cur->row(ch);
    for (int s = 0; s < n; ++s) {
      double acc = 0.0;
      for (std::size_t i = 0; i < hw; ++i) acc += row[s * hw + i];
      features[static_cast<std::size_t>(s) * c + ch] = static_cast<T>(acc / static_cast<double>(hw));
    }
  }
}

template <typename T>
void Network<T>::classify(std::span<const T> features, std::span<const std::uint8_t> masks,
                          std::vector<T>& logits) {
  const int f = feature_dim();
  if (features.size() % f != 0) throw ShapeError("classify: feature length is not a multiple of N");
  const Eigen::Index n = static_cast<Eigen::Index>(features.size() / f);
  if (!masks.empty() && masks.size() != features.size()) {
    throw ShapeError("classify: mask length " + std::to_string(masks.size()) +
                     " does not match feature length " + std::to_string(features.size()));
  }
  features_.assign(features.begin(), features.end());
  masks_.assign(masks.begin(), masks.end());
  if (!masks_.empty()) {
    for (std::size_t i = 0; i < features_.size(); ++i) {
      if (!masks_[i]) features_[i] = T(0);
    }
  }
  logits.resize(static_cast<std::size_t>(n) * config_.num_classes);
  Eigen::Map<const RowMat<T>> x(features_.data(), n, f);
  Eigen::Map<const RowMat<T>> w(head_w_.value.data(), config_.num_classes, f);
  Eigen::Map<RowMat<T>> out(logits.data(), n, config_.num_classes);
  out.noalias() = x * w.transpose();
  for (Eigen::Index i = 0; i < n; ++i) {
    for (int k = 0; k < config_.num_classes; ++k) out(i, k) += head_b_.value[k];
  }
}

template <typename T>
void Network<T>::backward_head(std::span<const T> dlogits, std::vector<T>& dfeatures) {
  const int f = feature_dim();
  const Eigen::Index n = static_cast<Eigen::Index>(features_.size() / f);
  if (dlogits.size() != static_cast<std::size_t>(n) * config_.num_classes) {
    throw ShapeError("backward_head: gradient does not match last classify batch");
  }
  Eigen::Map<const RowMat<T>> g(dlogits.data(), n, config_.num_classes);
  Eigen::Map<const RowMat<T>> x(features_.data(), n, f);
  Eigen::Map<RowMat<T>> gw(head_w_.grad.data(), config_.num_classes, f);
  gw.noalias() += g.transpose() * x;
  for (Eigen::Index i = 0; i < n; ++i) {
    for (int k = 0; k < config_.num_classes; ++k) head_b_.grad[k] += g(i, k);
  }
  dfeatures.resize(features_.size());
  Eigen::Map<const RowMat<T>> w(head_w_.value.data(), config_.num_classes, f);
  Eigen::Map<RowMat<T>> gf(dfeatures.data(), n, f);
  gf.noalias() = g * w;
  if (!masks_.empty()) {
    for (std::size_t i = 0; i < dfeatures.size(); ++i) {
      if (!masks_[i]) dfeatures[i] = T(0);
    }
  }
}

template <typename T>
void Network<T>::backward_features(std::span<const T> dfeatures, nn::Tensor<T>* dinput) {
  const nn::Tensor<T>& last = blocks_.empty() ? stem_out_ : block_out_.back();
  const int n = last.n, c = last.c;
  const std::size_t hw = static_cast<std::size_t>(last.h) * last.w;
  if (dfeatures.size() != static_cast<std::size_t>(n) * c) {
    throw ShapeError("backward_features: gradient does not match last extract batch");
  }
  grad_a_.resize(c, n, last.h, last.w);
  const T inv = T(1) / static_cast<T>(hw);
  for (int ch = 0; ch < c; ++ch) {
    T* row = grad_a_.row(ch);
    for (int s = 0; s < n; ++s) {
      const T g = dfeatures[static_cast<std::size_t>(s) * c + ch] * inv;
      for (std::size_t i = 0; i < hw; ++i) row[s * hw + i] = g;
    }
  }
  for (std::size_t i = blocks_.size(); i-- > 0;) {
    blocks_[i]->backward(grad_a_, grad_b_);
    std::swap(grad_a_, grad_b_);
  }
  nn::relu_backward_inplace(stem_out_, grad_a_);
  stem_bn_.backward(grad_a_, grad_b_);
  stem_conv_.backward(grad_b_, dinput);
}

template <typename T>
std::vector<T> Network<T>::extract_one(const Volume& map) {
  const Volume* ptr = &map;
  auto input = pack_batch<T>(std::span<const Volume* const>(&ptr, 1));
  std::vector<T> features;
  extract(input, features, false);
  return features;
}

template <typename T>
std::vector<T> Network<T>::classify_one(std::span<const T> features,
                                        std::span<const std::uint8_t> mask) {
  if (features.size() != static_cast<std::size_t>(feature_dim())) {
    throw ShapeError("classify: expected " + std::to_string(feature_dim()) + " features");
  }
  if (mask.size() != features.size()) {
    throw ShapeError("classify: mask length " + std::to_string(mask.size()) +
                     " does not match feature_dim " + std::to_string(feature_dim()));
  }
  std::vector<T> logits;
  classify(features, mask, logits);
  return logits;
}

template <typename T>
std::vector<nn::Param<T>*> Network<T>::params() {
  std::vector<nn::Param<T>*> p{&stem_conv_.weight, &stem_bn_.gamma, &stem_bn_.beta};
  std::vector<nn::Buffer<T>*> unused;
  for (auto& b : blocks_) b->collect(p, unused);
  p.push_back(&head_w_);
  p.push_back(&head_b_);
  return p;
}

template <typename T>
std::vector<nn::Buffer<T>*> Network<T>::buffers() {
  std::vector<nn::Param<T>*> unused;
  std::vector<nn::Buffer<T>*> b{&stem_bn_.running_mean, &stem_bn_.running_var};
  for (auto& blk : blocks_) blk->collect(unused, b);
  return b;
}

template <typename T>
void Network<T>::zero_grad() {
  for (auto* p : params()) p->zero_grad();
}

template <typename T>
std::size_t Network<T>::param_count() {
  std::size_t n = 0;
  for (auto* p : params()) n += p->value.size();
  return n;
}

template class Network<float>;
template class Network<double>;
template nn::Tensor<float> pack_batch<float>(std::span<const Volume* const>);
template nn::Tensor<double> pack_batch<double>(std::span<const Volume* const>);

void save_checkpoint(Network<float>& net, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError("cannot open " + path + " for writing");
  io::write_bytes(out, kCheckpointMagic, sizeof(kCheckpointMagic));
  const auto& cfg = net.config();
  io::write_string(out, cfg.arch);
  io::write_u32(out, static_cast<std::uint32_t>(cfg.in_channels));
  io::write_u32(out, static_cast<std::uint32_t>(cfg.in_height));
  io::write_u32(out, static_cast<std::uint32_t>(cfg.in_width));
  io::write_u32(out, static_cast<std::uint32_t>(cfg.num_classes));
  auto params = net.params();
  auto buffers = net.buffers();
  io::write_u32(out, static_cast<std::uint32_t>(params.size() + buffers.size()));
  for (auto* p : params) {
    io::write_string(out, p->name);
    io::write_u32(out, static_cast<std::uint32_t>(p->shape.size()));
    for (int d : p->shape) io::write_u32(out, static_cast<std::uint32_t>(d));
    io::write_f32_array(out, p->value);
  }
  for (auto* b : buffers) {
    io::write_string(out, b->name);
    io::write_u32(out, 1);
    io::write_u32(out, static_cast<std::uint32_t>(b->value.size()));
    io::write_f32_array(out, b->value);
  }
  if (!out) throw FormatError("write failed: " + path);
}

void load_checkpoint(Network<float>& net, const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open " + path);
  char magic[8];
  io::read_bytes(in, magic, sizeof(magic));
  if (!std::equal(magic, magic + 8, kCheckpointMagic)) throw FormatError(path + ": bad magic");
  const auto& cfg = net.config();
  const std::string arch = io::read_string(in);
  const int c = static_cast<int>(io::read_u32(in));
  const int h = static_cast<int>(io::read_u32(in));
  const int w = static_cast<int>(io::read_u32(in));
  const int k = static_cast<int>(io::read_u32(in));
  if (arch != cfg.arch || c != cfg.in_channels || h != cfg.in_height || w != cfg.in_width ||
      k != cfg.num_classes) {
    throw FormatError(path + ": architecture manifest does not match the network");
  }
  auto params = net.params();
  auto buffers = net.buffers();
  const std::uint32_t count = io::read_u32(in);
  if (count != params.size() + buffers.size()) throw FormatError(path + ": entry count mismatch");
  for (auto* p : params) {
    if (io::read_string(in) != p->name) throw FormatError(path + ": unexpected entry order");
    const std::uint32_t rank = io::read_u32(in);
    if (rank != p->shape.size()) throw FormatError(path + ": rank mismatch for " + p->name);
    for (int d : p->shape) {
      if (io::read_u32(in) != static_cast<std::uint32_t>(d)) {
        throw FormatError(path + ": shape mismatch for " + p->name);
      }
    }
    io::read_f32_array(in, p->value);
  }
  for (auto* b : buffers) {
    if (io::read_string(in) != b->name) throw FormatError(path + ": unexpected entry order");
    if (io::read_u32(in) != 1 || io::read_u32(in) != b->value.size()) {
      throw FormatError(path + ": shape mismatch for " + b->name);
    }
    io::read_f32_array(in, b->value);
  }
}

}  // namespace clfd::model
