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

#include "clfd/loop.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <numeric>
#include <set>
#include <sstream>

#include "clfd/binary_io.hpp"
#include "clfd/dwt.hpp"
#include "clfd/errors.hpp"
#include "clfd/strategies.hpp"

namespace clfd::loop {
namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

namespace {

constexpr char kStateMagic[8] = {'C', 'L', 'F', 'D', 'S', 'T', 'A', '1'};
constexpr int kEvalChunk = 250;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

std::string mask_hex(std::span<const std::uint8_t> mask) {
  static const char* digits = "0123456789abcdef";
  std::string out;
  for (std::size_t i = 0; i < mask.size(); i += 4) {
    int nibble = 0;
    for (std::size_t b = 0; b < 4 && i + b < mask.size(); ++b) nibble |= (mask[i + b] ? 1 : 0) << b;
    out += digits[nibble];
  }
  return out;
}

void write_f64(std::ostream& out, double v) { io::write_bytes(out, &v, 8); }
double read_f64(std::istream& in) {
  double v;
  io::read_bytes(in, &v, 8);
  return v;
}

void write_f64_vec(std::ostream& out, const std::vector<double>& v) {
  io::write_u64(out, v.size());
  io::write_bytes(out, v.data(), v.size() * sizeof(double));
}
std::vector<double> read_f64_vec(std::istream& in) {
  std::vector<double> v(io::read_u64(in));
  io::read_bytes(in, v.data(), v.size() * sizeof(double));
  return v;
}

void write_matrix(std::ostream& out, const metrics::AccuracyMatrix& r) {
  io::write_u32(out, static_cast<std::uint32_t>(r.tasks()));
  for (int t = 1; t <= r.tasks(); ++t) {
    for (int tau = 1; tau <= t; ++tau) {
      const bool def = r.defined(t, tau);
      io::write_bytes(out, &def, 1);
      write_f64(out, def ? r.at(t, tau) : 0.0);
    }
  }
}
metrics::AccuracyMatrix read_matrix(std::istream& in) {
  metrics::AccuracyMatrix r(static_cast<int>(io::read_u32(in)));
  for (int t = 1; t <= r.tasks(); ++t) {
    for (int tau = 1; tau <= t; ++tau) {
      bool def = false;
      io::read_bytes(in, &def, 1);
      const double v = read_f64(in);
      if (def) r.set(t, tau, v);
    }
  }
  return r;
}

}  // namespace

std::string regime_name(Regime regime) {
  switch (regime) {
    case Regime::kNone: return "none";
    case Regime::kFrequency: return "frequency";
    case Regime::kSemantic: return "semantic";
  }
  return "?";
}

Regime regime_for(int t, int e, int frequency_epochs) {
  if (e <= frequency_epochs) return t > 1 ? Regime::kFrequency : Regime::kNone;
  return Regime::kSemantic;
}

bench::Dataset prepare_dataset(const config::RunConfig& config) {
  bench::Dataset data = bench::load(config.data, config.data_seed);
  bench::compute_normalization(data);
  bench::normalize(data);
  return data;
}

RngStreams::RngStreams(std::uint64_t seed)
    : init(Rng::derive(seed, 1)),
      data(Rng::derive(seed, 2)),
      augment(Rng::derive(seed, 3)),
      replay(Rng::derive(seed, 4)),
      reservoir(Rng::derive(seed, 5)),
      dropout(Rng::derive(seed, 6)) {}

Trainer::Trainer(const config::RunConfig& config, const bench::Dataset& data, std::uint64_t seed,
                 std::ostream* steplog)
    : config_(config),
      data_(data),
      stream_(bench::split_tasks(data, config.split_spec(), Rng::derive(seed, 7))),
      seed_(seed),
      steplog_(steplog),
      rng_(seed),
      buffer_(config.buffer_capacity,
              config.buffer_quantize ? replay::Precision::kFloat16 : replay::Precision::kFloat32) {
  config::validate(config_);
  if (data_.train.images.empty()) throw PreconditionError("trainer: empty training set");
  const Volume& probe = data_.train.images.front();
  in_h_ = config_.ffe_enabled ? probe.height / 2 : probe.height;
  in_w_ = config_.ffe_enabled ? probe.width / 2 : probe.width;
  net_ = std::make_unique<model::Network<float>>(
      model::BackboneConfig::by_name(config_.arch, in_h_, in_w_, data_.num_classes));
  net_->init(rng_.init);
  for (auto* p : net_->params()) momentum_.emplace_back(p->value.size(), 0.0f);
  if (config_.ffe_enabled) encoder_ = ffe::EncoderWeights::initialized(rng_.init, config_.ffe_bias);
  const int n_feat = net_->feature_dim();
  counter_ = cffs::SelectionCounter(data_.num_classes, n_feat);
  schedule_ = cffs::DropoutSchedule(data_.num_classes, n_feat, config_.lambda, config_.beta,
                                    config_.frequency_epochs());
  const std::size_t sig_dim = static_cast<std::size_t>(probe.channels) * (probe.height / 2) *
                              (probe.width / 2);
  for (int c = 0; c < data_.num_classes; ++c) signatures_.emplace_back(c, sig_dim);
  class_il_ = metrics::AccuracyMatrix(num_tasks());
  task_il_ = metrics::AccuracyMatrix(num_tasks());
}

Trainer::~Trainer() = default;

std::vector<int> Trainer::classes_before(int t) const {
  std::vector<int> out;
  for (int k = 0; k < t - 1; ++k) {
    out.insert(out.end(), stream_.tasks[k].classes.begin(), stream_.tasks[k].classes.end());
  }
  std::sort(out.begin(), out.end());
  return out;
}

std::vector<int> Trainer::classes_through(int t) const { return classes_before(t + 1); }

Volume Trainer::model_input(const Volume& image) const {
  if (!config_.ffe_enabled) return image;
  return ffe::encode(image, encoder_).values;
}

void Trainer::run_task(int t) {
  train_task(t);
  const auto cil = evaluate(t, Mode::kClassIl);
  const auto til = evaluate(t, Mode::kTaskIl);
  for (int tau = 1; tau <= t; ++tau) {
    class_il_.set(t, tau, cil[tau - 1]);
    task_il_.set(t, tau, til[tau - 1]);
  }
}

void Trainer::train_task(int t) {
  if (t != completed_ + 1 || t > num_tasks()) {
    throw PreconditionError("train_task: expected task " + std::to_string(completed_ + 1) +
                            ", got " + std::to_string(t));
  }
  const auto start = Clock::now();
  const bool dropout = config_.cffs_enabled && config_.cffs_dropout;
  const int freq_epochs = config_.frequency_epochs();
  for (int e = 1; e <= config_.epochs; ++e) {
    const Regime regime = dropout ? regime_for(t, e, freq_epochs) : Regime::kNone;
    if (steplog_) *steplog_ << "epoch task=" << t << " epoch=" << e << " regime=" << regime_name(regime) << '\n';
    train_epoch(t, e, regime);
    if (regime == Regime::kFrequency && e == 1) update_frequency_schedule(t);
    if (regime == Regime::kSemantic) update_semantic_schedule(t);
  }
  if (t == 1 && config_.ffe_enabled) {
    encoder_ = ffe::freeze(encoder_);
    // maps stored during task 1 came from a still-moving encoder
    if (config_.ffe_refresh_buffer) {
      for (std::size_t i = 0; i < buffer_.size(); ++i) {
        buffer_.replace_map(i, model_input(data_.train.images[buffer_source_[i]]));
      }
    }
    buffer_source_.clear();
    if (steplog_) *steplog_ << "freeze task=1 digest=" << io::hex64(ffe::digest(encoder_)) << '\n';
  }
  encoder_digests_.push_back(config_.ffe_enabled ? ffe::digest(encoder_) : 0);
  if (steplog_) {
    *steplog_ << "task_end task=" << t << " encoder_digest=" << io::hex64(encoder_digests_.back())
              << '\n';
  }
  task_wall_s_.push_back(seconds_since(start));
  completed_ = t;
}

void Trainer::train_epoch(int t, int e, Regime regime) {
  std::vector<std::size_t> order = stream_.tasks[t - 1].train;
  for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng_.data.below(i)]);
  const std::size_t b = static_cast<std::size_t>(config_.batch);
  for (std::size_t s = 0; s < order.size(); s += b) {
    std::vector<std::size_t> idx(order.begin() + s, order.begin() + std::min(order.size(), s + b));
    train_step(t, e, regime, idx);
  }
}

void Trainer::train_step(int t, int e, Regime regime, const std::vector<std::size_t>& idx) {
  using strategies::Kind;
  const auto start = Clock::now();
  const bool learn_encoder = config_.ffe_enabled && !encoder_.frozen;
  const int nf = static_cast<int>(idx.size());
  const Kind kind = config_.strategy.kind;

  std::vector<Volume> inputs;
  std::vector<Volume> stacks;
  std::vector<int> labels;
  for (std::size_t i : idx) {
    const Volume& image = data_.train.images[i];
    Volume view = config_.augment ? bench::augment(image, bench::Space::kPixel, rng_.augment) : image;
    if (config_.ffe_enabled) {
      Volume stack = ffe::decompose(view);
      inputs.push_back(ffe::merge(stack, encoder_));
      if (learn_encoder) stacks.push_back(std::move(stack));
    } else {
      inputs.push_back(std::move(view));
    }
    labels.push_back(data_.train.labels[i]);
  }

  // replay rows: block a (ER/ER-ACE replay, DER++ logit term), block b (DER++ label term)
  int na = 0, nb = 0;
  std::vector<float> stored;
  if (kind != Kind::kSgd && !buffer_.empty()) {
    const auto space = config_.ffe_enabled ? bench::Space::kEncoded : bench::Space::kPixel;
    const bool flip = !config_.ffe_enabled || config_.flip_encoded;
    const auto add = [&](const std::vector<const replay::BufferEntry*>& draw, bool with_logits) {
      for (const auto* entry : draw) {
        inputs.push_back(config_.augment ? bench::augment(entry->map, space, rng_.augment, flip)
                                         : entry->map);
        labels.push_back(entry->label);
        if (with_logits) {
          if (!entry->logits) throw PreconditionError("replay entry without stored logits");
          stored.insert(stored.end(), entry->logits->begin(), entry->logits->end());
        }
      }
      return static_cast<int>(draw.size());
    };
    const std::size_t k = static_cast<std::size_t>(config_.strategy.replay_batch);
    na = add(buffer_.sample_batch(k, rng_.replay), kind == Kind::kDerpp);
    if (kind == Kind::kDerpp && !config_.strategy.single_draw) {
      nb = add(buffer_.sample_batch(k, rng_.replay), false);
    }
  }
  const int n = static_cast<int>(inputs.size());

  std::vector<const Volume*> ptrs;
  for (const auto& v : inputs) ptrs.push_back(&v);
  const auto x = model::pack_batch<float>(ptrs);
  std::vector<float> feats;
  net_->extract(x, feats, true);

  const int nfeat = net_->feature_dim();
  std::vector<std::uint8_t> masks;
  if (config_.cffs_enabled) {
    masks.resize(static_cast<std::size_t>(n) * nfeat);
    for (int r = 0; r < n; ++r) {
      std::vector<std::uint8_t> keep;
      if (regime == Regime::kFrequency) keep = cffs::sample_mask(schedule_.frequency_row(labels[r]), rng_.dropout);
      if (regime == Regime::kSemantic) keep = cffs::sample_mask(schedule_.semantic_row(labels[r]), rng_.dropout);
      const auto sel = cffs::topk_select(
          std::span<const float>(feats.data() + static_cast<std::size_t>(r) * nfeat, nfeat), keep,
          config_.select_fraction);
      std::copy(sel.begin(), sel.end(), masks.begin() + static_cast<std::ptrdiff_t>(r) * nfeat);
    }
  }
  std::vector<float> logits;
  net_->classify(feats, masks, logits);

  const int k = net_->num_classes();
  const auto block = [&](int row0, int rows) {
    return strategies::Logits{std::span<const float>(logits.data() + static_cast<std::size_t>(row0) * k,
                                                     static_cast<std::size_t>(rows) * k),
                              k};
  };
  const std::span<const int> all_labels(labels);
  const auto fresh = block(0, nf);
  const auto fresh_labels = all_labels.subspan(0, nf);
  const auto ra = block(nf, na);
  const auto la = all_labels.subspan(nf, na);
  strategies::LossResult loss;
  switch (kind) {
    case Kind::kSgd:
    case Kind::kEr:
      loss = strategies::loss_er(fresh, fresh_labels, ra, la);
      break;
    case Kind::kDerpp:
      if (config_.strategy.single_draw) {
        loss = strategies::loss_derpp(fresh, fresh_labels, ra, stored, ra, la, config_.strategy.alpha,
                                      config_.strategy.beta);
      } else {
        loss = strategies::loss_derpp(fresh, fresh_labels, ra, stored, block(nf + na, nb),
                                      all_labels.subspan(nf + na, nb), config_.strategy.alpha,
                                      config_.strategy.beta);
      }
      break;
    case Kind::kErace: {
      const auto seen = classes_before(t);
      std::set<int> present(fresh_labels.begin(), fresh_labels.end());
      const std::vector<int> batch_classes(present.begin(), present.end());
      loss = strategies::loss_erace(fresh, fresh_labels, ra, la, seen, batch_classes);
      break;
    }
    case Kind::kClser:
      throw PreconditionError("strategy clser is not implemented");
  }
  if (!std::isfinite(loss.loss)) diverged(t, e, loss.loss);

  std::vector<float> dlogits(static_cast<std::size_t>(n) * k, 0.0f);
  std::copy(loss.grad_fresh.begin(), loss.grad_fresh.end(), dlogits.begin());
  const std::size_t off_a = static_cast<std::size_t>(nf) * k;
  for (std::size_t i = 0; i < loss.grad_replay_a.size(); ++i) dlogits[off_a + i] += loss.grad_replay_a[i];
  const std::size_t off_b = config_.strategy.single_draw ? off_a : off_a + static_cast<std::size_t>(na) * k;
  for (std::size_t i = 0; i < loss.grad_replay_b.size(); ++i) dlogits[off_b + i] += loss.grad_replay_b[i];

  net_->zero_grad();
  std::vector<float> dfeat;
  net_->backward_head(dlogits, dfeat);
  nn::Tensor<float> dx;
  net_->backward_features(dfeat, learn_encoder ? &dx : nullptr);
  if (learn_encoder) {
    const std::size_t hw = static_cast<std::size_t>(in_h_) * in_w_;
    std::vector<float> dmaps(3 * static_cast<std::size_t>(nf) * hw);
    for (int ch = 0; ch < 3; ++ch) {
      const float* src = dx.row(ch);
      std::copy(src, src + nf * hw, dmaps.begin() + static_cast<std::ptrdiff_t>(ch * nf * hw));
    }
    ffe::apply_gradient(encoder_, ffe::gradient(stacks, dmaps, config_.ffe_bias),
                         config_.lr * config_.ffe_lr_scale);
  }
  optimizer_step();

  if (config_.cffs_enabled) {
    for (int r = 0; r < n; ++r) {
      counter_.update(labels[r], std::span<const std::uint8_t>(
                                     masks.data() + static_cast<std::size_t>(r) * nfeat, nfeat));
    }
    if (e == 1) {
      std::vector<float> ll;
      for (std::size_t i : idx) {
        dwt::low_band(data_.train.images[i], ll);
        signatures_[data_.train.labels[i]].update(ll);
      }
    }
  }

  if (kind != Kind::kSgd && buffer_.capacity() > 0) {
    for (int r = 0; r < nf; ++r) {
      replay::BufferEntry entry;
      entry.map = model_input(data_.train.images[idx[r]]);
      entry.label = labels[r];
      entry.task_id = t;
      if (kind == Kind::kDerpp) {
        entry.logits.emplace(logits.begin() + static_cast<std::ptrdiff_t>(r) * k,
                             logits.begin() + static_cast<std::ptrdiff_t>(r + 1) * k);
      }
      const long slot = buffer_.insert(std::move(entry), rng_.reservoir);
      if (slot >= 0 && t == 1) {
        if (buffer_source_.size() <= static_cast<std::size_t>(slot)) buffer_source_.resize(slot + 1);
        buffer_source_[slot] = idx[r];
      }
    }
  }

  ++step_;
  examples_ += static_cast<std::uint64_t>(n);
  step_wall_s_ += seconds_since(start);

  if (steplog_) {
    io::Fnv1a h;
    int sel_min = nfeat, sel_max = 0;
    for (int r = 0; r < n; ++r) {
      int sel = nfeat;
      if (!masks.empty()) {
        const auto row = std::span<const std::uint8_t>(masks.data() + static_cast<std::size_t>(r) * nfeat, nfeat);
        sel = static_cast<int>(std::count(row.begin(), row.end(), 1));
        h.update(&labels[r], sizeof(int));
        h.update(row);
      }
      sel_min = std::min(sel_min, sel);
      sel_max = std::max(sel_max, sel);
    }
    auto& log = *steplog_;
    log << "step task=" << t << " epoch=" << e << " step=" << step_ << " regime=" << regime_name(regime)
        << " fresh=" << nf << " replay=" << (n - nf) << " sel_min=" << sel_min << " sel_max=" << sel_max
        << " loss=" << loss.loss << " digest=" << io::hex64(h.value());
    if (!masks.empty()) {
      log << " masks=";
      for (int r = 0; r < n; ++r) {
        log << (r ? "," : "") << labels[r] << ':'
            << mask_hex(std::span<const std::uint8_t>(masks.data() + static_cast<std::size_t>(r) * nfeat, nfeat));
      }
    }
    log << '\n';
  }
}

void Trainer::optimizer_step() {
  auto params = net_->params();
  double scale = 1.0;
  if (config_.clip > 0.0) {
    double sq = 0.0;
    for (const auto* p : params) {
      for (float g : p->grad) sq += static_cast<double>(g) * g;
    }
    const double norm = std::sqrt(sq);
    if (norm > config_.clip) scale = config_.clip / norm;
  }
  const float lr = static_cast<float>(config_.lr);
  const float mu = static_cast<float>(config_.momentum);
  const float wd = static_cast<float>(config_.weight_decay);
  const float s = static_cast<float>(scale);
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto& p = *params[i];
    auto& v = momentum_[i];
    for (std::size_t j = 0; j < p.value.size(); ++j) {
      float g = p.grad[j] * s + wd * p.value[j];
      if (mu > 0.0f) {
        v[j] = mu * v[j] + g;
        g = v[j];
      }
      p.value[j] -= lr * g;
    }
  }
}

void Trainer::update_frequency_schedule(int t) {
  std::vector<cffs::ClassSignature> current, previous;
  for (int c : stream_.tasks[t - 1].classes) current.push_back(signatures_[c]);
  if (config_.compare_scope == config::CompareScope::kLast) {
    for (int c : stream_.tasks[t - 2].classes) previous.push_back(signatures_[c]);
  } else {
    for (int c : classes_before(t)) previous.push_back(signatures_[c]);
  }
  const auto table = cffs::build_similarity(current, previous);
  for (const auto& row : table.rows) {
    schedule_.set_frequency_row(row.class_id, cffs::frequency_keep_probs(counter_, row, config_.lambda));
    if (steplog_) {
      *steplog_ << "similarity task=" << t << " class=" << row.class_id << " y_plus=" << row.y_plus
                << " y_minus=" << row.y_minus << " s_bar=" << row.s_bar
                << " alpha_plus=" << row.alpha_plus << " alpha_minus=" << row.alpha_minus << '\n';
    }
  }
}

void Trainer::update_semantic_schedule(int t) {
  for (int c : classes_through(t)) {
    schedule_.set_semantic_row(c, cffs::semantic_keep_probs(counter_, config_.beta, c));
  }
}

std::vector<double> Trainer::evaluate(int t, Mode mode) {
  if (t < 1 || t > completed_) throw PreconditionError("evaluate: task " + std::to_string(t) + " not trained");
  const auto seen = classes_through(t);
  const int k = net_->num_classes();
  const int nfeat = net_->feature_dim();
  std::vector<double> acc;
  int sel_min = nfeat, sel_max = 0;
  std::size_t rows = 0;
  for (int tau = 1; tau <= t; ++tau) {
    const auto& task = stream_.tasks[tau - 1];
    const auto& allowed = mode == Mode::kClassIl ? seen : task.classes;
    std::size_t correct = 0;
    for (std::size_t s = 0; s < task.test.size(); s += kEvalChunk) {
      const std::size_t e = std::min(task.test.size(), s + kEvalChunk);
      std::vector<Volume> inputs;
      for (std::size_t i = s; i < e; ++i) inputs.push_back(model_input(data_.test.images[task.test[i]]));
      std::vector<const Volume*> ptrs;
      for (const auto& v : inputs) ptrs.push_back(&v);
      std::vector<float> feats;
      net_->extract(model::pack_batch<float>(ptrs), feats, false);
      const int n = static_cast<int>(inputs.size());
      std::vector<std::uint8_t> masks;
      if (config_.cffs_enabled) {
        masks.resize(static_cast<std::size_t>(n) * nfeat);
        for (int r = 0; r < n; ++r) {
          const auto sel = cffs::topk_select(
              std::span<const float>(feats.data() + static_cast<std::size_t>(r) * nfeat, nfeat), {},
              config_.select_fraction);
          const int count = static_cast<int>(std::count(sel.begin(), sel.end(), 1));
          sel_min = std::min(sel_min, count);
          sel_max = std::max(sel_max, count);
          std::copy(sel.begin(), sel.end(), masks.begin() + static_cast<std::ptrdiff_t>(r) * nfeat);
        }
      } else {
        sel_min = sel_max = nfeat;
      }
      std::vector<float> logits;
      net_->classify(feats, masks, logits);
      for (int r = 0; r < n; ++r) {
        const float* z = logits.data() + static_cast<std::size_t>(r) * k;
        int best = allowed.front();
        for (int c : allowed) {
          if (z[c] > z[best]) best = c;
        }
        if (best == data_.test.labels[task.test[s + r]]) ++correct;
      }
      rows += static_cast<std::size_t>(n);
    }
    acc.push_back(task.test.empty() ? 0.0 : static_cast<double>(correct) / task.test.size());
  }
  if (steplog_) {
    *steplog_ << "eval after=" << t << " mode=" << (mode == Mode::kClassIl ? "class_il" : "task_il")
              << " rows=" << rows << " sel_min=" << sel_min << " sel_max=" << sel_max
              << " features=" << nfeat << '\n';
  }
  return acc;
}

metrics::EfficiencyReport Trainer::efficiency() const {
  metrics::EfficiencyReport r;
  r.total_flops = metrics::training_flops(net_->config(), in_h_, in_w_, examples_);
  r.wall_s_per_task = task_wall_s_;
  r.steps = step_;
  r.step_wall_s = step_wall_s_;
  r.buffer_bytes = buffer_.memory_footprint();
  return r;
}

void Trainer::diverged(int t, int e, double loss) {
  const fs::path dir = dump_dir_.empty() ? fs::current_path() : fs::path(dump_dir_);
  const fs::path path = dir / "divergence_dump.txt";
  {
    std::ofstream out(path);
    out.precision(9);
    out << "task = " << t << "\nepoch = " << e << "\nstep = " << step_ + 1 << "\nloss = " << loss
        << "\nseed = " << seed_ << "\n";
    for (const auto* p : net_->params()) {
      double v = 0.0, g = 0.0;
      bool finite = true;
      for (std::size_t i = 0; i < p->value.size(); ++i) {
        v += static_cast<double>(p->value[i]) * p->value[i];
        g += static_cast<double>(p->grad[i]) * p->grad[i];
        finite = finite && std::isfinite(p->value[i]);
      }
      out << "param " << p->name << " norm=" << std::sqrt(v) << " grad_norm=" << std::sqrt(g)
          << " finite=" << (finite ? "yes" : "no") << '\n';
    }
    out << "encoder =";
    for (float w : encoder_.values) out << ' ' << w;
    out << "\nencoder_frozen = " << (encoder_.frozen ? "true" : "false") << '\n';
  }
  throw DivergenceError("non-finite loss at task " + std::to_string(t) + ", epoch " +
                        std::to_string(e) + ", step " + std::to_string(step_ + 1) +
                        "; state dumped to " + path.string());
}

void Trainer::save_state(const std::string& dir) {
  fs::create_directories(dir);
  const fs::path root(dir);
  model::save_checkpoint(*net_, (root / "model.ckpt").string());
  buffer_.save((root / "buffer.bin").string());
  std::ofstream out(root / "trainer.state", std::ios::binary);
  if (!out) throw FormatError("cannot write " + (root / "trainer.state").string());
  io::write_bytes(out, kStateMagic, 8);
  io::write_u64(out, config::digest(config_));
  io::write_u64(out, seed_);
  io::write_u32(out, static_cast<std::uint32_t>(completed_));
  io::write_u64(out, step_);
  io::write_u64(out, examples_);
  write_f64(out, step_wall_s_);
  write_f64_vec(out, task_wall_s_);
  ffe::write_weights(out, encoder_);
  io::write_u64(out, counter_.raw().size());
  io::write_bytes(out, counter_.raw().data(), counter_.raw().size_bytes());
  write_f64_vec(out, schedule_.p_f);
  write_f64_vec(out, schedule_.p_s);
  io::write_u32(out, static_cast<std::uint32_t>(signatures_.size()));
  for (const auto& s : signatures_) {
    io::write_u64(out, static_cast<std::uint64_t>(s.sample_count));
    write_f64_vec(out, s.sum_ll);
  }
  io::write_u32(out, static_cast<std::uint32_t>(momentum_.size()));
  for (const auto& v : momentum_) {
    io::write_u64(out, v.size());
    io::write_f32_array(out, v);
  }
  std::ostringstream rngs;
  rngs << rng_.init << ' ' << rng_.data << ' ' << rng_.augment << ' ' << rng_.replay << ' '
       << rng_.reservoir << ' ' << rng_.dropout;
  const std::string rng_text = rngs.str();
  io::write_u64(out, rng_text.size());
  io::write_bytes(out, rng_text.data(), rng_text.size());
  write_matrix(out, class_il_);
  write_matrix(out, task_il_);
  io::write_u32(out, static_cast<std::uint32_t>(encoder_digests_.size()));
  for (auto d : encoder_digests_) io::write_u64(out, d);
  if (!out) throw FormatError("write failed: " + (root / "trainer.state").string());
}

void Trainer::load_state(const std::string& dir) {
  const fs::path root(dir);
  const std::string state_path = (root / "trainer.state").string();
  std::ifstream in(state_path, std::ios::binary);
  if (!in) throw FormatError("cannot open " + state_path);
  char magic[8];
  io::read_bytes(in, magic, 8);
  if (!std::equal(magic, magic + 8, kStateMagic)) throw FormatError(state_path + ": bad magic");
  if (io::read_u64(in) != config::digest(config_)) {
    throw FormatError(state_path + ": saved with a different configuration");
  }
  if (io::read_u64(in) != seed_) throw FormatError(state_path + ": saved with a different seed");
  model::load_checkpoint(*net_, (root / "model.ckpt").string());
  buffer_ = replay::ReservoirBuffer::load((root / "buffer.bin").string());
  completed_ = static_cast<int>(io::read_u32(in));
  step_ = io::read_u64(in);
  examples_ = io::read_u64(in);
  step_wall_s_ = read_f64(in);
  task_wall_s_ = read_f64_vec(in);
  encoder_ = ffe::read_weights(in);
  encoder_.use_bias = config_.ffe_bias;
  const auto counts = io::read_u64(in);
  if (counts != counter_.raw().size()) throw FormatError(state_path + ": counter shape mismatch");
  io::read_bytes(in, counter_.raw().data(), counter_.raw().size_bytes());
  schedule_.p_f = read_f64_vec(in);
  schedule_.p_s = read_f64_vec(in);
  if (io::read_u32(in) != signatures_.size()) throw FormatError(state_path + ": signature count mismatch");
  for (auto& s : signatures_) {
    s.sample_count = static_cast<std::int64_t>(io::read_u64(in));
    s.sum_ll = read_f64_vec(in);
  }
  if (io::read_u32(in) != momentum_.size()) throw FormatError(state_path + ": optimizer state mismatch");
  for (auto& v : momentum_) {
    if (io::read_u64(in) != v.size()) throw FormatError(state_path + ": optimizer state mismatch");
    io::read_f32_array(in, v);
  }
  std::string rng_text(io::read_u64(in), '\0');
  io::read_bytes(in, rng_text.data(), rng_text.size());
  std::istringstream rngs(rng_text);
  rngs >> rng_.init >> rng_.data >> rng_.augment >> rng_.replay >> rng_.reservoir >> rng_.dropout;
  if (!rngs) throw FormatError(state_path + ": corrupt random stream state");
  class_il_ = read_matrix(in);
  task_il_ = read_matrix(in);
  encoder_digests_.resize(io::read_u32(in));
  for (auto& d : encoder_digests_) d = io::read_u64(in);
}

metrics::SummaryRow summarize(const std::string& run_id, const metrics::AccuracyMatrix& class_il,
                              const metrics::EfficiencyReport& efficiency, bool ff_clip) {
  const double nan = std::numeric_limits<double>::quiet_NaN();
  const int t = class_il.tasks();
  metrics::SummaryRow row;
  row.run_id = run_id;
  row.acc_final = metrics::average_accuracy(class_il, t);
  if (t >= 2) {
    row.ff_final = metrics::final_forgetting(class_il, t, ff_clip);
    const auto sp = metrics::stability_plasticity(class_il, t);
    row.stability = sp.stability;
    row.plasticity = sp.plasticity;
    row.tradeoff = sp.tradeoff;
  } else {
    row.ff_final = row.stability = row.tradeoff = nan;
    row.plasticity = class_il.at(1, 1);
  }
  row.flops = efficiency.total_flops;
  row.wall_s = efficiency.wall_s();
  row.peak_mem_b = efficiency.peak_mem_bytes;
  return row;
}

namespace {

void write_metadata(const fs::path& path, const config::RunConfig& config, std::uint64_t seed,
                    const Trainer& trainer, const metrics::EfficiencyReport& eff) {
  std::ofstream out(path);
  out << "# run metadata\n";
  out << "run_id = " << config.run_id << "\n";
  out << "seed = " << seed << "\n";
  out << "config_digest = " << io::hex64(config::digest(config)) << "\n";
  const char* streams[] = {"init", "data", "augment", "replay", "reservoir", "dropout", "split"};
  for (int i = 0; i < 7; ++i) out << "seed." << streams[i] << " = " << Rng::derive(seed, i + 1) << "\n";
  out << "\n# configuration\n" << config::dump(config);
  out << "\n# decisions\n";
  out << "decision.frequency_epochs = " << config.frequency_epochs() << "  # floor(fraction * epochs), regime e <= this\n";
  out << "decision.selection_size = " << cffs::selection_size(trainer.counter().features(), config.select_fraction) << "\n";
  out << "decision.selection_rounding = floor\n";
  out << "decision.selection_order = dropout_then_topk\n";
  out << "decision.alpha_clamp = " << cffs::kAlphaMin << "," << cffs::kAlphaMax << "\n";
  out << "decision.zero_rowmax_normalizer = 1\n";
  out << "decision.frequency_update = end_of_epoch_1\n";
  out << "decision.semantic_update = end_of_each_semantic_epoch\n";
  out << "decision.counter_cadence = per_training_row_fresh_and_replay\n";
  out << "decision.signature_source = normalized_ll_epoch_1\n";
  out << "decision.buffer_insert = unaugmented_encoded_per_fresh_sample\n";
  out << "decision.derpp_logits = recorded_at_insertion\n";
  out << "decision.erace_mask = previous_classes_absent_from_fresh_batch\n";
  out << "decision.bn_batch = fresh_and_replay_concatenated\n";
  out << "decision.augment_pad = 4_zero_even_offsets\n";
  out << "decision.ffe_init = uniform_fan_in_bias_zero\n";
  out << "decision.ffe_freeze = end_of_task_1\n";
  out << "decision.buffer_refresh_at_freeze = " << (config.ffe_refresh_buffer ? "true" : "false") << "\n";
  out << "decision.flops_multiplier = 3\n";
  out << "decision.ff = " << (config.ff_clip ? "clipped" : "unclipped") << "\n";
  out << "\n# model\n";
  out << "model.input = " << trainer.input_height() << "x" << trainer.input_width() << "\n";
  out << "model.feature_dim = " << trainer.counter().features() << "\n";
  out << "model.param_count = " << const_cast<Trainer&>(trainer).network().param_count() << "\n";
  out << "\n# encoder\n";
  const auto& d = trainer.encoder_digests();
  for (std::size_t t = 0; t < d.size(); ++t) out << "encoder.digest.task" << t + 1 << " = " << io::hex64(d[t]) << "\n";
  out << "\n# efficiency\n";
  out.precision(17);
  out << "efficiency.total_flops = " << eff.total_flops << "\n";
  out << "efficiency.examples = " << trainer.examples_processed() << "\n";
  out << "efficiency.steps = " << eff.steps << "\n";
  out << "efficiency.mean_step_s = " << eff.mean_step_s() << "\n";
  out << "efficiency.wall_s = " << eff.wall_s() << "\n";
  for (std::size_t t = 0; t < eff.wall_s_per_task.size(); ++t) {
    out << "efficiency.wall_s.task" << t + 1 << " = " << eff.wall_s_per_task[t] << "\n";
  }
  out << "efficiency.peak_mem_b = " << eff.peak_mem_bytes << "\n";
  out << "efficiency.peak_mem_source = " << (eff.peak_mem_estimated ? "estimated" : "probe") << "\n";
  out << "efficiency.buffer_bytes = " << eff.buffer_bytes << "\n";
}

}  // namespace

RunResult run_sequence(const config::RunConfig& config, const bench::Dataset& data,
                       std::uint64_t seed, const std::string& out_dir,
                       const std::string& resume_dir) {
  std::ofstream steplog;
  const bool write = !out_dir.empty();
  if (write) {
    fs::create_directories(out_dir);
    if (config.steplog) {
      steplog.open(fs::path(out_dir) / "steps.log",
                   resume_dir.empty() ? std::ios::trunc : std::ios::app);
    }
  }
  const bool peak_reset = metrics::reset_peak_memory();
  Trainer trainer(config, data, seed, steplog.is_open() ? &steplog : nullptr);
  if (write) trainer.set_dump_dir(out_dir);
  if (!resume_dir.empty()) trainer.load_state(resume_dir);
  for (int t = trainer.completed_tasks() + 1; t <= trainer.num_tasks(); ++t) {
    trainer.run_task(t);
    if (write && config.save_state) trainer.save_state((fs::path(out_dir) / "state").string());
  }

  RunResult result;
  result.class_il = trainer.class_il();
  result.task_il = trainer.task_il();
  result.encoder_digests = trainer.encoder_digests();
  result.efficiency = trainer.efficiency();
  const std::uint64_t peak = metrics::probe_peak_memory();
  if (peak > 0) {
    result.efficiency.peak_mem_bytes = peak;
    result.efficiency.peak_mem_estimated = false;
  } else {
    result.efficiency.peak_mem_bytes = metrics::estimate_training_memory(
        trainer.network().config(), config.batch + 2 * config.strategy.replay_batch);
    result.efficiency.peak_mem_estimated = true;
  }
  (void)peak_reset;
  const std::string run_id = config.run_id + "/seed" + std::to_string(seed);
  result.summary = summarize(run_id, result.class_il, result.efficiency, config.ff_clip);
  if (!write) return result;

  const fs::path dir(out_dir);
  result.dir = dir.string();
  std::vector<metrics::ResultRow> rows;
  const int tasks = result.class_il.tasks();
  for (int t = 1; t <= tasks; ++t) {
    rows.push_back({run_id, seed, t, "acc_class_il", metrics::average_accuracy(result.class_il, t)});
    rows.push_back({run_id, seed, t, "acc_task_il", metrics::average_accuracy(result.task_il, t)});
    if (t >= 2) {
      rows.push_back({run_id, seed, t, "ff_class_il", metrics::final_forgetting(result.class_il, t, config.ff_clip)});
      rows.push_back({run_id, seed, t, "ff_task_il", metrics::final_forgetting(result.task_il, t, config.ff_clip)});
    }
    rows.push_back({run_id, seed, t, "wall_s", result.efficiency.wall_s_per_task[t - 1]});
    for (int tau = 1; tau <= t; ++tau) {
      rows.push_back({run_id, seed, t, "r_class_il_tau" + std::to_string(tau), result.class_il.at(t, tau)});
      rows.push_back({run_id, seed, t, "r_task_il_tau" + std::to_string(tau), result.task_il.at(t, tau)});
    }
  }
  metrics::write_results_csv(rows, (dir / "results.csv").string());
  metrics::write_summary_csv({result.summary}, (dir / "summary.csv").string());
  metrics::write_matrix_csv(result.class_il, (dir / "matrix_class_il.csv").string());
  metrics::write_matrix_csv(result.task_il, (dir / "matrix_task_il.csv").string());
  cffs::write_counter_csv(trainer.counter(), (dir / "counter.csv").string());
  cffs::write_schedule_csv(trainer.schedule(), (dir / "schedule.csv").string());
  trainer.buffer().save((dir / "buffer.bin").string());
  model::save_checkpoint(trainer.network(), (dir / "model.ckpt").string());
  if (config.ffe_enabled) ffe::save_weights(trainer.encoder(), (dir / "encoder.bin").string());
  write_metadata(dir / "metadata.txt", config, seed, trainer, result.efficiency);
  return result;
}

}  // namespace clfd::loop
