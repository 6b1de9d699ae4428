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

#include "clfd/config.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <functional>
#include <set>
#include <sstream>

#include "clfd/binary_io.hpp"
#include "clfd/errors.hpp"

namespace clfd::config {
namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, sep)) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

// Value conversion failures carry only the message; the caller adds the
// key and line.
struct BadValue {
  std::string message;
};

bool to_bool(const std::string& v) {
  std::string s = v;
  std::transform(s.begin(), s.end(), s.begin(), ::tolower);
  if (s == "true" || s == "1" || s == "yes" || s == "on") return true;
  if (s == "false" || s == "0" || s == "no" || s == "off") return false;
  throw BadValue{"expected a boolean, got '" + v + "'"};
}

double to_double(const std::string& v) {
  std::size_t used = 0;
  double out = 0.0;
  try {
    out = std::stod(v, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (v.empty() || used != v.size() || !std::isfinite(out)) {
    throw BadValue{"expected a number, got '" + v + "'"};
  }
  return out;
}

long long to_int(const std::string& v) {
  std::size_t used = 0;
  long long out = 0;
  try {
    out = std::stoll(v, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (v.empty() || used != v.size()) throw BadValue{"expected an integer, got '" + v + "'"};
  return out;
}

double in_range(double v, double lo, double hi, bool lo_open = false) {
  if (v < lo || v > hi || (lo_open && v == lo)) {
    std::ostringstream msg;
    msg << "value " << v << " outside " << (lo_open ? "(" : "[") << lo << ", " << hi << "]";
    throw BadValue{msg.str()};
  }
  return v;
}

long long at_least(long long v, long long lo) {
  if (v < lo) throw BadValue{"value " + std::to_string(v) + " must be >= " + std::to_string(lo)};
  return v;
}

std::string fmt(double v) {
  std::ostringstream s;
  s.precision(17);
  s << v;
  return s.str();
}

std::string fmt(bool v) { return v ? "true" : "false"; }

std::string join(const std::vector<std::string>& items, const std::string& sep) {
  std::string out;
  for (std::size_t i = 0; i < items.size(); ++i) out += (i ? sep : "") + items[i];
  return out;
}

struct Key {
  std::string name;
  std::function<void(RunConfig&, const std::string&)> set;
  std::function<std::string(const RunConfig&)> get;
};

const std::vector<Key>& keys() {
  static const std::vector<Key> table = {
      {"run.id", [](RunConfig& c, const std::string& v) {
         if (v.empty() || v.find_first_of("/\\ ") != std::string::npos) {
           throw BadValue{"run id must be a non-empty name without slashes or spaces"};
         }
         c.run_id = v;
       },
       [](const RunConfig& c) { return c.run_id; }},
      {"run.output_dir", [](RunConfig& c, const std::string& v) { c.output_dir = v; },
       [](const RunConfig& c) { return c.output_dir; }},
      {"run.seeds",
       [](RunConfig& c, const std::string& v) {
         c.seeds.clear();
         for (const auto& s : split(v, ',')) c.seeds.push_back(static_cast<std::uint64_t>(at_least(to_int(s), 0)));
         if (c.seeds.empty()) throw BadValue{"at least one seed is required"};
       },
       [](const RunConfig& c) {
         std::vector<std::string> s;
         for (auto seed : c.seeds) s.push_back(std::to_string(seed));
         return join(s, ",");
       }},
      {"run.steplog", [](RunConfig& c, const std::string& v) { c.steplog = to_bool(v); },
       [](const RunConfig& c) { return fmt(c.steplog); }},
      {"run.save_state", [](RunConfig& c, const std::string& v) { c.save_state = to_bool(v); },
       [](const RunConfig& c) { return fmt(c.save_state); }},

      {"data.format", [](RunConfig& c, const std::string& v) {
         try {
           c.data.format = bench::parse_format(v);
         } catch (const ConfigError& e) {
           throw BadValue{e.what()};
         }
       },
       [](const RunConfig& c) { return bench::format_name(c.data.format); }},
      {"data.path", [](RunConfig& c, const std::string& v) { c.data.path = v; },
       [](const RunConfig& c) { return c.data.path; }},
      {"data.class_names", [](RunConfig& c, const std::string& v) { c.data.class_names = split(v, ','); },
       [](const RunConfig& c) { return join(c.data.class_names, ","); }},
      {"data.num_classes",
       [](RunConfig& c, const std::string& v) { c.data.num_classes = static_cast<int>(at_least(to_int(v), 1)); },
       [](const RunConfig& c) { return std::to_string(c.data.num_classes); }},
      {"data.train_per_class",
       [](RunConfig& c, const std::string& v) { c.data.train_per_class = static_cast<int>(at_least(to_int(v), 0)); },
       [](const RunConfig& c) { return std::to_string(c.data.train_per_class); }},
      {"data.test_per_class",
       [](RunConfig& c, const std::string& v) { c.data.test_per_class = static_cast<int>(at_least(to_int(v), 0)); },
       [](const RunConfig& c) { return std::to_string(c.data.test_per_class); }},
      {"data.seed",
       [](RunConfig& c, const std::string& v) { c.data_seed = static_cast<std::uint64_t>(at_least(to_int(v), 0)); },
       [](const RunConfig& c) { return std::to_string(c.data_seed); }},
      {"data.split",
       [](RunConfig& c, const std::string& v) {
         if (!v.empty()) {
           try {
             bench::SplitSpec::parse(v);
           } catch (const ConfigError& e) {
             throw BadValue{e.what()};
           }
         }
         c.split = v;
       },
       [](const RunConfig& c) { return c.split; }},
      {"data.classes_per_task",
       [](RunConfig& c, const std::string& v) { c.classes_per_task = static_cast<int>(at_least(to_int(v), 1)); },
       [](const RunConfig& c) { return std::to_string(c.classes_per_task); }},
      {"data.joint", [](RunConfig& c, const std::string& v) { c.joint = to_bool(v); },
       [](const RunConfig& c) { return fmt(c.joint); }},

      {"model.arch",
       [](RunConfig& c, const std::string& v) {
         if (v != "desk" && v != "resnet18") throw BadValue{"expected desk or resnet18, got '" + v + "'"};
         c.arch = v;
       },
       [](const RunConfig& c) { return c.arch; }},

      {"ffe.enabled", [](RunConfig& c, const std::string& v) { c.ffe_enabled = to_bool(v); },
       [](const RunConfig& c) { return fmt(c.ffe_enabled); }},
      {"ffe.bias", [](RunConfig& c, const std::string& v) { c.ffe_bias = to_bool(v); },
       [](const RunConfig& c) { return fmt(c.ffe_bias); }},
      {"ffe.refresh_buffer", [](RunConfig& c, const std::string& v) { c.ffe_refresh_buffer = to_bool(v); },
       [](const RunConfig& c) { return fmt(c.ffe_refresh_buffer); }},
      {"ffe.lr_scale",
       [](RunConfig& c, const std::string& v) { c.ffe_lr_scale = in_range(to_double(v), 0.0, 100.0); },
       [](const RunConfig& c) { return fmt(c.ffe_lr_scale); }},

      {"cffs.enabled", [](RunConfig& c, const std::string& v) { c.cffs_enabled = to_bool(v); },
       [](const RunConfig& c) { return fmt(c.cffs_enabled); }},
      {"cffs.dropout", [](RunConfig& c, const std::string& v) { c.cffs_dropout = to_bool(v); },
       [](const RunConfig& c) { return fmt(c.cffs_dropout); }},
      {"cffs.lambda", [](RunConfig& c, const std::string& v) { c.lambda = in_range(to_double(v), 0.0, 1.0); },
       [](const RunConfig& c) { return fmt(c.lambda); }},
      {"cffs.beta", [](RunConfig& c, const std::string& v) { c.beta = in_range(to_double(v), 0.0, 1e6, true); },
       [](const RunConfig& c) { return fmt(c.beta); }},
      {"cffs.freq_epoch_fraction",
       [](RunConfig& c, const std::string& v) { c.freq_epoch_fraction = in_range(to_double(v), 0.0, 1.0); },
       [](const RunConfig& c) { return fmt(c.freq_epoch_fraction); }},
      {"cffs.fraction",
       [](RunConfig& c, const std::string& v) { c.select_fraction = in_range(to_double(v), 0.0, 1.0, true); },
       [](const RunConfig& c) { return fmt(c.select_fraction); }},
      {"cffs.compare_scope",
       [](RunConfig& c, const std::string& v) {
         if (v == "all") c.compare_scope = CompareScope::kAll;
         else if (v == "last") c.compare_scope = CompareScope::kLast;
         else throw BadValue{"expected all or last, got '" + v + "'"};
       },
       [](const RunConfig& c) { return std::string(c.compare_scope == CompareScope::kAll ? "all" : "last"); }},

      {"buffer.capacity",
       [](RunConfig& c, const std::string& v) { c.buffer_capacity = static_cast<std::size_t>(at_least(to_int(v), 0)); },
       [](const RunConfig& c) { return std::to_string(c.buffer_capacity); }},
      {"buffer.quantize", [](RunConfig& c, const std::string& v) { c.buffer_quantize = to_bool(v); },
       [](const RunConfig& c) { return fmt(c.buffer_quantize); }},

      {"strategy.kind",
       [](RunConfig& c, const std::string& v) {
         try {
           c.strategy.kind = strategies::parse_kind(v);
         } catch (const ConfigError& e) {
           throw BadValue{e.what()};
         }
         if (c.strategy.kind == strategies::Kind::kClser) {
           throw BadValue{"strategy 'clser' is reserved and not implemented"};
         }
       },
       [](const RunConfig& c) { return strategies::kind_name(c.strategy.kind); }},
      {"strategy.alpha", [](RunConfig& c, const std::string& v) { c.strategy.alpha = in_range(to_double(v), 0.0, 1e6); },
       [](const RunConfig& c) { return fmt(c.strategy.alpha); }},
      {"strategy.beta", [](RunConfig& c, const std::string& v) { c.strategy.beta = in_range(to_double(v), 0.0, 1e6); },
       [](const RunConfig& c) { return fmt(c.strategy.beta); }},
      {"strategy.replay_batch",
       [](RunConfig& c, const std::string& v) { c.strategy.replay_batch = static_cast<int>(at_least(to_int(v), 1)); },
       [](const RunConfig& c) { return std::to_string(c.strategy.replay_batch); }},
      {"derpp.single_draw", [](RunConfig& c, const std::string& v) { c.strategy.single_draw = to_bool(v); },
       [](const RunConfig& c) { return fmt(c.strategy.single_draw); }},

      {"augment.enabled", [](RunConfig& c, const std::string& v) { c.augment = to_bool(v); },
       [](const RunConfig& c) { return fmt(c.augment); }},
      {"augment.flip_encoded", [](RunConfig& c, const std::string& v) { c.flip_encoded = to_bool(v); },
       [](const RunConfig& c) { return fmt(c.flip_encoded); }},

      {"optim.lr", [](RunConfig& c, const std::string& v) { c.lr = in_range(to_double(v), 0.0, 10.0, true); },
       [](const RunConfig& c) { return fmt(c.lr); }},
      {"optim.momentum", [](RunConfig& c, const std::string& v) { c.momentum = in_range(to_double(v), 0.0, 0.999); },
       [](const RunConfig& c) { return fmt(c.momentum); }},
      {"optim.weight_decay",
       [](RunConfig& c, const std::string& v) { c.weight_decay = in_range(to_double(v), 0.0, 1.0); },
       [](const RunConfig& c) { return fmt(c.weight_decay); }},
      {"optim.clip", [](RunConfig& c, const std::string& v) { c.clip = in_range(to_double(v), 0.0, 1e6); },
       [](const RunConfig& c) { return fmt(c.clip); }},
      {"optim.batch", [](RunConfig& c, const std::string& v) { c.batch = static_cast<int>(at_least(to_int(v), 1)); },
       [](const RunConfig& c) { return std::to_string(c.batch); }},
      {"optim.epochs", [](RunConfig& c, const std::string& v) { c.epochs = static_cast<int>(at_least(to_int(v), 1)); },
       [](const RunConfig& c) { return std::to_string(c.epochs); }},

      {"metrics.ff_clip", [](RunConfig& c, const std::string& v) { c.ff_clip = to_bool(v); },
       [](const RunConfig& c) { return fmt(c.ff_clip); }},
  };
  return table;
}

const Key* find_key(const std::string& name) {
  for (const auto& k : keys()) {
    if (k.name == name) return &k;
  }
  return nullptr;
}

std::size_t edit_distance(const std::string& a, const std::string& b) {
  std::vector<std::size_t> prev(b.size() + 1), cur(b.size() + 1);
  for (std::size_t j = 0; j <= b.size(); ++j) prev[j] = j;
  for (std::size_t i = 1; i <= a.size(); ++i) {
    cur[0] = i;
    for (std::size_t j = 1; j <= b.size(); ++j) {
      cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, prev[j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1)});
    }
    std::swap(prev, cur);
  }
  return prev[b.size()];
}

void set_key(RunConfig& config, const std::string& key, const std::string& value, int line,
             const std::string& origin) {
  const Key* k = find_key(key);
  if (!k) {
    std::string msg = "unknown key '" + key + "'";
    const std::string hint = nearest_key(key);
    if (!hint.empty()) msg += " (did you mean '" + hint + "'?)";
    throw ConfigError(msg, line, origin);
  }
  try {
    k->set(config, value);
  } catch (const BadValue& e) {
    throw ConfigError(key + ": " + e.message, line, origin);
  }
}

}  // namespace

bench::SplitSpec RunConfig::split_spec() const {
  if (joint) {
    bench::SplitSpec spec;
    spec.tasks.emplace_back();
    for (int c = 0; c < data.num_classes; ++c) spec.tasks.back().push_back(c);
    return spec;
  }
  if (!split.empty()) return bench::SplitSpec::parse(split);
  return bench::SplitSpec::contiguous(data.num_classes, classes_per_task);
}

int RunConfig::frequency_epochs() const {
  return static_cast<int>(std::floor(freq_epoch_fraction * epochs + 1e-9));
}

RunConfig parse(const std::string& text, const std::string& origin) {
  RunConfig config;
  std::set<std::string> seen;
  std::istringstream in(text);
  std::string raw;
  int line = 0;
  while (std::getline(in, raw)) {
    ++line;
    const auto hash = raw.find('#');
    const std::string body = trim(hash == std::string::npos ? raw : raw.substr(0, hash));
    if (body.empty()) continue;
    const auto eq = body.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("expected 'key = value', got '" + body + "'", line, origin);
    }
    const std::string key = trim(body.substr(0, eq));
    const std::string value = trim(body.substr(eq + 1));
    if (key.empty()) throw ConfigError("missing key before '='", line, origin);
    if (!seen.insert(key).second) throw ConfigError("duplicate key '" + key + "'", line, origin);
    set_key(config, key, value, line, origin);
  }
  try {
    validate(config);
  } catch (const ConfigError& e) {
    throw ConfigError(e.what(), 0, origin);
  }
  return config;
}

RunConfig load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse(ss.str(), path);
}

void apply_override(RunConfig& config, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos) {
    throw ConfigError("override '" + assignment + "' is not of the form key=value");
  }
  set_key(config, trim(assignment.substr(0, eq)), trim(assignment.substr(eq + 1)), 0, "override");
}

void validate(const RunConfig& config) {
  if (config.data.format != bench::Format::kSynthetic && config.data.path.empty()) {
    throw ConfigError("data.path is required for format " + bench::format_name(config.data.format));
  }
  if (!config.data.class_names.empty() &&
      static_cast<int>(config.data.class_names.size()) != config.data.num_classes) {
    throw ConfigError("data.class_names lists " + std::to_string(config.data.class_names.size()) +
                      " names but data.num_classes is " + std::to_string(config.data.num_classes));
  }
  if (!config.joint && config.split.empty() && config.data.num_classes % config.classes_per_task != 0) {
    throw ConfigError("data.num_classes " + std::to_string(config.data.num_classes) +
                      " is not divisible by data.classes_per_task " +
                      std::to_string(config.classes_per_task));
  }
  if (!config.split.empty()) {
    const auto spec = bench::SplitSpec::parse(config.split);
    std::vector<int> count(config.data.num_classes, 0);
    for (const auto& task : spec.tasks) {
      for (int c : task) {
        if (c < 0 || c >= config.data.num_classes) {
          throw ConfigError("data.split: class " + std::to_string(c) + " is out of range");
        }
        if (++count[c] > 1) {
          throw ConfigError("data.split: class " + std::to_string(c) + " appears in more than one task");
        }
      }
    }
    for (int c = 0; c < config.data.num_classes; ++c) {
      if (count[c] == 0) throw ConfigError("data.split: class " + std::to_string(c) + " is missing");
    }
  }
  if (config.strategy.kind == strategies::Kind::kClser) {
    throw ConfigError("strategy 'clser' is reserved and not implemented");
  }
}

std::string dump(const RunConfig& config) {
  std::string out;
  for (const auto& k : keys()) out += k.name + " = " + k.get(config) + "\n";
  return out;
}

std::uint64_t digest(const RunConfig& config) {
  io::Fnv1a h;
  const std::string text = dump(config);
  h.update(text.data(), text.size());
  return h.value();
}

std::vector<std::string> known_keys() {
  std::vector<std::string> out;
  for (const auto& k : keys()) out.push_back(k.name);
  return out;
}

std::string nearest_key(const std::string& key) {
  std::string best;
  std::size_t best_d = std::string::npos;
  for (const auto& k : keys()) {
    const auto dot = k.name.rfind('.');
    const std::string leaf = k.name.substr(dot + 1);
    const std::size_t d = std::min(edit_distance(key, k.name), edit_distance(key, leaf));
    if (d < best_d) {
      best_d = d;
      best = k.name;
    }
  }
  const std::size_t limit = std::max<std::size_t>(2, key.size() / 3);
  return best_d <= limit ? best : "";
}

}  // namespace clfd::config
