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

#include "clfd/bench.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <numbers>
#include <set>
#include <sstream>

#include "clfd/errors.hpp"

namespace clfd::bench {
namespace fs = std::filesystem;
namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

Volume rgb_from_interleaved(const unsigned char* px, int h, int w, int channels) {
  if (h % 2 != 0 || w % 2 != 0) {
    throw DimensionError("image " + std::to_string(h) + "x" + std::to_string(w) +
                         " has an odd side");
  }
  Volume v(3, h, w);
  for (int r = 0; r < h; ++r) {
    for (int c = 0; c < w; ++c) {
      const unsigned char* p = px + (static_cast<std::size_t>(r) * w + c) * channels;
      for (int ch = 0; ch < 3; ++ch) v.at(ch, r, c) = p[channels == 1 ? 0 : ch] / 255.0f;
    }
  }
  return v;
}

Volume read_png(const fs::path& path) {
  png_image image{};
  image.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_file(&image, path.c_str())) {
    throw FormatError(path.string() + ": " + image.message);
  }
  image.format = PNG_FORMAT_RGB;
  std::vector<unsigned char> buf(PNG_IMAGE_SIZE(image));
  if (!png_image_finish_read(&image, nullptr, buf.data(), 0, nullptr)) {
    throw FormatError(path.string() + ": " + image.message);
  }
  return rgb_from_interleaved(buf.data(), static_cast<int>(image.height),
                              static_cast<int>(image.width), 3);
}

// Binary PPM (P6) or PGM (P5) with maxval <= 255.
Volume read_pnm(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open " + path.string());
  std::string magic;
  in >> magic;
  if (magic != "P6" && magic != "P5") throw FormatError(path.string() + ": not a binary PPM/PGM");
  auto next_int = [&]() {
    int v = 0;
    while (in >> std::ws && in.peek() == '#') {
      std::string comment;
      std::getline(in, comment);
    }
    if (!(in >> v)) throw FormatError(path.string() + ": malformed header");
    return v;
  };
  const int w = next_int(), h = next_int(), maxval = next_int();
  if (maxval <= 0 || maxval > 255) throw FormatError(path.string() + ": unsupported maxval");
  in.get();
  const int channels = magic == "P6" ? 3 : 1;
  std::vector<unsigned char> buf(static_cast<std::size_t>(w) * h * channels);
  in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
  if (static_cast<std::size_t>(in.gcount()) != buf.size()) {
    throw FormatError(path.string() + ": truncated pixel data");
  }
  return rgb_from_interleaved(buf.data(), h, w, channels);
}

Volume read_image(const fs::path& path) {
  std::string ext = path.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), ::tolower);
  if (ext == ".png") return read_png(path);
  if (ext == ".ppm" || ext == ".pgm" || ext == ".pnm") return read_pnm(path);
  throw FormatError(path.string() + ": unsupported image format");
}

bool is_image(const fs::path& p) {
  std::string ext = p.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), ::tolower);
  return ext == ".png" || ext == ".ppm" || ext == ".pgm" || ext == ".pnm";
}

std::vector<fs::path> sorted_entries(const fs::path& dir, bool directories) {
  std::vector<fs::path> out;
  for (const auto& e : fs::directory_iterator(dir)) {
    if (directories ? e.is_directory() : (e.is_regular_file() && is_image(e.path()))) {
      out.push_back(e.path());
    }
  }
  std::sort(out.begin(), out.end());
  return out;
}

// (file, label) pairs for one split directory.
std::vector<std::pair<fs::path, int>> list_split(const fs::path& dir,
                                                 std::vector<std::string>& class_names) {
  std::vector<std::pair<fs::path, int>> items;
  const fs::path labels_csv = dir / "labels.csv";
  auto class_dirs = sorted_entries(dir, true);
  if (class_dirs.empty() && fs::exists(labels_csv)) {
    std::ifstream in(labels_csv);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      line = trim(line);
      if (line.empty() || line[0] == '#') continue;
      const auto comma = line.find(',');
      if (comma == std::string::npos) {
        throw FormatError(labels_csv.string() + ":" + std::to_string(lineno) + ": expected file,label");
      }
      const std::string file = trim(line.substr(0, comma));
      const std::string label = trim(line.substr(comma + 1));
      if (file == "file" && label == "label") continue;
      items.emplace_back(dir / file, std::stoi(label));
    }
    return items;
  }
  if (class_names.empty()) {
    for (const auto& d : class_dirs) class_names.push_back(d.filename().string());
  }
  for (const auto& d : class_dirs) {
    const auto it = std::find(class_names.begin(), class_names.end(), d.filename().string());
    if (it == class_names.end()) {
      throw FormatError(d.string() + ": class directory not in the declared class list");
    }
    const int label = static_cast<int>(it - class_names.begin());
    for (const auto& f : sorted_entries(d, false)) items.emplace_back(f, label);
  }
  return items;
}

void load_items(const std::vector<std::pair<fs::path, int>>& items, int num_classes,
                LabeledImages& out) {
  for (const auto& [file, label] : items) {
    if (label < 0 || label >= num_classes) {
      throw FormatError(file.string() + ": label " + std::to_string(label) + " out of range");
    }
    out.images.push_back(read_image(file));
    out.labels.push_back(label);
  }
}

void cap_per_class(LabeledImages& data, int per_class, int num_classes) {
  if (per_class <= 0) return;
  std::vector<int> kept(num_classes, 0);
  LabeledImages out;
  for (std::size_t i = 0; i < data.images.size(); ++i) {
    const int y = data.labels[i];
    if (kept[y] < per_class) {
      ++kept[y];
      out.images.push_back(std::move(data.images[i]));
      out.labels.push_back(y);
    }
  }
  data = std::move(out);
}

void normalize_split(LabeledImages& split, const std::array<float, 3>& mean,
                     const std::array<float, 3>& stddev) {
  for (auto& img : split.images) {
    for (int ch = 0; ch < img.channels; ++ch) {
      const int k = std::min(ch, 2);
      for (auto& v : img.channel(ch)) v = (v - mean[k]) / stddev[k];
    }
  }
}

}  // namespace

Format parse_format(const std::string& name) {
  if (name == "cifar_binary") return Format::kCifarBinary;
  if (name == "image_dir") return Format::kImageDir;
  if (name == "synthetic") return Format::kSynthetic;
  throw ConfigError("unknown dataset format '" + name +
                    "' (expected cifar_binary, image_dir or synthetic)");
}

std::string format_name(Format format) {
  switch (format) {
    case Format::kCifarBinary: return "cifar_binary";
    case Format::kImageDir: return "image_dir";
    case Format::kSynthetic: return "synthetic";
  }
  return "?";
}

LabeledImages read_cifar_batch(const std::string& path, int num_classes) {
  std::ifstream in(path, std::ios::binary | std::ios::ate);
  if (!in) throw FormatError("cannot open " + path);
  const auto size = static_cast<std::size_t>(in.tellg());
  if (size == 0 || size % kCifarRecordBytes != 0) {
    throw FormatError(path + ": size " + std::to_string(size) + " is not a multiple of " +
                      std::to_string(kCifarRecordBytes) + "-byte records");
  }
  in.seekg(0);
  const std::size_t records = size / kCifarRecordBytes;
  LabeledImages out;
  out.images.reserve(records);
  out.labels.reserve(records);
  std::vector<unsigned char> rec(kCifarRecordBytes);
  for (std::size_t r = 0; r < records; ++r) {
    in.read(reinterpret_cast<char*>(rec.data()), kCifarRecordBytes);
    if (static_cast<std::size_t>(in.gcount()) != kCifarRecordBytes) {
      throw FormatError(path + ": truncated record " + std::to_string(r));
    }
    const int label = rec[0];
    if (label >= num_classes) {
      throw FormatError(path + ": record " + std::to_string(r) + " has label " +
                        std::to_string(label) + " >= " + std::to_string(num_classes));
    }
    Volume img(3, 32, 32);
    for (std::size_t i = 0; i < 3072; ++i) img.values[i] = rec[1 + i] / 255.0f;
    out.images.push_back(std::move(img));
    out.labels.push_back(label);
  }
  return out;
}

void write_cifar_batch(const LabeledImages& data, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError("cannot open " + path + " for writing");
  std::vector<unsigned char> rec(kCifarRecordBytes);
  for (std::size_t i = 0; i < data.images.size(); ++i) {
    const Volume& img = data.images[i];
    if (img.channels != 3 || img.height != 32 || img.width != 32) {
      throw ShapeError("write_cifar_batch: images must be 3x32x32");
    }
    if (data.labels[i] < 0 || data.labels[i] > 255) throw ShapeError("write_cifar_batch: label");
    rec[0] = static_cast<unsigned char>(data.labels[i]);
    for (std::size_t k = 0; k < 3072; ++k) {
      const float v = std::clamp(img.values[k], 0.0f, 1.0f);
      rec[1 + k] = static_cast<unsigned char>(std::lround(v * 255.0f));
    }
    out.write(reinterpret_cast<const char*>(rec.data()), kCifarRecordBytes);
  }
}

Dataset load(const DatasetSource& source, std::uint64_t seed) {
  Dataset data;
  data.num_classes = source.num_classes;
  data.class_names = source.class_names;
  switch (source.format) {
    case Format::kCifarBinary: {
      const fs::path dir(source.path);
      if (fs::is_regular_file(dir)) {
        data.train = read_cifar_batch(dir.string(), source.num_classes);
        break;
      }
      if (!fs::is_directory(dir)) throw FormatError(source.path + ": no such directory");
      std::vector<fs::path> batches;
      for (const auto& e : fs::directory_iterator(dir)) {
        const auto name = e.path().filename().string();
        if (name.rfind("data_batch_", 0) == 0 && e.path().extension() == ".bin") {
          batches.push_back(e.path());
        }
      }
      std::sort(batches.begin(), batches.end());
      if (batches.empty()) throw FormatError(source.path + ": no data_batch_*.bin files");
      for (const auto& b : batches) {
        auto part = read_cifar_batch(b.string(), source.num_classes);
        std::move(part.images.begin(), part.images.end(), std::back_inserter(data.train.images));
        data.train.labels.insert(data.train.labels.end(), part.labels.begin(), part.labels.end());
      }
      const fs::path test = dir / "test_batch.bin";
      if (fs::exists(test)) data.test = read_cifar_batch(test.string(), source.num_classes);
      const fs::path meta = dir / "batches.meta.txt";
      if (data.class_names.empty() && fs::exists(meta)) {
        std::ifstream in(meta);
        std::string line;
        while (std::getline(in, line)) {
          line = trim(line);
          if (!line.empty()) data.class_names.push_back(line);
        }
      }
      break;
    }
    case Format::kImageDir: {
      const fs::path root(source.path);
      if (!fs::is_directory(root)) throw FormatError(source.path + ": no such directory");
      std::vector<std::string> names = source.class_names;
      if (fs::is_directory(root / "train")) {
        load_items(list_split(root / "train", names), source.num_classes, data.train);
        if (fs::is_directory(root / "test")) {
          load_items(list_split(root / "test", names), source.num_classes, data.test);
        }
      } else {
        auto items = list_split(root, names);
        std::vector<std::pair<fs::path, int>> train, test;
        std::map<int, int> seen;
        for (auto& item : items) {
          ((seen[item.second]++ % 5 == 4) ? test : train).push_back(item);
        }
        load_items(train, source.num_classes, data.train);
        load_items(test, source.num_classes, data.test);
      }
      data.class_names = names;
      if (!names.empty() && static_cast<int>(names.size()) != source.num_classes) {
        throw FormatError(source.path + ": found " + std::to_string(names.size()) +
                          " classes, declared " + std::to_string(source.num_classes));
      }
      break;
    }
    case Format::kSynthetic:
      data = make_synthetic(source.num_classes, source.train_per_class > 0 ? source.train_per_class : 500,
                            source.test_per_class > 0 ? source.test_per_class : 100, seed);
      break;
  }
  cap_per_class(data.train, source.train_per_class, data.num_classes);
  cap_per_class(data.test, source.test_per_class, data.num_classes);
  for (const auto& img : data.train.images) {
    if (img.height % 2 != 0 || img.width % 2 != 0) {
      throw DimensionError("dataset images must have even sides");
    }
  }
  if (data.class_names.empty()) {
    for (int c = 0; c < data.num_classes; ++c) data.class_names.push_back("class_" + std::to_string(c));
  }
  return data;
}

void compute_normalization(Dataset& data) {
  std::array<double, 3> sum{}, sq{};
  std::size_t count = 0;
  for (const auto& img : data.train.images) {
    for (int ch = 0; ch < 3; ++ch) {
      for (float v : img.channel(ch)) {
        sum[ch] += v;
        sq[ch] += static_cast<double>(v) * v;
      }
    }
    count += img.plane_size();
  }
  if (count == 0) return;
  for (int ch = 0; ch < 3; ++ch) {
    const double mean = sum[ch] / static_cast<double>(count);
    const double var = std::max(sq[ch] / static_cast<double>(count) - mean * mean, 1e-12);
    data.mean[ch] = static_cast<float>(mean);
    data.stddev[ch] = static_cast<float>(std::sqrt(var));
  }
}

void normalize(Dataset& data) {
  normalize_split(data.train, data.mean, data.stddev);
  normalize_split(data.test, data.mean, data.stddev);
}

Dataset make_synthetic(int num_classes, int train_per_class, int test_per_class,
                       std::uint64_t seed, int size) {
  struct ClassStyle {
    double theta, freq;
    std::array<double, 3> fg, bg;
    double blob_x, blob_y, blob_r;
  };
  Rng style_rng(Rng::derive(seed, 1000));
  std::vector<ClassStyle> styles(num_classes);
  for (int c = 0; c < num_classes; ++c) {
    auto& s = styles[c];
    s.theta = std::numbers::pi * (c + 0.5 * style_rng.uniform()) / num_classes;
    s.freq = 0.04 + 0.14 * style_rng.uniform();
    for (int k = 0; k < 3; ++k) {
      s.fg[k] = 0.25 + 0.5 * style_rng.uniform();
      s.bg[k] = 0.25 + 0.5 * style_rng.uniform();
    }
    s.blob_x = 0.3 + 0.4 * style_rng.uniform();
    s.blob_y = 0.3 + 0.4 * style_rng.uniform();
    s.blob_r = 0.18 + 0.17 * style_rng.uniform();
  }

  const auto render = [&](int c, Rng& rng) {
    const auto& s = styles[c];
    // a weaker grating from a random other class acts as a distractor
    const auto& d = styles[rng.below(num_classes)];
    const double phase = 2 * std::numbers::pi * rng.uniform();
    const double dphase = 2 * std::numbers::pi * rng.uniform();
    const double theta = s.theta + 0.15 * rng.normal();
    const double freq = s.freq * (1.0 + 0.1 * rng.normal());
    const double contrast = 0.5 + 0.5 * rng.uniform();
    const double cx = (s.blob_x + 0.15 * rng.normal()) * size;
    const double cy = (s.blob_y + 0.15 * rng.normal()) * size;
    const double r = s.blob_r * size * (0.8 + 0.4 * rng.uniform());
    const double brightness = 0.8 + 0.4 * rng.uniform();
    Volume img(3, size, size);
    for (int y = 0; y < size; ++y) {
      for (int x = 0; x < size; ++x) {
        const double u = x * std::cos(theta) + y * std::sin(theta);
        const double ud = x * std::cos(d.theta) + y * std::sin(d.theta);
        const double g = 0.5 + 0.5 * std::sin(2 * std::numbers::pi * freq * u + phase);
        const double gd = 0.5 + 0.5 * std::sin(2 * std::numbers::pi * d.freq * ud + dphase);
        const double dist2 = (x - cx) * (x - cx) + (y - cy) * (y - cy);
        const double blob = std::exp(-dist2 / (2 * r * r));
        const double m = contrast * (0.6 * g + 0.4 * gd) * (0.35 + 0.65 * blob);
        for (int k = 0; k < 3; ++k) {
          const double v = brightness * (s.bg[k] * (1 - m) + s.fg[k] * m) + 0.12 * rng.normal();
          img.at(k, y, x) = static_cast<float>(std::clamp(v, 0.0, 1.0));
        }
      }
    }
    return img;
  };

  Dataset data;
  data.num_classes = num_classes;
  Rng train_rng(Rng::derive(seed, 1001)), test_rng(Rng::derive(seed, 1002));
  // interleave classes so per-class caps keep a balanced prefix
  for (int i = 0; i < train_per_class; ++i) {
    for (int c = 0; c < num_classes; ++c) {
      data.train.images.push_back(render(c, train_rng));
      data.train.labels.push_back(c);
    }
  }
  for (int i = 0; i < test_per_class; ++i) {
    for (int c = 0; c < num_classes; ++c) {
      data.test.images.push_back(render(c, test_rng));
      data.test.labels.push_back(c);
    }
  }
  for (int c = 0; c < num_classes; ++c) data.class_names.push_back("synthetic_" + std::to_string(c));
  return data;
}

SplitSpec SplitSpec::contiguous(int num_classes, int classes_per_task) {
  if (classes_per_task <= 0 || num_classes % classes_per_task != 0) {
    throw ConfigError("split: " + std::to_string(num_classes) + " classes cannot be divided into groups of " +
                      std::to_string(classes_per_task));
  }
  SplitSpec spec;
  for (int c = 0; c < num_classes; c += classes_per_task) {
    std::vector<int> group;
    for (int k = 0; k < classes_per_task; ++k) group.push_back(c + k);
    spec.tasks.push_back(group);
  }
  return spec;
}

SplitSpec SplitSpec::parse(const std::string& text) {
  SplitSpec spec;
  std::stringstream tasks(text);
  std::string task;
  while (std::getline(tasks, task, ';')) {
    std::vector<int> group;
    std::stringstream classes(task);
    std::string cls;
    while (std::getline(classes, cls, ',')) {
      cls = trim(cls);
      if (cls.empty()) continue;
      std::size_t used = 0;
      int v = 0;
      try {
        v = std::stoi(cls, &used);
      } catch (const std::exception&) {
        used = 0;
      }
      if (used != cls.size()) throw ConfigError("split: '" + cls + "' is not a class id");
      group.push_back(v);
    }
    if (group.empty()) throw ConfigError("split: empty task in '" + text + "'");
    spec.tasks.push_back(group);
  }
  if (spec.tasks.empty()) throw ConfigError("split: no tasks in '" + text + "'");
  return spec;
}

std::string SplitSpec::to_string() const {
  std::string out;
  for (std::size_t t = 0; t < tasks.size(); ++t) {
    if (t) out += ';';
    for (std::size_t k = 0; k < tasks[t].size(); ++k) {
      if (k) out += ',';
      out += std::to_string(tasks[t][k]);
    }
  }
  return out;
}

TaskStream split_tasks(const Dataset& data, const SplitSpec& spec, std::uint64_t seed) {
  TaskStream stream;
  stream.num_classes = data.num_classes;
  stream.task_of_class.assign(data.num_classes, -1);
  for (std::size_t t = 0; t < spec.tasks.size(); ++t) {
    for (int c : spec.tasks[t]) {
      if (c < 0 || c >= data.num_classes) {
        throw ConfigError("split: class " + std::to_string(c) + " is outside the dataset's " +
                          std::to_string(data.num_classes) + " classes");
      }
      if (stream.task_of_class[c] != -1) {
        throw ConfigError("split: class " + std::to_string(c) + " appears in more than one task");
      }
      stream.task_of_class[c] = static_cast<int>(t);
    }
  }
  for (int c = 0; c < data.num_classes; ++c) {
    if (stream.task_of_class[c] == -1) {
      throw ConfigError("split: class " + std::to_string(c) + " is missing from the split");
    }
  }
  stream.tasks.resize(spec.tasks.size());
  for (std::size_t t = 0; t < spec.tasks.size(); ++t) stream.tasks[t].classes = spec.tasks[t];
  for (std::size_t i = 0; i < data.train.labels.size(); ++i) {
    stream.tasks[stream.task_of_class[data.train.labels[i]]].train.push_back(i);
  }
  for (std::size_t i = 0; i < data.test.labels.size(); ++i) {
    stream.tasks[stream.task_of_class[data.test.labels[i]]].test.push_back(i);
  }
  Rng rng(Rng::derive(seed, 2000));
  for (auto& task : stream.tasks) {
    auto& idx = task.train;
    for (std::size_t i = idx.size(); i > 1; --i) std::swap(idx[i - 1], idx[rng.below(i)]);
  }
  return stream;
}

AugmentParams draw_augment(Rng& rng) {
  AugmentParams p;
  p.offset_y = 2 * static_cast<int>(rng.below(kPixelPad + 1));
  p.offset_x = 2 * static_cast<int>(rng.below(kPixelPad + 1));
  p.flip = rng.uniform() < 0.5;
  return p;
}

Volume augment(const Volume& sample, Space space, const AugmentParams& params, bool allow_flip) {
  const int pad = space == Space::kPixel ? kPixelPad : kPixelPad / 2;
  const int oy = space == Space::kPixel ? params.offset_y : params.offset_y / 2;
  const int ox = space == Space::kPixel ? params.offset_x : params.offset_x / 2;
  const bool flip = allow_flip && params.flip;
  Volume out(sample.channels, sample.height, sample.width);
  for (int ch = 0; ch < sample.channels; ++ch) {
    for (int y = 0; y < sample.height; ++y) {
      const int sy = y + oy - pad;
      if (sy < 0 || sy >= sample.height) continue;
      for (int x = 0; x < sample.width; ++x) {
        const int cx = flip ? sample.width - 1 - x : x;
        const int sx = cx + ox - pad;
        if (sx < 0 || sx >= sample.width) continue;
        out.at(ch, y, x) = sample.at(ch, sy, sx);
      }
    }
  }
  return out;
}

Volume augment(const Volume& sample, Space space, Rng& rng, bool allow_flip) {
  return augment(sample, space, draw_augment(rng), allow_flip);
}

}  // namespace clfd::bench
