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

#include <CLI11.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>

#include "clfd/bench.hpp"
#include "clfd/cffs.hpp"
#include "clfd/config.hpp"
#include "clfd/errors.hpp"
#include "clfd/loop.hpp"
#include "clfd/replay.hpp"
#include "clfd/report.hpp"

namespace fs = std::filesystem;
using namespace clfd;

namespace {

constexpr int kConfigExit = 2;

config::RunConfig load_config(const std::string& path, const std::vector<std::string>& overrides) {
  auto cfg = config::load(path);
  for (const auto& o : overrides) config::apply_override(cfg, o);
  config::validate(cfg);
  return cfg;
}

std::vector<std::uint64_t> parse_seeds(const std::string& text) {
  std::vector<std::uint64_t> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!item.empty()) out.push_back(std::stoull(item));
  }
  if (out.empty()) throw ConfigError("--seeds: no seeds given");
  return out;
}

std::string output_root(const config::RunConfig& cfg, const std::string& flag) {
  if (!flag.empty()) return flag;
  if (const char* env = std::getenv("CLFD_OUT"); env && *env) return env;
  return cfg.output_dir;
}

int cmd_run(const std::string& cfg_path, const std::vector<std::string>& overrides,
            const std::vector<std::uint64_t>& seeds_flag, const std::string& out_flag,
            const std::string& resume) {
  auto cfg = load_config(cfg_path, overrides);
  const auto seeds = seeds_flag.empty() ? cfg.seeds : seeds_flag;
  const fs::path run_dir = fs::path(output_root(cfg, out_flag)) / cfg.run_id;
  std::cout << "run " << cfg.run_id << ": " << cfg.data.num_classes << " classes, strategy "
            << strategies::kind_name(cfg.strategy.kind) << ", encoder "
            << (cfg.ffe_enabled ? "on" : "off") << ", selection " << (cfg.cffs_enabled ? "on" : "off")
            << ", " << cfg.epochs << " epochs/task\n";
  const auto data = loop::prepare_dataset(cfg);
  std::cout << "data: " << data.train.images.size() << " train / " << data.test.images.size()
            << " test images (" << bench::format_name(cfg.data.format) << ")\n";
  std::vector<metrics::SummaryRow> rows;
  for (auto seed : seeds) {
    const fs::path dir = run_dir / ("seed" + std::to_string(seed));
    auto result = loop::run_sequence(cfg, data, seed, dir.string(), resume);
    const auto& s = result.summary;
    std::cout << std::fixed << std::setprecision(2) << "  seed " << seed << ": Class-IL ACC "
              << 100 * s.acc_final << "%, Task-IL ACC "
              << 100 * metrics::average_accuracy(result.task_il, result.task_il.tasks())
              << "%, FF " << 100 * s.ff_final << ", wall " << s.wall_s << " s, step "
              << 1e3 * result.efficiency.mean_step_s() << " ms -> " << dir.string() << '\n';
    rows.push_back(s);
  }
  auto all = rows;
  const auto agg = report::aggregate_rows(cfg.run_id, rows);
  all.insert(all.end(), agg.begin(), agg.end());
  metrics::write_summary_csv(all, (run_dir / "summary.csv").string());
  std::cout << std::fixed << std::setprecision(2) << "mean over " << rows.size()
            << " seed(s): Class-IL ACC " << 100 * agg[0].acc_final << " +- " << 100 * agg[1].acc_final
            << "%, FF " << 100 * agg[0].ff_final << " +- " << 100 * agg[1].ff_final << '\n';
  return 0;
}

int cmd_compare(const std::vector<std::string>& dirs, const std::string& csv, const std::string& series,
                const std::string& heatmap, const std::string& svg, bool ff_clip) {
  std::vector<report::RunSummary> runs;
  for (const auto& d : dirs) runs.push_back(report::load_run(d, ff_clip));
  std::cout << report::compare_table(runs);
  if (!csv.empty()) report::write_compare_csv(runs, csv);
  if (!series.empty()) report::write_series_csv(runs, series);
  if (!heatmap.empty()) report::write_heatmap_csv(runs, heatmap);
  if (!svg.empty()) report::write_series_svg(runs, svg);
  return 0;
}

int cmd_inspect(const std::string& dir, int top_k, const std::string& csv) {
  const fs::path p(dir);
  const fs::path file = fs::is_directory(p) ? p / "counter.csv" : p;
  if (!fs::exists(file)) throw FormatError("no counter export at " + file.string());
  const auto counter = cffs::read_counter_csv(file.string());
  if (top_k <= 0) top_k = cffs::selection_size(counter.features(), 0.6);
  const auto rep = report::inspect_counter(counter, top_k);
  std::cout << report::format_counter_report(rep);
  if (!csv.empty()) report::write_counter_report_csv(rep, csv);
  return 0;
}

int cmd_validate(const std::string& path, const std::vector<std::string>& overrides, bool show) {
  const auto cfg = load_config(path, overrides);
  std::cout << path << ": ok (digest " << std::hex << config::digest(cfg) << std::dec << ")\n";
  if (show) std::cout << config::dump(cfg);
  return 0;
}

int cmd_export_buffer(const std::string& path, const std::string& out_dir) {
  const auto buffer = replay::ReservoirBuffer::load(path);
  fs::create_directories(out_dir);
  std::ofstream index(fs::path(out_dir) / "index.csv");
  index << "# schema: clfd.buffer_index/1\n";
  index << "slot,label,task_id,channels,height,width,logits\n";
  index.precision(9);
  for (std::size_t i = 0; i < buffer.size(); ++i) {
    const auto& e = buffer.entry(i);
    index << i << ',' << e.label << ',' << e.task_id << ',' << e.map.channels << ',' << e.map.height
          << ',' << e.map.width << ',';
    if (e.logits) {
      for (std::size_t k = 0; k < e.logits->size(); ++k) index << (k ? " " : "") << (*e.logits)[k];
    }
    index << '\n';
    // per-map min/max scaled preview, channels as RGB
    const auto& m = e.map;
    float lo = m.values.empty() ? 0.f : m.values[0], hi = lo;
    for (float v : m.values) {
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
    const float span = hi > lo ? hi - lo : 1.0f;
    std::ofstream ppm(fs::path(out_dir) / ("map_" + std::to_string(i) + ".ppm"), std::ios::binary);
    ppm << "P6\n" << m.width << ' ' << m.height << "\n255\n";
    for (int r = 0; r < m.height; ++r) {
      for (int c = 0; c < m.width; ++c) {
        for (int ch = 0; ch < 3; ++ch) {
          const float v = m.at(std::min(ch, m.channels - 1), r, c);
          ppm.put(static_cast<char>(static_cast<unsigned char>(255.0f * (v - lo) / span + 0.5f)));
        }
      }
    }
  }
  std::cout << "exported " << buffer.size() << " of " << buffer.capacity() << " slots (seen "
            << buffer.seen() << ", " << buffer.memory_footprint() << " bytes) to " << out_dir << '\n';
  return 0;
}

int cmd_synth(const std::string& out_dir, int classes, int train_pc, int test_pc, std::uint64_t seed) {
  const auto data = bench::make_synthetic(classes, train_pc, test_pc, seed);
  fs::create_directories(out_dir);
  const fs::path dir(out_dir);
  // five training batches, as in the reference layout
  const std::size_t n = data.train.images.size();
  for (int b = 0; b < 5; ++b) {
    bench::LabeledImages part;
    for (std::size_t i = b * n / 5; i < (b + 1) * n / 5; ++i) {
      part.images.push_back(data.train.images[i]);
      part.labels.push_back(data.train.labels[i]);
    }
    bench::write_cifar_batch(part, (dir / ("data_batch_" + std::to_string(b + 1) + ".bin")).string());
  }
  bench::write_cifar_batch(data.test, (dir / "test_batch.bin").string());
  std::ofstream meta(dir / "batches.meta.txt");
  for (const auto& name : data.class_names) meta << name << '\n';
  std::cout << "wrote " << n << " train / " << data.test.images.size() << " test records to "
            << out_dir << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"clfd: continual learning in the wavelet domain"};
  app.require_subcommand(1);

  std::string cfg_path, out_flag, resume, seeds_text;
  std::vector<std::string> overrides;
  std::uint64_t seed = 0;
  auto* run = app.add_subcommand("run", "train a task sequence");
  run->add_option("--config,-c", cfg_path, "config file")->required()->check(CLI::ExistingFile);
  auto* seed_opt = run->add_option("--seed", seed, "single seed");
  run->add_option("--seeds", seeds_text, "comma-separated seeds")->excludes(seed_opt);
  run->add_option("--set", overrides, "key=value override (repeatable)");
  run->add_option("--out", out_flag, "output root (default: $CLFD_OUT, then run.output_dir)");
  run->add_option("--resume", resume, "state directory to resume from");

  std::vector<std::string> dirs;
  std::string csv, series, heatmap, svg;
  bool ff_clip = false;
  auto* compare = app.add_subcommand("compare", "compare completed runs");
  compare->add_option("runs", dirs, "run or seed directories")->required()->expected(2, -1);
  compare->add_option("--csv", csv, "comparison table CSV");
  compare->add_option("--series", series, "per-task accuracy series CSV");
  compare->add_option("--heatmap", heatmap, "seed-mean accuracy matrices CSV");
  compare->add_option("--svg", svg, "Class-IL series chart");
  compare->add_flag("--ff-clip", ff_clip, "clip per-task forgetting at zero");

  std::string inspect_dir, inspect_csv;
  int top_k = 0;
  auto* inspect = app.add_subcommand("inspect-counter", "selection counter report");
  inspect->add_option("run", inspect_dir, "seed directory or counter CSV")->required();
  inspect->add_option("--top-k", top_k, "features per class for overlap (default floor(0.6 N))");
  inspect->add_option("--csv", inspect_csv, "pairwise overlap CSV");

  std::string validate_path;
  bool show = false;
  std::vector<std::string> validate_overrides;
  auto* validate = app.add_subcommand("validate-config", "check a config file");
  validate->add_option("config", validate_path, "config file")->required()->check(CLI::ExistingFile);
  validate->add_option("--set", validate_overrides, "key=value override (repeatable)");
  validate->add_flag("--show", show, "print every resolved key");

  std::string buffer_path, buffer_out;
  auto* export_buffer = app.add_subcommand("export-buffer", "dump a buffer checkpoint");
  export_buffer->add_option("buffer", buffer_path, "buffer.bin")->required()->check(CLI::ExistingFile);
  export_buffer->add_option("--out", buffer_out, "output directory")->required();

  std::string synth_out;
  int synth_classes = 10, synth_train = 500, synth_test = 100;
  std::uint64_t synth_seed = 0;
  auto* synth = app.add_subcommand("synth-cifar", "write a procedural dataset in CIFAR binary layout");
  synth->add_option("--out", synth_out, "output directory")->required();
  synth->add_option("--classes", synth_classes, "class count");
  synth->add_option("--train-per-class", synth_train, "training images per class");
  synth->add_option("--test-per-class", synth_test, "test images per class");
  synth->add_option("--seed", synth_seed, "generator seed");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*run) {
      std::vector<std::uint64_t> seeds;
      if (!seeds_text.empty()) seeds = parse_seeds(seeds_text);
      else if (*seed_opt) seeds = {seed};
      return cmd_run(cfg_path, overrides, seeds, out_flag, resume);
    }
    if (*compare) return cmd_compare(dirs, csv, series, heatmap, svg, ff_clip);
    if (*inspect) return cmd_inspect(inspect_dir, top_k, inspect_csv);
    if (*validate) return cmd_validate(validate_path, validate_overrides, show);
    if (*export_buffer) return cmd_export_buffer(buffer_path, buffer_out);
    if (*synth) return cmd_synth(synth_out, synth_classes, synth_train, synth_test, synth_seed);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kConfigExit;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
