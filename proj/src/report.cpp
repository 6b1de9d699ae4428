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

#include "clfd/report.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <limits>
#include <numeric>
#include <sstream>

#include "clfd/errors.hpp"

namespace clfd::report {
namespace fs = std::filesystem;
namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

double meta_double(const std::map<std::string, std::string>& m, const std::string& key) {
  const auto it = m.find(key);
  if (it == m.end()) return std::numeric_limits<double>::quiet_NaN();
  try {
    return std::stod(it->second);
  } catch (const std::exception&) {
    return std::numeric_limits<double>::quiet_NaN();
  }
}

bool is_seed_dir(const fs::path& p) {
  return fs::exists(p / "matrix_class_il.csv") && fs::exists(p / "summary.csv");
}

metrics::AccuracyMatrix mean_matrix(const std::vector<const metrics::AccuracyMatrix*>& ms) {
  const int tasks = ms.front()->tasks();
  metrics::AccuracyMatrix out(tasks);
  for (int t = 1; t <= tasks; ++t) {
    for (int tau = 1; tau <= t; ++tau) {
      double sum = 0.0;
      int n = 0;
      for (const auto* m : ms) {
        if (m->defined(t, tau)) {
          sum += m->at(t, tau);
          ++n;
        }
      }
      if (n > 0) out.set(t, tau, sum / n);
    }
  }
  return out;
}

std::string pct(const MeanStd& v) {
  std::ostringstream s;
  s << std::fixed << std::setprecision(2) << 100.0 * v.mean << " +- " << 100.0 * v.std;
  return s.str();
}

std::string delta(double v, double base, double scale, int precision) {
  std::ostringstream s;
  const double d = (v - base) * scale;
  s << std::showpos << std::fixed << std::setprecision(precision) << (d == 0.0 ? 0.0 : d);
  return s.str();
}

std::string csv_escape(const std::string& s) {
  if (s.find_first_of(",\"") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) out += c == '"' ? std::string("\"\"") : std::string(1, c);
  return out + "\"";
}

std::string xml_escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '&': out += "&amp;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

// Single-task (joint) runs are reference points and may sit next to any
// sequence; sequential runs must agree on the task count.
void check_comparable(const std::vector<RunSummary>& runs) {
  if (runs.size() < 2) throw PreconditionError("compare needs at least two runs");
  const RunSummary* first = nullptr;
  for (const auto& r : runs) {
    if (r.tasks == 1) continue;
    if (!first) first = &r;
    if (r.tasks != first->tasks) {
      throw PreconditionError("compare: run '" + r.name + "' has " + std::to_string(r.tasks) +
                              " tasks, '" + first->name + "' has " + std::to_string(first->tasks));
    }
  }
}

}  // namespace

MeanStd mean_std(const std::vector<double>& values) {
  MeanStd out;
  if (values.empty()) return out;
  out.mean = std::accumulate(values.begin(), values.end(), 0.0) / values.size();
  if (values.size() > 1) {
    double sq = 0.0;
    for (double v : values) sq += (v - out.mean) * (v - out.mean);
    out.std = std::sqrt(sq / (values.size() - 1));
  }
  return out;
}

std::map<std::string, std::string> read_metadata(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open " + path);
  std::map<std::string, std::string> out;
  std::string line;
  while (std::getline(in, line)) {
    const auto hash = line.find('#');
    line = trim(hash == std::string::npos ? line : line.substr(0, hash));
    const auto eq = line.find('=');
    if (line.empty() || eq == std::string::npos) continue;
    out[trim(line.substr(0, eq))] = trim(line.substr(eq + 1));
  }
  return out;
}

SeedRun load_seed_run(const std::string& dir) {
  const fs::path p(dir);
  SeedRun run;
  run.dir = dir;
  run.class_il = metrics::read_matrix_csv((p / "matrix_class_il.csv").string());
  run.task_il = metrics::read_matrix_csv((p / "matrix_task_il.csv").string());
  const auto rows = metrics::read_summary_csv((p / "summary.csv").string());
  if (rows.empty()) throw FormatError(dir + ": empty summary");
  run.summary = rows.front();
  if (fs::exists(p / "metadata.txt")) run.metadata = read_metadata((p / "metadata.txt").string());
  const auto it = run.metadata.find("seed");
  if (it != run.metadata.end()) run.seed = std::stoull(it->second);
  return run;
}

RunSummary load_run(const std::string& dir, bool ff_clip) {
  const fs::path p(dir);
  RunSummary out;
  out.name = p.filename().empty() ? p.parent_path().filename().string() : p.filename().string();
  if (is_seed_dir(p)) {
    out.seeds.push_back(load_seed_run(dir));
  } else {
    if (!fs::is_directory(p)) throw FormatError(dir + ": not a run directory");
    std::vector<fs::path> subdirs;
    for (const auto& e : fs::directory_iterator(p)) {
      if (e.is_directory() && e.path().filename().string().rfind("seed", 0) == 0 && is_seed_dir(e.path())) {
        subdirs.push_back(e.path());
      }
    }
    std::sort(subdirs.begin(), subdirs.end());
    for (const auto& s : subdirs) out.seeds.push_back(load_seed_run(s.string()));
  }
  if (out.seeds.empty()) throw FormatError(dir + ": no completed seed runs found");
  out.tasks = out.seeds.front().class_il.tasks();
  std::vector<const metrics::AccuracyMatrix*> cil, til;
  std::vector<double> acc_c, acc_t, ff_c, ff_t, trade, flops, wall, step, mem;
  for (const auto& s : out.seeds) {
    if (s.class_il.tasks() != out.tasks) throw FormatError(dir + ": seeds disagree on task count");
    cil.push_back(&s.class_il);
    til.push_back(&s.task_il);
    acc_c.push_back(metrics::average_accuracy(s.class_il, out.tasks));
    acc_t.push_back(metrics::average_accuracy(s.task_il, out.tasks));
    if (out.tasks >= 2) {
      ff_c.push_back(metrics::final_forgetting(s.class_il, out.tasks, ff_clip));
      ff_t.push_back(metrics::final_forgetting(s.task_il, out.tasks, ff_clip));
      trade.push_back(metrics::stability_plasticity(s.class_il, out.tasks).tradeoff);
    }
    flops.push_back(s.summary.flops);
    wall.push_back(s.summary.wall_s);
    step.push_back(meta_double(s.metadata, "efficiency.mean_step_s"));
    mem.push_back(static_cast<double>(s.summary.peak_mem_b));
  }
  out.acc_class_il = mean_std(acc_c);
  out.acc_task_il = mean_std(acc_t);
  const double nan = std::numeric_limits<double>::quiet_NaN();
  out.ff_class_il = ff_c.empty() ? MeanStd{nan, nan} : mean_std(ff_c);
  out.ff_task_il = ff_t.empty() ? MeanStd{nan, nan} : mean_std(ff_t);
  out.tradeoff = trade.empty() ? MeanStd{nan, nan} : mean_std(trade);
  out.flops = mean_std(flops);
  out.wall_s = mean_std(wall);
  out.mean_step_s = mean_std(step);
  out.peak_mem_b = mean_std(mem);
  out.mean_class_il = mean_matrix(cil);
  out.mean_task_il = mean_matrix(til);
  for (int t = 1; t <= out.tasks; ++t) {
    out.series_class_il.push_back(metrics::average_accuracy(out.mean_class_il, t));
    out.series_task_il.push_back(metrics::average_accuracy(out.mean_task_il, t));
  }
  return out;
}

std::vector<metrics::SummaryRow> aggregate_rows(const std::string& run_id,
                                                const std::vector<metrics::SummaryRow>& rows) {
  const auto col = [&](auto field) {
    std::vector<double> v;
    for (const auto& r : rows) v.push_back(static_cast<double>(r.*field));
    return mean_std(v);
  };
  const auto acc = col(&metrics::SummaryRow::acc_final);
  const auto ff = col(&metrics::SummaryRow::ff_final);
  const auto s = col(&metrics::SummaryRow::stability);
  const auto p = col(&metrics::SummaryRow::plasticity);
  const auto tr = col(&metrics::SummaryRow::tradeoff);
  const auto fl = col(&metrics::SummaryRow::flops);
  const auto w = col(&metrics::SummaryRow::wall_s);
  const auto m = col(&metrics::SummaryRow::peak_mem_b);
  metrics::SummaryRow mean{run_id + "/mean", acc.mean, ff.mean, s.mean, p.mean, tr.mean,
                           fl.mean, w.mean, static_cast<std::uint64_t>(m.mean)};
  metrics::SummaryRow sd{run_id + "/std", acc.std, ff.std, s.std, p.std, tr.std,
                         fl.std, w.std, static_cast<std::uint64_t>(m.std)};
  return {mean, sd};
}

std::string compare_table(const std::vector<RunSummary>& runs) {
  check_comparable(runs);
  std::ostringstream out;
  const auto& base = runs.front();
  std::size_t name_w = 4;
  for (const auto& r : runs) name_w = std::max(name_w, r.name.size());
  out << std::left << std::setw(static_cast<int>(name_w)) << "run" << "  seeds  "
      << std::setw(18) << "Class-IL ACC %" << std::setw(9) << "delta" << std::setw(18)
      << "Task-IL ACC %" << std::setw(9) << "delta" << std::setw(18) << "Class-IL FF %"
      << std::setw(10) << "tradeoff" << std::setw(12) << "GFLOPs" << std::setw(10) << "wall s"
      << std::setw(10) << "step ms" << '\n';
  for (const auto& r : runs) {
    std::ostringstream flops, wall, step, trade;
    flops << std::fixed << std::setprecision(1) << r.flops.mean / 1e9;
    wall << std::fixed << std::setprecision(1) << r.wall_s.mean;
    step << std::fixed << std::setprecision(2) << r.mean_step_s.mean * 1e3;
    trade << std::fixed << std::setprecision(4) << r.tradeoff.mean;
    out << std::left << std::setw(static_cast<int>(name_w)) << r.name << "  " << std::setw(5)
        << r.seeds.size() << "  " << std::setw(18) << pct(r.acc_class_il) << std::setw(9)
        << delta(r.acc_class_il.mean, base.acc_class_il.mean, 100.0, 2) << std::setw(18)
        << pct(r.acc_task_il) << std::setw(9)
        << delta(r.acc_task_il.mean, base.acc_task_il.mean, 100.0, 2) << std::setw(18)
        << pct(r.ff_class_il) << std::setw(10) << trade.str() << std::setw(12) << flops.str()
        << std::setw(10) << wall.str() << std::setw(10) << step.str() << '\n';
  }
  return out.str();
}

void write_compare_csv(const std::vector<RunSummary>& runs, const std::string& path) {
  check_comparable(runs);
  std::ofstream out(path);
  if (!out) throw FormatError("cannot open " + path + " for writing");
  out.precision(17);
  out << "# schema: clfd.compare/1\n";
  out << "run,seeds,tasks,acc_class_il,acc_class_il_std,acc_task_il,acc_task_il_std,ff_class_il,"
         "ff_task_il,tradeoff,flops,wall_s,mean_step_s,peak_mem_b,delta_acc_class_il,delta_acc_task_il\n";
  const auto& base = runs.front();
  for (const auto& r : runs) {
    out << csv_escape(r.name) << ',' << r.seeds.size() << ',' << r.tasks << ',' << r.acc_class_il.mean
        << ',' << r.acc_class_il.std << ',' << r.acc_task_il.mean << ',' << r.acc_task_il.std << ','
        << r.ff_class_il.mean << ',' << r.ff_task_il.mean << ',' << r.tradeoff.mean << ','
        << r.flops.mean << ',' << r.wall_s.mean << ',' << r.mean_step_s.mean << ','
        << r.peak_mem_b.mean << ',' << r.acc_class_il.mean - base.acc_class_il.mean << ','
        << r.acc_task_il.mean - base.acc_task_il.mean << '\n';
  }
}

void write_series_csv(const std::vector<RunSummary>& runs, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw FormatError("cannot open " + path + " for writing");
  out.precision(17);
  out << "# schema: clfd.series/1\n";
  out << "run,task,acc_class_il,acc_task_il\n";
  for (const auto& r : runs) {
    for (int t = 1; t <= r.tasks; ++t) {
      out << csv_escape(r.name) << ',' << t << ',' << r.series_class_il[t - 1] << ','
          << r.series_task_il[t - 1] << '\n';
    }
  }
}

void write_heatmap_csv(const std::vector<RunSummary>& runs, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw FormatError("cannot open " + path + " for writing");
  out.precision(17);
  out << "# schema: clfd.heatmap/1\n";
  out << "run,t,tau,r_class_il,r_task_il\n";
  for (const auto& r : runs) {
    for (int t = 1; t <= r.tasks; ++t) {
      for (int tau = 1; tau <= t; ++tau) {
        out << csv_escape(r.name) << ',' << t << ',' << tau << ',' << r.mean_class_il.at(t, tau)
            << ',' << r.mean_task_il.at(t, tau) << '\n';
      }
    }
  }
}

void write_series_svg(const std::vector<RunSummary>& runs, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw FormatError("cannot open " + path + " for writing");
  const double w = 640, h = 400, left = 60, right = 170, top = 30, bottom = 50;
  const double pw = w - left - right, ph = h - top - bottom;
  int tasks = 1;
  for (const auto& r : runs) tasks = std::max(tasks, r.tasks);
  const auto px = [&](int t) { return left + (tasks == 1 ? pw / 2 : pw * (t - 1) / (tasks - 1)); };
  const auto py = [&](double acc) { return top + ph * (1.0 - acc); };
  static const char* colors[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b"};
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << w << "\" height=\"" << h
      << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  out << "<text x=\"" << left << "\" y=\"18\">Class-IL average accuracy after each task</text>\n";
  for (int g = 0; g <= 10; g += 2) {
    const double y = py(g / 10.0);
    out << "<line x1=\"" << left << "\" y1=\"" << y << "\" x2=\"" << left + pw << "\" y2=\"" << y
        << "\" stroke=\"#ddd\"/>\n";
    out << "<text x=\"" << left - 8 << "\" y=\"" << y + 4 << "\" text-anchor=\"end\">" << g * 10
        << "</text>\n";
  }
  for (int t = 1; t <= tasks; ++t) {
    out << "<text x=\"" << px(t) << "\" y=\"" << top + ph + 18 << "\" text-anchor=\"middle\">" << t
        << "</text>\n";
  }
  out << "<text x=\"" << left + pw / 2 << "\" y=\"" << h - 10 << "\" text-anchor=\"middle\">task</text>\n";
  for (std::size_t i = 0; i < runs.size(); ++i) {
    const auto& r = runs[i];
    const char* color = colors[i % 6];
    out << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"2\" points=\"";
    for (int t = 1; t <= r.tasks; ++t) out << px(t) << ',' << py(r.series_class_il[t - 1]) << ' ';
    out << "\"/>\n";
    for (int t = 1; t <= r.tasks; ++t) {
      out << "<circle cx=\"" << px(t) << "\" cy=\"" << py(r.series_class_il[t - 1])
          << "\" r=\"3\" fill=\"" << color << "\"/>\n";
    }
    const double ly = top + 16 * (i + 1);
    out << "<line x1=\"" << w - right + 15 << "\" y1=\"" << ly - 4 << "\" x2=\"" << w - right + 35
        << "\" y2=\"" << ly - 4 << "\" stroke=\"" << color << "\" stroke-width=\"2\"/>\n";
    out << "<text x=\"" << w - right + 40 << "\" y=\"" << ly << "\">" << xml_escape(r.name)
        << "</text>\n";
  }
  out << "</svg>\n";
}

CounterReport inspect_counter(const cffs::SelectionCounter& counter, int top_k) {
  CounterReport rep;
  rep.classes = counter.classes();
  rep.features = counter.features();
  rep.top_k = std::clamp(top_k, 1, std::max(1, rep.features));
  for (int c = 0; c < rep.classes; ++c) {
    const auto row = counter.row(c);
    const double mx = static_cast<double>(counter.row_max(c));
    std::vector<double> norm(row.size(), 0.0);
    for (std::size_t j = 0; j < row.size(); ++j) norm[j] = mx > 0 ? static_cast<double>(row[j]) / mx : 0.0;
    rep.normalized.push_back(norm);
    rep.active.push_back(mx > 0);
    std::vector<int> order(row.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return row[a] > row[b]; });
    std::vector<int> top;
    for (int j : order) {
      if (static_cast<int>(top.size()) == rep.top_k || row[j] == 0) break;
      top.push_back(j);
    }
    std::sort(top.begin(), top.end());
    rep.top.push_back(top);
  }
  rep.overlap.assign(rep.classes, std::vector<double>(rep.classes, 0.0));
  for (int a = 0; a < rep.classes; ++a) {
    for (int b = 0; b < rep.classes; ++b) {
      const auto& ta = rep.top[a];
      const auto& tb = rep.top[b];
      const std::size_t denom = std::min(ta.size(), tb.size());
      if (denom == 0) continue;
      std::vector<int> common;
      std::set_intersection(ta.begin(), ta.end(), tb.begin(), tb.end(), std::back_inserter(common));
      rep.overlap[a][b] = static_cast<double>(common.size()) / static_cast<double>(denom);
    }
  }
  return rep;
}

std::string format_counter_report(const CounterReport& rep) {
  std::ostringstream out;
  out << "classes " << rep.classes << ", features " << rep.features << ", top-k " << rep.top_k << "\n\n";
  out << "normalized selection counts (row / row max), first 16 features:\n";
  for (int c = 0; c < rep.classes; ++c) {
    out << "  class " << std::setw(3) << c << (rep.active[c] ? " " : "*");
    for (int j = 0; j < std::min(rep.features, 16); ++j) {
      out << ' ' << std::fixed << std::setprecision(2) << rep.normalized[c][j];
    }
    out << '\n';
  }
  out << "\npairwise top-k overlap (%):\n       ";
  for (int b = 0; b < rep.classes; ++b) out << std::setw(6) << b;
  out << '\n';
  for (int a = 0; a < rep.classes; ++a) {
    out << "  " << std::setw(4) << a << ' ';
    for (int b = 0; b < rep.classes; ++b) {
      out << std::setw(6) << std::fixed << std::setprecision(1) << 100.0 * rep.overlap[a][b];
    }
    out << '\n';
  }
  bool any_inactive = false;
  for (bool a : rep.active) any_inactive = any_inactive || !a;
  if (any_inactive) out << "\n* class never selected\n";
  return out.str();
}

void write_counter_report_csv(const CounterReport& rep, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw FormatError("cannot open " + path + " for writing");
  out.precision(17);
  out << "# schema: clfd.counter_overlap/1\n";
  out << "class_a,class_b,overlap\n";
  for (int a = 0; a < rep.classes; ++a) {
    for (int b = 0; b < rep.classes; ++b) out << a << ',' << b << ',' << rep.overlap[a][b] << '\n';
  }
}

}  // namespace clfd::report
