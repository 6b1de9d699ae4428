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

#include <cmath>

#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "clfd/cffs.hpp"
#include "clfd/config.hpp"
#include "clfd/dwt.hpp"
#include "clfd/errors.hpp"
#include "clfd/ffe.hpp"
#include "clfd/loop.hpp"
#include "clfd/metrics.hpp"
#include "clfd/model.hpp"

namespace py = pybind11;

namespace {

using Array = py::array_t<float, py::array::c_style | py::array::forcecast>;
using Array64 = py::array_t<double, py::array::c_style | py::array::forcecast>;

clfd::Plane to_plane(const Array& a) {
  if (a.ndim() != 2) throw clfd::ShapeError("expected a 2-D array");
  clfd::Plane p(static_cast<int>(a.shape(0)), static_cast<int>(a.shape(1)));
  std::copy(a.data(), a.data() + a.size(), p.values.begin());
  return p;
}

Array from_plane(const clfd::Plane& p) {
  Array out({p.height, p.width});
  std::copy(p.values.begin(), p.values.end(), out.mutable_data());
  return out;
}

clfd::Volume to_volume(const Array& a) {
  if (a.ndim() != 3) throw clfd::ShapeError("expected a C x H x W array");
  clfd::Volume v(static_cast<int>(a.shape(0)), static_cast<int>(a.shape(1)), static_cast<int>(a.shape(2)));
  std::copy(a.data(), a.data() + a.size(), v.values.begin());
  return v;
}

Array from_volume(const clfd::Volume& v) {
  Array out({v.channels, v.height, v.width});
  std::copy(v.values.begin(), v.values.end(), out.mutable_data());
  return out;
}

// Lower-triangular T x T matrix; entries above the diagonal are ignored.
clfd::metrics::AccuracyMatrix to_matrix(const Array64& a) {
  if (a.ndim() != 2 || a.shape(0) != a.shape(1)) throw clfd::ShapeError("expected a square matrix");
  const int t = static_cast<int>(a.shape(0));
  clfd::metrics::AccuracyMatrix r(t);
  for (int i = 1; i <= t; ++i) {
    for (int j = 1; j <= i; ++j) r.set(i, j, a.at(i - 1, j - 1));
  }
  return r;
}

Array64 from_matrix(const clfd::metrics::AccuracyMatrix& r) {
  const int t = r.tasks();
  Array64 out({t, t});
  auto m = out.mutable_unchecked<2>();
  for (int i = 1; i <= t; ++i) {
    for (int j = 1; j <= t; ++j) m(i - 1, j - 1) = j <= i && r.defined(i, j) ? r.at(i, j) : std::nan("");
  }
  return out;
}

clfd::cffs::SelectionCounter to_counter(const py::array_t<std::uint64_t, py::array::c_style | py::array::forcecast>& a) {
  if (a.ndim() != 2) throw clfd::ShapeError("expected a classes x features counter");
  clfd::cffs::SelectionCounter c(static_cast<int>(a.shape(0)), static_cast<int>(a.shape(1)));
  std::copy(a.data(), a.data() + a.size(), c.raw().begin());
  return c;
}

}  // namespace

PYBIND11_MODULE(_clfd, m) {
  m.doc() = "Frequency-domain continual learning engine";

  py::register_exception<clfd::DimensionError>(m, "DimensionError", PyExc_ValueError);
  py::register_exception<clfd::ShapeError>(m, "ShapeError", PyExc_ValueError);
  py::register_exception<clfd::PreconditionError>(m, "PreconditionError", PyExc_ValueError);
  py::register_exception<clfd::FormatError>(m, "FormatError", PyExc_IOError);
  py::register_exception<clfd::ConfigError>(m, "ConfigError", PyExc_ValueError);

  m.def("haar_forward", [](const Array& plane) {
    const auto s = clfd::dwt::haar_forward(to_plane(plane));
    return py::make_tuple(from_plane(s.ll), from_plane(s.lh), from_plane(s.hl), from_plane(s.hh));
  }, py::arg("plane"), "Haar subbands (ll, lh, hl, hh) of a plane with even sides.");
  m.def("haar_inverse", [](const Array& ll, const Array& lh, const Array& hl, const Array& hh) {
    return from_plane(clfd::dwt::haar_inverse({to_plane(ll), to_plane(lh), to_plane(hl), to_plane(hh)}));
  }, py::arg("ll"), py::arg("lh"), py::arg("hl"), py::arg("hh"));

  py::class_<clfd::ffe::EncoderWeights>(m, "EncoderWeights")
      .def(py::init([](std::uint64_t seed, bool use_bias) {
             clfd::Rng rng(seed);
             return clfd::ffe::EncoderWeights::initialized(rng, use_bias);
           }), py::arg("seed") = 0, py::arg("use_bias") = true)
      .def_property("values",
                    [](const clfd::ffe::EncoderWeights& w) {
                      return std::vector<float>(w.values.begin(), w.values.end());
                    },
                    [](clfd::ffe::EncoderWeights& w, const std::vector<float>& v) {
                      if (v.size() != w.values.size()) throw clfd::ShapeError("expected 27 values");
                      std::copy(v.begin(), v.end(), w.values.begin());
                    })
      .def_readonly("frozen", &clfd::ffe::EncoderWeights::frozen)
      .def("digest", [](const clfd::ffe::EncoderWeights& w) { return clfd::ffe::digest(w); });
  m.def("encode", [](const Array& image, const clfd::ffe::EncoderWeights& w) {
    return from_volume(clfd::ffe::encode(to_volume(image), w).values);
  }, py::arg("image"), py::arg("weights"), "3 x H/2 x W/2 encoded map of a 3 x H x W image.");

  m.def("frequency_keep_probs",
        [](const py::array_t<std::uint64_t, py::array::c_style | py::array::forcecast>& counter,
           int y_plus, int y_minus, double alpha_plus, double alpha_minus, double lambda) {
          clfd::cffs::SimilarityRow row;
          row.y_plus = y_plus;
          row.y_minus = y_minus;
          row.alpha_plus = alpha_plus;
          row.alpha_minus = alpha_minus;
          return clfd::cffs::frequency_keep_probs(to_counter(counter), row, lambda);
        },
        py::arg("counter"), py::arg("y_plus"), py::arg("y_minus"), py::arg("alpha_plus"),
        py::arg("alpha_minus"), py::arg("lam") = 0.5);
  m.def("semantic_keep_probs",
        [](const py::array_t<std::uint64_t, py::array::c_style | py::array::forcecast>& counter, int c,
           double beta) { return clfd::cffs::semantic_keep_probs(to_counter(counter), beta, c); },
        py::arg("counter"), py::arg("cls"), py::arg("beta") = 2.0);
  m.def("topk_select", [](const std::vector<float>& features, const std::vector<std::uint8_t>& surviving,
                          double fraction) {
    return clfd::cffs::topk_select(features, surviving, fraction);
  }, py::arg("features"), py::arg("surviving") = std::vector<std::uint8_t>{}, py::arg("fraction") = 0.6);
  m.def("selection_size", &clfd::cffs::selection_size, py::arg("features"), py::arg("fraction") = 0.6);

  m.def("average_accuracy", [](const Array64& r) {
    const auto m = to_matrix(r);
    return clfd::metrics::average_accuracy(m, m.tasks());
  }, py::arg("r"));
  m.def("final_forgetting", [](const Array64& r, bool clip) {
    const auto m = to_matrix(r);
    return clfd::metrics::final_forgetting(m, m.tasks(), clip);
  }, py::arg("r"), py::arg("clip") = false);
  m.def("stability_plasticity", [](const Array64& r) {
    const auto m = to_matrix(r);
    const auto sp = clfd::metrics::stability_plasticity(m, m.tasks());
    return py::make_tuple(sp.stability, sp.plasticity, sp.tradeoff);
  }, py::arg("r"));
  m.def("count_flops", [](const std::string& arch, int height, int width, int classes) {
    return clfd::model::count_flops(clfd::model::BackboneConfig::by_name(arch, height, width, classes),
                                    height, width);
  }, py::arg("arch"), py::arg("height"), py::arg("width"), py::arg("classes") = 10);

  m.def("config_dump", [](const std::string& text) {
    return clfd::config::dump(clfd::config::parse(text));
  }, py::arg("text"), "Parses config text and returns every key with its value.");

  m.def("run", [](const std::string& text, std::uint64_t seed, const std::string& out_dir) {
    const auto cfg = clfd::config::parse(text);
    clfd::loop::RunResult r;
    {
      py::gil_scoped_release release;
      const auto data = clfd::loop::prepare_dataset(cfg);
      r = clfd::loop::run_sequence(cfg, data, seed, out_dir);
    }
    py::dict out;
    out["class_il"] = from_matrix(r.class_il);
    out["task_il"] = from_matrix(r.task_il);
    out["encoder_digests"] = r.encoder_digests;
    out["mean_step_s"] = r.efficiency.mean_step_s();
    out["total_flops"] = r.efficiency.total_flops;
    out["dir"] = r.dir;
    return out;
  }, py::arg("config"), py::arg("seed") = 1, py::arg("out_dir") = "",
     "Trains every task of the configured sequence and returns both accuracy matrices.");
}
