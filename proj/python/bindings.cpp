// Copyright 2026 The dfcompress Authors
// SPDX-License-Identifier: Apache-2.0

// Python bindings for the core library.

#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "dfc/budget.hpp"
#include "dfc/compressor.hpp"
#include "dfc/config.hpp"
#include "dfc/io.hpp"
#include "dfc/linalg.hpp"
#include "dfc/model.hpp"
#include "dfc/realizer.hpp"
#include "dfc/state_io.hpp"

namespace py = pybind11;
using namespace dfc;

namespace {

using F64 = py::array_t<double, py::array::c_style | py::array::forcecast>;
using F32 = py::array_t<float, py::array::c_style | py::array::forcecast>;

linalg::Matrix to_matrix(const F64& a) {
  if (a.ndim() != 2) throw std::invalid_argument("expected a 2-D array");
  linalg::Matrix m(a.shape(0), a.shape(1));
  std::copy(a.data(), a.data() + a.size(), m.data.begin());
  return m;
}

F64 from_matrix(const linalg::Matrix& m) {
  F64 out({m.rows, m.cols});
  std::copy(m.data.begin(), m.data.end(), out.mutable_data());
  return out;
}

F32 from_tensor(const Tensor& t) {
  std::vector<py::ssize_t> shape(t.shape().begin(), t.shape().end());
  F32 out(shape);
  std::copy(t.data().begin(), t.data().end(), out.mutable_data());
  return out;
}

Tensor to_tensor(const F32& a) {
  Shape shape(a.shape(), a.shape() + a.ndim());
  return Tensor(shape, std::vector<float>(a.data(), a.data() + a.size()));
}

config::RunConfig run_config(const std::string& text) {
  config::RunConfig cfg;
  config::apply_text(cfg, text);
  return cfg;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Structured compression by learned filter masks and SVD thresholds";

  py::register_exception<io::FormatError>(m, "FormatError", PyExc_ValueError);

  m.def("svt", [](const F64& x, double gamma) { return from_matrix(linalg::svt(to_matrix(x), gamma)); },
        py::arg("x"), py::arg("gamma"), "Singular value soft-thresholding.");
  m.def("svd_values", [](const F64& x) { return linalg::svd_values(to_matrix(x)); }, py::arg("x"));
  m.def("soft_rank", [](const std::vector<double>& s, double gamma, double tau) {
    return budget::soft_rank(s, gamma, tau);
  }, py::arg("sigma"), py::arg("gamma"), py::arg("tau"));
  m.def("penalty", [](double ratio, double target, double lam) {
    budget::BudgetConfig c;
    c.target = target;
    c.lambda = lam;
    return budget::penalty(ratio, c);
  }, py::arg("ratio"), py::arg("target"), py::arg("lam") = 1.0);

  py::class_<model::ModelGraph>(m, "Model")
      .def_property_readonly("input", [](const model::ModelGraph& g) {
        return py::make_tuple(g.input.channels, g.input.height, g.input.width, g.input.classes);
      })
      .def_property_readonly("num_layers", [](const model::ModelGraph& g) { return g.layers.size(); })
      .def("param_count", &model::param_count)
      .def("flops", &model::count_flops)
      .def("weight_hash", &io::weight_hash)
      .def("forward", [](const model::ModelGraph& g, const F32& x) {
        return from_tensor(model::forward(g, to_tensor(x)));
      }, py::arg("x"), "Logits for an [N, C, H, W] float32 batch.")
      .def("save", [](const model::ModelGraph& g, const std::string& path) { io::save_model(g, path); })
      .def("to_bytes", [](const model::ModelGraph& g) {
        const auto b = io::serialize_model(g);
        return py::bytes(reinterpret_cast<const char*>(b.data()), b.size());
      });

  m.def("build_model", [](const std::string& arch, std::int64_t channels, std::int64_t height,
                          std::int64_t width, std::int64_t classes, std::uint64_t seed) {
    auto g = model::build_model(arch, {channels, height, width, classes});
    model::init_weights(g, seed);
    return g;
  }, py::arg("arch"), py::arg("channels") = 3, py::arg("height") = 8, py::arg("width") = 8,
        py::arg("classes") = 10, py::arg("seed") = 0);
  m.def("load_model", &io::load_model, py::arg("path"));
  m.def("model_from_bytes", [](const py::bytes& b) {
    const std::string s = b;
    return io::parse_model({reinterpret_cast<const std::uint8_t*>(s.data()), s.size()});
  });

  py::class_<io::Dataset>(m, "Dataset")
      .def_property_readonly("size", &io::Dataset::size)
      .def_property_readonly("classes", [](const io::Dataset& d) { return d.classes; })
      .def_property_readonly("images", [](const io::Dataset& d) { return from_tensor(d.images); })
      .def_property_readonly("labels", [](const io::Dataset& d) { return d.labels; });
  m.def("load_dataset", &io::load_dataset, py::arg("path"));
  m.def("synth_dataset", [](std::uint64_t seed, std::int64_t count, std::int64_t channels,
                            std::int64_t height, std::int64_t width, std::int64_t classes) {
    io::SynthSpec s;
    s.count = count;
    s.channels = channels;
    s.height = height;
    s.width = width;
    s.classes = classes;
    return io::decode(io::synth_dataset(seed, s).data);
  }, py::arg("seed"), py::arg("count"), py::arg("channels") = 3, py::arg("height") = 8,
        py::arg("width") = 8, py::arg("classes") = 10);

  m.def("evaluate", [](const model::ModelGraph& g, const io::Dataset& d) {
    const auto r = compress::evaluate(g, d);
    return py::dict(py::arg("accuracy") = r.accuracy, py::arg("correct") = r.correct,
                    py::arg("total") = r.total, py::arg("confusion") = r.confusion);
  });
  m.def("train", [](const model::ModelGraph& g, const io::Dataset& d, const std::string& cfg_text,
                    int epochs, double lr) {
    return compress::train(g, d, nullptr, run_config(cfg_text).train_config(epochs, lr)).model;
  }, py::arg("model"), py::arg("data"), py::arg("config") = "", py::arg("epochs") = 10,
        py::arg("lr") = 0.01, py::call_guard<py::gil_scoped_release>());

  py::class_<compress::SelectionState>(m, "SelectionState")
      .def_readonly("gammas", &compress::SelectionState::gammas)
      .def_readonly("iteration", &compress::SelectionState::iteration)
      .def_readonly("mu", &compress::SelectionState::mu)
      .def("to_json", &io::serialize_state);
  m.def("state_from_json", &io::parse_state);

  m.def("compress", [](const model::ModelGraph& g, const io::Dataset& d, const std::string& cfg_text) {
    const auto res = compress::compress(g, d, run_config(cfg_text).compress_config(2));
    return py::make_tuple(res.state, res.soft_ratio, res.passes,
                          res.status == compress::RunStatus::kConverged);
  }, py::arg("model"), py::arg("data"), py::arg("config") = "",
        "Learns masks and thresholds; returns (state, soft_ratio, passes, converged).");
  m.def("realize", [](const model::ModelGraph& g, const compress::SelectionState& s, bool shrink) {
    realize::RealizeOptions o;
    o.shrink = shrink;
    auto r = realize::realize(g, s, o);
    const double ratio = r.flop_ratio();
    const auto report = realize::plan_report(r);
    return py::make_tuple(std::move(r.model), ratio, report);
  }, py::arg("model"), py::arg("state"), py::arg("shrink") = false,
        "Prunes and factorizes; returns (model, hard_flop_ratio, plan_report).");
}
