// Copyright 2026 The DiffSketch Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <sstream>
#include <string>
#include <vector>

#include "cli/commands.h"
#include "diffsketch/error.h"
#include "diffsketch/privacy.h"
#include "diffsketch/sketch.h"

namespace py = pybind11;
using namespace diffsketch;

PYBIND11_MODULE(_core, m) {
  m.doc() = "Count Sketch compression and privacy accounting";
  py::register_exception<Error>(m, "DiffSketchError", PyExc_ValueError);

  py::class_<SketchDims>(m, "SketchDims")
      .def(py::init([](uint32_t t, uint32_t k, uint64_t n) {
             SketchDims d{t, k, n};
             d.Validate();
             return d;
           }),
           py::arg("t"), py::arg("k"), py::arg("n"))
      .def_readonly("t", &SketchDims::t)
      .def_readonly("k", &SketchDims::k)
      .def_readonly("n", &SketchDims::n)
      .def("__repr__", [](const SketchDims& d) {
        std::ostringstream s;
        s << "SketchDims(t=" << d.t << ", k=" << d.k << ", n=" << d.n << ")";
        return s.str();
      });

  m.def("dims_for_error", [](double mu, double delta) {
    const TableShape s = DimsForError(mu, delta);
    return py::make_tuple(s.t, s.k);
  }, py::arg("mu"), py::arg("delta"), "(t, k) for error mu with probability 1 - delta.");

  py::class_<CountSketch>(m, "CountSketch")
      .def(py::init<SketchDims, uint64_t>(), py::arg("dims"), py::arg("seed"))
      .def_property_readonly("dims", &CountSketch::dims)
      .def_property_readonly("seed", &CountSketch::master_seed)
      .def("encode", [](CountSketch& s, const std::vector<double>& g) { s.Encode(g); })
      .def("query", &CountSketch::Query, py::arg("i"))
      .def("query_all", &CountSketch::QueryAll)
      .def("merge", [](const CountSketch& a, const CountSketch& b) { return Merge(a, b); })
      .def("scaled", [](const CountSketch& s, double c) { return Scaled(s, c); })
      .def("counters", [](const CountSketch& s) {
        return std::vector<double>(s.counters().begin(), s.counters().end());
      })
      .def("to_bytes", [](const CountSketch& s) {
        const std::vector<uint8_t> bytes = Serialize(s);
        return py::bytes(reinterpret_cast<const char*>(bytes.data()), bytes.size());
      })
      .def_static("from_bytes", [](const py::bytes& data) {
        const std::string raw = data;
        return Deserialize(std::span(reinterpret_cast<const uint8_t*>(raw.data()), raw.size()));
      })
      .def("__eq__", [](const CountSketch& a, const CountSketch& b) { return a == b; });

  m.def("sketch_epsilon",
        [](double alpha, double sigma2, uint64_t n, uint32_t t, uint32_t k) {
          return SketchEpsilon(GradientStats{.alpha = alpha, .sigma2 = sigma2, .n = n},
                               SketchDims{t, k, n});
        },
        py::arg("alpha"), py::arg("sigma2"), py::arg("n"), py::arg("t"), py::arg("k"),
        "Analytic epsilon, or None when the collision term reaches 1/2.");

  m.def("estimate_stats", [](const std::vector<double>& g, double percentile) {
    const GradientStats s = EstimateStats(g, percentile);
    return py::make_tuple(s.alpha, s.sigma2);
  }, py::arg("g"), py::arg("percentile") = kDefaultAlphaPercentile);

  m.def("run_cli", [](const std::vector<std::string>& args) {
    std::ostringstream out, err;
    int code;
    {
      py::gil_scoped_release release;
      code = cli::Run(args, out, err);
    }
    return py::make_tuple(code, out.str(), err.str());
  }, py::arg("args"), "Run a CLI command in-process; returns (exit_code, stdout, stderr).");
}
