// Copyright 2026 The eprb Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <pybind11/complex.h>
#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "eprb/pipeline.h"
#include "eprb/statistics.h"

namespace py = pybind11;
using namespace eprb;

namespace {

PipelineConfig config_from(const std::optional<std::string> &json_text) {
    if (!json_text) return parse_config(Json::object());
    Json j = Json::parse(*json_text, nullptr, false);
    if (j.is_discarded()) fail(ErrorKind::Config, "config is not valid JSON");
    return parse_config(j);
}

py::dict probs_dict(const QuantumProbs &q) {
    py::dict d;
    d["qa"] = q.qa;
    d["qb"] = q.qb;
    d["qc"] = q.qc;
    return d;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "Count-model fitting and event simulation for two-observer photon-pair experiments";

    static py::exception<Error> error_type(m, "Error", PyExc_RuntimeError);
    py::register_exception_translator([](std::exception_ptr p) {
        try {
            if (p) std::rethrow_exception(p);
        } catch (const Error &e) {
            py::object exc = py::reinterpret_borrow<py::object>(error_type)(e.what());
            exc.attr("kind") = error_kind_name(e.kind());
            exc.attr("exit_code") = exit_code_for(e.kind());
            PyErr_SetObject(error_type.ptr(), exc.ptr());
        }
    });

    m.def(
        "z_score",
        [](double x, int df) {
            ZScore z = z_score(x, df);
            return py::make_tuple(z.z, z.accepted);
        },
        py::arg("x"), py::arg("df"), "(Z, accepted) with Z = (X - DF) / sqrt(2 DF).");
    m.def(
        "degrees_of_freedom", [](int model, int n) { return degrees_of_freedom(model_from_int(model), n); },
        py::arg("model"), py::arg("n_counts") = kScanCountTotal);
    m.def(
        "compound_variance",
        [](double events, double mean_x, double cv_x) {
            Moments mo = compound_variance({events, mean_x, cv_x});
            return py::make_tuple(mo.mean, mo.variance);
        },
        py::arg("expected_events"), py::arg("mean_x"), py::arg("cv_x"), "(mean, variance) of the compound count.");

    m.def("singlet_state", [] { return singlet_state().matrix(); });
    m.def(
        "werner_state",
        [](double v) { return mix_states(singlet_state(), maximally_mixed_state(), v).matrix(); },
        py::arg("visibility"));
    m.def(
        "trace_distance",
        [](const Matrix4c &a, const Matrix4c &b) {
            return trace_distance(DensityMatrix::from_matrix(a), DensityMatrix::from_matrix(b));
        },
        py::arg("a"), py::arg("b"));
    m.def(
        "quantum_probs",
        [](const Matrix4c &rho, double theta) {
            return probs_dict(quantum_probs(DensityMatrix::from_matrix(rho), geometry_for_experiment(theta)));
        },
        py::arg("rho"), py::arg("theta"), "Marginal and joint probabilities for Alice's bias angle theta.");

    m.def(
        "simulate",
        [](const fs::path &out, const std::optional<std::string> &config) {
            SimulateReport r = cmd_simulate(config_from(config), out);
            return py::make_tuple(r.manifest, r.experiments);
        },
        py::arg("out"), py::arg("config") = py::none(), "Writes event logs and manifest.json; config is JSON text.");
    m.def(
        "tabulate",
        [](const fs::path &events, const fs::path &out, std::optional<double> window, std::optional<double> delta,
           const std::optional<std::string> &config) {
            return cmd_tabulate(config_from(config), events, {window, delta}, out).size();
        },
        py::arg("events"), py::arg("out"), py::arg("window") = py::none(), py::arg("delta") = py::none(),
        py::arg("config") = py::none());
    m.def(
        "fit",
        [](const fs::path &counts, const fs::path &out, std::optional<int> model,
           const std::optional<std::string> &config) {
            PipelineConfig c = config_from(config);
            if (model) c.fit.model = to_int(model_from_int(*model));
            FitCommandResult r = [&] {
                py::gil_scoped_release release;
                return cmd_fit(c, counts, out);
            }();
            const FitStatistics &st = r.result.statistics;
            py::dict d;
            d["model"] = to_int(r.result.model);
            d["x"] = st.x;
            d["df"] = st.df;
            d["z"] = st.z;
            d["accepted"] = st.accepted;
            d["converged"] = r.result.converged;
            d["exit_code"] = r.exit_code;
            d["rho"] = r.result.rho.matrix();
            return d;
        },
        py::arg("counts"), py::arg("out"), py::arg("model") = py::none(), py::arg("config") = py::none());
    m.def(
        "report", [](const std::vector<fs::path> &fits, const fs::path &out) { cmd_report(fits, out); },
        py::arg("fits"), py::arg("out"));
}
