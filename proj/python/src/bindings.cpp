#include <sstream>
#include <string>
#include <vector>

#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "pmoc/cli.hpp"
#include "pmoc/geomcheck.hpp"

namespace py = pybind11;

namespace {

std::string run_json(const std::string& config_json) {
  return pmoc::report_to_json(pmoc::run(pmoc::config_from_json(config_json)));
}

std::string compare_json(const std::string& config_json, const std::vector<std::string>& schemes) {
  const pmoc::RunConfig base = pmoc::config_from_json(config_json);
  std::vector<pmoc::RunConfig> configs;
  for (const auto& s : schemes) {
    pmoc::RunConfig c = base;
    c.scheme = pmoc::scheme_from_string(s);
    configs.push_back(c);
  }
  return pmoc::report_to_json(pmoc::compare(configs));
}

std::string table_of(const std::string& report_json) {
  std::ostringstream out;
  pmoc::write_table(pmoc::report_from_json(report_json), out);
  return out.str();
}

std::string trajectory_csv(const std::string& report_json, int run) {
  const auto report = pmoc::report_from_json(report_json);
  if (run < 0 || run >= static_cast<int>(report.runs.size())) throw py::index_error("no such run");
  std::ostringstream out;
  pmoc::export_trajectory(report.runs[static_cast<std::size_t>(run)], out);
  return out.str();
}

py::dict basis_arrays(const std::string& family, int n) {
  const pmoc::SpectralBasis b(pmoc::family_from_string(family), n);
  py::dict d;
  d["nodes"] = Eigen::VectorXd(b.nodes());
  d["weights"] = Eigen::VectorXd(b.quad_weights());
  d["diff"] = Eigen::MatrixXd(b.diff());
  d["metric"] = Eigen::MatrixXd(b.metric());
  return d;
}

py::dict pendulum_defect(int n, double tf, bool broken, double epsilon) {
  pmoc::FlowMapProbe probe = pmoc::pendulum_probe(n, tf, broken);
  probe.epsilon = epsilon;
  const auto s = pmoc::symplectic_defect(probe);
  py::dict d;
  d["defect"] = s.defect;
  d["jacobian"] = s.jacobian;
  d["epsilon"] = s.epsilon;
  return d;
}

py::dict drift(const std::string& scheme, int n, double tf) {
  const auto c = pmoc::gravity_free_drift(pmoc::scheme_from_string(scheme), n, tf);
  py::dict d;
  d["drift"] = c.drift;
  d["residual"] = c.residual;
  d["momentum"] = c.momentum;
  d["endpoint_error"] = c.endpoint_error;
  return d;
}

std::vector<std::pair<int, double>> convergence(const std::string& scheme, const std::vector<int>& sizes) {
  std::vector<std::pair<int, double>> out;
  for (const auto& r : pmoc::convergence_study(pmoc::pendulum_fixture(), pmoc::scheme_from_string(scheme), sizes))
    out.emplace_back(r.n, r.residual);
  return out;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "pseudo-spectral trajectory optimization core";

  py::register_exception<pmoc::ConfigError>(m, "ConfigError", PyExc_ValueError);
  py::register_exception<pmoc::NlpError>(m, "NlpError", PyExc_RuntimeError);
  py::register_exception<pmoc::GeomError>(m, "GeomError", PyExc_RuntimeError);
  py::register_exception<pmoc::SingularBasisError>(m, "SingularBasisError", PyExc_ArithmeticError);
  py::register_exception<pmoc::DynamicsError>(m, "DynamicsError", PyExc_RuntimeError);

  m.def("default_config", [] { return pmoc::config_to_json(pmoc::RunConfig{}); });
  m.def("normalize_config", [](const std::string& j) { return pmoc::config_to_json(pmoc::config_from_json(j)); },
        py::arg("config_json"));
  m.def("config_digest", [](const std::string& j) { return pmoc::config_digest(pmoc::config_from_json(j)); },
        py::arg("config_json"));
  m.def("run", &run_json, py::arg("config_json"), py::call_guard<py::gil_scoped_release>());
  m.def("compare", &compare_json, py::arg("config_json"), py::arg("schemes"),
        py::call_guard<py::gil_scoped_release>());
  m.def("table", &table_of, py::arg("report_json"));
  m.def("trajectory_csv", &trajectory_csv, py::arg("report_json"), py::arg("run") = 0);

  m.def("basis", &basis_arrays, py::arg("family"), py::arg("n"));
  m.def("pendulum_defect", &pendulum_defect, py::arg("n") = 16, py::arg("tf") = 3.0, py::arg("broken") = false,
        py::arg("epsilon") = 1e-5);
  m.def("gravity_free_drift", &drift, py::arg("scheme") = "pmoc", py::arg("n") = 48, py::arg("tf") = 2.0);
  m.def("convergence_study", &convergence, py::arg("scheme") = "pmoc",
        py::arg("sizes") = std::vector<int>{8, 12, 16, 20, 24});
}
