#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "htbench/bench.hpp"
#include "htbench/bounds.hpp"
#include "htbench/data.hpp"
#include "htbench/error.hpp"
#include "htbench/metrics.hpp"
#include "htbench/models.hpp"
#include "htbench/report.hpp"
#include "htbench/selfcheck.hpp"
#include "htbench/stable.hpp"

namespace py = pybind11;
using namespace htbench;

PYBIND11_MODULE(_core, m) {
  m.doc() = "Heavy-tailed generative model benchmark";

  py::register_exception<InvalidArgument>(m, "InvalidArgument", PyExc_ValueError);
  py::register_exception<NumericError>(m, "NumericError", PyExc_ArithmeticError);

  m.def(
      "sample_isotropic_stable",
      [](double alpha, std::size_t dim, std::size_t n, double scale, std::uint64_t seed) {
        return sample_isotropic_stable({alpha, dim, scale, {}}, n, seed);
      },
      py::arg("alpha"), py::arg("dim"), py::arg("n"), py::arg("scale") = 1.0, py::arg("seed") = 0);
  m.def(
      "hill_tail_index",
      [](const std::vector<double>& x, std::optional<std::size_t> k) {
        return hill_tail_index(x, k ? *k : default_hill_k(x.size()));
      },
      py::arg("samples"), py::arg("k") = py::none());

  py::class_<Dataset>(m, "Dataset")
      .def_readonly("name", &Dataset::name)
      .def_readonly("train", &Dataset::train)
      .def_readonly("val", &Dataset::val)
      .def_readonly("test", &Dataset::test)
      .def_readonly("warnings", &Dataset::warnings)
      .def_property_readonly("dim", &Dataset::dim);
  m.def("gen_alpha_stable_iso", &gen_alpha_stable_iso, py::arg("n"), py::arg("dim") = 30, py::arg("alpha") = 1.7,
        py::arg("seed") = 0);

  py::class_<MmdResult>(m, "MmdResult")
      .def_readonly("value", &MmdResult::value)
      .def_readonly("bandwidth", &MmdResult::bandwidth)
      .def_readonly("degenerate", &MmdResult::degenerate);
  m.def("mmd_rbf", &mmd_rbf, py::arg("x"), py::arg("y"), py::arg("bandwidth") = py::none());
  m.def("tce", &tce, py::arg("generated"), py::arg("reference"), py::arg("level"));
  m.def(
      "tce_all",
      [](const Matrix& gen, const Matrix& ref, std::vector<double> levels) {
        return tce_all(gen, ref, TceLevels{std::move(levels)});
      },
      py::arg("generated"), py::arg("reference"), py::arg("levels") = std::vector<double>{0.90, 0.95, 0.99});

  m.def(
      "ddpm_exponents",
      [](double beta, double gamma, double d) {
        const auto e = ddpm_exponents(beta, gamma, d);
        return py::make_tuple(e.a, e.b, e.c);
      },
      py::arg("beta"), py::arg("gamma"), py::arg("d"));
  m.def("ddpm_optimized_rate", &ddpm_optimized_rate, py::arg("beta"), py::arg("gamma"), py::arg("d"));
  m.def(
      "ddpm_optimal_t0",
      [](double n, double a, double b, double c) { return ddpm_optimal_t0(n, {a, b, c}); }, py::arg("n"),
      py::arg("a"), py::arg("b"), py::arg("c"));
  m.def("dlpm_optimal_m", &dlpm_optimal_m, py::arg("n"), py::arg("beta_alpha"), py::arg("d"));

  m.def(
      "dlpm_schedule",
      [](std::size_t steps, double alpha) {
        const auto s = DlpmSchedule::make_default(steps, alpha);
        return py::make_tuple(s.a, s.b);
      },
      py::arg("steps"), py::arg("alpha"), "Marginal coefficients (a_t, b_t) for t = 0..T.");
  m.def(
      "ddpm_alpha_bar", [](std::size_t steps) { return DdpmSchedule::make_default(steps).alpha_bar; },
      py::arg("steps"));

  m.def("selfcheck", [] {
    py::list out;
    for (const auto& c : run_selfcheck()) out.append(py::make_tuple(c.name, c.passed, c.detail));
    return out;
  });
  m.def(
      "run_bench",
      [](const std::filesystem::path& config, std::optional<std::string> output_dir, bool pilot_only) {
        auto cfg = BenchConfig::load(config);
        if (output_dir) cfg.output_dir = *output_dir;
        py::gil_scoped_release release;
        return run_bench(cfg, {}, pilot_only);
      },
      py::arg("config"), py::arg("output_dir") = py::none(), py::arg("pilot_only") = false);
  m.def(
      "render_report",
      [](const std::filesystem::path& results) { return render_report(results).markdown; },
      py::arg("results_dir"));
  m.def("format_cell", &format_cell, py::arg("mean"), py::arg("std"));
}
