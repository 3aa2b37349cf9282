#include "ietidg/driver.hpp"
#include "ietidg/errors.hpp"
#include "ietidg/linalg.hpp"
#include "ietidg/parallel.hpp"
#include "ietidg/splines.hpp"

#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

namespace py = pybind11;
using namespace ietidg;

namespace {

py::object to_python(const nlohmann::json& doc) {
    return py::module_::import("json").attr("loads")(doc.dump());
}

nlohmann::json from_python(const py::object& obj) {
    return nlohmann::json::parse(py::module_::import("json").attr("dumps")(obj).cast<std::string>());
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "Multipatch dG isogeometric Poisson solver with dual-primal tearing and interconnecting";

    // later registrations are tried first, so the base class goes first
    py::register_exception<Error>(m, "Error", PyExc_RuntimeError);
    py::register_exception<SolverError>(m, "SolverError", PyExc_RuntimeError);
    py::register_exception<ParameterError>(m, "ParameterError", PyExc_ValueError);

    py::class_<ExperimentConfig>(m, "ExperimentConfig")
        .def(py::init<>())
        .def_readwrite("p", &ExperimentConfig::p)
        .def_readwrite("r", &ExperimentConfig::r)
        .def_property(
            "layout", [](const ExperimentConfig& c) { return layout_name(c.layout); },
            [](ExperimentConfig& c, const std::string& s) { c.layout = parse_layout(s); })
        .def_property(
            "variant", [](const ExperimentConfig& c) { return variant_name(c.variant); },
            [](ExperimentConfig& c, const std::string& s) { c.variant = parse_variant(s); })
        .def_readwrite("eps", &ExperimentConfig::eps)
        .def_readwrite("eps_c", &ExperimentConfig::eps_c)
        .def_readwrite("delta", &ExperimentConfig::delta)
        .def_readwrite("mixed_degree", &ExperimentConfig::mixed_degree)
        .def_readwrite("mixed_refine", &ExperimentConfig::mixed_refine)
        .def_readwrite("maxit", &ExperimentConfig::maxit)
        .def("to_dict", [](const ExperimentConfig& c) { return to_python(config_to_json(c)); })
        .def_static("from_dict", [](const py::dict& d) { return config_from_json(from_python(d)); })
        .def("__eq__", [](const ExperimentConfig& a, const ExperimentConfig& b) { return a == b; })
        .def("__repr__", [](const ExperimentConfig& c) { return "ExperimentConfig(" + config_to_json(c).dump() + ")"; });

    py::class_<ExperimentRecord>(m, "ExperimentRecord")
        .def_readonly("variant", &ExperimentRecord::variant)
        .def_readonly("p", &ExperimentRecord::p)
        .def_readonly("r", &ExperimentRecord::r)
        .def_readonly("n_total", &ExperimentRecord::n_total)
        .def_readonly("iterations", &ExperimentRecord::iterations)
        .def_readonly("kappa_est", &ExperimentRecord::kappa_est)
        .def_readonly("t_total", &ExperimentRecord::t_total)
        .def_readonly("l2_err", &ExperimentRecord::l2_err)
        .def_readonly("dg_err", &ExperimentRecord::dg_err)
        .def_readonly("converged", &ExperimentRecord::converged)
        .def_readonly("failure", &ExperimentRecord::failure)
        .def_readonly("residual_history", &ExperimentRecord::residual_history)
        .def("to_dict", [](const ExperimentRecord& r) { return to_python(record_to_json(r)); });

    py::class_<LogSquaredFit>(m, "LogSquaredFit")
        .def_readonly("fitted", &LogSquaredFit::fitted)
        .def_readonly("c", &LogSquaredFit::c)
        .def_readonly("log_c0", &LogSquaredFit::log_c0)
        .def_readonly("max_deviation", &LogSquaredFit::max_deviation)
        .def_readonly("flat", &LogSquaredFit::flat)
        .def("__call__", &LogSquaredFit::operator());

    py::class_<ScalingRecord>(m, "ScalingRecord")
        .def_readonly("records", &ScalingRecord::records)
        .def_readonly("log_ratio", &ScalingRecord::log_ratio)
        .def_readonly("failed_levels", &ScalingRecord::failed_levels)
        .def_readonly("fit", &ScalingRecord::fit);

    m.def("run_experiment", &run_experiment, py::arg("config"), py::call_guard<py::gil_scoped_release>());
    m.def(
        "scaling_study",
        [](const ExperimentConfig& base, const std::string& levels) { return scaling_study(base, parse_levels(levels)); },
        py::arg("config"), py::arg("levels"), py::call_guard<py::gil_scoped_release>());
    m.def(
        "emit_report",
        [](const std::vector<ExperimentRecord>& recs, const std::string& format) {
            return emit_report(recs, parse_format(format));
        },
        py::arg("records"), py::arg("format") = "csv");
    m.def("fit_log_squared", &fit_log_squared, py::arg("log_ratio"), py::arg("kappa"));
    m.def(
        "export_geometry",
        [](const std::string& layout) { return multipatch_to_json(build_layout(parse_layout(layout))).dump(); },
        py::arg("layout"), "JSON multipatch geometry of a layout");
    m.def("set_num_jobs", &set_num_jobs, py::arg("jobs"));
    m.def("num_jobs", &num_jobs);

    m.def(
        "kron_matvec",
        [](const DenseMatrix& a1, const DenseMatrix& a2, const Vector& x) { return kron_matvec(a1, a2, x); },
        py::arg("a1"), py::arg("a2"), py::arg("x"), "(a1 kron a2) x without forming the product");
    m.def(
        "bspline_basis",
        [](int degree, const std::vector<double>& knots, double x) {
            const BasisEval e = eval_basis(KnotVector(degree, knots), x);
            return py::make_tuple(e.first, e.values, e.derivatives);
        },
        py::arg("degree"), py::arg("knots"), py::arg("x"),
        "(first index, values, derivatives) of the nonzero B-splines at x");
}
