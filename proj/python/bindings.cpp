// Thin Python layer over kz_core. Config-driven entry points take and return
// JSON text; the package __init__ converts to and from dicts.
#include <pybind11/eigen.h>
#include <pybind11/operators.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "koopzubov/dictionary.hpp"
#include "koopzubov/dynamics.hpp"
#include "koopzubov/interval.hpp"
#include "koopzubov/io.hpp"
#include "koopzubov/pipeline.hpp"
#include "koopzubov/verify.hpp"

namespace py = pybind11;
using namespace kz;

namespace {

// simulate -> learn -> solve -> certify, in memory.
std::string run_pipeline(const std::string& config_text) {
  const auto cfg = parse_config(Json::parse(config_text));
  const auto ds = simulate(cfg);
  const auto model = learn(cfg, ds);
  const auto cand = solve(cfg, model);
  const auto samples = ds.initial_conditions();
  const auto rep = certify(cfg, cand, model, samples);

  Json out;
  out["provenance"] = to_json(cfg.provenance());
  out["alpha"] = model.alpha;
  out["identity_error"] = model.identity_error;
  out["A_hat"] = matrix_to_json(model.A_hat);
  out["candidate"] = candidate_to_json(cand);
  out["report"] = report_to_json(rep);
  out["exit_code"] = exit_code(rep);
  return out.dump();
}

std::string learn_only(const std::string& config_text) {
  const auto cfg = parse_config(Json::parse(config_text));
  const auto model = learn(cfg, simulate(cfg));
  return learn_result_to_json(model, cfg.provenance()).dump();
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Koopman resolvent learning and Zubov region-of-attraction certificates";

  py::class_<Interval>(m, "Interval")
      .def(py::init<double>())
      .def(py::init<double, double>())
      .def_property_readonly("lo", &Interval::lo)
      .def_property_readonly("hi", &Interval::hi)
      .def("width", &Interval::width)
      .def("contains", py::overload_cast<double>(&Interval::contains, py::const_))
      .def(py::self + py::self)
      .def(py::self - py::self)
      .def(py::self * py::self)
      .def(py::self / py::self)
      .def(-py::self)
      .def(py::self + double())
      .def(py::self * double())
      .def(double() * py::self)
      .def("__repr__", [](const Interval& a) { return "Interval" + to_string(a); });

  m.def("sqr", &sqr);
  m.def("exp", py::overload_cast<const Interval&>(&kz::exp));
  m.def("tanh", py::overload_cast<const Interval&>(&kz::tanh));
  m.def("sin", py::overload_cast<const Interval&>(&kz::sin));
  m.def("cos", py::overload_cast<const Interval&>(&kz::cos));
  m.def("pow_int", &pow_int);

  py::class_<OdeSystem>(m, "OdeSystem")
      .def_property_readonly("name", &OdeSystem::name)
      .def_property_readonly("dim", &OdeSystem::dim)
      .def("__call__", &OdeSystem::operator());
  m.def("builtin_system", [](const std::string& n) { return builtin(n); });
  m.def("linear_system", &linear_system);
  m.def("flow", &flow, py::arg("system"), py::arg("x0"), py::arg("t"), py::arg("tol") = 1e-10);

  py::class_<Dictionary>(m, "Dictionary")
      .def_static("monomial", &Dictionary::monomial, py::arg("n"), py::arg("J"), py::arg("K"))
      .def_static("make_tanh", &Dictionary::make_tanh, py::arg("n"), py::arg("n_features"), py::arg("seed"),
                  py::arg("weight_scale") = 1.0)
      .def_property_readonly("dim", &Dictionary::dim)
      .def_property_readonly("size", &Dictionary::size)
      .def("eval", &Dictionary::eval)
      .def("grad", &Dictionary::grad);

  m.def("required_beta", &required_beta, py::arg("K_f"), py::arg("K_fhat"), py::arg("delta"), py::arg("alpha"),
        py::arg("nu"));
  m.def("select_beta", &select_beta);
  m.def("fnv1a_hex", [](const std::string& s) { return fnv1a_hex(s); });

  m.def("_run_pipeline", &run_pipeline, py::call_guard<py::gil_scoped_release>());
  m.def("_learn", &learn_only, py::call_guard<py::gil_scoped_release>());
}
