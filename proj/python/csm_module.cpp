#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <sstream>

#include "csm/api.hpp"
#include "csm/cli.hpp"
#include "csm/layout.hpp"
#include "csm/replay.hpp"
#include "csm/stats.hpp"
#include "csm/views.hpp"

namespace py = pybind11;
using namespace csm;

namespace {

// Documents cross the boundary as JSON text; the Python package decodes them.
std::string build_json(const std::string& corpus_path, const std::string& config_path, bool grouped) {
  const AssignmentConfig config = load_config(config_path);
  const Automaton a = build_automaton(parse_corpus(std::filesystem::path(corpus_path)).logs, config);
  return automaton_to_json(grouped ? group_super_states(a) : a).dump();
}

std::string layout_json(const std::string& automaton, double min_node, double min_edge) {
  const Automaton a = automaton_from_json(nlohmann::json::parse(automaton));
  return layout_to_json(filter_layout(compute_layout(a), {min_node, min_edge})).dump();
}

std::string svg_of(const std::string& layout) { return render_svg(layout_from_json(nlohmann::json::parse(layout))); }
std::string dot_of(const std::string& layout) { return render_dot(layout_from_json(nlohmann::json::parse(layout))); }

std::tuple<int, std::string, std::string> cli(const std::vector<std::string>& args) {
  std::ostringstream out, err;
  int code;
  {
    py::gil_scoped_release unlocked;
    code = run_cli(args, out, err);
  }
  return {code, out.str(), err.str()};
}

std::pair<int, std::string> api_get(const std::string& root, const std::string& path, const QueryParams& query) {
  const Api api{Store(root)};
  const HttpResponse r = api.get(path, query);
  return {r.status, r.body};
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Collective student model core";

  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const Error& e) {
      switch (e.code()) {
        case Errc::not_found:
          PyErr_SetString(PyExc_KeyError, e.what());
          break;
        case Errc::io:
          PyErr_SetString(PyExc_OSError, e.what());
          break;
        default:
          PyErr_SetString(PyExc_ValueError, e.what());
      }
    }
  });

  m.def("build_automaton", &build_json, py::arg("corpus"), py::arg("config"), py::arg("grouped") = true);
  m.def("layout", &layout_json, py::arg("automaton"), py::arg("min_node_freq") = 0.0,
        py::arg("min_edge_freq") = 0.0);
  m.def("render_svg", &svg_of, py::arg("layout"));
  m.def("render_dot", &dot_of, py::arg("layout"));
  m.def("edge_shade", &edge_shade, py::arg("frequency_percent"));
  m.def("welch_t_test", [](const std::vector<double>& a, const std::vector<double>& b) {
    const TTestResult r = welch_t_test(a, b);
    return std::make_tuple(r.t, r.df, r.p);
  });
  m.def("mann_whitney_u", [](const std::vector<double>& x, const std::vector<double>& y) {
    const UTestResult r = mann_whitney_u(x, y);
    return std::make_tuple(r.u, r.p);
  });
  m.def("run_cli", &cli, py::arg("args"));
  m.def("api_get", &api_get, py::arg("store"), py::arg("path"), py::arg("query") = QueryParams{});
}
