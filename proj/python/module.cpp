#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <sstream>

#include "dimsheet/engine.hpp"
#include "dimsheet/gridvm.hpp"
#include "dimsheet/layout.hpp"
#include "dimsheet/metrics.hpp"
#include "dimsheet/parser.hpp"

namespace py = pybind11;
using namespace dimsheet;

namespace {

ValidatedModel load(const std::string& text) {
    ParseResult parsed = parse_model(text);
    if (!parsed.ok()) {
        std::ostringstream msg;
        for (const auto& d : parsed.diagnostics) {
            msg << d.span.line << ':' << d.span.column << ": " << d.message << "\n";
        }
        throw py::value_error(msg.str());
    }
    return validate(*parsed.model);
}

LayoutPlan plan_for(const ValidatedModel& model, const std::string& preset,
                    const std::string& plan_json) {
    if (!plan_json.empty()) return plan_from_json(plan_json, model.model);
    return preset_plan(model, preset);
}

}  // namespace

PYBIND11_MODULE(_dimsheet, m) {
    m.doc() = "Multidimensional spreadsheet model compiler";
    m.attr("__version__") = "0.1.0";

    py::class_<ValidatedModel>(m, "Model")
        .def_property_readonly("variables",
                               [](const ValidatedModel& self) {
                                   std::vector<std::string> names;
                                   for (const auto& var : self.model.variables) {
                                       names.push_back(var.name);
                                   }
                                   return names;
                               })
        .def_property_readonly("dimensions",
                               [](const ValidatedModel& self) {
                                   std::vector<std::string> names;
                                   for (const auto& dim : self.model.dimensions) {
                                       names.push_back(dim.name);
                                   }
                                   return names;
                               })
        .def_property_readonly("warnings",
                               [](const ValidatedModel& self) {
                                   std::vector<std::string> lines;
                                   for (const auto& w : self.warnings) {
                                       lines.push_back("[" + w.variable + "] " + w.message);
                                   }
                                   return lines;
                               })
        .def("render", [](const ValidatedModel& self) { return render_model(self.model); })
        .def(
            "eval_json",
            [](const ValidatedModel& self, const std::map<std::string, double>& overrides) {
                return value_store_to_json(eval_model(self, overrides), self.model);
            },
            py::arg("overrides") = std::map<std::string, double>{})
        .def(
            "plan_json",
            [](const ValidatedModel& self, const std::string& preset) {
                return plan_to_json(preset_plan(self, preset), self.model);
            },
            py::arg("preset"))
        .def(
            "compile_json",
            [](const ValidatedModel& self, const std::string& preset,
               const std::string& plan_json) {
                return grid_to_json(compile_model(self, plan_for(self, preset, plan_json)));
            },
            py::arg("preset") = "", py::arg("plan_json") = "")
        .def(
            "verify",
            [](const ValidatedModel& self, const std::string& preset,
               const std::map<std::string, double>& overrides) {
                LayoutPlan plan = preset_plan(self, preset);
                GridDoc doc = compile_model(self, plan);
                override_grid_inputs(doc, plan, self.model, overrides);
                CellValues actual = eval_grid(doc);
                ValueStore expected = eval_model(self, overrides);
                std::map<std::string, double> worst;
                for (const auto& var : self.model.variables) {
                    const DimArray& reference = expected.at(var.name);
                    double err = 0.0;
                    std::vector<std::size_t> coord(var.dims.size(), 0);
                    std::size_t flat = 0;
                    for (;;) {
                        CellAddress address = cell_address(plan, self.model, var.name, coord);
                        double value = actual.at({address.sheet, address.row, address.col});
                        double scale = std::max(std::abs(reference.values[flat]), 1e-300);
                        err = std::max(err, std::abs(value - reference.values[flat]) / scale);
                        if (++flat >= reference.values.size()) break;
                        std::size_t axis = coord.size();
                        while (axis-- > 0) {
                            if (++coord[axis] < reference.shape[axis]) break;
                            coord[axis] = 0;
                        }
                    }
                    worst[var.name] = err;
                }
                return worst;
            },
            py::arg("preset"), py::arg("overrides") = std::map<std::string, double>{})
        .def(
            "metrics_json",
            [](const ValidatedModel& self, const std::vector<std::string>& presets) {
                return reports_to_json(compare_presets(self, presets));
            },
            py::arg("presets"));

    m.def("parse", &load, py::arg("text"), "Parse and validate model text");
    m.def("presets", &preset_names, "Catalogued layout preset names");
    m.def(
        "eval_grid_json",
        [](const std::string& grid_json) {
            CellValues values = eval_grid(grid_from_json(grid_json));
            std::map<std::tuple<std::string, int, int>, double> out(values.begin(), values.end());
            return out;
        },
        py::arg("grid_json"), "Evaluate a grid document, returning {(sheet,row,col): value}");
}
