#include "dimsheet/metrics.hpp"

#include <algorithm>
#include <iomanip>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "dimsheet/engine.hpp"

namespace dimsheet {

namespace {

void count_nodes(const GridExpr& expr, FormulaMetrics& m) {
    std::visit(
        [&](const auto& node) {
            using T = std::decay_t<decltype(node)>;
            if constexpr (std::is_same_v<T, GridCellRef> || std::is_same_v<T, GridRange>) {
                ++m.reference_count;
            } else if constexpr (std::is_same_v<T, GridCall>) {
                ++m.function_count;
                for (const auto& arg : node.args) count_nodes(*arg, m);
            } else if constexpr (std::is_same_v<T, GridNeg>) {
                ++m.operator_count;
                count_nodes(*node.operand, m);
            } else if constexpr (std::is_same_v<T, GridBinary>) {
                ++m.operator_count;
                count_nodes(*node.lhs, m);
                count_nodes(*node.rhs, m);
            }
        },
        expr.node);
}

void shape_of(const GridExpr& expr, std::ostream& out) {
    std::visit(
        [&](const auto& node) {
            using T = std::decay_t<decltype(node)>;
            if constexpr (std::is_same_v<T, GridLiteral>) {
                out << node.value;
            } else if constexpr (std::is_same_v<T, GridString>) {
                out << '"' << node.value << '"';
            } else if constexpr (std::is_same_v<T, GridCellRef> ||
                                 std::is_same_v<T, GridRange>) {
                out << '@';
            } else if constexpr (std::is_same_v<T, GridCall>) {
                out << (node.fn == GridFn::Sum ? "SUM(" : "SUMIFS(");
                for (std::size_t i = 0; i < node.args.size(); ++i) {
                    if (i) out << ',';
                    shape_of(*node.args[i], out);
                }
                out << ')';
            } else if constexpr (std::is_same_v<T, GridNeg>) {
                out << "-(";
                shape_of(*node.operand, out);
                out << ')';
            } else {
                out << '(';
                shape_of(*node.lhs, out);
                out << ") " << static_cast<int>(node.op) << " (";
                shape_of(*node.rhs, out);
                out << ')';
            }
        },
        expr.node);
}

}  // namespace

FormulaMetrics measure_cell(const GridExpr& expr) {
    FormulaMetrics m;
    count_nodes(expr, m);
    m.text_length = static_cast<int>(serialize_grid_expr(expr).size());
    return m;
}

std::string formula_shape(const GridExpr& expr) {
    std::ostringstream out;
    shape_of(expr, out);
    return out.str();
}

StrategyReport report_for(const ValidatedModel& validated, const LayoutPlan& plan,
                          const GridDoc& doc) {
    const Model& model = validated.model;
    StrategyReport report;
    report.preset = plan.preset;
    for (const auto& var : model.variables) {
        if (!var.has_formula()) continue;
        VariableReport entry;
        entry.name = var.name;
        std::set<std::string> shapes;
        long long op_sum = 0, fn_sum = 0, ref_sum = 0, len_sum = 0;

        std::vector<std::size_t> coords(var.dims.size(), 0);
        auto shape = model.shape_of(var.dims);
        for (;;) {
            CellAddress address = cell_address(plan, model, var.name, coords);
            const Sheet* sheet = doc.find_sheet(address.sheet);
            const Cell* cell = sheet ? sheet->find(address.row, address.col) : nullptr;
            if (!cell || cell->kind != CellKind::Formula) {
                throw LayoutError(LayoutErrorKind::BadPlan,
                                  "no formula cell for [" + var.name + "]");
            }
            GridExprPtr ast = parse_a1(cell->text);
            FormulaMetrics m = measure_cell(*ast);
            entry.max.operator_count = std::max(entry.max.operator_count, m.operator_count);
            entry.max.function_count = std::max(entry.max.function_count, m.function_count);
            entry.max.reference_count = std::max(entry.max.reference_count, m.reference_count);
            entry.max.text_length = std::max(entry.max.text_length, m.text_length);
            op_sum += m.operator_count;
            fn_sum += m.function_count;
            ref_sum += m.reference_count;
            len_sum += m.text_length;
            shapes.insert(formula_shape(*ast));
            ++entry.cells;

            std::size_t axis = coords.size();
            bool carried = true;
            while (axis-- > 0) {
                if (++coords[axis] < shape[axis]) {
                    carried = false;
                    break;
                }
                coords[axis] = 0;
            }
            if (carried) break;
        }
        double n = static_cast<double>(entry.cells);
        entry.mean = {op_sum / n, fn_sum / n, ref_sum / n, len_sum / n};
        entry.shapes = shapes.size();
        report.variables.push_back(std::move(entry));
    }
    return report;
}

std::vector<StrategyReport> compare_presets(const ValidatedModel& model,
                                            const std::vector<std::string>& presets) {
    std::vector<StrategyReport> reports;
    for (const auto& preset : presets) {
        LayoutPlan plan = preset_plan(model, preset);
        GridDoc doc = compile_model(model, plan);
        reports.push_back(report_for(model, plan, doc));
    }
    std::sort(reports.begin(), reports.end(),
              [](const StrategyReport& a, const StrategyReport& b) {
                  return a.preset < b.preset;
              });
    return reports;
}

std::string reports_to_json(const std::vector<StrategyReport>& reports) {
    nlohmann::ordered_json root = nlohmann::ordered_json::array();
    for (const auto& report : reports) {
        nlohmann::ordered_json r;
        r["preset"] = report.preset;
        r["variables"] = nlohmann::ordered_json::array();
        for (const auto& entry : report.variables) {
            nlohmann::ordered_json v;
            v["name"] = entry.name;
            v["cells"] = entry.cells;
            v["max"] = {{"operator_count", entry.max.operator_count},
                        {"function_count", entry.max.function_count},
                        {"reference_count", entry.max.reference_count},
                        {"text_length", entry.max.text_length}};
            v["mean"] = {{"operator_count", round_sig10(entry.mean.operator_count)},
                         {"function_count", round_sig10(entry.mean.function_count)},
                         {"reference_count", round_sig10(entry.mean.reference_count)},
                         {"text_length", round_sig10(entry.mean.text_length)}};
            v["shapes"] = entry.shapes;
            r["variables"].push_back(std::move(v));
        }
        root.push_back(std::move(r));
    }
    return root.dump(2) + "\n";
}

namespace {

bool contains_sum(const Expr& expr) {
    return std::visit(
        [](const auto& node) -> bool {
            using T = std::decay_t<decltype(node)>;
            if constexpr (std::is_same_v<T, SumExpr>) {
                return true;
            } else if constexpr (std::is_same_v<T, NegExpr>) {
                return contains_sum(*node.operand);
            } else if constexpr (std::is_same_v<T, BinaryExpr>) {
                return contains_sum(*node.lhs) || contains_sum(*node.rhs);
            } else {
                return false;
            }
        },
        expr.node);
}

}  // namespace

std::string render_comparison(const std::vector<StrategyReport>& reports,
                              const ValidatedModel& validated) {
    std::vector<std::string> aggregates;
    for (const auto& var : validated.model.variables) {
        if (var.has_formula() && var.expr && contains_sum(*var.expr)) {
            aggregates.push_back(var.name);
        }
    }
    std::ostringstream out;
    out << std::left << std::setw(36) << "aggregate variable";
    for (const auto& report : reports) out << std::setw(22) << report.preset;
    out << '\n';
    for (const auto& name : aggregates) {
        out << std::left << std::setw(36) << name;
        for (const auto& report : reports) {
            std::ostringstream cell;
            for (const auto& entry : report.variables) {
                if (entry.name != name) continue;
                cell << "refs=" << entry.max.reference_count
                         << " ops=" << entry.max.operator_count << " shapes=" << entry.shapes;
            }
            out << std::setw(22) << cell.str();
        }
        out << '\n';
    }
    return out.str();
}

}  // namespace dimsheet
