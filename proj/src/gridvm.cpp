#include "dimsheet/gridvm.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>
#include <vector>

namespace dimsheet {

namespace {

using CellKey = std::tuple<std::string, int, int>;

std::string describe(const CellKey& key) {
    return std::get<0>(key) + "!" + cell_name(std::get<1>(key), std::get<2>(key));
}

class Evaluator {
public:
    explicit Evaluator(const GridDoc& doc) : doc_(doc) {}

    CellValues run() {
        CellValues out;
        for (const auto& sheet : doc_.sheets) {
            for (const auto& [pos, cell] : sheet.cells) {
                if (cell.kind == CellKind::Label) continue;
                CellKey key{sheet.name, pos.first, pos.second};
                out[key] = value_of(key);
            }
        }
        return out;
    }

private:
    const Cell* lookup(const CellKey& key) const {
        const Sheet* sheet = doc_.find_sheet(std::get<0>(key));
        if (!sheet) {
            throw GridEvalError(GridEvalErrorKind::UnknownSheet,
                                "reference to unknown sheet " + std::get<0>(key));
        }
        return sheet->find(std::get<1>(key), std::get<2>(key));
    }

    double value_of(const CellKey& key) {
        auto cached = values_.find(key);
        if (cached != values_.end()) return cached->second;

        const Cell* cell = lookup(key);
        if (!cell) {
            throw GridEvalError(GridEvalErrorKind::RefToEmptyCell,
                                "reference to empty cell " + describe(key));
        }
        if (cell->kind == CellKind::Label) {
            throw GridEvalError(GridEvalErrorKind::TypeError,
                                "arithmetic reference to label cell " + describe(key));
        }
        if (cell->kind == CellKind::Number) {
            values_[key] = cell->value;
            return cell->value;
        }
        if (in_progress_.count(key)) {
            std::ostringstream msg;
            msg << "cyclic references:";
            auto begin = std::find(stack_.begin(), stack_.end(), key);
            for (auto it = begin; it != stack_.end(); ++it) msg << ' ' << describe(*it) << " ->";
            msg << ' ' << describe(key);
            throw GridEvalError(GridEvalErrorKind::CyclicGrid, msg.str());
        }
        in_progress_.insert(key);
        stack_.push_back(key);
        GridExprPtr ast = parse_a1(cell->text);
        double value = eval(*ast, std::get<0>(key));
        if (!std::isfinite(value)) {
            throw GridEvalError(GridEvalErrorKind::NonFiniteResult,
                                "non-finite result in " + describe(key));
        }
        stack_.pop_back();
        in_progress_.erase(key);
        values_[key] = value;
        return value;
    }

    CellKey resolve(const GridCellRef& ref, const std::string& current_sheet) const {
        return {ref.sheet.empty() ? current_sheet : ref.sheet, ref.row, ref.col};
    }

    std::vector<CellKey> expand(const GridRange& range, const std::string& current_sheet) const {
        std::vector<CellKey> keys;
        std::string sheet = range.sheet.empty() ? current_sheet : range.sheet;
        for (int row = range.row1; row <= range.row2; ++row) {
            for (int col = range.col1; col <= range.col2; ++col) {
                keys.push_back({sheet, row, col});
            }
        }
        return keys;
    }

    double eval(const GridExpr& expr, const std::string& sheet) {
        return std::visit(
            [&](const auto& node) -> double {
                using T = std::decay_t<decltype(node)>;
                if constexpr (std::is_same_v<T, GridLiteral>) {
                    return node.value;
                } else if constexpr (std::is_same_v<T, GridString>) {
                    throw GridEvalError(GridEvalErrorKind::TypeError,
                                        "string used outside SUMIFS criteria");
                } else if constexpr (std::is_same_v<T, GridCellRef>) {
                    return value_of(resolve(node, sheet));
                } else if constexpr (std::is_same_v<T, GridRange>) {
                    throw GridEvalError(GridEvalErrorKind::TypeError,
                                        "range used outside SUM/SUMIFS");
                } else if constexpr (std::is_same_v<T, GridCall>) {
                    return node.fn == GridFn::Sum ? eval_sum(node, sheet)
                                                  : eval_sumifs(node, sheet);
                } else if constexpr (std::is_same_v<T, GridNeg>) {
                    return -eval(*node.operand, sheet);
                } else {
                    double lhs = eval(*node.lhs, sheet);
                    double rhs = eval(*node.rhs, sheet);
                    switch (node.op) {
                        case GridOp::Add: return lhs + rhs;
                        case GridOp::Sub: return lhs - rhs;
                        case GridOp::Mul: return lhs * rhs;
                        case GridOp::Div:
                            if (rhs == 0.0) {
                                throw GridEvalError(GridEvalErrorKind::DivideByZero,
                                                    "division by zero");
                            }
                            return lhs / rhs;
                        case GridOp::Pow: return std::pow(lhs, rhs);
                    }
                    return 0.0;
                }
            },
            expr.node);
    }

    double eval_sum(const GridCall& call, const std::string& sheet) {
        double total = 0.0;
        for (const auto& arg : call.args) {
            if (const auto* range = std::get_if<GridRange>(&arg->node)) {
                for (const auto& key : expand(*range, sheet)) total += value_of(key);
            } else {
                total += eval(*arg, sheet);
            }
        }
        return total;
    }

    // SUMIFS(sum_range, key_range, "criterion", ...): adds sum_range rows
    // whose key labels all equal their criterion strings (exact match).
    double eval_sumifs(const GridCall& call, const std::string& sheet) {
        const auto* sum_range = std::get_if<GridRange>(&call.args[0]->node);
        if (!sum_range) {
            throw GridEvalError(GridEvalErrorKind::TypeError,
                                "SUMIFS sum argument must be a range");
        }
        auto sum_cells = expand(*sum_range, sheet);
        std::vector<std::vector<CellKey>> key_cells;
        std::vector<std::string> criteria;
        for (std::size_t i = 1; i + 1 < call.args.size(); i += 2) {
            const auto* key_range = std::get_if<GridRange>(&call.args[i]->node);
            if (!key_range) {
                throw GridEvalError(GridEvalErrorKind::TypeError,
                                    "SUMIFS key argument must be a range");
            }
            const auto* criterion = std::get_if<GridString>(&call.args[i + 1]->node);
            if (!criterion) {
                throw GridEvalError(GridEvalErrorKind::TypeError,
                                    "SUMIFS criterion must be a string");
            }
            auto cells = expand(*key_range, sheet);
            if (cells.size() != sum_cells.size()) {
                throw GridEvalError(GridEvalErrorKind::TypeError,
                                    "SUMIFS ranges differ in size");
            }
            key_cells.push_back(std::move(cells));
            criteria.push_back(criterion->value);
        }
        double total = 0.0;
        for (std::size_t row = 0; row < sum_cells.size(); ++row) {
            bool selected = true;
            for (std::size_t k = 0; k < key_cells.size() && selected; ++k) {
                const Cell* cell = lookup(key_cells[k][row]);
                if (!cell) {
                    throw GridEvalError(GridEvalErrorKind::RefToEmptyCell,
                                        "SUMIFS key range covers empty cell " +
                                            describe(key_cells[k][row]));
                }
                if (cell->kind != CellKind::Label) {
                    throw GridEvalError(GridEvalErrorKind::TypeError,
                                        "SUMIFS key range covers non-label cell " +
                                            describe(key_cells[k][row]));
                }
                selected = cell->text == criteria[k];
            }
            if (selected) total += value_of(sum_cells[row]);
        }
        return total;
    }

    const GridDoc& doc_;
    std::map<CellKey, double> values_;
    std::set<CellKey> in_progress_;
    std::vector<CellKey> stack_;
};

}  // namespace

CellValues eval_grid(const GridDoc& doc) {
    return Evaluator(doc).run();
}

}  // namespace dimsheet
