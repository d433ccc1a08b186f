#pragma once

#include <string>
#include <vector>

#include "dimsheet/grid.hpp"
#include "dimsheet/layout.hpp"
#include "dimsheet/model.hpp"

namespace dimsheet {

// Counts over a formula's AST, never its text: arithmetic operator nodes,
// function calls, and references (a range counts once regardless of size;
// SUMIFS criteria strings count as neither).
struct FormulaMetrics {
    int operator_count = 0;
    int function_count = 0;
    int reference_count = 0;
    int text_length = 0;
};

FormulaMetrics measure_cell(const GridExpr& expr);

struct MetricsMean {
    double operator_count = 0;
    double function_count = 0;
    double reference_count = 0;
    double text_length = 0;
};

struct VariableReport {
    std::string name;
    std::size_t cells = 0;
    FormulaMetrics max;
    MetricsMean mean;
    std::size_t shapes = 0;  // distinct ASTs after replacing references
};

struct StrategyReport {
    std::string preset;
    std::vector<VariableReport> variables;  // every calculated/output variable
};

// The formula's AST with every reference collapsed to a placeholder; cells
// sharing a shape differ only in which cells they point at.
std::string formula_shape(const GridExpr& expr);

StrategyReport report_for(const ValidatedModel& model, const LayoutPlan& plan,
                          const GridDoc& doc);

// Compiles under each preset and measures every formula cell. Reports come
// back sorted by preset name.
std::vector<StrategyReport> compare_presets(const ValidatedModel& model,
                                            const std::vector<std::string>& presets);

std::string reports_to_json(const std::vector<StrategyReport>& reports);

// Side-by-side text table for the aggregate (SUM-carrying) variables.
std::string render_comparison(const std::vector<StrategyReport>& reports,
                              const ValidatedModel& model);

}  // namespace dimsheet
