#pragma once

#include <map>
#include <string>
#include <vector>

#include "dimsheet/engine.hpp"
#include "dimsheet/grid.hpp"
#include "dimsheet/gridvm.hpp"
#include "dimsheet/model.hpp"

namespace dimsheet {

enum class LayoutErrorKind {
    UnknownPreset,
    PresetInapplicable,
    UnplacedVariable,
    BadCoordinate,
    Overlap,
    BadPlan,
};

class LayoutError : public std::runtime_error {
public:
    LayoutError(LayoutErrorKind kind, const std::string& message)
        : std::runtime_error(message), kind_(kind) {}
    LayoutErrorKind kind() const { return kind_; }

private:
    LayoutErrorKind kind_;
};

enum class PlacementStyle { Projection, TableColumn };

// Assignment of one variable's coordinates to grid cells: either a block
// whose dimensions are split over sheet/row/column axes (outer to inner), or
// one value column of a flat table.
struct Placement {
    std::string variable;
    PlacementStyle style = PlacementStyle::Projection;
    // projection
    std::vector<std::size_t> sheet_dims;
    std::vector<std::size_t> row_dims;
    std::vector<std::size_t> col_dims;
    std::string sheet;        // base sheet when sheet_dims is empty
    int origin_row = 1;       // first value cell
    int origin_col = 1;
    // table-column
    int table = -1;
    int column = -1;
};

// A dataset table: key columns enumerate every coordinate tuple (canonical
// row-major, one row each), member variables occupy the value columns.
struct FlatTable {
    DimensionSet dims;
    std::vector<std::size_t> key_order;  // displayed key column order
    std::string sheet;
    int origin_row = 1;  // header row
    int origin_col = 1;
    std::vector<std::string> columns;  // member variable names
};

struct LayoutPlan {
    std::string preset;  // empty for hand-written plans
    std::vector<Placement> placements;
    std::vector<FlatTable> tables;

    const Placement& placement_of(const std::string& variable) const;
};

struct CellAddress {
    std::string sheet;
    int row = 1;
    int col = 1;
};

// Catalogued layout structures. Projection presets address the model's
// declared dimensions positionally (first = months axis, then sector,
// product, region); variables outside a preset's signature get a default
// block (innermost dimension across columns, the rest stacked in rows).
std::vector<std::string> preset_names();

LayoutPlan preset_plan(const ValidatedModel& model, const std::string& preset);

CellAddress cell_address(const LayoutPlan& plan, const Model& model, const std::string& variable,
                         const std::vector<std::size_t>& coords);

// Materializes the plan: numbers for input/data cells, A1 formulas for
// calculated cells, labels for headers. Checks that no two blocks overlap.
GridDoc compile_model(const ValidatedModel& model, const LayoutPlan& plan);

// Aggregate emission for SUM over a placed variable. `kept` pins the
// retained dimensions' coordinates; the source's remaining dimensions are
// summed. Emits SUMIFS over a table column, SUM(range) when the cells form
// a rectangle on one sheet, and an explicit SUM(ref,...) list otherwise.
GridExprPtr emit_aggregate(const LayoutPlan& plan, const Model& model,
                           const std::string& source_variable,
                           const std::map<std::size_t, std::size_t>& kept,
                           const std::string& context_sheet);

// Replaces the stored number of a scalar input's cell; the grid analogue of
// re-entering an input in a workbook.
void override_grid_inputs(GridDoc& doc, const LayoutPlan& plan, const Model& model,
                          const std::map<std::string, double>& overrides);

// Gathers evaluated grid cells back into per-variable arrays, the bridge
// from eval_grid output to the engine's value-dump schema.
ValueStore extract_variable_values(const LayoutPlan& plan, const Model& model,
                                   const CellValues& cells);

std::string plan_to_json(const LayoutPlan& plan, const Model& model);
LayoutPlan plan_from_json(const std::string& text, const Model& model);

}  // namespace dimsheet
