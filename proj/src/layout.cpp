#include "dimsheet/layout.hpp"

#include <algorithm>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

namespace dimsheet {

namespace {

struct PresetDef {
    enum class Kind { Projection, Table, Database };
    Kind kind = Kind::Projection;
    std::size_t dims_required = 0;           // model must declare at least this many
    std::vector<std::size_t> signature;      // dimension positions the preset targets
    std::vector<std::size_t> sheet_axes, row_axes, col_axes;  // outer -> inner
    std::vector<std::size_t> key_order;      // Table kind: displayed key columns
};

// Positions into the model's dimension declarations: 0 = month-like,
// 1 = sector-like, 2 = product-like, 3 = region-like.
const std::map<std::string, PresetDef>& preset_catalog() {
    static const std::map<std::string, PresetDef> catalog = [] {
        std::map<std::string, PresetDef> c;
        auto proj = [](std::size_t required, std::vector<std::size_t> sig,
                       std::vector<std::size_t> sheets, std::vector<std::size_t> rows,
                       std::vector<std::size_t> cols) {
            PresetDef def;
            def.kind = PresetDef::Kind::Projection;
            def.dims_required = required;
            def.signature = std::move(sig);
            def.sheet_axes = std::move(sheets);
            def.row_axes = std::move(rows);
            def.col_axes = std::move(cols);
            return def;
        };
        c["MPR1"] = proj(4, {0, 2, 3}, {}, {2, 3}, {0});
        PresetDef mpr2;
        mpr2.kind = PresetDef::Kind::Table;
        mpr2.dims_required = 4;
        mpr2.signature = {0, 2, 3};
        mpr2.key_order = {0, 3, 2};
        c["MPR2"] = mpr2;
        c["MSP1"] = proj(3, {0, 1, 2}, {}, {2, 1}, {0});
        c["MSP2"] = proj(3, {0, 1, 2}, {}, {0}, {1, 2});
        c["MSP3"] = proj(3, {0, 1, 2}, {}, {1, 2}, {0});
        c["MSP4"] = proj(3, {0, 1, 2}, {}, {0}, {2, 1});
        c["MSP5"] = proj(3, {0, 1, 2}, {1}, {2}, {0});
        c["MSP6"] = proj(3, {0, 1, 2}, {}, {2, 1, 0}, {});
        c["MSPR1"] = proj(4, {0, 1, 2, 3}, {}, {2, 1, 3}, {0});
        c["MSPR2"] = proj(4, {0, 1, 2, 3}, {3}, {1, 2}, {0});
        c["MSPR3"] = proj(4, {0, 1, 2, 3}, {}, {3, 2, 1}, {0});
        c["MSPR4"] = proj(4, {0, 1, 2, 3}, {}, {1, 3, 2, 0}, {});
        c["MSPR6"] = proj(4, {0, 1, 2, 3}, {1, 3}, {2}, {0});
        PresetDef db;
        db.kind = PresetDef::Kind::Database;
        c["DB"] = db;
        return c;
    }();
    return catalog;
}

std::size_t product_of(const Model& model, const std::vector<std::size_t>& dims) {
    std::size_t n = 1;
    for (auto d : dims) n *= model.dimension(d).size();
    return n;
}

std::string table_sheet_name(const Model& model, const DimensionSet& dims) {
    std::string name = "T";
    for (auto d : dims.indices()) name += "_" + model.dimension(d).name;
    return name;
}

struct BlockGeometry {
    int header_rows = 0;  // column-dim header rows (name label row excluded)
    int header_cols = 0;
    int value_rows = 1;
    int value_cols = 1;
    int total_rows() const { return 1 + header_rows + value_rows; }
};

BlockGeometry geometry(const Model& model, const Placement& placement) {
    BlockGeometry g;
    g.header_rows = static_cast<int>(placement.col_dims.size());
    g.header_cols = static_cast<int>(placement.row_dims.size());
    g.value_rows = static_cast<int>(product_of(model, placement.row_dims));
    g.value_cols = static_cast<int>(product_of(model, placement.col_dims));
    return g;
}

}  // namespace

const Placement& LayoutPlan::placement_of(const std::string& variable) const {
    for (const auto& placement : placements) {
        if (placement.variable == variable) return placement;
    }
    throw LayoutError(LayoutErrorKind::UnplacedVariable, "no placement for [" + variable + "]");
}

std::vector<std::string> preset_names() {
    std::vector<std::string> names;
    for (const auto& [name, def] : preset_catalog()) names.push_back(name);
    return names;
}

LayoutPlan preset_plan(const ValidatedModel& validated, const std::string& preset) {
    const Model& model = validated.model;
    auto it = preset_catalog().find(preset);
    if (it == preset_catalog().end()) {
        throw LayoutError(LayoutErrorKind::UnknownPreset, "unknown preset: " + preset);
    }
    const PresetDef& def = it->second;
    if (model.dimensions.size() < def.dims_required) {
        std::ostringstream msg;
        msg << "preset " << preset << " needs " << def.dims_required
            << " declared dimensions, model has " << model.dimensions.size();
        throw LayoutError(LayoutErrorKind::PresetInapplicable, msg.str());
    }

    LayoutPlan plan;
    plan.preset = preset;
    DimensionSet signature{std::vector<std::size_t>(def.signature)};

    std::map<std::string, int> cursors;  // next free row per sheet
    auto place_block = [&](Placement& placement) {
        BlockGeometry g = geometry(model, placement);
        // One origin shared by every sheet the block spans.
        std::vector<std::string> sheets;
        if (placement.sheet_dims.empty()) {
            sheets.push_back(placement.sheet);
        } else {
            std::vector<std::size_t> coord(placement.sheet_dims.size(), 0);
            for (;;) {
                std::string name;
                for (std::size_t i = 0; i < placement.sheet_dims.size(); ++i) {
                    const Dimension& dim = model.dimension(placement.sheet_dims[i]);
                    if (i) name += "__";
                    name += dim.name + "_" + dim.instances[coord[i]];
                }
                sheets.push_back(std::move(name));
                std::size_t axis = coord.size();
                while (axis-- > 0) {
                    if (++coord[axis] < model.dimension(placement.sheet_dims[axis]).size()) break;
                    coord[axis] = 0;
                }
                bool wrapped = true;
                for (auto c : coord) wrapped = wrapped && c == 0;
                if (wrapped) break;
            }
        }
        int top = 1;
        for (const auto& name : sheets) {
            auto cur = cursors.find(name);
            if (cur != cursors.end()) top = std::max(top, cur->second);
            else cursors.emplace(name, 1);
        }
        placement.origin_row = top + 1 + g.header_rows;
        placement.origin_col = 1 + g.header_cols;
        for (const auto& name : sheets) {
            cursors[name] = top + g.total_rows() + 1;  // one blank row between blocks
        }
    };

    auto place_scalar = [&](const VariableDecl& var) {
        Placement placement;
        placement.variable = var.name;
        placement.sheet = "Params";
        int top = 1;
        auto cur = cursors.find("Params");
        if (cur != cursors.end()) top = cur->second;
        else cursors.emplace("Params", 1);
        placement.origin_row = top;
        placement.origin_col = 2;  // name label sits at column 1
        cursors["Params"] = top + 2;
        plan.placements.push_back(std::move(placement));
    };

    auto table_for = [&](const DimensionSet& dims,
                         const std::vector<std::size_t>& key_order) -> int {
        for (std::size_t i = 0; i < plan.tables.size(); ++i) {
            if (plan.tables[i].dims == dims) return static_cast<int>(i);
        }
        FlatTable table;
        table.dims = dims;
        table.key_order = key_order;
        table.sheet = table_sheet_name(model, dims);
        table.origin_row = 1;
        table.origin_col = 1;
        plan.tables.push_back(std::move(table));
        return static_cast<int>(plan.tables.size() - 1);
    };

    auto place_in_table = [&](const VariableDecl& var, const std::vector<std::size_t>& key_order) {
        int table = table_for(var.dims, key_order);
        Placement placement;
        placement.variable = var.name;
        placement.style = PlacementStyle::TableColumn;
        placement.table = table;
        placement.column = static_cast<int>(plan.tables[table].columns.size());
        plan.tables[table].columns.push_back(var.name);
        plan.placements.push_back(std::move(placement));
    };

    auto default_axes = [&](const DimensionSet& dims, Placement& placement) {
        const auto& indices = dims.indices();
        placement.col_dims = {indices.back()};
        placement.row_dims.assign(indices.begin(), indices.end() - 1);
    };

    for (const auto& var : model.variables) {
        if (var.dims.empty()) {
            place_scalar(var);
            continue;
        }
        if (def.kind == PresetDef::Kind::Database) {
            place_in_table(var, var.dims.indices());
            continue;
        }
        if (def.kind == PresetDef::Kind::Table && var.dims == signature) {
            place_in_table(var, def.key_order);
            continue;
        }
        Placement placement;
        placement.variable = var.name;
        placement.sheet = "Model";
        if (def.kind == PresetDef::Kind::Projection && var.dims == signature) {
            placement.sheet_dims = def.sheet_axes;
            placement.row_dims = def.row_axes;
            placement.col_dims = def.col_axes;
        } else {
            default_axes(var.dims, placement);
        }
        place_block(placement);
        plan.placements.push_back(std::move(placement));
    }
    return plan;
}

namespace {

std::size_t position_of(const std::vector<std::size_t>& dims, std::size_t dim) {
    for (std::size_t i = 0; i < dims.size(); ++i) {
        if (dims[i] == dim) return i;
    }
    throw LayoutError(LayoutErrorKind::BadPlan, "axis dimension missing from the variable");
}

std::size_t axis_offset(const Model& model, const DimensionSet& var_dims,
                        const std::vector<std::size_t>& axis_dims,
                        const std::vector<std::size_t>& coords) {
    std::size_t offset = 0;
    for (auto dim : axis_dims) {
        offset = offset * model.dimension(dim).size() +
                 coords[position_of(var_dims.indices(), dim)];
    }
    return offset;
}

std::string resolve_sheet(const Model& model, const Placement& placement,
                          const DimensionSet& var_dims, const std::vector<std::size_t>& coords) {
    if (placement.sheet_dims.empty()) return placement.sheet;
    std::string name;
    for (std::size_t i = 0; i < placement.sheet_dims.size(); ++i) {
        std::size_t dim = placement.sheet_dims[i];
        std::size_t position = position_of(var_dims.indices(), dim);
        const Dimension& dimension = model.dimension(dim);
        if (i) name += "__";
        name += dimension.name + "_" + dimension.instances.at(coords[position]);
    }
    return name;
}

std::size_t table_row_index(const Model& model, const DimensionSet& dims,
                            const std::vector<std::size_t>& coords) {
    std::size_t index = 0;
    for (std::size_t i = 0; i < dims.size(); ++i) {
        index = index * model.dimension(dims.indices()[i]).size() + coords[i];
    }
    return index;
}

}  // namespace

CellAddress cell_address(const LayoutPlan& plan, const Model& model, const std::string& variable,
                         const std::vector<std::size_t>& coords) {
    const Placement& placement = plan.placement_of(variable);
    const VariableDecl* var = model.find_variable(variable);
    if (!var) {
        throw LayoutError(LayoutErrorKind::UnplacedVariable, "unknown variable: " + variable);
    }
    if (coords.size() != var->dims.size()) {
        throw LayoutError(LayoutErrorKind::BadCoordinate,
                          "coordinate arity mismatch for [" + variable + "]");
    }
    for (std::size_t i = 0; i < coords.size(); ++i) {
        if (coords[i] >= model.dimension(var->dims.indices()[i]).size()) {
            throw LayoutError(LayoutErrorKind::BadCoordinate,
                              "coordinate out of range for [" + variable + "]");
        }
    }
    if (placement.style == PlacementStyle::TableColumn) {
        const FlatTable& table = plan.tables.at(placement.table);
        CellAddress address;
        address.sheet = table.sheet;
        address.row = table.origin_row + 1 +
                      static_cast<int>(table_row_index(model, table.dims, coords));
        address.col = table.origin_col + static_cast<int>(table.key_order.size()) +
                      placement.column;
        return address;
    }
    CellAddress address;
    address.sheet = resolve_sheet(model, placement, var->dims, coords);
    address.row = placement.origin_row +
                  static_cast<int>(axis_offset(model, var->dims, placement.row_dims, coords));
    address.col = placement.origin_col +
                  static_cast<int>(axis_offset(model, var->dims, placement.col_dims, coords));
    return address;
}

namespace {

struct Region {
    std::string sheet;
    int row1, col1, row2, col2;
    std::string owner;

    bool intersects(const Region& other) const {
        return sheet == other.sheet && row1 <= other.row2 && other.row1 <= row2 &&
               col1 <= other.col2 && other.col1 <= col2;
    }
};

// Every cell a placement occupies, headers and name labels included.
std::vector<Region> placement_regions(const Model& model, const Placement& placement) {
    std::vector<Region> regions;
    if (placement.style == PlacementStyle::TableColumn) return regions;  // table owns its region
    const VariableDecl* var = model.find_variable(placement.variable);
    BlockGeometry g = geometry(model, placement);
    int top = placement.origin_row - 1 - g.header_rows;
    int left = placement.origin_col - g.header_cols;
    if (var && var->dims.empty()) {
        top = placement.origin_row;
        left = placement.origin_col - 1;
        if (left < 1) {
            throw LayoutError(LayoutErrorKind::BadPlan,
                              "scalar placement needs room for its name label");
        }
        regions.push_back({placement.sheet, top, left, placement.origin_row,
                           placement.origin_col, placement.variable});
        return regions;
    }
    if (top < 1 || left < 1) {
        throw LayoutError(LayoutErrorKind::BadPlan,
                          "block origin leaves no room for headers for [" + placement.variable +
                              "]");
    }
    int bottom = placement.origin_row + g.value_rows - 1;
    int right = placement.origin_col + g.value_cols - 1;
    std::vector<std::size_t> coord(placement.sheet_dims.size(), 0);
    const DimensionSet& dims = var ? var->dims : DimensionSet();
    for (;;) {
        std::vector<std::size_t> full(dims.size(), 0);
        for (std::size_t i = 0; i < placement.sheet_dims.size(); ++i) {
            full[position_of(dims.indices(), placement.sheet_dims[i])] = coord[i];
        }
        regions.push_back({resolve_sheet(model, placement, dims, full), top, left, bottom, right,
                           placement.variable});
        if (placement.sheet_dims.empty()) break;
        std::size_t axis = coord.size();
        bool carried = true;
        while (axis-- > 0) {
            if (++coord[axis] < model.dimension(placement.sheet_dims[axis]).size()) {
                carried = false;
                break;
            }
            coord[axis] = 0;
        }
        if (carried) break;
    }
    return regions;
}

std::vector<Region> table_regions(const Model& model, const LayoutPlan& plan) {
    std::vector<Region> regions;
    for (const auto& table : plan.tables) {
        int rows = static_cast<int>(model.cell_count(table.dims));
        int cols = static_cast<int>(table.key_order.size() + table.columns.size());
        regions.push_back({table.sheet, table.origin_row, table.origin_col,
                           table.origin_row + rows, table.origin_col + cols - 1,
                           table.sheet});
    }
    return regions;
}

class Compiler {
public:
    Compiler(const ValidatedModel& validated, const LayoutPlan& plan)
        : model_(validated.model), plan_(plan) {
        for (const auto& decl : model_.variables) dim_env_[decl.name] = decl.dims;
    }

    GridDoc run() {
        check_plan();
        check_overlaps();
        for (const auto& var : model_.variables) {
            const Placement& placement = plan_.placement_of(var.name);
            if (placement.style == PlacementStyle::TableColumn) {
                emit_table_column(var, placement);
            } else if (var.dims.empty()) {
                emit_scalar(var, placement);
            } else {
                emit_block(var, placement);
            }
        }
        return std::move(doc_);
    }

private:
    void check_plan() {
        for (const auto& var : model_.variables) {
            plan_.placement_of(var.name);  // throws when missing
        }
        std::set<std::string> placed;
        for (const auto& placement : plan_.placements) {
            if (!model_.find_variable(placement.variable)) {
                throw LayoutError(LayoutErrorKind::BadPlan,
                                  "plan places unknown variable [" + placement.variable + "]");
            }
            if (!placed.insert(placement.variable).second) {
                throw LayoutError(LayoutErrorKind::BadPlan,
                                  "plan places [" + placement.variable + "] twice");
            }
        }
        for (const auto& placement : plan_.placements) {
            if (placement.style == PlacementStyle::Projection) {
                const VariableDecl* var = model_.find_variable(placement.variable);
                if (!var) continue;
                std::vector<std::size_t> axes = placement.sheet_dims;
                axes.insert(axes.end(), placement.row_dims.begin(), placement.row_dims.end());
                axes.insert(axes.end(), placement.col_dims.begin(), placement.col_dims.end());
                std::sort(axes.begin(), axes.end());
                if (std::adjacent_find(axes.begin(), axes.end()) != axes.end() ||
                    axes != var->dims.indices()) {
                    throw LayoutError(LayoutErrorKind::BadPlan,
                                      "axes of [" + placement.variable +
                                          "] do not partition its dimension set");
                }
                continue;
            }
            if (placement.table < 0 ||
                placement.table >= static_cast<int>(plan_.tables.size())) {
                throw LayoutError(LayoutErrorKind::BadPlan,
                                  "table index out of range for [" + placement.variable + "]");
            }
            const FlatTable& table = plan_.tables[placement.table];
            const VariableDecl* var = model_.find_variable(placement.variable);
            if (var && !(var->dims == table.dims)) {
                throw LayoutError(LayoutErrorKind::BadPlan,
                                  "[" + placement.variable +
                                      "] dimensions differ from its table's key");
            }
            if (placement.column < 0 ||
                placement.column >= static_cast<int>(table.columns.size()) ||
                table.columns[placement.column] != placement.variable) {
                throw LayoutError(LayoutErrorKind::BadPlan,
                                  "table column mismatch for [" + placement.variable + "]");
            }
        }
        for (const auto& table : plan_.tables) {
            std::vector<std::size_t> sorted = table.key_order;
            std::sort(sorted.begin(), sorted.end());
            if (!(DimensionSet(sorted) == table.dims)) {
                throw LayoutError(LayoutErrorKind::BadPlan,
                                  "table key order must permute the table's dimension set");
            }
        }
    }

    void check_overlaps() {
        std::vector<Region> regions = table_regions(model_, plan_);
        for (const auto& placement : plan_.placements) {
            auto more = placement_regions(model_, placement);
            regions.insert(regions.end(), more.begin(), more.end());
        }
        for (std::size_t i = 0; i < regions.size(); ++i) {
            for (std::size_t j = i + 1; j < regions.size(); ++j) {
                if (regions[i].intersects(regions[j])) {
                    throw LayoutError(LayoutErrorKind::Overlap,
                                      "layout regions overlap on sheet " + regions[i].sheet +
                                          ": " + regions[i].owner + " and " + regions[j].owner);
                }
            }
        }
    }

    void set_label(const std::string& sheet, int row, int col, const std::string& text) {
        doc_.sheet(sheet).cells[{row, col}] = Cell{CellKind::Label, text, 0.0};
    }
    void set_number(const std::string& sheet, int row, int col, double value) {
        doc_.sheet(sheet).cells[{row, col}] = Cell{CellKind::Number, "", value};
    }
    void set_formula(const std::string& sheet, int row, int col, const GridExpr& expr) {
        doc_.sheet(sheet).cells[{row, col}] = Cell{CellKind::Formula, serialize_grid_expr(expr), 0.0};
    }

    void emit_scalar(const VariableDecl& var, const Placement& placement) {
        set_label(placement.sheet, placement.origin_row, placement.origin_col - 1, var.name);
        if (var.has_formula()) {
            auto expr = translate(var, {}, placement.sheet);
            set_formula(placement.sheet, placement.origin_row, placement.origin_col, *expr);
        } else {
            set_number(placement.sheet, placement.origin_row, placement.origin_col,
                       var.table->entries.at({}));
        }
    }

    // Header labels are written once per repetition group, outer labels
    // spanning their group (as a person lays out nested axes).
    void emit_block(const VariableDecl& var, const Placement& placement) {
        BlockGeometry g = geometry(model_, placement);
        std::vector<std::string> sheets = block_sheets(var, placement);
        for (const auto& sheet : sheets) {
            int top = placement.origin_row - 1 - g.header_rows;
            int left = placement.origin_col - g.header_cols;
            set_label(sheet, top, left, var.name);
            // column headers
            for (std::size_t k = 0; k < placement.col_dims.size(); ++k) {
                const Dimension& dim = model_.dimension(placement.col_dims[k]);
                std::size_t group = 1;
                for (std::size_t m = k + 1; m < placement.col_dims.size(); ++m) {
                    group *= model_.dimension(placement.col_dims[m]).size();
                }
                for (int j = 0; j < g.value_cols; ++j) {
                    if (j % group == 0) {
                        set_label(sheet, top + 1 + static_cast<int>(k),
                                  placement.origin_col + j,
                                  dim.instances[(j / group) % dim.size()]);
                    }
                }
            }
            // row headers
            for (std::size_t k = 0; k < placement.row_dims.size(); ++k) {
                const Dimension& dim = model_.dimension(placement.row_dims[k]);
                std::size_t group = 1;
                for (std::size_t m = k + 1; m < placement.row_dims.size(); ++m) {
                    group *= model_.dimension(placement.row_dims[m]).size();
                }
                for (int i = 0; i < g.value_rows; ++i) {
                    if (i % group == 0) {
                        set_label(sheet, placement.origin_row + i,
                                  left + static_cast<int>(k),
                                  dim.instances[(i / group) % dim.size()]);
                    }
                }
            }
        }
        // values
        std::vector<std::size_t> coords(var.dims.size(), 0);
        auto shape = model_.shape_of(var.dims);
        if (model_.cell_count(var.dims) == 0) return;
        for (;;) {
            CellAddress address = cell_address(plan_, model_, var.name, coords);
            if (var.has_formula()) {
                std::map<std::size_t, std::size_t> env;
                for (std::size_t i = 0; i < coords.size(); ++i) {
                    env[var.dims.indices()[i]] = coords[i];
                }
                auto expr = translate(var, env, address.sheet);
                set_formula(address.sheet, address.row, address.col, *expr);
            } else {
                set_number(address.sheet, address.row, address.col,
                           var.table->entries.at(coords));
            }
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
    }

    std::vector<std::string> block_sheets(const VariableDecl& var, const Placement& placement) {
        if (placement.sheet_dims.empty()) return {placement.sheet};
        std::vector<std::string> names;
        std::vector<std::size_t> coord(placement.sheet_dims.size(), 0);
        for (;;) {
            std::vector<std::size_t> full(var.dims.size(), 0);
            for (std::size_t i = 0; i < placement.sheet_dims.size(); ++i) {
                full[position_of(var.dims.indices(), placement.sheet_dims[i])] = coord[i];
            }
            names.push_back(resolve_sheet(model_, placement, var.dims, full));
            std::size_t axis = coord.size();
            bool carried = true;
            while (axis-- > 0) {
                if (++coord[axis] < model_.dimension(placement.sheet_dims[axis]).size()) {
                    carried = false;
                    break;
                }
                coord[axis] = 0;
            }
            if (carried) break;
        }
        return names;
    }

    void emit_table_column(const VariableDecl& var, const Placement& placement) {
        const FlatTable& table = plan_.tables.at(placement.table);
        if (placement.column == 0) emit_table_frame(table);
        std::vector<std::size_t> coords(table.dims.size(), 0);
        auto shape = model_.shape_of(table.dims);
        for (;;) {
            CellAddress address = cell_address(plan_, model_, var.name, coords);
            if (var.has_formula()) {
                std::map<std::size_t, std::size_t> env;
                for (std::size_t i = 0; i < coords.size(); ++i) {
                    env[table.dims.indices()[i]] = coords[i];
                }
                auto expr = translate(var, env, address.sheet);
                set_formula(address.sheet, address.row, address.col, *expr);
            } else {
                set_number(address.sheet, address.row, address.col,
                           var.table->entries.at(coords));
            }
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
    }

    void emit_table_frame(const FlatTable& table) {
        // header row: key column names, then member variable names
        for (std::size_t k = 0; k < table.key_order.size(); ++k) {
            set_label(table.sheet, table.origin_row, table.origin_col + static_cast<int>(k),
                      model_.dimension(table.key_order[k]).name);
        }
        for (std::size_t c = 0; c < table.columns.size(); ++c) {
            set_label(table.sheet, table.origin_row,
                      table.origin_col + static_cast<int>(table.key_order.size() + c),
                      table.columns[c]);
        }
        // key label cells, one row per canonical coordinate
        std::vector<std::size_t> coords(table.dims.size(), 0);
        auto shape = model_.shape_of(table.dims);
        for (;;) {
            int row = table.origin_row + 1 +
                      static_cast<int>(table_row_index(model_, table.dims, coords));
            for (std::size_t k = 0; k < table.key_order.size(); ++k) {
                std::size_t dim = table.key_order[k];
                std::size_t position = position_of(table.dims.indices(), dim);
                set_label(table.sheet, row, table.origin_col + static_cast<int>(k),
                          model_.dimension(dim).instances[coords[position]]);
            }
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
    }

    GridExprPtr ref_to(const CellAddress& address, const std::string& context_sheet) {
        return grid_cell(address.sheet == context_sheet ? "" : address.sheet, address.row,
                         address.col);
    }

    // Translates a variable's formula for one coordinate. `env` maps
    // dimension index -> instance, covering at least the variable's own
    // dimensions (SUM expansion extends it with the summed dimensions).
    GridExprPtr translate(const VariableDecl& var,
                          const std::map<std::size_t, std::size_t>& env,
                          const std::string& context_sheet) {
        return translate_expr(*var.expr, var.dims, env, context_sheet);
    }

    GridExprPtr translate_expr(const Expr& expr, const DimensionSet& target,
                               const std::map<std::size_t, std::size_t>& env,
                               const std::string& context_sheet) {
        return std::visit(
            [&](const auto& node) -> GridExprPtr {
                using T = std::decay_t<decltype(node)>;
                if constexpr (std::is_same_v<T, NumberExpr>) {
                    return grid_literal(node.value);
                } else if constexpr (std::is_same_v<T, VarRefExpr>) {
                    const VariableDecl& ref = *model_.find_variable(node.name);
                    std::vector<std::size_t> coords;
                    for (auto dim : ref.dims.indices()) coords.push_back(env.at(dim));
                    return ref_to(cell_address(plan_, model_, node.name, coords), context_sheet);
                } else if constexpr (std::is_same_v<T, NegExpr>) {
                    return grid_neg(translate_expr(*node.operand, target, env, context_sheet));
                } else if constexpr (std::is_same_v<T, BinaryExpr>) {
                    GridOp op = GridOp::Add;
                    switch (node.op) {
                        case BinaryOp::Add: op = GridOp::Add; break;
                        case BinaryOp::Sub: op = GridOp::Sub; break;
                        case BinaryOp::Mul: op = GridOp::Mul; break;
                        case BinaryOp::Div: op = GridOp::Div; break;
                        case BinaryOp::Pow: op = GridOp::Pow; break;
                    }
                    return grid_binary(op, translate_expr(*node.lhs, target, env, context_sheet),
                                       translate_expr(*node.rhs, target, env, context_sheet));
                } else {
                    return translate_sum(node, target, env, context_sheet);
                }
            },
            expr.node);
    }

    GridExprPtr translate_sum(const SumExpr& node, const DimensionSet& target,
                              const std::map<std::size_t, std::size_t>& env,
                              const std::string& context_sheet) {
        if (const auto* ref = std::get_if<VarRefExpr>(&node.operand->node)) {
            std::map<std::size_t, std::size_t> kept;
            for (auto dim : target.indices()) kept[dim] = env.at(dim);
            return emit_aggregate(plan_, model_, ref->name, kept, context_sheet);
        }
        // SUM over a composite expression: no cells exist for the operand,
        // so expand the reduction into an explicit chain of additions.
        DimensionSet operand_dims = infer_dims(*node.operand, model_, dim_env_, target);
        DimensionSet reduced = operand_dims.minus(target);
        std::vector<std::size_t> coord(reduced.size(), 0);
        GridExprPtr chain;
        for (;;) {
            auto extended = env;
            for (std::size_t i = 0; i < reduced.size(); ++i) {
                extended[reduced.indices()[i]] = coord[i];
            }
            GridExprPtr piece = translate_expr(*node.operand, target, extended, context_sheet);
            chain = chain ? grid_binary(GridOp::Add, chain, piece) : piece;
            if (reduced.empty()) break;
            std::size_t axis = coord.size();
            bool carried = true;
            while (axis-- > 0) {
                if (++coord[axis] < model_.dimension(reduced.indices()[axis]).size()) {
                    carried = false;
                    break;
                }
                coord[axis] = 0;
            }
            if (carried) break;
        }
        return chain;
    }

    const Model& model_;
    const LayoutPlan& plan_;
    std::map<std::string, DimensionSet> dim_env_;
    GridDoc doc_;
};

}  // namespace

GridDoc compile_model(const ValidatedModel& model, const LayoutPlan& plan) {
    return Compiler(model, plan).run();
}

GridExprPtr emit_aggregate(const LayoutPlan& plan, const Model& model,
                           const std::string& source_variable,
                           const std::map<std::size_t, std::size_t>& kept,
                           const std::string& context_sheet) {
    const VariableDecl* source = model.find_variable(source_variable);
    if (!source) {
        throw LayoutError(LayoutErrorKind::UnplacedVariable,
                          "unknown variable: " + source_variable);
    }
    const Placement& placement = plan.placement_of(source_variable);

    auto sheet_or_local = [&](const std::string& sheet) {
        return sheet == context_sheet ? std::string() : sheet;
    };

    if (placement.style == PlacementStyle::TableColumn) {
        const FlatTable& table = plan.tables.at(placement.table);
        int rows = static_cast<int>(model.cell_count(table.dims));
        int first = table.origin_row + 1;
        int last = table.origin_row + rows;
        int value_col = table.origin_col + static_cast<int>(table.key_order.size()) +
                        placement.column;
        std::string sheet = sheet_or_local(table.sheet);
        auto value_range = grid_range(sheet, first, value_col, last, value_col);
        std::vector<GridExprPtr> args{value_range};
        for (std::size_t i = 0; i < source->dims.size(); ++i) {
            std::size_t dim = source->dims.indices()[i];
            auto it = kept.find(dim);
            if (it == kept.end()) continue;  // summed away
            int key_col = table.origin_col + static_cast<int>(position_of(table.key_order, dim));
            args.push_back(grid_range(sheet, first, key_col, last, key_col));
            args.push_back(grid_string(model.dimension(dim).instances.at(it->second)));
        }
        if (args.size() == 1) return grid_call(GridFn::Sum, std::move(args));
        return grid_call(GridFn::Sumifs, std::move(args));
    }

    // Enumerate the source cells: kept dimensions pinned, the rest swept in
    // canonical row-major order.
    DimensionSet reduced = source->dims;
    {
        std::vector<std::size_t> reduced_indices;
        for (auto dim : source->dims.indices()) {
            if (!kept.count(dim)) reduced_indices.push_back(dim);
        }
        reduced = DimensionSet(std::move(reduced_indices));
    }
    std::vector<CellAddress> cells;
    std::vector<std::size_t> coord(reduced.size(), 0);
    for (;;) {
        std::vector<std::size_t> full(source->dims.size(), 0);
        for (std::size_t i = 0; i < source->dims.size(); ++i) {
            std::size_t dim = source->dims.indices()[i];
            auto it = kept.find(dim);
            if (it != kept.end()) {
                full[i] = it->second;
            } else {
                full[i] = coord[position_of(reduced.indices(), dim)];
            }
        }
        cells.push_back(cell_address(plan, model, source_variable, full));
        if (reduced.empty()) break;
        std::size_t axis = coord.size();
        bool carried = true;
        while (axis-- > 0) {
            if (++coord[axis] < model.dimension(reduced.indices()[axis]).size()) {
                carried = false;
                break;
            }
            coord[axis] = 0;
        }
        if (carried) break;
    }

    bool single_sheet = true;
    int min_row = cells[0].row, max_row = cells[0].row;
    int min_col = cells[0].col, max_col = cells[0].col;
    for (const auto& cell : cells) {
        single_sheet = single_sheet && cell.sheet == cells[0].sheet;
        min_row = std::min(min_row, cell.row);
        max_row = std::max(max_row, cell.row);
        min_col = std::min(min_col, cell.col);
        max_col = std::max(max_col, cell.col);
    }
    std::size_t area = static_cast<std::size_t>(max_row - min_row + 1) *
                       static_cast<std::size_t>(max_col - min_col + 1);
    if (single_sheet && area == cells.size()) {
        auto range = grid_range(sheet_or_local(cells[0].sheet), min_row, min_col, max_row,
                                max_col);
        return grid_call(GridFn::Sum, {range});
    }
    std::vector<GridExprPtr> refs;
    refs.reserve(cells.size());
    for (const auto& cell : cells) {
        refs.push_back(grid_cell(sheet_or_local(cell.sheet), cell.row, cell.col));
    }
    return grid_call(GridFn::Sum, std::move(refs));
}

void override_grid_inputs(GridDoc& doc, const LayoutPlan& plan, const Model& model,
                          const std::map<std::string, double>& overrides) {
    for (const auto& [name, value] : overrides) {
        const VariableDecl* var = model.find_variable(name);
        if (!var || var->kind != VarKind::Input || !var->dims.empty()) {
            throw LayoutError(LayoutErrorKind::BadPlan,
                              "override target is not a scalar input: " + name);
        }
        CellAddress address = cell_address(plan, model, name, {});
        Sheet& sheet = doc.sheet(address.sheet);
        sheet.cells[{address.row, address.col}] = Cell{CellKind::Number, "", value};
    }
}

namespace {

std::vector<std::string> axis_names(const Model& model, const std::vector<std::size_t>& dims) {
    std::vector<std::string> names;
    for (auto d : dims) names.push_back(model.dimension(d).name);
    return names;
}

std::vector<std::size_t> axis_indices(const Model& model, const nlohmann::json& names) {
    std::vector<std::size_t> indices;
    for (const auto& name : names) {
        auto index = model.dimension_index(name.get<std::string>());
        if (!index) {
            throw LayoutError(LayoutErrorKind::BadPlan,
                              "plan references unknown dimension " + name.get<std::string>());
        }
        indices.push_back(*index);
    }
    return indices;
}

}  // namespace

ValueStore extract_variable_values(const LayoutPlan& plan, const Model& model,
                                   const CellValues& cells) {
    ValueStore store;
    for (const auto& var : model.variables) {
        DimArray array{var.dims, model.shape_of(var.dims), {}};
        array.values.reserve(model.cell_count(var.dims));
        std::vector<std::size_t> coord(var.dims.size(), 0);
        for (;;) {
            CellAddress address = cell_address(plan, model, var.name, coord);
            auto it = cells.find({address.sheet, address.row, address.col});
            if (it == cells.end()) {
                throw LayoutError(LayoutErrorKind::BadCoordinate,
                                  "grid has no value at " + address.sheet + "!" +
                                      cell_name(address.row, address.col) + " for [" +
                                      var.name + "]");
            }
            array.values.push_back(it->second);
            std::size_t axis = coord.size();
            bool carried = true;
            while (axis-- > 0) {
                if (++coord[axis] < array.shape[axis]) {
                    carried = false;
                    break;
                }
                coord[axis] = 0;
            }
            if (carried) break;
        }
        store.emplace(var.name, std::move(array));
    }
    return store;
}

std::string plan_to_json(const LayoutPlan& plan, const Model& model) {
    nlohmann::ordered_json root;
    root["preset"] = plan.preset;
    root["tables"] = nlohmann::ordered_json::array();
    for (const auto& table : plan.tables) {
        nlohmann::ordered_json t;
        t["dims"] = model.dim_names(table.dims);
        t["key_order"] = axis_names(model, table.key_order);
        t["sheet"] = table.sheet;
        t["origin"] = {table.origin_row, table.origin_col};
        t["columns"] = table.columns;
        root["tables"].push_back(std::move(t));
    }
    root["placements"] = nlohmann::ordered_json::array();
    for (const auto& placement : plan.placements) {
        nlohmann::ordered_json p;
        p["variable"] = placement.variable;
        if (placement.style == PlacementStyle::TableColumn) {
            p["style"] = "table-column";
            p["table"] = placement.table;
            p["column"] = placement.column;
        } else {
            p["style"] = "projection";
            p["sheet_dims"] = axis_names(model, placement.sheet_dims);
            p["row_dims"] = axis_names(model, placement.row_dims);
            p["col_dims"] = axis_names(model, placement.col_dims);
            p["sheet"] = placement.sheet;
            p["origin"] = {placement.origin_row, placement.origin_col};
        }
        root["placements"].push_back(std::move(p));
    }
    return root.dump(2) + "\n";
}

LayoutPlan plan_from_json(const std::string& text, const Model& model) {
    nlohmann::json root = nlohmann::json::parse(text);
    LayoutPlan plan;
    plan.preset = root.value("preset", "");
    for (const auto& t : root.value("tables", nlohmann::json::array())) {
        FlatTable table;
        table.dims = DimensionSet(axis_indices(model, t.at("dims")));
        table.key_order = axis_indices(model, t.at("key_order"));
        table.sheet = t.at("sheet").get<std::string>();
        table.origin_row = t.at("origin").at(0).get<int>();
        table.origin_col = t.at("origin").at(1).get<int>();
        for (const auto& column : t.at("columns")) {
            table.columns.push_back(column.get<std::string>());
        }
        plan.tables.push_back(std::move(table));
    }
    for (const auto& p : root.at("placements")) {
        Placement placement;
        placement.variable = p.at("variable").get<std::string>();
        std::string style = p.at("style").get<std::string>();
        if (style == "table-column") {
            placement.style = PlacementStyle::TableColumn;
            placement.table = p.at("table").get<int>();
            placement.column = p.at("column").get<int>();
        } else if (style == "projection") {
            placement.sheet_dims = axis_indices(model, p.value("sheet_dims",
                                                               nlohmann::json::array()));
            placement.row_dims = axis_indices(model, p.value("row_dims",
                                                             nlohmann::json::array()));
            placement.col_dims = axis_indices(model, p.value("col_dims",
                                                             nlohmann::json::array()));
            placement.sheet = p.at("sheet").get<std::string>();
            placement.origin_row = p.at("origin").at(0).get<int>();
            placement.origin_col = p.at("origin").at(1).get<int>();
        } else {
            throw LayoutError(LayoutErrorKind::BadPlan, "unknown placement style: " + style);
        }
        plan.placements.push_back(std::move(placement));
    }
    return plan;
}

}  // namespace dimsheet
