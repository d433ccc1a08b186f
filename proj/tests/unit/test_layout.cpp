#include <doctest.h>

#include <set>

#include "dimsheet/engine.hpp"
#include "dimsheet/gridvm.hpp"
#include "dimsheet/layout.hpp"
#include "support/fixtures.hpp"

using namespace dimsheet;

TEST_CASE("cell_address walks blocks in mixed radix") {
    ValidatedModel atw = testsupport::load_atw();
    const Model& model = atw.model;

    LayoutPlan plan = preset_plan(atw, "MPR1");
    // Rebase to the worked example: first value cell at row 3, column 4.
    for (auto& placement : plan.placements) {
        if (placement.variable == "MPR Unit Sales") {
            placement.origin_row = 3;
            placement.origin_col = 4;
        }
    }
    auto at = [&](std::size_t m, std::size_t p, std::size_t r) {
        return cell_address(plan, model, "MPR Unit Sales", {m, p, r});
    };
    CHECK(at(0, 0, 0).row == 3);   // (Jan, Standard, N)
    CHECK(at(0, 0, 0).col == 4);
    CHECK(at(1, 0, 0).row == 3);   // (Feb, Standard, N): next month, same row
    CHECK(at(1, 0, 0).col == 5);
    CHECK(at(0, 1, 0).row == 8);   // (Jan, Deluxe, N): five regions per product
    CHECK(at(0, 1, 0).col == 4);

    // hand-enumerated 10x12 block: row = 3 + p*5 + r, col = 4 + m
    std::set<std::pair<int, int>> seen;
    for (std::size_t m = 0; m < 12; ++m) {
        for (std::size_t p = 0; p < 2; ++p) {
            for (std::size_t r = 0; r < 5; ++r) {
                CellAddress address = at(m, p, r);
                CHECK(address.row == 3 + int(p * 5 + r));
                CHECK(address.col == 4 + int(m));
                CHECK(seen.insert({address.row, address.col}).second);  // injective
            }
        }
    }
}

TEST_CASE("sheet axes resolve to per-instance sheet names") {
    ValidatedModel atw = testsupport::load_atw();
    LayoutPlan plan = preset_plan(atw, "MSPR2");
    CellAddress address =
        cell_address(plan, atw.model, "MSPR Unit Sales", {0, 0, 0, 1});  // (Jan,Gov,Std,SE)
    CHECK(address.sheet == "Region_SE");

    LayoutPlan mspr6 = preset_plan(atw, "MSPR6");
    CellAddress two_dims =
        cell_address(mspr6, atw.model, "MSPR Unit Sales", {0, 0, 0, 0});
    CHECK(two_dims.sheet == "Sector_Government__Region_N");
}

TEST_CASE("bad coordinates are rejected") {
    ValidatedModel atw = testsupport::load_atw();
    LayoutPlan plan = preset_plan(atw, "MPR1");
    CHECK_THROWS_AS(cell_address(plan, atw.model, "MPR Unit Sales", {0, 0}), LayoutError);
    CHECK_THROWS_AS(cell_address(plan, atw.model, "MPR Unit Sales", {0, 0, 9}), LayoutError);
    CHECK_THROWS_AS(cell_address(plan, atw.model, "Nobody", {}), LayoutError);
}

TEST_CASE("preset applicability") {
    ValidatedModel atw = testsupport::load_atw();
    CHECK_THROWS_AS(preset_plan(atw, "MSPR5"), LayoutError);  // not in the catalog
    try {
        preset_plan(atw, "MSPR5");
    } catch (const LayoutError& e) {
        CHECK(e.kind() == LayoutErrorKind::UnknownPreset);
    }

    ValidatedModel flat = validate(testsupport::parse_or_throw(
        "dimension Month: Jan Feb\n"
        "dimension Region: N S\n"
        "data [x] over Month, Region:\n"
        "  Jan N 1\n  Jan S 2\n  Feb N 3\n  Feb S 4\n"));
    try {
        preset_plan(flat, "MSP5");
        FAIL("expected LayoutError");
    } catch (const LayoutError& e) {
        CHECK(e.kind() == LayoutErrorKind::PresetInapplicable);
    }
    CHECK_NOTHROW(preset_plan(flat, "DB"));
}

TEST_CASE("every preset places every variable exactly once without overlap") {
    ValidatedModel atw = testsupport::load_atw();
    for (const auto& preset : preset_names()) {
        CAPTURE(preset);
        LayoutPlan plan = preset_plan(atw, preset);
        CHECK(plan.placements.size() == atw.model.variables.size());
        CHECK_NOTHROW(compile_model(atw, plan));  // includes the overlap check

        // address collision sweep across all variables and coordinates
        std::set<std::tuple<std::string, int, int>> seen;
        for (const auto& var : atw.model.variables) {
            std::vector<std::size_t> coord(var.dims.size(), 0);
            auto shape = atw.model.shape_of(var.dims);
            for (;;) {
                CellAddress a = cell_address(plan, atw.model, var.name, coord);
                CHECK(seen.insert({a.sheet, a.row, a.col}).second);
                std::size_t axis = coord.size();
                bool carried = true;
                while (axis-- > 0) {
                    if (++coord[axis] < shape[axis]) {
                        carried = false;
                        break;
                    }
                    coord[axis] = 0;
                }
                if (carried) break;
            }
        }
    }
}

TEST_CASE("MPR1 lays the worked interface block out as 10 rows by 12 columns") {
    ValidatedModel atw = testsupport::load_atw();
    LayoutPlan plan = preset_plan(atw, "MPR1");
    const Placement& placement = plan.placement_of("MPR Unit Sales");
    CHECK(placement.row_dims.size() == 2);  // product over region
    CHECK(placement.col_dims.size() == 1);  // months
    CellAddress first = cell_address(plan, atw.model, "MPR Unit Sales", {0, 0, 0});
    CellAddress last = cell_address(plan, atw.model, "MPR Unit Sales", {11, 1, 4});
    CHECK(last.row - first.row + 1 == 10);
    CHECK(last.col - first.col + 1 == 12);
}

TEST_CASE("the DB preset builds one table per dimension set") {
    ValidatedModel atw = testsupport::load_atw();
    LayoutPlan plan = preset_plan(atw, "DB");
    GridDoc doc = compile_model(atw, plan);

    const FlatTable* mspr_table = nullptr;
    for (const auto& table : plan.tables) {
        if (table.dims == atw.model.canonicalize({"Month", "Sector", "Product", "Region"})) {
            mspr_table = &table;
        }
    }
    REQUIRE(mspr_table != nullptr);
    CHECK(mspr_table->columns ==
          std::vector<std::string>{"MSPR Unit Sales", "MSPR Variable Cost"});

    const Sheet* sheet = doc.find_sheet(mspr_table->sheet);
    REQUIRE(sheet != nullptr);
    // 480 data rows below the header, each with a unique key tuple
    std::set<std::vector<std::string>> keys;
    int rows = 0;
    for (int row = 2; row <= 481; ++row) {
        std::vector<std::string> key;
        for (int col = 1; col <= 4; ++col) {
            const Cell* cell = sheet->find(row, col);
            REQUIRE(cell != nullptr);
            REQUIRE(cell->kind == CellKind::Label);
            key.push_back(cell->text);
        }
        CHECK(keys.insert(key).second);
        ++rows;
    }
    CHECK(rows == 480);
    CHECK(sheet->find(482, 1) == nullptr);  // nothing after the last row
}

TEST_CASE("the MPR2 dataset table displays its keys as month, region, product") {
    ValidatedModel atw = testsupport::load_atw();
    LayoutPlan plan = preset_plan(atw, "MPR2");
    GridDoc doc = compile_model(atw, plan);
    REQUIRE(plan.tables.size() == 1);
    const Sheet* sheet = doc.find_sheet(plan.tables[0].sheet);
    REQUIRE(sheet != nullptr);
    CHECK(sheet->find(1, 1)->text == "Month");
    CHECK(sheet->find(1, 2)->text == "Region");
    CHECK(sheet->find(1, 3)->text == "Product");
    CHECK(sheet->find(1, 4)->text == "MPR Unit Sales");
    // canonical row-major data rows: first row (Jan, Standard, N)
    CHECK(sheet->find(2, 1)->text == "Jan");
    CHECK(sheet->find(2, 2)->text == "N");
    CHECK(sheet->find(2, 3)->text == "Standard");
    // the MPR table has 12*2*5 tuples
    CHECK(sheet->find(121, 1) != nullptr);
    CHECK(sheet->find(122, 1) == nullptr);
    // only the signature variable joins the table; others project as blocks
    CHECK(plan.placement_of("MSPR Unit Sales").style == PlacementStyle::Projection);
}

TEST_CASE("aggregate emission picks the cheapest faithful form") {
    ValidatedModel atw = testsupport::load_atw();
    const Model& model = atw.model;

    SUBCASE("non-adjacent source rows fall back to a reference list") {
        LayoutPlan plan = preset_plan(atw, "MSPR1");
        GridDoc doc = compile_model(atw, plan);
        CellAddress cell = cell_address(plan, model, "MPR Unit Sales", {0, 0, 0});
        const Cell* formula = doc.find_sheet(cell.sheet)->find(cell.row, cell.col);
        REQUIRE(formula != nullptr);
        GridExprPtr ast = parse_a1(formula->text);
        const auto* call = std::get_if<GridCall>(&ast->node);
        REQUIRE(call != nullptr);
        CHECK(call->fn == GridFn::Sum);
        CHECK(call->args.size() == 4);  // one reference per sector
        for (const auto& arg : call->args) {
            CHECK(std::get_if<GridCellRef>(&arg->node) != nullptr);
        }
    }

    SUBCASE("table-column sources aggregate with SUMIFS keyed on kept dimensions") {
        LayoutPlan plan = preset_plan(atw, "DB");
        GridDoc doc = compile_model(atw, plan);
        CellAddress cell = cell_address(plan, model, "MPR Unit Sales", {0, 0, 0});
        const Cell* formula = doc.find_sheet(cell.sheet)->find(cell.row, cell.col);
        GridExprPtr ast = parse_a1(formula->text);
        const auto* call = std::get_if<GridCall>(&ast->node);
        REQUIRE(call != nullptr);
        CHECK(call->fn == GridFn::Sumifs);
        REQUIRE(call->args.size() == 7);
        CHECK(std::get<GridString>(call->args[2]->node).value == "Jan");
        CHECK(std::get<GridString>(call->args[4]->node).value == "Standard");
        CHECK(std::get<GridString>(call->args[6]->node).value == "N");
    }

    SUBCASE("a full-column reduction stays a single range") {
        LayoutPlan plan = preset_plan(atw, "MSPR3");
        GridDoc doc = compile_model(atw, plan);
        CellAddress cell = cell_address(plan, model, "Monthly Unit Sales", {0});
        const Cell* formula = doc.find_sheet(cell.sheet)->find(cell.row, cell.col);
        GridExprPtr ast = parse_a1(formula->text);
        const auto* call = std::get_if<GridCall>(&ast->node);
        REQUIRE(call != nullptr);
        CHECK(call->fn == GridFn::Sum);
        REQUIRE(call->args.size() == 1);
        const auto* range = std::get_if<GridRange>(&call->args[0]->node);
        REQUIRE(range != nullptr);
        CHECK((range->row2 - range->row1 + 1) == 40);  // all sector/product/region rows
        CHECK(range->col1 == range->col2);
    }

    SUBCASE("the range form only fires on exact rectangles") {
        // Wherever a SUM(range) was emitted, the enumerated reference list
        // must cover the same cells and evaluate to the same number.
        LayoutPlan plan = preset_plan(atw, "MSPR3");
        GridDoc doc = compile_model(atw, plan);
        CellValues values = eval_grid(doc);
        std::map<std::size_t, std::size_t> kept{{0, 0}};  // Month = Jan
        GridExprPtr agg = emit_aggregate(plan, model, "MSPR Unit Sales", kept, "Model");
        const auto* call = std::get_if<GridCall>(&agg->node);
        REQUIRE(call != nullptr);
        const auto* range = std::get_if<GridRange>(&call->args[0]->node);
        REQUIRE(range != nullptr);
        double via_range = 0.0;
        for (int row = range->row1; row <= range->row2; ++row) {
            for (int col = range->col1; col <= range->col2; ++col) {
                via_range += values.at({"Model", row, col});
            }
        }
        // reference list over the same reduction, enumerated independently
        double via_cells = 0.0;
        for (std::size_t s = 0; s < 4; ++s) {
            for (std::size_t p = 0; p < 2; ++p) {
                for (std::size_t r = 0; r < 5; ++r) {
                    CellAddress a =
                        cell_address(plan, model, "MSPR Unit Sales", {0, s, p, r});
                    via_cells += values.at({a.sheet, a.row, a.col});
                }
            }
        }
        CHECK(via_range == doctest::Approx(via_cells).epsilon(1e-12));
    }
}

TEST_CASE("cross-sheet reductions list every cell explicitly") {
    ValidatedModel atw = testsupport::load_atw();
    LayoutPlan plan = preset_plan(atw, "MSPR2");  // regions on sheets
    GridDoc doc = compile_model(atw, plan);
    CellAddress cell = cell_address(plan, atw.model, "Monthly Unit Sales", {0});
    const Cell* formula = doc.find_sheet(cell.sheet)->find(cell.row, cell.col);
    GridExprPtr ast = parse_a1(formula->text);
    const auto* call = std::get_if<GridCall>(&ast->node);
    REQUIRE(call != nullptr);
    CHECK(call->fn == GridFn::Sum);
    CHECK(call->args.size() == 40);  // 8 cells on each of 5 region sheets
    std::set<std::string> sheets;
    for (const auto& arg : call->args) {
        sheets.insert(std::get<GridCellRef>(arg->node).sheet);
    }
    CHECK(sheets.size() == 5);
}

TEST_CASE("compile rejects overlapping plans") {
    ValidatedModel atw = testsupport::load_atw();
    LayoutPlan plan = preset_plan(atw, "MPR1");
    // Drop one block onto its neighbour; both sit on the Model sheet.
    int other_origin = plan.placement_of("MSP Sales Amount").origin_row;
    for (auto& placement : plan.placements) {
        if (placement.variable == "MSP Unit Sales") placement.origin_row = other_origin;
    }
    try {
        compile_model(atw, plan);
        FAIL("expected LayoutError");
    } catch (const LayoutError& e) {
        CHECK(e.kind() == LayoutErrorKind::Overlap);
    }
}

TEST_CASE("compile rejects incomplete plans") {
    ValidatedModel atw = testsupport::load_atw();
    LayoutPlan plan = preset_plan(atw, "MPR1");
    plan.placements.pop_back();
    CHECK_THROWS_AS(compile_model(atw, plan), LayoutError);
}

TEST_CASE("compile rejects duplicate and unknown placements") {
    ValidatedModel atw = testsupport::load_atw();
    LayoutPlan doubled = preset_plan(atw, "MPR1");
    doubled.placements.push_back(doubled.placements.front());
    CHECK_THROWS_AS(compile_model(atw, doubled), LayoutError);

    LayoutPlan foreign = preset_plan(atw, "MPR1");
    Placement ghost;
    ghost.variable = "Not A Variable";
    ghost.sheet = "Model";
    foreign.placements.push_back(ghost);
    CHECK_THROWS_AS(compile_model(atw, foreign), LayoutError);
}

TEST_CASE("compile rejects axes that do not partition the dimension set") {
    ValidatedModel atw = testsupport::load_atw();
    LayoutPlan plan = preset_plan(atw, "MPR1");
    for (auto& placement : plan.placements) {
        if (placement.variable == "MPR Unit Sales") placement.col_dims.clear();
    }
    try {
        compile_model(atw, plan);
        FAIL("expected LayoutError");
    } catch (const LayoutError& e) {
        CHECK(e.kind() == LayoutErrorKind::BadPlan);
    }
}

TEST_CASE("plans round-trip through JSON") {
    ValidatedModel atw = testsupport::load_atw();
    for (const char* preset : {"MPR1", "MPR2", "MSPR6", "DB"}) {
        LayoutPlan plan = preset_plan(atw, preset);
        LayoutPlan reloaded = plan_from_json(plan_to_json(plan, atw.model), atw.model);
        CHECK(grid_to_json(compile_model(atw, reloaded)) ==
              grid_to_json(compile_model(atw, plan)));
    }
}

TEST_CASE("grid input overrides rewrite the parameter cell") {
    ValidatedModel atw = testsupport::load_atw();
    LayoutPlan plan = preset_plan(atw, "MPR1");
    GridDoc doc = compile_model(atw, plan);
    override_grid_inputs(doc, plan, atw.model, {{"Base Price", 140.0}});
    CellAddress address = cell_address(plan, atw.model, "Base Price", {});
    CHECK(doc.find_sheet(address.sheet)->find(address.row, address.col)->value == 140.0);
    CHECK_THROWS_AS(
        override_grid_inputs(doc, plan, atw.model, {{"Monthly Fixed Cost", 1.0}}),
        LayoutError);
}

TEST_CASE("SUM over a composite operand expands into explicit additions") {
    ValidatedModel fused = validate(testsupport::parse_or_throw(
        "dimension Month: Jan Feb\n"
        "dimension Region: N S\n"
        "data [sales] over Month, Region:\n"
        "  Jan N 1\n  Jan S 2\n  Feb N 3\n  Feb S 4\n"
        "data [weight] over Region:\n"
        "  N 10\n  S 100\n"
        "output [weighted] over Month = SUM([sales] * [weight])\n"));
    LayoutPlan plan = preset_plan(fused, "DB");
    GridDoc doc = compile_model(fused, plan);
    CellValues values = eval_grid(doc);
    ValueStore expected = eval_model(fused);
    for (std::size_t m = 0; m < 2; ++m) {
        CellAddress a = cell_address(plan, fused.model, "weighted", {m});
        CHECK(values.at({a.sheet, a.row, a.col}) ==
              doctest::Approx(expected.at("weighted").at({m})).epsilon(1e-12));
    }
    // Jan: 1*10 + 2*100 = 210
    CellAddress jan = cell_address(plan, fused.model, "weighted", {0});
    CHECK(values.at({jan.sheet, jan.row, jan.col}) == doctest::Approx(210.0));
}

TEST_CASE("translated formulas mirror the source expressions") {
    ValidatedModel atw = testsupport::load_atw();
    LayoutPlan plan = preset_plan(atw, "MPR1");
    GridDoc doc = compile_model(atw, plan);
    auto formula_at = [&](const std::string& name, std::vector<std::size_t> coord) {
        CellAddress a = cell_address(plan, atw.model, name, coord);
        return doc.find_sheet(a.sheet)->find(a.row, a.col)->text;
    };
    // product of two references
    GridExprPtr mspr = parse_a1(formula_at("MSPR Unit Sales", {0, 0, 0, 0}));
    const auto* mul = std::get_if<GridBinary>(&mspr->node);
    REQUIRE(mul != nullptr);
    CHECK(mul->op == GridOp::Mul);
    CHECK(std::get_if<GridCellRef>(&mul->lhs->node) != nullptr);
    CHECK(std::get_if<GridCellRef>(&mul->rhs->node) != nullptr);
    // constant minus reference
    GridExprPtr factor = parse_a1(formula_at("Sector Price Factor", {0}));
    const auto* sub = std::get_if<GridBinary>(&factor->node);
    REQUIRE(sub != nullptr);
    CHECK(sub->op == GridOp::Sub);
    CHECK(std::get<GridLiteral>(sub->lhs->node).value == 1.0);
    // scalar total over a contiguous row of months
    GridExprPtr total = parse_a1(formula_at("Total Profit", {}));
    const auto* call = std::get_if<GridCall>(&total->node);
    REQUIRE(call != nullptr);
    CHECK(call->fn == GridFn::Sum);
    REQUIRE(call->args.size() == 1);
    CHECK(std::get_if<GridRange>(&call->args[0]->node) != nullptr);
}

TEST_CASE("evaluated grids gather back into per-variable arrays") {
    ValidatedModel atw = testsupport::load_atw();
    LayoutPlan plan = preset_plan(atw, "DB");
    GridDoc doc = compile_model(atw, plan);
    ValueStore gathered = extract_variable_values(plan, atw.model, eval_grid(doc));
    ValueStore expected = eval_model(atw);
    for (const auto& [name, reference] : expected) {
        const DimArray& actual = gathered.at(name);
        CHECK(actual.shape == reference.shape);
        for (std::size_t i = 0; i < reference.values.size(); ++i) {
            CHECK(actual.values[i] ==
                  doctest::Approx(reference.values[i]).epsilon(1e-9));
        }
    }
    CHECK(value_store_to_json(gathered, atw.model) ==
          value_store_to_json(expected, atw.model));
}

TEST_CASE("header labels repeat once per nesting group") {
    ValidatedModel atw = testsupport::load_atw();
    LayoutPlan plan = preset_plan(atw, "MPR1");
    GridDoc doc = compile_model(atw, plan);
    const Placement& placement = plan.placement_of("MPR Unit Sales");
    const Sheet* sheet = doc.find_sheet("Model");
    REQUIRE(sheet != nullptr);

    // name label one row above the month header, leftmost column of the block
    const Cell* name =
        sheet->find(placement.origin_row - 2, placement.origin_col - 2);
    REQUIRE(name != nullptr);
    CHECK(name->text == "MPR Unit Sales");

    // outer row labels (products) appear once per group of five regions
    const Cell* standard = sheet->find(placement.origin_row, placement.origin_col - 2);
    REQUIRE(standard != nullptr);
    CHECK(standard->text == "Standard");
    CHECK(sheet->find(placement.origin_row + 1, placement.origin_col - 2) == nullptr);
    const Cell* deluxe = sheet->find(placement.origin_row + 5, placement.origin_col - 2);
    REQUIRE(deluxe != nullptr);
    CHECK(deluxe->text == "Deluxe");

    // inner row labels (regions) appear on every row
    for (int i = 0; i < 10; ++i) {
        const Cell* region = sheet->find(placement.origin_row + i, placement.origin_col - 1);
        REQUIRE(region != nullptr);
        CHECK(region->kind == CellKind::Label);
    }
}
