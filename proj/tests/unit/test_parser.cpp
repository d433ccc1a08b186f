#include <doctest.h>

#include <random>

#include "dimsheet/engine.hpp"
#include "dimsheet/model.hpp"
#include "dimsheet/parser.hpp"
#include "support/fixtures.hpp"
#include "support/generators.hpp"

using namespace dimsheet;

TEST_CASE("dimension declarations") {
    Model model = testsupport::parse_or_throw("dimension Product: Standard Deluxe\n");
    REQUIRE(model.dimensions.size() == 1);
    CHECK(model.dimensions[0].name == "Product");
    CHECK(model.dimensions[0].instances == std::vector<std::string>{"Standard", "Deluxe"});
}

TEST_CASE("declaration forms") {
    Model model = testsupport::parse_or_throw(
        "dimension Sector: A B\n"
        "dimension Month: Jan Feb\n"
        "input [Base Price] = 100\n"
        "data [Rebate Percentage] over Sector:\n"
        "  A 0.4\n"
        "  B 0.2\n"
        "calc [Sector Price Factor] over Sector = 1 - [Rebate Percentage]\n"
        "output [Monthly Unit Sales] over Month = SUM([MSPR Unit Sales])\n"
        "data [Fixed] = 20000\n"
        "calc [Scalar Thing] = 1 + 2\n");
    REQUIRE(model.variables.size() == 6);

    const VariableDecl& base = model.variables[0];
    CHECK(base.kind == VarKind::Input);
    CHECK(base.dims.empty());
    CHECK(base.table->entries.at({}) == 100.0);

    const VariableDecl& factor = model.variables[2];
    CHECK(factor.kind == VarKind::Calculated);
    const auto* binary = std::get_if<BinaryExpr>(&factor.expr->node);
    REQUIRE(binary != nullptr);
    CHECK(binary->op == BinaryOp::Sub);
    CHECK(std::get<NumberExpr>(binary->lhs->node).value == 1.0);
    CHECK(std::get<VarRefExpr>(binary->rhs->node).name == "Rebate Percentage");

    const VariableDecl& output = model.variables[3];
    CHECK(output.kind == VarKind::Output);
    const auto* sum = std::get_if<SumExpr>(&output.expr->node);
    REQUIRE(sum != nullptr);
    CHECK(std::get<VarRefExpr>(sum->operand->node).name == "MSPR Unit Sales");

    CHECK(model.variables[4].kind == VarKind::Data);
    CHECK(model.variables[4].table->entries.at({}) == 20000.0);
    CHECK(model.variables[5].dims.empty());
}

TEST_CASE("precedence: division before right-associative power") {
    ExprPtr expr = parse_expression("[DemParB] / [Sector Base Price] ^ [DemParA]");
    const auto* div = std::get_if<BinaryExpr>(&expr->node);
    REQUIRE(div != nullptr);
    CHECK(div->op == BinaryOp::Div);
    const auto* pow = std::get_if<BinaryExpr>(&div->rhs->node);
    REQUIRE(pow != nullptr);
    CHECK(pow->op == BinaryOp::Pow);
    CHECK(std::get<VarRefExpr>(pow->lhs->node).name == "Sector Base Price");
}

TEST_CASE("power chains associate to the right") {
    Model empty;
    ValueStore env;
    ExprPtr expr = parse_expression("2^3^2");
    DimArray value = eval_expression(*expr, env, DimensionSet(), empty);
    CHECK(value.scalar_value() == 512.0);

    // the grid convention: a leading minus binds to the atom, so (-2)^2
    ExprPtr negpow = parse_expression("-2^2");
    CHECK(eval_expression(*negpow, env, DimensionSet(), empty).scalar_value() == 4.0);
    ExprPtr wrapped = parse_expression("-(2^2)");
    CHECK(eval_expression(*wrapped, env, DimensionSet(), empty).scalar_value() == -4.0);
}

TEST_CASE("whitespace is free outside brackets, preserved inside") {
    Model a = testsupport::parse_or_throw("calc   [ X Y ]=1+ 2\n");
    CHECK(a.variables[0].name == " X Y ");
    Model b = testsupport::parse_or_throw("calc [MSPR Unit Sales] = 1\n");
    CHECK(b.variables[0].name == "MSPR Unit Sales");
}

TEST_CASE("comments run to end of line") {
    Model model = testsupport::parse_or_throw(
        "# full-line comment\n"
        "dimension D: a b # trailing\n"
        "data [t] over D:  # after the colon\n"
        "  a 1\n"
        "  b 2 # after a row\n");
    CHECK(model.dimensions[0].instances.size() == 2);
    CHECK(model.variables[0].table->entries.size() == 2);
}

TEST_CASE("parse failures carry positions and do not abort the file") {
    ParseResult result = parse_model(
        "calc [X] over = 1 +\n"
        "dimension D: a\n");
    CHECK(!result.ok());
    REQUIRE(result.diagnostics.size() == 1);
    CHECK(result.diagnostics[0].span.line == 1);
    CHECK(result.diagnostics[0].span.column >= 14);

    SUBCASE("unknown keyword") {
        ParseResult r = parse_model("banana [X] = 1\n");
        REQUIRE(!r.ok());
        CHECK(r.diagnostics[0].message.find("banana") != std::string::npos);
    }
    SUBCASE("unterminated bracket") {
        ParseResult r = parse_model("calc [X = 1\n");
        REQUIRE(!r.ok());
        CHECK(r.diagnostics[0].message.find("unterminated") != std::string::npos);
    }
    SUBCASE("malformed numbers") {
        CHECK(!parse_model("input [X] = 1.\n").ok());
        CHECK(!parse_model("input [X] = 1e\n").ok());
        CHECK(!parse_model("input [X] = .5\n").ok());
        CHECK(!parse_model("input [X] = 40%\n").ok());    // no percent literals
        CHECK(!parse_model("input [X] = 1,000\n").ok());  // no thousands separators
        CHECK(!parse_model("input [X] = 1e999\n").ok());  // overflows to infinity
    }
    SUBCASE("duplicate data row") {
        ParseResult r = parse_model(
            "dimension D: a\n"
            "data [t] over D:\n"
            "  a 1\n"
            "  a 2\n");
        REQUIRE(!r.ok());
        CHECK(r.diagnostics[0].span.line == 4);
        CHECK(r.diagnostics[0].message.find("duplicate") != std::string::npos);
    }
    SUBCASE("label of the wrong dimension") {
        ParseResult r = parse_model(
            "dimension D: a\n"
            "dimension E: x\n"
            "data [t] over D, E:\n"
            "  x a 1\n");
        REQUIRE(!r.ok());
        CHECK(r.diagnostics[0].message.find("not an instance") != std::string::npos);
    }
    SUBCASE("several errors are all reported") {
        ParseResult r = parse_model(
            "calc [X] over = 1\n"
            "calc [Y = 2\n"
            "calc [Z] = 3\n");
        CHECK(r.diagnostics.size() == 2);
    }
}

TEST_CASE("over clauses canonicalize; duplicates are rejected") {
    Model model = testsupport::parse_or_throw(
        "dimension Month: Jan\n"
        "dimension Region: N\n"
        "calc [x] over Region, Month = 1\n");
    CHECK(model.dim_names(model.variables[0].dims) ==
          std::vector<std::string>{"Month", "Region"});
    CHECK(!parse_model("dimension D: a\ncalc [x] over D, D = 1\n").ok());
    CHECK(!parse_model("calc [x] over Nowhere = 1\n").ok());
}

TEST_CASE("the fixture round-trips through render") {
    Model model = testsupport::parse_or_throw(testsupport::read_file(testsupport::atw_path()));
    std::string rendered = render_model(model);
    Model reparsed = testsupport::parse_or_throw(rendered);
    CHECK(model_equal(model, reparsed));
    CHECK(render_model(reparsed) == rendered);
}

TEST_CASE("degenerate documents round-trip") {
    CHECK(model_equal(testsupport::parse_or_throw(render_model(Model{})), Model{}));
    Model one_dim = testsupport::parse_or_throw("dimension D: a b c\n");
    CHECK(model_equal(testsupport::parse_or_throw(render_model(one_dim)), one_dim));
}

TEST_CASE("render/parse round-trip holds over generated models") {
    testsupport::ModelGenerator gen(20260809);
    for (int i = 0; i < 100; ++i) {
        Model model = gen.next();
        std::string rendered = render_model(model);
        CAPTURE(rendered);
        Model reparsed = testsupport::parse_or_throw(rendered);
        CHECK(model_equal(model, reparsed));
    }
}

TEST_CASE("expression rendering inserts only the parentheses structure needs") {
    auto roundtrip = [](const char* text) {
        ExprPtr expr = parse_expression(text);
        std::string rendered = render_expression(*expr);
        ExprPtr again = parse_expression(rendered);
        CHECK(expr_equal(*expr, *again));
        return rendered;
    };
    CHECK(roundtrip("1 - [Rebate Percentage]") == "1 - [Rebate Percentage]");
    CHECK(roundtrip("[a] - ([b] - [c])") == "[a] - ([b] - [c])");
    CHECK(roundtrip("[a] - [b] - [c]") == "[a] - [b] - [c]");
    CHECK(roundtrip("([a] + [b]) * [c]") == "([a] + [b]) * [c]");
    CHECK(roundtrip("2^3^2") == "2^3^2");
    CHECK(roundtrip("(2^3)^2") == "(2^3)^2");
    CHECK(roundtrip("-(2^2)") == "-(2^2)");
    CHECK(roundtrip("-2^2") == "-2^2");
    CHECK(roundtrip("SUM([a] * [b])") == "SUM([a] * [b])");
    CHECK(roundtrip("2 ^ -3") == "2^-3");
}

TEST_CASE("parsing is total on random byte soup") {
    std::mt19937 rng(7);
    const char alphabet[] = "dimension inputcalc output over SUM[]()^*/+-.,:=#%\"\t 0123456789\n";
    for (int round = 0; round < 500; ++round) {
        std::string text;
        int length = int(rng() % 160);
        for (int i = 0; i < length; ++i) {
            if (rng() % 16 == 0) {
                text.push_back(char(rng() % 256));
            } else {
                text.push_back(alphabet[rng() % (sizeof(alphabet) - 1)]);
            }
        }
        ParseResult result = parse_model(text);  // must not crash or hang
        if (!result.ok()) CHECK(!result.diagnostics.empty());
    }
}

TEST_CASE("parsing is total on hostile inputs") {
    const char* garbage[] = {
        "",
        "\n\n\n",
        "]]][[",
        "dimension\n",
        "dimension :\n",
        "data [x] over\n",
        "  indented orphan\n",
        "calc [x] = SUM(\n",
        "calc [x] = 1 ) 2\n",
        "input [x] = nan\n",
        "\xff\xfe binary\n",
        "calc [x] = ((((((1))))))\n",
    };
    for (const char* text : garbage) {
        ParseResult result = parse_model(text);  // must not crash
        if (result.ok()) {
            CHECK(result.diagnostics.empty());
        } else {
            CHECK(!result.diagnostics.empty());
        }
    }
}
