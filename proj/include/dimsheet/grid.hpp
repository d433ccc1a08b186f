#pragma once

#include <map>
#include <memory>
#include <optional>
#include <string>
#include <variant>
#include <vector>

namespace dimsheet {

enum class CellKind { Label, Number, Formula };

struct Cell {
    CellKind kind = CellKind::Number;
    std::string text;    // label text, or formula source starting with '='
    double value = 0.0;  // numbers only
};

struct Sheet {
    std::string name;
    std::map<std::pair<int, int>, Cell> cells;  // keyed by (row, col), 1-based

    const Cell* find(int row, int col) const;
};

struct GridDoc {
    std::vector<Sheet> sheets;

    Sheet& sheet(const std::string& name);  // creates on first use
    const Sheet* find_sheet(const std::string& name) const;
};

// ---- A1 formulas ----

struct GridExpr;
using GridExprPtr = std::shared_ptr<const GridExpr>;

enum class GridFn { Sum, Sumifs };

struct GridLiteral {
    double value;
};
struct GridString {
    std::string value;  // SUMIFS criterion
};
struct GridCellRef {
    std::string sheet;  // empty: the formula's own sheet
    int row = 1;
    int col = 1;
};
struct GridRange {
    std::string sheet;
    int row1 = 1, col1 = 1, row2 = 1, col2 = 1;  // row1<=row2, col1<=col2
};
struct GridCall {
    GridFn fn;
    std::vector<GridExprPtr> args;
};
struct GridNeg {
    GridExprPtr operand;
};
enum class GridOp { Add, Sub, Mul, Div, Pow };
struct GridBinary {
    GridOp op;
    GridExprPtr lhs;
    GridExprPtr rhs;
};

struct GridExpr {
    std::variant<GridLiteral, GridString, GridCellRef, GridRange, GridCall, GridNeg, GridBinary>
        node;
};

GridExprPtr grid_literal(double value);
GridExprPtr grid_string(std::string value);
GridExprPtr grid_cell(std::string sheet, int row, int col);
GridExprPtr grid_range(std::string sheet, int row1, int col1, int row2, int col2);
GridExprPtr grid_call(GridFn fn, std::vector<GridExprPtr> args);
GridExprPtr grid_neg(GridExprPtr operand);
GridExprPtr grid_binary(GridOp op, GridExprPtr lhs, GridExprPtr rhs);

bool grid_expr_equal(const GridExpr& a, const GridExpr& b);

class GridParseError : public std::runtime_error {
public:
    GridParseError(std::size_t offset, const std::string& message)
        : std::runtime_error(message), offset_(offset) {}
    std::size_t offset() const { return offset_; }  // 0-based into the text

private:
    std::size_t offset_;
};

// Parses "=..." A1 formula text. '$' markers are accepted and ignored;
// references like B3, $B$3, Sheet_Name!C4 and ranges B3:F3 are supported.
GridExprPtr parse_a1(const std::string& text);

// Serializes to "=..." text; parse_a1(serialize(e)) reproduces e.
std::string serialize_grid_expr(const GridExpr& expr);

// A1 column letters: 1 -> "A", 27 -> "AA".
std::string column_letters(int col);
std::optional<int> column_from_letters(const std::string& letters);

std::string cell_name(int row, int col);  // "B3"

// ---- serialization ----

// { "sheets": [ { "name", "cells": [ {"row","col","kind",...} ] } ] }
std::string grid_to_json(const GridDoc& doc);
GridDoc grid_from_json(const std::string& text);

// One CSV table per sheet; formulas keep their '=' prefix, labels and
// numbers are bare. Returns sheet name -> file content.
std::vector<std::pair<std::string, std::string>> grid_to_csv(const GridDoc& doc);

// Inverse of one grid_to_csv entry. Fields starting with '=' become
// formulas, fields that parse fully as numbers become number cells, other
// non-empty fields become labels.
Sheet sheet_from_csv(std::string name, const std::string& text);

}  // namespace dimsheet
