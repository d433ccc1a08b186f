#pragma once

#include <map>
#include <string>
#include <tuple>

#include "dimsheet/grid.hpp"

namespace dimsheet {

enum class GridEvalErrorKind {
    CyclicGrid,
    RefToEmptyCell,
    TypeError,
    DivideByZero,
    NonFiniteResult,
    UnknownSheet,
};

class GridEvalError : public std::runtime_error {
public:
    GridEvalError(GridEvalErrorKind kind, const std::string& message)
        : std::runtime_error(message), kind_(kind) {}
    GridEvalErrorKind kind() const { return kind_; }

private:
    GridEvalErrorKind kind_;
};

using CellValues = std::map<std::tuple<std::string, int, int>, double>;

// Evaluates every number and formula cell of the document, ordering formula
// cells by their reference dependencies. Label cells are readable only as
// SUMIFS key ranges; referencing an empty cell is an error.
CellValues eval_grid(const GridDoc& doc);

}  // namespace dimsheet
