#pragma once

#include <map>
#include <string>
#include <vector>

#include "dimsheet/model.hpp"

namespace dimsheet {

enum class EngineErrorKind {
    DivideByZero,
    NonFiniteResult,
    InvalidReduction,
    UnknownVariable,
    BadOverride,
    ShapeMismatch,
};

class EngineError : public std::runtime_error {
public:
    EngineError(EngineErrorKind kind, const std::string& message)
        : std::runtime_error(message), kind_(kind) {}
    EngineErrorKind kind() const { return kind_; }

private:
    EngineErrorKind kind_;
};

// Dense value block over a canonical dimension set, row-major with the first
// dimension outermost. A scalar is the empty set with a single value.
struct DimArray {
    DimensionSet dims;
    std::vector<std::size_t> shape;
    std::vector<double> values;

    static DimArray scalar(double value);
    static DimArray zeros(const Model& model, const DimensionSet& dims);

    std::size_t size() const { return values.size(); }
    std::size_t flat_index(const std::vector<std::size_t>& coord) const;
    double at(const std::vector<std::size_t>& coord) const { return values[flat_index(coord)]; }
    double& at(const std::vector<std::size_t>& coord) { return values[flat_index(coord)]; }
    double scalar_value() const { return values.at(0); }
};

using ValueStore = std::map<std::string, DimArray>;

// Scalar replacement values for input variables.
using Overrides = std::map<std::string, double>;

// Elementwise op over the canonical union of both operands' dimensions;
// operands are broadcast over the dimensions they lack.
DimArray broadcast_binop(BinaryOp op, const DimArray& a, const DimArray& b, const Model& model);

DimArray negate(const DimArray& a);

// Sums away the dimensions of `a` that are absent from `target`.
DimArray reduce_sum(const DimArray& a, const DimensionSet& target, const Model& model);

// Recursive evaluation; SUM nodes reduce onto `target`.
DimArray eval_expression(const Expr& expr, const ValueStore& env, const DimensionSet& target,
                         const Model& model);

// Evaluates every variable in dependency order. Deterministic: same model
// and overrides give bit-identical results.
ValueStore eval_model(const ValidatedModel& model, const Overrides& overrides = {});

// Value dump (JSON text):
//   { "<variable>": { "dims": [...], "shape": [...],
//                     "coords": {dim: [labels]}, "values": [row-major] } }
// Numbers are written with at most 10 significant digits.
std::string value_store_to_json(const ValueStore& store, const Model& model);

// Rounds to 10 significant digits (the precision used by every serialized
// number the tool emits).
double round_sig10(double value);

}  // namespace dimsheet
