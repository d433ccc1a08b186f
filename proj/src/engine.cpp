#include "dimsheet/engine.hpp"

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <sstream>

#include <nlohmann/json.hpp>

namespace dimsheet {

namespace {

std::vector<std::size_t> row_major_strides(const std::vector<std::size_t>& shape) {
    std::vector<std::size_t> strides(shape.size(), 1);
    for (std::size_t i = shape.size(); i-- > 1;) {
        strides[i - 1] = strides[i] * shape[i];
    }
    return strides;
}

std::string describe_coord(const Model& model, const DimensionSet& dims,
                           const std::vector<std::size_t>& coord) {
    std::ostringstream out;
    out << '(';
    for (std::size_t i = 0; i < coord.size(); ++i) {
        if (i) out << ", ";
        out << model.dimension(dims.indices()[i]).instances.at(coord[i]);
    }
    out << ')';
    return out.str();
}

bool advance(std::vector<std::size_t>& coord, const std::vector<std::size_t>& shape) {
    for (std::size_t i = shape.size(); i-- > 0;) {
        if (++coord[i] < shape[i]) return true;
        coord[i] = 0;
    }
    return false;
}

double apply_op(BinaryOp op, double lhs, double rhs, const Model& model,
                const DimensionSet& dims, const std::vector<std::size_t>& coord) {
    switch (op) {
        case BinaryOp::Add: return lhs + rhs;
        case BinaryOp::Sub: return lhs - rhs;
        case BinaryOp::Mul: return lhs * rhs;
        case BinaryOp::Div:
            if (rhs == 0.0) {
                throw EngineError(EngineErrorKind::DivideByZero,
                                  "division by zero at " + describe_coord(model, dims, coord));
            }
            return lhs / rhs;
        case BinaryOp::Pow: return std::pow(lhs, rhs);
    }
    return 0.0;
}

void check_finite(double value, const Model& model, const DimensionSet& dims,
                  const std::vector<std::size_t>& coord) {
    if (!std::isfinite(value)) {
        throw EngineError(EngineErrorKind::NonFiniteResult,
                          "non-finite result at " + describe_coord(model, dims, coord));
    }
}

}  // namespace

DimArray DimArray::scalar(double value) {
    return DimArray{DimensionSet(), {}, {value}};
}

DimArray DimArray::zeros(const Model& model, const DimensionSet& dims) {
    DimArray array{dims, model.shape_of(dims), {}};
    array.values.assign(model.cell_count(dims), 0.0);
    return array;
}

std::size_t DimArray::flat_index(const std::vector<std::size_t>& coord) const {
    std::size_t index = 0;
    for (std::size_t i = 0; i < shape.size(); ++i) {
        index = index * shape[i] + coord[i];
    }
    return index;
}

DimArray broadcast_binop(BinaryOp op, const DimArray& a, const DimArray& b, const Model& model) {
    DimensionSet dims = a.dims.union_with(b.dims);
    DimArray result = DimArray::zeros(model, dims);

    // Per result-dimension strides into each operand; 0 for absent dims.
    auto stride_map = [&](const DimArray& operand) {
        auto strides = row_major_strides(operand.shape);
        std::vector<std::size_t> map(dims.size(), 0);
        for (std::size_t i = 0; i < dims.size(); ++i) {
            for (std::size_t j = 0; j < operand.dims.size(); ++j) {
                if (operand.dims.indices()[j] == dims.indices()[i]) map[i] = strides[j];
            }
        }
        return map;
    };
    auto a_stride = stride_map(a);
    auto b_stride = stride_map(b);

    std::vector<std::size_t> coord(dims.size(), 0);
    std::size_t flat = 0;
    do {
        std::size_t ai = 0, bi = 0;
        for (std::size_t i = 0; i < coord.size(); ++i) {
            ai += coord[i] * a_stride[i];
            bi += coord[i] * b_stride[i];
        }
        double value = apply_op(op, a.values[ai], b.values[bi], model, dims, coord);
        check_finite(value, model, dims, coord);
        result.values[flat++] = value;
    } while (advance(coord, result.shape));
    return result;
}

DimArray negate(const DimArray& a) {
    DimArray result = a;
    for (auto& value : result.values) value = -value;
    return result;
}

DimArray reduce_sum(const DimArray& a, const DimensionSet& target, const Model& model) {
    if (!target.subset_of(a.dims)) {
        throw EngineError(EngineErrorKind::InvalidReduction,
                          "reduction target is not a subset of the operand's dimensions");
    }
    DimArray result = DimArray::zeros(model, target);
    auto strides = row_major_strides(result.shape);
    std::vector<std::ptrdiff_t> target_stride(a.dims.size(), -1);
    for (std::size_t i = 0; i < a.dims.size(); ++i) {
        for (std::size_t j = 0; j < target.size(); ++j) {
            if (target.indices()[j] == a.dims.indices()[i]) {
                target_stride[i] = static_cast<std::ptrdiff_t>(strides[j]);
            }
        }
    }
    // Source traversed in row-major order: the accumulation order is fixed.
    std::vector<std::size_t> coord(a.dims.size(), 0);
    std::size_t flat = 0;
    if (a.values.empty()) return result;
    do {
        std::size_t out = 0;
        for (std::size_t i = 0; i < coord.size(); ++i) {
            if (target_stride[i] >= 0) out += coord[i] * static_cast<std::size_t>(target_stride[i]);
        }
        result.values[out] += a.values[flat++];
    } while (advance(coord, a.shape));
    for (std::size_t i = 0; i < result.values.size(); ++i) {
        if (!std::isfinite(result.values[i])) {
            throw EngineError(EngineErrorKind::NonFiniteResult, "non-finite reduction result");
        }
    }
    return result;
}

DimArray eval_expression(const Expr& expr, const ValueStore& env, const DimensionSet& target,
                         const Model& model) {
    return std::visit(
        [&](const auto& node) -> DimArray {
            using T = std::decay_t<decltype(node)>;
            if constexpr (std::is_same_v<T, NumberExpr>) {
                return DimArray::scalar(node.value);
            } else if constexpr (std::is_same_v<T, VarRefExpr>) {
                auto it = env.find(node.name);
                if (it == env.end()) {
                    throw EngineError(EngineErrorKind::UnknownVariable,
                                      "unknown variable: " + node.name);
                }
                return it->second;
            } else if constexpr (std::is_same_v<T, NegExpr>) {
                return negate(eval_expression(*node.operand, env, target, model));
            } else if constexpr (std::is_same_v<T, BinaryExpr>) {
                DimArray lhs = eval_expression(*node.lhs, env, target, model);
                DimArray rhs = eval_expression(*node.rhs, env, target, model);
                return broadcast_binop(node.op, lhs, rhs, model);
            } else {
                DimArray operand = eval_expression(*node.operand, env, target, model);
                return reduce_sum(operand, target, model);
            }
        },
        expr.node);
}

namespace {

DimArray table_to_array(const Model& model, const VariableDecl& var) {
    DimArray array = DimArray::zeros(model, var.dims);
    for (const auto& [coord, value] : var.table->entries) {
        array.at(coord) = value;
    }
    return array;
}

}  // namespace

ValueStore eval_model(const ValidatedModel& validated, const Overrides& overrides) {
    const Model& model = validated.model;
    for (const auto& [name, value] : overrides) {
        const VariableDecl* var = model.find_variable(name);
        if (!var) {
            throw EngineError(EngineErrorKind::BadOverride, "unknown input: " + name);
        }
        if (var->kind != VarKind::Input) {
            throw EngineError(EngineErrorKind::BadOverride,
                              "override target is not an input: " + name);
        }
        if (!var->dims.empty()) {
            throw EngineError(EngineErrorKind::BadOverride,
                              "only scalar inputs can be overridden: " + name);
        }
        if (!std::isfinite(value)) {
            throw EngineError(EngineErrorKind::BadOverride,
                              "override value for " + name + " is not finite");
        }
    }

    ValueStore store;
    for (auto index : validated.eval_order) {
        const VariableDecl& var = model.variables[index];
        if (var.kind == VarKind::Input || var.kind == VarKind::Data) {
            auto it = overrides.find(var.name);
            if (it != overrides.end()) {
                store.emplace(var.name, DimArray::scalar(it->second));
            } else {
                store.emplace(var.name, table_to_array(model, var));
            }
            continue;
        }
        try {
            DimArray value = eval_expression(*var.expr, store, var.dims, model);
            if (!(value.dims == var.dims)) {
                // unreachable for validated models
                throw EngineError(EngineErrorKind::ShapeMismatch,
                                  "evaluated dimensions do not match declaration");
            }
            store.emplace(var.name, std::move(value));
        } catch (const EngineError& e) {
            throw EngineError(e.kind(), "[" + var.name + "] " + e.what());
        }
    }
    return store;
}

double round_sig10(double value) {
    char buffer[64];
    std::snprintf(buffer, sizeof(buffer), "%.10g", value);
    return std::strtod(buffer, nullptr);
}

std::string value_store_to_json(const ValueStore& store, const Model& model) {
    nlohmann::ordered_json doc;
    // Model declaration order, skipping entries absent from the store.
    for (const auto& var : model.variables) {
        auto it = store.find(var.name);
        if (it == store.end()) continue;
        const DimArray& array = it->second;
        nlohmann::ordered_json entry;
        entry["dims"] = model.dim_names(array.dims);
        entry["shape"] = array.shape;
        nlohmann::ordered_json coords;
        for (auto dim_index : array.dims.indices()) {
            const Dimension& dim = model.dimension(dim_index);
            coords[dim.name] = dim.instances;
        }
        entry["coords"] = std::move(coords);
        nlohmann::ordered_json values = nlohmann::ordered_json::array();
        for (double value : array.values) values.push_back(round_sig10(value));
        entry["values"] = std::move(values);
        doc[var.name] = std::move(entry);
    }
    return doc.dump(2) + "\n";
}

}  // namespace dimsheet
