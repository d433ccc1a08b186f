#include "dimsheet/model.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <set>
#include <sstream>

namespace dimsheet {

std::optional<std::size_t> Dimension::index_of(const std::string& label) const {
    for (std::size_t i = 0; i < instances.size(); ++i) {
        if (instances[i] == label) return i;
    }
    return std::nullopt;
}

DimensionSet::DimensionSet(std::vector<std::size_t> indices) : indices_(std::move(indices)) {
    std::sort(indices_.begin(), indices_.end());
}

bool DimensionSet::contains(std::size_t dim_index) const {
    return std::binary_search(indices_.begin(), indices_.end(), dim_index);
}

bool DimensionSet::subset_of(const DimensionSet& other) const {
    return std::includes(other.indices_.begin(), other.indices_.end(), indices_.begin(),
                         indices_.end());
}

DimensionSet DimensionSet::union_with(const DimensionSet& other) const {
    std::vector<std::size_t> merged;
    std::set_union(indices_.begin(), indices_.end(), other.indices_.begin(),
                   other.indices_.end(), std::back_inserter(merged));
    return DimensionSet(std::move(merged));
}

DimensionSet DimensionSet::minus(const DimensionSet& other) const {
    std::vector<std::size_t> diff;
    std::set_difference(indices_.begin(), indices_.end(), other.indices_.begin(),
                        other.indices_.end(), std::back_inserter(diff));
    return DimensionSet(std::move(diff));
}

ExprPtr make_number(double value) {
    return std::make_shared<Expr>(Expr{NumberExpr{value}});
}
ExprPtr make_var_ref(std::string name) {
    return std::make_shared<Expr>(Expr{VarRefExpr{std::move(name)}});
}
ExprPtr make_neg(ExprPtr operand) {
    return std::make_shared<Expr>(Expr{NegExpr{std::move(operand)}});
}
ExprPtr make_binary(BinaryOp op, ExprPtr lhs, ExprPtr rhs) {
    return std::make_shared<Expr>(Expr{BinaryExpr{op, std::move(lhs), std::move(rhs)}});
}
ExprPtr make_sum(ExprPtr operand) {
    return std::make_shared<Expr>(Expr{SumExpr{std::move(operand)}});
}

bool expr_equal(const Expr& a, const Expr& b) {
    if (a.node.index() != b.node.index()) return false;
    return std::visit(
        [&](const auto& lhs) -> bool {
            using T = std::decay_t<decltype(lhs)>;
            const auto& rhs = std::get<T>(b.node);
            if constexpr (std::is_same_v<T, NumberExpr>) {
                return lhs.value == rhs.value;
            } else if constexpr (std::is_same_v<T, VarRefExpr>) {
                return lhs.name == rhs.name;
            } else if constexpr (std::is_same_v<T, NegExpr>) {
                return expr_equal(*lhs.operand, *rhs.operand);
            } else if constexpr (std::is_same_v<T, BinaryExpr>) {
                return lhs.op == rhs.op && expr_equal(*lhs.lhs, *rhs.lhs) &&
                       expr_equal(*lhs.rhs, *rhs.rhs);
            } else {
                return expr_equal(*lhs.operand, *rhs.operand);
            }
        },
        a.node);
}

namespace {

void collect_refs(const Expr& expr, std::vector<std::string>& out) {
    std::visit(
        [&](const auto& node) {
            using T = std::decay_t<decltype(node)>;
            if constexpr (std::is_same_v<T, VarRefExpr>) {
                if (std::find(out.begin(), out.end(), node.name) == out.end()) {
                    out.push_back(node.name);
                }
            } else if constexpr (std::is_same_v<T, NegExpr> || std::is_same_v<T, SumExpr>) {
                collect_refs(*node.operand, out);
            } else if constexpr (std::is_same_v<T, BinaryExpr>) {
                collect_refs(*node.lhs, out);
                collect_refs(*node.rhs, out);
            }
        },
        expr.node);
}

}  // namespace

std::vector<std::string> referenced_variables(const Expr& expr) {
    std::vector<std::string> out;
    collect_refs(expr, out);
    return out;
}

const char* to_string(VarKind kind) {
    switch (kind) {
        case VarKind::Input: return "input";
        case VarKind::Data: return "data";
        case VarKind::Calculated: return "calc";
        case VarKind::Output: return "output";
    }
    return "?";
}

bool variable_equal(const VariableDecl& a, const VariableDecl& b) {
    if (a.name != b.name || a.kind != b.kind || !(a.dims == b.dims)) return false;
    if (a.table.has_value() != b.table.has_value()) return false;
    if (a.table && !(*a.table == *b.table)) return false;
    if ((a.expr == nullptr) != (b.expr == nullptr)) return false;
    if (a.expr && !expr_equal(*a.expr, *b.expr)) return false;
    return true;
}

std::optional<std::size_t> Model::dimension_index(const std::string& name) const {
    for (std::size_t i = 0; i < dimensions.size(); ++i) {
        if (dimensions[i].name == name) return i;
    }
    return std::nullopt;
}

const VariableDecl* Model::find_variable(const std::string& name) const {
    for (const auto& var : variables) {
        if (var.name == name) return &var;
    }
    return nullptr;
}

DimensionSet Model::canonicalize(const std::vector<std::string>& names) const {
    std::vector<std::size_t> indices;
    indices.reserve(names.size());
    for (const auto& name : names) {
        auto index = dimension_index(name);
        if (!index) {
            throw ModelError(ModelErrorKind::UnknownDimension, "unknown dimension: " + name);
        }
        if (std::find(indices.begin(), indices.end(), *index) != indices.end()) {
            throw ModelError(ModelErrorKind::DuplicateDimension, "duplicate dimension: " + name);
        }
        indices.push_back(*index);
    }
    return DimensionSet(std::move(indices));
}

std::vector<std::string> Model::dim_names(const DimensionSet& dims) const {
    std::vector<std::string> names;
    names.reserve(dims.size());
    for (auto index : dims.indices()) names.push_back(dimensions.at(index).name);
    return names;
}

std::vector<std::size_t> Model::shape_of(const DimensionSet& dims) const {
    std::vector<std::size_t> shape;
    shape.reserve(dims.size());
    for (auto index : dims.indices()) shape.push_back(dimensions.at(index).size());
    return shape;
}

std::size_t Model::cell_count(const DimensionSet& dims) const {
    std::size_t count = 1;
    for (auto index : dims.indices()) count *= dimensions.at(index).size();
    return count;
}

bool model_equal(const Model& a, const Model& b) {
    if (a.dimensions.size() != b.dimensions.size()) return false;
    for (std::size_t i = 0; i < a.dimensions.size(); ++i) {
        if (a.dimensions[i].name != b.dimensions[i].name ||
            a.dimensions[i].instances != b.dimensions[i].instances) {
            return false;
        }
    }
    if (a.variables.size() != b.variables.size()) return false;
    for (std::size_t i = 0; i < a.variables.size(); ++i) {
        if (!variable_equal(a.variables[i], b.variables[i])) return false;
    }
    return true;
}

DimensionSet infer_dims(const Expr& expr, const Model& model,
                        const std::map<std::string, DimensionSet>& env,
                        const DimensionSet& target) {
    return std::visit(
        [&](const auto& node) -> DimensionSet {
            using T = std::decay_t<decltype(node)>;
            if constexpr (std::is_same_v<T, NumberExpr>) {
                return DimensionSet();
            } else if constexpr (std::is_same_v<T, VarRefExpr>) {
                auto it = env.find(node.name);
                if (it == env.end()) {
                    throw ModelError(ModelErrorKind::UnknownVariable,
                                     "unknown variable: " + node.name);
                }
                return it->second;
            } else if constexpr (std::is_same_v<T, NegExpr>) {
                return infer_dims(*node.operand, model, env, target);
            } else if constexpr (std::is_same_v<T, BinaryExpr>) {
                auto lhs = infer_dims(*node.lhs, model, env, target);
                auto rhs = infer_dims(*node.rhs, model, env, target);
                return lhs.union_with(rhs);
            } else {
                auto operand = infer_dims(*node.operand, model, env, target);
                if (!target.subset_of(operand)) {
                    std::ostringstream msg;
                    msg << "invalid reduction: target {";
                    for (auto name : model.dim_names(target)) msg << ' ' << name;
                    msg << " } is not a subset of the operand's dimensions {";
                    for (auto name : model.dim_names(operand)) msg << ' ' << name;
                    msg << " }";
                    throw ModelError(ModelErrorKind::InvalidReduction, msg.str());
                }
                return target;
            }
        },
        expr.node);
}

namespace {

std::string issues_summary(const std::vector<ValidationIssue>& issues) {
    std::ostringstream out;
    out << "model validation failed (" << issues.size() << " issue"
        << (issues.size() == 1 ? "" : "s") << ")";
    for (const auto& issue : issues) {
        out << "\n  " << (issue.variable.empty() ? "" : "[" + issue.variable + "] ")
            << issue.message;
    }
    return out.str();
}

// Enumerates coordinate tuples of `shape` in row-major order.
bool next_coord(std::vector<std::size_t>& coord, const std::vector<std::size_t>& shape) {
    for (std::size_t i = shape.size(); i-- > 0;) {
        if (++coord[i] < shape[i]) return true;
        coord[i] = 0;
    }
    return false;
}

std::string coord_to_string(const Model& model, const DimensionSet& dims,
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

// "X Distribution per <Dim>" data tables should sum to 1 over the non-<Dim>
// axes for each instance of <Dim>; violations become warnings.
void check_distribution_tables(const Model& model, std::vector<ValidationIssue>& warnings) {
    for (const auto& var : model.variables) {
        if (var.kind != VarKind::Data || !var.table || var.dims.size() < 2) continue;
        auto pos = var.name.rfind(" per ");
        if (pos == std::string::npos || var.name.find("Distribution") == std::string::npos) {
            continue;
        }
        std::string dim_name = var.name.substr(pos + 5);
        auto dim_index = model.dimension_index(dim_name);
        if (!dim_index || !var.dims.contains(*dim_index)) continue;

        std::size_t axis = 0;
        while (var.dims.indices()[axis] != *dim_index) ++axis;
        std::map<std::size_t, double> sums;
        for (const auto& [coord, value] : var.table->entries) {
            sums[coord[axis]] += value;
        }
        for (const auto& [instance, sum] : sums) {
            if (std::abs(sum - 1.0) > 1e-12) {
                std::ostringstream msg;
                msg << "distribution does not sum to 1 for " << dim_name << '='
                    << model.dimension(*dim_index).instances.at(instance) << " (sum=" << sum
                    << ')';
                warnings.push_back({ValidationIssueKind::DistributionNotNormalized,
                                    IssueSeverity::Warning, var.name, msg.str()});
            }
        }
    }
}

}  // namespace

ValidationError::ValidationError(std::vector<ValidationIssue> issues)
    : std::runtime_error(issues_summary(issues)), issues_(std::move(issues)) {}

const VariableDecl& ValidatedModel::variable(const std::string& name) const {
    const VariableDecl* var = model.find_variable(name);
    if (!var) {
        throw ModelError(ModelErrorKind::UnknownVariable, "unknown variable: " + name);
    }
    return *var;
}

ValidatedModel validate(const Model& model) {
    std::vector<ValidationIssue> issues;
    std::vector<ValidationIssue> warnings;

    std::set<std::string> dim_names;
    for (const auto& dim : model.dimensions) {
        if (!dim_names.insert(dim.name).second) {
            issues.push_back({ValidationIssueKind::BadDimension, IssueSeverity::Error, "",
                              "dimension '" + dim.name + "' declared more than once"});
        }
        if (dim.instances.empty()) {
            issues.push_back({ValidationIssueKind::BadDimension, IssueSeverity::Error, "",
                              "dimension '" + dim.name + "' has no instances"});
        }
        std::set<std::string> labels;
        for (const auto& label : dim.instances) {
            if (!labels.insert(label).second) {
                issues.push_back({ValidationIssueKind::BadDimension, IssueSeverity::Error, "",
                                  "dimension '" + dim.name + "' repeats the label '" + label +
                                      "'"});
            }
        }
    }

    std::set<std::string> seen_names;
    for (const auto& var : model.variables) {
        if (!seen_names.insert(var.name).second) {
            issues.push_back({ValidationIssueKind::DuplicateVariable, IssueSeverity::Error,
                              var.name, "variable declared more than once"});
        }
    }

    std::map<std::string, DimensionSet> env;
    for (const auto& var : model.variables) env[var.name] = var.dims;

    // Table completeness, then dimension inference for formulas.
    for (const auto& var : model.variables) {
        if (var.kind == VarKind::Input || var.kind == VarKind::Data) {
            if (!var.table) {
                issues.push_back({ValidationIssueKind::BadTable, IssueSeverity::Error, var.name,
                                  "input/data variable has no value table"});
                continue;
            }
            const std::size_t expected = model.cell_count(var.dims);
            if (var.table->entries.size() != expected) {
                // Find one missing tuple to point at.
                std::vector<std::size_t> coord(var.dims.size(), 0);
                auto shape = model.shape_of(var.dims);
                std::string missing;
                do {
                    if (!var.table->entries.count(coord)) {
                        missing = coord_to_string(model, var.dims, coord);
                        break;
                    }
                } while (next_coord(coord, shape));
                std::ostringstream msg;
                msg << "value table has " << var.table->entries.size() << " of " << expected
                    << " entries";
                if (!missing.empty()) msg << "; missing " << missing;
                issues.push_back({ValidationIssueKind::IncompleteTable, IssueSeverity::Error,
                                  var.name, msg.str()});
            }
        } else {
            if (!var.expr) {
                issues.push_back({ValidationIssueKind::BadTable, IssueSeverity::Error, var.name,
                                  "calculated/output variable has no formula"});
                continue;
            }
        }
    }

    std::map<std::string, DimensionSet> inferred;
    for (const auto& var : model.variables) {
        if (!var.has_formula() || !var.expr) {
            inferred[var.name] = var.dims;
            continue;
        }
        try {
            DimensionSet dims = infer_dims(*var.expr, model, env, var.dims);
            inferred[var.name] = dims;
            if (!(dims == var.dims)) {
                std::ostringstream msg;
                msg << "declared dimensions (";
                for (auto name : model.dim_names(var.dims)) msg << ' ' << name;
                msg << " ) do not match inferred (";
                for (auto name : model.dim_names(dims)) msg << ' ' << name;
                msg << " )";
                issues.push_back({ValidationIssueKind::DimensionMismatch, IssueSeverity::Error,
                                  var.name, msg.str()});
            }
        } catch (const ModelError& e) {
            ValidationIssueKind kind = ValidationIssueKind::UnknownVariable;
            if (e.kind() == ModelErrorKind::InvalidReduction) {
                kind = ValidationIssueKind::InvalidReduction;
            } else if (e.kind() == ModelErrorKind::UnknownDimension) {
                kind = ValidationIssueKind::UnknownDimension;
            }
            issues.push_back({kind, IssueSeverity::Error, var.name, e.what()});
        }
    }

    // Dependency order: stable Kahn, ready variables picked in declaration
    // order so a topologically-sorted source keeps its order.
    std::map<std::string, std::size_t> index_of;
    for (std::size_t i = 0; i < model.variables.size(); ++i) {
        index_of.emplace(model.variables[i].name, i);
    }
    std::vector<std::vector<std::size_t>> consumers(model.variables.size());
    std::vector<std::size_t> pending(model.variables.size(), 0);
    for (std::size_t i = 0; i < model.variables.size(); ++i) {
        const auto& var = model.variables[i];
        if (!var.has_formula() || !var.expr) continue;
        for (const auto& dep : referenced_variables(*var.expr)) {
            auto it = index_of.find(dep);
            if (it == index_of.end()) continue;  // reported above
            consumers[it->second].push_back(i);
            ++pending[i];
        }
    }
    std::vector<std::size_t> order;
    order.reserve(model.variables.size());
    std::set<std::size_t> ready;
    for (std::size_t i = 0; i < model.variables.size(); ++i) {
        if (pending[i] == 0) ready.insert(i);
    }
    while (!ready.empty()) {
        std::size_t i = *ready.begin();
        ready.erase(ready.begin());
        order.push_back(i);
        for (auto consumer : consumers[i]) {
            if (--pending[consumer] == 0) ready.insert(consumer);
        }
    }
    if (order.size() != model.variables.size()) {
        // Extract one cycle path for the report.
        std::size_t start = 0;
        while (pending[start] == 0) ++start;
        std::vector<std::size_t> path{start};
        std::size_t cursor = start;
        std::string cycle;
        for (;;) {
            const auto& var = model.variables[cursor];
            std::size_t next = cursor;
            if (var.expr) {
                for (const auto& dep : referenced_variables(*var.expr)) {
                    auto it = index_of.find(dep);
                    if (it != index_of.end() && pending[it->second] > 0) {
                        next = it->second;
                        break;
                    }
                }
            }
            auto seen = std::find(path.begin(), path.end(), next);
            if (seen != path.end()) {
                std::ostringstream msg;
                msg << "cyclic dependency:";
                for (auto it = seen; it != path.end(); ++it) {
                    msg << " [" << model.variables[*it].name << "] ->";
                }
                msg << " [" << model.variables[next].name << "]";
                cycle = msg.str();
                break;
            }
            path.push_back(next);
            cursor = next;
        }
        issues.push_back(
            {ValidationIssueKind::CyclicDependency, IssueSeverity::Error, "", cycle});
    }

    if (!issues.empty()) throw ValidationError(std::move(issues));

    check_distribution_tables(model, warnings);

    return ValidatedModel{model, std::move(order), std::move(inferred), std::move(warnings)};
}

namespace {

ExprPtr substitute(const ExprPtr& expr, const std::string& name, const ExprPtr& replacement) {
    return std::visit(
        [&](const auto& node) -> ExprPtr {
            using T = std::decay_t<decltype(node)>;
            if constexpr (std::is_same_v<T, VarRefExpr>) {
                return node.name == name ? replacement : expr;
            } else if constexpr (std::is_same_v<T, NegExpr>) {
                auto operand = substitute(node.operand, name, replacement);
                return operand == node.operand ? expr : make_neg(operand);
            } else if constexpr (std::is_same_v<T, BinaryExpr>) {
                auto lhs = substitute(node.lhs, name, replacement);
                auto rhs = substitute(node.rhs, name, replacement);
                return (lhs == node.lhs && rhs == node.rhs) ? expr
                                                            : make_binary(node.op, lhs, rhs);
            } else if constexpr (std::is_same_v<T, SumExpr>) {
                auto operand = substitute(node.operand, name, replacement);
                return operand == node.operand ? expr : make_sum(operand);
            } else {
                return expr;
            }
        },
        expr->node);
}

}  // namespace

Model inline_variable(const Model& model, const std::string& name) {
    const VariableDecl* target = model.find_variable(name);
    if (!target) {
        throw ModelError(ModelErrorKind::UnknownVariable, "unknown variable: " + name);
    }
    if (!target->has_formula() || !target->expr) {
        throw ModelError(ModelErrorKind::UnknownVariable,
                         "cannot inline non-calculated variable: " + name);
    }
    Model result;
    result.dimensions = model.dimensions;
    for (const auto& var : model.variables) {
        if (var.name == name) continue;
        VariableDecl copy = var;
        if (copy.expr) copy.expr = substitute(copy.expr, name, target->expr);
        result.variables.push_back(std::move(copy));
    }
    return result;
}

}  // namespace dimsheet
