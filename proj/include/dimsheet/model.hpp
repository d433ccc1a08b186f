#pragma once

#include <map>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

namespace dimsheet {

// A named dimension with an ordered list of instance labels.
struct Dimension {
    std::string name;
    std::vector<std::string> instances;

    std::optional<std::size_t> index_of(const std::string& label) const;
    std::size_t size() const { return instances.size(); }
};

// A set of dimensions, stored as indices into Model::dimensions sorted into
// canonical order (declaration order). Canonical by construction.
class DimensionSet {
public:
    DimensionSet() = default;
    // `indices` may arrive in any order; duplicates are a caller bug.
    explicit DimensionSet(std::vector<std::size_t> indices);

    const std::vector<std::size_t>& indices() const { return indices_; }
    std::size_t size() const { return indices_.size(); }
    bool empty() const { return indices_.empty(); }
    bool contains(std::size_t dim_index) const;
    bool subset_of(const DimensionSet& other) const;
    DimensionSet union_with(const DimensionSet& other) const;
    // Dimensions of *this that are absent from `other`.
    DimensionSet minus(const DimensionSet& other) const;

    bool operator==(const DimensionSet& other) const = default;

private:
    std::vector<std::size_t> indices_;
};

enum class BinaryOp { Add, Sub, Mul, Div, Pow };

struct Expr;
using ExprPtr = std::shared_ptr<const Expr>;

struct NumberExpr {
    double value;
};
struct VarRefExpr {
    std::string name;
};
struct NegExpr {
    ExprPtr operand;
};
struct BinaryExpr {
    BinaryOp op;
    ExprPtr lhs;
    ExprPtr rhs;
};
// SUM(...) reduces the operand onto the enclosing variable's dimension set.
struct SumExpr {
    ExprPtr operand;
};

struct Expr {
    std::variant<NumberExpr, VarRefExpr, NegExpr, BinaryExpr, SumExpr> node;
};

ExprPtr make_number(double value);
ExprPtr make_var_ref(std::string name);
ExprPtr make_neg(ExprPtr operand);
ExprPtr make_binary(BinaryOp op, ExprPtr lhs, ExprPtr rhs);
ExprPtr make_sum(ExprPtr operand);

// Structural equality.
bool expr_equal(const Expr& a, const Expr& b);

// Variable names referenced anywhere in the expression, in first-seen order.
std::vector<std::string> referenced_variables(const Expr& expr);

enum class VarKind { Input, Data, Calculated, Output };

const char* to_string(VarKind kind);

// Literal values of an input/data variable: one entry per coordinate tuple
// over the variable's dimension set (scalar tables hold the single entry
// keyed by the empty tuple). Keys are instance indices in canonical order.
struct ValueTable {
    std::map<std::vector<std::size_t>, double> entries;

    bool operator==(const ValueTable& other) const = default;
};

struct VariableDecl {
    std::string name;  // display name, may contain spaces
    VarKind kind = VarKind::Input;
    DimensionSet dims;
    ExprPtr expr;                    // calculated/output
    std::optional<ValueTable> table; // input/data

    bool has_formula() const { return kind == VarKind::Calculated || kind == VarKind::Output; }
};

bool variable_equal(const VariableDecl& a, const VariableDecl& b);

enum class ModelErrorKind {
    UnknownDimension,
    DuplicateDimension,
    UnknownVariable,
    InvalidReduction,
};

class ModelError : public std::runtime_error {
public:
    ModelError(ModelErrorKind kind, const std::string& message)
        : std::runtime_error(message), kind_(kind) {}
    ModelErrorKind kind() const { return kind_; }

private:
    ModelErrorKind kind_;
};

struct Model {
    std::vector<Dimension> dimensions;
    std::vector<VariableDecl> variables;

    std::optional<std::size_t> dimension_index(const std::string& name) const;
    const Dimension& dimension(std::size_t index) const { return dimensions.at(index); }
    const VariableDecl* find_variable(const std::string& name) const;

    // Sorts dimension names into canonical (declaration) order.
    // Throws ModelError on unknown or duplicated names.
    DimensionSet canonicalize(const std::vector<std::string>& names) const;

    std::vector<std::string> dim_names(const DimensionSet& dims) const;
    std::vector<std::size_t> shape_of(const DimensionSet& dims) const;
    std::size_t cell_count(const DimensionSet& dims) const;
};

bool model_equal(const Model& a, const Model& b);

// Dimension set of an expression given the dimension sets of the variables it
// references. `target` is the enclosing variable's declared set; SUM nodes
// reduce onto it and require target to be a subset of the operand's set.
DimensionSet infer_dims(const Expr& expr, const Model& model,
                        const std::map<std::string, DimensionSet>& env,
                        const DimensionSet& target);

enum class IssueSeverity { Error, Warning };

enum class ValidationIssueKind {
    DimensionMismatch,
    CyclicDependency,
    IncompleteTable,
    DuplicateVariable,
    UnknownVariable,
    UnknownDimension,
    InvalidReduction,
    BadTable,
    BadDimension,
    DistributionNotNormalized,
};

struct ValidationIssue {
    ValidationIssueKind kind;
    IssueSeverity severity = IssueSeverity::Error;
    std::string variable;  // empty when not variable-specific
    std::string message;
};

class ValidationError : public std::runtime_error {
public:
    explicit ValidationError(std::vector<ValidationIssue> issues);
    const std::vector<ValidationIssue>& issues() const { return issues_; }

private:
    std::vector<ValidationIssue> issues_;
};

// A model that passed validation: complete tables, declared dims equal to
// inferred dims, acyclic dependencies. Immutable after construction.
struct ValidatedModel {
    Model model;
    std::vector<std::size_t> eval_order;  // indices into model.variables
    std::map<std::string, DimensionSet> inferred_dims;
    std::vector<ValidationIssue> warnings;

    const VariableDecl& variable(const std::string& name) const;
};

ValidatedModel validate(const Model& model);

// Replaces every reference to `name` (a calculated variable) by its defining
// expression and removes the variable. Used to check that fusing a formula
// into its consumers is value-preserving.
Model inline_variable(const Model& model, const std::string& name);

}  // namespace dimsheet
