#pragma once

#include <optional>
#include <string>
#include <vector>

#include "dimsheet/model.hpp"

namespace dimsheet {

struct SourceSpan {
    int line = 1;    // 1-based
    int column = 1;  // 1-based
    int length = 0;
};

struct ParseDiagnostic {
    SourceSpan span;
    IssueSeverity severity = IssueSeverity::Error;
    std::string message;
};

class ParseError : public std::runtime_error {
public:
    ParseError(SourceSpan span, const std::string& message)
        : std::runtime_error(message), span_(span) {}
    const SourceSpan& span() const { return span_; }

private:
    SourceSpan span_;
};

struct ParseResult {
    std::optional<Model> model;  // present iff no error diagnostics
    std::vector<ParseDiagnostic> diagnostics;

    bool ok() const { return model.has_value(); }
};

// Parses the line-oriented model definition format:
//   dimension <Name>: <label> <label> ...
//   input [<Display Name>] = <number>
//   data [<Display Name>] over <Dim>[, <Dim>...]:
//     <label> ... <label> <number>     (one indented row per coordinate)
//   data [<Display Name>] = <number>
//   calc|output [<Display Name>] [over <Dim>[, <Dim>...]] = <expression>
// '#' starts a comment. Bracketed names keep interior spaces verbatim.
ParseResult parse_model(const std::string& text);

// Parses a single formula. Precedence: ^ (right-assoc) over unary minus over
// '*','/' over '+','-'; SUM(...) is a function form. Throws ParseError.
ExprPtr parse_expression(const std::string& text);

// Canonical text form; parse_model(render_model(m)) is structurally equal
// to m. Dimensions first, then variables, both in declaration order.
std::string render_model(const Model& model);

std::string render_expression(const Expr& expr);

// Shortest decimal form that reparses to exactly the same double.
std::string format_number(double value);

}  // namespace dimsheet
