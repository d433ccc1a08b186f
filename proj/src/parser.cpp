#include "dimsheet/parser.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <charconv>
#include <cstdlib>
#include <sstream>

namespace dimsheet {

namespace {

bool is_ident_start(char c) { return std::isalpha(static_cast<unsigned char>(c)) || c == '_'; }
bool is_ident_char(char c) { return std::isalnum(static_cast<unsigned char>(c)) || c == '_'; }

// Cursor over one line of source, 0-based offset with 1-based reporting.
struct LineCursor {
    const std::string& text;
    int line;
    std::size_t pos = 0;

    void skip_ws() {
        while (pos < text.size() && (text[pos] == ' ' || text[pos] == '\t')) ++pos;
    }
    bool at_end() {
        skip_ws();
        return pos >= text.size();
    }
    char peek() { return pos < text.size() ? text[pos] : '\0'; }
    SourceSpan span_here(int length = 1) const {
        return SourceSpan{line, static_cast<int>(pos) + 1, length};
    }
    [[noreturn]] void fail(const std::string& message, int length = 1) {
        throw ParseError(span_here(length), message);
    }

    bool try_consume(char c) {
        skip_ws();
        if (pos < text.size() && text[pos] == c) {
            ++pos;
            return true;
        }
        return false;
    }
    void expect(char c, const std::string& what) {
        if (!try_consume(c)) fail("expected '" + std::string(1, c) + "' " + what);
    }

    std::string ident(const std::string& what) {
        skip_ws();
        if (pos >= text.size() || !is_ident_start(text[pos])) fail("expected " + what);
        std::size_t start = pos;
        while (pos < text.size() && is_ident_char(text[pos])) ++pos;
        return text.substr(start, pos - start);
    }

    // [Bracketed Display Name]; interior kept verbatim.
    std::string bracket_name() {
        skip_ws();
        if (peek() != '[') fail("expected '[' opening a variable name");
        std::size_t start = pos++;
        while (pos < text.size() && text[pos] != ']') ++pos;
        if (pos >= text.size()) {
            pos = start;
            fail("unterminated bracketed name", static_cast<int>(text.size() - start));
        }
        std::string name = text.substr(start + 1, pos - start - 1);
        ++pos;
        if (name.empty()) {
            pos = start;
            fail("empty variable name", 2);
        }
        return name;
    }

    double number(bool allow_sign) {
        skip_ws();
        std::size_t start = pos;
        if (allow_sign && peek() == '-') ++pos;
        std::size_t digits_start = pos;
        while (pos < text.size() && std::isdigit(static_cast<unsigned char>(text[pos]))) ++pos;
        if (pos == digits_start) {
            pos = start;
            fail("expected a number");
        }
        if (peek() == '.') {
            ++pos;
            std::size_t frac_start = pos;
            while (pos < text.size() && std::isdigit(static_cast<unsigned char>(text[pos]))) ++pos;
            if (pos == frac_start) {
                pos = start;
                fail("malformed number: missing digits after '.'",
                     static_cast<int>(pos - start + 1));
            }
        }
        if (peek() == 'e' || peek() == 'E') {
            std::size_t exp_start = pos++;
            if (peek() == '+' || peek() == '-') ++pos;
            std::size_t digits = pos;
            while (pos < text.size() && std::isdigit(static_cast<unsigned char>(text[pos]))) ++pos;
            if (pos == digits) {
                pos = start;
                fail("malformed number: missing exponent digits",
                     static_cast<int>(exp_start - start + 1));
            }
        }
        double value = std::strtod(text.substr(start, pos - start).c_str(), nullptr);
        if (!std::isfinite(value)) {
            std::size_t length = pos - start;
            pos = start;
            fail("number out of range", static_cast<int>(length));
        }
        return value;
    }
};

// expression ::= term {(+|-) term}
// term       ::= factor {(*|/) factor}
// factor     ::= atom ['^' factor]
// atom       ::= number | [Name] | '(' expression ')' | '-' atom | SUM '(' expression ')'
class ExprParser {
public:
    explicit ExprParser(LineCursor& cursor) : cur_(cursor) {}

    ExprPtr parse() {
        ExprPtr expr = expression();
        if (!cur_.at_end()) cur_.fail("unexpected trailing input in expression");
        return expr;
    }

    ExprPtr expression() {
        ExprPtr lhs = term();
        for (;;) {
            if (cur_.try_consume('+')) {
                lhs = make_binary(BinaryOp::Add, lhs, term());
            } else if (cur_.try_consume('-')) {
                lhs = make_binary(BinaryOp::Sub, lhs, term());
            } else {
                return lhs;
            }
        }
    }

private:
    ExprPtr term() {
        ExprPtr lhs = factor();
        for (;;) {
            if (cur_.try_consume('*')) {
                lhs = make_binary(BinaryOp::Mul, lhs, factor());
            } else if (cur_.try_consume('/')) {
                lhs = make_binary(BinaryOp::Div, lhs, factor());
            } else {
                return lhs;
            }
        }
    }

    ExprPtr factor() {
        ExprPtr base = atom();
        if (cur_.try_consume('^')) {
            return make_binary(BinaryOp::Pow, base, factor());  // right-assoc
        }
        return base;
    }

    ExprPtr atom() {
        cur_.skip_ws();
        char c = cur_.peek();
        if (c == '\0') cur_.fail("unexpected end of expression");
        if (c == '-') {
            ++cur_.pos;
            return make_neg(atom());
        }
        if (c == '(') {
            ++cur_.pos;
            ExprPtr inner = expression();
            cur_.expect(')', "closing parenthesis");
            return inner;
        }
        if (c == '[') return make_var_ref(cur_.bracket_name());
        if (std::isdigit(static_cast<unsigned char>(c))) return make_number(cur_.number(false));
        if (is_ident_start(c)) {
            std::size_t start = cur_.pos;
            std::string word = cur_.ident("identifier");
            if (word == "SUM") {
                cur_.expect('(', "after SUM");
                ExprPtr inner = expression();
                cur_.expect(')', "closing SUM");
                return make_sum(inner);
            }
            cur_.pos = start;
            cur_.fail("unknown function or bare identifier '" + word +
                          "' (variable names are written in brackets)",
                      static_cast<int>(word.size()));
        }
        cur_.fail(std::string("unexpected character '") + c + "' in expression");
    }

    LineCursor& cur_;
};

struct Line {
    int number;
    std::string text;     // comment stripped
    bool indented = false;
};

std::vector<Line> split_lines(const std::string& text) {
    std::vector<Line> lines;
    std::size_t start = 0;
    int number = 1;
    while (start <= text.size()) {
        std::size_t end = text.find('\n', start);
        std::string raw = text.substr(
            start, end == std::string::npos ? std::string::npos : end - start);
        if (!raw.empty() && raw.back() == '\r') raw.pop_back();
        auto hash = raw.find('#');
        if (hash != std::string::npos) raw.resize(hash);
        bool blank = raw.find_first_not_of(" \t") == std::string::npos;
        if (!blank) {
            lines.push_back({number, raw, raw[0] == ' ' || raw[0] == '\t'});
        }
        if (end == std::string::npos) break;
        start = end + 1;
        ++number;
    }
    return lines;
}

class ModelParser {
public:
    explicit ModelParser(const std::string& text) : lines_(split_lines(text)) {}

    ParseResult run() {
        while (index_ < lines_.size()) {
            const Line& line = lines_[index_];
            try {
                if (line.indented) {
                    LineCursor cur{line.text, line.number};
                    cur.skip_ws();
                    cur.fail("indented row outside a data table");
                }
                declaration(line);
            } catch (const ParseError& e) {
                diagnostics_.push_back({e.span(), IssueSeverity::Error, e.what()});
                ++index_;
                skip_indented();  // swallow rows of a broken data block
            }
        }
        ParseResult result;
        result.diagnostics = std::move(diagnostics_);
        bool has_error = std::any_of(result.diagnostics.begin(), result.diagnostics.end(),
                                     [](const ParseDiagnostic& d) {
                                         return d.severity == IssueSeverity::Error;
                                     });
        if (!has_error) result.model = std::move(model_);
        return result;
    }

private:
    void skip_indented() {
        while (index_ < lines_.size() && lines_[index_].indented) ++index_;
    }

    void declaration(const Line& line) {
        LineCursor cur{line.text, line.number};
        std::string keyword = cur.ident("a declaration keyword");
        if (keyword == "dimension") {
            dimension_decl(cur);
        } else if (keyword == "input") {
            input_decl(cur);
        } else if (keyword == "data") {
            data_decl(cur);
        } else if (keyword == "calc" || keyword == "output") {
            formula_decl(cur, keyword == "calc" ? VarKind::Calculated : VarKind::Output);
        } else {
            cur.pos -= keyword.size();
            cur.fail("unknown keyword '" + keyword + "'", static_cast<int>(keyword.size()));
        }
    }

    void dimension_decl(LineCursor& cur) {
        std::string name = cur.ident("a dimension name");
        if (model_.dimension_index(name)) {
            cur.fail("dimension '" + name + "' already declared");
        }
        cur.expect(':', "after dimension name");
        Dimension dim{name, {}};
        while (!cur.at_end()) {
            std::string label = cur.ident("an instance label");
            if (dim.index_of(label)) {
                cur.fail("duplicate instance label '" + label + "'",
                         static_cast<int>(label.size()));
            }
            dim.instances.push_back(std::move(label));
        }
        if (dim.instances.empty()) cur.fail("dimension needs at least one instance");
        model_.dimensions.push_back(std::move(dim));
        ++index_;
    }

    std::string variable_name(LineCursor& cur) {
        std::string name = cur.bracket_name();
        if (model_.find_variable(name)) {
            cur.fail("variable [" + name + "] already declared");
        }
        return name;
    }

    DimensionSet over_clause(LineCursor& cur) {
        std::vector<std::string> names;
        do {
            names.push_back(cur.ident("a dimension name"));
        } while (cur.try_consume(','));
        try {
            return model_.canonicalize(names);
        } catch (const ModelError& e) {
            cur.fail(e.what());
        }
    }

    void input_decl(LineCursor& cur) {
        std::string name = variable_name(cur);
        cur.expect('=', "after input name (inputs are scalar)");
        double value = cur.number(true);
        if (!cur.at_end()) cur.fail("unexpected trailing input");
        VariableDecl var{name, VarKind::Input, DimensionSet(), nullptr, ValueTable{}};
        var.table->entries.emplace(std::vector<std::size_t>{}, value);
        model_.variables.push_back(std::move(var));
        ++index_;
    }

    void data_decl(LineCursor& cur) {
        std::string name = variable_name(cur);
        cur.skip_ws();
        if (cur.try_consume('=')) {  // scalar data value
            double value = cur.number(true);
            if (!cur.at_end()) cur.fail("unexpected trailing input");
            VariableDecl var{name, VarKind::Data, DimensionSet(), nullptr, ValueTable{}};
            var.table->entries.emplace(std::vector<std::size_t>{}, value);
            model_.variables.push_back(std::move(var));
            ++index_;
            return;
        }
        std::string over = cur.ident("'over' or '='");
        if (over != "over") cur.fail("expected 'over' or '=' after data name");
        DimensionSet dims = over_clause(cur);
        cur.expect(':', "before data rows");
        if (!cur.at_end()) cur.fail("data rows start on the following lines");
        ++index_;

        VariableDecl var{name, VarKind::Data, dims, nullptr, ValueTable{}};
        while (index_ < lines_.size() && lines_[index_].indented) {
            const Line& row = lines_[index_];
            try {
                data_row(row, dims, *var.table);
            } catch (const ParseError& e) {
                diagnostics_.push_back({e.span(), IssueSeverity::Error, e.what()});
            }
            ++index_;
        }
        model_.variables.push_back(std::move(var));
    }

    // Row format: one instance label per dimension (canonical order), then
    // the value. Completeness is checked later, at validation.
    void data_row(const Line& row, const DimensionSet& dims, ValueTable& table) {
        LineCursor cur{row.text, row.number};
        std::vector<std::size_t> coord;
        coord.reserve(dims.size());
        for (auto dim_index : dims.indices()) {
            const Dimension& dim = model_.dimension(dim_index);
            cur.skip_ws();
            std::string label = cur.ident("an instance label of " + dim.name);
            auto instance = dim.index_of(label);
            if (!instance) {
                cur.pos -= label.size();
                cur.fail("'" + label + "' is not an instance of " + dim.name,
                         static_cast<int>(label.size()));
            }
            coord.push_back(*instance);
        }
        cur.skip_ws();
        std::size_t value_pos = cur.pos;
        double value = cur.number(true);
        if (!cur.at_end()) cur.fail("unexpected trailing input after value");
        if (!table.entries.emplace(std::move(coord), value).second) {
            cur.pos = value_pos;
            cur.fail("duplicate row for this coordinate");
        }
    }

    void formula_decl(LineCursor& cur, VarKind kind) {
        std::string name = variable_name(cur);
        DimensionSet dims;
        cur.skip_ws();
        if (cur.peek() != '=') {
            std::string over = cur.ident("'over' or '='");
            if (over != "over") cur.fail("expected 'over' or '='");
            dims = over_clause(cur);
        }
        cur.expect('=', "before the formula");
        ExprParser parser(cur);
        ExprPtr expr = parser.parse();
        model_.variables.push_back({name, kind, dims, std::move(expr), std::nullopt});
        ++index_;
    }

    std::vector<Line> lines_;
    std::size_t index_ = 0;
    Model model_;
    std::vector<ParseDiagnostic> diagnostics_;
};

}  // namespace

ParseResult parse_model(const std::string& text) {
    return ModelParser(text).run();
}

ExprPtr parse_expression(const std::string& text) {
    LineCursor cur{text, 1};
    ExprParser parser(cur);
    return parser.parse();
}

std::string format_number(double value) {
    char buffer[64];
    auto [end, ec] = std::to_chars(buffer, buffer + sizeof(buffer), value);
    (void)ec;
    return std::string(buffer, end);
}

namespace {

// Grammar levels: add/sub = 1, mul/div = 2, pow = 3, atoms (incl. unary
// minus and SUM) = 4. A '^' base must be an atom.
int expr_level(const Expr& expr) {
    return std::visit(
        [](const auto& node) -> int {
            using T = std::decay_t<decltype(node)>;
            if constexpr (std::is_same_v<T, BinaryExpr>) {
                switch (node.op) {
                    case BinaryOp::Add:
                    case BinaryOp::Sub: return 1;
                    case BinaryOp::Mul:
                    case BinaryOp::Div: return 2;
                    case BinaryOp::Pow: return 3;
                }
            }
            return 4;
        },
        expr.node);
}

void render_expr(const Expr& expr, int min_level, std::ostream& out) {
    if (expr_level(expr) < min_level) {
        out << '(';
        render_expr(expr, 0, out);
        out << ')';
        return;
    }
    std::visit(
        [&](const auto& node) {
            using T = std::decay_t<decltype(node)>;
            if constexpr (std::is_same_v<T, NumberExpr>) {
                out << format_number(node.value);
            } else if constexpr (std::is_same_v<T, VarRefExpr>) {
                out << '[' << node.name << ']';
            } else if constexpr (std::is_same_v<T, NegExpr>) {
                out << '-';
                render_expr(*node.operand, 4, out);
            } else if constexpr (std::is_same_v<T, SumExpr>) {
                out << "SUM(";
                render_expr(*node.operand, 0, out);
                out << ')';
            } else {
                const char* op = nullptr;
                int lhs_level = 0, rhs_level = 0;
                switch (node.op) {
                    case BinaryOp::Add: op = " + "; lhs_level = 1; rhs_level = 2; break;
                    case BinaryOp::Sub: op = " - "; lhs_level = 1; rhs_level = 2; break;
                    case BinaryOp::Mul: op = " * "; lhs_level = 2; rhs_level = 3; break;
                    case BinaryOp::Div: op = " / "; lhs_level = 2; rhs_level = 3; break;
                    case BinaryOp::Pow: op = "^"; lhs_level = 4; rhs_level = 3; break;
                }
                render_expr(*node.lhs, lhs_level, out);
                out << op;
                render_expr(*node.rhs, rhs_level, out);
            }
        },
        expr.node);
}

}  // namespace

std::string render_expression(const Expr& expr) {
    std::ostringstream out;
    render_expr(expr, 0, out);
    return out.str();
}

std::string render_model(const Model& model) {
    std::ostringstream out;
    for (const auto& dim : model.dimensions) {
        out << "dimension " << dim.name << ':';
        for (const auto& label : dim.instances) out << ' ' << label;
        out << '\n';
    }
    if (!model.dimensions.empty() && !model.variables.empty()) out << '\n';
    for (const auto& var : model.variables) {
        out << to_string(var.kind) << " [" << var.name << ']';
        if (var.kind == VarKind::Input || var.kind == VarKind::Data) {
            if (var.dims.empty()) {
                double value = var.table && var.table->entries.count({})
                                   ? var.table->entries.at({})
                                   : 0.0;
                out << " = " << format_number(value) << '\n';
            } else {
                out << " over ";
                auto names = model.dim_names(var.dims);
                for (std::size_t i = 0; i < names.size(); ++i) {
                    out << (i ? ", " : "") << names[i];
                }
                out << ":\n";
                if (var.table) {
                    for (const auto& [coord, value] : var.table->entries) {
                        out << " ";
                        for (std::size_t i = 0; i < coord.size(); ++i) {
                            out << ' '
                                << model.dimension(var.dims.indices()[i]).instances.at(coord[i]);
                        }
                        out << ' ' << format_number(value) << '\n';
                    }
                }
            }
        } else {
            if (!var.dims.empty()) {
                out << " over ";
                auto names = model.dim_names(var.dims);
                for (std::size_t i = 0; i < names.size(); ++i) {
                    out << (i ? ", " : "") << names[i];
                }
            }
            out << " = ";
            if (var.expr) render_expr(*var.expr, 0, out);
            out << '\n';
        }
    }
    return out.str();
}

}  // namespace dimsheet
