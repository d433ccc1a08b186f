#include "dimsheet/grid.hpp"

#include <algorithm>
#include <cctype>
#include <cstdio>
#include <cstdlib>
#include <sstream>

#include <nlohmann/json.hpp>

namespace dimsheet {

const Cell* Sheet::find(int row, int col) const {
    auto it = cells.find({row, col});
    return it == cells.end() ? nullptr : &it->second;
}

Sheet& GridDoc::sheet(const std::string& name) {
    for (auto& sheet : sheets) {
        if (sheet.name == name) return sheet;
    }
    sheets.push_back(Sheet{name, {}});
    return sheets.back();
}

const Sheet* GridDoc::find_sheet(const std::string& name) const {
    for (const auto& sheet : sheets) {
        if (sheet.name == name) return &sheet;
    }
    return nullptr;
}

GridExprPtr grid_literal(double value) {
    return std::make_shared<GridExpr>(GridExpr{GridLiteral{value}});
}
GridExprPtr grid_string(std::string value) {
    return std::make_shared<GridExpr>(GridExpr{GridString{std::move(value)}});
}
GridExprPtr grid_cell(std::string sheet, int row, int col) {
    return std::make_shared<GridExpr>(GridExpr{GridCellRef{std::move(sheet), row, col}});
}
GridExprPtr grid_range(std::string sheet, int row1, int col1, int row2, int col2) {
    return std::make_shared<GridExpr>(
        GridExpr{GridRange{std::move(sheet), row1, col1, row2, col2}});
}
GridExprPtr grid_call(GridFn fn, std::vector<GridExprPtr> args) {
    return std::make_shared<GridExpr>(GridExpr{GridCall{fn, std::move(args)}});
}
GridExprPtr grid_neg(GridExprPtr operand) {
    return std::make_shared<GridExpr>(GridExpr{GridNeg{std::move(operand)}});
}
GridExprPtr grid_binary(GridOp op, GridExprPtr lhs, GridExprPtr rhs) {
    return std::make_shared<GridExpr>(GridExpr{GridBinary{op, std::move(lhs), std::move(rhs)}});
}

bool grid_expr_equal(const GridExpr& a, const GridExpr& b) {
    if (a.node.index() != b.node.index()) return false;
    return std::visit(
        [&](const auto& lhs) -> bool {
            using T = std::decay_t<decltype(lhs)>;
            const auto& rhs = std::get<T>(b.node);
            if constexpr (std::is_same_v<T, GridLiteral>) {
                return lhs.value == rhs.value;
            } else if constexpr (std::is_same_v<T, GridString>) {
                return lhs.value == rhs.value;
            } else if constexpr (std::is_same_v<T, GridCellRef>) {
                return lhs.sheet == rhs.sheet && lhs.row == rhs.row && lhs.col == rhs.col;
            } else if constexpr (std::is_same_v<T, GridRange>) {
                return lhs.sheet == rhs.sheet && lhs.row1 == rhs.row1 && lhs.col1 == rhs.col1 &&
                       lhs.row2 == rhs.row2 && lhs.col2 == rhs.col2;
            } else if constexpr (std::is_same_v<T, GridCall>) {
                if (lhs.fn != rhs.fn || lhs.args.size() != rhs.args.size()) return false;
                for (std::size_t i = 0; i < lhs.args.size(); ++i) {
                    if (!grid_expr_equal(*lhs.args[i], *rhs.args[i])) return false;
                }
                return true;
            } else if constexpr (std::is_same_v<T, GridNeg>) {
                return grid_expr_equal(*lhs.operand, *rhs.operand);
            } else {
                return lhs.op == rhs.op && grid_expr_equal(*lhs.lhs, *rhs.lhs) &&
                       grid_expr_equal(*lhs.rhs, *rhs.rhs);
            }
        },
        a.node);
}

std::string column_letters(int col) {
    std::string letters;
    while (col > 0) {
        int rem = (col - 1) % 26;
        letters.insert(letters.begin(), static_cast<char>('A' + rem));
        col = (col - 1) / 26;
    }
    return letters;
}

std::optional<int> column_from_letters(const std::string& letters) {
    if (letters.empty()) return std::nullopt;
    long col = 0;
    for (char c : letters) {
        if (c < 'A' || c > 'Z') return std::nullopt;
        col = col * 26 + (c - 'A' + 1);
        if (col > 1'000'000) return std::nullopt;
    }
    return static_cast<int>(col);
}

std::string cell_name(int row, int col) {
    return column_letters(col) + std::to_string(row);
}

namespace {

std::string format_grid_number(double value) {
    char buffer[64];
    std::snprintf(buffer, sizeof(buffer), "%.10g", value);
    return buffer;
}

// Recursive descent over A1 formula text.
class A1Parser {
public:
    explicit A1Parser(const std::string& text) : text_(text) {
        if (text_.empty() || text_[0] != '=') {
            throw GridParseError(0, "formula must start with '='");
        }
        pos_ = 1;
    }

    GridExprPtr parse() {
        GridExprPtr expr = expression();
        skip_ws();
        if (pos_ < text_.size()) {
            throw GridParseError(pos_, "unexpected trailing input");
        }
        return expr;
    }

private:
    void skip_ws() {
        while (pos_ < text_.size() && text_[pos_] == ' ') ++pos_;
    }
    char peek() {
        skip_ws();
        return pos_ < text_.size() ? text_[pos_] : '\0';
    }
    bool try_consume(char c) {
        if (peek() == c) {
            ++pos_;
            return true;
        }
        return false;
    }
    void expect(char c) {
        if (!try_consume(c)) {
            throw GridParseError(pos_, std::string("expected '") + c + "'");
        }
    }

    GridExprPtr expression() {
        GridExprPtr lhs = term();
        for (;;) {
            if (try_consume('+')) {
                lhs = grid_binary(GridOp::Add, lhs, term());
            } else if (try_consume('-')) {
                lhs = grid_binary(GridOp::Sub, lhs, term());
            } else {
                return lhs;
            }
        }
    }

    GridExprPtr term() {
        GridExprPtr lhs = factor();
        for (;;) {
            if (try_consume('*')) {
                lhs = grid_binary(GridOp::Mul, lhs, factor());
            } else if (try_consume('/')) {
                lhs = grid_binary(GridOp::Div, lhs, factor());
            } else {
                return lhs;
            }
        }
    }

    GridExprPtr factor() {
        GridExprPtr base = atom();
        if (try_consume('^')) {
            return grid_binary(GridOp::Pow, base, factor());
        }
        return base;
    }

    GridExprPtr atom() {
        char c = peek();
        if (c == '\0') throw GridParseError(pos_, "unexpected end of formula");
        if (c == '-') {
            ++pos_;
            return grid_neg(atom());
        }
        if (c == '(') {
            ++pos_;
            GridExprPtr inner = expression();
            expect(')');
            return inner;
        }
        if (c == '"') return string_literal();
        if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') return number();
        if (c == '$' || std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
            return reference_or_call();
        }
        throw GridParseError(pos_, std::string("unexpected character '") + c + "'");
    }

    GridExprPtr string_literal() {
        std::size_t start = pos_++;
        std::string value;
        while (pos_ < text_.size() && text_[pos_] != '"') value.push_back(text_[pos_++]);
        if (pos_ >= text_.size()) throw GridParseError(start, "unterminated string");
        ++pos_;
        return grid_string(std::move(value));
    }

    GridExprPtr number() {
        std::size_t start = pos_;
        int dots = 0;
        while (pos_ < text_.size() &&
               (std::isdigit(static_cast<unsigned char>(text_[pos_])) || text_[pos_] == '.')) {
            if (text_[pos_] == '.' && ++dots > 1) {
                throw GridParseError(pos_, "malformed number");
            }
            ++pos_;
        }
        if (pos_ < text_.size() && (text_[pos_] == 'e' || text_[pos_] == 'E')) {
            std::size_t mark = pos_++;
            if (pos_ < text_.size() && (text_[pos_] == '+' || text_[pos_] == '-')) ++pos_;
            if (pos_ >= text_.size() || !std::isdigit(static_cast<unsigned char>(text_[pos_]))) {
                pos_ = mark;  // not an exponent after all
            } else {
                while (pos_ < text_.size() && std::isdigit(static_cast<unsigned char>(text_[pos_])))
                    ++pos_;
            }
        }
        return grid_literal(std::strtod(text_.substr(start, pos_ - start).c_str(), nullptr));
    }

    std::string word() {
        std::size_t start = pos_;
        while (pos_ < text_.size() &&
               (std::isalnum(static_cast<unsigned char>(text_[pos_])) || text_[pos_] == '_')) {
            ++pos_;
        }
        return text_.substr(start, pos_ - start);
    }

    // A token that may be SUM(/SUMIFS( call, or a (sheet-qualified) cell
    // reference or range. '$' markers are skipped.
    GridExprPtr reference_or_call() {
        std::size_t start = pos_;
        std::string sheet;
        if (text_[pos_] != '$') {
            std::string first = word();
            if (pos_ < text_.size() && text_[pos_] == '(') {
                ++pos_;
                return call(first, start);
            }
            if (pos_ < text_.size() && text_[pos_] == '!') {
                ++pos_;
                sheet = first;
            } else {
                pos_ = start;  // plain A1 token, re-lex with '$' handling
            }
        }
        auto [row1, col1] = cell_token();
        if (pos_ < text_.size() && text_[pos_] == ':') {
            ++pos_;
            auto [row2, col2] = cell_token();
            if (row2 < row1 || col2 < col1) {
                throw GridParseError(start, "range corners are reversed");
            }
            return grid_range(sheet, row1, col1, row2, col2);
        }
        return grid_cell(sheet, row1, col1);
    }

    std::pair<int, int> cell_token() {
        if (pos_ < text_.size() && text_[pos_] == '$') ++pos_;
        std::size_t start = pos_;
        std::string letters;
        while (pos_ < text_.size() && text_[pos_] >= 'A' && text_[pos_] <= 'Z') {
            letters.push_back(text_[pos_++]);
        }
        auto col = column_from_letters(letters);
        if (!col) throw GridParseError(start, "expected a cell reference");
        if (pos_ < text_.size() && text_[pos_] == '$') ++pos_;
        std::size_t digits = pos_;
        while (pos_ < text_.size() && std::isdigit(static_cast<unsigned char>(text_[pos_]))) {
            ++pos_;
        }
        if (pos_ == digits) throw GridParseError(digits, "expected a row number");
        int row = std::atoi(text_.substr(digits, pos_ - digits).c_str());
        if (row < 1) throw GridParseError(digits, "row numbers start at 1");
        return {row, *col};
    }

    GridExprPtr call(const std::string& name, std::size_t start) {
        GridFn fn;
        if (name == "SUM") {
            fn = GridFn::Sum;
        } else if (name == "SUMIFS") {
            fn = GridFn::Sumifs;
        } else {
            throw GridParseError(start, "unknown function " + name);
        }
        std::vector<GridExprPtr> args;
        if (!try_consume(')')) {
            do {
                args.push_back(expression());
            } while (try_consume(','));
            expect(')');
        }
        if (fn == GridFn::Sum && args.empty()) {
            throw GridParseError(start, "SUM needs at least one argument");
        }
        if (fn == GridFn::Sumifs && (args.size() < 3 || args.size() % 2 == 0)) {
            throw GridParseError(start, "SUMIFS takes a sum range plus criteria pairs");
        }
        return grid_call(fn, std::move(args));
    }

    const std::string& text_;
    std::size_t pos_ = 0;
};

int grid_level(const GridExpr& expr) {
    if (const auto* bin = std::get_if<GridBinary>(&expr.node)) {
        switch (bin->op) {
            case GridOp::Add:
            case GridOp::Sub: return 1;
            case GridOp::Mul:
            case GridOp::Div: return 2;
            case GridOp::Pow: return 3;
        }
    }
    return 4;
}

void serialize(const GridExpr& expr, int min_level, std::ostream& out) {
    if (grid_level(expr) < min_level) {
        out << '(';
        serialize(expr, 0, out);
        out << ')';
        return;
    }
    std::visit(
        [&](const auto& node) {
            using T = std::decay_t<decltype(node)>;
            if constexpr (std::is_same_v<T, GridLiteral>) {
                out << format_grid_number(node.value);
            } else if constexpr (std::is_same_v<T, GridString>) {
                out << '"' << node.value << '"';
            } else if constexpr (std::is_same_v<T, GridCellRef>) {
                if (!node.sheet.empty()) out << node.sheet << '!';
                out << cell_name(node.row, node.col);
            } else if constexpr (std::is_same_v<T, GridRange>) {
                if (!node.sheet.empty()) out << node.sheet << '!';
                out << cell_name(node.row1, node.col1) << ':' << cell_name(node.row2, node.col2);
            } else if constexpr (std::is_same_v<T, GridCall>) {
                out << (node.fn == GridFn::Sum ? "SUM(" : "SUMIFS(");
                for (std::size_t i = 0; i < node.args.size(); ++i) {
                    if (i) out << ',';
                    serialize(*node.args[i], 0, out);
                }
                out << ')';
            } else if constexpr (std::is_same_v<T, GridNeg>) {
                out << '-';
                serialize(*node.operand, 4, out);
            } else {
                const char* op = nullptr;
                int lhs_level = 0, rhs_level = 0;
                switch (node.op) {
                    case GridOp::Add: op = "+"; lhs_level = 1; rhs_level = 2; break;
                    case GridOp::Sub: op = "-"; lhs_level = 1; rhs_level = 2; break;
                    case GridOp::Mul: op = "*"; lhs_level = 2; rhs_level = 3; break;
                    case GridOp::Div: op = "/"; lhs_level = 2; rhs_level = 3; break;
                    case GridOp::Pow: op = "^"; lhs_level = 4; rhs_level = 3; break;
                }
                serialize(*node.lhs, lhs_level, out);
                out << op;
                serialize(*node.rhs, rhs_level, out);
            }
        },
        expr.node);
}

}  // namespace

GridExprPtr parse_a1(const std::string& text) {
    return A1Parser(text).parse();
}

std::string serialize_grid_expr(const GridExpr& expr) {
    std::ostringstream out;
    out << '=';
    serialize(expr, 0, out);
    return out.str();
}

std::string grid_to_json(const GridDoc& doc) {
    nlohmann::ordered_json root;
    root["sheets"] = nlohmann::ordered_json::array();
    for (const auto& sheet : doc.sheets) {
        nlohmann::ordered_json s;
        s["name"] = sheet.name;
        s["cells"] = nlohmann::ordered_json::array();
        for (const auto& [pos, cell] : sheet.cells) {
            nlohmann::ordered_json c;
            c["row"] = pos.first;
            c["col"] = pos.second;
            switch (cell.kind) {
                case CellKind::Label:
                    c["kind"] = "label";
                    c["text"] = cell.text;
                    break;
                case CellKind::Number: {
                    c["kind"] = "number";
                    char buffer[64];
                    std::snprintf(buffer, sizeof(buffer), "%.10g", cell.value);
                    c["value"] = std::strtod(buffer, nullptr);
                    break;
                }
                case CellKind::Formula:
                    c["kind"] = "formula";
                    c["formula"] = cell.text;
                    break;
            }
            s["cells"].push_back(std::move(c));
        }
        root["sheets"].push_back(std::move(s));
    }
    return root.dump(2) + "\n";
}

GridDoc grid_from_json(const std::string& text) {
    nlohmann::json root = nlohmann::json::parse(text);
    GridDoc doc;
    for (const auto& s : root.at("sheets")) {
        Sheet sheet;
        sheet.name = s.at("name").get<std::string>();
        if (doc.find_sheet(sheet.name)) {
            throw std::runtime_error("duplicate sheet name: " + sheet.name);
        }
        for (const auto& c : s.at("cells")) {
            Cell cell;
            std::string kind = c.at("kind").get<std::string>();
            if (kind == "label") {
                cell.kind = CellKind::Label;
                cell.text = c.at("text").get<std::string>();
            } else if (kind == "number") {
                cell.kind = CellKind::Number;
                cell.value = c.at("value").get<double>();
            } else if (kind == "formula") {
                cell.kind = CellKind::Formula;
                cell.text = c.at("formula").get<std::string>();
            } else {
                throw std::runtime_error("unknown cell kind: " + kind);
            }
            sheet.cells.emplace(std::make_pair(c.at("row").get<int>(), c.at("col").get<int>()),
                                std::move(cell));
        }
        doc.sheets.push_back(std::move(sheet));
    }
    return doc;
}

namespace {

std::string csv_quote(const std::string& field) {
    if (field.find_first_of(",\"\n") == std::string::npos) return field;
    std::string quoted = "\"";
    for (char c : field) {
        if (c == '"') quoted += "\"\"";
        else quoted.push_back(c);
    }
    quoted += '"';
    return quoted;
}

}  // namespace

Sheet sheet_from_csv(std::string name, const std::string& raw) {
    std::string text = raw;
    // tolerate CRLF input
    std::size_t shift = 0;
    for (std::size_t i = 0; i < text.size(); ++i) {
        if (text[i] == '\r' && i + 1 < text.size() && text[i + 1] == '\n') continue;
        text[shift++] = text[i];
    }
    text.resize(shift);
    Sheet sheet;
    sheet.name = std::move(name);
    int row = 1;
    std::size_t pos = 0;
    while (pos < text.size()) {
        int col = 1;
        for (;;) {
            std::string field;
            if (pos < text.size() && text[pos] == '"') {
                ++pos;
                while (pos < text.size()) {
                    if (text[pos] == '"' && pos + 1 < text.size() && text[pos + 1] == '"') {
                        field.push_back('"');
                        pos += 2;
                    } else if (text[pos] == '"') {
                        ++pos;
                        break;
                    } else {
                        field.push_back(text[pos++]);
                    }
                }
            } else {
                while (pos < text.size() && text[pos] != ',' && text[pos] != '\n') {
                    field.push_back(text[pos++]);
                }
            }
            if (!field.empty()) {
                Cell cell;
                if (field[0] == '=') {
                    cell.kind = CellKind::Formula;
                    cell.text = field;
                } else {
                    char* end = nullptr;
                    double value = std::strtod(field.c_str(), &end);
                    if (end == field.c_str() + field.size()) {
                        cell.kind = CellKind::Number;
                        cell.value = value;
                    } else {
                        cell.kind = CellKind::Label;
                        cell.text = field;
                    }
                }
                sheet.cells.emplace(std::make_pair(row, col), std::move(cell));
            }
            if (pos < text.size() && text[pos] == ',') {
                ++pos;
                ++col;
                continue;
            }
            break;
        }
        if (pos < text.size() && text[pos] == '\n') ++pos;
        ++row;
    }
    return sheet;
}

std::vector<std::pair<std::string, std::string>> grid_to_csv(const GridDoc& doc) {
    std::vector<std::pair<std::string, std::string>> files;
    for (const auto& sheet : doc.sheets) {
        int max_row = 0, max_col = 0;
        for (const auto& [pos, cell] : sheet.cells) {
            max_row = std::max(max_row, pos.first);
            max_col = std::max(max_col, pos.second);
        }
        std::ostringstream out;
        for (int row = 1; row <= max_row; ++row) {
            for (int col = 1; col <= max_col; ++col) {
                if (col > 1) out << ',';
                const Cell* cell = sheet.find(row, col);
                if (!cell) continue;
                switch (cell->kind) {
                    case CellKind::Label: out << csv_quote(cell->text); break;
                    case CellKind::Number: out << format_grid_number(cell->value); break;
                    case CellKind::Formula: out << csv_quote(cell->text); break;
                }
            }
            out << '\n';
        }
        files.emplace_back(sheet.name, out.str());
    }
    return files;
}

}  // namespace dimsheet
