#include "promobn/parser.hpp"

#include <array>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include <fmt/format.h>
#include <fmt/ranges.h>

#include "format.hpp"

namespace promobn {

namespace {

constexpr std::array kKeywords = {
    "network", "node",  "kind",   "chance",   "deterministic", "equation",   "parents",
    "states",  "prior", "cpt",    "map",      "Choose",        "Triangular", "Lognormal",
};

// Sums within this distance of 1 are renormalized; beyond it they are errors.
// The slack keeps a decimal sum of exactly 1 +- 1e-6 (e.g. three 0.333333)
// on the accepting side despite binary rounding.
constexpr double kRenormalizeTolerance = 1e-6 + 1e-12;

bool is_ident_start(char c) { return (c >= 'A' && c <= 'Z') || (c >= 'a' && c <= 'z') || c == '_'; }
bool is_digit(char c) { return c >= '0' && c <= '9'; }
bool is_ident_char(char c) { return is_ident_start(c) || is_digit(c); }

class Lexer {
public:
    explicit Lexer(std::string_view text) : text_(text) {}

    std::vector<Token> run() {
        std::vector<Token> out;
        while (pos_ < text_.size()) {
            const char c = text_[pos_];
            if (c == ' ' || c == '\t' || c == '\r' || c == '\n') {
                advance();
                continue;
            }
            if (c == '#') {
                while (pos_ < text_.size() && text_[pos_] != '\n') {
                    advance();
                }
                continue;
            }
            const int line = line_;
            const int column = column_;
            if (is_ident_start(c)) {
                const std::size_t start = pos_;
                while (pos_ < text_.size() && is_ident_char(text_[pos_])) {
                    advance();
                }
                std::string word(text_.substr(start, pos_ - start));
                const TokenKind kind = is_keyword(word) ? TokenKind::Keyword : TokenKind::Identifier;
                out.push_back({kind, std::move(word), line, column});
                continue;
            }
            if (is_digit(c) || (c == '.' && peek_is_digit(1)) ||
                (c == '-' && (peek_is_digit(1) || (peek(1) == '.' && peek_is_digit(2))))) {
                out.push_back({TokenKind::Number, lex_number(), line, column});
                continue;
            }
            if (c == '-' && peek(1) == '>') {
                advance();
                advance();
                out.push_back({TokenKind::Punctuation, "->", line, column});
                continue;
            }
            if (c == '"') {
                out.push_back({TokenKind::String, lex_string(line, column), line, column});
                continue;
            }
            if (std::string_view("{}[]():;,+*").find(c) != std::string_view::npos) {
                advance();
                out.push_back({TokenKind::Punctuation, std::string(1, c), line, column});
                continue;
            }
            throw ParseError(fmt::format("illegal character '{}'", printable(c)), line, column);
        }
        return out;
    }

private:
    char peek(std::size_t ahead) const {
        return pos_ + ahead < text_.size() ? text_[pos_ + ahead] : '\0';
    }
    bool peek_is_digit(std::size_t ahead) const { return is_digit(peek(ahead)); }

    void advance() {
        const char c = text_[pos_++];
        if (c == '\n') {
            ++line_;
            column_ = 1;
        } else if ((static_cast<unsigned char>(c) & 0xC0) != 0x80) {
            // UTF-8 continuation bytes stay on the same column.
            ++column_;
        }
    }

    static std::string printable(char c) {
        if (static_cast<unsigned char>(c) < 0x20 || static_cast<unsigned char>(c) >= 0x7F) {
            return fmt::format("\\x{:02x}", static_cast<unsigned char>(c));
        }
        return std::string(1, c);
    }

    std::string lex_number() {
        const std::size_t start = pos_;
        if (text_[pos_] == '-') {
            advance();
        }
        while (pos_ < text_.size() && is_digit(text_[pos_])) {
            advance();
        }
        if (pos_ < text_.size() && text_[pos_] == '.') {
            advance();
            while (pos_ < text_.size() && is_digit(text_[pos_])) {
                advance();
            }
        }
        if (pos_ < text_.size() && (text_[pos_] == 'e' || text_[pos_] == 'E')) {
            const char sign = peek(1);
            if (is_digit(sign) || ((sign == '+' || sign == '-') && peek_is_digit(2))) {
                advance();
                if (!is_digit(text_[pos_])) {
                    advance();
                }
                while (pos_ < text_.size() && is_digit(text_[pos_])) {
                    advance();
                }
            }
        }
        return std::string(text_.substr(start, pos_ - start));
    }

    std::string lex_string(int line, int column) {
        advance();  // opening quote
        std::string out;
        while (pos_ < text_.size()) {
            const char c = text_[pos_];
            if (c == '"') {
                advance();
                return out;
            }
            if (c == '\n') {
                break;
            }
            if (c == '\\') {
                const char next = peek(1);
                if (next != '"' && next != '\\') {
                    throw ParseError("unsupported escape sequence in string", line_, column_);
                }
                advance();
                out.push_back(next);
                advance();
                continue;
            }
            const std::size_t before = pos_;
            advance();
            out.append(text_.substr(before, pos_ - before));
        }
        throw ParseError("unterminated string", line, column, "closing '\"'");
    }

    std::string_view text_;
    std::size_t pos_ = 0;
    int line_ = 1;
    int column_ = 1;
};

struct Position {
    int line = 1;
    int column = 1;
};

// Position of the final character; where end-of-input errors point.
Position last_position(std::string_view text) {
    Position p;
    Position last;
    for (std::size_t i = 0; i < text.size(); ++i) {
        const auto u = static_cast<unsigned char>(text[i]);
        if ((u & 0xC0) == 0x80) {
            continue;
        }
        last = p;
        if (text[i] == '\n') {
            ++p.line;
            p.column = 1;
        } else {
            ++p.column;
        }
    }
    return last;
}

std::string describe(const Token& t) {
    if (t.kind == TokenKind::String) {
        return fmt::format("string \"{}\"", t.text);
    }
    return fmt::format("{} '{}'", to_string(t.kind), t.text);
}

class Parser {
public:
    Parser(std::string_view text) : tokens_(tokenize(text)), end_(last_position(text)) {}

    Network parse() {
        expect_keyword("network");
        Network net(expect(TokenKind::String, "network name").text);
        expect_punct("{");
        while (!at_punct("}")) {
            if (at_end()) {
                fail_here("unexpected end of input inside network", "'}'");
            }
            parse_node(net);
        }
        expect_punct("}");
        if (!at_end()) {
            fail_here(fmt::format("unexpected {} after network", describe(current())), "end of input");
        }
        check_semantics(net);
        return net;
    }

private:
    // --- token helpers -----------------------------------------------------
    bool at_end() const { return pos_ >= tokens_.size(); }
    const Token& current() const { return tokens_[pos_]; }

    bool at_punct(std::string_view p) const {
        return !at_end() && current().kind == TokenKind::Punctuation && current().text == p;
    }
    bool at_keyword(std::string_view k) const {
        return !at_end() && current().kind == TokenKind::Keyword && current().text == k;
    }

    [[noreturn]] void fail_here(const std::string& message, std::optional<std::string> expected = std::nullopt) const {
        if (at_end()) {
            throw ParseError(message, end_.line, end_.column, std::move(expected));
        }
        throw ParseError(message, current().line, current().column, std::move(expected));
    }

    [[noreturn]] void fail_expected(const std::string& what) const {
        if (at_end()) {
            fail_here(fmt::format("expected {} but reached end of input", what), what);
        }
        fail_here(fmt::format("expected {} but found {}", what, describe(current())), what);
    }

    Token expect(TokenKind kind, const std::string& what) {
        if (at_end() || current().kind != kind) {
            fail_expected(what);
        }
        return tokens_[pos_++];
    }

    void expect_punct(std::string_view p) {
        if (!at_punct(p)) {
            fail_expected(fmt::format("'{}'", p));
        }
        ++pos_;
    }

    void expect_keyword(std::string_view k) {
        if (!at_keyword(k)) {
            fail_expected(fmt::format("'{}'", k));
        }
        ++pos_;
    }

    std::string expect_identifier(const std::string& what) { return expect(TokenKind::Identifier, what).text; }

    double expect_number(const std::string& what) {
        const Token t = expect(TokenKind::Number, what);
        double value = 0.0;
        const char* first = t.text.data();
        const char* last = first + t.text.size();
        const auto [ptr, ec] = std::from_chars(first, last, value);
        if (ec != std::errc() || ptr != last || !std::isfinite(value)) {
            throw ParseError(fmt::format("number '{}' is out of range", t.text), t.line, t.column);
        }
        return value;
    }

    // --- grammar -----------------------------------------------------------
    void parse_node(Network& net) {
        expect_keyword("node");
        const Token id_tok = expect(TokenKind::Identifier, "node name");
        if (net.find(id_tok.text) != nullptr) {
            throw ParseError(fmt::format("duplicate node '{}'", id_tok.text), id_tok.line, id_tok.column);
        }
        positions_[id_tok.text] = {id_tok.line, id_tok.column};
        Node node;
        node.id = id_tok.text;
        expect_punct("{");
        std::set<std::string> fields;
        while (!at_punct("}")) {
            if (at_end() || current().kind != TokenKind::Keyword) {
                fail_expected("a node field (kind, parents, states, prior, cpt, map, equation)");
            }
            const Token field = tokens_[pos_++];
            if (!fields.insert(field.text).second) {
                throw ParseError(fmt::format("field '{}' repeated in node '{}'", field.text, node.id), field.line,
                                 field.column);
            }
            expect_punct(":");
            if (field.text == "kind") {
                node.kind = parse_kind();
            } else if (field.text == "parents") {
                node.parents = parse_id_list();
            } else if (field.text == "states") {
                node.states = parse_id_list();
            } else if (field.text == "prior") {
                const Position at = here();
                node.prior = normalized(parse_number_list(), node.id, "prior", at);
            } else if (field.text == "cpt") {
                expect_punct("{");
                while (!at_punct("}")) {
                    const Position at = here();
                    StateTuple key = parse_id_list();
                    expect_punct("->");
                    const Position row_at = here();
                    std::vector<double> row =
                        normalized(parse_number_list(), node.id, fmt::format("CPT row [{}]", fmt::join(key, ", ")), row_at);
                    expect_punct(";");
                    if (!node.cpt.emplace(key, std::move(row)).second) {
                        throw ParseError(fmt::format("duplicate CPT row in node '{}'", node.id), at.line, at.column);
                    }
                }
                expect_punct("}");
                if (at_punct(";")) {
                    ++pos_;
                }
                continue;
            } else if (field.text == "map") {
                expect_punct("{");
                while (!at_punct("}")) {
                    const Position at = here();
                    StateTuple key = parse_id_list();
                    expect_punct("->");
                    std::string target = expect_identifier("a state name");
                    expect_punct(";");
                    if (!node.det_map.emplace(key, std::move(target)).second) {
                        throw ParseError(fmt::format("duplicate map entry in node '{}'", node.id), at.line, at.column);
                    }
                }
                expect_punct("}");
                if (at_punct(";")) {
                    ++pos_;
                }
                continue;
            } else if (field.text == "equation") {
                node.expr = parse_expression();
            } else {
                throw ParseError(fmt::format("'{}' is not a node field", field.text), field.line, field.column,
                                 "a node field");
            }
            expect_punct(";");
        }
        expect_punct("}");
        if (!fields.contains("kind")) {
            throw ParseError(fmt::format("node '{}' has no kind", node.id), id_tok.line, id_tok.column, "kind field");
        }
        net.add_node(std::move(node));
    }

    Position here() const { return at_end() ? end_ : Position{current().line, current().column}; }

    NodeKind parse_kind() {
        if (at_keyword("chance")) {
            ++pos_;
            return NodeKind::Chance;
        }
        if (at_keyword("deterministic")) {
            ++pos_;
            return NodeKind::Deterministic;
        }
        if (at_keyword("equation")) {
            ++pos_;
            return NodeKind::Equation;
        }
        fail_expected("'chance', 'deterministic' or 'equation'");
    }

    std::vector<std::string> parse_id_list() {
        expect_punct("[");
        std::vector<std::string> out;
        if (at_punct("]")) {
            ++pos_;
            return out;
        }
        out.push_back(expect_identifier("an identifier"));
        while (at_punct(",")) {
            ++pos_;
            out.push_back(expect_identifier("an identifier"));
        }
        expect_punct("]");
        return out;
    }

    std::vector<double> parse_number_list() {
        expect_punct("[");
        std::vector<double> out;
        out.push_back(expect_number("a number"));
        while (at_punct(",")) {
            ++pos_;
            out.push_back(expect_number("a number"));
        }
        expect_punct("]");
        return out;
    }

    std::vector<double> normalized(std::vector<double> p, const std::string& node, const std::string& what,
                                   Position at) const {
        double sum = 0.0;
        for (double v : p) {
            if (v < 0.0 || v > 1.0) {
                throw ParseError(fmt::format("{} of node '{}' has probability {} outside [0, 1]", what, node,
                                             detail::format_number(v)),
                                 at.line, at.column);
            }
            sum += v;
        }
        if (std::abs(sum - 1.0) > kRenormalizeTolerance) {
            throw ParseError(fmt::format("{} of node '{}' is not normalized (sums to {:.9g})", what, node, sum),
                             at.line, at.column);
        }
        if (sum != 1.0) {
            for (double& v : p) {
                v /= sum;
            }
        }
        return p;
    }

    EquationExpr parse_expression() {
        EquationExpr expr;
        expr.terms.push_back(parse_choose());
        while (at_punct("+")) {
            ++pos_;
            expr.terms.push_back(parse_choose());
        }
        return expr;
    }

    ChooseTerm parse_choose() {
        expect_keyword("Choose");
        expect_punct("(");
        ChooseTerm term;
        term.selector = expect_identifier("a selector node");
        while (at_punct(",")) {
            ++pos_;
            term.branches.push_back(parse_term());
        }
        if (term.branches.empty()) {
            fail_expected("','");
        }
        expect_punct(")");
        return term;
    }

    DistTerm parse_term() {
        const Position at = here();
        double scale = 1.0;
        if (!at_end() && current().kind == TokenKind::Number) {
            scale = expect_number("a weight");
            expect_punct("*");
        }
        DistTerm term;
        if (at_keyword("Triangular")) {
            ++pos_;
            expect_punct("(");
            const double a = expect_number("minimum");
            expect_punct(",");
            const double m = expect_number("mode");
            expect_punct(",");
            const double b = expect_number("maximum");
            expect_punct(")");
            term = DistTerm{TriangularParams{a, m, b}, scale};
        } else if (at_keyword("Lognormal")) {
            ++pos_;
            expect_punct("(");
            const double mu = expect_number("mu");
            expect_punct(",");
            const double sigma = expect_number("sigma");
            expect_punct(")");
            term = DistTerm{LognormalParams{mu, sigma}, scale};
        } else {
            fail_expected("'Triangular' or 'Lognormal'");
        }
        if (auto why = check_term(term)) {
            throw ParseError(*why, at.line, at.column);
        }
        return term;
    }

    void check_semantics(const Network& net) const {
        const ValidationReport report = validate_network(net);
        if (report.empty()) {
            return;
        }
        const Violation& v = report.front();
        Position at = positions_.empty() ? Position{1, 1} : positions_.begin()->second;
        if (const auto it = positions_.find(v.node); it != positions_.end()) {
            at = it->second;
        } else if (!tokens_.empty()) {
            at = {tokens_.front().line, tokens_.front().column};
        }
        const std::string msg = v.node.empty() ? v.reason : fmt::format("node '{}': {}", v.node, v.reason);
        throw ParseError(msg, at.line, at.column);
    }

    std::vector<Token> tokens_;
    Position end_;
    std::size_t pos_ = 0;
    std::map<std::string, Position> positions_;
};

std::string quote(const std::string& s) {
    std::string out = "\"";
    for (char c : s) {
        if (c == '"' || c == '\\') {
            out.push_back('\\');
        }
        out.push_back(c);
    }
    out.push_back('"');
    return out;
}

std::string number_list(const std::vector<double>& values) {
    std::vector<std::string> parts;
    parts.reserve(values.size());
    for (double v : values) {
        parts.push_back(detail::format_number(v));
    }
    return fmt::format("[{}]", fmt::join(parts, ", "));
}

std::string id_list(const std::vector<std::string>& ids) { return fmt::format("[{}]", fmt::join(ids, ", ")); }

}  // namespace

std::string_view to_string(TokenKind kind) noexcept {
    switch (kind) {
        case TokenKind::Keyword:
            return "keyword";
        case TokenKind::Identifier:
            return "identifier";
        case TokenKind::Number:
            return "number";
        case TokenKind::Punctuation:
            return "punctuation";
        case TokenKind::String:
            return "string";
    }
    return "token";
}

ParseError::ParseError(std::string message, int line, int column, std::optional<std::string> expected,
                       std::string source)
    : Error(source.empty() ? fmt::format("{}:{}: {}", line, column, message)
                           : fmt::format("{}:{}:{}: {}", source, line, column, message)),
      message_(std::move(message)),
      line_(line),
      column_(column),
      expected_(std::move(expected)),
      source_(std::move(source)) {}

bool is_keyword(std::string_view word) noexcept {
    for (const char* k : kKeywords) {
        if (word == k) {
            return true;
        }
    }
    return false;
}

std::vector<Token> tokenize(std::string_view text) { return Lexer(text).run(); }

Network parse_network(std::string_view text) { return Parser(text).parse(); }

Network load_network(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw InputError(fmt::format("cannot open network file '{}'", path));
    }
    std::ostringstream buf;
    buf << in.rdbuf();
    try {
        return parse_network(buf.str());
    } catch (const ParseError& e) {
        throw ParseError(e.message(), e.line(), e.column(), e.expected(), path);
    }
}

std::string serialize_network(const Network& net) {
    std::string out = fmt::format("network {} {{\n", quote(net.name()));
    for (const Node& n : net.nodes()) {
        out += fmt::format("  node {} {{\n", n.id);
        out += fmt::format("    kind: {};\n", to_string(n.kind));
        if (!n.parents.empty()) {
            out += fmt::format("    parents: {};\n", id_list(n.parents));
        }
        if (n.is_discrete()) {
            out += fmt::format("    states: {};\n", id_list(n.states));
        }
        switch (n.kind) {
            case NodeKind::Chance:
                if (n.parents.empty()) {
                    out += fmt::format("    prior: {};\n", number_list(n.prior));
                } else {
                    out += "    cpt: {\n";
                    for (const auto& [key, row] : n.cpt) {
                        out += fmt::format("      {} -> {};\n", id_list(key), number_list(row));
                    }
                    out += "    }\n";
                }
                break;
            case NodeKind::Deterministic:
                out += "    map: {\n";
                for (const auto& [key, target] : n.det_map) {
                    out += fmt::format("      {} -> {};\n", id_list(key), target);
                }
                out += "    }\n";
                break;
            case NodeKind::Equation: {
                out += "    equation:\n";
                for (std::size_t t = 0; t < n.expr.terms.size(); ++t) {
                    const ChooseTerm& term = n.expr.terms[t];
                    std::vector<std::string> branches;
                    for (const DistTerm& b : term.branches) {
                        branches.push_back(to_string(b));
                    }
                    out += fmt::format("      {}Choose({}, {})", t == 0 ? "" : "+ ", term.selector,
                                       fmt::join(branches, ", "));
                    out += t + 1 == n.expr.terms.size() ? ";\n" : "\n";
                }
                break;
            }
        }
        out += "  }\n";
    }
    out += "}\n";
    return out;
}

}  // namespace promobn
