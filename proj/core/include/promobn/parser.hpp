#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "promobn/error.hpp"
#include "promobn/network.hpp"

namespace promobn {

enum class TokenKind { Keyword, Identifier, Number, Punctuation, String };

std::string_view to_string(TokenKind kind) noexcept;

// line and column are 1-based and point at the token's first character.
// Columns count code points, not bytes.
struct Token {
    TokenKind kind;
    std::string text;
    int line = 1;
    int column = 1;

    bool operator==(const Token&) const = default;
};

// what() reads "line:column: message", prefixed with "source:" when the
// text came from a named file.
class ParseError : public Error {
public:
    ParseError(std::string message, int line, int column, std::optional<std::string> expected = std::nullopt,
               std::string source = {});

    const std::string& message() const noexcept { return message_; }
    int line() const noexcept { return line_; }
    int column() const noexcept { return column_; }
    const std::optional<std::string>& expected() const noexcept { return expected_; }
    const std::string& source() const noexcept { return source_; }

private:
    std::string message_;
    int line_;
    int column_;
    std::optional<std::string> expected_;
    std::string source_;
};

// Reserved words of the .bnet language.
bool is_keyword(std::string_view word) noexcept;

std::vector<Token> tokenize(std::string_view text);

// Parses a .bnet document. The result always passes validate_network; any
// semantic problem (arity, unknown parent, unnormalized prior, ...) is
// reported as a ParseError positioned at the offending node.
Network parse_network(std::string_view text);

Network load_network(const std::string& path);

// Canonical text. parse_network(serialize_network(n)) is structurally equal
// to n for networks whose numbers have at most 6 significant digits.
std::string serialize_network(const Network& net);

}  // namespace promobn
