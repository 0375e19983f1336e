#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <string_view>

namespace miso {

enum class TokenKind : uint8_t { Keyword, Ident, IntLit, FloatLit, Punct, Operator };

struct Token {
  TokenKind kind;
  std::string lexeme;  // always a non-empty substring of the source
  uint32_t line = 0;   // 1-based
  uint32_t col = 0;    // 1-based
};

inline constexpr std::array<std::string_view, 7> kKeywords = {
    "cell", "var", "transition", "new", "Int", "Float", "this"};

inline bool isKeyword(std::string_view s) {
  for (auto k : kKeywords)
    if (k == s) return true;
  return false;
}

inline const char* tokenKindName(TokenKind k) {
  switch (k) {
    case TokenKind::Keyword: return "keyword";
    case TokenKind::Ident: return "identifier";
    case TokenKind::IntLit: return "integer literal";
    case TokenKind::FloatLit: return "float literal";
    case TokenKind::Punct: return "punctuation";
    case TokenKind::Operator: return "operator";
  }
  return "token";
}

}  // namespace miso
