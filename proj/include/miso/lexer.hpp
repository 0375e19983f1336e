#pragma once

#include <cctype>
#include <string_view>
#include <vector>

#include "miso/diagnostics.hpp"
#include "miso/token.hpp"

namespace miso {

struct LexResult {
  std::vector<Token> tokens;
  std::vector<Diagnostic> diagnostics;
  bool ok() const { return !hasErrors(diagnostics); }
};

namespace detail {
inline bool isIdentStart(char c) { return std::isalpha(static_cast<unsigned char>(c)) || c == '_'; }
inline bool isIdentChar(char c) { return std::isalnum(static_cast<unsigned char>(c)) || c == '_'; }
inline bool isDigit(char c) { return c >= '0' && c <= '9'; }
}  // namespace detail

// Splits source text into tokens. Comments (// to end of line) and whitespace
// are discarded. A '.' begins a float literal only when a digit follows, so
// "this.pos" and "image2(i).r" lex as member accesses while ".99" is a float.
inline LexResult tokenize(std::string_view source) {
  using namespace detail;
  LexResult res;
  size_t i = 0;
  uint32_t line = 1, col = 1;
  auto advance = [&](size_t n) {
    for (size_t k = 0; k < n; ++k) {
      if (source[i] == '\n') {
        ++line;
        col = 1;
      } else {
        ++col;
      }
      ++i;
    }
  };
  auto push = [&](TokenKind kind, size_t begin, size_t len, uint32_t tline, uint32_t tcol) {
    res.tokens.push_back(Token{kind, std::string(source.substr(begin, len)), tline, tcol});
  };

  while (i < source.size()) {
    char c = source[i];
    if (c == ' ' || c == '\t' || c == '\r' || c == '\n') {
      advance(1);
      continue;
    }
    if (c == '/' && i + 1 < source.size() && source[i + 1] == '/') {
      while (i < source.size() && source[i] != '\n') advance(1);
      continue;
    }
    uint32_t tline = line, tcol = col;
    size_t begin = i;
    if (isIdentStart(c)) {
      while (i < source.size() && isIdentChar(source[i])) advance(1);
      std::string_view word = source.substr(begin, i - begin);
      push(isKeyword(word) ? TokenKind::Keyword : TokenKind::Ident, begin, i - begin, tline, tcol);
      continue;
    }
    if (isDigit(c)) {
      while (i < source.size() && isDigit(source[i])) advance(1);
      bool isFloat = false;
      if (i < source.size() && source[i] == '.') {
        isFloat = true;
        advance(1);
        while (i < source.size() && isDigit(source[i])) advance(1);
      }
      push(isFloat ? TokenKind::FloatLit : TokenKind::IntLit, begin, i - begin, tline, tcol);
      continue;
    }
    if (c == '.' && i + 1 < source.size() && isDigit(source[i + 1])) {
      advance(1);
      while (i < source.size() && isDigit(source[i])) advance(1);
      push(TokenKind::FloatLit, begin, i - begin, tline, tcol);
      continue;
    }
    if (c == '+' || c == '-' || c == '*' || c == '/') {
      advance(1);
      push(TokenKind::Operator, begin, 1, tline, tcol);
      continue;
    }
    if (c == '{' || c == '}' || c == '(' || c == ')' || c == ':' || c == ';' || c == '=' ||
        c == '.') {
      advance(1);
      push(TokenKind::Punct, begin, 1, tline, tcol);
      continue;
    }
    std::string msg = "unknown character '";
    if (std::isprint(static_cast<unsigned char>(c))) {
      msg += c;
    } else {
      char buf[8];
      std::snprintf(buf, sizeof buf, "\\x%02x", static_cast<unsigned char>(c));
      msg += buf;
    }
    msg += "'";
    res.diagnostics.push_back(makeError(std::move(msg), SourcePos{tline, tcol}));
    advance(1);
  }
  return res;
}

}  // namespace miso
