#pragma once

#include <cerrno>
#include <cstdlib>
#include <memory>
#include <string>
#include <vector>

#include "miso/ast.hpp"
#include "miso/lexer.hpp"

namespace miso {

struct ParseResult {
  Program program;
  std::vector<Diagnostic> diagnostics;
  bool ok = false;
};

namespace detail {

// Recursive-descent parser over the token stream. Stops at the first error;
// the diagnostic names the expected token class and the offending position.
class Parser {
 public:
  explicit Parser(const std::vector<Token>& tokens) : toks_(tokens) {}

  ParseResult run() {
    ParseResult res;
    try {
      while (atKeyword("cell")) res.program.cells.push_back(parseCell());
      while (!atEnd()) res.program.arrays.push_back(parseInstantiation());
      res.ok = true;
    } catch (const Diagnostic& d) {
      res.diagnostics.push_back(d);
    }
    return res;
  }

 private:
  // bounds expression nesting so hostile input fails with a diagnostic
  // instead of exhausting the stack; every later recursion over the AST
  // (typecheck, evaluation, printing) inherits the same bound
  static constexpr int kMaxExprDepth = 2000;

  const std::vector<Token>& toks_;
  size_t i_ = 0;
  int depth_ = 0;

  bool atEnd() const { return i_ >= toks_.size(); }
  const Token& peek() const { return toks_[i_]; }
  SourcePos here() const {
    if (!atEnd()) return {peek().line, peek().col};
    if (toks_.empty()) return {1, 1};
    const Token& last = toks_.back();
    return {last.line, static_cast<uint32_t>(last.col + last.lexeme.size())};
  }

  [[noreturn]] void fail(const std::string& expected) {
    std::string found = atEnd() ? "end of input" : "'" + peek().lexeme + "'";
    throw makeError("expected " + expected + ", found " + found, here());
  }

  bool atKeyword(std::string_view kw) const {
    return !atEnd() && peek().kind == TokenKind::Keyword && peek().lexeme == kw;
  }
  bool atPunct(char c) const {
    return !atEnd() && peek().kind == TokenKind::Punct && peek().lexeme[0] == c;
  }
  bool atOperator(char c) const {
    return !atEnd() && peek().kind == TokenKind::Operator && peek().lexeme[0] == c;
  }

  Token take() { return toks_[i_++]; }

  void expectKeyword(std::string_view kw) {
    if (!atKeyword(kw)) fail("'" + std::string(kw) + "'");
    ++i_;
  }
  void expectPunct(char c) {
    if (!atPunct(c)) fail(std::string("'") + c + "'");
    ++i_;
  }
  Token expectIdent(const char* what) {
    if (atEnd() || peek().kind != TokenKind::Ident) fail(what);
    return take();
  }

  ScalarType parseType() {
    if (atKeyword("Int")) {
      ++i_;
      return ScalarType::Int;
    }
    if (atKeyword("Float")) {
      ++i_;
      return ScalarType::Float;
    }
    fail("type 'Int' or 'Float'");
  }

  CellDecl parseCell() {
    CellDecl cell;
    cell.pos = here();
    expectKeyword("cell");
    cell.name = expectIdent("cell name").lexeme;
    expectPunct('{');
    while (atKeyword("var")) cell.fields.push_back(parseField());
    bool sawTransition = false;
    if (atKeyword("transition")) {
      sawTransition = true;
      ++i_;
      expectPunct('{');
      while (!atPunct('}')) cell.transition.push_back(parseStmt());
      expectPunct('}');
    }
    if (!atPunct('}')) fail(sawTransition ? "'}'" : "'var', 'transition' or '}'");
    ++i_;
    return cell;
  }

  FieldDecl parseField() {
    FieldDecl field;
    field.pos = here();
    expectKeyword("var");
    field.name = expectIdent("field name").lexeme;
    expectPunct(':');
    field.type = parseType();
    expectPunct('=');
    field.init = parseExpr();
    expectPunct(';');
    return field;
  }

  Stmt parseStmt() {
    Stmt stmt;
    stmt.pos = here();
    if (atKeyword("var")) {
      ++i_;
      stmt.kind = Stmt::Kind::LocalDecl;
      stmt.name = expectIdent("local variable name").lexeme;
      expectPunct(':');
      stmt.declType = parseType();
    } else {
      stmt.kind = Stmt::Kind::Assign;  // may be re-tagged LocalAssign by typecheck
      stmt.name = expectIdent("statement").lexeme;
    }
    expectPunct('=');
    stmt.value = parseExpr();
    expectPunct(';');
    return stmt;
  }

  ArrayDecl parseInstantiation() {
    ArrayDecl decl;
    decl.pos = here();
    decl.name = expectIdent("identifier").lexeme;
    expectPunct('=');
    expectKeyword("new");
    decl.typeName = expectIdent("cell type name").lexeme;
    expectPunct('(');
    decl.sizeExpr = parseExpr();
    expectPunct(')');
    return decl;
  }

  std::unique_ptr<Expr> parseExpr() {
    auto lhs = parseTerm();
    while (atOperator('+') || atOperator('-')) {
      auto node = std::make_unique<Expr>();
      node->kind = Expr::Kind::BinOp;
      node->pos = here();
      node->op = take().lexeme[0];
      node->lhs = std::move(lhs);
      node->rhs = parseTerm();
      lhs = std::move(node);
    }
    return lhs;
  }

  std::unique_ptr<Expr> parseTerm() {
    auto lhs = parseFactor();
    while (atOperator('*') || atOperator('/')) {
      auto node = std::make_unique<Expr>();
      node->kind = Expr::Kind::BinOp;
      node->pos = here();
      node->op = take().lexeme[0];
      node->lhs = std::move(lhs);
      node->rhs = parseFactor();
      lhs = std::move(node);
    }
    return lhs;
  }

  std::unique_ptr<Expr> parseFactor() {
    if (++depth_ > kMaxExprDepth)
      throw makeError("expression too deeply nested", here());
    auto result = parseFactorInner();
    --depth_;
    return result;
  }

  std::unique_ptr<Expr> parseFactorInner() {
    auto node = std::make_unique<Expr>();
    node->pos = here();
    if (atOperator('-')) {
      ++i_;
      node->kind = Expr::Kind::Neg;
      node->lhs = parseFactor();
      return node;
    }
    if (atPunct('(')) {
      ++i_;
      auto inner = parseExpr();
      expectPunct(')');
      return inner;
    }
    if (!atEnd() && peek().kind == TokenKind::FloatLit) {
      Token t = take();
      node->kind = Expr::Kind::FloatLit;
      node->floatSpelling = t.lexeme;
      node->floatValue = std::strtod(t.lexeme.c_str(), nullptr);
      return node;
    }
    if (!atEnd() && peek().kind == TokenKind::IntLit) {
      Token t = take();
      errno = 0;
      char* end = nullptr;
      long long v = std::strtoll(t.lexeme.c_str(), &end, 10);
      if (errno == ERANGE)
        throw makeError("integer literal out of range", SourcePos{t.line, t.col});
      node->kind = Expr::Kind::IntLit;
      node->intValue = v;
      return node;
    }
    if (atKeyword("this")) {
      ++i_;
      expectPunct('.');
      Token member = expectIdent("'pos' after 'this.'");
      if (member.lexeme != "pos")
        throw makeError("expected 'pos' after 'this.', found '" + member.lexeme + "'",
                        SourcePos{member.line, member.col});
      node->kind = Expr::Kind::ThisPos;
      return node;
    }
    if (!atEnd() && peek().kind == TokenKind::Ident) {
      Token name = take();
      if (atPunct('(')) {
        ++i_;
        node->kind = Expr::Kind::ArrayRead;
        node->name = name.lexeme;
        node->lhs = parseExpr();
        expectPunct(')');
        expectPunct('.');
        node->field = expectIdent("field name").lexeme;
        return node;
      }
      node->kind = Expr::Kind::SelfField;
      node->name = name.lexeme;
      return node;
    }
    fail("expression");
  }
};

}  // namespace detail

inline ParseResult parse(const std::vector<Token>& tokens) {
  return detail::Parser(tokens).run();
}

}  // namespace miso
