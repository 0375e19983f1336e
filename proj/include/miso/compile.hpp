#pragma once

#include <string_view>

#include "miso/lexer.hpp"
#include "miso/parser.hpp"
#include "miso/typecheck.hpp"

namespace miso {

struct CompileResult {
  Program program;
  std::vector<Diagnostic> diagnostics;  // errors and warnings, in phase order
  bool ok = false;
};

// tokenize -> parse -> typecheck. Warnings never fail a compile.
inline CompileResult compile(std::string_view source) {
  CompileResult res;
  LexResult lex = tokenize(source);
  res.diagnostics = lex.diagnostics;
  if (!lex.ok()) return res;
  ParseResult parsed = parse(lex.tokens);
  for (auto& d : parsed.diagnostics) res.diagnostics.push_back(d);
  if (!parsed.ok) return res;
  res.program = std::move(parsed.program);
  for (auto& d : typecheck(res.program)) res.diagnostics.push_back(d);
  res.ok = !hasErrors(res.diagnostics);
  return res;
}

}  // namespace miso
