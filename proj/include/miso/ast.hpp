#pragma once

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "miso/diagnostics.hpp"
#include "miso/value.hpp"

namespace miso {

// Expression node. The parser produces bare identifiers as SelfField; the type
// checker re-tags those that resolve to transition locals as LocalVar and
// fills in the resolved slots and result types.
struct Expr {
  enum class Kind : uint8_t { IntLit, FloatLit, SelfField, LocalVar, ThisPos, ArrayRead, BinOp, Neg };

  Kind kind;
  SourcePos pos{};

  int64_t intValue = 0;       // IntLit
  double floatValue = 0;      // FloatLit
  std::string floatSpelling;  // FloatLit: original text, reused when printing
  std::string name;           // SelfField/LocalVar ident; ArrayRead array name
  std::string field;          // ArrayRead field name
  char op = 0;                // BinOp
  std::unique_ptr<Expr> lhs;  // BinOp lhs; Neg operand; ArrayRead index
  std::unique_ptr<Expr> rhs;  // BinOp rhs

  // filled by typecheck
  ScalarType type = ScalarType::Int;
  int32_t slot = -1;       // SelfField/ArrayRead: field index; LocalVar: local slot
  int32_t arrayId = -1;    // ArrayRead: resolved array
};

struct Stmt {
  enum class Kind : uint8_t { Assign, LocalDecl, LocalAssign };

  Kind kind;
  SourcePos pos{};
  std::string name;
  ScalarType declType = ScalarType::Int;  // LocalDecl only
  std::unique_ptr<Expr> value;

  // filled by typecheck
  int32_t slot = -1;      // Assign: field index; LocalDecl/LocalAssign: local slot
  bool truncate = false;  // Float value stored into an Int target
};

struct FieldDecl {
  std::string name;
  ScalarType type = ScalarType::Int;
  std::unique_ptr<Expr> init;  // literals, arithmetic and this.pos only
  SourcePos pos{};
  bool initTruncates = false;  // typecheck: Float initializer into Int field
};

struct CellDecl {
  std::string name;
  SourcePos pos{};
  std::vector<FieldDecl> fields;
  std::vector<Stmt> transition;  // empty when the block is absent
  uint32_t localCount = 0;       // typecheck

  int fieldIndex(std::string_view fieldName) const {
    for (size_t i = 0; i < fields.size(); ++i)
      if (fields[i].name == fieldName) return static_cast<int>(i);
    return -1;
  }
};

struct ArrayDecl {
  std::string name;
  std::string typeName;
  SourcePos pos{};
  std::unique_ptr<Expr> sizeExpr;
  int64_t size = 0;        // typecheck: folded constant, >= 1
  int32_t typeIndex = -1;  // typecheck
};

// A full program: cell declarations followed by array instantiations. After a
// successful typecheck every expression carries a type, all names are
// resolved and all sizes are folded; the structure is immutable from then on
// and safe to share read-only across scheduler workers.
struct Program {
  std::vector<CellDecl> cells;
  std::vector<ArrayDecl> arrays;

  int cellIndex(std::string_view name) const {
    for (size_t i = 0; i < cells.size(); ++i)
      if (cells[i].name == name) return static_cast<int>(i);
    return -1;
  }
  int arrayIndex(std::string_view name) const {
    for (size_t i = 0; i < arrays.size(); ++i)
      if (arrays[i].name == name) return static_cast<int>(i);
    return -1;
  }
};

// ---- pretty printer ------------------------------------------------------

namespace detail {

inline int precedence(char op) { return (op == '+' || op == '-') ? 1 : 2; }

inline void printExpr(std::string& out, const Expr& e, int parentPrec) {
  switch (e.kind) {
    case Expr::Kind::IntLit:
      out += std::to_string(e.intValue);
      return;
    case Expr::Kind::FloatLit:
      out += e.floatSpelling;
      return;
    case Expr::Kind::SelfField:
    case Expr::Kind::LocalVar:
      out += e.name;
      return;
    case Expr::Kind::ThisPos:
      out += "this.pos";
      return;
    case Expr::Kind::ArrayRead:
      out += e.name;
      out += '(';
      printExpr(out, *e.lhs, 0);
      out += ").";
      out += e.field;
      return;
    case Expr::Kind::Neg:
      if (parentPrec > 3) out += '(';
      out += '-';
      printExpr(out, *e.lhs, 3);
      if (parentPrec > 3) out += ')';
      return;
    case Expr::Kind::BinOp: {
      int p = precedence(e.op);
      bool parens = p < parentPrec;
      if (parens) out += '(';
      printExpr(out, *e.lhs, p);
      out += ' ';
      out += e.op;
      out += ' ';
      printExpr(out, *e.rhs, p + 1);  // left-associative
      if (parens) out += ')';
      return;
    }
  }
}

inline void printStmt(std::string& out, const Stmt& s, const char* indent) {
  out += indent;
  if (s.kind == Stmt::Kind::LocalDecl) {
    out += "var ";
    out += s.name;
    out += ':';
    out += typeName(s.declType);
    out += " = ";
  } else {
    out += s.name;
    out += " = ";
  }
  printExpr(out, *s.value, 0);
  out += ";\n";
}

}  // namespace detail

inline std::string printExpr(const Expr& e) {
  std::string out;
  detail::printExpr(out, e, 0);
  return out;
}

// Canonical source form; re-parsing yields a structurally identical program.
inline std::string printProgram(const Program& p) {
  std::string out;
  for (const auto& cell : p.cells) {
    out += "cell ";
    out += cell.name;
    out += " {\n";
    for (const auto& f : cell.fields) {
      out += "  var ";
      out += f.name;
      out += ':';
      out += typeName(f.type);
      out += " = ";
      detail::printExpr(out, *f.init, 0);
      out += ";\n";
    }
    if (!cell.transition.empty()) {
      out += "\n  transition {\n";
      for (const auto& s : cell.transition) detail::printStmt(out, s, "    ");
      out += "  }\n";
    }
    out += "}\n\n";
  }
  for (const auto& a : p.arrays) {
    out += a.name;
    out += " = new ";
    out += a.typeName;
    out += '(';
    detail::printExpr(out, *a.sizeExpr, 0);
    out += ")\n";
  }
  return out;
}

// ---- structural equality (positions and literal spellings ignored) --------

inline bool structurallyEqual(const Expr& a, const Expr& b) {
  if (a.kind != b.kind) return false;
  switch (a.kind) {
    case Expr::Kind::IntLit: return a.intValue == b.intValue;
    case Expr::Kind::FloatLit:
      return std::bit_cast<uint64_t>(a.floatValue) == std::bit_cast<uint64_t>(b.floatValue);
    case Expr::Kind::SelfField:
    case Expr::Kind::LocalVar: return a.name == b.name;
    case Expr::Kind::ThisPos: return true;
    case Expr::Kind::ArrayRead:
      return a.name == b.name && a.field == b.field && structurallyEqual(*a.lhs, *b.lhs);
    case Expr::Kind::Neg: return structurallyEqual(*a.lhs, *b.lhs);
    case Expr::Kind::BinOp:
      return a.op == b.op && structurallyEqual(*a.lhs, *b.lhs) &&
             structurallyEqual(*a.rhs, *b.rhs);
  }
  return false;
}

inline bool structurallyEqual(const Stmt& a, const Stmt& b) {
  if (a.kind != b.kind || a.name != b.name) return false;
  if (a.kind == Stmt::Kind::LocalDecl && a.declType != b.declType) return false;
  return structurallyEqual(*a.value, *b.value);
}

inline bool structurallyEqual(const Program& a, const Program& b) {
  if (a.cells.size() != b.cells.size() || a.arrays.size() != b.arrays.size()) return false;
  for (size_t i = 0; i < a.cells.size(); ++i) {
    const auto& ca = a.cells[i];
    const auto& cb = b.cells[i];
    if (ca.name != cb.name || ca.fields.size() != cb.fields.size() ||
        ca.transition.size() != cb.transition.size())
      return false;
    for (size_t f = 0; f < ca.fields.size(); ++f) {
      if (ca.fields[f].name != cb.fields[f].name || ca.fields[f].type != cb.fields[f].type ||
          !structurallyEqual(*ca.fields[f].init, *cb.fields[f].init))
        return false;
    }
    for (size_t s = 0; s < ca.transition.size(); ++s)
      if (!structurallyEqual(ca.transition[s], cb.transition[s])) return false;
  }
  for (size_t i = 0; i < a.arrays.size(); ++i) {
    if (a.arrays[i].name != b.arrays[i].name || a.arrays[i].typeName != b.arrays[i].typeName ||
        !structurallyEqual(*a.arrays[i].sizeExpr, *b.arrays[i].sizeExpr))
      return false;
  }
  return true;
}

}  // namespace miso
