#pragma once

#include <map>
#include <set>
#include <string>
#include <vector>

#include "miso/ast.hpp"
#include "miso/value.hpp"

namespace miso {

struct FoldResult {
  bool ok = false;
  Value value{};
  std::string error;
};

// Folds an expression of literals and arithmetic. Used for array sizes and for
// early validation of fully-constant field initializers.
inline FoldResult foldConstant(const Expr& e) {
  switch (e.kind) {
    case Expr::Kind::IntLit: return {true, Value::ofInt(e.intValue), {}};
    case Expr::Kind::FloatLit: return {true, Value::ofFloat(e.floatValue), {}};
    case Expr::Kind::Neg: {
      FoldResult v = foldConstant(*e.lhs);
      if (!v.ok) return v;
      return {true, negate(v.value), {}};
    }
    case Expr::Kind::BinOp: {
      FoldResult l = foldConstant(*e.lhs);
      if (!l.ok) return l;
      FoldResult r = foldConstant(*e.rhs);
      if (!r.ok) return r;
      try {
        return {true, applyBinOp(e.op, l.value, r.value), {}};
      } catch (const RuntimeError&) {
        return {false, {}, "division by zero in constant expression"};
      }
    }
    default: return {false, {}, "not a constant expression"};
  }
}

namespace detail {

class Checker {
 public:
  explicit Checker(Program& p) : p_(p) {}

  std::vector<Diagnostic> run() {
    checkCellNames();
    for (auto& cell : p_.cells) checkFields(cell);
    checkArrays();
    for (auto& cell : p_.cells) checkTransition(cell);
    return std::move(diags_);
  }

 private:
  Program& p_;
  std::vector<Diagnostic> diags_;

  // transition-local context
  CellDecl* cell_ = nullptr;
  std::map<std::string, std::pair<int32_t, ScalarType>> locals_;  // declared so far
  std::set<std::string> allLocals_;  // declared anywhere in the transition

  void error(std::string msg, SourcePos pos) { diags_.push_back(makeError(std::move(msg), pos)); }
  void warning(std::string msg, SourcePos pos) {
    diags_.push_back(makeWarning(std::move(msg), pos));
  }

  void checkCellNames() {
    std::set<std::string> seen;
    for (const auto& c : p_.cells)
      if (!seen.insert(c.name).second) error("duplicate cell type '" + c.name + "'", c.pos);
  }

  bool initAllowed(const Expr& e) {
    switch (e.kind) {
      case Expr::Kind::IntLit:
      case Expr::Kind::FloatLit:
      case Expr::Kind::ThisPos: return true;
      case Expr::Kind::Neg: return initAllowed(*e.lhs);
      case Expr::Kind::BinOp: return initAllowed(*e.lhs) && initAllowed(*e.rhs);
      default: return false;
    }
  }

  bool containsThisPos(const Expr& e) {
    if (e.kind == Expr::Kind::ThisPos) return true;
    if (e.lhs && containsThisPos(*e.lhs)) return true;
    if (e.rhs && containsThisPos(*e.rhs)) return true;
    return false;
  }

  // Types initializer expressions: literals, arithmetic, this.pos.
  ScalarType typeInit(Expr& e) {
    switch (e.kind) {
      case Expr::Kind::IntLit: return e.type = ScalarType::Int;
      case Expr::Kind::FloatLit: return e.type = ScalarType::Float;
      case Expr::Kind::ThisPos: return e.type = ScalarType::Int;
      case Expr::Kind::Neg: return e.type = typeInit(*e.lhs);
      case Expr::Kind::BinOp: return e.type = promote(typeInit(*e.lhs), typeInit(*e.rhs));
      default: return e.type = ScalarType::Int;  // rejected by initAllowed
    }
  }

  void checkFields(CellDecl& cell) {
    std::set<std::string> seen;
    for (auto& f : cell.fields) {
      if (!seen.insert(f.name).second)
        error("duplicate field '" + f.name + "' in cell '" + cell.name + "'", f.pos);
      if (!initAllowed(*f.init)) {
        error("field initializer may only use literals, arithmetic operators, and this.pos",
              f.init->pos);
        continue;
      }
      ScalarType t = typeInit(*f.init);
      if (t == ScalarType::Float && f.type == ScalarType::Int) {
        f.initTruncates = true;
        warning("Float initializer for Int field '" + f.name + "' truncates toward zero", f.pos);
      }
      if (!containsThisPos(*f.init)) {
        FoldResult fr = foldConstant(*f.init);
        if (!fr.ok) error(fr.error, f.init->pos);
      }
    }
  }

  void checkArrays() {
    std::set<std::string> seen;
    for (auto& a : p_.arrays) {
      if (!seen.insert(a.name).second) error("duplicate array name '" + a.name + "'", a.pos);
      int ci = p_.cellIndex(a.typeName);
      if (ci < 0) {
        error("unknown cell type '" + a.typeName + "'", a.pos);
      } else {
        a.typeIndex = ci;
      }
      FoldResult fr = foldConstant(*a.sizeExpr);
      if (!fr.ok) {
        error("array size must be an integer constant: " + fr.error, a.sizeExpr->pos);
        continue;
      }
      if (fr.value.type != ScalarType::Int) {
        error("array size must be an integer constant", a.sizeExpr->pos);
        continue;
      }
      if (fr.value.asInt() < 1) {
        error("array size must be >= 1 (got " + std::to_string(fr.value.asInt()) + ")",
              a.sizeExpr->pos);
        continue;
      }
      a.size = fr.value.asInt();
    }
  }

  ScalarType typeExpr(Expr& e) {
    switch (e.kind) {
      case Expr::Kind::IntLit: return e.type = ScalarType::Int;
      case Expr::Kind::FloatLit: return e.type = ScalarType::Float;
      case Expr::Kind::ThisPos: return e.type = ScalarType::Int;
      case Expr::Kind::Neg: return e.type = typeExpr(*e.lhs);
      case Expr::Kind::BinOp: return e.type = promote(typeExpr(*e.lhs), typeExpr(*e.rhs));
      case Expr::Kind::LocalVar:
      case Expr::Kind::SelfField: {
        auto it = locals_.find(e.name);
        if (it != locals_.end()) {
          e.kind = Expr::Kind::LocalVar;
          e.slot = it->second.first;
          return e.type = it->second.second;
        }
        int fi = cell_->fieldIndex(e.name);
        if (fi >= 0) {
          e.kind = Expr::Kind::SelfField;
          e.slot = fi;
          return e.type = cell_->fields[fi].type;
        }
        if (allLocals_.count(e.name))
          error("local variable '" + e.name + "' read before its declaration", e.pos);
        else
          error("unknown identifier '" + e.name + "'", e.pos);
        return e.type = ScalarType::Int;
      }
      case Expr::Kind::ArrayRead: {
        if (typeExpr(*e.lhs) != ScalarType::Int)
          error("array index must be Int", e.lhs->pos);
        int ai = p_.arrayIndex(e.name);
        if (ai < 0) {
          error("unknown array '" + e.name + "'", e.pos);
          return e.type = ScalarType::Int;
        }
        e.arrayId = ai;
        int ti = p_.arrays[ai].typeIndex;
        if (ti < 0) return e.type = ScalarType::Int;  // instantiation already errored
        int fi = p_.cells[ti].fieldIndex(e.field);
        if (fi < 0) {
          error("unknown field '" + e.field + "' on array '" + e.name + "'", e.pos);
          return e.type = ScalarType::Int;
        }
        e.slot = fi;
        return e.type = p_.cells[ti].fields[fi].type;
      }
    }
    return e.type = ScalarType::Int;
  }

  void checkTransition(CellDecl& cell) {
    cell_ = &cell;
    locals_.clear();
    allLocals_.clear();
    for (const auto& s : cell.transition)
      if (s.kind == Stmt::Kind::LocalDecl) allLocals_.insert(s.name);

    std::set<std::string> assigned;
    int32_t nextSlot = 0;
    for (auto& s : cell.transition) {
      ScalarType vt = typeExpr(*s.value);
      if (s.kind == Stmt::Kind::LocalDecl) {
        if (locals_.count(s.name)) {
          error("duplicate local variable '" + s.name + "'", s.pos);
          continue;
        }
        if (vt == ScalarType::Float && s.declType == ScalarType::Int) {
          s.truncate = true;
          warning("Float expression assigned to Int local '" + s.name +
                      "' truncates toward zero",
                  s.pos);
        }
        s.slot = nextSlot++;
        locals_mapInsert(s.name, s.slot, s.declType);
        continue;
      }
      auto it = locals_.find(s.name);
      if (it != locals_.end()) {
        s.kind = Stmt::Kind::LocalAssign;
        s.slot = it->second.first;
        s.declType = it->second.second;
        applyCoercionFlag(s, vt, it->second.second, "local");
        continue;
      }
      int fi = cell.fieldIndex(s.name);
      if (fi >= 0) {
        s.kind = Stmt::Kind::Assign;
        s.slot = fi;
        if (!assigned.insert(s.name).second)
          error("field '" + s.name + "' assigned more than once in transition", s.pos);
        applyCoercionFlag(s, vt, cell.fields[fi].type, "field");
        continue;
      }
      if (allLocals_.count(s.name))
        error("local variable '" + s.name + "' used before its declaration", s.pos);
      else
        error("unknown identifier '" + s.name + "'", s.pos);
    }
    cell.localCount = static_cast<uint32_t>(nextSlot);
    cell_ = nullptr;
  }

  void locals_mapInsert(const std::string& name, int32_t slot, ScalarType type) {
    locals_.emplace(name, std::make_pair(slot, type));
  }

  void applyCoercionFlag(Stmt& s, ScalarType valueType, ScalarType targetType, const char* what) {
    if (valueType == ScalarType::Float && targetType == ScalarType::Int) {
      s.truncate = true;
      warning("Float expression assigned to Int " + std::string(what) + " '" + s.name +
                  "' truncates toward zero",
              s.pos);
    }
  }
};

}  // namespace detail

// Resolves names, annotates every expression with its type, folds sizes and
// flags truncating coercions. Returns all diagnostics; the program is valid
// iff none is an error.
inline std::vector<Diagnostic> typecheck(Program& p) { return detail::Checker(p).run(); }

}  // namespace miso
