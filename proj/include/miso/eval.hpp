#pragma once

#include <functional>
#include <vector>

#include "miso/ast.hpp"
#include "miso/state.hpp"
#include "miso/value.hpp"

namespace miso {

// Read-only view of the committed world at one transition's provider step.
// `bank[x]` names the bank of array x that holds the step this evaluation is
// allowed to see; schedulers latch it before dispatch so concurrent commits of
// neighbors never move the data under a running evaluation. `selfShadow`
// redirects every read of that array to a replica's own state banks.
struct ReadView {
  const World* world = nullptr;
  std::vector<uint8_t> bank;
  const ArrayState* selfShadow = nullptr;
  std::function<void(uint32_t reader, uint32_t target)> onRead;  // debug observer

  const Column& column(uint32_t arrayId, uint32_t field) const {
    const ArrayState* a = &world->arrays[arrayId];
    if (selfShadow && selfShadow->id == arrayId) a = selfShadow;
    return a->banks[bank[arrayId]].columns[field];
  }
};

// View of the committed (active) bank of every array; valid for barrier-style
// steps where all arrays sit at the same step.
inline ReadView activeView(const World& w) {
  ReadView v;
  v.world = &w;
  v.bank.resize(w.arrays.size());
  for (size_t i = 0; i < w.arrays.size(); ++i)
    v.bank[i] = static_cast<uint8_t>(w.arrays[i].active);
  return v;
}

struct EvalCtx {
  const Program* program;
  const ReadView* view;
  uint32_t arrayId;   // evaluating instance
  uint64_t index;
  uint64_t step;      // step being produced, for error reports
  std::vector<Value>* locals;
};

// Evaluates a typed expression against the previous world state.
inline Value evalExpr(const Expr& e, EvalCtx& ctx) {
  switch (e.kind) {
    case Expr::Kind::IntLit: return Value::ofInt(e.intValue);
    case Expr::Kind::FloatLit: return Value::ofFloat(e.floatValue);
    case Expr::Kind::ThisPos: return Value::ofInt(static_cast<int64_t>(ctx.index));
    case Expr::Kind::LocalVar: return (*ctx.locals)[e.slot];
    case Expr::Kind::SelfField: {
      const Column& col = ctx.view->column(ctx.arrayId, e.slot);
      return Value{col.type, col.words[ctx.index]};
    }
    case Expr::Kind::ArrayRead: {
      Value idx = evalExpr(*e.lhs, ctx);
      const ArrayState& target = ctx.view->world->arrays[e.arrayId];
      int64_t i = idx.asInt();
      if (i < 0 || static_cast<uint64_t>(i) >= target.size) {
        RuntimeError err("array read out of range: " + e.name + "(" + std::to_string(i) +
                         "), size " + std::to_string(target.size));
        err.array = e.name;
        err.index = static_cast<uint64_t>(i);
        err.step = ctx.step;
        err.pos = e.pos;
        throw err;
      }
      if (ctx.view->onRead) ctx.view->onRead(ctx.arrayId, static_cast<uint32_t>(e.arrayId));
      const Column& col = ctx.view->column(static_cast<uint32_t>(e.arrayId), e.slot);
      return Value{col.type, col.words[static_cast<uint64_t>(i)]};
    }
    case Expr::Kind::Neg: return negate(evalExpr(*e.lhs, ctx));
    case Expr::Kind::BinOp: {
      Value l = evalExpr(*e.lhs, ctx);
      Value r = evalExpr(*e.rhs, ctx);
      try {
        return applyBinOp(e.op, l, r);
      } catch (RuntimeError& err) {
        err.pos = e.pos;
        err.step = ctx.step;
        throw;
      }
    }
  }
  throw RuntimeError("unreachable expression kind");
}

// Evaluates one instance's transition as a pure function of the previous
// state. `out` receives one value per field; fields the transition does not
// assign keep their previous value. The committed banks are never written.
inline void evalTransition(const Program& p, const ReadView& view, uint32_t arrayId,
                           uint64_t index, uint64_t step, std::vector<Value>& out,
                           std::vector<Value>& locals) {
  const CellDecl& cell = p.cells[p.arrays[arrayId].typeIndex];
  out.resize(cell.fields.size());
  for (size_t f = 0; f < cell.fields.size(); ++f) {
    const Column& col = view.column(arrayId, static_cast<uint32_t>(f));
    out[f] = Value{col.type, col.words[index]};
  }
  if (cell.transition.empty()) return;  // identity

  locals.assign(cell.localCount, Value{});
  EvalCtx ctx{&p, &view, arrayId, index, step, &locals};
  for (const Stmt& s : cell.transition) {
    try {
      Value v = evalExpr(*s.value, ctx);
      switch (s.kind) {
        case Stmt::Kind::Assign:
          out[s.slot] = coerce(v, cell.fields[s.slot].type);
          break;
        case Stmt::Kind::LocalDecl:
        case Stmt::Kind::LocalAssign:
          locals[s.slot] = coerce(v, s.declType);
          break;
      }
    } catch (RuntimeError& err) {
      err.stmtPos = s.pos;
      if (err.evalArray == UINT32_MAX) {
        err.evalArray = arrayId;
        err.evalIndex = index;
        err.step = step;
      }
      throw;
    }
  }
}

inline std::vector<Value> evalTransition(const Program& p, const ReadView& view,
                                         uint32_t arrayId, uint64_t index, uint64_t step = 0) {
  std::vector<Value> out, locals;
  evalTransition(p, view, arrayId, index, step, out, locals);
  return out;
}

}  // namespace miso
