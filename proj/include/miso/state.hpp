#pragma once

#include <array>
#include <cstring>
#include <vector>

#include "miso/ast.hpp"
#include "miso/value.hpp"

namespace miso {

// One per-field column of raw 64-bit words (Int as two's complement, Float as
// IEEE-754 bits). Keeping columns as words makes replica comparison a memcmp
// and a fault a single XOR.
struct Column {
  ScalarType type = ScalarType::Int;
  std::vector<uint64_t> words;
};

struct Bank {
  std::vector<Column> columns;  // one per field, in declaration order
};

// Double-buffered state of one cell array. banks[active] holds the committed
// state at step sigma; the other bank is writable scratch for step sigma+1.
struct ArrayState {
  uint32_t id = 0;
  int32_t typeIndex = -1;
  uint64_t size = 0;
  std::array<Bank, 2> banks;
  int active = 0;
  uint64_t sigma = 0;

  const Bank& committed() const { return banks[active]; }
  Bank& scratch() { return banks[1 - active]; }
  const Bank& scratch() const { return banks[1 - active]; }
};

struct World {
  std::vector<ArrayState> arrays;  // indexed by array id (declaration order)
};

namespace detail {

// Initializer evaluation: literals, arithmetic and this.pos.
inline Value evalInit(const Expr& e, int64_t pos) {
  switch (e.kind) {
    case Expr::Kind::IntLit: return Value::ofInt(e.intValue);
    case Expr::Kind::FloatLit: return Value::ofFloat(e.floatValue);
    case Expr::Kind::ThisPos: return Value::ofInt(pos);
    case Expr::Kind::Neg: return negate(evalInit(*e.lhs, pos));
    case Expr::Kind::BinOp:
      return applyBinOp(e.op, evalInit(*e.lhs, pos), evalInit(*e.rhs, pos));
    default: throw RuntimeError("invalid initializer expression");
  }
}

}  // namespace detail

// Builds the initial world: bank 0 filled from the field initializers with
// this.pos bound to the instance index, bank 0 active, all step counters 0.
inline World initWorld(const Program& p) {
  World w;
  w.arrays.reserve(p.arrays.size());
  for (size_t ai = 0; ai < p.arrays.size(); ++ai) {
    const ArrayDecl& decl = p.arrays[ai];
    const CellDecl& cell = p.cells[decl.typeIndex];
    ArrayState st;
    st.id = static_cast<uint32_t>(ai);
    st.typeIndex = decl.typeIndex;
    st.size = static_cast<uint64_t>(decl.size);
    for (auto& bank : st.banks) {
      bank.columns.resize(cell.fields.size());
      for (size_t f = 0; f < cell.fields.size(); ++f) {
        bank.columns[f].type = cell.fields[f].type;
        bank.columns[f].words.assign(st.size, 0);
      }
    }
    for (size_t f = 0; f < cell.fields.size(); ++f) {
      const FieldDecl& field = cell.fields[f];
      Column& col = st.banks[0].columns[f];
      for (uint64_t i = 0; i < st.size; ++i) {
        try {
          Value v = detail::evalInit(*field.init, static_cast<int64_t>(i));
          col.words[i] = coerce(v, field.type).bits;
        } catch (RuntimeError& err) {
          err.array = decl.name;
          err.index = i;
          err.pos = field.pos;
          throw;
        }
      }
    }
    w.arrays.push_back(std::move(st));
  }
  return w;
}

// Makes the scratch bank active and advances the array's step counter.
inline void commitArray(World& w, uint32_t arrayId) {
  ArrayState& a = w.arrays[arrayId];
  a.active = 1 - a.active;
  ++a.sigma;
}

inline uint64_t fnv1a(const void* data, size_t n, uint64_t h = 1469598103934665603ull) {
  const auto* bytes = static_cast<const unsigned char*>(data);
  for (size_t i = 0; i < n; ++i) {
    h ^= bytes[i];
    h *= 1099511628211ull;
  }
  return h;
}

// Content checksum of the committed bank (size and per-field words).
inline uint64_t arrayChecksum(const ArrayState& a) {
  uint64_t h = fnv1a(&a.size, sizeof a.size);
  for (const Column& c : a.committed().columns)
    h = fnv1a(c.words.data(), c.words.size() * sizeof(uint64_t), h);
  return h;
}

inline uint64_t worldChecksum(const World& w) {
  uint64_t h = 1469598103934665603ull;
  for (const ArrayState& a : w.arrays) {
    uint64_t ah = arrayChecksum(a);
    h = fnv1a(&ah, sizeof ah, h);
  }
  return h;
}

// Bit-exact equality of committed contents and step counters.
inline bool bitIdentical(const World& a, const World& b) {
  if (a.arrays.size() != b.arrays.size()) return false;
  for (size_t i = 0; i < a.arrays.size(); ++i) {
    const ArrayState& x = a.arrays[i];
    const ArrayState& y = b.arrays[i];
    if (x.size != y.size || x.sigma != y.sigma) return false;
    const Bank& bx = x.committed();
    const Bank& by = y.committed();
    if (bx.columns.size() != by.columns.size()) return false;
    for (size_t f = 0; f < bx.columns.size(); ++f) {
      if (bx.columns[f].type != by.columns[f].type) return false;
      if (std::memcmp(bx.columns[f].words.data(), by.columns[f].words.data(),
                      bx.columns[f].words.size() * sizeof(uint64_t)) != 0)
        return false;
    }
  }
  return true;
}

}  // namespace miso
