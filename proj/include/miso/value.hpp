#pragma once

#include <bit>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>

#include "miso/diagnostics.hpp"

namespace miso {

enum class ScalarType : uint8_t { Int, Float };

inline const char* typeName(ScalarType t) { return t == ScalarType::Int ? "Int" : "Float"; }

// A runtime scalar. The payload is kept as a raw 64-bit word so state columns,
// replica comparison and fault injection all operate on bit patterns. Equality
// is bit-exact: distinct NaN payloads compare unequal.
struct Value {
  ScalarType type = ScalarType::Int;
  uint64_t bits = 0;

  static Value ofInt(int64_t v) { return {ScalarType::Int, std::bit_cast<uint64_t>(v)}; }
  static Value ofFloat(double v) { return {ScalarType::Float, std::bit_cast<uint64_t>(v)}; }
  int64_t asInt() const { return std::bit_cast<int64_t>(bits); }
  double asFloat() const { return std::bit_cast<double>(bits); }

  bool operator==(const Value&) const = default;
};

// Raised by expression evaluation and state I/O. Coordinates are filled in by
// whoever knows them: the evaluator sets the read target, the transition loop
// sets the evaluating instance and statement, the scheduler sets the step.
class RuntimeError : public std::runtime_error {
 public:
  explicit RuntimeError(const std::string& msg) : std::runtime_error(msg) {}

  std::string array;  // array involved in the failure (read target etc.)
  uint64_t index = 0;
  uint64_t step = 0;
  SourcePos pos{};
  SourcePos stmtPos{};
  uint32_t evalArray = UINT32_MAX;  // evaluating instance coordinates
  uint64_t evalIndex = 0;
};

// Int arithmetic wraps (two's complement); division truncates toward zero.
inline int64_t wrapAdd(int64_t a, int64_t b) {
  return static_cast<int64_t>(static_cast<uint64_t>(a) + static_cast<uint64_t>(b));
}
inline int64_t wrapSub(int64_t a, int64_t b) {
  return static_cast<int64_t>(static_cast<uint64_t>(a) - static_cast<uint64_t>(b));
}
inline int64_t wrapMul(int64_t a, int64_t b) {
  return static_cast<int64_t>(static_cast<uint64_t>(a) * static_cast<uint64_t>(b));
}
inline int64_t wrapNeg(int64_t a) { return static_cast<int64_t>(-static_cast<uint64_t>(a)); }
inline int64_t wrapDiv(int64_t a, int64_t b) {
  // caller guarantees b != 0; INT64_MIN / -1 wraps back to INT64_MIN
  if (b == -1) return wrapNeg(a);
  return a / b;
}

// Truncate toward zero, then wrap mod 2^64 into the Int range. Exact for all
// finite doubles; fmod against 2^64 is exact in IEEE-754.
inline int64_t truncateToInt(double x) {
  double t = std::trunc(x);
  constexpr double kTwo63 = 9223372036854775808.0;
  if (t >= -kTwo63 && t < kTwo63) return static_cast<int64_t>(t);
  constexpr double kTwo64 = 18446744073709551616.0;
  double r = std::fmod(t, kTwo64);
  uint64_t mag = static_cast<uint64_t>(std::fabs(r));
  return std::bit_cast<int64_t>(r < 0 ? 0ull - mag : mag);
}

inline double toDouble(const Value& v) {
  return v.type == ScalarType::Float ? v.asFloat() : static_cast<double>(v.asInt());
}

inline ScalarType promote(ScalarType a, ScalarType b) {
  return (a == ScalarType::Float || b == ScalarType::Float) ? ScalarType::Float
                                                            : ScalarType::Int;
}

// BinOp with any Float operand is Float; pure-Int stays Int with wrapping
// semantics. Int division by zero raises; Float division follows IEEE-754.
inline Value applyBinOp(char op, const Value& l, const Value& r) {
  if (promote(l.type, r.type) == ScalarType::Float) {
    double a = toDouble(l), b = toDouble(r);
    switch (op) {
      case '+': return Value::ofFloat(a + b);
      case '-': return Value::ofFloat(a - b);
      case '*': return Value::ofFloat(a * b);
      case '/': return Value::ofFloat(a / b);
    }
  } else {
    int64_t a = l.asInt(), b = r.asInt();
    switch (op) {
      case '+': return Value::ofInt(wrapAdd(a, b));
      case '-': return Value::ofInt(wrapSub(a, b));
      case '*': return Value::ofInt(wrapMul(a, b));
      case '/':
        if (b == 0) throw RuntimeError("integer division by zero");
        return Value::ofInt(wrapDiv(a, b));
    }
  }
  throw RuntimeError(std::string("unknown operator '") + op + "'");
}

inline Value negate(const Value& v) {
  if (v.type == ScalarType::Float) return Value::ofFloat(-v.asFloat());
  return Value::ofInt(wrapNeg(v.asInt()));
}

// Store a value into a slot of the given type. Float-to-Int truncates toward
// zero; NaN and infinities cannot land in an Int slot.
inline Value coerce(const Value& v, ScalarType target) {
  if (v.type == target) return v;
  if (target == ScalarType::Float) return Value::ofFloat(static_cast<double>(v.asInt()));
  double d = v.asFloat();
  if (std::isnan(d)) throw RuntimeError("cannot assign NaN to an Int field");
  if (std::isinf(d)) throw RuntimeError("cannot assign infinity to an Int field");
  return Value::ofInt(truncateToInt(d));
}

}  // namespace miso
