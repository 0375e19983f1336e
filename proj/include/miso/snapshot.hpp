#pragma once

#include <algorithm>
#include <array>
#include <cerrno>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <limits>
#include <numeric>
#include <string>
#include <vector>

#include "miso/ast.hpp"
#include "miso/state.hpp"

namespace miso {

// Canonical lowercase hexadecimal-significand form, bit-exact on round trip:
// 0.5 -> "0x1p-1", 0.1 -> "0x1.999999999999ap-4". Infinities print as
// inf/-inf; NaNs keep their payload as "nan:0x<bits>".
inline std::string formatHexFloat(double d) {
  const uint64_t bits = std::bit_cast<uint64_t>(d);
  const bool sign = bits >> 63;
  const uint32_t exp = static_cast<uint32_t>((bits >> 52) & 0x7ff);
  const uint64_t mant = bits & ((1ull << 52) - 1);

  if (exp == 0x7ff) {
    if (mant == 0) return sign ? "-inf" : "inf";
    char buf[24];
    std::snprintf(buf, sizeof buf, "nan:0x%016llx", static_cast<unsigned long long>(bits));
    return buf;
  }
  std::string out = sign ? "-" : "";
  int e;
  if (exp == 0) {
    if (mant == 0) return out + "0x0p+0";
    out += "0x0";
    e = -1022;
  } else {
    out += "0x1";
    e = static_cast<int>(exp) - 1023;
  }
  if (mant != 0) {
    static const char* digits = "0123456789abcdef";
    char frac[14];
    for (int i = 0; i < 13; ++i) frac[i] = digits[(mant >> (48 - 4 * i)) & 0xf];
    int len = 13;
    while (len > 0 && frac[len - 1] == '0') --len;
    out += '.';
    out.append(frac, static_cast<size_t>(len));
  }
  out += 'p';
  if (e >= 0) out += '+';
  out += std::to_string(e);
  return out;
}

inline bool parseFloatBits(const std::string& s, double& out) {
  if (s == "inf") {
    out = std::numeric_limits<double>::infinity();
    return true;
  }
  if (s == "-inf") {
    out = -std::numeric_limits<double>::infinity();
    return true;
  }
  if (s.rfind("nan:0x", 0) == 0) {
    errno = 0;
    char* end = nullptr;
    unsigned long long bits = std::strtoull(s.c_str() + 6, &end, 16);
    if (errno != 0 || end == s.c_str() + 6 || *end != '\0') return false;
    out = std::bit_cast<double>(static_cast<uint64_t>(bits));
    return true;
  }
  errno = 0;
  char* end = nullptr;
  double v = std::strtod(s.c_str(), &end);
  if (end == s.c_str() || *end != '\0') return false;
  out = v;
  return true;
}

inline bool parseIntStrict(const std::string& s, int64_t& out) {
  if (s.empty()) return false;
  errno = 0;
  char* end = nullptr;
  long long v = std::strtoll(s.c_str(), &end, 10);
  if (errno != 0 || end != s.c_str() + s.size()) return false;
  out = v;
  return true;
}

inline std::string formatValue(ScalarType type, uint64_t bits) {
  if (type == ScalarType::Int) return std::to_string(std::bit_cast<int64_t>(bits));
  return formatHexFloat(std::bit_cast<double>(bits));
}

// Hash of the canonical program text; written into snapshot headers so a
// snapshot loaded against a different program can be flagged.
inline uint64_t programHash(const Program& p) {
  std::string text = printProgram(p);
  return fnv1a(text.data(), text.size());
}

class SnapshotError : public std::runtime_error {
 public:
  SnapshotError(const std::string& path, uint64_t row, const std::string& msg)
      : std::runtime_error(path + ":" + std::to_string(row) + ": " + msg), row_(row) {}
  uint64_t row() const { return row_; }

 private:
  uint64_t row_;
};

inline constexpr const char* kSnapshotColumns = "step,array,index,field,value";

// Writes dir/step_<step>.csv: one row per (array, index, field), sorted by
// (arrayName, index, fieldName); the step column records each array's own
// committed step. Ints are decimal, Floats hex-significand, so a dump->load
// round trip is bit-exact.
inline std::filesystem::path dumpSnapshot(const World& w, const Program& p,
                                          const std::filesystem::path& dir, uint64_t step) {
  std::filesystem::create_directories(dir);
  std::filesystem::path path = dir / ("step_" + std::to_string(step) + ".csv");
  std::ofstream os(path, std::ios::binary);
  if (!os) throw RuntimeError("cannot open snapshot file for writing: " + path.string());

  char hashBuf[32];
  std::snprintf(hashBuf, sizeof hashBuf, "%016llx",
                static_cast<unsigned long long>(programHash(p)));
  os << "# miso snapshot v1\n# program " << hashBuf << "\n" << kSnapshotColumns << "\n";

  std::vector<uint32_t> order(p.arrays.size());
  std::iota(order.begin(), order.end(), 0u);
  std::sort(order.begin(), order.end(), [&](uint32_t a, uint32_t b) {
    return p.arrays[a].name < p.arrays[b].name;
  });
  for (uint32_t ai : order) {
    const ArrayState& st = w.arrays[ai];
    const CellDecl& cell = p.cells[st.typeIndex];
    std::vector<uint32_t> fieldOrder(cell.fields.size());
    std::iota(fieldOrder.begin(), fieldOrder.end(), 0u);
    std::sort(fieldOrder.begin(), fieldOrder.end(), [&](uint32_t a, uint32_t b) {
      return cell.fields[a].name < cell.fields[b].name;
    });
    const Bank& bank = st.committed();
    for (uint64_t i = 0; i < st.size; ++i) {
      for (uint32_t f : fieldOrder) {
        os << st.sigma << ',' << p.arrays[ai].name << ',' << i << ',' << cell.fields[f].name
           << ',' << formatValue(bank.columns[f].type, bank.columns[f].words[i]) << '\n';
      }
    }
  }
  os.flush();
  if (!os) throw RuntimeError("failed writing snapshot: " + path.string());
  return path;
}

// Overwrites committed values of a freshly initialized world from a snapshot
// file; each array's step counter is restored from its rows so a reloaded
// dump re-dumps byte-identically. Cells the file does not list keep their
// initializer values. A program hash mismatch is a warning; malformed rows
// are errors carrying the row number.
inline void loadSnapshot(World& w, const Program& p, const std::filesystem::path& path,
                         std::ostream* warn = nullptr) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw RuntimeError("cannot open snapshot file: " + path.string());

  std::string line;
  uint64_t row = 0;
  while (std::getline(is, line)) {
    ++row;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (line[0] == '#') {
      const std::string marker = "# program ";
      if (line.rfind(marker, 0) == 0 && warn) {
        char hashBuf[32];
        std::snprintf(hashBuf, sizeof hashBuf, "%016llx",
                      static_cast<unsigned long long>(programHash(p)));
        if (line.substr(marker.size()) != hashBuf)
          *warn << "warning: snapshot " << path.string()
                << " was written for a different program (hash mismatch)\n";
      }
      continue;
    }
    if (line == kSnapshotColumns) continue;

    std::array<std::string, 5> cols;
    size_t start = 0;
    int nCols = 0;
    for (int c = 0; c < 5; ++c) {
      size_t comma = line.find(',', start);
      if (comma == std::string::npos) {
        cols[c] = line.substr(start);
        nCols = c + 1;
        start = line.size();
        break;
      }
      cols[c] = line.substr(start, comma - start);
      start = comma + 1;
      nCols = c + 1;
    }
    if (nCols != 5 || start != line.size())
      throw SnapshotError(path.string(), row, "expected 5 columns: " + std::string(kSnapshotColumns));

    int ai = p.arrayIndex(cols[1]);
    if (ai < 0) throw SnapshotError(path.string(), row, "unknown array '" + cols[1] + "'");
    ArrayState& st = w.arrays[ai];
    const CellDecl& cell = p.cells[st.typeIndex];

    int64_t step;
    if (!parseIntStrict(cols[0], step) || step < 0)
      throw SnapshotError(path.string(), row, "bad step '" + cols[0] + "'");
    st.sigma = static_cast<uint64_t>(step);

    int64_t index;
    if (!parseIntStrict(cols[2], index) || index < 0)
      throw SnapshotError(path.string(), row, "bad index '" + cols[2] + "'");
    if (static_cast<uint64_t>(index) >= st.size)
      throw SnapshotError(path.string(), row,
                          "index " + cols[2] + " out of range for array '" + cols[1] +
                              "' of size " + std::to_string(st.size));

    int fi = cell.fieldIndex(cols[3]);
    if (fi < 0)
      throw SnapshotError(path.string(), row,
                          "unknown field '" + cols[3] + "' on array '" + cols[1] + "'");

    Column& col = st.banks[st.active].columns[fi];
    if (col.type == ScalarType::Int) {
      int64_t v;
      if (!parseIntStrict(cols[4], v))
        throw SnapshotError(path.string(), row,
                            "value '" + cols[4] + "' is not a valid Int");
      col.words[static_cast<uint64_t>(index)] = std::bit_cast<uint64_t>(v);
    } else {
      double v;
      if (!parseFloatBits(cols[4], v))
        throw SnapshotError(path.string(), row,
                            "value '" + cols[4] + "' is not a valid Float");
      col.words[static_cast<uint64_t>(index)] = std::bit_cast<uint64_t>(v);
    }
  }
}

}  // namespace miso
