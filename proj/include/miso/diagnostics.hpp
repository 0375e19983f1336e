#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace miso {

// 1-based position in the source text.
struct SourcePos {
  uint32_t line = 0;
  uint32_t col = 0;
};

enum class Severity : uint8_t { Warning, Error };

struct Diagnostic {
  Severity severity = Severity::Error;
  std::string message;
  uint32_t line = 0;
  uint32_t col = 0;
};

inline Diagnostic makeError(std::string message, SourcePos pos) {
  return Diagnostic{Severity::Error, std::move(message), pos.line, pos.col};
}

inline Diagnostic makeWarning(std::string message, SourcePos pos) {
  return Diagnostic{Severity::Warning, std::move(message), pos.line, pos.col};
}

inline bool hasErrors(const std::vector<Diagnostic>& diags) {
  for (const auto& d : diags)
    if (d.severity == Severity::Error) return true;
  return false;
}

inline std::string formatDiagnostic(const Diagnostic& d) {
  std::string s = std::to_string(d.line) + ":" + std::to_string(d.col);
  s += d.severity == Severity::Error ? ": error: " : ": warning: ";
  s += d.message;
  return s;
}

}  // namespace miso
