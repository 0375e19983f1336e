#pragma once

#include <chrono>
#include <filesystem>
#include <fstream>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "miso/analysis.hpp"
#include "miso/compile.hpp"
#include "miso/replicate.hpp"
#include "miso/schedule.hpp"
#include "miso/snapshot.hpp"

namespace miso {

enum ExitCode : int {
  kExitOk = 0,
  kExitCompileError = 1,
  kExitRuntimeError = 2,
  kExitUnrecoverable = 3,
  kExitUsage = 4,
};

struct RunConfig {
  std::string sourcePath;
  uint64_t steps = 0;
  SchedulerKind scheduler = SchedulerKind::Sequential;
  unsigned threads = 1;
  std::string loadPath;
  std::string dumpDir;
  uint64_t dumpEvery = 0;  // 0: dump only the final state
  bool replicateAll = false;
  std::vector<std::string> replicateArrays;
  double faultRate = -1;                 // < 0: no random faults
  std::vector<std::string> injectSpecs;  // array:index:step:replica:field:bit
  uint64_t seed = 0;
  uint32_t healthWindow = 100;
  double healthThreshold = 0.1;
  bool stats = false;
  std::string tracePath;
};

namespace detail {

inline std::optional<std::string> readFile(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) return std::nullopt;
  std::ostringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

inline void printDiagnostics(const std::string& path, const std::vector<Diagnostic>& diags,
                             std::ostream& err) {
  for (const Diagnostic& d : diags) err << path << ":" << formatDiagnostic(d) << "\n";
}

inline std::optional<Program> compileFile(const std::string& path, std::ostream& err) {
  auto source = readFile(path);
  if (!source) {
    err << "error: cannot read '" << path << "'\n";
    return std::nullopt;
  }
  CompileResult res = compile(*source);
  printDiagnostics(path, res.diagnostics, err);
  if (!res.ok) return std::nullopt;
  return std::move(res.program);
}

inline std::string describeRuntimeError(const Program& p, const RuntimeError& e) {
  std::string msg = "runtime error: " + std::string(e.what());
  if (e.evalArray != UINT32_MAX)
    msg += " (array '" + p.arrays[e.evalArray].name + "', instance " +
           std::to_string(e.evalIndex) + ", step " + std::to_string(e.step) + ")";
  if (e.stmtPos.line) msg += " at " + std::to_string(e.stmtPos.line) + ":" +
                             std::to_string(e.stmtPos.col);
  return msg;
}

}  // namespace detail

// array:index:step:replica:field:bit
inline bool parseInjectSpec(const std::string& spec, const Program& p, FaultSpec& out,
                            std::string& error) {
  std::vector<std::string> parts;
  size_t start = 0;
  while (true) {
    size_t colon = spec.find(':', start);
    if (colon == std::string::npos) {
      parts.push_back(spec.substr(start));
      break;
    }
    parts.push_back(spec.substr(start, colon - start));
    start = colon + 1;
  }
  if (parts.size() != 6) {
    error = "inject spec must be array:index:step:replica:field:bit";
    return false;
  }
  int ai = p.arrayIndex(parts[0]);
  if (ai < 0) {
    error = "unknown array '" + parts[0] + "' in inject spec";
    return false;
  }
  int64_t index, step, replica, bit;
  if (!parseIntStrict(parts[1], index) || index < 0 ||
      static_cast<uint64_t>(index) >= static_cast<uint64_t>(p.arrays[ai].size)) {
    error = "bad instance index '" + parts[1] + "' in inject spec";
    return false;
  }
  if (!parseIntStrict(parts[2], step) || step < 1) {
    error = "bad step '" + parts[2] + "' in inject spec (steps are 1-based)";
    return false;
  }
  if (!parseIntStrict(parts[3], replica) || replica < 0 || replica > 1) {
    error = "replica must be 0 or 1 in inject spec";
    return false;
  }
  int fi = p.cells[p.arrays[ai].typeIndex].fieldIndex(parts[4]);
  if (fi < 0) {
    error = "unknown field '" + parts[4] + "' on array '" + parts[0] + "' in inject spec";
    return false;
  }
  if (!parseIntStrict(parts[5], bit) || bit < 0 || bit > 63) {
    error = "bit must be in [0, 63] in inject spec";
    return false;
  }
  out = FaultSpec{static_cast<uint32_t>(ai), static_cast<uint64_t>(index),
                  static_cast<uint64_t>(step), static_cast<uint8_t>(replica),
                  static_cast<uint32_t>(fi), static_cast<uint8_t>(bit)};
  return true;
}

inline int checkMain(const std::string& path, std::ostream& /*out*/, std::ostream& err) {
  auto source = detail::readFile(path);
  if (!source) {
    err << "error: cannot read '" << path << "'\n";
    return kExitUsage;
  }
  CompileResult res = compile(*source);
  detail::printDiagnostics(path, res.diagnostics, err);
  return res.ok ? kExitOk : kExitCompileError;
}

inline int analyzeMain(const std::string& path, std::ostream& out, std::ostream& err) {
  auto program = detail::compileFile(path, err);
  if (!program) return kExitCompileError;
  ReadSet rs = extractReadSet(*program);
  DepGraph g = buildDepGraph(*program, rs);
  ParallelReport rep = classify(g, *program);

  out << emitDot(g, *program);

  err << "arrays: " << program->arrays.size() << "\n";
  err << "components: " << rep.components.size() << "\n";
  for (size_t c = 0; c < rep.components.size(); ++c) {
    err << "component " << c << ":";
    for (uint32_t a : rep.components[c]) err << " " << program->arrays[a].name;
    err << "\n";
  }
  for (const auto& grp : rep.simdGroups)
    err << "simd " << grp.cellType << ": " << grp.arrayCount << " array(s), "
        << grp.totalInstances << " instances\n";
  err << "mimd cell types with transitions: " << rep.mimdCellTypes << "\n";
  return kExitOk;
}

inline int runMain(const RunConfig& cfg, std::ostream& /*out*/, std::ostream& err) {
  auto program = detail::compileFile(cfg.sourcePath, err);
  if (!program) return kExitCompileError;
  const Program& p = *program;

  const bool replicationOn = cfg.replicateAll || !cfg.replicateArrays.empty();
  const bool faultsRequested = cfg.faultRate >= 0 || !cfg.injectSpecs.empty();
  if (faultsRequested && !replicationOn) {
    err << "error: --fault-rate/--inject require --replicate\n";
    return kExitUsage;
  }

  FaultModel model = FaultModel::none();
  if (cfg.faultRate >= 0) {
    if (cfg.faultRate > 1) {
      err << "error: --fault-rate must be in [0, 1]\n";
      return kExitUsage;
    }
    model = FaultModel::random(cfg.faultRate, cfg.seed);
  } else if (!cfg.injectSpecs.empty()) {
    std::vector<FaultSpec> specs;
    for (const std::string& s : cfg.injectSpecs) {
      FaultSpec spec;
      std::string specError;
      if (!parseInjectSpec(s, p, spec, specError)) {
        err << "error: " << specError << "\n";
        return kExitUsage;
      }
      specs.push_back(spec);
    }
    model = FaultModel::targeted(std::move(specs));
  }

  try {
    World world = initWorld(p);
    if (!cfg.loadPath.empty()) loadSnapshot(world, p, cfg.loadPath, &err);

    std::optional<ReplicatedSession> session;
    if (replicationOn) {
      ReplicationConfig rcfg;
      rcfg.all = cfg.replicateAll;
      rcfg.arrays = cfg.replicateArrays;
      rcfg.healthWindow = cfg.healthWindow;
      rcfg.healthThreshold = cfg.healthThreshold;
      try {
        session.emplace(p, world, rcfg, model);
      } catch (const std::invalid_argument& e) {
        err << "error: " << e.what() << "\n";
        return kExitUsage;
      }
    }

    std::optional<StepTrace> trace;
    if (!cfg.tracePath.empty()) trace.emplace();

    // With --every k the run proceeds in k-step segments and a snapshot is
    // written at each boundary; under dataflow this also acts as a periodic
    // global join. Without it only the final state is dumped.
    std::vector<uint64_t> boundaries;
    if (!cfg.dumpDir.empty() && cfg.dumpEvery > 0) {
      for (uint64_t s = cfg.dumpEvery; s < cfg.steps; s += cfg.dumpEvery)
        boundaries.push_back(s);
    }
    boundaries.push_back(cfg.steps);

    uint64_t evalsPerStep = 0;
    if (session) {
      for (size_t a = 0; a < p.arrays.size(); ++a)
        evalsPerStep += static_cast<uint64_t>(p.arrays[a].size) *
                        (session->replicas().replicated[a] ? 2 : 1);
    } else {
      for (const auto& a : p.arrays) evalsPerStep += static_cast<uint64_t>(a.size);
    }

    const auto t0 = std::chrono::steady_clock::now();
    uint64_t done = 0;
    for (uint64_t boundary : boundaries) {
      RunOptions opt;
      opt.scheduler = cfg.scheduler;
      opt.threads = cfg.threads;
      opt.steps = boundary - done;
      opt.trace = trace ? &*trace : nullptr;
      if (session)
        session->run(opt);
      else
        run(p, world, opt);
      done = boundary;
      if (!cfg.dumpDir.empty()) {
        uint64_t sigmaNow = 0;  // equals `done` unless a snapshot load moved the counters
        for (const auto& a : world.arrays) sigmaNow = std::max(sigmaNow, a.sigma);
        dumpSnapshot(world, p, cfg.dumpDir, sigmaNow);
      }
    }
    const double seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

    if (session) {
      ReplicatedRunResult result = session->finish();
      if (!cfg.dumpDir.empty()) {
        std::filesystem::path dir(cfg.dumpDir);
        std::ofstream mm(dir / "mismatch_log.csv", std::ios::binary);
        writeMismatchCsv(mm, p, result.mismatches);
        std::ofstream hh(dir / "health_report.csv", std::ios::binary);
        writeHealthCsv(hh, p, result.health);
      }
      if (cfg.stats) {
        uint64_t flagged = 0;
        for (const auto& row : result.health.rows) flagged += row.flagged ? 1 : 0;
        err << "mismatches: " << result.mismatches.size() << "\n";
        err << "injected_faults: " << result.appliedFaults.size() << "\n";
        err << "flagged_instances: " << flagged << "\n";
      }
    }

    if (trace) {
      std::ofstream ts(cfg.tracePath, std::ios::binary);
      trace->writeCsv(ts);
    }

    if (cfg.stats) {
      err << "scheduler: " << schedulerName(cfg.scheduler) << "\n";
      err << "threads: " << cfg.threads << "\n";
      err << "steps: " << cfg.steps << "\n";
      char buf[64];
      std::snprintf(buf, sizeof buf, "%.6f", seconds);
      err << "wall_time_s: " << buf << "\n";
      double rate = seconds > 0 ? static_cast<double>(evalsPerStep) *
                                      static_cast<double>(cfg.steps) / seconds
                                : 0.0;
      std::snprintf(buf, sizeof buf, "%.0f", rate);
      err << "instance_evals_per_s: " << buf << "\n";
    }
    return kExitOk;
  } catch (const UnrecoverableError& e) {
    err << "unrecoverable replication disagreement: " << e.what() << "\n";
    return kExitUnrecoverable;
  } catch (const SnapshotError& e) {
    err << "snapshot error: " << e.what() << "\n";
    return kExitRuntimeError;
  } catch (const RuntimeError& e) {
    err << detail::describeRuntimeError(p, e) << "\n";
    return kExitRuntimeError;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitRuntimeError;
  }
}

}  // namespace miso
