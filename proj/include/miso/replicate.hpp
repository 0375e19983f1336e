#pragma once

#include <cinttypes>
#include <cstdio>
#include <memory>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

#include "miso/schedule.hpp"

namespace miso {

// Which arrays run with a duplicated state and pairwise comparison, plus the
// permanent-fault flagging parameters.
struct ReplicationConfig {
  bool all = false;
  std::vector<std::string> arrays;  // array names when not `all`
  uint32_t healthWindow = 100;      // W >= 1
  double healthThreshold = 0.1;     // 0 < theta <= 1
};

// One injected bit flip. `step` is the committed step the flip lands in
// (1-based: the first transition produces step 1).
struct FaultSpec {
  uint32_t array = 0;
  uint64_t index = 0;
  uint64_t step = 0;
  uint8_t replica = 0;
  uint32_t field = 0;
  uint8_t bit = 0;
};

struct FaultModel {
  enum class Mode : uint8_t { None, Random, Targeted };
  Mode mode = Mode::None;
  double rate = 0;  // Random: probability per instance per replica per step
  uint64_t seed = 0;
  std::vector<FaultSpec> targets;

  static FaultModel none() { return {}; }
  static FaultModel random(double rate, uint64_t seed) {
    FaultModel m;
    m.mode = Mode::Random;
    m.rate = rate;
    m.seed = seed;
    return m;
  }
  static FaultModel targeted(std::vector<FaultSpec> specs) {
    FaultModel m;
    m.mode = Mode::Targeted;
    m.targets = std::move(specs);
    return m;
  }
};

inline uint64_t mix64(uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

// Counter-based draw keyed by the full fault coordinates, so the set of
// injected faults depends only on (seed, model, program, K) and never on the
// scheduler or thread count.
inline uint64_t faultDraw(uint64_t seed, uint64_t step, uint32_t array, uint64_t index,
                          uint32_t replica, uint32_t salt) {
  uint64_t h = mix64(seed ^ 0x6d69736f2d646d72ull);
  h = mix64(h ^ step);
  h = mix64(h ^ ((uint64_t(array) << 8) | replica));
  h = mix64(h ^ index);
  h = mix64(h ^ salt);
  return h;
}

// Applies the model's flips for (step, array, replica) to a scratch bank,
// after evaluation and before comparison. Returns the applied flips.
inline std::vector<FaultSpec> injectFaults(const FaultModel& model, uint64_t step,
                                           uint32_t array, uint8_t replica, Bank& scratch,
                                           uint64_t size) {
  std::vector<FaultSpec> applied;
  if (model.mode == FaultModel::Mode::Random && model.rate > 0) {
    const uint32_t nFields = static_cast<uint32_t>(scratch.columns.size());
    if (nFields == 0) return applied;
    for (uint64_t i = 0; i < size; ++i) {
      const uint64_t d = faultDraw(model.seed, step, array, i, replica, 0);
      const double u = static_cast<double>(d >> 11) * 0x1.0p-53;
      if (u >= model.rate) continue;
      const uint32_t field = static_cast<uint32_t>(
          faultDraw(model.seed, step, array, i, replica, 1) % nFields);
      const uint8_t bit = static_cast<uint8_t>(
          faultDraw(model.seed, step, array, i, replica, 2) % 64);
      scratch.columns[field].words[i] ^= 1ull << bit;
      applied.push_back(FaultSpec{array, i, step, replica, field, bit});
    }
  } else if (model.mode == FaultModel::Mode::Targeted) {
    for (const FaultSpec& t : model.targets) {
      if (t.step != step || t.array != array || t.replica != replica) continue;
      scratch.columns[t.field].words[t.index] ^= 1ull << t.bit;
      applied.push_back(t);
    }
  }
  return applied;
}

enum class Resolution : uint8_t { VotedReplica0, VotedReplica1, VotedThird, Unrecoverable };

inline const char* resolutionName(Resolution r) {
  switch (r) {
    case Resolution::VotedReplica0: return "VotedReplica0";
    case Resolution::VotedReplica1: return "VotedReplica1";
    case Resolution::VotedThird: return "VotedThird";
    case Resolution::Unrecoverable: return "Unrecoverable";
  }
  return "?";
}

struct MismatchRecord {
  uint64_t step = 0;
  uint32_t array = 0;
  uint64_t index = 0;
  uint32_t field = 0;
  uint64_t bits0 = 0;
  uint64_t bits1 = 0;
  Resolution resolution = Resolution::VotedReplica0;
};

// Thrown when the arbitration run agrees with neither replica.
class UnrecoverableError : public std::runtime_error {
 public:
  explicit UnrecoverableError(const std::string& msg) : std::runtime_error(msg) {}
  uint64_t step = 0;
  uint32_t array = 0;
  uint64_t index = 0;
  uint32_t field = 0;
};

// Sliding-window mismatch counter for one replicated instance. The flag is
// sticky: once the windowed fraction reaches the threshold it stays set.
struct CellHealth {
  uint32_t window = 100;
  std::vector<uint64_t> bits;  // one bit per step in the window
  uint32_t count = 0;
  uint64_t steps = 0;
  bool flagged = false;

  void init(uint32_t w) {
    window = w;
    bits.assign((w + 63) / 64, 0);
    count = 0;
    steps = 0;
    flagged = false;
  }

  void update(bool mismatched, double threshold) {
    const uint32_t pos = static_cast<uint32_t>(steps % window);
    uint64_t& word = bits[pos / 64];
    const uint64_t mask = 1ull << (pos % 64);
    if (steps >= window && (word & mask)) --count;
    if (mismatched) {
      word |= mask;
      ++count;
    } else {
      word &= ~mask;
    }
    ++steps;
    const uint64_t denom = std::min<uint64_t>(window, steps);
    if (static_cast<double>(count) / static_cast<double>(denom) >= threshold) flagged = true;
  }
};

inline void updateHealth(CellHealth& health, bool mismatched, double threshold) {
  health.update(mismatched, threshold);
}

// Replica 1 of every replicated array; replica 0 is the world itself. Readers
// of a replicated array always read replica 0, which is indistinguishable from
// reading replica 1 because commits happen post-repair.
struct ReplicaSet {
  std::vector<uint8_t> replicated;                  // per array
  std::vector<std::unique_ptr<ArrayState>> shadow;  // replica 1 state, null when off
  std::vector<std::vector<CellHealth>> health;      // per replicated instance

  static ReplicaSet create(const World& w, const std::vector<uint8_t>& mask, uint32_t window) {
    ReplicaSet rs;
    rs.replicated = mask;
    rs.shadow.resize(w.arrays.size());
    rs.health.resize(w.arrays.size());
    for (size_t a = 0; a < w.arrays.size(); ++a) {
      if (!mask[a]) continue;
      rs.shadow[a] = std::make_unique<ArrayState>(w.arrays[a]);
      rs.health[a].resize(w.arrays[a].size);
      for (auto& h : rs.health[a]) h.init(window);
    }
    return rs;
  }
};

inline std::vector<uint8_t> resolveReplicationMask(const Program& p,
                                                   const ReplicationConfig& cfg) {
  std::vector<uint8_t> mask(p.arrays.size(), cfg.all ? 1 : 0);
  if (!cfg.all) {
    for (const std::string& name : cfg.arrays) {
      int idx = p.arrayIndex(name);
      if (idx < 0) throw std::invalid_argument("unknown array in replication config: " + name);
      mask[idx] = 1;
    }
  }
  if (cfg.healthWindow < 1) throw std::invalid_argument("health window must be >= 1");
  if (!(cfg.healthThreshold > 0 && cfg.healthThreshold <= 1))
    throw std::invalid_argument("health threshold must be in (0, 1]");
  return mask;
}

inline void validateFaultModel(const FaultModel& m, const Program& p,
                               const std::vector<uint8_t>& mask) {
  if (m.mode == FaultModel::Mode::Random && !(m.rate >= 0 && m.rate <= 1))
    throw std::invalid_argument("fault rate must be in [0, 1]");
  for (const FaultSpec& t : m.targets) {
    if (t.array >= p.arrays.size()) throw std::invalid_argument("fault spec: bad array id");
    if (!mask[t.array])
      throw std::invalid_argument("fault spec targets non-replicated array '" +
                                  p.arrays[t.array].name + "'");
    if (t.index >= static_cast<uint64_t>(p.arrays[t.array].size))
      throw std::invalid_argument("fault spec: index out of range");
    const CellDecl& cell = p.cells[p.arrays[t.array].typeIndex];
    if (t.field >= cell.fields.size()) throw std::invalid_argument("fault spec: bad field");
    if (t.replica > 1) throw std::invalid_argument("fault spec: replica must be 0 or 1");
    if (t.bit > 63) throw std::invalid_argument("fault spec: bit must be in [0, 63]");
    if (t.step < 1) throw std::invalid_argument("fault spec: step must be >= 1");
  }
}

// Executes replicated arrays as two independent evaluations, injects faults,
// compares scratch banks bit-exactly and repairs mismatches by majority with a
// third fault-free evaluation before committing both replicas.
class ReplicatedExecutor : public StepExecutor {
 public:
  ReplicatedExecutor(const Program& p, World& w, ReplicaSet& rs, const FaultModel& fm,
                     double healthThreshold, bool postRepairCheck = false)
      : p_(p), w_(w), rs_(rs), fm_(fm), threshold_(healthThreshold),
        postRepairCheck_(postRepairCheck) {
    records_.resize(w.arrays.size());
    applied_.resize(w.arrays.size());
  }

  uint32_t replicas(uint32_t array) const override { return rs_.replicated[array] ? 2u : 1u; }

  void evaluateChunk(uint32_t array, uint32_t replica, uint64_t begin, uint64_t end,
                     const ReadView& view, uint64_t step) override {
    std::vector<Value> out, locals;
    if (replica == 0) {
      Bank& scratch = w_.arrays[array].scratch();
      for (uint64_t i = begin; i < end; ++i) {
        evalTransition(p_, view, array, i, step, out, locals);
        for (size_t f = 0; f < out.size(); ++f) scratch.columns[f].words[i] = out[f].bits;
      }
    } else {
      ReadView shadowView = view;  // replica 1 reads its own copy of this array
      shadowView.selfShadow = rs_.shadow[array].get();
      Bank& scratch = rs_.shadow[array]->scratch();
      for (uint64_t i = begin; i < end; ++i) {
        evalTransition(p_, shadowView, array, i, step, out, locals);
        for (size_t f = 0; f < out.size(); ++f) scratch.columns[f].words[i] = out[f].bits;
      }
    }
  }

  void finalize(uint32_t array, uint64_t step, const ReadView& view) override {
    if (!rs_.replicated[array]) return;
    const uint64_t size = w_.arrays[array].size;
    Bank& s0 = w_.arrays[array].scratch();
    Bank& s1 = rs_.shadow[array]->scratch();

    auto a0 = injectFaults(fm_, step, array, 0, s0, size);
    auto a1 = injectFaults(fm_, step, array, 1, s1, size);
    auto& appliedLog = applied_[array];
    appliedLog.insert(appliedLog.end(), a0.begin(), a0.end());
    appliedLog.insert(appliedLog.end(), a1.begin(), a1.end());

    const size_t nFields = s0.columns.size();
    std::vector<Value> third, locals;
    for (uint64_t i = 0; i < size; ++i) {
      bool mismatched = false;
      for (size_t f = 0; f < nFields; ++f) {
        if (s0.columns[f].words[i] != s1.columns[f].words[i]) {
          mismatched = true;
          break;
        }
      }
      if (mismatched) {
        // third equal transition from replica 0's committed previous state
        evalTransition(p_, view, array, i, step, third, locals);
        for (size_t f = 0; f < nFields; ++f) {
          const uint64_t b0 = s0.columns[f].words[i];
          const uint64_t b1 = s1.columns[f].words[i];
          if (b0 == b1) continue;
          const uint64_t bt = third[f].bits;
          Resolution res;
          uint64_t winner;
          if (bt == b0) {
            res = Resolution::VotedReplica0;
            winner = b0;
          } else if (bt == b1) {
            res = Resolution::VotedReplica1;
            winner = b1;
          } else {
            records_[array].push_back(MismatchRecord{step, array, i, static_cast<uint32_t>(f),
                                                     b0, b1, Resolution::Unrecoverable});
            UnrecoverableError err("unrecoverable replica disagreement at step " +
                                   std::to_string(step) + ", array '" +
                                   p_.arrays[array].name + "', instance " + std::to_string(i) +
                                   ", field '" + fieldName(array, static_cast<uint32_t>(f)) +
                                   "'");
            err.step = step;
            err.array = array;
            err.index = i;
            err.field = static_cast<uint32_t>(f);
            throw err;
          }
          s0.columns[f].words[i] = winner;
          s1.columns[f].words[i] = winner;
          records_[array].push_back(MismatchRecord{step, array, i, static_cast<uint32_t>(f),
                                                   b0, b1, res});
        }
      }
      rs_.health[array][i].update(mismatched, threshold_);
    }
  }

  void commit(uint32_t array) override {
    commitArray(w_, array);
    if (!rs_.replicated[array]) return;
    ArrayState& sh = *rs_.shadow[array];
    sh.active = 1 - sh.active;
    ++sh.sigma;
    if (postRepairCheck_) verifyReplicasEqual(array);
  }

  std::vector<MismatchRecord> drainRecords() {
    std::vector<MismatchRecord> all;
    for (auto& v : records_) {
      all.insert(all.end(), v.begin(), v.end());
      v.clear();
    }
    std::sort(all.begin(), all.end(), [](const MismatchRecord& a, const MismatchRecord& b) {
      return std::tie(a.step, a.array, a.index, a.field) <
             std::tie(b.step, b.array, b.index, b.field);
    });
    return all;
  }

  std::vector<FaultSpec> drainAppliedFaults() {
    std::vector<FaultSpec> all;
    for (auto& v : applied_) {
      all.insert(all.end(), v.begin(), v.end());
      v.clear();
    }
    std::sort(all.begin(), all.end(), [](const FaultSpec& a, const FaultSpec& b) {
      return std::tie(a.step, a.array, a.index, a.replica, a.field, a.bit) <
             std::tie(b.step, b.array, b.index, b.replica, b.field, b.bit);
    });
    return all;
  }

 private:
  std::string fieldName(uint32_t array, uint32_t field) const {
    return p_.cells[p_.arrays[array].typeIndex].fields[field].name;
  }

  void verifyReplicasEqual(uint32_t array) const {
    const Bank& b0 = w_.arrays[array].committed();
    const Bank& b1 = rs_.shadow[array]->committed();
    for (size_t f = 0; f < b0.columns.size(); ++f)
      if (b0.columns[f].words != b1.columns[f].words)
        throw std::logic_error("post-repair invariant violated: replica banks differ");
  }

  const Program& p_;
  World& w_;
  ReplicaSet& rs_;
  const FaultModel& fm_;
  double threshold_;
  bool postRepairCheck_;
  std::vector<std::vector<MismatchRecord>> records_;  // per array; merged at the end
  std::vector<std::vector<FaultSpec>> applied_;
};

struct HealthReport {
  struct Row {
    uint32_t array = 0;
    uint64_t index = 0;
    uint32_t mismatches = 0;  // count within the current window
    uint32_t window = 0;      // min(W, steps seen)
    bool flagged = false;
  };
  std::vector<Row> rows;  // replicated arrays only, (array, index) order
};

struct ReplicatedRunResult {
  std::vector<MismatchRecord> mismatches;
  std::vector<FaultSpec> appliedFaults;
  HealthReport health;
};

// Holds replicas and accumulated logs across several run() segments, so a
// driver can pause for snapshots without resetting health windows.
class ReplicatedSession {
 public:
  ReplicatedSession(const Program& p, World& w, const ReplicationConfig& cfg,
                    const FaultModel& fm, bool postRepairCheck = false)
      : p_(p), w_(w), fm_(fm),
        mask_(resolveReplicationMask(p, cfg)),
        replicas_(ReplicaSet::create(w, mask_, cfg.healthWindow)),
        exec_(p, w, replicas_, fm_, cfg.healthThreshold, postRepairCheck) {
    validateFaultModel(fm_, p, mask_);
  }

  void run(const RunOptions& opt) { runWithExecutor(p_, w_, opt, exec_); }

  ReplicatedRunResult finish() {
    ReplicatedRunResult res;
    res.mismatches = exec_.drainRecords();
    res.appliedFaults = exec_.drainAppliedFaults();
    for (size_t a = 0; a < replicas_.health.size(); ++a) {
      for (uint64_t i = 0; i < replicas_.health[a].size(); ++i) {
        const CellHealth& h = replicas_.health[a][i];
        res.health.rows.push_back(HealthReport::Row{
            static_cast<uint32_t>(a), i, h.count,
            static_cast<uint32_t>(std::min<uint64_t>(h.window, h.steps)), h.flagged});
      }
    }
    return res;
  }

  const ReplicaSet& replicas() const { return replicas_; }

 private:
  const Program& p_;
  World& w_;
  FaultModel fm_;
  std::vector<uint8_t> mask_;
  ReplicaSet replicas_;
  ReplicatedExecutor exec_;
};

inline ReplicatedRunResult runReplicated(const Program& p, World& w, const RunOptions& opt,
                                         const ReplicationConfig& cfg, const FaultModel& fm,
                                         bool postRepairCheck = false) {
  ReplicatedSession session(p, w, cfg, fm, postRepairCheck);
  session.run(opt);
  return session.finish();
}

// Drives one replicated array through a single step with barrier semantics.
inline std::vector<MismatchRecord> replicatedStep(const Program& p, World& w, ReplicaSet& rs,
                                                  uint32_t array, const FaultModel& fm,
                                                  double healthThreshold = 0.1) {
  ReplicatedExecutor exec(p, w, rs, fm, healthThreshold, true);
  ReadView view = activeView(w);
  const uint64_t step = w.arrays[array].sigma + 1;
  for (uint32_t r = 0; r < exec.replicas(array); ++r)
    exec.evaluateChunk(array, r, 0, w.arrays[array].size, view, step);
  exec.finalize(array, step, view);
  exec.commit(array);
  return exec.drainRecords();
}

inline std::string hexBits(uint64_t bits) {
  char buf[20];
  std::snprintf(buf, sizeof buf, "0x%016" PRIx64, bits);
  return buf;
}

inline void writeMismatchCsv(std::ostream& os, const Program& p,
                             const std::vector<MismatchRecord>& records) {
  os << "step,array,index,field,replica0_hexbits,replica1_hexbits,resolution\n";
  for (const MismatchRecord& r : records) {
    const CellDecl& cell = p.cells[p.arrays[r.array].typeIndex];
    os << r.step << ',' << p.arrays[r.array].name << ',' << r.index << ','
       << cell.fields[r.field].name << ',' << hexBits(r.bits0) << ',' << hexBits(r.bits1)
       << ',' << resolutionName(r.resolution) << '\n';
  }
}

inline void writeHealthCsv(std::ostream& os, const Program& p, const HealthReport& report) {
  os << "array,index,mismatches,window,flagged\n";
  for (const auto& row : report.rows)
    os << p.arrays[row.array].name << ',' << row.index << ',' << row.mismatches << ','
       << row.window << ',' << (row.flagged ? 1 : 0) << '\n';
}

}  // namespace miso
