#pragma once

#include <algorithm>
#include <atomic>
#include <chrono>
#include <condition_variable>
#include <deque>
#include <functional>
#include <mutex>
#include <optional>
#include <ostream>
#include <thread>
#include <vector>

#include "miso/analysis.hpp"
#include "miso/ast.hpp"
#include "miso/eval.hpp"
#include "miso/state.hpp"

namespace miso {

enum class SchedulerKind : uint8_t { Sequential, BarrierParallel, Dataflow };

inline const char* schedulerName(SchedulerKind k) {
  switch (k) {
    case SchedulerKind::Sequential: return "seq";
    case SchedulerKind::BarrierParallel: return "barrier";
    case SchedulerKind::Dataflow: return "dataflow";
  }
  return "?";
}

struct TraceEntry {
  uint64_t wallNs = 0;
  uint32_t arrayId = 0;
  uint64_t sigma = 0;
  uint64_t checksum = 0;  // committed-bank checksum when enabled, else 0
};

// Per-array committed step counters sampled over wall-clock time. One entry is
// recorded at every commit.
class StepTrace {
 public:
  StepTrace() : epoch_(std::chrono::steady_clock::now()) {}

  uint64_t nowNs() const {
    return static_cast<uint64_t>(std::chrono::duration_cast<std::chrono::nanoseconds>(
                                     std::chrono::steady_clock::now() - epoch_)
                                     .count());
  }

  void record(uint32_t arrayId, uint64_t sigma, uint64_t checksum) {
    uint64_t t = nowNs();
    std::lock_guard lk(mu_);
    entries_.push_back(TraceEntry{t, arrayId, sigma, checksum});
  }

  std::vector<TraceEntry> entries() const {
    std::lock_guard lk(mu_);
    std::vector<TraceEntry> v = entries_;
    std::stable_sort(v.begin(), v.end(),
                     [](const TraceEntry& a, const TraceEntry& b) { return a.wallNs < b.wallNs; });
    return v;
  }

  void writeCsv(std::ostream& os) const {
    os << "wallclock_ns,arrayId,sigma\n";
    for (const TraceEntry& e : entries())
      os << e.wallNs << ',' << e.arrayId << ',' << e.sigma << '\n';
  }

 private:
  std::chrono::steady_clock::time_point epoch_;
  mutable std::mutex mu_;
  std::vector<TraceEntry> entries_;
};

struct RunOptions {
  SchedulerKind scheduler = SchedulerKind::Sequential;
  unsigned threads = 1;
  uint64_t steps = 0;  // additional steps to drive from the current state

  StepTrace* trace = nullptr;
  bool traceChecksums = false;
  std::vector<uint64_t>* stepChecksums = nullptr;  // barrier-style: per committed step

  const DepGraph* graph = nullptr;  // dataflow dependency graph; built when null
  bool checkInvariants = false;     // verify bounded skew at every commit

  std::function<void(uint32_t array, uint64_t step)> stepDelay;  // test hook
  std::function<void(uint32_t reader, uint32_t target)> onRead;  // debug observer
};

// Drives the per-step work of one array: evaluation into scratch, an optional
// pre-commit phase (replication hooks in), and the commit itself.
class StepExecutor {
 public:
  virtual ~StepExecutor() = default;
  virtual uint32_t replicas(uint32_t /*array*/) const { return 1; }
  virtual void evaluateChunk(uint32_t array, uint32_t replica, uint64_t begin, uint64_t end,
                             const ReadView& view, uint64_t producedStep) = 0;
  virtual void finalize(uint32_t /*array*/, uint64_t /*producedStep*/,
                        const ReadView& /*view*/) {}
  virtual void commit(uint32_t array) = 0;
};

class PlainExecutor : public StepExecutor {
 public:
  PlainExecutor(const Program& p, World& w) : p_(p), w_(w) {}

  void evaluateChunk(uint32_t array, uint32_t /*replica*/, uint64_t begin, uint64_t end,
                     const ReadView& view, uint64_t step) override {
    Bank& scratch = w_.arrays[array].scratch();
    std::vector<Value> out, locals;
    for (uint64_t i = begin; i < end; ++i) {
      evalTransition(p_, view, array, i, step, out, locals);
      for (size_t f = 0; f < out.size(); ++f) scratch.columns[f].words[i] = out[f].bits;
    }
  }

  void commit(uint32_t array) override { commitArray(w_, array); }

 private:
  const Program& p_;
  World& w_;
};

namespace detail {

class WorkerPool {
 public:
  explicit WorkerPool(unsigned n) {
    for (unsigned i = 0; i < std::max(1u, n); ++i) workers_.emplace_back([this] { loop(); });
  }
  ~WorkerPool() {
    {
      std::lock_guard lk(mu_);
      stop_ = true;
    }
    cv_.notify_all();
    for (auto& t : workers_) t.join();
  }

  void submit(std::function<void()> task) {
    {
      std::lock_guard lk(mu_);
      queue_.push_back(std::move(task));
      ++pending_;
    }
    cv_.notify_one();
  }

  void drain() {
    std::unique_lock lk(mu_);
    done_.wait(lk, [this] { return pending_ == 0; });
  }

 private:
  void loop() {
    std::unique_lock lk(mu_);
    for (;;) {
      cv_.wait(lk, [this] { return stop_ || !queue_.empty(); });
      if (queue_.empty()) {
        if (stop_) return;
        continue;
      }
      auto task = std::move(queue_.front());
      queue_.pop_front();
      lk.unlock();
      task();
      lk.lock();
      if (--pending_ == 0) done_.notify_all();
    }
  }

  std::mutex mu_;
  std::condition_variable cv_, done_;
  std::deque<std::function<void()>> queue_;
  size_t pending_ = 0;
  bool stop_ = false;
  std::vector<std::thread> workers_;
};

// On concurrent failures the smallest (step, array, replica, index) wins, which
// matches the order a sequential run discovers errors in.
class ErrorCollector {
 public:
  struct Key {
    uint64_t step = 0;
    uint32_t array = 0;
    uint32_t replica = 0;
    uint64_t index = 0;
    std::exception_ptr ep;
  };

  void offer(uint64_t step, uint32_t array, uint32_t replica, uint64_t index,
             std::exception_ptr ep) {
    std::lock_guard lk(mu_);
    Key k{step, array, replica, index, std::move(ep)};
    if (!best_ || std::tie(k.step, k.array, k.replica, k.index) <
                      std::tie(best_->step, best_->array, best_->replica, best_->index))
      best_ = std::move(k);
    flag_.store(true, std::memory_order_release);
  }

  bool has() const { return flag_.load(std::memory_order_acquire); }

  [[noreturn]] void rethrow() {
    std::lock_guard lk(mu_);
    std::rethrow_exception(best_->ep);
  }

 private:
  std::mutex mu_;
  std::optional<Key> best_;
  std::atomic<bool> flag_{false};
};

template <class Fn>
inline bool runGuarded(uint64_t step, uint32_t array, uint32_t replica, ErrorCollector& errors,
                       Fn&& fn) {
  try {
    fn();
    return true;
  } catch (const RuntimeError& e) {
    uint64_t idx = e.evalArray == UINT32_MAX ? 0 : e.evalIndex;
    errors.offer(step, array, replica, idx, std::current_exception());
  } catch (...) {
    errors.offer(step, array, replica, 0, std::current_exception());
  }
  return false;
}

inline void requireCommonStep(const World& w) {
  for (const ArrayState& a : w.arrays)
    if (a.sigma != w.arrays[0].sigma)
      throw std::logic_error("barrier-style run requires all arrays at a common step");
}

// Sequential and barrier-parallel driver. Every step evaluates all instances
// of all arrays against the committed banks, then commits every array behind a
// global barrier. inlineMode executes chunks on the calling thread in
// (array, replica, index) order, defining the reference trajectory.
inline void runBarrierStyle(const Program& /*p*/, World& w, const RunOptions& opt,
                            StepExecutor& exec, bool inlineMode) {
  if (w.arrays.empty() || opt.steps == 0) return;
  requireCommonStep(w);
  const uint32_t nArrays = static_cast<uint32_t>(w.arrays.size());
  const uint64_t base = w.arrays[0].sigma;
  std::optional<WorkerPool> pool;
  if (!inlineMode) pool.emplace(opt.threads);

  for (uint64_t s = base + 1; s <= base + opt.steps; ++s) {
    ReadView view = activeView(w);
    view.onRead = opt.onRead;
    ErrorCollector errors;
    if (inlineMode) {
      for (uint32_t a = 0; a < nArrays && !errors.has(); ++a) {
        if (opt.stepDelay) opt.stepDelay(a, s);
        for (uint32_t r = 0; r < exec.replicas(a) && !errors.has(); ++r)
          runGuarded(s, a, r, errors,
                     [&] { exec.evaluateChunk(a, r, 0, w.arrays[a].size, view, s); });
      }
    } else {
      for (uint32_t a = 0; a < nArrays; ++a) {
        const uint64_t n = w.arrays[a].size;
        const uint64_t chunk = (n + opt.threads - 1) / opt.threads;
        for (uint32_t r = 0; r < exec.replicas(a); ++r) {
          for (uint64_t b = 0; b < n; b += chunk) {
            const uint64_t e = std::min(n, b + chunk);
            pool->submit([&, a, r, b, e, s] {
              if (r == 0 && b == 0 && opt.stepDelay) opt.stepDelay(a, s);
              runGuarded(s, a, r, errors, [&] { exec.evaluateChunk(a, r, b, e, view, s); });
            });
          }
        }
      }
      pool->drain();
    }
    if (errors.has()) errors.rethrow();  // step abandoned, nothing committed

    for (uint32_t a = 0; a < nArrays; ++a) {
      runGuarded(s, a, 0, errors, [&] { exec.finalize(a, s, view); });
      if (errors.has()) errors.rethrow();
    }
    for (uint32_t a = 0; a < nArrays; ++a) {
      exec.commit(a);
      if (opt.trace)
        opt.trace->record(a, w.arrays[a].sigma,
                          opt.traceChecksums ? arrayChecksum(w.arrays[a]) : 0);
    }
    if (opt.stepChecksums) opt.stepChecksums->push_back(worldChecksum(w));
  }
}

// Barrier-free driver. An array may take its next step as soon as every
// neighbor in the undirected read graph has caught up to its own step; with
// two banks per array this is exactly the condition under which the banks a
// running evaluation reads stay untouched. Eligibility and commits are
// serialized through one mutex; evaluation runs outside it.
class DataflowDriver {
 public:
  DataflowDriver(const Program& /*p*/, World& w, const RunOptions& opt, StepExecutor& exec,
                 const DepGraph& graph)
      : w_(w), opt_(opt), exec_(exec), g_(graph), pool_(opt.threads) {
    inFlight_.assign(w.arrays.size(), 0);
  }

  void run() {
    const uint32_t n = static_cast<uint32_t>(w_.arrays.size());
    if (n == 0 || opt_.steps == 0) return;
    target_.resize(n);
    for (uint32_t a = 0; a < n; ++a) target_[a] = w_.arrays[a].sigma + opt_.steps;
    {
      std::lock_guard lk(mu_);
      dispatchLocked();
    }
    std::unique_lock lk(mu_);
    cv_.wait(lk, [&] { return inFlightCount_ == 0 && (allDoneLocked() || errors_.has()); });
    if (errors_.has()) errors_.rethrow();
  }

 private:
  bool allDoneLocked() const {
    for (uint32_t a = 0; a < target_.size(); ++a)
      if (w_.arrays[a].sigma < target_[a]) return false;
    return true;
  }

  bool eligibleLocked(uint32_t a) const {
    if (inFlight_[a] || w_.arrays[a].sigma >= target_[a]) return false;
    const uint64_t sa = w_.arrays[a].sigma;
    for (uint32_t x : g_.neighbors[a])
      if (w_.arrays[x].sigma < sa) return false;
    return true;
  }

  void dispatchLocked() {
    if (errors_.has()) return;
    const uint32_t n = static_cast<uint32_t>(w_.arrays.size());
    for (uint32_t a = 0; a < n; ++a) {
      if (!eligibleLocked(a)) continue;
      inFlight_[a] = 1;
      ++inFlightCount_;
      const uint64_t sa = w_.arrays[a].sigma;
      ReadView view;
      view.world = &w_;
      view.onRead = opt_.onRead;
      view.bank.resize(n);
      // latch the bank of every array that holds step sa; a neighbor ahead by
      // one keeps that step in its inactive bank
      for (uint32_t x = 0; x < n; ++x) {
        const ArrayState& ax = w_.arrays[x];
        view.bank[x] = static_cast<uint8_t>(ax.sigma == sa ? ax.active : 1 - ax.active);
      }
      pool_.submit([this, a, produced = sa + 1, view = std::move(view)] {
        taskBody(a, produced, view);
      });
    }
  }

  void taskBody(uint32_t a, uint64_t produced, const ReadView& view) {
    if (opt_.stepDelay) opt_.stepDelay(a, produced);
    bool ok = runGuarded(produced, a, 0, errors_, [&] {
      for (uint32_t r = 0; r < exec_.replicas(a); ++r)
        exec_.evaluateChunk(a, r, 0, w_.arrays[a].size, view, produced);
      exec_.finalize(a, produced, view);
    });
    std::lock_guard lk(mu_);
    if (ok) {
      exec_.commit(a);
      if (opt_.trace)
        opt_.trace->record(a, w_.arrays[a].sigma,
                           opt_.traceChecksums ? arrayChecksum(w_.arrays[a]) : 0);
      if (opt_.checkInvariants) checkSkewLocked(a, produced);
    }
    inFlight_[a] = 0;
    --inFlightCount_;
    dispatchLocked();
    cv_.notify_all();
  }

  void checkSkewLocked(uint32_t a, uint64_t produced) {
    for (uint32_t x : g_.neighbors[a]) {
      const uint64_t sx = w_.arrays[x].sigma;
      const uint64_t sa = w_.arrays[a].sigma;
      const uint64_t diff = sx > sa ? sx - sa : sa - sx;
      if (diff > 1)
        errors_.offer(produced, a, 0, 0,
                      std::make_exception_ptr(
                          std::logic_error("dataflow skew exceeds 1 between adjacent arrays")));
    }
  }

  World& w_;
  const RunOptions& opt_;
  StepExecutor& exec_;
  const DepGraph& g_;

  std::mutex mu_;
  std::condition_variable cv_;
  std::vector<uint8_t> inFlight_;
  size_t inFlightCount_ = 0;
  std::vector<uint64_t> target_;
  ErrorCollector errors_;

  // declared last: the destructor joins the workers before the mutex and
  // condition variable above are destroyed
  WorkerPool pool_;
};

}  // namespace detail

// Runs `opt.steps` steps with the supplied executor under the selected
// scheduler. All three schedulers produce bit-identical trajectories.
inline void runWithExecutor(const Program& p, World& w, const RunOptions& opt,
                            StepExecutor& exec) {
  switch (opt.scheduler) {
    case SchedulerKind::Sequential:
      detail::runBarrierStyle(p, w, opt, exec, /*inlineMode=*/true);
      return;
    case SchedulerKind::BarrierParallel:
      detail::runBarrierStyle(p, w, opt, exec, /*inlineMode=*/false);
      return;
    case SchedulerKind::Dataflow: {
      DepGraph local;
      const DepGraph* g = opt.graph;
      if (!g) {
        local = buildDepGraph(p, extractReadSet(p));
        g = &local;
      }
      detail::DataflowDriver(p, w, opt, exec, *g).run();
      return;
    }
  }
}

inline void run(const Program& p, World& w, const RunOptions& opt) {
  PlainExecutor exec(p, w);
  runWithExecutor(p, w, opt, exec);
}

inline void runSequential(const Program& p, World& w, uint64_t steps) {
  RunOptions opt;
  opt.steps = steps;
  run(p, w, opt);
}

inline void runBarrierParallel(const Program& p, World& w, uint64_t steps, unsigned threads) {
  RunOptions opt;
  opt.scheduler = SchedulerKind::BarrierParallel;
  opt.steps = steps;
  opt.threads = threads;
  run(p, w, opt);
}

inline void runDataflow(const Program& p, World& w, uint64_t steps, unsigned threads) {
  RunOptions opt;
  opt.scheduler = SchedulerKind::Dataflow;
  opt.steps = steps;
  opt.threads = threads;
  run(p, w, opt);
}

}  // namespace miso
