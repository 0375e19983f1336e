#include <catch2/catch_amalgamated.hpp>

#include <random>

#include "miso/replicate.hpp"
#include "test_util.hpp"

using namespace miso;

namespace {

ReplicationConfig replicateAll() {
  ReplicationConfig cfg;
  cfg.all = true;
  return cfg;
}

World oracleRun(const Program& p, uint64_t steps) {
  World w = initWorld(p);
  runSequential(p, w, steps);
  return w;
}

}  // namespace

TEST_CASE("a zero fault rate never flips anything") {
  Program p = testutil::compileCorpus("blend8.miso");
  World w = initWorld(p);
  FaultModel model = FaultModel::random(0.0, 123);
  Bank& scratch = w.arrays[0].scratch();
  auto before = scratch.columns[0].words;
  for (uint64_t step = 1; step <= 10; ++step) {
    auto applied = injectFaults(model, step, 0, 0, scratch, w.arrays[0].size);
    CHECK(applied.empty());
  }
  CHECK(scratch.columns[0].words == before);
}

TEST_CASE("a targeted flip XORs exactly the named bit") {
  Program p = testutil::compileOrThrow("cell A { var r:Int = 0; }\nimage1 = new A(8)");
  World w = initWorld(p);
  Bank& scratch = w.arrays[0].scratch();
  scratch.columns[0].words[3] = std::bit_cast<uint64_t>(int64_t{1});
  FaultModel model = FaultModel::targeted({FaultSpec{0, 3, 5, 1, 0, 0}});

  // wrong step or replica: no effect
  CHECK(injectFaults(model, 4, 0, 1, scratch, 8).empty());
  CHECK(injectFaults(model, 5, 0, 0, scratch, 8).empty());
  CHECK(scratch.columns[0].words[3] == 1);

  auto applied = injectFaults(model, 5, 0, 1, scratch, 8);
  REQUIRE(applied.size() == 1);
  CHECK(scratch.columns[0].words[3] == 0);  // 1 XOR (1<<0)
}

TEST_CASE("rate one flips exactly one bit per instance per replica per step") {
  Program p = testutil::compileOrThrow("cell A { var x:Int = 0; }\na = new A(16)");
  World w = initWorld(p);
  FaultModel model = FaultModel::random(1.0, 42);
  const auto original = w.arrays[0].scratch().columns[0].words;

  auto round = [&] {
    std::vector<FaultSpec> log;
    for (uint64_t step = 1; step <= 3; ++step) {
      for (uint8_t replica = 0; replica < 2; ++replica) {
        auto applied = injectFaults(model, step, 0, replica, w.arrays[0].scratch(), 16);
        CHECK(applied.size() == 16);  // one flip per instance
        log.insert(log.end(), applied.begin(), applied.end());
      }
    }
    return log;
  };

  // the same seed reproduces the identical log, and applying the same XORs a
  // second time restores the bank
  auto log1 = round();
  auto log2 = round();
  REQUIRE(log1.size() == log2.size());
  for (size_t i = 0; i < log1.size(); ++i) {
    CHECK(log1[i].index == log2[i].index);
    CHECK(log1[i].step == log2[i].step);
    CHECK(log1[i].replica == log2[i].replica);
    CHECK(log1[i].field == log2[i].field);
    CHECK(log1[i].bit == log2[i].bit);
  }
  CHECK(w.arrays[0].scratch().columns[0].words == original);
}

TEST_CASE("replicatedStep with no faults records nothing and stays transparent") {
  Program p = testutil::compileCorpus("blend8.miso");
  World w = initWorld(p);
  auto mask = resolveReplicationMask(p, replicateAll());
  ReplicaSet rs = ReplicaSet::create(w, mask, 100);
  FaultModel none = FaultModel::none();
  auto records0 = replicatedStep(p, w, rs, 0, none);
  auto records1 = replicatedStep(p, w, rs, 1, none);
  CHECK(records0.empty());
  CHECK(records1.empty());

  World oracle = oracleRun(p, 1);
  CHECK(bitIdentical(w, oracle));
}

TEST_CASE("a single flip in one replica is detected and voted away") {
  Program p = testutil::compileCorpus("blend8.miso");
  World w = initWorld(p);
  auto mask = resolveReplicationMask(p, replicateAll());
  ReplicaSet rs = ReplicaSet::create(w, mask, 100);
  FaultModel model = FaultModel::targeted({FaultSpec{0, 5, 1, 1, 0, 7}});

  auto records = replicatedStep(p, w, rs, 0, model);
  replicatedStep(p, w, rs, 1, FaultModel::none());
  REQUIRE(records.size() == 1);
  CHECK(records[0].step == 1);
  CHECK(records[0].array == 0);
  CHECK(records[0].index == 5);
  CHECK(records[0].field == 0);
  CHECK(records[0].resolution == Resolution::VotedReplica0);
  CHECK((records[0].bits0 ^ records[0].bits1) == (1ull << 7));

  World oracle = oracleRun(p, 1);
  CHECK(bitIdentical(w, oracle));  // the committed state is the fault-free one
}

TEST_CASE("identical flips in both replicas slip through undetected") {
  Program p = testutil::compileCorpus("blend8.miso");
  RunOptions opt;
  opt.steps = 20;
  World w = initWorld(p);
  FaultModel model = FaultModel::targeted({
      FaultSpec{0, 5, 3, 0, 0, 40},
      FaultSpec{0, 5, 3, 1, 0, 40},
  });
  auto result = runReplicated(p, w, opt, replicateAll(), model, true);
  CHECK(result.mismatches.empty());           // comparison passes: the DMR blind spot
  CHECK(result.appliedFaults.size() == 2);
  World oracle = oracleRun(p, 20);
  CHECK_FALSE(testutil::contentEqual(w, oracle));  // and the state is silently wrong
}

TEST_CASE("disjoint per-replica flips on one instance vote field-by-field") {
  Program p = testutil::compileCorpus("blend8.miso");
  RunOptions opt;
  opt.steps = 5;
  World w = initWorld(p);
  FaultModel model = FaultModel::targeted({
      FaultSpec{0, 2, 3, 0, 0, 9},   // replica 0, field r
      FaultSpec{0, 2, 3, 1, 1, 11},  // replica 1, field g
  });
  auto result = runReplicated(p, w, opt, replicateAll(), model, true);
  REQUIRE(result.mismatches.size() == 2);
  CHECK(result.mismatches[0].field == 0);
  CHECK(result.mismatches[0].resolution == Resolution::VotedReplica1);
  CHECK(result.mismatches[1].field == 1);
  CHECK(result.mismatches[1].resolution == Resolution::VotedReplica0);
  CHECK(bitIdentical(w, oracleRun(p, 5)));
}

TEST_CASE("opposite flips of the same field are unrecoverable") {
  Program p = testutil::compileCorpus("blend8.miso");
  RunOptions opt;
  opt.steps = 5;
  World w = initWorld(p);
  FaultModel model = FaultModel::targeted({
      FaultSpec{0, 2, 3, 0, 0, 9},
      FaultSpec{0, 2, 3, 1, 0, 11},  // same field, different bit
  });
  CHECK_THROWS_AS(runReplicated(p, w, opt, replicateAll(), model, true), UnrecoverableError);
  for (const auto& a : w.arrays) CHECK(a.sigma == 2);  // step 3 was abandoned
}

TEST_CASE("health windows follow the documented arithmetic") {
  // W=100, theta=0.1; 9 mismatches spread over 100 steps stay under the bar
  CellHealth h;
  h.init(100);
  for (int step = 1; step <= 100; ++step) h.update(step % 11 == 0, 0.1);  // 9 hits
  CHECK(h.count == 9);
  CHECK_FALSE(h.flagged);

  // the tenth hit within the window reaches exactly 0.10
  h.update(true, 0.1);
  CHECK(h.flagged);

  CellHealth never;
  never.init(100);
  for (int step = 0; step < 500; ++step) never.update(false, 0.1);
  CHECK_FALSE(never.flagged);
}

TEST_CASE("the health flag is sticky and monotone") {
  std::mt19937 rng(5);
  for (int trial = 0; trial < 20; ++trial) {
    CellHealth h;
    h.init(10);
    bool seen = false;
    for (int step = 0; step < 200; ++step) {
      h.update(std::uniform_real_distribution<double>(0, 1)(rng) < 0.05, 0.3);
      if (seen) CHECK(h.flagged);  // never un-flags
      seen = seen || h.flagged;
    }
  }
}

TEST_CASE("replication is transparent for every corpus program and scheduler") {
  for (const char* name : {"blend8.miso", "ring3.miso", "independent2.miso", "mimd3.miso",
                           "identity1.miso"}) {
    CAPTURE(name);
    Program p = testutil::compileCorpus(name);
    World oracle = oracleRun(p, 25);
    struct Mode {
      SchedulerKind kind;
      unsigned threads;
    };
    for (Mode mode : {Mode{SchedulerKind::Sequential, 1}, Mode{SchedulerKind::BarrierParallel, 2},
                      Mode{SchedulerKind::Dataflow, 2}}) {
      World w = initWorld(p);
      RunOptions opt;
      opt.scheduler = mode.kind;
      opt.threads = mode.threads;
      opt.steps = 25;
      auto result = runReplicated(p, w, opt, replicateAll(), FaultModel::none(), true);
      CHECK(result.mismatches.empty());
      CHECK(bitIdentical(w, oracle));
    }
  }
}

TEST_CASE("random single-replica faults are always corrected (mini campaign)") {
  Program p = testutil::compileCorpus("blend8.miso");
  const uint64_t K = 20;
  World oracle = oracleRun(p, K);
  std::mt19937_64 rng(2024);
  for (int trial = 0; trial < 100; ++trial) {
    FaultSpec spec;
    spec.array = static_cast<uint32_t>(rng() % p.arrays.size());
    spec.index = rng() % p.arrays[spec.array].size;
    spec.step = 1 + rng() % K;
    spec.replica = static_cast<uint8_t>(rng() % 2);
    spec.field = static_cast<uint32_t>(rng() % p.cells[p.arrays[spec.array].typeIndex].fields.size());
    spec.bit = static_cast<uint8_t>(rng() % 64);
    CAPTURE(trial, spec.array, spec.index, spec.step, spec.replica, spec.field, spec.bit);

    World w = initWorld(p);
    RunOptions opt;
    opt.steps = K;
    auto result = runReplicated(p, w, opt, replicateAll(), FaultModel::targeted({spec}), true);
    REQUIRE(result.mismatches.size() == 1);
    CHECK(result.mismatches[0].step == spec.step);
    CHECK(result.mismatches[0].array == spec.array);
    CHECK(result.mismatches[0].index == spec.index);
    CHECK(result.mismatches[0].field == spec.field);
    REQUIRE(bitIdentical(w, oracle));
  }
}

TEST_CASE("the applied fault set is independent of scheduler and threads") {
  Program p = testutil::compileCorpus("blend8.miso");
  RunOptions seqOpt;
  seqOpt.steps = 10;
  World w0 = initWorld(p);
  auto base = runReplicated(p, w0, seqOpt, replicateAll(), FaultModel::random(0.005, 7), true);
  REQUIRE_FALSE(base.appliedFaults.empty());

  struct Mode {
    SchedulerKind kind;
    unsigned threads;
  };
  for (Mode mode : {Mode{SchedulerKind::BarrierParallel, 4}, Mode{SchedulerKind::Dataflow, 2}}) {
    World w = initWorld(p);
    RunOptions opt;
    opt.scheduler = mode.kind;
    opt.threads = mode.threads;
    opt.steps = 10;
    auto result = runReplicated(p, w, opt, replicateAll(), FaultModel::random(0.005, 7), true);
    REQUIRE(result.appliedFaults.size() == base.appliedFaults.size());
    for (size_t i = 0; i < base.appliedFaults.size(); ++i) {
      CHECK(result.appliedFaults[i].array == base.appliedFaults[i].array);
      CHECK(result.appliedFaults[i].index == base.appliedFaults[i].index);
      CHECK(result.appliedFaults[i].step == base.appliedFaults[i].step);
      CHECK(result.appliedFaults[i].replica == base.appliedFaults[i].replica);
      CHECK(result.appliedFaults[i].field == base.appliedFaults[i].field);
      CHECK(result.appliedFaults[i].bit == base.appliedFaults[i].bit);
    }
    CHECK(bitIdentical(w, w0));
    CHECK(result.mismatches.size() == base.mismatches.size());
  }
}

TEST_CASE("an instance hit every step is flagged and no other") {
  Program p = testutil::compileCorpus("blend8.miso");
  ReplicationConfig cfg = replicateAll();
  cfg.healthWindow = 100;
  cfg.healthThreshold = 0.1;
  const uint64_t K = 200;
  std::vector<FaultSpec> specs;
  for (uint64_t step = 1; step <= K; ++step)
    specs.push_back(FaultSpec{0, 7, step, 1, 1, static_cast<uint8_t>(step % 8)});
  World w = initWorld(p);
  RunOptions opt;
  opt.steps = K;
  auto result = runReplicated(p, w, opt, cfg, FaultModel::targeted(std::move(specs)), true);
  CHECK(result.mismatches.size() == K);
  uint64_t flagged = 0;
  for (const auto& row : result.health.rows) {
    if (row.flagged) {
      ++flagged;
      CHECK(row.array == 0);
      CHECK(row.index == 7);
      CHECK(row.window == 100);
      CHECK(row.mismatches == 100);  // saturated window
    }
  }
  CHECK(flagged == 1);
  CHECK(bitIdentical(w, oracleRun(p, K)));  // every hit was corrected
}

TEST_CASE("selective replication covers only the named arrays") {
  Program p = testutil::compileCorpus("blend8.miso");
  ReplicationConfig cfg;
  cfg.arrays = {"blend"};
  World w = initWorld(p);
  RunOptions opt;
  opt.steps = 10;
  FaultModel model = FaultModel::targeted({
      FaultSpec{0, 1, 2, 0, 0, 5},
      FaultSpec{0, 9, 6, 1, 3, 52},
  });
  auto result = runReplicated(p, w, opt, cfg, model, true);
  CHECK(result.appliedFaults.size() == 2);
  CHECK(result.mismatches.size() == 2);
  for (const auto& f : result.appliedFaults) CHECK(f.array == 0);
  for (const auto& row : result.health.rows) CHECK(row.array == 0);
  CHECK(bitIdentical(w, oracleRun(p, 10)));

  ReplicationConfig bad;
  bad.arrays = {"nosuch"};
  World w2 = initWorld(p);
  CHECK_THROWS_AS(runReplicated(p, w2, opt, bad, FaultModel::none()), std::invalid_argument);
}

TEST_CASE("a session split into segments matches a single run") {
  Program p = testutil::compileCorpus("blend8.miso");
  ReplicationConfig cfg = replicateAll();
  FaultModel model = FaultModel::targeted({FaultSpec{0, 3, 7, 1, 2, 21}});

  World whole = initWorld(p);
  RunOptions opt;
  opt.steps = 10;
  auto single = runReplicated(p, whole, opt, cfg, model, true);

  World split = initWorld(p);
  ReplicatedSession session(p, split, cfg, model, true);
  RunOptions first;
  first.steps = 4;
  session.run(first);
  RunOptions second;
  second.steps = 6;
  session.run(second);
  auto segmented = session.finish();

  CHECK(bitIdentical(whole, split));
  REQUIRE(segmented.mismatches.size() == single.mismatches.size());
  REQUIRE(segmented.health.rows.size() == single.health.rows.size());
  for (size_t i = 0; i < single.health.rows.size(); ++i) {
    CHECK(segmented.health.rows[i].mismatches == single.health.rows[i].mismatches);
    CHECK(segmented.health.rows[i].window == single.health.rows[i].window);
    CHECK(segmented.health.rows[i].flagged == single.health.rows[i].flagged);
  }
}

TEST_CASE("targeted specs are validated against the program") {
  Program p = testutil::compileCorpus("blend8.miso");
  RunOptions opt;
  opt.steps = 1;
  World w = initWorld(p);
  // fault on a non-replicated array
  ReplicationConfig onlyBlend;
  onlyBlend.arrays = {"blend"};
  FaultModel onTarget = FaultModel::targeted({FaultSpec{1, 0, 1, 0, 0, 0}});
  CHECK_THROWS_AS(runReplicated(p, w, opt, onlyBlend, onTarget), std::invalid_argument);
  // out-of-range index
  FaultModel badIndex = FaultModel::targeted({FaultSpec{0, 64, 1, 0, 0, 0}});
  CHECK_THROWS_AS(runReplicated(p, w, opt, replicateAll(), badIndex), std::invalid_argument);
}
