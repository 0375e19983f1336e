#include <catch2/catch_amalgamated.hpp>

#include <filesystem>

#include "test_util.hpp"

using testutil::corpusPath;
using testutil::freshTempDir;
using testutil::readFile;
using testutil::runCli;
using testutil::writeFile;

TEST_CASE("check accepts the blend listing") {
  auto res = runCli("check " + corpusPath("listing1.miso"));
  CHECK(res.exitCode == 0);
  CHECK(res.out.empty());
  // the three Float-into-Int assignments warn
  CHECK(std::count(res.err.begin(), res.err.end(), '\n') == 3);
  CHECK(res.err.find("warning") != std::string::npos);
}

TEST_CASE("check rejects ill-formed programs with exit 1") {
  auto dir = freshTempDir("bad");
  auto bad = dir / "bad.miso";
  writeFile(bad, "cell A { var x:Int = ; }\n");
  auto res = runCli("check " + bad.string());
  CHECK(res.exitCode == 1);
  CHECK(res.err.find(bad.string() + ":1:22: error:") != std::string::npos);

  writeFile(bad, "cell A { var x:Int = 0; transition { x = y; } }\na = new A(1)\n");
  res = runCli("check " + bad.string());
  CHECK(res.exitCode == 1);
  CHECK(res.err.find("unknown identifier 'y'") != std::string::npos);
  std::filesystem::remove_all(dir);
}

TEST_CASE("analyze prints the graph on stdout and the report on stderr") {
  auto res = runCli("analyze " + corpusPath("listing1.miso"));
  CHECK(res.exitCode == 0);
  CHECK(res.out.find("digraph miso {") != std::string::npos);
  CHECK(res.out.find("n0 -> n0;") != std::string::npos);
  CHECK(res.out.find("n0 -> n1;") != std::string::npos);
  CHECK(res.err.find("arrays: 2") != std::string::npos);
  CHECK(res.err.find("components: 1") != std::string::npos);
  CHECK(res.err.find("simd ImageBlend: 1 array(s), 60000 instances") != std::string::npos);
  CHECK(res.err.find("mimd cell types with transitions: 1") != std::string::npos);
}

TEST_CASE("run with zero steps succeeds and changes nothing") {
  auto dir = freshTempDir("zero");
  auto res = runCli("run " + corpusPath("blend8.miso") + " --steps 0 --dump " + dir.string());
  CHECK(res.exitCode == 0);
  CHECK(std::filesystem::exists(dir / "step_0.csv"));
  std::filesystem::remove_all(dir);
}

TEST_CASE("dataflow dumps match sequential dumps") {
  auto seqDir = freshTempDir("seqdump");
  auto dfDir = freshTempDir("dfdump");
  auto seq = runCli("run " + corpusPath("blend8.miso") + " --steps 50 --dump " + seqDir.string());
  auto df = runCli("run " + corpusPath("blend8.miso") +
                   " --steps 50 --scheduler dataflow --threads 4 --dump " + dfDir.string());
  REQUIRE(seq.exitCode == 0);
  REQUIRE(df.exitCode == 0);
  CHECK(readFile(seqDir / "step_50.csv") == readFile(dfDir / "step_50.csv"));
  std::filesystem::remove_all(seqDir);
  std::filesystem::remove_all(dfDir);
}

TEST_CASE("--every produces periodic snapshots identical across schedulers") {
  auto seqDir = freshTempDir("seqevery");
  auto barDir = freshTempDir("barevery");
  auto seq = runCli("run " + corpusPath("ring3.miso") + " --steps 25 --dump " + seqDir.string() +
                    " --every 10");
  auto bar = runCli("run " + corpusPath("ring3.miso") +
                    " --steps 25 --scheduler barrier --threads 2 --dump " + barDir.string() +
                    " --every 10");
  REQUIRE(seq.exitCode == 0);
  REQUIRE(bar.exitCode == 0);
  for (const char* name : {"step_10.csv", "step_20.csv", "step_25.csv"}) {
    CAPTURE(name);
    REQUIRE(std::filesystem::exists(seqDir / name));
    CHECK(readFile(seqDir / name) == readFile(barDir / name));
  }
  std::filesystem::remove_all(seqDir);
  std::filesystem::remove_all(barDir);
}

TEST_CASE("runtime errors exit with code 2") {
  auto dir = freshTempDir("rt");
  auto prog = dir / "oob.miso";
  writeFile(prog,
            "cell A { var x:Int = 0; var n:Int = 0;\n"
            "  transition { x = a(this.pos + n).x; n = n + 1; } }\n"
            "a = new A(4)\n");
  auto res = runCli("run " + prog.string() + " --steps 10");
  CHECK(res.exitCode == 2);
  CHECK(res.err.find("runtime error") != std::string::npos);
  CHECK(res.err.find("out of range") != std::string::npos);
  std::filesystem::remove_all(dir);
}

TEST_CASE("unrecoverable replica disagreement exits with code 3") {
  auto res = runCli("run " + corpusPath("blend8.miso") +
                    " --steps 5 --replicate all"
                    " --inject blend:2:3:0:r:9 --inject blend:2:3:1:r:11");
  CHECK(res.exitCode == 3);
  CHECK(res.err.find("unrecoverable") != std::string::npos);
}

TEST_CASE("usage errors exit with code 4") {
  CHECK(runCli("run " + corpusPath("blend8.miso")).exitCode == 4);  // missing --steps
  CHECK(runCli("frobnicate x.miso").exitCode == 4);
  CHECK(runCli("run " + corpusPath("blend8.miso") + " --steps 1 --no-such-flag").exitCode == 4);
  CHECK(runCli("run " + corpusPath("blend8.miso") + " --steps 1 --every 5").exitCode == 4);
  CHECK(runCli("run " + corpusPath("blend8.miso") + " --steps 1 --fault-rate 0.1").exitCode == 4);
  CHECK(runCli("run " + corpusPath("blend8.miso") +
               " --steps 1 --replicate nosuch --fault-rate 0.1")
            .exitCode == 4);
  CHECK(runCli("run " + corpusPath("blend8.miso") +
               " --steps 1 --replicate all --inject blend:999:1:0:r:0")
            .exitCode == 4);
  CHECK(runCli("run " + corpusPath("blend8.miso") +
               " --steps 1 --replicate all --fault-rate 0.1 --inject blend:0:1:0:r:0")
            .exitCode == 4);
  CHECK(runCli("run " + corpusPath("blend8.miso") +
               " --steps 1 --replicate all --health-threshold 0")
            .exitCode == 4);
  CHECK(runCli("run " + corpusPath("blend8.miso") +
               " --steps 1 --replicate all --fault-rate 1.5")
            .exitCode == 4);
  CHECK(runCli("check /no/such/file.miso").exitCode == 4);
}

TEST_CASE("replicated runs write mismatch and health reports next to dumps") {
  auto dir = freshTempDir("rep");
  auto res = runCli("run " + corpusPath("blend8.miso") +
                    " --steps 10 --replicate all --inject blend:3:4:1:g:12 --dump " +
                    dir.string() + " --stats");
  REQUIRE(res.exitCode == 0);
  std::string mm = readFile(dir / "mismatch_log.csv");
  CHECK(mm.find("step,array,index,field,replica0_hexbits,replica1_hexbits,resolution") == 0);
  CHECK(mm.find("4,blend,3,g,") != std::string::npos);
  CHECK(mm.find("VotedReplica0") != std::string::npos);
  std::string hh = readFile(dir / "health_report.csv");
  CHECK(hh.find("array,index,mismatches,window,flagged") == 0);
  CHECK(res.err.find("mismatches: 1") != std::string::npos);
  CHECK(res.err.find("injected_faults: 1") != std::string::npos);
  std::filesystem::remove_all(dir);
}

TEST_CASE("identical invocations produce byte-identical outputs") {
  auto dirA = freshTempDir("detA");
  auto dirB = freshTempDir("detB");
  std::string args = corpusPath("mimd3.miso") +
                     " --steps 10 --scheduler barrier --threads 2 --replicate all"
                     " --fault-rate 0.004 --seed 5 --dump ";
  auto a = runCli("run " + args + dirA.string());
  auto b = runCli("run " + args + dirB.string());
  REQUIRE(a.exitCode == 0);
  REQUIRE(b.exitCode == 0);
  CHECK(readFile(dirA / "step_10.csv") == readFile(dirB / "step_10.csv"));
  CHECK(readFile(dirA / "mismatch_log.csv") == readFile(dirB / "mismatch_log.csv"));
  CHECK(readFile(dirA / "health_report.csv") == readFile(dirB / "health_report.csv"));
  std::filesystem::remove_all(dirA);
  std::filesystem::remove_all(dirB);
}

TEST_CASE("segmented replicated runs keep one session across dumps") {
  auto wholeDir = freshTempDir("repwhole");
  auto splitDir = freshTempDir("repsplit");
  std::string base = corpusPath("blend8.miso") +
                     " --steps 10 --replicate all --inject blend:3:7:1:b:21 --dump ";
  auto whole = runCli("run " + base + wholeDir.string());
  auto split = runCli("run " + base + splitDir.string() + " --every 4");
  REQUIRE(whole.exitCode == 0);
  REQUIRE(split.exitCode == 0);
  CHECK(readFile(wholeDir / "step_10.csv") == readFile(splitDir / "step_10.csv"));
  CHECK(readFile(wholeDir / "mismatch_log.csv") == readFile(splitDir / "mismatch_log.csv"));
  CHECK(readFile(wholeDir / "health_report.csv") == readFile(splitDir / "health_report.csv"));
  std::filesystem::remove_all(wholeDir);
  std::filesystem::remove_all(splitDir);
}

TEST_CASE("--load restores a dumped state") {
  auto dir = freshTempDir("loadrun");
  auto full = runCli("run " + corpusPath("mimd3.miso") + " --steps 12 --dump " + dir.string());
  REQUIRE(full.exitCode == 0);
  auto half = runCli("run " + corpusPath("mimd3.miso") + " --steps 5 --dump " + dir.string() +
                     " --every 5");
  REQUIRE(half.exitCode == 0);
  auto resumeDir = freshTempDir("resume");
  auto resumed = runCli("run " + corpusPath("mimd3.miso") + " --steps 7 --load " +
                        (dir / "step_5.csv").string() + " --dump " + resumeDir.string());
  REQUIRE(resumed.exitCode == 0);
  CHECK(readFile(resumeDir / "step_12.csv") == readFile(dir / "step_12.csv"));
  std::filesystem::remove_all(dir);
  std::filesystem::remove_all(resumeDir);
}

TEST_CASE("--trace writes the wallclock commit log") {
  auto dir = freshTempDir("trace");
  auto trace = dir / "trace.csv";
  auto res = runCli("run " + corpusPath("independent2.miso") +
                    " --steps 5 --scheduler dataflow --threads 2 --trace " + trace.string());
  REQUIRE(res.exitCode == 0);
  std::string text = readFile(trace);
  CHECK(text.find("wallclock_ns,arrayId,sigma") == 0);
  // 2 arrays x 5 steps = 10 commit lines after the header
  CHECK(std::count(text.begin(), text.end(), '\n') == 11);
  std::filesystem::remove_all(dir);
}

TEST_CASE("--stats reports throughput on stderr") {
  auto res = runCli("run " + corpusPath("blend8.miso") + " --steps 20 --stats");
  REQUIRE(res.exitCode == 0);
  CHECK(res.err.find("scheduler: seq") != std::string::npos);
  CHECK(res.err.find("steps: 20") != std::string::npos);
  CHECK(res.err.find("wall_time_s:") != std::string::npos);
  CHECK(res.err.find("instance_evals_per_s:") != std::string::npos);
}
