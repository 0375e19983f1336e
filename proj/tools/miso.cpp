#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "miso/driver.hpp"

namespace {

bool parseReplicate(const std::string& arg, miso::RunConfig& cfg, std::string& error) {
  if (arg == "all") {
    cfg.replicateAll = true;
    return true;
  }
  size_t start = 0;
  while (start <= arg.size()) {
    size_t comma = arg.find(',', start);
    std::string name =
        comma == std::string::npos ? arg.substr(start) : arg.substr(start, comma - start);
    if (name.empty()) {
      error = "--replicate expects 'all' or a comma-separated array list";
      return false;
    }
    cfg.replicateArrays.push_back(name);
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  return true;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"miso: compile and run cell programs"};
  app.require_subcommand(1);

  std::string checkFile;
  auto* check = app.add_subcommand("check", "parse and type-check a program");
  check->add_option("file", checkFile, "program source (.miso)")
      ->required()
      ->check(CLI::ExistingFile);

  std::string analyzeFile;
  auto* analyze =
      app.add_subcommand("analyze", "print the dependency graph and parallelism report");
  analyze->add_option("file", analyzeFile, "program source (.miso)")
      ->required()
      ->check(CLI::ExistingFile);

  miso::RunConfig cfg;
  std::string schedulerArg = "seq";
  std::string replicateArg;
  auto* run = app.add_subcommand("run", "execute a program");
  run->add_option("file", cfg.sourcePath, "program source (.miso)")
      ->required()
      ->check(CLI::ExistingFile);
  run->add_option("--steps", cfg.steps, "number of transition steps")->required();
  run->add_option("--scheduler", schedulerArg, "seq | barrier | dataflow")
      ->check(CLI::IsMember({"seq", "barrier", "dataflow"}));
  run->add_option("--threads", cfg.threads, "worker threads (default 1)")
      ->check(CLI::PositiveNumber);
  run->add_option("--load", cfg.loadPath, "load a state snapshot before running")
      ->check(CLI::ExistingFile);
  auto* dumpOpt = run->add_option("--dump", cfg.dumpDir, "directory for state snapshots");
  run->add_option("--every", cfg.dumpEvery, "dump every k steps (default: final state only)")
      ->check(CLI::PositiveNumber)
      ->needs(dumpOpt);
  run->add_option("--replicate", replicateArg, "'all' or comma-separated array names");
  auto* rateOpt =
      run->add_option("--fault-rate", cfg.faultRate,
                      "random bit-flip probability per instance per replica per step")
          ->check(CLI::Range(0.0, 1.0));
  run->add_option("--inject", cfg.injectSpecs,
                  "targeted fault, array:index:step:replica:field:bit (repeatable)")
      ->excludes(rateOpt);
  run->add_option("--seed", cfg.seed, "fault-injection seed");
  run->add_option("--health-window", cfg.healthWindow, "mismatch window W (default 100)")
      ->check(CLI::PositiveNumber);
  run->add_option("--health-threshold", cfg.healthThreshold,
                  "windowed mismatch fraction that flags an instance (default 0.1)");
  run->add_flag("--stats", cfg.stats, "print run statistics to stderr");
  run->add_option("--trace", cfg.tracePath, "write the per-commit step trace CSV here");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return miso::kExitUsage;
  }

  if (check->parsed()) return miso::checkMain(checkFile, std::cout, std::cerr);
  if (analyze->parsed()) return miso::analyzeMain(analyzeFile, std::cout, std::cerr);

  if (schedulerArg == "barrier")
    cfg.scheduler = miso::SchedulerKind::BarrierParallel;
  else if (schedulerArg == "dataflow")
    cfg.scheduler = miso::SchedulerKind::Dataflow;
  if (!replicateArg.empty()) {
    std::string error;
    if (!parseReplicate(replicateArg, cfg, error)) {
      std::cerr << "error: " << error << "\n";
      return miso::kExitUsage;
    }
  }
  if (!(cfg.healthThreshold > 0 && cfg.healthThreshold <= 1)) {
    std::cerr << "error: --health-threshold must be in (0, 1]\n";
    return miso::kExitUsage;
  }
  return miso::runMain(cfg, std::cout, std::cerr);
}
