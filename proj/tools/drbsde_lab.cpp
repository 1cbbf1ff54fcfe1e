#include <cstdio>
#include <filesystem>
#include <iostream>

#include <CLI11.hpp>

#include "drbsde/experiment.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Lattice and Monte Carlo laboratory for reflected backward equations"};
  app.set_version_flag("--version", drbsde::kVersion);
  app.require_subcommand(1);

  std::string config_path;
  std::string out_dir;
  int jobs = 1;
  std::uint64_t seed = 0;
  auto* run = app.add_subcommand("run", "Run one experiment config");
  run->add_option("config", config_path, "JSON config file")->required();
  run->add_option("--out", out_dir, "Output directory (overrides the config)");
  run->add_option("--jobs", jobs, "Worker threads")->check(CLI::PositiveNumber);
  auto* seed_opt = run->add_option("--seed", seed, "Seed (overrides the config)");

  std::string suite_dir;
  std::string suite_out = "verify-all-out";
  int suite_jobs = 1;
  auto* all = app.add_subcommand("verify-all", "Run every config in a directory");
  all->add_option("config_dir", suite_dir, "Directory of JSON configs")->required();
  all->add_option("--out", suite_out, "Output root; each config writes to <out>/<name>");
  all->add_option("--jobs", suite_jobs, "Worker threads")->check(CLI::PositiveNumber);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  if (*run) {
    drbsde::RunOptions opt;
    if (!out_dir.empty()) opt.out = out_dir;
    opt.jobs = jobs;
    if (*seed_opt) opt.seed = seed;
    const auto r = drbsde::run_config_file(config_path, opt);
    if (r.exit_code == 0) {
      std::cout << "pass: reports in " << r.out_dir.string() << "\n";
    } else {
      std::cerr << (r.exit_code == 2 ? "error: " : "fail: ") << r.message << "\n";
    }
    return r.exit_code;
  }

  try {
    const auto rows = drbsde::verify_all(suite_dir, suite_out, suite_jobs);
    int worst = 0;
    std::printf("%-32s %-14s %s\n", "config", "kind", "result");
    for (const auto& row : rows) {
      const char* status = row.exit_code == 0 ? "PASS" : (row.exit_code == 1 ? "FAIL" : "ERROR");
      std::printf("%-32s %-14s %s", row.name.c_str(), row.kind.c_str(), status);
      if (row.exit_code != 0) std::printf("  %s", row.message.c_str());
      std::printf("\n");
      worst = std::max(worst, row.exit_code);
    }
    std::printf("%zu configs, %s\n", rows.size(), worst == 0 ? "all pass" : "failures present");
    return worst;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
}
