// cimrel: command line front end for the reliability pipeline.
//
//   cimrel run     --config cfg.json [--out dir] [--seed N] [--force] [--jobs N]
//   cimrel train | eval-mc | attack | swim | trice | bench   (same flags, one stage + prerequisites)
//   cimrel gen-data --kind blobs --n 400 --noise 0.5 --seed 7 --out data.csv
//
// Exit codes: 0 all requested stages succeeded, 1 a stage failed,
// 2 bad arguments or config.

#include <cstdio>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "cimrel/datasets.hpp"
#include "cimrel/error.hpp"
#include "cimrel/pipeline.hpp"

namespace {

struct GlobalFlags {
  std::string config;
  std::string out;
  std::optional<std::uint64_t> seed;
  bool force = false;
  unsigned jobs = 1;
};

int run_stages(const GlobalFlags& g, std::optional<std::string> only_stage) {
  cimrel::ExperimentConfig cfg;
  try {
    cfg = g.config.empty() ? cimrel::ExperimentConfig::from_json(cimrel::Json::object(), {}, g.seed)
                           : cimrel::ExperimentConfig::load(g.config, g.seed);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  if (!g.out.empty()) cfg.output_dir = g.out;
  if (only_stage) cfg.stages = {*only_stage};

  const cimrel::RunManifest m = cimrel::run_pipeline(cfg, cimrel::RunOptions{g.force, g.jobs});
  for (const auto& name : cimrel::expand_stages(cfg.stages)) {
    const auto st = m.stages.at(name);
    std::printf("%-7s %-8s %8.3fs", name.c_str(), std::string(cimrel::to_string(st)).c_str(),
                m.timings.contains(name) ? m.timings.at(name) : 0.0);
    if (m.errors.contains(name)) std::printf("  %s", m.errors.at(name).c_str());
    std::printf("\n");
  }
  std::printf("config_digest %s\nmanifest %s\n", m.config_digest.c_str(),
              (cfg.output_dir / "manifest.json").string().c_str());
  return m.ok() ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Reliability lab for compute-in-memory inference under device variation"};
  app.require_subcommand(1);
  app.fallthrough();
  GlobalFlags g;
  std::uint64_t seed = 0;
  auto* seed_opt = app.add_option("--seed", seed, "Master seed (overrides the config)");
  app.add_option("--config", g.config, "Experiment config JSON");
  app.add_option("--out", g.out, "Output directory (file path for gen-data)");
  app.add_flag("--force", g.force, "Recompute stages even when cached outputs match");
  app.add_option("--jobs", g.jobs, "Worker threads for MC trials and attack restarts")
      ->check(CLI::Range(1U, 1024U));

  const std::pair<const char*, const char*> stage_cmds[] = {
      {"train", "train"}, {"eval-mc", "mc"}, {"attack", "attack"}, {"swim", "swim"}, {"trice", "trice"},
      {"bench", "bench"}};
  std::optional<std::string> chosen;
  for (const auto& [cmd, stage] : stage_cmds) {
    app.add_subcommand(cmd, std::string("Run the ") + stage + " stage and its prerequisites")
        ->callback([&chosen, s = std::string(stage)] { chosen = s; });
  }
  bool run_all = false;
  app.add_subcommand("run", "Run every stage listed in the config")->callback([&] { run_all = true; });

  auto* gen = app.add_subcommand("gen-data", "Write a synthetic dataset as CSV");
  std::string kind = "blobs";
  std::size_t n = 400;
  double noise = 0.5;
  bool header = false;
  gen->add_option("--kind", kind, "blobs, moons or xor_grid");
  gen->add_option("--n", n, "Number of samples");
  gen->add_option("--noise", noise, "Gaussian jitter std");
  gen->add_flag("--header", header, "Write a header row");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }
  if (*seed_opt) g.seed = seed;

  if (gen->parsed()) {
    if (g.out.empty()) {
      std::cerr << "error: gen-data needs --out <file.csv>\n";
      return 2;
    }
    try {
      const auto data = cimrel::gen_dataset(kind, n, noise, g.seed.value_or(0));
      cimrel::save_csv_dataset(g.out, data, header);
      std::printf("wrote %zu samples to %s\n", data.size(), g.out.c_str());
    } catch (const std::exception& e) {
      std::cerr << "error: " << e.what() << "\n";
      return 2;
    }
    return 0;
  }
  if (run_all) return run_stages(g, std::nullopt);
  return run_stages(g, chosen);
}
