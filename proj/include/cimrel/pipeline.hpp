#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "cimrel/device.hpp"
#include "cimrel/json_io.hpp"
#include "cimrel/nn.hpp"
#include "cimrel/trice.hpp"
#include "cimrel/worst_case.hpp"

namespace cimrel {

inline constexpr const char* kVersion = "0.1.0";

/// Stage names in dependency order.
inline const std::vector<std::string> kStageOrder{"train", "mc", "attack", "swim", "trice", "bench"};

struct DatasetSpec {
  std::string kind = "blobs";
  std::size_t n = 400;
  double noise = 0.5;
  std::uint64_t seed = 7;
  std::filesystem::path csv;  // when set, replaces the generator
  bool header = false;
  std::size_t num_classes = 0;
  std::string csv_sha256;     // filled on load, part of the digest
};

struct ModelSpec {
  std::vector<std::size_t> dims{2, 10, 6, 2};
  Activation hidden = Activation::relu;
  std::uint64_t init_seed = 0;
};

struct SwimSpec {
  std::vector<double> budget_grid{0.0, 0.02, 0.05, 0.1, 0.2, 0.5, 1.0};
  double target_drop = 0.02;
  std::size_t n_mc = 200;
  std::size_t group_size = 1;
  double compare_budget = 0.1;
  std::size_t compare_seeds = 20;
  std::size_t compare_n_mc = 200;
  std::uint64_t seed = 0;
};

struct BenchSpec {
  std::size_t n_runs = 2000;
  std::vector<double> k{1.0, 5.0};
  std::uint64_t seed = 0;
};

/// One JSON document describes one reproducible experiment. Seeds that
/// are absent are derived from master_seed when the config is loaded, so
/// the resolved form always names every seed.
struct ExperimentConfig {
  std::uint64_t master_seed = 0;
  std::vector<std::string> stages = kStageOrder;
  DatasetSpec dataset;
  ModelSpec model;
  TrainConfig train;
  VariationModel variation;
  std::size_t mc_runs = 1000;
  std::uint64_t mc_seed = 0;
  AttackConfig attack;
  std::size_t attack_n_mc = 1000;
  SwimSpec swim;
  double trice_sigma = 2.0;
  double trice_censor_T = 1.0;
  BenchSpec bench;
  std::filesystem::path output_dir = "out";

  /// `base_dir` resolves a relative dataset csv path. `seed_override`
  /// replaces master_seed before derived seeds are filled in.
  static ExperimentConfig from_json(const Json& j, const std::filesystem::path& base_dir = {},
                                    std::optional<std::uint64_t> seed_override = {});
  static ExperimentConfig load(const std::filesystem::path& path, std::optional<std::uint64_t> seed_override = {});

  /// Resolved form; every field explicit.
  Json to_json() const;
  /// SHA-256 of the resolved form minus output_dir and stages.
  std::string digest() const;
};

struct RunOptions {
  bool force = false;
  unsigned jobs = 1;
};

enum class StageStatus { ran, cached, failed, skipped };
std::string_view to_string(StageStatus s) noexcept;

struct ManifestFile {
  std::string path;  // relative to the output directory
  std::string sha256;
  std::string stage;
};

struct RunManifest {
  std::string config_digest;
  std::vector<ManifestFile> files;
  std::map<std::string, StageStatus> stages;
  std::map<std::string, std::string> errors;
  std::map<std::string, double> timings;  // seconds

  bool ok() const;
  Json to_json() const;
};

/// Requested stages plus their prerequisites, in dependency order.
std::vector<std::string> expand_stages(const std::vector<std::string>& requested);

/// Runs the stages and writes manifest.json into cfg.output_dir. A stage
/// whose outputs already exist and carry the config digest is reused
/// unless opts.force is set. A failing stage is recorded, its dependents
/// are skipped and files from other stages stay in place.
RunManifest run_pipeline(const ExperimentConfig& cfg, const RunOptions& opts = {});

/// Every listed file exists, matches its sha256 and embeds the digest.
/// Returns a description of the first problem, or nothing.
std::optional<std::string> validate_manifest(const std::filesystem::path& output_dir);

/// The config digest a JSON or CSV artifact carries, if any.
std::optional<std::string> embedded_digest(const std::filesystem::path& file);

}  // namespace cimrel
