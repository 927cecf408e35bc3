#include "cimrel/pipeline.hpp"

#include <openssl/opensslv.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <functional>
#include <set>

#include "cimrel/checkpoint.hpp"
#include "cimrel/datasets.hpp"
#include "cimrel/error.hpp"
#include "cimrel/eval_mc.hpp"
#include "cimrel/rng.hpp"
#include "cimrel/swim.hpp"

namespace cimrel {

namespace fs = std::filesystem;

namespace {

void check_keys(const Json& j, std::string_view section, std::initializer_list<std::string_view> allowed) {
  if (!j.is_object()) throw FormatError("config: '" + std::string(section) + "' must be an object");
  for (const auto& [key, _] : j.items()) {
    if (std::find(allowed.begin(), allowed.end(), key) == allowed.end()) {
      std::string list;
      for (auto a : allowed) list += (list.empty() ? "" : ", ") + std::string(a);
      throw FormatError("config: unknown key '" + key + "' in " + std::string(section) + " (allowed: " + list + ")");
    }
  }
}

Json section(const Json& j, const char* name) {
  return j.contains(name) ? j.at(name) : Json::object();
}

template <typename T>
T get_or(const Json& j, const char* key, T fallback) {
  if (!j.contains(key)) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const nlohmann::json::exception&) {
    throw FormatError(std::string("config: key '") + key + "' has the wrong type");
  }
}

std::size_t positive_count(const Json& j, const char* key, std::size_t fallback, const char* where) {
  if (j.contains(key) && !(j.at(key).is_number_integer() && j.at(key).get<std::int64_t>() >= 1)) {
    throw FormatError(std::string("config: ") + where + "." + key + " must be a positive integer");
  }
  const auto v = get_or<std::size_t>(j, key, fallback);
  if (v < 1) throw FormatError(std::string("config: ") + where + "." + key + " must be >= 1");
  return v;
}

}  // namespace

// ---------------------------------------------------------------------------
// ExperimentConfig

ExperimentConfig ExperimentConfig::from_json(const Json& j, const fs::path& base_dir,
                                             std::optional<std::uint64_t> seed_override) {
  check_keys(j, "config",
             {"master_seed", "stages", "output_dir", "dataset", "model", "train", "variation", "mc", "attack", "swim",
              "trice", "bench"});
  ExperimentConfig c;
  c.master_seed = seed_override ? *seed_override : get_or<std::uint64_t>(j, "master_seed", 0);
  const std::uint64_t m = c.master_seed;

  if (j.contains("stages")) {
    c.stages = get_or<std::vector<std::string>>(j, "stages", {});
    if (c.stages.empty()) throw FormatError("config: stages must not be empty");
    for (const auto& s : c.stages) {
      if (std::ranges::find(kStageOrder, s) == kStageOrder.end()) {
        throw FormatError("config: unknown stage '" + s + "' (known: train, mc, attack, swim, trice, bench)");
      }
    }
  }
  if (j.contains("output_dir")) c.output_dir = get_or<std::string>(j, "output_dir", "out");

  const Json d = section(j, "dataset");
  check_keys(d, "dataset", {"kind", "n", "noise", "seed", "csv", "header", "num_classes"});
  c.dataset.seed = get_or<std::uint64_t>(d, "seed", m);
  if (d.contains("csv")) {
    fs::path p = get_or<std::string>(d, "csv", "");
    if (p.is_relative() && !base_dir.empty()) p = base_dir / p;
    if (!fs::is_regular_file(p)) throw FormatError("config: dataset csv '" + p.string() + "' does not exist");
    c.dataset.csv = p;
    c.dataset.kind = "csv";
    c.dataset.header = get_or<bool>(d, "header", false);
    c.dataset.num_classes = get_or<std::size_t>(d, "num_classes", 0);
    c.dataset.csv_sha256 = sha256_file(p);
  } else {
    c.dataset.kind = get_or<std::string>(d, "kind", c.dataset.kind);
    if (c.dataset.kind != "blobs" && c.dataset.kind != "moons" && c.dataset.kind != "xor_grid") {
      throw FormatError("config: unknown dataset kind '" + c.dataset.kind + "' (known: blobs, moons, xor_grid)");
    }
    c.dataset.n = positive_count(d, "n", c.dataset.n, "dataset");
    if (c.dataset.n < 4) throw FormatError("config: dataset.n must be >= 4");
    c.dataset.noise = get_or<double>(d, "noise", c.dataset.noise);
  }

  const Json mo = section(j, "model");
  check_keys(mo, "model", {"dims", "hidden_activation", "init_seed"});
  c.model.dims = get_or<std::vector<std::size_t>>(mo, "dims", c.model.dims);
  if (c.model.dims.size() < 2 || std::ranges::find(c.model.dims, 0U) != c.model.dims.end()) {
    throw FormatError("config: model.dims needs >= 2 positive entries");
  }
  c.model.hidden = parse_activation(get_or<std::string>(mo, "hidden_activation", "relu"));
  c.model.init_seed = get_or<std::uint64_t>(mo, "init_seed", m);

  const Json t = section(j, "train");
  check_keys(t, "train", {"epochs", "lr", "momentum", "batch_size", "seed"});
  c.train.epochs = positive_count(t, "epochs", c.train.epochs, "train");
  c.train.lr = get_or<double>(t, "lr", c.train.lr);
  c.train.momentum = get_or<double>(t, "momentum", c.train.momentum);
  c.train.batch_size = positive_count(t, "batch_size", c.train.batch_size, "train");
  c.train.seed = get_or<std::uint64_t>(t, "seed", m);
  if (!(c.train.lr >= 0.0) || !(c.train.momentum >= 0.0 && c.train.momentum < 1.0)) {
    throw FormatError("config: train.lr must be >= 0 and momentum in [0, 1)");
  }

  const Json v = section(j, "variation");
  check_keys(v, "variation", {"sigma", "th_g", "th_wv", "verify_cost_V", "bits"});
  try {
    c.variation = VariationModel::from_json(v);
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("config: variation: ") + e.what());
  }

  const Json mc = section(j, "mc");
  check_keys(mc, "mc", {"n_runs", "seed"});
  c.mc_runs = positive_count(mc, "n_runs", c.mc_runs, "mc");
  c.mc_seed = get_or<std::uint64_t>(mc, "seed", stream_seed(m, 1));

  const Json a = section(j, "attack");
  check_keys(a, "attack", {"steps", "step_size", "restarts", "polish_passes", "seed", "n_mc"});
  Json a_cfg = a;
  a_cfg.erase("n_mc");
  if (!a_cfg.contains("seed")) a_cfg["seed"] = stream_seed(m, 2);
  try {
    c.attack = AttackConfig::from_json(a_cfg);
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("config: attack: ") + e.what());
  }
  c.attack_n_mc = positive_count(a, "n_mc", c.attack_n_mc, "attack");
  if (c.attack_n_mc < 100) throw FormatError("config: attack.n_mc must be >= 100");

  const Json s = section(j, "swim");
  check_keys(s, "swim",
             {"budget_grid", "target_drop", "n_mc", "group_size", "compare_budget", "compare_seeds", "compare_n_mc",
              "seed"});
  c.swim.budget_grid = get_or<std::vector<double>>(s, "budget_grid", c.swim.budget_grid);
  c.swim.target_drop = get_or<double>(s, "target_drop", c.swim.target_drop);
  c.swim.n_mc = positive_count(s, "n_mc", c.swim.n_mc, "swim");
  c.swim.group_size = positive_count(s, "group_size", c.swim.group_size, "swim");
  c.swim.compare_budget = get_or<double>(s, "compare_budget", c.swim.compare_budget);
  c.swim.compare_seeds = positive_count(s, "compare_seeds", c.swim.compare_seeds, "swim");
  c.swim.compare_n_mc = positive_count(s, "compare_n_mc", c.swim.compare_n_mc, "swim");
  c.swim.seed = get_or<std::uint64_t>(s, "seed", stream_seed(m, 3));
  if (c.swim.compare_seeds < 20) throw FormatError("config: swim.compare_seeds must be >= 20");
  if (!(c.swim.compare_budget >= 0.0 && c.swim.compare_budget <= 1.0)) {
    throw FormatError("config: swim.compare_budget must lie in [0, 1]");
  }

  const Json tr = section(j, "trice");
  check_keys(tr, "trice", {"sigma_train", "censor_T"});
  TriceConfig tc = TriceConfig::from_json(tr);
  c.trice_sigma = tr.contains("sigma_train") ? tc.sigma_train : c.trice_sigma;
  c.trice_censor_T = tr.contains("censor_T") ? tc.censor_T : c.trice_censor_T;
  if (!(c.trice_sigma >= 0.0)) throw FormatError("config: trice.sigma_train must be >= 0");

  const Json b = section(j, "bench");
  check_keys(b, "bench", {"n_runs", "k", "seed"});
  c.bench.n_runs = positive_count(b, "n_runs", c.bench.n_runs, "bench");
  c.bench.k = get_or<std::vector<double>>(b, "k", c.bench.k);
  c.bench.seed = get_or<std::uint64_t>(b, "seed", stream_seed(m, 5));
  for (double k : c.bench.k) {
    if (!(k > 0.0 && k <= 100.0)) throw FormatError("config: bench.k entries must lie in (0, 100]");
  }
  return c;
}

ExperimentConfig ExperimentConfig::load(const fs::path& path, std::optional<std::uint64_t> seed_override) {
  return from_json(read_json_file(path), path.parent_path(), seed_override);
}

Json ExperimentConfig::to_json() const {
  Json d;
  if (!dataset.csv.empty()) {
    d = Json{{"csv", dataset.csv.string()},
             {"csv_sha256", dataset.csv_sha256},
             {"header", dataset.header},
             {"num_classes", dataset.num_classes}};
  } else {
    d = Json{{"kind", dataset.kind}, {"n", dataset.n}, {"noise", dataset.noise}, {"seed", dataset.seed}};
  }
  Json attack_json = attack.to_json();
  attack_json["n_mc"] = attack_n_mc;
  return Json{
      {"master_seed", master_seed},
      {"stages", stages},
      {"output_dir", output_dir.string()},
      {"dataset", d},
      {"model",
       {{"dims", model.dims}, {"hidden_activation", std::string(to_string(model.hidden))}, {"init_seed", model.init_seed}}},
      {"train",
       {{"epochs", train.epochs},
        {"lr", train.lr},
        {"momentum", train.momentum},
        {"batch_size", train.batch_size},
        {"seed", train.seed}}},
      {"variation", variation.to_json()},
      {"mc", {{"n_runs", mc_runs}, {"seed", mc_seed}}},
      {"attack", attack_json},
      {"swim",
       {{"budget_grid", swim.budget_grid},
        {"target_drop", swim.target_drop},
        {"n_mc", swim.n_mc},
        {"group_size", swim.group_size},
        {"compare_budget", swim.compare_budget},
        {"compare_seeds", swim.compare_seeds},
        {"compare_n_mc", swim.compare_n_mc},
        {"seed", swim.seed}}},
      {"trice",
       {{"sigma_train", trice_sigma},
        {"censor_T", std::isfinite(trice_censor_T) ? Json(trice_censor_T) : Json(nullptr)}}},
      {"bench", {{"n_runs", bench.n_runs}, {"k", bench.k}, {"seed", bench.seed}}},
  };
}

std::string ExperimentConfig::digest() const {
  Json j = to_json();
  j.erase("output_dir");
  j.erase("stages");
  j["dataset"].erase("csv");  // content hash stays
  return sha256_hex(dump_json(j));
}

// ---------------------------------------------------------------------------
// Manifest

std::string_view to_string(StageStatus s) noexcept {
  switch (s) {
    case StageStatus::ran:
      return "ran";
    case StageStatus::cached:
      return "cached";
    case StageStatus::failed:
      return "failed";
    case StageStatus::skipped:
      return "skipped";
  }
  return "failed";
}

bool RunManifest::ok() const {
  return std::ranges::none_of(stages, [](const auto& kv) {
    return kv.second == StageStatus::failed || kv.second == StageStatus::skipped;
  });
}

Json RunManifest::to_json() const {
  Json f = Json::array();
  for (const auto& file : files) f.push_back(Json{{"path", file.path}, {"sha256", file.sha256}, {"stage", file.stage}});
  Json st = Json::object();
  for (const auto& [name, s] : stages) st[name] = std::string(to_string(s));
  Json tm = Json::object();
  for (const auto& [name, secs] : timings) tm[name] = secs;
  Json j{{"config_digest", config_digest},
         {"files", f},
         {"stages", st},
         {"timings", tm},
         {"versions",
          {{"cimrel", kVersion},
           {"nlohmann_json", std::to_string(NLOHMANN_JSON_VERSION_MAJOR) + "." +
                                 std::to_string(NLOHMANN_JSON_VERSION_MINOR) + "." +
                                 std::to_string(NLOHMANN_JSON_VERSION_PATCH)},
           {"openssl", OPENSSL_VERSION_TEXT}}}};
  if (!errors.empty()) j["errors"] = errors;
  return j;
}

std::vector<std::string> expand_stages(const std::vector<std::string>& requested) {
  static const std::map<std::string, std::vector<std::string>> deps{
      {"train", {}}, {"mc", {"train"}}, {"attack", {"train"}}, {"swim", {"train"}}, {"trice", {}},
      {"bench", {"train", "trice"}}};
  std::set<std::string> wanted;
  for (const auto& s : requested) {
    const auto it = deps.find(s);
    if (it == deps.end()) throw Error("unknown stage '" + s + "'");
    wanted.insert(s);
    wanted.insert(it->second.begin(), it->second.end());
  }
  std::vector<std::string> out;
  for (const auto& s : kStageOrder) {
    if (wanted.contains(s)) out.push_back(s);
  }
  return out;
}

std::optional<std::string> embedded_digest(const fs::path& file) {
  if (!fs::is_regular_file(file)) return std::nullopt;
  const std::string text = read_text_file(file);
  if (file.extension() == ".csv") {
    constexpr std::string_view prefix = "# config_digest=";
    if (!text.starts_with(prefix)) return std::nullopt;
    const auto end = text.find('\n');
    return text.substr(prefix.size(), end == std::string::npos ? std::string::npos : end - prefix.size());
  }
  try {
    const Json j = Json::parse(text);
    if (j.contains("config_digest") && j["config_digest"].is_string()) return j["config_digest"].get<std::string>();
    if (j.contains("meta") && j["meta"].contains("config_digest")) return j["meta"]["config_digest"].get<std::string>();
  } catch (const nlohmann::json::exception&) {
  }
  return std::nullopt;
}

std::optional<std::string> validate_manifest(const fs::path& output_dir) {
  const fs::path mpath = output_dir / "manifest.json";
  if (!fs::is_regular_file(mpath)) return "missing " + mpath.string();
  const Json m = read_json_file(mpath);
  const std::string digest = m.at("config_digest").get<std::string>();
  for (const auto& f : m.at("files")) {
    const fs::path p = output_dir / f.at("path").get<std::string>();
    if (!fs::is_regular_file(p)) return "listed file missing: " + p.string();
    if (sha256_file(p) != f.at("sha256").get<std::string>()) return "sha256 mismatch: " + p.string();
    if (embedded_digest(p) != digest) return "config digest missing or stale: " + p.string();
  }
  return std::nullopt;
}

// ---------------------------------------------------------------------------
// Stages

namespace {

struct Context {
  const ExperimentConfig& cfg;
  const RunOptions& opts;
  std::string digest;
  fs::path out;
  std::optional<Dataset> data;
  std::optional<Mlp> trained;
  std::optional<Mlp> trice_model;
  std::optional<Mlp> gauss_model;

  const Dataset& dataset() {
    if (!data) {
      const auto& d = cfg.dataset;
      data = d.csv.empty() ? gen_dataset(d.kind, d.n, d.noise, d.seed)
                           : load_csv_dataset(d.csv, CsvOptions{d.header, d.num_classes});
    }
    return *data;
  }

  DeviceMapping deploy(const Mlp& m) const { return map_to_device(m, QuantizationSpec{cfg.variation.bits}); }

  void write_csv(const std::string& name, const std::string& body) const {
    write_text_file(out / name, "# config_digest=" + digest + "\n" + body);
  }

  void write_json(const std::string& name, Json j) const {
    j["config_digest"] = digest;
    write_text_file(out / name, dump_json(j));
  }

  Json meta(const TrainConfig& tc, const TrainResult& r) {
    return Json{{"seed", tc.seed},
                {"epochs", tc.epochs},
                {"lr", tc.lr},
                {"momentum", tc.momentum},
                {"batch_size", tc.batch_size},
                {"loss_history", r.loss_history},
                {"train_accuracy", accuracy(r.model, dataset())},
                {"config_digest", digest}};
  }
};

struct Stage {
  std::vector<std::string> outputs;
  std::function<void(Context&)> run;
  std::function<void(Context&)> load;  // restore in-memory results from cache
};

Mlp initial_model(const ExperimentConfig& cfg) {
  if (cfg.model.dims.front() == 0) throw ShapeError("model dims must be positive");
  return Mlp::initialize(cfg.model.dims, cfg.model.init_seed, cfg.model.hidden);
}

void check_model_fits(const ExperimentConfig& cfg, const Dataset& data) {
  if (cfg.model.dims.front() != data.dim()) {
    throw ShapeError("model input width " + std::to_string(cfg.model.dims.front()) + " does not match dataset width " +
                     std::to_string(data.dim()));
  }
  if (cfg.model.dims.back() < data.num_classes) {
    throw ShapeError("model has " + std::to_string(cfg.model.dims.back()) + " outputs but the dataset has " +
                     std::to_string(data.num_classes) + " classes");
  }
}

std::map<std::string, Stage> make_stages() {
  std::map<std::string, Stage> s;

  s["train"] = Stage{
      {"model.json"},
      [](Context& c) {
        check_model_fits(c.cfg, c.dataset());
        const TrainResult r = train(initial_model(c.cfg), c.dataset(), c.cfg.train);
        save_checkpoint(c.out / "model.json", r.model, c.meta(c.cfg.train, r));
        c.trained = r.model;
      },
      [](Context& c) { c.trained = load_checkpoint(c.out / "model.json"); }};

  s["mc"] = Stage{
      {"mc_trials.csv", "mc_summary.json"},
      [](Context& c) {
        const DeviceMapping dev = c.deploy(*c.trained);
        const auto dist = run_monte_carlo(dev, c.dataset(), c.cfg.variation,
                                          VerifiedMask::none(dev.model.parameter_count()), c.cfg.mc_runs,
                                          c.cfg.mc_seed, c.opts.jobs);
        c.write_csv("mc_trials.csv", trials_csv(dist));
        Json j = summary_json(dist);
        j["clean_accuracy"] = accuracy(dev.model, c.dataset());
        c.write_json("mc_summary.json", j);
      },
      {}};

  s["attack"] = Stage{
      {"gap.json", "attack_delta_w.json"},
      [](Context& c) {
        const DeviceMapping dev = c.deploy(*c.trained);
        const GapReport rep = mc_gap_report(dev, c.dataset(), c.cfg.variation, c.cfg.attack, c.cfg.attack_n_mc,
                                            c.cfg.mc_seed, c.opts.jobs);
        save_parameter_file(c.out / "attack_delta_w.json", dev.model, rep.attack.delta_w,
                            Json{{"kind", "delta_w"}, {"th_g", c.cfg.variation.th_g}, {"config_digest", c.digest}});
        Json j = gap_json(rep, c.cfg.variation, c.cfg.attack);
        j["delta_w_file"] = "attack_delta_w.json";
        j["loss_trace"] = rep.attack.loss_trace;
        c.write_json("gap.json", j);
      },
      {}};

  s["swim"] = Stage{
      {"swim_curve.csv", "swim_plan.json", "swim_compare.json"},
      [](Context& c) {
        const DeviceMapping dev = c.deploy(*c.trained);
        TargetSearchOptions o;
        o.budget_grid = c.cfg.swim.budget_grid;
        o.n_mc = c.cfg.swim.n_mc;
        o.master_seed = c.cfg.swim.seed;
        o.group_size = c.cfg.swim.group_size;
        o.jobs = c.opts.jobs;
        const TargetSearch ts = meet_accuracy_target(dev, c.dataset(), c.cfg.variation, c.cfg.swim.target_drop, o);
        c.write_csv("swim_curve.csv", curve_csv(ts.curve));
        Json plan = ts.plan ? plan_json(*ts.plan) : Json::object();
        plan["feasible"] = ts.feasible;
        plan["clean_accuracy"] = ts.clean_accuracy;
        plan["target_drop"] = ts.target_drop;
        c.write_json("swim_plan.json", plan);
        const auto cmp = swim_vs_random(dev, c.dataset(), c.cfg.variation, c.cfg.swim.compare_budget,
                                        c.cfg.swim.compare_seeds, c.cfg.swim.compare_n_mc,
                                        stream_seed(c.cfg.swim.seed, 1), c.opts.jobs);
        c.write_json("swim_compare.json", comparison_json(cmp));
      },
      {}};

  s["trice"] = Stage{
      {"trice_model.json", "gauss_model.json"},
      [](Context& c) {
        check_model_fits(c.cfg, c.dataset());
        const Mlp init = initial_model(c.cfg);
        TriceConfig tc;
        tc.sigma_train = c.cfg.trice_sigma;
        tc.censor_T = c.cfg.trice_censor_T;
        tc.train = c.cfg.train;
        tc.quant = QuantizationSpec{c.cfg.variation.bits};
        const TrainResult censored = trice_train(init, c.dataset(), tc);
        Json meta = c.meta(tc.train, censored);
        meta["trice"] = tc.to_json();
        save_checkpoint(c.out / "trice_model.json", censored.model, meta);
        c.trice_model = censored.model;

        tc.censor_T = kNoCensoring;
        const TrainResult gauss = trice_train(init, c.dataset(), tc);
        meta = c.meta(tc.train, gauss);
        meta["trice"] = tc.to_json();
        save_checkpoint(c.out / "gauss_model.json", gauss.model, meta);
        c.gauss_model = gauss.model;
      },
      [](Context& c) {
        c.trice_model = load_checkpoint(c.out / "trice_model.json");
        c.gauss_model = load_checkpoint(c.out / "gauss_model.json");
      }};

  s["bench"] = Stage{
      {"benchmark.csv"},
      [](Context& c) {
        const std::vector<NamedModel> models{{"vanilla", c.deploy(*c.trained)},
                                             {"gauss", c.deploy(*c.gauss_model)},
                                             {"trice", c.deploy(*c.trice_model)}};
        const auto table =
            kpp_benchmark(models, c.dataset(), c.cfg.variation, c.cfg.bench.n_runs, c.cfg.bench.k, c.cfg.bench.seed,
                          c.opts.jobs);
        c.write_csv("benchmark.csv", benchmark_csv(table));
      },
      {}};
  return s;
}

}  // namespace

RunManifest run_pipeline(const ExperimentConfig& cfg, const RunOptions& opts) {
  Context ctx{cfg, opts, cfg.digest(), cfg.output_dir, {}, {}, {}, {}};
  fs::create_directories(ctx.out);
  RunManifest manifest;
  manifest.config_digest = ctx.digest;

  Json resolved = cfg.to_json();
  resolved.erase("output_dir");  // keeps artifacts independent of where they are written
  ctx.write_json("config.json", resolved);
  manifest.files.push_back({"config.json", sha256_file(ctx.out / "config.json"), "config"});

  const auto stages = make_stages();
  static const std::map<std::string, std::vector<std::string>> deps{
      {"mc", {"train"}}, {"attack", {"train"}}, {"swim", {"train"}}, {"bench", {"train", "trice"}}};

  for (const auto& name : expand_stages(cfg.stages)) {
    const Stage& stage = stages.at(name);
    if (const auto it = deps.find(name); it != deps.end()) {
      const bool blocked = std::ranges::any_of(it->second, [&](const std::string& d) {
        const auto st = manifest.stages.find(d);
        return st == manifest.stages.end() || st->second == StageStatus::failed || st->second == StageStatus::skipped;
      });
      if (blocked) {
        manifest.stages[name] = StageStatus::skipped;
        manifest.errors[name] = "prerequisite stage failed";
        continue;
      }
    }

    const auto start = std::chrono::steady_clock::now();
    const bool cached = !opts.force && std::ranges::all_of(stage.outputs, [&](const std::string& f) {
      return embedded_digest(ctx.out / f) == ctx.digest;
    });
    try {
      if (cached) {
        if (stage.load) stage.load(ctx);
        manifest.stages[name] = StageStatus::cached;
      } else {
        stage.run(ctx);
        manifest.stages[name] = StageStatus::ran;
      }
      for (const auto& f : stage.outputs) manifest.files.push_back({f, sha256_file(ctx.out / f), name});
    } catch (const std::exception& e) {
      manifest.stages[name] = StageStatus::failed;
      manifest.errors[name] = e.what();
    }
    manifest.timings[name] =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  }

  write_text_file(ctx.out / "manifest.json", dump_json(manifest.to_json()));
  return manifest;
}

}  // namespace cimrel
