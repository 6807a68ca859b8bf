// Command-line surface for the confounder-aware recommendation pipeline:
//   ingest    raw interaction data -> canonical TSVs + manifest
//   simulate  synthetic confounded dataset -> canonical TSVs + ground truth
//   train     stage-one representation learning + stage-two recommender, per seed
//   eval      recompute ranking metrics from stored stage-two checkpoints
//   sweep     train across a grid of alignment weights, aggregate to CSV
//   report    aggregate run directories into a comparison table
#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "lcdr/checkpoint.hpp"
#include "lcdr/config.hpp"
#include "lcdr/dataio.hpp"
#include "lcdr/errors.hpp"
#include "lcdr/metrics.hpp"
#include "lcdr/recommender.hpp"
#include "lcdr/rng.hpp"
#include "lcdr/synthlab.hpp"
#include "lcdr/trainer.hpp"

namespace fs = std::filesystem;
using Json = nlohmann::ordered_json;
using namespace lcdr;

namespace {

using Clock = std::chrono::steady_clock;

double ms_between(Clock::time_point a, Clock::time_point b) {
  return std::chrono::duration<double, std::milli>(b - a).count();
}

std::string hash_hex(std::uint64_t h) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::string fmt_g(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%g", v);
  return buf;
}

void write_text_file(const fs::path& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write " + path.string());
  out << text;
}

std::uint64_t file_checksum(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot read " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return fnv1a64(ss.str());
}

void write_json_file(const fs::path& path, const Json& j) {
  write_text_file(path, j.dump(2) + "\n");
}

Json read_json_file(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open " + path.string());
  try {
    return Json::parse(in);
  } catch (const std::exception& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
}

// ---------------------------------------------------------------------------
// dataset assembly

InteractionDataset load_dataset_for_run(const RunConfig& cfg) {
  if (cfg.data_path.empty())
    throw ConfigError("config: [data] path is required for this command");
  if (cfg.data_format == "canonical") {
    const fs::path dir(cfg.data_path);
    return read_canonical((dir / "dataset.tsv").string(), (dir / "proxies.tsv").string(),
                          cfg.rating_threshold);
  }
  DatasetFormat fmt;
  if (cfg.data_format == "coat") {
    fmt = DatasetFormat::Coat;
  } else if (cfg.data_format == "triples") {
    fmt = DatasetFormat::Triples;
  } else if (cfg.data_format == "kuairand") {
    fmt = DatasetFormat::KuaiRand;
  } else {
    throw ConfigError("config: unknown data format '" + cfg.data_format + "'");
  }
  InteractionDataset ds = ingest(fmt, cfg.data_path, {});
  binarize(ds, cfg.rating_threshold);
  split(ds, cfg.val_fraction, cfg.split_seed);
  return ds;
}

VariantKind method_kind(const std::string& method) {
  if (method == "mf") return VariantKind::Mf;
  if (method == "mf_wf") return VariantKind::MfWf;
  if (method == "vae_ivae_concat") return VariantKind::VaeIvaeConcat;
  if (method == "lcdr_wo_lc") return VariantKind::LcdrWoLc;
  if (method == "lcdr") return VariantKind::Lcdr;
  throw ConfigError("unknown method '" + method + "'");
}

bool needs_stage_one(VariantKind k) {
  return k == VariantKind::Lcdr || k == VariantKind::LcdrWoLc ||
         k == VariantKind::VaeIvaeConcat;
}

// ---------------------------------------------------------------------------
// run-directory management

void claim_run_dir(const fs::path& dir, bool force) {
  const fs::path sentinel = dir / "config.snapshot";
  if (fs::exists(sentinel)) {
    if (!force)
      throw OutputConflict("run directory already initialized: " + dir.string() +
                           " (pass --force to overwrite)");
    fs::remove_all(dir / "checkpoints");
    fs::remove_all(dir / "logs");
    fs::remove_all(dir / "metrics");
    fs::remove(dir / "report.csv");
    fs::remove(sentinel);
  }
  fs::create_directories(dir / "checkpoints");
  fs::create_directories(dir / "logs");
  fs::create_directories(dir / "metrics");
}

void claim_manifest_dir(const fs::path& dir, bool force) {
  if (fs::exists(dir / "manifest.json") && !force)
    throw OutputConflict("output directory already holds a dataset: " + dir.string() +
                         " (pass --force to overwrite)");
  fs::create_directories(dir);
}

void write_config_snapshot(const fs::path& run_dir, const RunConfig& cfg) {
  const std::uint64_t hash = run_config_hash(cfg);
  write_text_file(run_dir / "config.snapshot",
                  canonical_config_text(cfg) + "# config_hash = " + hash_hex(hash) + "\n");
}

template <class Stats>
void write_jsonl(const fs::path& path, const std::vector<Stats>& log) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write " + path.string());
  for (const auto& s : log) out << s.to_json() << '\n';
}

// ---------------------------------------------------------------------------
// per-seed training pipeline

struct SeedOutcome {
  std::uint64_t seed = 0;
  EvalEntry test;
  double wall_ms = 0.0;
  double stage1_ms = 0.0;
  double stage2_ms = 0.0;
  int stage1_epochs = 0;
  int stage2_epochs = 0;
};

void write_seed_metrics(const fs::path& run_dir, const RunConfig& cfg, std::uint64_t hash,
                        const SeedOutcome& o) {
  Json j;
  j["version"] = 1;
  j["kind"] = "metrics";
  j["config_hash"] = hash_hex(hash);
  j["seed"] = o.seed;
  j["method"] = cfg.method;
  j["k"] = cfg.k;
  j["ndcg_at_k"] = o.test.ndcg;
  j["recall_at_k"] = o.test.recall;
  j["users_evaluated"] = o.test.users_evaluated;
  j["users_skipped"] = o.test.users_skipped;
  j["stage1_epochs"] = o.stage1_epochs;
  j["stage2_epochs"] = o.stage2_epochs;
  j["stage1_wall_ms"] = o.stage1_ms;
  j["stage2_wall_ms"] = o.stage2_ms;
  j["wall_ms"] = o.wall_ms;
  write_json_file(run_dir / "metrics" / ("seed_" + std::to_string(o.seed) + ".json"), j);
}

SeedOutcome run_single_seed(const RunConfig& cfg, const InteractionDataset& ds,
                            std::uint64_t seed, const fs::path& run_dir,
                            std::uint64_t hash) {
  const VariantKind kind = method_kind(cfg.method);
  const std::string tag = "seed_" + std::to_string(seed);
  SeedOutcome out;
  out.seed = seed;

  const auto t0 = Clock::now();
  std::optional<StageOneResult> stage1;
  if (needs_stage_one(kind)) {
    TrainConfig tc = cfg.stage1;
    tc.seed = seed;
    if (kind != VariantKind::Lcdr) tc.lambda = 0.0;  // ablations drop the alignment pull
    stage1 = train_representations(ds, tc, StageOneMode::Joint);

    StageOneCheckpoint ck;
    ck.seed = seed;
    ck.config_hash = hash;
    ck.mode = "joint";
    ck.ivae = stage1->ivae;
    ck.lcvae = stage1->lcvae;
    ck.reps = stage1->reps;
    save_stage_one((run_dir / "checkpoints" / (tag + "_stage1.json")).string(), ck);
    write_jsonl(run_dir / "logs" / (tag + "_stage1.jsonl"), stage1->log);
    out.stage1_epochs = stage1->epochs_run;
  }
  const auto t1 = Clock::now();
  out.stage1_ms = ms_between(t0, t1);

  RecConfig rc = cfg.stage2;
  rc.seed = seed;
  rc.k = cfg.k;
  const RepresentationTable* lcdr_reps =
      (kind == VariantKind::Lcdr && stage1) ? &stage1->reps : nullptr;
  const RepresentationTable* ablation_reps =
      ((kind == VariantKind::LcdrWoLc || kind == VariantKind::VaeIvaeConcat) && stage1)
          ? &stage1->reps
          : nullptr;
  const RecResult rec = train_variant(kind, ds, lcdr_reps, ablation_reps, rc);
  const auto t2 = Clock::now();
  out.stage2_ms = ms_between(t1, t2);
  out.stage2_epochs = rec.epochs_run;

  StageTwoCheckpoint c2;
  c2.seed = seed;
  c2.config_hash = hash;
  c2.method = cfg.method;
  c2.has_head = rec.has_head;
  c2.mf = rec.mf;
  c2.head = rec.head;
  c2.features = rec.features;
  save_stage_two((run_dir / "checkpoints" / (tag + "_stage2.json")).string(), c2);
  write_jsonl(run_dir / "logs" / (tag + "_stage2.jsonl"), rec.log);

  out.test = evaluate(rec.score_fn(), ds, SplitTag::Test, cfg.k);
  out.wall_ms = ms_between(t0, Clock::now());
  write_seed_metrics(run_dir, cfg, hash, out);
  return out;
}

std::vector<SeedOutcome> run_all_seeds(const RunConfig& cfg, const InteractionDataset& ds,
                                       const fs::path& run_dir, std::uint64_t hash) {
  const auto& seeds = cfg.seeds;
  std::vector<SeedOutcome> results(seeds.size());
  std::vector<std::exception_ptr> errors(seeds.size());
  std::atomic<std::size_t> next{0};

  const auto worker = [&] {
    while (true) {
      const std::size_t i = next.fetch_add(1);
      if (i >= seeds.size()) break;
      try {
        results[i] = run_single_seed(cfg, ds, seeds[i], run_dir, hash);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };

  const std::size_t n_threads =
      std::min<std::size_t>(static_cast<std::size_t>(std::max(1, cfg.threads)), seeds.size());
  if (n_threads <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(n_threads);
    for (std::size_t t = 0; t < n_threads; ++t) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }
  for (const auto& e : errors)
    if (e) std::rethrow_exception(e);
  return results;
}

MetricsReport aggregate_outcomes(const RunConfig& cfg,
                                 const std::vector<SeedOutcome>& outcomes) {
  MetricsReport rep;
  rep.method = cfg.method;
  rep.dataset = cfg.data_path;
  rep.k = cfg.k;
  for (const auto& o : outcomes) {
    EvalEntry e;
    e.ndcg = o.test.ndcg;
    e.recall = o.test.recall;
    e.users_evaluated = o.test.users_evaluated;
    e.users_skipped = o.test.users_skipped;
    rep.add(o.seed, e);
  }
  return rep;
}

// Shared by `train` and each sweep grid point.
MetricsReport execute_training_run(const RunConfig& cfg, const InteractionDataset& ds,
                                   bool force) {
  if (cfg.out_dir.empty())
    throw ConfigError("train: an output directory is required (--out or [run] out)");
  const fs::path run_dir(cfg.out_dir);
  claim_run_dir(run_dir, force);
  write_config_snapshot(run_dir, cfg);
  const std::uint64_t hash = run_config_hash(cfg);
  const std::vector<SeedOutcome> outcomes = run_all_seeds(cfg, ds, run_dir, hash);
  const MetricsReport rep = aggregate_outcomes(cfg, outcomes);
  write_text_file(run_dir / "report.csv",
                  "# config_hash = " + hash_hex(hash) + "\n" + rep.to_csv());
  return rep;
}

// ---------------------------------------------------------------------------
// commands

int do_ingest(const RunConfig& cfg, bool force) {
  if (cfg.data_format == "canonical")
    throw ConfigError("ingest: input is already canonical; point [data] format at a raw layout");
  if (cfg.out_dir.empty()) throw ConfigError("ingest: an output directory is required (--out)");

  InteractionDataset ds = load_dataset_for_run(cfg);

  const fs::path out(cfg.out_dir);
  claim_manifest_dir(out, force);
  const fs::path dataset_path = out / "dataset.tsv";
  const fs::path proxies_path = out / "proxies.tsv";
  write_canonical(ds, dataset_path.string(), proxies_path.string());

  Json manifest;
  manifest["version"] = 1;
  manifest["kind"] = "ingest";
  manifest["config_hash"] = hash_hex(run_config_hash(cfg));
  manifest["source"] = cfg.data_path;
  manifest["format"] = cfg.data_format;
  manifest["num_users"] = ds.num_users;
  manifest["num_items"] = ds.num_items;
  manifest["records_biased"] = ds.count(Origin::Biased);
  manifest["records_unbiased"] = ds.count(Origin::Unbiased);
  manifest["records_train"] = ds.count(SplitTag::Train);
  manifest["records_val"] = ds.count(SplitTag::Val);
  manifest["records_test"] = ds.count(SplitTag::Test);
  manifest["warnings"] = ds.warning_count;
  manifest["checksums"] = {{"dataset.tsv", hash_hex(file_checksum(dataset_path))},
                           {"proxies.tsv", hash_hex(file_checksum(proxies_path))}};
  write_json_file(out / "manifest.json", manifest);

  std::cout << "ingested " << cfg.data_path << ": " << ds.num_users << " users, "
            << ds.num_items << " items, " << ds.count(Origin::Biased) << " biased, "
            << ds.count(Origin::Unbiased) << " unbiased records -> " << out.string() << "\n";
  return 0;
}

int do_simulate(const RunConfig& cfg, bool force) {
  if (cfg.out_dir.empty())
    throw ConfigError("simulate: an output directory is required (--out)");
  const SynthResult res = generate(cfg.synth);

  const fs::path out(cfg.out_dir);
  claim_manifest_dir(out, force);
  const fs::path dataset_path = out / "dataset.tsv";
  const fs::path proxies_path = out / "proxies.tsv";
  const fs::path truth_path = out / "z_true.tsv";
  write_canonical(res.dataset, dataset_path.string(), proxies_path.string());
  write_ground_truth(truth_path.string(), res.truth.z_true);

  Json manifest;
  manifest["version"] = 1;
  manifest["kind"] = "simulate";
  manifest["config_hash"] = hash_hex(run_config_hash(cfg));
  manifest["num_users"] = res.dataset.num_users;
  manifest["num_items"] = res.dataset.num_items;
  manifest["records_biased"] = res.dataset.count(Origin::Biased);
  manifest["records_unbiased"] = res.dataset.count(Origin::Unbiased);
  manifest["latent_dim_true"] = cfg.synth.latent_dim_true;
  manifest["proxy_noise"] = cfg.synth.proxy_noise;
  manifest["exposure_intercept"] = res.exposure_intercept;
  manifest["checksums"] = {{"dataset.tsv", hash_hex(file_checksum(dataset_path))},
                           {"proxies.tsv", hash_hex(file_checksum(proxies_path))},
                           {"z_true.tsv", hash_hex(file_checksum(truth_path))}};
  write_json_file(out / "manifest.json", manifest);

  std::cout << "simulated " << res.dataset.num_users << " users x "
            << res.dataset.num_items << " items (" << res.dataset.count(Origin::Biased)
            << " biased, " << res.dataset.count(Origin::Unbiased) << " unbiased) -> "
            << out.string() << "\n";
  return 0;
}

int do_train(const RunConfig& cfg, bool force) {
  const InteractionDataset ds = load_dataset_for_run(cfg);
  const MetricsReport rep = execute_training_run(cfg, ds, force);
  std::cout << "method=" << cfg.method << " seeds=" << rep.per_seed.size()
            << " ndcg@" << cfg.k << "=" << fmt_g(rep.ndcg_mean()) << "±"
            << fmt_g(rep.ndcg_std()) << " recall@" << cfg.k << "="
            << fmt_g(rep.recall_mean()) << "±" << fmt_g(rep.recall_std()) << " -> "
            << cfg.out_dir << "\n";
  return 0;
}

int do_eval(const std::string& config_path, const std::string& seeds_spec,
            const std::string& out_flag) {
  if (out_flag.empty()) throw ConfigError("eval: --out must name an existing run directory");
  const fs::path run_dir(out_flag);
  RunConfig cfg;
  if (!config_path.empty()) {
    cfg = load_run_config(config_path);
  } else {
    const fs::path snapshot = run_dir / "config.snapshot";
    if (!fs::exists(snapshot))
      throw ConfigError("eval: no config given and no config.snapshot in " + run_dir.string());
    cfg = load_run_config(snapshot.string());
  }
  if (!seeds_spec.empty()) cfg.seeds = parse_seeds(seeds_spec);

  const InteractionDataset ds = load_dataset_for_run(cfg);
  fs::create_directories(run_dir / "metrics");

  MetricsReport rep;
  rep.method = cfg.method;
  rep.dataset = cfg.data_path;
  rep.k = cfg.k;
  std::uint64_t hash = 0;
  for (const std::uint64_t seed : cfg.seeds) {
    const fs::path ck_path =
        run_dir / "checkpoints" / ("seed_" + std::to_string(seed) + "_stage2.json");
    const StageTwoCheckpoint ck = load_stage_two(ck_path.string());
    hash = ck.config_hash;
    const ScoreFn score = [&ck](int u, int i) {
      if (!ck.has_head) return mf_score(ck.mf, u, i);
      return lcdr_score(ck.mf, ck.head, u, i,
                        std::span<const double>(ck.features[static_cast<std::size_t>(u)]));
    };
    const EvalEntry entry = evaluate(score, ds, SplitTag::Test, cfg.k);
    rep.add(seed, entry);

    SeedOutcome o;
    o.seed = seed;
    o.test = entry;
    write_seed_metrics(run_dir, cfg, ck.config_hash, o);
  }
  write_text_file(run_dir / "report.csv",
                  "# config_hash = " + hash_hex(hash) + "\n" + rep.to_csv());
  std::cout << "method=" << cfg.method << " seeds=" << rep.per_seed.size()
            << " ndcg@" << cfg.k << "=" << fmt_g(rep.ndcg_mean()) << "±"
            << fmt_g(rep.ndcg_std()) << " recall@" << cfg.k << "="
            << fmt_g(rep.recall_mean()) << "±" << fmt_g(rep.recall_std()) << "\n";
  return 0;
}

int do_sweep(RunConfig cfg, const std::string& values_spec, bool force) {
  if (cfg.out_dir.empty()) throw ConfigError("sweep: an output directory is required (--out)");

  std::vector<double> values;
  {
    std::stringstream ss(values_spec);
    std::string tok;
    while (std::getline(ss, tok, ',')) {
      const auto b = tok.find_first_not_of(" \t");
      if (b == std::string::npos) throw ConfigError("sweep: empty value in --values");
      const auto e = tok.find_last_not_of(" \t");
      tok = tok.substr(b, e - b + 1);
      try {
        std::size_t used = 0;
        values.push_back(std::stod(tok, &used));
        if (used != tok.size()) throw std::invalid_argument(tok);
      } catch (const std::exception&) {
        throw ConfigError("sweep: bad value '" + tok + "' in --values");
      }
    }
  }
  if (values.empty()) throw ConfigError("sweep: --values must list at least one number");
  for (std::size_t i = 0; i < values.size(); ++i)
    for (std::size_t j = i + 1; j < values.size(); ++j)
      if (values[i] == values[j])
        throw ConfigError("sweep: duplicate value " + fmt_g(values[i]) + " in --values");

  cfg.method = "lcdr";  // the sweep grid varies the alignment weight
  const fs::path root(cfg.out_dir);
  if (fs::exists(root / "sweep.csv") && !force)
    throw OutputConflict("sweep output already exists: " + (root / "sweep.csv").string() +
                         " (pass --force to overwrite)");
  fs::create_directories(root);

  const InteractionDataset ds = load_dataset_for_run(cfg);

  std::set<std::string> used_labels;
  std::string csv = "value,ndcg_mean,ndcg_std,recall_mean,recall_std,config_hash\n";
  std::cout << "value\tndcg_mean\tndcg_std\trecall_mean\trecall_std\n";
  for (const double v : values) {
    RunConfig sub = cfg;
    sub.stage1.lambda = v;
    std::string label = fmt_g(v);
    while (!used_labels.insert(label).second) label += "_";
    sub.out_dir = (root / ("lambda_" + label)).string();
    const MetricsReport rep = execute_training_run(sub, ds, force);
    char row[256];
    std::snprintf(row, sizeof(row), "%.17g,%.10f,%.10f,%.10f,%.10f,%s\n", v, rep.ndcg_mean(),
                  rep.ndcg_std(), rep.recall_mean(), rep.recall_std(),
                  hash_hex(run_config_hash(sub)).c_str());
    csv += row;
    std::cout << fmt_g(v) << '\t' << fmt_g(rep.ndcg_mean()) << '\t' << fmt_g(rep.ndcg_std())
              << '\t' << fmt_g(rep.recall_mean()) << '\t' << fmt_g(rep.recall_std()) << "\n";
  }
  write_text_file(root / "sweep.csv", csv);
  std::cout << "sweep table -> " << (root / "sweep.csv").string() << "\n";
  return 0;
}

// ---------------------------------------------------------------------------
// report aggregation

struct RunMetrics {
  std::string dir;
  std::string method;
  std::string config_hash;
  int k = 5;
  std::vector<std::uint64_t> seeds;
  std::vector<double> ndcg;
  std::vector<double> recall;

  double mean(const std::vector<double>& v) const {
    double s = 0.0;
    for (double x : v) s += x;
    return v.empty() ? 0.0 : s / static_cast<double>(v.size());
  }
  double stddev(const std::vector<double>& v) const {
    if (v.size() < 2) return 0.0;
    const double m = mean(v);
    double s = 0.0;
    for (double x : v) s += (x - m) * (x - m);
    return std::sqrt(s / static_cast<double>(v.size() - 1));
  }
};

RunMetrics load_run_metrics(const std::string& dir) {
  const fs::path metrics_dir = fs::path(dir) / "metrics";
  if (!fs::is_directory(metrics_dir))
    throw ConfigError("report: no metrics directory in " + dir);

  struct Row {
    std::uint64_t seed;
    double ndcg, recall;
  };
  std::vector<Row> rows;
  RunMetrics rm;
  rm.dir = dir;
  for (const auto& entry : fs::directory_iterator(metrics_dir)) {
    const std::string name = entry.path().filename().string();
    if (name.rfind("seed_", 0) != 0 || entry.path().extension() != ".json") continue;
    const Json j = read_json_file(entry.path());
    try {
      rows.push_back({j.at("seed").get<std::uint64_t>(), j.at("ndcg_at_k").get<double>(),
                      j.at("recall_at_k").get<double>()});
      rm.method = j.at("method").get<std::string>();
      rm.k = j.at("k").get<int>();
      rm.config_hash = j.at("config_hash").get<std::string>();
    } catch (const std::exception& e) {
      throw ParseError(entry.path().string() + ": " + e.what());
    }
  }
  if (rows.empty()) throw ConfigError("report: no per-seed metrics found in " + dir);
  std::sort(rows.begin(), rows.end(), [](const Row& a, const Row& b) { return a.seed < b.seed; });
  for (const auto& r : rows) {
    rm.seeds.push_back(r.seed);
    rm.ndcg.push_back(r.ndcg);
    rm.recall.push_back(r.recall);
  }
  return rm;
}

int do_report(std::vector<std::string> run_dirs, const std::string& baseline,
              const std::string& out_dir) {
  if (run_dirs.empty()) throw ConfigError("report: at least one run directory is required");
  std::string base_dir = baseline.empty() ? run_dirs.front() : baseline;
  if (std::find(run_dirs.begin(), run_dirs.end(), base_dir) == run_dirs.end())
    run_dirs.insert(run_dirs.begin(), base_dir);

  std::vector<RunMetrics> runs;
  runs.reserve(run_dirs.size());
  for (const auto& d : run_dirs) runs.push_back(load_run_metrics(d));
  const RunMetrics* base = nullptr;
  for (const auto& r : runs)
    if (r.dir == base_dir) base = &r;

  for (const auto& r : runs)
    if (r.seeds != base->seeds)
      throw ConfigError("report: seed sets differ between " + base->dir + " and " + r.dir);

  const bool with_p = runs.size() > 1;
  char buf[256];

  std::string md;
  md += "| method | run | ndcg@" + std::to_string(base->k) + " | recall@" +
        std::to_string(base->k) + " |";
  if (with_p) md += " p_ndcg | p_recall |";
  md += "\n|---|---|---|---|";
  if (with_p) md += "---|---|";
  md += "\n";

  std::string csv = "method,run,k,n_seeds,ndcg_mean,ndcg_std,recall_mean,recall_std";
  if (with_p) csv += ",p_ndcg,p_recall";
  csv += ",config_hash\n";

  for (const auto& r : runs) {
    std::snprintf(buf, sizeof(buf), "| %s | %s | %.4f ± %.4f | %.4f ± %.4f |",
                  r.method.c_str(), r.dir.c_str(), r.mean(r.ndcg), r.stddev(r.ndcg),
                  r.mean(r.recall), r.stddev(r.recall));
    md += buf;
    std::string p_ndcg = "-", p_recall = "-";
    if (with_p && &r != base) {
      const TTestResult tn = paired_t_test(r.ndcg, base->ndcg);
      const TTestResult tr = paired_t_test(r.recall, base->recall);
      std::snprintf(buf, sizeof(buf), "%.6g", tn.p);
      p_ndcg = buf;
      std::snprintf(buf, sizeof(buf), "%.6g", tr.p);
      p_recall = buf;
    }
    if (with_p) md += " " + p_ndcg + " | " + p_recall + " |";
    md += "\n";

    std::snprintf(buf, sizeof(buf), "%s,%s,%d,%zu,%.10f,%.10f,%.10f,%.10f", r.method.c_str(),
                  r.dir.c_str(), r.k, r.seeds.size(), r.mean(r.ndcg), r.stddev(r.ndcg),
                  r.mean(r.recall), r.stddev(r.recall));
    csv += buf;
    if (with_p) csv += "," + p_ndcg + "," + p_recall;
    csv += "," + r.config_hash + "\n";
  }

  std::cout << md;
  if (!out_dir.empty()) {
    fs::create_directories(out_dir);
    write_text_file(fs::path(out_dir) / "report.md", md);
    write_text_file(fs::path(out_dir) / "report.csv", csv);
    std::cout << "report -> " << out_dir << "\n";
  }
  return 0;
}

RunConfig resolve_config(const std::string& config_path, const std::string& seeds_spec,
                         const std::string& out_flag, int threads_flag) {
  RunConfig cfg = config_path.empty() ? RunConfig{} : load_run_config(config_path);
  if (!seeds_spec.empty()) cfg.seeds = parse_seeds(seeds_spec);
  if (!out_flag.empty()) cfg.out_dir = out_flag;
  if (threads_flag > 0) cfg.threads = threads_flag;
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"confounder-aware recommendation pipeline"};
  app.require_subcommand(1);

  std::string config_path, seeds_spec, out_flag, values_spec, baseline;
  std::vector<std::string> run_dirs;
  int threads_flag = 0;
  bool force = false;

  const auto add_common = [&](CLI::App* sub, bool with_seeds) {
    sub->add_option("--config", config_path, "run configuration file");
    sub->add_option("--out", out_flag, "output directory (overrides [run] out)");
    sub->add_flag("--force", force, "overwrite existing outputs");
    sub->add_option("--threads", threads_flag, "parallel seed workers (overrides [run] threads)");
    if (with_seeds) sub->add_option("--seeds", seeds_spec, "seed list, e.g. 0..9 or 1,4,9");
  };

  CLI::App* c_ingest = app.add_subcommand("ingest", "convert raw data to canonical TSVs");
  add_common(c_ingest, false);
  c_ingest->get_option("--config")->required();

  CLI::App* c_train = app.add_subcommand("train", "run the two-stage pipeline per seed");
  add_common(c_train, true);
  c_train->get_option("--config")->required();

  CLI::App* c_eval = app.add_subcommand("eval", "recompute metrics from stored checkpoints");
  add_common(c_eval, true);

  CLI::App* c_sweep = app.add_subcommand("sweep", "train across alignment-weight values");
  add_common(c_sweep, true);
  c_sweep->get_option("--config")->required();
  c_sweep->add_option("--values", values_spec, "comma-separated alignment weights")->required();

  CLI::App* c_report = app.add_subcommand("report", "aggregate run directories into a table");
  c_report->add_option("runs", run_dirs, "run directories to aggregate");
  c_report->add_option("--baseline", baseline, "baseline run directory for p-values");
  c_report->add_option("--out", out_flag, "directory for report.md / report.csv");

  CLI::App* c_simulate = app.add_subcommand("simulate", "generate a synthetic dataset");
  add_common(c_simulate, false);
  c_simulate->get_option("--config")->required();

  try {
    app.parse(argc, argv);
    if (app.got_subcommand(c_ingest))
      return do_ingest(resolve_config(config_path, "", out_flag, threads_flag), force);
    if (app.got_subcommand(c_train))
      return do_train(resolve_config(config_path, seeds_spec, out_flag, threads_flag), force);
    if (app.got_subcommand(c_eval)) return do_eval(config_path, seeds_spec, out_flag);
    if (app.got_subcommand(c_sweep))
      return do_sweep(resolve_config(config_path, seeds_spec, out_flag, threads_flag),
                      values_spec, force);
    if (app.got_subcommand(c_report)) return do_report(run_dirs, baseline, out_flag);
    if (app.got_subcommand(c_simulate))
      return do_simulate(resolve_config(config_path, "", out_flag, threads_flag), force);
    return exit_input_error;
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : exit_input_error;
  } catch (const OutputConflict& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_output_conflict;
  } catch (const NumericalError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_numerical_abort;
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_input_error;
  } catch (const ParseError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_input_error;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
