#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <fstream>
#include <sstream>

#include "lcdr/checkpoint.hpp"
#include "lcdr/config.hpp"
#include "lcdr/errors.hpp"
#include "lcdr/rng.hpp"
#include "test_util.hpp"

using namespace lcdr;
using testutil::TempDir;

namespace {

std::string slurp(const std::string& path) {
  std::ifstream in(path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

bool same_config(const RunConfig& a, const RunConfig& b) {
  return canonical_config_text(a) == canonical_config_text(b);
}

}  // namespace

TEST_CASE("defaults survive an empty config") {
  const RunConfig cfg = parse_run_config("", "<test>");
  CHECK(cfg.method == "lcdr");
  CHECK(cfg.seeds.size() == 10);
  CHECK(cfg.stage1.latent_dim == 4);
  CHECK(cfg.stage1.lambda == 0.9);
  CHECK(cfg.stage2.d_mf == 32);
  CHECK(cfg.k == 5);
  CHECK(cfg.stage2.k == 5);
}

TEST_CASE("sections, comments, and overrides parse") {
  const std::string text = R"(
# pipeline settings
[data]
path = /tmp/data   # trailing comment
format = coat
threshold = 4
val_fraction = 0.25

[stage1]
latent_dim = 8
lambda = 0.5

[run]
method = mf_wf
seeds = 0..3,7
threads = 2
k = 10
)";
  const RunConfig cfg = parse_run_config(text, "<test>");
  CHECK(cfg.data_path == "/tmp/data");
  CHECK(cfg.data_format == "coat");
  CHECK(cfg.rating_threshold == 4.0);
  CHECK(cfg.val_fraction == 0.25);
  CHECK(cfg.stage1.latent_dim == 8);
  CHECK(cfg.stage1.lambda == 0.5);
  CHECK(cfg.method == "mf_wf");
  CHECK(cfg.seeds == std::vector<std::uint64_t>{0, 1, 2, 3, 7});
  CHECK(cfg.threads == 2);
  CHECK(cfg.k == 10);
  CHECK(cfg.stage2.k == 10);
}

TEST_CASE("seed specs parse lists and ranges") {
  CHECK(parse_seeds("5") == std::vector<std::uint64_t>{5});
  CHECK(parse_seeds("1,3,2") == std::vector<std::uint64_t>{1, 3, 2});
  CHECK(parse_seeds("0..2") == std::vector<std::uint64_t>{0, 1, 2});
  CHECK(parse_seeds(" 4 , 6..7 ") == std::vector<std::uint64_t>{4, 6, 7});
  CHECK_THROWS_AS(parse_seeds(""), ConfigError);
  CHECK_THROWS_AS(parse_seeds("3..1"), ConfigError);
  CHECK_THROWS_AS(parse_seeds("a"), ConfigError);
  CHECK_THROWS_AS(parse_seeds("1,,2"), ConfigError);
}

TEST_CASE("malformed configs fail with line numbers") {
  const auto expect_at = [](const std::string& text, const std::string& frag) {
    try {
      parse_run_config(text, "cfg.ini");
      FAIL("expected ParseError for: " << frag);
    } catch (const ParseError& e) {
      const std::string msg = e.what();
      CHECK(msg.find("cfg.ini:") != std::string::npos);
      CHECK(msg.find(frag) != std::string::npos);
    }
  };
  expect_at("[nope]\n", "unknown section");
  expect_at("[data]\nwat = 1\n", "unknown key");
  expect_at("[data]\nthreshold = abc\n", "expected a number");
  expect_at("[run]\nthreads\n", "expected key = value");
  expect_at("key = 1\n", "outside any [section]");
  expect_at("[run]\nmethod = magic\n", "unknown method");
  expect_at("[data]\nformat = sqlite\n", "unknown data format");
  expect_at("[data\n", "unterminated section");
}

TEST_CASE("semantic validation") {
  CHECK_THROWS_AS(parse_run_config("[run]\nk = 0\n", "<t>"), ConfigError);
  CHECK_THROWS_AS(parse_run_config("[run]\nthreads = 0\n", "<t>"), ConfigError);
  CHECK_THROWS_AS(parse_run_config("[data]\nval_fraction = 1.0\n", "<t>"), ConfigError);
  CHECK_THROWS_AS(parse_run_config("[data]\nval_fraction = 0\n", "<t>"), ConfigError);
}

TEST_CASE("canonical text round-trips every field") {
  RunConfig cfg;
  cfg.data_path = "/data/x";
  cfg.data_format = "triples";
  cfg.rating_threshold = 3.5;
  cfg.val_fraction = 0.123456789012345;
  cfg.split_seed = 77;
  cfg.stage1.latent_dim = 6;
  cfg.stage1.hidden_dim = 48;
  cfg.stage1.lr = 2.5e-4;
  cfg.stage1.weight_decay = 1e-7;
  cfg.stage1.lambda = 0.35;
  cfg.stage1.epochs = 123;
  cfg.stage1.batch_size = 100;
  cfg.stage1.patience = 7;
  cfg.stage2.d_mf = 16;
  cfg.stage2.lr = 9e-3;
  cfg.stage2.weight_decay = 2e-6;
  cfg.stage2.epochs = 55;
  cfg.stage2.batch_size = 128;
  cfg.stage2.patience = 4;
  cfg.synth.num_users = 321;
  cfg.synth.proxy_noise = 0.625;
  cfg.synth.seed = 9;
  cfg.method = "vae_ivae_concat";
  cfg.seeds = {2, 4, 8};
  cfg.out_dir = "runs/exp1";
  cfg.threads = 3;
  cfg.k = 7;
  cfg.stage2.k = 7;

  const std::string text = canonical_config_text(cfg);
  const RunConfig back = parse_run_config(text, "<round-trip>");
  CHECK(same_config(cfg, back));
  CHECK(back.stage1.lr == cfg.stage1.lr);
  CHECK(back.seeds == cfg.seeds);
  CHECK(back.synth.proxy_noise == cfg.synth.proxy_noise);
}

TEST_CASE("config hash separates configs and is stable") {
  RunConfig a;
  RunConfig b;
  CHECK(run_config_hash(a) == run_config_hash(b));
  b.stage1.lambda = 0.8;
  CHECK(run_config_hash(a) != run_config_hash(b));
  RunConfig c = a;
  c.seeds = {0};
  CHECK(run_config_hash(a) != run_config_hash(c));
}

TEST_CASE("load_run_config reads files and reports missing ones") {
  TempDir tmp("cfg");
  const std::string p = tmp.file("run.ini", "[run]\nmethod = mf\nseeds = 1\n");
  const RunConfig cfg = load_run_config(p);
  CHECK(cfg.method == "mf");
  CHECK(cfg.seeds == std::vector<std::uint64_t>{1});
  CHECK_THROWS_AS(load_run_config(tmp.str() + "/absent.ini"), ConfigError);
}

// --- checkpoints -------------------------------------------------------------

namespace {

StageOneCheckpoint make_stage_one() {
  RandomStream rs(5, "test/ck1");
  StageOneCheckpoint ck;
  ck.seed = 3;
  ck.config_hash = 0xdeadbeefcafef00dull;
  ck.mode = "joint";
  ck.ivae = make_ivae(6, 4, 2, 8, rs);
  ck.lcvae = make_lcvae(6, 2, 8, rs);
  ck.reps.z_lc = {{0.1, -0.2}, {0.3, 0.4}};
  ck.reps.z = {{1.5, 2.5}, {-3.5, 4.5}};
  return ck;
}

bool same_mlp(const MlpParams& a, const MlpParams& b) {
  if (a.layers.size() != b.layers.size()) return false;
  for (std::size_t l = 0; l < a.layers.size(); ++l) {
    if (a.layers[l].act != b.layers[l].act) return false;
    if (a.layers[l].weight.rows != b.layers[l].weight.rows) return false;
    if (a.layers[l].weight.cols != b.layers[l].weight.cols) return false;
    if (a.layers[l].weight.data != b.layers[l].weight.data) return false;
    if (a.layers[l].bias != b.layers[l].bias) return false;
  }
  return true;
}

}  // namespace

TEST_CASE("stage-one checkpoints round-trip bitwise") {
  TempDir tmp("ck1");
  const StageOneCheckpoint ck = make_stage_one();
  const std::string path = tmp.str() + "/s1.json";
  save_stage_one(path, ck);
  const StageOneCheckpoint back = load_stage_one(path);
  CHECK(back.seed == ck.seed);
  CHECK(back.config_hash == ck.config_hash);
  CHECK(back.mode == ck.mode);
  CHECK(back.ivae.latent_dim == ck.ivae.latent_dim);
  CHECK(same_mlp(back.ivae.prior_net, ck.ivae.prior_net));
  CHECK(same_mlp(back.ivae.encoder_net, ck.ivae.encoder_net));
  CHECK(same_mlp(back.ivae.decoder_net, ck.ivae.decoder_net));
  CHECK(same_mlp(back.lcvae.encoder_net, ck.lcvae.encoder_net));
  CHECK(same_mlp(back.lcvae.decoder_net, ck.lcvae.decoder_net));
  CHECK(back.reps.z_lc == ck.reps.z_lc);
  CHECK(back.reps.z == ck.reps.z);
}

TEST_CASE("stage-two checkpoints round-trip bitwise") {
  TempDir tmp("ck2");
  RandomStream rs(7, "test/ck2");
  StageTwoCheckpoint ck;
  ck.seed = 4;
  ck.config_hash = 42;
  ck.method = "lcdr";
  ck.has_head = true;
  ck.mf.P = DenseMatrix(3, 2);
  ck.mf.Q = DenseMatrix(5, 2);
  for (double& v : ck.mf.P.data) v = rs.normal();
  for (double& v : ck.mf.Q.data) v = rs.normal();
  ck.mf.b_u = rs.normal_vec(3);
  ck.mf.b_i = rs.normal_vec(5);
  ck.mf.global_bias = rs.normal();
  ck.head.H = DenseMatrix(2, 2);
  ck.head.Qc = DenseMatrix(5, 2);
  for (double& v : ck.head.H.data) v = rs.normal();
  for (double& v : ck.head.Qc.data) v = rs.normal();
  ck.features = {{0.25, -0.5}, {1e-17, 3.0}, {2.0, 4.0}};

  const std::string path = tmp.str() + "/s2.json";
  save_stage_two(path, ck);
  const StageTwoCheckpoint back = load_stage_two(path);
  CHECK(back.seed == ck.seed);
  CHECK(back.config_hash == ck.config_hash);
  CHECK(back.method == ck.method);
  CHECK(back.has_head == ck.has_head);
  CHECK(back.mf.P.data == ck.mf.P.data);
  CHECK(back.mf.Q.data == ck.mf.Q.data);
  CHECK(back.mf.b_u == ck.mf.b_u);
  CHECK(back.mf.b_i == ck.mf.b_i);
  CHECK(back.mf.global_bias == ck.mf.global_bias);
  CHECK(back.head.H.data == ck.head.H.data);
  CHECK(back.head.Qc.data == ck.head.Qc.data);
  CHECK(back.features == ck.features);
}

TEST_CASE("checkpoint writes are byte stable") {
  TempDir tmp("ckb");
  const StageOneCheckpoint ck = make_stage_one();
  const std::string p1 = tmp.str() + "/a.json";
  const std::string p2 = tmp.str() + "/b.json";
  save_stage_one(p1, ck);
  save_stage_one(p2, ck);
  CHECK(slurp(p1) == slurp(p2));

  // save -> load -> save is also stable.
  const StageOneCheckpoint back = load_stage_one(p1);
  const std::string p3 = tmp.str() + "/c.json";
  save_stage_one(p3, back);
  CHECK(slurp(p1) == slurp(p3));
}

TEST_CASE("checkpoint loader rejects bad files") {
  TempDir tmp("ckx");
  CHECK_THROWS_AS(load_stage_one(tmp.str() + "/missing.json"), ConfigError);

  const std::string garbage = tmp.file("g.json", "not json at all");
  CHECK_THROWS_AS(load_stage_one(garbage), ParseError);

  const std::string unversioned = tmp.file("u.json", "{\"kind\":\"stage1\"}");
  CHECK_THROWS_AS(load_stage_one(unversioned), ParseError);

  const std::string future =
      tmp.file("f.json", "{\"version\":99,\"kind\":\"stage1\"}");
  CHECK_THROWS_AS(load_stage_one(future), ParseError);

  // Kind mismatch: a stage-one file is not a stage-two checkpoint.
  const StageOneCheckpoint ck = make_stage_one();
  const std::string p = tmp.str() + "/s1.json";
  save_stage_one(p, ck);
  CHECK_THROWS_AS(load_stage_two(p), ParseError);

  const std::string truncated =
      tmp.file("t.json", "{\"version\":1,\"kind\":\"stage1\",\"seed\":0}");
  CHECK_THROWS_AS(load_stage_one(truncated), ParseError);
}
