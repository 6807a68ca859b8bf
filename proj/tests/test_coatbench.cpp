#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "lcdr/coatbench.hpp"
#include "lcdr/dataio.hpp"
#include "lcdr/errors.hpp"
#include "test_util.hpp"

using namespace lcdr;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TEST_CASE("coat benchmark emits the expected matrix shapes and counts") {
  testutil::TempDir tmp("coatbench_shape");
  write_coat_benchmark(tmp.path.string(), {});

  InteractionDataset ds = ingest(DatasetFormat::Coat, tmp.path.string(), {});
  CHECK(ds.num_users == 290);
  CHECK(ds.num_items == 300);
  CHECK(ds.count(Origin::Biased) == 290u * 24u);
  CHECK(ds.count(Origin::Unbiased) == 290u * 16u);
  CHECK(ds.warning_count == 0);
}

TEST_CASE("coat benchmark is deterministic for a fixed config") {
  testutil::TempDir a("coatbench_det_a");
  testutil::TempDir b("coatbench_det_b");
  CoatBenchConfig cfg;
  write_coat_benchmark(a.path.string(), cfg);
  write_coat_benchmark(b.path.string(), cfg);
  for (const char* name : {"train.ascii", "test.ascii", "user_features.ascii"}) {
    CHECK(slurp(a.path / name) == slurp(b.path / name));
  }
}

TEST_CASE("coat benchmark responds to the seed") {
  testutil::TempDir a("coatbench_seed_a");
  testutil::TempDir b("coatbench_seed_b");
  CoatBenchConfig cfg;
  write_coat_benchmark(a.path.string(), cfg);
  cfg.seed += 1;
  write_coat_benchmark(b.path.string(), cfg);
  CHECK(slurp(a.path / "train.ascii") != slurp(b.path / "train.ascii"));
}

TEST_CASE("coat benchmark ratings are integers in 1..5 with disjoint slates") {
  testutil::TempDir tmp("coatbench_slates");
  CoatBenchConfig cfg;
  write_coat_benchmark(tmp.path.string(), cfg);

  auto read_matrix = [&](const char* name) {
    std::ifstream in(tmp.path / name);
    std::vector<std::vector<int>> rows;
    std::string line;
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      std::stringstream ss(line);
      std::vector<int> row;
      int v;
      while (ss >> v) row.push_back(v);
      rows.push_back(std::move(row));
    }
    return rows;
  };

  auto train = read_matrix("train.ascii");
  auto test = read_matrix("test.ascii");
  REQUIRE(train.size() == static_cast<std::size_t>(cfg.num_users));
  REQUIRE(test.size() == static_cast<std::size_t>(cfg.num_users));

  for (int u = 0; u < cfg.num_users; ++u) {
    REQUIRE(train[u].size() == static_cast<std::size_t>(cfg.num_items));
    REQUIRE(test[u].size() == static_cast<std::size_t>(cfg.num_items));
    int n_train = 0, n_test = 0;
    for (int i = 0; i < cfg.num_items; ++i) {
      int tr = train[u][i], te = test[u][i];
      CHECK(tr >= 0);
      CHECK(tr <= 5);
      CHECK(te >= 0);
      CHECK(te <= 5);
      if (tr != 0) ++n_train;
      if (te != 0) ++n_test;
      // An item is rated at most once per user across both slates.
      CHECK(!(tr != 0 && te != 0));
    }
    CHECK(n_train == cfg.biased_per_user);
    CHECK(n_test == cfg.unbiased_per_user);
  }
}

TEST_CASE("coat benchmark user features are valid one-hot blocks") {
  testutil::TempDir tmp("coatbench_feat");
  write_coat_benchmark(tmp.path.string(), {});

  std::ifstream in(tmp.path / "user_features.ascii");
  std::vector<std::vector<int>> rows;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::vector<int> row;
    int v;
    while (ss >> v) row.push_back(v);
    rows.push_back(std::move(row));
  }
  REQUIRE(rows.size() == 290u);
  const std::size_t width = rows[0].size();
  REQUIRE(width > 0u);

  for (const auto& row : rows) {
    REQUIRE(row.size() == width);
    for (int v : row) CHECK((v == 0 || v == 1));
  }

  // Columns partition into one-hot blocks: the generator writes contiguous
  // categorical blocks, so a greedy scan that accumulates columns until
  // every user has exactly one active bit must tile the whole width.
  std::size_t start = 0;
  int blocks = 0;
  while (start < width) {
    std::size_t end = start + 1;
    auto is_one_hot = [&](std::size_t lo, std::size_t hi) {
      for (const auto& row : rows) {
        int s = 0;
        for (std::size_t c = lo; c < hi; ++c) s += row[c];
        if (s != 1) return false;
      }
      return true;
    };
    while (end <= width && !is_one_hot(start, end)) ++end;
    REQUIRE(end <= width);  // every block closes with exactly one active bit
    start = end;
    ++blocks;
  }
  CHECK(blocks >= 2);
}

TEST_CASE("coat benchmark proxies survive the ingest round trip") {
  testutil::TempDir tmp("coatbench_roundtrip");
  write_coat_benchmark(tmp.path.string(), {});
  InteractionDataset ds = ingest(DatasetFormat::Coat, tmp.path.string(), {});
  REQUIRE(ds.proxies.size() == 290u);
  const std::size_t dim = ds.proxies[0].w.size();
  for (const auto& p : ds.proxies) {
    REQUIRE(p.w.size() == dim);
    for (double v : p.w) CHECK((v == 0.0 || v == 1.0));
  }
}

TEST_CASE("coat benchmark rejects invalid configurations") {
  testutil::TempDir tmp("coatbench_invalid");
  CoatBenchConfig cfg;

  cfg.num_users = 0;
  CHECK_THROWS_AS(write_coat_benchmark(tmp.path.string(), cfg), ConfigError);

  cfg = {};
  cfg.biased_per_user = 0;
  CHECK_THROWS_AS(write_coat_benchmark(tmp.path.string(), cfg), ConfigError);

  cfg = {};
  cfg.biased_per_user = 300;
  cfg.unbiased_per_user = 16;  // no room left for the uniform slate
  CHECK_THROWS_AS(write_coat_benchmark(tmp.path.string(), cfg), ConfigError);

  cfg = {};
  cfg.proxy_noise = 1.5;
  CHECK_THROWS_AS(write_coat_benchmark(tmp.path.string(), cfg), ConfigError);
}
