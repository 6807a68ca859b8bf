#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace lcdr {

enum class Origin : std::uint8_t { Biased, Unbiased };
enum class SplitTag : std::uint8_t { Train, Val, Test };

const char* to_string(Origin o);
const char* to_string(SplitTag s);

struct InteractionRecord {
  int user = 0;
  int item = 0;
  double value = 0.0;  // raw feedback: rating 1-5 or click 0/1
  int label = 0;       // binarized
  Origin origin = Origin::Biased;
  SplitTag split = SplitTag::Train;
};

// Per-user proxy feature vector W (one-hot / binary, entries in [0,1]).
struct ProxyRow {
  int user = 0;
  std::vector<double> w;
};

// Per-user binary exposure vector A; a[i] = 1 iff a biased record (u,i)
// exists.
struct ExposureRow {
  int user = 0;
  std::vector<double> a;
};

struct InteractionDataset {
  int num_users = 0;
  int num_items = 0;
  std::vector<InteractionRecord> records;
  std::vector<ProxyRow> proxies;  // one per user once built; may be empty
  int warning_count = 0;          // duplicate records dropped, unknown categories, ...

  // Raw ids in dense order, for manifests; empty when source was dense.
  std::vector<long long> user_raw_ids;
  std::vector<long long> item_raw_ids;

  std::size_t count(Origin o) const;
  std::size_t count(SplitTag s) const;
};

enum class DatasetFormat { Coat, Triples, KuaiRand };

struct IngestOptions {
  // Declared cardinalities for formats that cannot infer them (e.g. an
  // empty triples file).
  std::optional<int> num_users;
  std::optional<int> num_items;
};

// Reads a raw dataset directory in the given format. Ids are densely
// re-indexed from 0. Duplicate (user,item,origin) entries keep the last
// occurrence and bump warning_count.
//
// Layouts:
//   Coat     — train.ascii / test.ascii: whitespace-separated num_users x
//              num_items integer rating matrices (train = biased, test =
//              unbiased, 0 = unobserved); user_features.ascii (or
//              user_item_features/user_features.ascii): binary matrix, one
//              row per user.
//   Triples  — train.txt (biased) and test.txt (unbiased): lines
//              "user item rating", whitespace-separated, 1-indexed ids;
//              optional user_features.txt with "user f0 f1 ..." binary rows.
//   KuaiRand — schema.json naming the biased/unbiased CSV files, the
//              user-feature CSV, and the user/item/click/feature columns.
InteractionDataset ingest(DatasetFormat format, const std::string& path,
                          const IngestOptions& opts = {});

// label = 1 iff value >= threshold. Clicks use threshold 1.
void binarize(InteractionDataset& ds, double rating_threshold);

// Assigns biased records to train and partitions the unbiased records
// uniformly at random: round(val_fraction * n_unbiased) to val, the rest
// to test. Deterministic given seed.
void split(InteractionDataset& ds, double val_fraction, std::uint64_t seed);

std::vector<ExposureRow> build_exposure(const InteractionDataset& ds);

// --- proxy feature encoding ------------------------------------------------

// Categorical per-user feature table prior to one-hot encoding. An empty
// value string means "missing" and encodes as a zero block.
struct RawFeatures {
  std::vector<std::string> feature_names;
  std::vector<std::vector<std::string>> values;  // [user][feature]
};

// Deterministic one-hot layout: features sorted by name, categories sorted
// lexicographically within each feature.
struct ProxySchema {
  std::vector<std::pair<std::string, std::vector<std::string>>> features;
  int width() const;
};

ProxySchema build_proxy_schema(const RawFeatures& raw);

// One-hot encodes against the schema. Unknown categories encode as a zero
// block and increment *warnings when provided.
std::vector<ProxyRow> encode_proxies(const RawFeatures& raw, const ProxySchema& schema,
                                     int* warnings = nullptr);

// --- canonical on-disk format ----------------------------------------------

// dataset: UTF-8 TSV, header "user\titem\tvalue\torigin\tsplit".
// proxies: TSV "user\tf0,f1,...,fk" with comma-separated reals.
void write_canonical(const InteractionDataset& ds, const std::string& dataset_path,
                     const std::string& proxies_path);

// The canonical file stores raw values only; labels are rebuilt with the
// given threshold.
InteractionDataset read_canonical(const std::string& dataset_path,
                                  const std::string& proxies_path,
                                  double rating_threshold);

}  // namespace lcdr
