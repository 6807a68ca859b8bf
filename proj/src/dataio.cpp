#include "lcdr/dataio.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <unordered_map>

#include <json.hpp>

#include "lcdr/errors.hpp"
#include "lcdr/rng.hpp"

namespace fs = std::filesystem;

namespace lcdr {

const char* to_string(Origin o) { return o == Origin::Biased ? "biased" : "unbiased"; }

const char* to_string(SplitTag s) {
  switch (s) {
    case SplitTag::Train: return "train";
    case SplitTag::Val: return "val";
    case SplitTag::Test: return "test";
  }
  return "?";
}

std::size_t InteractionDataset::count(Origin o) const {
  std::size_t n = 0;
  for (const auto& r : records) n += (r.origin == o);
  return n;
}

std::size_t InteractionDataset::count(SplitTag s) const {
  std::size_t n = 0;
  for (const auto& r : records) n += (r.split == s);
  return n;
}

namespace {

std::string fmt_double(double v) {
  char buf[48];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::ifstream open_or_throw(const fs::path& p) {
  std::ifstream in(p);
  if (!in) throw ParseError("cannot open " + p.string());
  return in;
}

// Whitespace-separated numeric matrix; every row must have the same width.
std::vector<std::vector<double>> read_matrix(const fs::path& p) {
  std::ifstream in = open_or_throw(p);
  std::vector<std::vector<double>> rows;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::istringstream ls(line);
    std::vector<double> row;
    double v;
    while (ls >> v) row.push_back(v);
    if (!ls.eof()) {
      std::string tok;
      ls.clear();
      ls >> tok;
      throw ParseError(p.string() + ":" + std::to_string(lineno) +
                       ": expected a number, got '" + tok + "'");
    }
    if (row.empty()) continue;  // blank line
    if (!rows.empty() && row.size() != rows.front().size())
      throw ParseError(p.string() + ":" + std::to_string(lineno) + ": row width " +
                       std::to_string(row.size()) + " differs from first row width " +
                       std::to_string(rows.front().size()));
    rows.push_back(std::move(row));
  }
  return rows;
}

// Keeps the last occurrence per (user,item,origin) at the position of the
// first; counts replacements as warnings.
void dedup_last_wins(InteractionDataset& ds) {
  std::unordered_map<std::uint64_t, std::size_t> pos;
  pos.reserve(ds.records.size());
  std::vector<InteractionRecord> kept;
  kept.reserve(ds.records.size());
  for (const auto& r : ds.records) {
    std::uint64_t key = (static_cast<std::uint64_t>(r.user) << 33) |
                        (static_cast<std::uint64_t>(r.item) << 1) |
                        (r.origin == Origin::Biased ? 0u : 1u);
    auto it = pos.find(key);
    if (it == pos.end()) {
      pos.emplace(key, kept.size());
      kept.push_back(r);
    } else {
      kept[it->second] = r;
      ds.warning_count++;
    }
  }
  ds.records = std::move(kept);
}

InteractionDataset ingest_coat(const std::string& dir) {
  fs::path base(dir);
  auto matrix_train = read_matrix(base / "train.ascii");
  auto matrix_test = read_matrix(base / "test.ascii");
  if (matrix_train.empty()) throw ParseError(dir + "/train.ascii: empty matrix");
  if (matrix_test.size() != matrix_train.size() ||
      matrix_test.front().size() != matrix_train.front().size())
    throw ParseError(dir + ": train.ascii and test.ascii shapes differ");

  InteractionDataset ds;
  ds.num_users = static_cast<int>(matrix_train.size());
  ds.num_items = static_cast<int>(matrix_train.front().size());
  auto add_matrix = [&](const std::vector<std::vector<double>>& m, Origin origin) {
    for (int u = 0; u < ds.num_users; ++u)
      for (int i = 0; i < ds.num_items; ++i)
        if (m[u][i] != 0.0) {
          InteractionRecord r;
          r.user = u;
          r.item = i;
          r.value = m[u][i];
          r.origin = origin;
          r.split = origin == Origin::Biased ? SplitTag::Train : SplitTag::Test;
          ds.records.push_back(r);
        }
  };
  add_matrix(matrix_train, Origin::Biased);
  add_matrix(matrix_test, Origin::Unbiased);

  fs::path feat = base / "user_features.ascii";
  if (!fs::exists(feat)) feat = base / "user_item_features" / "user_features.ascii";
  if (fs::exists(feat)) {
    auto m = read_matrix(feat);
    if (static_cast<int>(m.size()) != ds.num_users)
      throw ParseError(feat.string() + ": feature rows (" + std::to_string(m.size()) +
                       ") do not match user count (" + std::to_string(ds.num_users) + ")");
    // Binary features pass through unencoded.
    for (int u = 0; u < ds.num_users; ++u) ds.proxies.push_back({u, m[u]});
  } else {
    for (int u = 0; u < ds.num_users; ++u) ds.proxies.push_back({u, {1.0}});
    ds.warning_count++;
  }
  return ds;
}

struct RawTriple {
  long long user;
  long long item;
  double value;
};

std::vector<RawTriple> read_triples_file(const fs::path& p) {
  std::ifstream in = open_or_throw(p);
  std::vector<RawTriple> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::istringstream ls(line);
    RawTriple t;
    if (!(ls >> t.user >> t.item >> t.value))
      throw ParseError(p.string() + ":" + std::to_string(lineno) + ": expected 'user item rating'");
    out.push_back(t);
  }
  return out;
}

InteractionDataset ingest_triples(const std::string& dir, const IngestOptions& opts) {
  fs::path base(dir);
  auto biased = read_triples_file(base / "train.txt");
  std::vector<RawTriple> unbiased;
  if (fs::exists(base / "test.txt")) unbiased = read_triples_file(base / "test.txt");

  if (biased.empty() && unbiased.empty() && (!opts.num_users || !opts.num_items))
    throw ParseError(dir + ": no records and no declared user/item counts");

  // Densely re-index raw ids.
  std::set<long long> user_ids, item_ids;
  for (const auto& t : biased) {
    user_ids.insert(t.user);
    item_ids.insert(t.item);
  }
  for (const auto& t : unbiased) {
    user_ids.insert(t.user);
    item_ids.insert(t.item);
  }
  std::unordered_map<long long, int> umap, imap;
  InteractionDataset ds;
  for (long long id : user_ids) {
    umap[id] = static_cast<int>(ds.user_raw_ids.size());
    ds.user_raw_ids.push_back(id);
  }
  for (long long id : item_ids) {
    imap[id] = static_cast<int>(ds.item_raw_ids.size());
    ds.item_raw_ids.push_back(id);
  }
  ds.num_users = opts.num_users.value_or(static_cast<int>(user_ids.size()));
  ds.num_items = opts.num_items.value_or(static_cast<int>(item_ids.size()));
  if (static_cast<int>(user_ids.size()) > ds.num_users ||
      static_cast<int>(item_ids.size()) > ds.num_items)
    throw ParseError(dir + ": observed more users/items than declared");

  auto add = [&](const std::vector<RawTriple>& ts, Origin origin) {
    for (const auto& t : ts) {
      InteractionRecord r;
      r.user = umap[t.user];
      r.item = imap[t.item];
      r.value = t.value;
      r.origin = origin;
      r.split = origin == Origin::Biased ? SplitTag::Train : SplitTag::Test;
      ds.records.push_back(r);
    }
  };
  add(biased, Origin::Biased);
  add(unbiased, Origin::Unbiased);
  dedup_last_wins(ds);

  fs::path feat = base / "user_features.txt";
  if (fs::exists(feat)) {
    auto m = read_matrix(feat);
    std::vector<std::vector<double>> rows(ds.num_users);
    for (const auto& row : m) {
      if (row.empty()) continue;
      long long raw = static_cast<long long>(row.front());
      auto it = umap.find(raw);
      if (it == umap.end()) continue;  // features for unseen users are dropped
      rows[it->second].assign(row.begin() + 1, row.end());
    }
    std::size_t width = 0;
    for (const auto& r : rows) width = std::max(width, r.size());
    for (int u = 0; u < ds.num_users; ++u) {
      auto w = rows[u];
      w.resize(width, 0.0);
      ds.proxies.push_back({u, std::move(w)});
    }
  } else {
    // No proxy source: constant scalar proxy keeps the conditional prior
    // well-formed (it degenerates to an unconditional one).
    for (int u = 0; u < ds.num_users; ++u) ds.proxies.push_back({u, {1.0}});
  }
  return ds;
}

// Minimal CSV: comma-separated with double-quote escaping.
std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    char c = line[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          cur += '"';
          ++i;
        } else {
          quoted = false;
        }
      } else {
        cur += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      out.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur += c;
    }
  }
  out.push_back(cur);
  return out;
}

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  int col(const std::string& name, const fs::path& where) const {
    for (std::size_t i = 0; i < header.size(); ++i)
      if (header[i] == name) return static_cast<int>(i);
    throw ParseError(where.string() + ": missing column '" + name + "'");
  }
};

CsvTable read_csv(const fs::path& p) {
  std::ifstream in = open_or_throw(p);
  CsvTable t;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    auto cells = split_csv_line(line);
    if (t.header.empty()) {
      t.header = std::move(cells);
    } else {
      if (cells.size() != t.header.size())
        throw ParseError(p.string() + ":" + std::to_string(lineno) + ": expected " +
                         std::to_string(t.header.size()) + " cells, got " +
                         std::to_string(cells.size()));
      t.rows.push_back(std::move(cells));
    }
  }
  return t;
}

double parse_num(const std::string& s, const fs::path& where, std::size_t lineno) {
  try {
    std::size_t used = 0;
    double v = std::stod(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw ParseError(where.string() + ":" + std::to_string(lineno) +
                     ": expected a number, got '" + s + "'");
  }
}

InteractionDataset ingest_kuairand(const std::string& dir) {
  fs::path base(dir);
  std::ifstream sin = open_or_throw(base / "schema.json");
  nlohmann::json schema;
  try {
    sin >> schema;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(dir + "/schema.json: " + e.what());
  }
  auto req = [&](const char* key) -> std::string {
    if (!schema.contains(key))
      throw ParseError(dir + "/schema.json: missing key '" + std::string(key) + "'");
    return schema.at(key).get<std::string>();
  };
  const std::string user_col = req("user_col");
  const std::string item_col = req("item_col");
  const std::string click_col = req("click_col");

  std::set<long long> user_ids, item_ids;
  struct Row {
    long long user, item;
    double click;
    Origin origin;
  };
  std::vector<Row> parsed;
  auto load_log = [&](const std::string& file, Origin origin) {
    fs::path p = base / file;
    CsvTable t = read_csv(p);
    int uc = t.col(user_col, p), ic = t.col(item_col, p), cc = t.col(click_col, p);
    for (std::size_t rix = 0; rix < t.rows.size(); ++rix) {
      const auto& cells = t.rows[rix];
      Row r;
      r.user = static_cast<long long>(parse_num(cells[uc], p, rix + 2));
      r.item = static_cast<long long>(parse_num(cells[ic], p, rix + 2));
      r.click = parse_num(cells[cc], p, rix + 2);
      r.origin = origin;
      user_ids.insert(r.user);
      item_ids.insert(r.item);
      parsed.push_back(r);
    }
  };
  load_log(req("biased_file"), Origin::Biased);
  load_log(req("unbiased_file"), Origin::Unbiased);

  InteractionDataset ds;
  std::unordered_map<long long, int> umap, imap;
  for (long long id : user_ids) {
    umap[id] = static_cast<int>(ds.user_raw_ids.size());
    ds.user_raw_ids.push_back(id);
  }
  for (long long id : item_ids) {
    imap[id] = static_cast<int>(ds.item_raw_ids.size());
    ds.item_raw_ids.push_back(id);
  }
  ds.num_users = static_cast<int>(user_ids.size());
  ds.num_items = static_cast<int>(item_ids.size());
  for (const auto& r : parsed) {
    InteractionRecord rec;
    rec.user = umap[r.user];
    rec.item = imap[r.item];
    rec.value = r.click;
    rec.origin = r.origin;
    rec.split = r.origin == Origin::Biased ? SplitTag::Train : SplitTag::Test;
    ds.records.push_back(rec);
  }
  dedup_last_wins(ds);

  // Categorical user-profile columns one-hot encoded against a schema
  // derived from the data.
  if (schema.contains("user_features_file") && schema.contains("feature_cols")) {
    fs::path p = base / schema.at("user_features_file").get<std::string>();
    CsvTable t = read_csv(p);
    int uc = t.col(user_col, p);
    std::vector<std::string> fcols = schema.at("feature_cols").get<std::vector<std::string>>();
    std::vector<int> fcol_idx;
    for (const auto& name : fcols) fcol_idx.push_back(t.col(name, p));
    RawFeatures raw;
    raw.feature_names = fcols;
    raw.values.assign(ds.num_users, std::vector<std::string>(fcols.size()));
    for (std::size_t rix = 0; rix < t.rows.size(); ++rix) {
      long long raw_user = static_cast<long long>(parse_num(t.rows[rix][uc], p, rix + 2));
      auto it = umap.find(raw_user);
      if (it == umap.end()) continue;
      for (std::size_t f = 0; f < fcols.size(); ++f)
        raw.values[it->second][f] = t.rows[rix][fcol_idx[f]];
    }
    ProxySchema ps = build_proxy_schema(raw);
    ds.proxies = encode_proxies(raw, ps, &ds.warning_count);
  } else {
    for (int u = 0; u < ds.num_users; ++u) ds.proxies.push_back({u, {1.0}});
  }
  return ds;
}

}  // namespace

InteractionDataset ingest(DatasetFormat format, const std::string& path,
                          const IngestOptions& opts) {
  switch (format) {
    case DatasetFormat::Coat: return ingest_coat(path);
    case DatasetFormat::Triples: return ingest_triples(path, opts);
    case DatasetFormat::KuaiRand: return ingest_kuairand(path);
  }
  throw ConfigError("unknown dataset format");
}

void binarize(InteractionDataset& ds, double rating_threshold) {
  for (auto& r : ds.records) r.label = r.value >= rating_threshold ? 1 : 0;
}

void split(InteractionDataset& ds, double val_fraction, std::uint64_t seed) {
  if (!(val_fraction > 0.0 && val_fraction < 1.0))
    throw ConfigError("split: val_fraction must lie in (0,1)");
  std::vector<std::size_t> unbiased_idx;
  for (std::size_t i = 0; i < ds.records.size(); ++i) {
    if (ds.records[i].origin == Origin::Biased) {
      ds.records[i].split = SplitTag::Train;
    } else {
      unbiased_idx.push_back(i);
    }
  }
  if (unbiased_idx.empty()) throw ConfigError("split: dataset has no unbiased records");
  RandomStream rng(seed, "split");
  rng.shuffle(unbiased_idx);
  std::size_t n_val = static_cast<std::size_t>(
      std::llround(val_fraction * static_cast<double>(unbiased_idx.size())));
  for (std::size_t k = 0; k < unbiased_idx.size(); ++k)
    ds.records[unbiased_idx[k]].split = k < n_val ? SplitTag::Val : SplitTag::Test;
}

std::vector<ExposureRow> build_exposure(const InteractionDataset& ds) {
  std::vector<ExposureRow> rows(ds.num_users);
  for (int u = 0; u < ds.num_users; ++u) {
    rows[u].user = u;
    rows[u].a.assign(ds.num_items, 0.0);
  }
  for (const auto& r : ds.records)
    if (r.origin == Origin::Biased) rows[r.user].a[r.item] = 1.0;
  return rows;
}

int ProxySchema::width() const {
  int w = 0;
  for (const auto& [name, cats] : features) w += static_cast<int>(cats.size());
  return w;
}

ProxySchema build_proxy_schema(const RawFeatures& raw) {
  std::map<std::string, std::set<std::string>> cats;  // sorted by feature name
  for (std::size_t f = 0; f < raw.feature_names.size(); ++f)
    for (const auto& row : raw.values)
      if (f < row.size() && !row[f].empty()) cats[raw.feature_names[f]].insert(row[f]);
  ProxySchema schema;
  for (auto& [name, set] : cats)
    schema.features.emplace_back(name, std::vector<std::string>(set.begin(), set.end()));
  return schema;
}

std::vector<ProxyRow> encode_proxies(const RawFeatures& raw, const ProxySchema& schema,
                                     int* warnings) {
  std::unordered_map<std::string, std::size_t> name_to_col;
  for (std::size_t f = 0; f < raw.feature_names.size(); ++f)
    name_to_col[raw.feature_names[f]] = f;

  std::vector<ProxyRow> rows;
  rows.reserve(raw.values.size());
  for (std::size_t u = 0; u < raw.values.size(); ++u) {
    ProxyRow pr;
    pr.user = static_cast<int>(u);
    pr.w.assign(schema.width(), 0.0);
    int offset = 0;
    for (const auto& [name, categories] : schema.features) {
      auto it = name_to_col.find(name);
      if (it != name_to_col.end() && it->second < raw.values[u].size()) {
        const std::string& val = raw.values[u][it->second];
        if (!val.empty()) {
          auto cit = std::lower_bound(categories.begin(), categories.end(), val);
          if (cit != categories.end() && *cit == val) {
            pr.w[offset + (cit - categories.begin())] = 1.0;
          } else if (warnings) {
            (*warnings)++;  // unknown category: zero block
          }
        }
      }
      offset += static_cast<int>(categories.size());
    }
    rows.push_back(std::move(pr));
  }
  return rows;
}

void write_canonical(const InteractionDataset& ds, const std::string& dataset_path,
                     const std::string& proxies_path) {
  std::ofstream out(dataset_path);
  if (!out) throw ParseError("cannot write " + dataset_path);
  out << "user\titem\tvalue\torigin\tsplit\n";
  for (const auto& r : ds.records)
    out << r.user << '\t' << r.item << '\t' << fmt_double(r.value) << '\t'
        << to_string(r.origin) << '\t' << to_string(r.split) << '\n';

  std::ofstream pout(proxies_path);
  if (!pout) throw ParseError("cannot write " + proxies_path);
  for (const auto& p : ds.proxies) {
    pout << p.user << '\t';
    for (std::size_t i = 0; i < p.w.size(); ++i) {
      if (i) pout << ',';
      pout << fmt_double(p.w[i]);
    }
    pout << '\n';
  }
}

InteractionDataset read_canonical(const std::string& dataset_path,
                                  const std::string& proxies_path,
                                  double rating_threshold) {
  std::ifstream in = open_or_throw(dataset_path);
  InteractionDataset ds;
  std::string line;
  std::size_t lineno = 0;
  if (!std::getline(in, line))
    throw ParseError(dataset_path + ": empty file (missing header)");
  ++lineno;
  if (line != "user\titem\tvalue\torigin\tsplit")
    throw ParseError(dataset_path + ":1: unexpected header '" + line + "'");
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::string user_s, item_s, value_s, origin_s, split_s;
    if (!(std::getline(ls, user_s, '\t') && std::getline(ls, item_s, '\t') &&
          std::getline(ls, value_s, '\t') && std::getline(ls, origin_s, '\t') &&
          std::getline(ls, split_s)))
      throw ParseError(dataset_path + ":" + std::to_string(lineno) + ": expected 5 fields");
    InteractionRecord r;
    r.user = static_cast<int>(parse_num(user_s, dataset_path, lineno));
    r.item = static_cast<int>(parse_num(item_s, dataset_path, lineno));
    r.value = parse_num(value_s, dataset_path, lineno);
    if (origin_s == "biased") {
      r.origin = Origin::Biased;
    } else if (origin_s == "unbiased") {
      r.origin = Origin::Unbiased;
    } else {
      throw ParseError(dataset_path + ":" + std::to_string(lineno) + ": bad origin '" +
                       origin_s + "'");
    }
    if (split_s == "train") {
      r.split = SplitTag::Train;
    } else if (split_s == "val") {
      r.split = SplitTag::Val;
    } else if (split_s == "test") {
      r.split = SplitTag::Test;
    } else {
      throw ParseError(dataset_path + ":" + std::to_string(lineno) + ": bad split '" +
                       split_s + "'");
    }
    ds.records.push_back(r);
    ds.num_users = std::max(ds.num_users, r.user + 1);
    ds.num_items = std::max(ds.num_items, r.item + 1);
  }

  std::ifstream pin = open_or_throw(proxies_path);
  lineno = 0;
  while (std::getline(pin, line)) {
    ++lineno;
    if (line.empty()) continue;
    auto tab = line.find('\t');
    if (tab == std::string::npos)
      throw ParseError(proxies_path + ":" + std::to_string(lineno) + ": expected 'user\\tf0,f1,...'");
    ProxyRow pr;
    pr.user = static_cast<int>(parse_num(line.substr(0, tab), proxies_path, lineno));
    std::istringstream fs_1(line.substr(tab + 1));
    std::string cell;
    while (std::getline(fs_1, cell, ','))
      pr.w.push_back(parse_num(cell, proxies_path, lineno));
    ds.num_users = std::max(ds.num_users, pr.user + 1);
    ds.proxies.push_back(std::move(pr));
  }
  std::sort(ds.proxies.begin(), ds.proxies.end(),
            [](const ProxyRow& a, const ProxyRow& b) { return a.user < b.user; });
  binarize(ds, rating_threshold);
  return ds;
}

}  // namespace lcdr
