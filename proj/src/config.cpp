#include "lcdr/config.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include "lcdr/errors.hpp"
#include "lcdr/rng.hpp"

namespace lcdr {

namespace {

std::string fmt_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return std::string(buf);
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

[[noreturn]] void fail(const std::string& origin, std::size_t line, const std::string& msg) {
  throw ParseError(origin + ":" + std::to_string(line) + ": " + msg);
}

double parse_double(const std::string& v, const std::string& origin, std::size_t line) {
  try {
    std::size_t used = 0;
    const double d = std::stod(v, &used);
    if (used != v.size()) throw std::invalid_argument(v);
    return d;
  } catch (const std::exception&) {
    fail(origin, line, "expected a number, got '" + v + "'");
  }
}

long long parse_int(const std::string& v, const std::string& origin, std::size_t line) {
  try {
    std::size_t used = 0;
    const long long i = std::stoll(v, &used);
    if (used != v.size()) throw std::invalid_argument(v);
    return i;
  } catch (const std::exception&) {
    fail(origin, line, "expected an integer, got '" + v + "'");
  }
}

std::uint64_t parse_u64(const std::string& v, const std::string& origin, std::size_t line) {
  try {
    std::size_t used = 0;
    const unsigned long long i = std::stoull(v, &used);
    if (used != v.size()) throw std::invalid_argument(v);
    return i;
  } catch (const std::exception&) {
    fail(origin, line, "expected a non-negative integer, got '" + v + "'");
  }
}

}  // namespace

const std::vector<std::string>& valid_methods() {
  static const std::vector<std::string> kMethods = {"lcdr", "mf", "mf_wf", "vae_ivae_concat",
                                                    "lcdr_wo_lc"};
  return kMethods;
}

std::vector<std::uint64_t> parse_seeds(const std::string& spec) {
  std::vector<std::uint64_t> out;
  std::stringstream ss(spec);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    tok = trim(tok);
    if (tok.empty()) throw ConfigError("seeds: empty entry in '" + spec + "'");
    const auto dots = tok.find("..");
    try {
      if (dots == std::string::npos) {
        std::size_t used = 0;
        out.push_back(std::stoull(tok, &used));
        if (used != tok.size()) throw std::invalid_argument(tok);
      } else {
        std::size_t used = 0;
        const std::uint64_t lo = std::stoull(tok.substr(0, dots), &used);
        const std::string hi_s = tok.substr(dots + 2);
        const std::uint64_t hi = std::stoull(hi_s, &used);
        if (hi < lo) throw std::invalid_argument(tok);
        for (std::uint64_t s = lo; s <= hi; ++s) out.push_back(s);
      }
    } catch (const std::exception&) {
      throw ConfigError("seeds: bad entry '" + tok + "'");
    }
  }
  if (out.empty()) throw ConfigError("seeds: empty list");
  return out;
}

RunConfig parse_run_config(const std::string& text, const std::string& origin) {
  RunConfig cfg;

  using Setter = std::function<void(const std::string&, std::size_t)>;
  std::map<std::string, Setter> keys;
  const auto dbl = [&](double* dst) {
    return [&, dst](const std::string& v, std::size_t ln) {
      *dst = parse_double(v, origin, ln);
    };
  };
  const auto intval = [&](int* dst) {
    return [&, dst](const std::string& v, std::size_t ln) {
      *dst = static_cast<int>(parse_int(v, origin, ln));
    };
  };
  const auto szval = [&](std::size_t* dst) {
    return [&, dst](const std::string& v, std::size_t ln) {
      const long long i = parse_int(v, origin, ln);
      if (i < 0) fail(origin, ln, "value must be non-negative");
      *dst = static_cast<std::size_t>(i);
    };
  };
  const auto u64val = [&](std::uint64_t* dst) {
    return [&, dst](const std::string& v, std::size_t ln) { *dst = parse_u64(v, origin, ln); };
  };
  const auto strval = [&](std::string* dst) {
    return [dst](const std::string& v, std::size_t) { *dst = v; };
  };

  keys["data.path"] = strval(&cfg.data_path);
  keys["data.format"] = [&](const std::string& v, std::size_t ln) {
    if (v != "canonical" && v != "coat" && v != "triples" && v != "kuairand") {
      fail(origin, ln, "unknown data format '" + v + "'");
    }
    cfg.data_format = v;
  };
  keys["data.threshold"] = dbl(&cfg.rating_threshold);
  keys["data.val_fraction"] = dbl(&cfg.val_fraction);
  keys["data.split_seed"] = u64val(&cfg.split_seed);

  keys["stage1.latent_dim"] = szval(&cfg.stage1.latent_dim);
  keys["stage1.hidden_dim"] = szval(&cfg.stage1.hidden_dim);
  keys["stage1.lr"] = dbl(&cfg.stage1.lr);
  keys["stage1.weight_decay"] = dbl(&cfg.stage1.weight_decay);
  keys["stage1.lambda"] = dbl(&cfg.stage1.lambda);
  keys["stage1.epochs"] = intval(&cfg.stage1.epochs);
  keys["stage1.batch_size"] = intval(&cfg.stage1.batch_size);
  keys["stage1.patience"] = intval(&cfg.stage1.patience);

  keys["stage2.d_mf"] = szval(&cfg.stage2.d_mf);
  keys["stage2.lr"] = dbl(&cfg.stage2.lr);
  keys["stage2.weight_decay"] = dbl(&cfg.stage2.weight_decay);
  keys["stage2.epochs"] = intval(&cfg.stage2.epochs);
  keys["stage2.batch_size"] = intval(&cfg.stage2.batch_size);
  keys["stage2.patience"] = intval(&cfg.stage2.patience);

  keys["synth.num_users"] = intval(&cfg.synth.num_users);
  keys["synth.num_items"] = intval(&cfg.synth.num_items);
  keys["synth.latent_dim_true"] = intval(&cfg.synth.latent_dim_true);
  keys["synth.proxy_noise"] = dbl(&cfg.synth.proxy_noise);
  keys["synth.exposure_sparsity"] = dbl(&cfg.synth.exposure_sparsity);
  keys["synth.exposure_skew"] = dbl(&cfg.synth.exposure_skew);
  keys["synth.unbiased_per_user"] = intval(&cfg.synth.unbiased_per_user);
  keys["synth.pref_dim"] = intval(&cfg.synth.pref_dim);
  keys["synth.exposure_scale"] = dbl(&cfg.synth.exposure_scale);
  keys["synth.item_effect_scale"] = dbl(&cfg.synth.item_effect_scale);
  keys["synth.feedback_scale"] = dbl(&cfg.synth.feedback_scale);
  keys["synth.confound_scale"] = dbl(&cfg.synth.confound_scale);
  keys["synth.feedback_bias"] = dbl(&cfg.synth.feedback_bias);
  keys["synth.seed"] = u64val(&cfg.synth.seed);

  keys["run.method"] = [&](const std::string& v, std::size_t ln) {
    const auto& methods = valid_methods();
    if (std::find(methods.begin(), methods.end(), v) == methods.end()) {
      fail(origin, ln, "unknown method '" + v + "'");
    }
    cfg.method = v;
  };
  keys["run.seeds"] = [&](const std::string& v, std::size_t ln) {
    try {
      cfg.seeds = parse_seeds(v);
    } catch (const ConfigError& e) {
      fail(origin, ln, e.what());
    }
  };
  keys["run.out"] = strval(&cfg.out_dir);
  keys["run.threads"] = intval(&cfg.threads);
  keys["run.k"] = intval(&cfg.k);

  std::istringstream in(text);
  std::string line;
  std::string section;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') fail(origin, line_no, "unterminated section header");
      section = trim(line.substr(1, line.size() - 2));
      if (section != "data" && section != "stage1" && section != "stage2" &&
          section != "synth" && section != "run") {
        fail(origin, line_no, "unknown section [" + section + "]");
      }
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) fail(origin, line_no, "expected key = value");
    if (section.empty()) fail(origin, line_no, "key outside any [section]");
    const std::string key = section + "." + trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    const auto it = keys.find(key);
    if (it == keys.end()) fail(origin, line_no, "unknown key '" + key + "'");
    it->second(value, line_no);
  }

  if (cfg.seeds.empty()) throw ConfigError(origin + ": seeds must be non-empty");
  if (cfg.k < 1) throw ConfigError(origin + ": k must be >= 1");
  if (cfg.threads < 1) throw ConfigError(origin + ": threads must be >= 1");
  if (!(cfg.val_fraction > 0.0) || !(cfg.val_fraction < 1.0)) {
    throw ConfigError(origin + ": val_fraction must lie in (0, 1)");
  }
  cfg.stage2.k = cfg.k;
  return cfg;
}

RunConfig load_run_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config: " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_run_config(buf.str(), path);
}

std::string canonical_config_text(const RunConfig& cfg) {
  std::ostringstream os;
  os << "[data]\n";
  os << "path = " << cfg.data_path << "\n";
  os << "format = " << cfg.data_format << "\n";
  os << "threshold = " << fmt_double(cfg.rating_threshold) << "\n";
  os << "val_fraction = " << fmt_double(cfg.val_fraction) << "\n";
  os << "split_seed = " << cfg.split_seed << "\n";
  os << "[stage1]\n";
  os << "latent_dim = " << cfg.stage1.latent_dim << "\n";
  os << "hidden_dim = " << cfg.stage1.hidden_dim << "\n";
  os << "lr = " << fmt_double(cfg.stage1.lr) << "\n";
  os << "weight_decay = " << fmt_double(cfg.stage1.weight_decay) << "\n";
  os << "lambda = " << fmt_double(cfg.stage1.lambda) << "\n";
  os << "epochs = " << cfg.stage1.epochs << "\n";
  os << "batch_size = " << cfg.stage1.batch_size << "\n";
  os << "patience = " << cfg.stage1.patience << "\n";
  os << "[stage2]\n";
  os << "d_mf = " << cfg.stage2.d_mf << "\n";
  os << "lr = " << fmt_double(cfg.stage2.lr) << "\n";
  os << "weight_decay = " << fmt_double(cfg.stage2.weight_decay) << "\n";
  os << "epochs = " << cfg.stage2.epochs << "\n";
  os << "batch_size = " << cfg.stage2.batch_size << "\n";
  os << "patience = " << cfg.stage2.patience << "\n";
  os << "[synth]\n";
  os << "num_users = " << cfg.synth.num_users << "\n";
  os << "num_items = " << cfg.synth.num_items << "\n";
  os << "latent_dim_true = " << cfg.synth.latent_dim_true << "\n";
  os << "proxy_noise = " << fmt_double(cfg.synth.proxy_noise) << "\n";
  os << "exposure_sparsity = " << fmt_double(cfg.synth.exposure_sparsity) << "\n";
  os << "exposure_skew = " << fmt_double(cfg.synth.exposure_skew) << "\n";
  os << "unbiased_per_user = " << cfg.synth.unbiased_per_user << "\n";
  os << "pref_dim = " << cfg.synth.pref_dim << "\n";
  os << "exposure_scale = " << fmt_double(cfg.synth.exposure_scale) << "\n";
  os << "item_effect_scale = " << fmt_double(cfg.synth.item_effect_scale) << "\n";
  os << "feedback_scale = " << fmt_double(cfg.synth.feedback_scale) << "\n";
  os << "confound_scale = " << fmt_double(cfg.synth.confound_scale) << "\n";
  os << "feedback_bias = " << fmt_double(cfg.synth.feedback_bias) << "\n";
  os << "seed = " << cfg.synth.seed << "\n";
  os << "[run]\n";
  os << "method = " << cfg.method << "\n";
  os << "seeds = ";
  for (std::size_t i = 0; i < cfg.seeds.size(); ++i) {
    if (i > 0) os << ",";
    os << cfg.seeds[i];
  }
  os << "\n";
  os << "out = " << cfg.out_dir << "\n";
  os << "threads = " << cfg.threads << "\n";
  os << "k = " << cfg.k << "\n";
  return os.str();
}

std::uint64_t run_config_hash(const RunConfig& cfg) {
  return fnv1a64(canonical_config_text(cfg));
}

}  // namespace lcdr
