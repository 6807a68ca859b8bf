#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "lcdr/recommender.hpp"
#include "lcdr/synthlab.hpp"
#include "lcdr/trainer.hpp"

namespace lcdr {

// Everything a pipeline run needs, assembled from a sectioned key=value
// config file plus command-line overrides. Unknown sections or keys are
// rejected so typos fail loudly.
struct RunConfig {
  // [data]
  std::string data_path;
  std::string data_format = "canonical";  // coat | triples | kuairand | canonical
  double rating_threshold = 4.0;
  double val_fraction = 0.3;
  std::uint64_t split_seed = 0;

  // [stage1] — representation learning.
  TrainConfig stage1;

  // [stage2] — recommender fitting. `seed`, `k`, and `freeze_head` are
  // runtime-controlled, not config keys.
  RecConfig stage2;

  // [synth] — generator settings for `simulate`.
  SynthConfig synth;

  // [run]
  std::string method = "lcdr";  // lcdr | mf | mf_wf | vae_ivae_concat | lcdr_wo_lc
  std::vector<std::uint64_t> seeds = {0, 1, 2, 3, 4, 5, 6, 7, 8, 9};
  std::string out_dir;
  int threads = 1;
  int k = 5;  // ranking cutoff for validation and test metrics
};

const std::vector<std::string>& valid_methods();

// Parses "3", "1,4,9", and inclusive ranges "0..9" (mixable: "0..3,7").
std::vector<std::uint64_t> parse_seeds(const std::string& spec);

// Parses the sectioned key=value text. `origin` names the source in error
// messages (file path or "<flags>").
RunConfig parse_run_config(const std::string& text, const std::string& origin);
RunConfig load_run_config(const std::string& path);

// Full key=value rendering of every field, in a fixed order, with
// round-trip-exact numbers; parse_run_config(canonical_config_text(c))
// reproduces c. This is the config.snapshot payload.
std::string canonical_config_text(const RunConfig& cfg);

// FNV-1a hash of the canonical text; stamped on every output.
std::uint64_t run_config_hash(const RunConfig& cfg);

}  // namespace lcdr
