#pragma once

#include <cstdint>
#include <string>

#include "lcdr/ivae.hpp"
#include "lcdr/lcvae.hpp"
#include "lcdr/recommender.hpp"
#include "lcdr/trainer.hpp"

namespace lcdr {

// On-disk model format version; bumped on layout changes.
inline constexpr int kCheckpointVersion = 1;

struct StageOneCheckpoint {
  std::uint64_t seed = 0;
  std::uint64_t config_hash = 0;
  std::string mode;  // "joint", "plain_vae", or "ivae_only"
  IvaeModel ivae;
  LcvaeModel lcvae;
  RepresentationTable reps;
};

struct StageTwoCheckpoint {
  std::uint64_t seed = 0;
  std::uint64_t config_hash = 0;
  std::string method;
  bool has_head = false;
  MfParams mf;
  ConfounderHead head;
  std::vector<std::vector<double>> features;
};

// JSON blobs with a version tag and full round-trip precision; writing the
// same checkpoint twice produces identical bytes.
void save_stage_one(const std::string& path, const StageOneCheckpoint& ck);
StageOneCheckpoint load_stage_one(const std::string& path);

void save_stage_two(const std::string& path, const StageTwoCheckpoint& ck);
StageTwoCheckpoint load_stage_two(const std::string& path);

}  // namespace lcdr
