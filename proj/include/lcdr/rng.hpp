#pragma once

#include <algorithm>
#include <cstdint>
#include <random>
#include <string_view>
#include <vector>

namespace lcdr {

// FNV-1a 64-bit. Used for stream derivation and config hashes.
inline std::uint64_t fnv1a64(std::string_view s) {
  std::uint64_t h = 14695981039346656037ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

// A named random stream derived from a run seed. Each consumer of
// randomness (ivae init/noise, lcvae init/noise, shuffling, ...) owns its
// own stream so that removing one consumer never shifts the draws seen by
// another. That independence is what makes the lambda=0 run bit-identical
// to a plain VAE run, and the iVAE trajectory independent of the LCVAE
// branch.
class RandomStream {
 public:
  RandomStream(std::uint64_t run_seed, std::string_view name) {
    std::uint64_t tag = fnv1a64(name);
    std::seed_seq seq{static_cast<std::uint32_t>(run_seed),
                      static_cast<std::uint32_t>(run_seed >> 32),
                      static_cast<std::uint32_t>(tag),
                      static_cast<std::uint32_t>(tag >> 32)};
    engine_.seed(seq);
  }

  std::mt19937_64& engine() { return engine_; }

  double normal() { return normal_(engine_); }
  double uniform() { return unit_(engine_); }  // [0,1)

  // k iid N(0,1) draws.
  std::vector<double> normal_vec(std::size_t k) {
    std::vector<double> v(k);
    for (auto& x : v) x = normal_(engine_);
    return v;
  }

  void fill_normal(std::vector<double>& v) {
    for (auto& x : v) x = normal_(engine_);
  }

  // Uniform integer in [0, n).
  std::size_t index(std::size_t n) {
    std::uniform_int_distribution<std::size_t> d(0, n - 1);
    return d(engine_);
  }

  template <typename T>
  void shuffle(std::vector<T>& v) {
    std::shuffle(v.begin(), v.end(), engine_);
  }

 private:
  std::mt19937_64 engine_;
  std::normal_distribution<double> normal_{0.0, 1.0};
  std::uniform_real_distribution<double> unit_{0.0, 1.0};
};

}  // namespace lcdr
