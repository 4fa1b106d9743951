#pragma once

// Seed-derived random streams. Every stochastic choice in a run draws from a
// stream keyed by (run seed, purpose, counters...), so results do not depend
// on execution order or thread count, and a run can be resumed from nothing
// more than its seed and epoch index.

#include <cstdint>
#include <initializer_list>
#include <random>

namespace ensnet {

enum class StreamPurpose : std::uint64_t {
  init = 1,
  shuffle = 2,
  augment = 3,
  base_masks = 4,
  subnet_masks = 5,
  static_augment = 6,
  test = 99,
};

std::uint64_t splitmix64(std::uint64_t x);

// Order-sensitive hash of a seed and a list of tags.
std::uint64_t derive_seed(std::uint64_t seed, std::initializer_list<std::uint64_t> tags);

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}
  Rng(std::uint64_t seed, StreamPurpose purpose, std::initializer_list<std::uint64_t> tags = {});

  double uniform(double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(engine_); }
  double normal(double mean, double stddev) { return std::normal_distribution<double>(mean, stddev)(engine_); }
  bool bernoulli(double p) { return std::bernoulli_distribution(p)(engine_); }

  std::mt19937_64& engine() noexcept { return engine_; }

 private:
  std::mt19937_64 engine_;
};

}  // namespace ensnet
