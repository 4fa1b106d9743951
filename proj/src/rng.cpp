#include "ensnet/rng.hpp"

namespace ensnet {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::uint64_t derive_seed(std::uint64_t seed, std::initializer_list<std::uint64_t> tags) {
  std::uint64_t h = splitmix64(seed);
  for (std::uint64_t tag : tags) h = splitmix64(h ^ splitmix64(tag));
  return h;
}

Rng::Rng(std::uint64_t seed, StreamPurpose purpose, std::initializer_list<std::uint64_t> tags)
    : engine_(derive_seed(derive_seed(seed, {static_cast<std::uint64_t>(purpose)}), tags)) {}

}  // namespace ensnet
