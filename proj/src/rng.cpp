#include "ferns/rng.hpp"

namespace ferns {
namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace

Rng Rng::derive(std::uint64_t seed, std::string_view label,
                std::uint64_t index) {
  std::uint64_t k = splitmix64(seed);
  k = splitmix64(k ^ fnv1a(label));
  k = splitmix64(k ^ index);
  return Rng(k);
}

}  // namespace ferns
