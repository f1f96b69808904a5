#pragma once

#include <cstdint>
#include <random>

namespace exotwin {

/// splitmix64 finalizer; used to decorrelate seeds derived from a master seed.
inline std::uint64_t mix_seed(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Derives an independent stream seed from (master, stream_id).
inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t stream_id) {
  return mix_seed(master ^ mix_seed(stream_id));
}

using Rng = std::mt19937_64;

inline Rng make_rng(std::uint64_t seed) { return Rng(seed); }

}  // namespace exotwin
