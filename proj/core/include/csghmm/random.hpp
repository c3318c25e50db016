#pragma once

#include <cstdint>

namespace csghmm {

/// splitmix64 finalizer. Used to derive independent sub-seeds from a master
/// seed without consuming the engine that owns it.
inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

/// Deterministic sub-seed for the given stream index.
inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t stream) {
  return splitmix64(master + 0x9E3779B97F4A7C15ull * (stream + 1));
}

}  // namespace csghmm
