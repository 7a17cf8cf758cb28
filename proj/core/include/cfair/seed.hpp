#pragma once

#include <cstdint>
#include <string_view>

namespace cfair {

/// splitmix64 finalizer; used to decorrelate derived seeds.
constexpr std::uint64_t mix_seed(std::uint64_t x) noexcept {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

constexpr std::uint64_t fnv1a(std::string_view text) noexcept {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (char c : text) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ULL;
  }
  return h;
}

/// Seed for a named stage derived from the single top-level seed, so each
/// stage can be rerun in isolation with the same randomness.
constexpr std::uint64_t derive_seed(std::uint64_t root, std::string_view stage) noexcept {
  return mix_seed(root ^ fnv1a(stage));
}

constexpr std::uint64_t derive_seed(std::uint64_t root, std::uint64_t index) noexcept {
  return mix_seed(root + mix_seed(index));
}

}  // namespace cfair
