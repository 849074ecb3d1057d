#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace oodselect {

using Rng = std::mt19937_64;

namespace detail {

constexpr std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

constexpr std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (char c : s) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace detail

/// Seed of a named substream, e.g. substream_seed(root, "fit/restart/3").
/// Depends only on (root, name), never on scheduling order.
constexpr std::uint64_t substream_seed(std::uint64_t root, std::string_view name) {
  return detail::splitmix64(detail::splitmix64(root) ^ detail::fnv1a(name));
}

inline Rng substream(std::uint64_t root, std::string_view name) {
  return Rng(substream_seed(root, name));
}

}  // namespace oodselect
