#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>

namespace gnas {

/// Input or schema violation (bad path, malformed file, inconsistent config).
class ValidationError : public std::runtime_error {
 public:
  explicit ValidationError(const std::string& what) : std::runtime_error(what) {}
};

/// Unrecoverable failure at run time (non-finite loss, exhausted attempt budget).
class RuntimeAbort : public std::runtime_error {
 public:
  explicit RuntimeAbort(const std::string& what) : std::runtime_error(what) {}
};

/// splitmix64 finalizer; the standard 64-bit avalanche mix.
constexpr std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

constexpr std::uint64_t fnv1a64(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

constexpr std::uint64_t hash_combine(std::uint64_t a, std::uint64_t b) {
  return mix64(a ^ (b + 0x9e3779b97f4a7c15ULL + (a << 6) + (a >> 2)));
}

/// Maps a 64-bit word to a double in [0, 1) with 53 bits of precision.
inline double u64_to_unit(std::uint64_t x) {
  return static_cast<double>(x >> 11) * 0x1.0p-53;
}

}  // namespace gnas
