#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace gnas {

/// Minimal arbitrary-precision unsigned integer: enough for exact products of
/// per-layer choice counts, which overflow 64 bits already at 13^21.
class BigUint {
 public:
  BigUint() : limbs_{0} {}
  explicit BigUint(std::uint64_t v) {
    limbs_.clear();
    do {
      limbs_.push_back(static_cast<std::uint32_t>(v % kBase));
      v /= kBase;
    } while (v != 0);
  }

  BigUint& mul_u32(std::uint32_t factor) {
    std::uint64_t carry = 0;
    for (auto& limb : limbs_) {
      const std::uint64_t prod = static_cast<std::uint64_t>(limb) * factor + carry;
      limb = static_cast<std::uint32_t>(prod % kBase);
      carry = prod / kBase;
    }
    while (carry != 0) {
      limbs_.push_back(static_cast<std::uint32_t>(carry % kBase));
      carry /= kBase;
    }
    return *this;
  }

  bool operator==(const BigUint& other) const { return limbs_ == other.limbs_; }

  std::string to_string() const {
    std::string out = std::to_string(limbs_.back());
    for (auto it = limbs_.rbegin() + 1; it != limbs_.rend(); ++it) {
      std::string part = std::to_string(*it);
      out += std::string(9 - part.size(), '0') + part;
    }
    return out;
  }

  /// Value as uint64 if it fits, otherwise max().
  std::uint64_t to_u64_saturating() const {
    std::uint64_t v = 0;
    for (auto it = limbs_.rbegin(); it != limbs_.rend(); ++it) {
      if (v > (UINT64_MAX - *it) / kBase) return UINT64_MAX;
      v = v * kBase + *it;
    }
    return v;
  }

  double to_double() const {
    double v = 0.0;
    for (auto it = limbs_.rbegin(); it != limbs_.rend(); ++it)
      v = v * static_cast<double>(kBase) + static_cast<double>(*it);
    return v;
  }

 private:
  static constexpr std::uint64_t kBase = 1000000000ULL;  // base 1e9 limbs
  std::vector<std::uint32_t> limbs_;                     // little-endian
};

}  // namespace gnas
