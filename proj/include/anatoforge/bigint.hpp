// Minimal arbitrary-precision unsigned integer: enough for combination
// counts of the form n^(k+1), which overflow 64 bits at realistic dataset
// sizes. Limbs are base-1e9 digits, least significant first.
#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace anatoforge {

class BigUInt {
 public:
  BigUInt() : limbs_{0} {}
  explicit BigUInt(std::uint64_t value);

  BigUInt& operator*=(std::uint32_t factor);

  bool operator==(const BigUInt& other) const { return limbs_ == other.limbs_; }
  bool operator==(std::uint64_t value) const { return *this == BigUInt(value); }

  std::string to_string() const;

  // Value when it fits in 64 bits.
  std::uint64_t to_u64_saturating() const;

 private:
  static constexpr std::uint64_t kBase = 1000000000;
  std::vector<std::uint32_t> limbs_;
};

BigUInt pow_biguint(std::uint32_t base, std::uint32_t exponent);

}  // namespace anatoforge
