#include "anatoforge/bigint.hpp"

#include <limits>

namespace anatoforge {

BigUInt::BigUInt(std::uint64_t value) {
  if (value == 0) {
    limbs_.push_back(0);
    return;
  }
  while (value > 0) {
    limbs_.push_back(static_cast<std::uint32_t>(value % kBase));
    value /= kBase;
  }
}

BigUInt& BigUInt::operator*=(std::uint32_t factor) {
  std::uint64_t carry = 0;
  for (auto& limb : limbs_) {
    const std::uint64_t product = static_cast<std::uint64_t>(limb) * factor + carry;
    limb = static_cast<std::uint32_t>(product % kBase);
    carry = product / kBase;
  }
  while (carry > 0) {
    limbs_.push_back(static_cast<std::uint32_t>(carry % kBase));
    carry /= kBase;
  }
  while (limbs_.size() > 1 && limbs_.back() == 0) limbs_.pop_back();
  return *this;
}

std::string BigUInt::to_string() const {
  std::string out = std::to_string(limbs_.back());
  for (auto it = limbs_.rbegin() + 1; it != limbs_.rend(); ++it) {
    std::string part = std::to_string(*it);
    out += std::string(9 - part.size(), '0') + part;
  }
  return out;
}

std::uint64_t BigUInt::to_u64_saturating() const {
  std::uint64_t value = 0;
  for (auto it = limbs_.rbegin(); it != limbs_.rend(); ++it) {
    if (value > (std::numeric_limits<std::uint64_t>::max() - *it) / kBase) {
      return std::numeric_limits<std::uint64_t>::max();
    }
    value = value * kBase + *it;
  }
  return value;
}

BigUInt pow_biguint(std::uint32_t base, std::uint32_t exponent) {
  BigUInt result(1);
  for (std::uint32_t i = 0; i < exponent; ++i) result *= base;
  return result;
}

}  // namespace anatoforge
