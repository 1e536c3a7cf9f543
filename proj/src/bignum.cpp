#include "pvq/bignum.hpp"

#include <algorithm>
#include <bit>

namespace pvq {

namespace {

using Limb = CodeInteger::Limb;
using Wide = unsigned __int128;

// In-place value = value * factor + addend over raw limbs.
void mul_add_small(std::vector<Limb> &limbs, Limb factor, Limb addend) {
  Wide carry = addend;
  for (Limb &limb : limbs) {
    Wide t = static_cast<Wide>(limb) * factor + carry;
    limb = static_cast<Limb>(t);
    carry = t >> 64;
  }
  if (carry != 0)
    limbs.push_back(static_cast<Limb>(carry));
}

// In-place value /= divisor, returns the remainder.
Limb div_small(std::vector<Limb> &limbs, Limb divisor) {
  Wide rem = 0;
  for (std::size_t i = limbs.size(); i-- > 0;) {
    Wide cur = (rem << 64) | limbs[i];
    limbs[i] = static_cast<Limb>(cur / divisor);
    rem = cur % divisor;
  }
  while (!limbs.empty() && limbs.back() == 0)
    limbs.pop_back();
  return static_cast<Limb>(rem);
}

} // namespace

CodeInteger CodeInteger::from_limbs(std::span<const Limb> limbs) {
  CodeInteger out;
  out.limbs_.assign(limbs.begin(), limbs.end());
  out.trim();
  return out;
}

CodeInteger CodeInteger::power_of_two(std::size_t bits) {
  CodeInteger out;
  out.set_bit(bits);
  return out;
}

CodeInteger CodeInteger::from_decimal(std::string_view text) {
  if (text.empty())
    throw std::invalid_argument("empty decimal string");
  CodeInteger out;
  for (char ch : text) {
    if (ch < '0' || ch > '9')
      throw std::invalid_argument("invalid decimal digit in '" +
                                  std::string(text) + "'");
    mul_add_small(out.limbs_, 10, static_cast<Limb>(ch - '0'));
  }
  out.trim();
  return out;
}

void CodeInteger::trim() {
  while (!limbs_.empty() && limbs_.back() == 0)
    limbs_.pop_back();
}

std::size_t CodeInteger::bit_length() const {
  if (limbs_.empty())
    return 0;
  return (limbs_.size() - 1) * kLimbBits +
         static_cast<std::size_t>(std::bit_width(limbs_.back()));
}

bool CodeInteger::bit(std::size_t index) const {
  std::size_t limb = index / kLimbBits;
  if (limb >= limbs_.size())
    return false;
  return (limbs_[limb] >> (index % kLimbBits)) & 1u;
}

void CodeInteger::set_bit(std::size_t index) {
  std::size_t limb = index / kLimbBits;
  if (limb >= limbs_.size())
    limbs_.resize(limb + 1, 0);
  limbs_[limb] |= Limb{1} << (index % kLimbBits);
}

std::string CodeInteger::to_decimal() const {
  if (limbs_.empty())
    return "0";
  std::vector<Limb> work = limbs_;
  std::string digits;
  // Peel off 19 decimal digits at a time.
  constexpr Limb kChunk = 10'000'000'000'000'000'000ull;
  while (!work.empty()) {
    Limb rem = div_small(work, kChunk);
    for (int i = 0; i < 19; ++i) {
      digits.push_back(static_cast<char>('0' + rem % 10));
      rem /= 10;
      if (work.empty() && rem == 0)
        break;
    }
  }
  std::reverse(digits.begin(), digits.end());
  return digits;
}

std::string CodeInteger::to_hex() const {
  if (limbs_.empty())
    return "0";
  static constexpr char kHex[] = "0123456789abcdef";
  std::string out;
  std::size_t nibbles = (bit_length() + 3) / 4;
  for (std::size_t n = nibbles; n-- > 0;) {
    Limb limb = limbs_[n / 16];
    out.push_back(kHex[(limb >> ((n % 16) * 4)) & 0xf]);
  }
  return out;
}

CodeInteger &CodeInteger::operator+=(const CodeInteger &rhs) {
  if (limbs_.size() < rhs.limbs_.size())
    limbs_.resize(rhs.limbs_.size(), 0);
  Limb carry = 0;
  for (std::size_t i = 0; i < limbs_.size(); ++i) {
    Limb r = i < rhs.limbs_.size() ? rhs.limbs_[i] : 0;
    if (r == 0 && carry == 0 && i >= rhs.limbs_.size())
      break;
    Limb sum = limbs_[i] + r;
    Limb c1 = sum < r;
    Limb sum2 = sum + carry;
    Limb c2 = sum2 < carry;
    limbs_[i] = sum2;
    carry = c1 | c2;
  }
  if (carry != 0)
    limbs_.push_back(carry);
  return *this;
}

CodeInteger &CodeInteger::operator-=(const CodeInteger &rhs) {
  if (*this < rhs)
    throw std::underflow_error("CodeInteger subtraction underflow: " +
                               to_decimal() + " - " + rhs.to_decimal());
  Limb borrow = 0;
  for (std::size_t i = 0; i < limbs_.size(); ++i) {
    Limb r = i < rhs.limbs_.size() ? rhs.limbs_[i] : 0;
    if (r == 0 && borrow == 0 && i >= rhs.limbs_.size())
      break;
    Limb diff = limbs_[i] - r;
    Limb b1 = limbs_[i] < r;
    Limb diff2 = diff - borrow;
    Limb b2 = diff < borrow;
    limbs_[i] = diff2;
    borrow = b1 | b2;
  }
  trim();
  return *this;
}

CodeInteger &CodeInteger::operator<<=(std::size_t bits) {
  if (limbs_.empty() || bits == 0)
    return *this;
  std::size_t limb_shift = bits / kLimbBits;
  unsigned bit_shift = static_cast<unsigned>(bits % kLimbBits);
  std::vector<Limb> out(limbs_.size() + limb_shift + 1, 0);
  for (std::size_t i = 0; i < limbs_.size(); ++i) {
    out[i + limb_shift] |= limbs_[i] << bit_shift;
    if (bit_shift != 0)
      out[i + limb_shift + 1] |= limbs_[i] >> (kLimbBits - bit_shift);
  }
  limbs_ = std::move(out);
  trim();
  return *this;
}

CodeInteger &CodeInteger::operator>>=(std::size_t bits) {
  std::size_t limb_shift = bits / kLimbBits;
  if (limb_shift >= limbs_.size()) {
    limbs_.clear();
    return *this;
  }
  unsigned bit_shift = static_cast<unsigned>(bits % kLimbBits);
  std::size_t n = limbs_.size() - limb_shift;
  for (std::size_t i = 0; i < n; ++i) {
    Limb lo = limbs_[i + limb_shift] >> bit_shift;
    Limb hi = 0;
    if (bit_shift != 0 && i + limb_shift + 1 < limbs_.size())
      hi = limbs_[i + limb_shift + 1] << (kLimbBits - bit_shift);
    limbs_[i] = lo | hi;
  }
  limbs_.resize(n);
  trim();
  return *this;
}

std::strong_ordering operator<=>(const CodeInteger &a, const CodeInteger &b) {
  if (a.limbs_.size() != b.limbs_.size())
    return a.limbs_.size() <=> b.limbs_.size();
  for (std::size_t i = a.limbs_.size(); i-- > 0;) {
    if (a.limbs_[i] != b.limbs_[i])
      return a.limbs_[i] <=> b.limbs_[i];
  }
  return std::strong_ordering::equal;
}

} // namespace pvq
