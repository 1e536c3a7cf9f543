#include "pvq/codec.hpp"

#include <cstdlib>

namespace pvq {

namespace detail {

void refine_pulses(std::span<const double> magnitudes,
                   std::span<std::int64_t> pulses) {
  const std::size_t dims = magnitudes.size();
  if (dims < 2)
    return;
  double xy = 0.0;
  double yy = 0.0;
  for (std::size_t i = 0; i < dims; ++i) {
    xy += magnitudes[i] * static_cast<double>(pulses[i]);
    yy += static_cast<double>(pulses[i] * pulses[i]);
  }

  constexpr double kMinGain = 1e-12;
  for (;;) {
    // Compare xy'^2 / yy' against the incumbent via cross-multiplication.
    double best_xy = xy;
    double best_yy = yy;
    std::size_t from = dims;
    std::size_t to = dims;
    for (std::size_t i = 0; i < dims; ++i) {
      if (pulses[i] == 0)
        continue;
      const double yy_drop = yy - 2.0 * static_cast<double>(pulses[i]) + 1.0;
      for (std::size_t j = 0; j < dims; ++j) {
        if (j == i)
          continue;
        const double cand_xy = xy - magnitudes[i] + magnitudes[j];
        if (cand_xy <= 0.0)
          continue;
        const double cand_yy =
            yy_drop + 2.0 * static_cast<double>(pulses[j]) + 1.0;
        const double lhs = cand_xy * cand_xy * best_yy;
        const double rhs = best_xy * best_xy * cand_yy;
        if (lhs > rhs * (1.0 + kMinGain)) {
          best_xy = cand_xy;
          best_yy = cand_yy;
          from = i;
          to = j;
        }
      }
    }
    if (from == dims)
      return;
    pulses[from] -= 1;
    pulses[to] += 1;
    // Recompute rather than accumulate so rounding cannot drift.
    xy = 0.0;
    yy = 0.0;
    for (std::size_t i = 0; i < dims; ++i) {
      xy += magnitudes[i] * static_cast<double>(pulses[i]);
      yy += static_cast<double>(pulses[i] * pulses[i]);
    }
  }
}

} // namespace detail

CodeInteger encode(const PyramidPoint &p, const SizeTable &table) {
  const std::size_t dims = table.dims();
  const std::size_t pulses = table.pulses();
  if (static_cast<std::size_t>(p.dims()) != dims)
    throw std::invalid_argument("encode: point has " +
                                std::to_string(p.dims()) +
                                " coordinates, table expects " +
                                std::to_string(dims));
  if (p.l1_norm() != static_cast<std::int64_t>(pulses))
    throw std::invalid_argument("encode: point has L1 norm " +
                                std::to_string(p.l1_norm()) + ", expected " +
                                std::to_string(pulses));

  CodeInteger code;
  std::size_t k = pulses;
  std::size_t d = dims;
  for (Eigen::Index i = 0; k != 0; ++i, --d) {
    const int x = p.coords[i];
    const auto m = static_cast<std::size_t>(std::abs(x));
    if (m == 0)
      continue;
    // N(d-1,k) + 2 * sum_{j=1}^{m-1} N(d-1,k-j) + [x<0] N(d-1,k-m), with the
    // sum taken as a difference of running sums.
    code += table.count(d - 1, k);
    code += (table.cumulative(d - 1, k - 1) -
             table.cumulative(d - 1, k - m))
            << 1;
    if (x < 0)
      code += table.count(d - 1, k - m);
    k -= m;
  }
  return code;
}

PyramidPoint decode(const CodeInteger &code, const SizeTable &table) {
  if (code >= table.codebook_size())
    throw std::out_of_range("decode: code " + code.to_decimal() +
                            " >= codebook size " +
                            table.codebook_size().to_decimal());
  const std::size_t dims = table.dims();
  PyramidPoint out{Eigen::VectorXi::Zero(static_cast<Eigen::Index>(dims))};

  CodeInteger rest = code;
  std::size_t k = table.pulses();
  std::size_t d = dims;
  for (Eigen::Index i = 0; k > 0; ++i, --d) {
    if (d == 0)
      throw std::logic_error("decode: ran out of coordinates");
    const CodeInteger &zero_block = table.count(d - 1, k);
    if (rest < zero_block)
      continue;
    rest -= zero_block;
    // The magnitude j is the smallest with rest < 2 sum_{i<=j} N(d-1,k-i),
    // that is floor(rest/2) + V(d-1,k-1-j) < V(d-1,k-1). The test is
    // monotone in j, so binary search; j = k always satisfies it.
    const CodeInteger half = rest >> 1;
    const CodeInteger &top = table.cumulative(d - 1, k - 1);
    std::size_t lo = 1;
    std::size_t hi = k;
    while (lo < hi) {
      const std::size_t mid = lo + (hi - lo) / 2;
      if (half + table.cumulative(d - 1, k - 1 - mid) < top)
        hi = mid;
      else
        lo = mid + 1;
    }
    const std::size_t j = lo;
    rest -= (top - table.cumulative(d - 1, k - j)) << 1;
    const CodeInteger &positive_block = table.count(d - 1, k - j);
    if (rest < positive_block) {
      out.coords[i] = static_cast<int>(j);
    } else {
      out.coords[i] = -static_cast<int>(j);
      // Advance past the positive block as well; omitting this step
      // misdecodes negative entries that are not in the last position.
      rest -= positive_block;
    }
    k -= j;
  }
  return out;
}

void BitWriter::push_bit(bool bit) {
  if (bits_ % 8 == 0)
    bytes_.push_back(0);
  if (bit)
    bytes_.back() |= static_cast<std::uint8_t>(1u << (bits_ % 8));
  ++bits_;
}

void BitWriter::write(const CodeInteger &value, std::size_t width) {
  if (value.bit_length() > width)
    throw std::invalid_argument("value " + value.to_decimal() +
                                " does not fit in " + std::to_string(width) +
                                " bits");
  for (std::size_t b = 0; b < width; ++b)
    push_bit(value.bit(b));
}

void BitWriter::write(std::uint64_t value, std::size_t width) {
  if (width < 64 && (value >> width) != 0)
    throw std::invalid_argument("value " + std::to_string(value) +
                                " does not fit in " + std::to_string(width) +
                                " bits");
  for (std::size_t b = 0; b < width; ++b)
    push_bit(b < 64 && ((value >> b) & 1u));
}

bool BitReader::next_bit() {
  const std::size_t byte = bits_ >> 3;
  if (byte >= bytes_.size())
    throw std::out_of_range("bit stream exhausted at bit " +
                            std::to_string(bits_));
  const bool bit = (bytes_[byte] >> (bits_ & 7)) & 1u;
  ++bits_;
  return bit;
}

CodeInteger BitReader::read(std::size_t width) {
  CodeInteger out;
  for (std::size_t b = 0; b < width; ++b)
    if (next_bit())
      out.set_bit(b);
  return out;
}

std::uint64_t BitReader::read_word(std::size_t width) {
  if (width > 64)
    throw std::invalid_argument("read_word: width > 64");
  std::uint64_t out = 0;
  for (std::size_t b = 0; b < width; ++b)
    if (next_bit())
      out |= std::uint64_t{1} << b;
  return out;
}

PackedCodes pack_codes(std::span<const CodeInteger> codes,
                       std::size_t bits_per_group) {
  BitWriter writer;
  for (const CodeInteger &code : codes)
    writer.write(code, bits_per_group);
  return PackedCodes{bits_per_group, codes.size(), writer.take()};
}

std::vector<CodeInteger> unpack_codes(const PackedCodes &packed) {
  const std::size_t expected =
      packed_byte_count(packed.bits_per_group, packed.group_count);
  if (packed.bytes.size() != expected)
    throw std::invalid_argument("unpack_codes: expected " +
                                std::to_string(expected) + " bytes, got " +
                                std::to_string(packed.bytes.size()));
  BitReader reader(packed.bytes);
  std::vector<CodeInteger> codes;
  codes.reserve(packed.group_count);
  for (std::size_t i = 0; i < packed.group_count; ++i)
    codes.push_back(reader.read(packed.bits_per_group));
  for (std::size_t b = reader.position(); b < expected * 8; ++b)
    if ((packed.bytes[b >> 3] >> (b & 7)) & 1u)
      throw std::invalid_argument("unpack_codes: nonzero padding bit " +
                                  std::to_string(b));
  return codes;
}

} // namespace pvq
