#include "pvq/io.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <system_error>

namespace pvq {

namespace {

class ByteWriter {
public:
  template <typename T> void put(T value) {
    static_assert(std::is_integral_v<T>);
    for (std::size_t i = 0; i < sizeof(T); ++i)
      bytes_.push_back(static_cast<std::uint8_t>(
          static_cast<std::make_unsigned_t<T>>(value) >> (8 * i)));
  }
  void put_f32(float value) { put(std::bit_cast<std::uint32_t>(value)); }
  void put_f64(double value) { put(std::bit_cast<std::uint64_t>(value)); }
  void put_bytes(std::span<const std::uint8_t> data) {
    bytes_.insert(bytes_.end(), data.begin(), data.end());
  }
  std::vector<std::uint8_t> take() { return std::move(bytes_); }

private:
  std::vector<std::uint8_t> bytes_;
};

class ByteReader {
public:
  ByteReader(std::span<const std::uint8_t> bytes, const char *format)
      : bytes_(bytes), format_(format) {}

  template <typename T> T get(const char *field) {
    need(sizeof(T), field);
    std::make_unsigned_t<T> value = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i)
      value |= static_cast<std::make_unsigned_t<T>>(bytes_[pos_ + i])
               << (8 * i);
    pos_ += sizeof(T);
    return static_cast<T>(value);
  }
  float get_f32(const char *field) {
    return std::bit_cast<float>(get<std::uint32_t>(field));
  }
  double get_f64(const char *field) {
    return std::bit_cast<double>(get<std::uint64_t>(field));
  }
  std::span<const std::uint8_t> get_bytes(std::size_t n, const char *field) {
    need(n, field);
    auto out = bytes_.subspan(pos_, n);
    pos_ += n;
    return out;
  }
  std::size_t position() const { return pos_; }
  std::size_t remaining() const { return bytes_.size() - pos_; }

private:
  void need(std::size_t n, const char *field) const {
    if (bytes_.size() - pos_ < n)
      throw FormatError(std::string(format_) + ": truncated reading " + field +
                        " at offset " + std::to_string(pos_) + ": need " +
                        std::to_string(n) + " bytes, " +
                        std::to_string(bytes_.size() - pos_) + " available");
  }

  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
  const char *format_;
};

std::uint64_t checked_mul(std::uint64_t a, std::uint64_t b, const char *what) {
  if (a != 0 && b > std::numeric_limits<std::uint64_t>::max() / a)
    throw FormatError(std::string("size overflow computing ") + what);
  return a * b;
}

std::uint64_t amplitude_row_bytes(const QuantizedTensor &h) {
  return (checked_mul(h.groups, h.amplitude_bits, "amplitude row") + 7) / 8 + 4;
}

std::uint64_t direction_bytes(const QuantizedTensor &h) {
  const std::uint64_t bits =
      checked_mul(checked_mul(h.rows, h.groups, "code count"),
                  h.bits_per_group, "direction payload");
  return bits / 8 + (bits % 8 != 0);
}

std::uint64_t amplitude_bytes(const QuantizedTensor &h) {
  if (h.amplitude_bits > 0)
    return checked_mul(h.rows, amplitude_row_bytes(h), "amplitude payload");
  return checked_mul(checked_mul(h.rows, h.groups, "amplitude count"), 4,
                     "amplitude payload");
}

} // namespace

std::uint64_t DenseTensor::element_count() const {
  std::uint64_t n = 1;
  for (std::uint64_t d : dims)
    n = checked_mul(n, d, "tensor size");
  return n;
}

Eigen::MatrixXd DenseTensor::to_matrix() const {
  Eigen::Index rows = 0;
  Eigen::Index cols = 0;
  if (dims.size() == 2) {
    rows = static_cast<Eigen::Index>(dims[0]);
    cols = static_cast<Eigen::Index>(dims[1]);
  } else if (dims.size() == 1) {
    rows = 1;
    cols = static_cast<Eigen::Index>(dims[0]);
  } else {
    throw std::invalid_argument("expected a 1-D or 2-D tensor, got " +
                                std::to_string(dims.size()) + " dims");
  }
  using RowMajor =
      Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  return Eigen::Map<const RowMajor>(values.data(), rows, cols);
}

DenseTensor DenseTensor::from_matrix(const Eigen::MatrixXd &m, DType dtype) {
  DenseTensor t;
  t.dtype = dtype;
  t.dims = {static_cast<std::uint64_t>(m.rows()),
            static_cast<std::uint64_t>(m.cols())};
  t.values.resize(static_cast<std::size_t>(m.size()));
  using RowMajor =
      Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  Eigen::Map<RowMajor>(t.values.data(), m.rows(), m.cols()) = m;
  return t;
}

std::vector<std::uint8_t> serialize_dense(const DenseTensor &tensor) {
  if (tensor.dims.size() > 255)
    throw std::invalid_argument("too many dimensions");
  if (tensor.values.size() != tensor.element_count())
    throw std::invalid_argument("tensor values do not match its shape");
  ByteWriter w;
  w.put_bytes(std::span<const std::uint8_t>(
      reinterpret_cast<const std::uint8_t *>("DTF1"), 4));
  w.put(static_cast<std::uint8_t>(tensor.dtype));
  w.put(static_cast<std::uint8_t>(tensor.dims.size()));
  for (std::uint64_t d : tensor.dims)
    w.put(d);
  for (double v : tensor.values) {
    if (tensor.dtype == DType::float32)
      w.put_f32(static_cast<float>(v));
    else
      w.put_f64(v);
  }
  return w.take();
}

DenseTensor parse_dense(std::span<const std::uint8_t> bytes) {
  ByteReader r(bytes, "DTF1");
  const auto magic = r.get_bytes(4, "magic");
  if (std::memcmp(magic.data(), "DTF1", 4) != 0)
    throw FormatError("DTF1: bad magic at offset 0");
  DenseTensor t;
  const auto dtype = r.get<std::uint8_t>("dtype");
  if (dtype > 1)
    throw FormatError("DTF1: unknown dtype " + std::to_string(dtype) +
                      " at offset 4");
  t.dtype = static_cast<DType>(dtype);
  const auto ndim = r.get<std::uint8_t>("ndim");
  for (unsigned i = 0; i < ndim; ++i)
    t.dims.push_back(r.get<std::uint64_t>("dims"));
  const std::uint64_t count = t.element_count();
  const std::uint64_t scalar = t.dtype == DType::float32 ? 4 : 8;
  const std::uint64_t expected =
      r.position() + checked_mul(count, scalar, "payload");
  if (bytes.size() != expected)
    throw FormatError("DTF1: expected " + std::to_string(expected) +
                      " bytes, file has " + std::to_string(bytes.size()));
  t.values.resize(static_cast<std::size_t>(count));
  for (auto &v : t.values)
    v = t.dtype == DType::float32 ? r.get_f32("payload") : r.get_f64("payload");
  return t;
}

std::uint64_t expected_quantized_size(const QuantizedTensor &header) {
  return kPvqtHeaderBytes + direction_bytes(header) + amplitude_bytes(header);
}

std::vector<std::uint8_t> serialize_quantized(const QuantizedTensor &qt) {
  const std::size_t total = static_cast<std::size_t>(qt.rows * qt.groups);
  if (qt.directions.bytes.size() != direction_bytes(qt) ||
      qt.directions.group_count != total)
    throw std::invalid_argument("direction payload does not match header");
  ByteWriter w;
  w.put_bytes(std::span<const std::uint8_t>(
      reinterpret_cast<const std::uint8_t *>("PVQT"), 4));
  w.put(kPvqtVersion);
  std::uint16_t flags = 0;
  if (qt.coherence)
    flags |= 1u;
  if (qt.hessian_used)
    flags |= 2u;
  if (qt.amplitude_bits > 0)
    flags |= 4u;
  w.put(flags);
  w.put(qt.rows);
  w.put(qt.groups);
  w.put(qt.groupsize);
  w.put(qt.pulses);
  w.put(qt.bits_per_group);
  w.put(qt.amplitude_bits);
  w.put(qt.seed);
  w.put_bytes(qt.directions.bytes);
  if (qt.amplitude_bits > 0) {
    if (qt.amplitude_levels.size() != total ||
        qt.row_norm_sq.size() != qt.rows)
      throw std::invalid_argument("amplitude payload does not match header");
    const auto groups = static_cast<std::size_t>(qt.groups);
    for (std::size_t r = 0; r < qt.rows; ++r) {
      BitWriter bits;
      for (std::size_t g = 0; g < groups; ++g)
        bits.write(std::uint64_t{qt.amplitude_levels[r * groups + g]},
                   qt.amplitude_bits);
      w.put_bytes(bits.take());
      w.put_f32(qt.row_norm_sq[r]);
    }
  } else {
    if (qt.amplitudes.size() != total)
      throw std::invalid_argument("amplitude payload does not match header");
    for (float a : qt.amplitudes)
      w.put_f32(a);
  }
  return w.take();
}

QuantizedTensor parse_quantized(std::span<const std::uint8_t> bytes) {
  ByteReader r(bytes, "PVQT");
  const auto magic = r.get_bytes(4, "magic");
  if (std::memcmp(magic.data(), "PVQT", 4) != 0)
    throw FormatError("PVQT: bad magic at offset 0");
  const auto version = r.get<std::uint16_t>("version");
  if (version != kPvqtVersion)
    throw FormatError("PVQT: unsupported version " + std::to_string(version) +
                      " at offset 4");
  const auto flags = r.get<std::uint16_t>("flags");
  if (flags & ~std::uint16_t{7})
    throw FormatError("PVQT: unknown flag bits " + std::to_string(flags) +
                      " at offset 6");
  QuantizedTensor qt;
  qt.coherence = flags & 1u;
  qt.hessian_used = flags & 2u;
  qt.rows = r.get<std::uint64_t>("N");
  qt.groups = r.get<std::uint64_t>("G");
  qt.groupsize = r.get<std::uint32_t>("D");
  qt.pulses = r.get<std::uint32_t>("K");
  qt.bits_per_group = r.get<std::uint32_t>("bits_per_group");
  qt.amplitude_bits = r.get<std::uint8_t>("amplitude_bits");
  qt.seed = r.get<std::uint64_t>("seed");

  if (qt.groupsize < 1)
    throw FormatError("PVQT: field D at offset 24 must be >= 1");
  if (qt.pulses < 1)
    throw FormatError("PVQT: field K at offset 28 must be >= 1");
  if (qt.bits_per_group < 1)
    throw FormatError("PVQT: field bits_per_group at offset 32 must be >= 1");
  if (((flags & 4u) != 0) != (qt.amplitude_bits > 0))
    throw FormatError("PVQT: flags bit2 disagrees with amplitude_bits at "
                      "offset 36");
  if (qt.amplitude_bits > 31)
    throw FormatError("PVQT: field amplitude_bits at offset 36 exceeds 31");
  if (qt.amplitude_bits > 0 && qt.groups < 2)
    throw FormatError("PVQT: quantized amplitudes need G >= 2 (offset 16)");
  if (qt.pulses > choose_pulses(qt.groupsize, qt.bits_per_group))
    throw FormatError("PVQT: codebook N(D,K) exceeds 2^bits_per_group "
                      "(offset 28)");

  const std::uint64_t expected = expected_quantized_size(qt);
  if (bytes.size() != expected)
    throw FormatError("PVQT: expected " + std::to_string(expected) +
                      " bytes from header arithmetic, file has " +
                      std::to_string(bytes.size()));

  const auto total = static_cast<std::size_t>(qt.rows * qt.groups);
  const auto dir = r.get_bytes(static_cast<std::size_t>(direction_bytes(qt)),
                               "direction payload");
  qt.directions.bits_per_group = qt.bits_per_group;
  qt.directions.group_count = total;
  qt.directions.bytes.assign(dir.begin(), dir.end());

  if (qt.amplitude_bits > 0) {
    const auto groups = static_cast<std::size_t>(qt.groups);
    const auto row_bytes =
        static_cast<std::size_t>(amplitude_row_bytes(qt)) - 4;
    qt.amplitude_levels.resize(total);
    qt.row_norm_sq.resize(static_cast<std::size_t>(qt.rows));
    for (std::size_t row = 0; row < qt.rows; ++row) {
      const std::size_t offset = r.position();
      BitReader bits(r.get_bytes(row_bytes, "amplitude levels"));
      for (std::size_t g = 0; g < groups; ++g)
        qt.amplitude_levels[row * groups + g] =
            static_cast<std::uint32_t>(bits.read_word(qt.amplitude_bits));
      const float norm = r.get_f32("row_norm_sq");
      if (!(norm >= 0.0f) || !std::isfinite(norm))
        throw FormatError("PVQT: invalid row_norm_sq for row " +
                          std::to_string(row) + " at offset " +
                          std::to_string(offset + row_bytes));
      qt.row_norm_sq[row] = norm;
    }
  } else {
    qt.amplitudes.resize(total);
    for (auto &a : qt.amplitudes) {
      a = r.get_f32("amplitudes");
      if (!std::isfinite(a))
        throw FormatError("PVQT: non-finite amplitude at offset " +
                          std::to_string(r.position() - 4));
    }
  }
  return qt;
}

std::vector<std::uint8_t> read_file(const std::filesystem::path &path) {
  std::ifstream in(path, std::ios::binary);
  if (!in)
    throw std::runtime_error("cannot open '" + path.string() + "'");
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());
  if (in.bad())
    throw std::runtime_error("error reading '" + path.string() + "'");
  return bytes;
}

void write_file_atomic(const std::filesystem::path &path,
                       std::span<const std::uint8_t> bytes) {
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out)
      throw std::runtime_error("cannot open '" + tmp.string() +
                               "' for writing");
    out.write(reinterpret_cast<const char *>(bytes.data()),
              static_cast<std::streamsize>(bytes.size()));
    out.flush();
    if (!out) {
      std::error_code ec;
      std::filesystem::remove(tmp, ec);
      throw std::runtime_error("error writing '" + tmp.string() + "'");
    }
  }
  std::filesystem::rename(tmp, path);
}

DenseTensor read_dense(const std::filesystem::path &path) {
  return parse_dense(read_file(path));
}

void write_dense(const std::filesystem::path &path, const DenseTensor &tensor) {
  write_file_atomic(path, serialize_dense(tensor));
}

QuantizedTensor read_quantized(const std::filesystem::path &path) {
  return parse_quantized(read_file(path));
}

void write_quantized(const std::filesystem::path &path,
                     const QuantizedTensor &qt) {
  write_file_atomic(path, serialize_quantized(qt));
}

std::uint64_t fnv1a64(std::span<const std::uint8_t> bytes) {
  std::uint64_t hash = 0xcbf29ce484222325ull;
  for (std::uint8_t b : bytes) {
    hash ^= b;
    hash *= 0x100000001b3ull;
  }
  return hash;
}

} // namespace pvq
