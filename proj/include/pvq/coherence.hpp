#pragma once

// Randomized Hadamard coherence processing.
//
// The transform Q = H_n diag(signs) / sqrt(n) is orthogonal; rotating a
// weight matrix as Q_r W Q_c^T spreads outliers across coordinates while the
// product with correspondingly rotated inputs (Q_c x) is unchanged.

#include <Eigen/Core>

#include <bit>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace pvq {

enum class Direction { forward, inverse };

class HadamardSpec {
public:
  /// Signs drawn from the top bit of successive splitmix64 outputs seeded
  /// with `seed`.
  HadamardSpec(std::size_t dim, std::uint64_t seed);

  /// All-plus signs: the plain normalized Walsh-Hadamard transform.
  static HadamardSpec unsigned_transform(std::size_t dim);

  std::size_t dim() const { return dim_; }
  std::uint64_t seed() const { return seed_; }
  const std::vector<double> &signs() const { return signs_; }

  /// Dense Q, for tests and small dimensions.
  Eigen::MatrixXd materialize() const;

private:
  HadamardSpec(std::size_t dim, std::uint64_t seed, std::vector<double> signs);

  std::size_t dim_;
  std::uint64_t seed_;
  std::vector<double> signs_;
};

inline bool is_power_of_two(std::size_t n) { return std::has_single_bit(n); }

/// Row and column specs for an N x C matrix rotated under one stored seed.
std::pair<HadamardSpec, HadamardSpec>
coherence_specs(std::size_t rows, std::size_t cols, std::uint64_t seed);

namespace detail {

template <typename Scalar>
void butterfly(Scalar *data, std::size_t n, std::ptrdiff_t stride) {
  for (std::size_t half = 1; half < n; half <<= 1) {
    for (std::size_t block = 0; block < n; block += 2 * half) {
      for (std::size_t i = block; i < block + half; ++i) {
        Scalar &a = data[static_cast<std::ptrdiff_t>(i) * stride];
        Scalar &b = data[static_cast<std::ptrdiff_t>(i + half) * stride];
        const Scalar x = a;
        const Scalar y = b;
        a = x + y;
        b = x - y;
      }
    }
  }
}

} // namespace detail

/// In-place Q v (forward) or Q^T v (inverse) on a contiguous or strided
/// vector expression.
template <typename Derived>
void fwht_in_place(Eigen::DenseBase<Derived> &v, const HadamardSpec &spec,
                   Direction direction) {
  using Scalar = typename Derived::Scalar;
  const auto n = static_cast<std::size_t>(v.size());
  if (n != spec.dim())
    throw std::invalid_argument("fwht: vector length " + std::to_string(n) +
                                " does not match transform size " +
                                std::to_string(spec.dim()));
  const auto &signs = spec.signs();
  if (direction == Direction::forward) {
    for (std::size_t i = 0; i < n; ++i)
      v(static_cast<Eigen::Index>(i)) *= static_cast<Scalar>(signs[i]);
  }
  // Run the butterfly on a packed copy so any Eigen expression (row, column,
  // segment) works.
  Eigen::Matrix<Scalar, Eigen::Dynamic, 1> work = v.derived();
  detail::butterfly(work.data(), n, 1);
  const Scalar scale = Scalar(1) / std::sqrt(static_cast<Scalar>(n));
  for (std::size_t i = 0; i < n; ++i) {
    Scalar value = work[static_cast<Eigen::Index>(i)] * scale;
    if (direction == Direction::inverse)
      value *= static_cast<Scalar>(signs[i]);
    v(static_cast<Eigen::Index>(i)) = value;
  }
}

template <typename Derived>
Eigen::Matrix<typename Derived::Scalar, Eigen::Dynamic, 1>
fwht(const Eigen::MatrixBase<Derived> &v, const HadamardSpec &spec,
     Direction direction) {
  Eigen::Matrix<typename Derived::Scalar, Eigen::Dynamic, 1> out = v;
  fwht_in_place(out, spec, direction);
  return out;
}

namespace detail {

inline void require_power_of_two(std::size_t n, const char *what) {
  if (!is_power_of_two(n))
    throw std::invalid_argument(
        std::string("coherence processing requires power-of-two dimensions; ") +
        what + " = " + std::to_string(n) +
        " (general sizes are not supported)");
}

} // namespace detail

/// Q_r W Q_c^T: the row transform on every column, the column transform on
/// every row.
template <typename Derived>
Eigen::Matrix<typename Derived::Scalar, Eigen::Dynamic, Eigen::Dynamic>
rotate_matrix(const Eigen::MatrixBase<Derived> &w, const HadamardSpec &row_spec,
              const HadamardSpec &col_spec) {
  detail::require_power_of_two(static_cast<std::size_t>(w.rows()), "rows");
  detail::require_power_of_two(static_cast<std::size_t>(w.cols()), "columns");
  Eigen::Matrix<typename Derived::Scalar, Eigen::Dynamic, Eigen::Dynamic> out =
      w;
  for (Eigen::Index c = 0; c < out.cols(); ++c) {
    auto column = out.col(c);
    fwht_in_place(column, row_spec, Direction::forward);
  }
  for (Eigen::Index r = 0; r < out.rows(); ++r) {
    auto row = out.row(r);
    fwht_in_place(row, col_spec, Direction::forward);
  }
  return out;
}

/// Q_r^T W Q_c, the inverse of rotate_matrix.
template <typename Derived>
Eigen::Matrix<typename Derived::Scalar, Eigen::Dynamic, Eigen::Dynamic>
unrotate_matrix(const Eigen::MatrixBase<Derived> &w,
                const HadamardSpec &row_spec, const HadamardSpec &col_spec) {
  detail::require_power_of_two(static_cast<std::size_t>(w.rows()), "rows");
  detail::require_power_of_two(static_cast<std::size_t>(w.cols()), "columns");
  Eigen::Matrix<typename Derived::Scalar, Eigen::Dynamic, Eigen::Dynamic> out =
      w;
  for (Eigen::Index r = 0; r < out.rows(); ++r) {
    auto row = out.row(r);
    fwht_in_place(row, col_spec, Direction::inverse);
  }
  for (Eigen::Index c = 0; c < out.cols(); ++c) {
    auto column = out.col(c);
    fwht_in_place(column, row_spec, Direction::inverse);
  }
  return out;
}

} // namespace pvq
