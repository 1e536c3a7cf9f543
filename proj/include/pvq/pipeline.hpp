#pragma once

// Layer quantization: coherence rotation, per-group direction quantization
// with optimal rescaling, Hessian error feedback, amplitude quantization and
// code packing. Also the round-to-nearest baseline.

#include "pvq/amplitude.hpp"
#include "pvq/codec.hpp"
#include "pvq/lattice.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <vector>

namespace pvq {

struct PvqConfig {
  std::size_t groupsize = 16;      // D
  std::size_t bits_per_group = 48; // direction bits per group of D weights
  unsigned amplitude_bits = 0;     // 0: amplitudes stored as float32
  bool coherence = false;
  std::uint64_t seed = 0;
  bool hessian_feedback = true;
  double dampening = 0.01;

  /// K for this configuration (largest pulse count whose codes fit).
  std::size_t pulses() const { return choose_pulses(groupsize, bits_per_group); }
  void validate() const;
};

/// bits_per_group from a per-weight direction budget; throws unless
/// direction_bits * groupsize is an integer.
std::size_t bits_per_group_for(double direction_bits, std::size_t groupsize);

/// Direction bits per weight, bits_per_group / D.
double direction_bits_per_weight(const PvqConfig &config);

/// bits_per_group/D + amplitude/D. Unquantized amplitudes are counted as
/// `unquantized_amplitude_bits` (32 matches what files store).
double nominal_bits_per_weight(const PvqConfig &config,
                               unsigned unquantized_amplitude_bits = 32);

/// Nominal BPW plus the float32 per-row norm amortized over the row when
/// amplitudes are quantized.
double effective_bits_per_weight(const PvqConfig &config, std::size_t cols,
                                 unsigned unquantized_amplitude_bits = 32);

/// Dampened empirical second moment H = E[x x^T] of layer inputs with its
/// Cholesky factor.
struct HessianState {
  Eigen::MatrixXd hessian;  // undampened
  Eigen::MatrixXd dampened; // hessian + lambda * mean(diag) * I
  Eigen::LLT<Eigen::MatrixXd> factor;
  std::size_t sample_count = 0;
  double dampening = 0.0;

  Eigen::Index dims() const { return hessian.rows(); }
};

/// Builds the dampened state from a given symmetric PSD matrix. Throws
/// std::runtime_error when the dampened matrix is not positive definite.
HessianState make_hessian_state(Eigen::MatrixXd hessian, double dampening,
                                std::size_t sample_count = 0);

/// Streams C-vectors into sum x x^T.
class HessianAccumulator {
public:
  explicit HessianAccumulator(Eigen::Index dims);
  template <typename Derived> void add(const Eigen::MatrixBase<Derived> &x) {
    if (x.size() != sum_.rows())
      throw std::invalid_argument("activation length does not match Hessian");
    const Eigen::VectorXd v = x.template cast<double>();
    sum_.selfadjointView<Eigen::Lower>().rankUpdate(v);
    ++count_;
  }
  /// Adds every row of a samples-by-C matrix.
  void add_rows(const Eigen::MatrixXd &samples);
  std::size_t count() const { return count_; }
  HessianState finalize(double dampening) const;

private:
  Eigen::MatrixXd sum_;
  std::size_t count_ = 0;
};

/// H = (1/M) X^T X over the rows of `activations` (M x C), dampened.
HessianState estimate_hessian(const Eigen::MatrixXd &activations,
                              double dampening = 0.01);

/// Least-squares scale s = <p,w>/<p,p> minimizing ||w - s p||, clamped at 0.
template <typename Derived>
double optimal_scale(const Eigen::MatrixBase<Derived> &w,
                     const PyramidPoint &p) {
  if (w.size() != p.dims())
    throw std::invalid_argument("optimal_scale: size mismatch");
  double cross = 0.0;
  double energy = 0.0;
  for (Eigen::Index i = 0; i < w.size(); ++i) {
    const double pi = static_cast<double>(p.coords[i]);
    cross += pi * static_cast<double>(w.derived()(i));
    energy += pi * pi;
  }
  if (energy == 0.0)
    throw std::invalid_argument("optimal_scale: zero codeword");
  return std::max(0.0, cross / energy);
}

/// Per-group symmetric round-to-nearest: scale = max|w| / (2^(bits-1) - 1),
/// levels clamped to +-(2^(bits-1) - 1). Groups run along each row. Returns
/// the dequantized matrix.
template <typename Derived>
Eigen::Matrix<typename Derived::Scalar, Eigen::Dynamic, Eigen::Dynamic>
rtn_quantize(const Eigen::MatrixBase<Derived> &w, std::size_t groupsize,
             unsigned bits) {
  using Scalar = typename Derived::Scalar;
  if (bits < 2 || bits > 31)
    throw std::invalid_argument("rtn_quantize: bits must be in [2, 31]");
  const auto d = static_cast<Eigen::Index>(groupsize);
  if (d < 1 || w.cols() % d != 0)
    throw std::invalid_argument("rtn_quantize: groupsize must divide columns");
  const Scalar qmax = static_cast<Scalar>((1u << (bits - 1)) - 1);
  Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> out(w.rows(), w.cols());
  for (Eigen::Index r = 0; r < w.rows(); ++r) {
    for (Eigen::Index g = 0; g < w.cols(); g += d) {
      const auto group = w.row(r).segment(g, d);
      const Scalar max_abs = group.cwiseAbs().maxCoeff();
      if (max_abs == Scalar(0)) {
        out.row(r).segment(g, d).setZero();
        continue;
      }
      const Scalar scale = max_abs / qmax;
      for (Eigen::Index i = 0; i < d; ++i) {
        const Scalar level = std::clamp(round_half_away(group(i) / scale),
                                        -qmax, qmax);
        out(r, g + i) = level * scale;
      }
    }
  }
  return out;
}

/// Stored form of a quantized N x C matrix. Holds exactly what a PVQT file
/// holds, so dequantizing in memory and from disk agree.
struct QuantizedTensor {
  std::uint64_t rows = 0;   // N
  std::uint64_t groups = 0; // G, C = G * D
  std::uint32_t groupsize = 0;
  std::uint32_t pulses = 0;
  std::uint32_t bits_per_group = 0;
  std::uint8_t amplitude_bits = 0;
  bool coherence = false;
  bool hessian_used = false;
  std::uint64_t seed = 0;

  PackedCodes directions;                      // N*G codes, row-major
  std::vector<float> amplitudes;               // N*G, when amplitude_bits == 0
  std::vector<std::uint32_t> amplitude_levels; // N*G, when amplitude_bits > 0
  std::vector<float> row_norm_sq;              // N, when amplitude_bits > 0

  std::uint64_t cols() const { return groups * groupsize; }
  PvqConfig config() const;
};

/// Tr((W - What) H (W - What)^T).
double proxy_loss(const Eigen::MatrixXd &w, const Eigen::MatrixXd &w_hat,
                  const Eigen::MatrixXd &hessian);

/// Quantizes W (N x C, C = G*D). With a Hessian and feedback enabled, the
/// not-yet-quantized columns absorb each group's error, left to right.
QuantizedTensor quantize_layer(const Eigen::MatrixXd &w,
                               const PvqConfig &config,
                               const HessianState *hessian = nullptr);

Eigen::MatrixXd dequantize_layer(const QuantizedTensor &qt);

/// On-the-fly activation quantization: per-group PVQ with full-precision
/// amplitudes, no feedback.
struct ActivationCodes {
  std::size_t groupsize = 0;
  std::size_t pulses = 0;
  PackedCodes codes;
  std::vector<double> amplitudes;
};

ActivationCodes quantize_activations(const Eigen::VectorXd &x,
                                     std::size_t groupsize,
                                     std::size_t bits_per_group);

Eigen::VectorXd dequantize_activations(const ActivationCodes &codes);

} // namespace pvq
