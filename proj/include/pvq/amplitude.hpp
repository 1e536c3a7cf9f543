#pragma once

// Amplitude quantization on the quantiles of a Beta distribution.
//
// For a Gaussian row split into G groups of size D, the share of energy in
// one group, s_g^2 / ||s||^2, follows Beta(D/2, D(G-1)/2). Quantizing that
// share through the Beta CDF spreads the 2^b levels evenly in probability.

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace pvq {

/// Beta(alpha, beta) with alpha, beta > 0. Caches log B(alpha, beta).
class BetaParams {
public:
  BetaParams(double alpha, double beta);

  /// Beta(D/2, D(G-1)/2), the energy-share law for groups of size D in rows
  /// of G groups.
  static BetaParams for_groups(std::size_t groupsize, std::size_t groups);

  double alpha() const { return alpha_; }
  double beta() const { return beta_; }
  double log_beta_function() const { return log_beta_; }

private:
  double alpha_;
  double beta_;
  double log_beta_;
};

/// Regularized incomplete beta I_x(alpha, beta). x must lie in [0,1].
double beta_cdf(double x, const BetaParams &params);

/// Density; +inf at a boundary where the density diverges.
double beta_pdf(double x, const BetaParams &params);

/// Inverse of beta_cdf by safeguarded Newton iteration. q must lie in [0,1].
double beta_ppf(double q, const BetaParams &params);

/// floor(cdf(x) * 2^bits), clamped to 2^bits - 1.
std::uint32_t quantize_amplitude(double x, unsigned bits,
                                 const BetaParams &params);

/// ppf((level + 0.5) / 2^bits).
double dequantize_amplitude(std::uint32_t level, unsigned bits,
                            const BetaParams &params);

/// Linear interpolation of the CDF on a fixed grid (10000 points by default)
/// spanning [0, ppf(1 - 1e-13)]. A faster stand-in for beta_cdf.
class BetaCdfTable {
public:
  explicit BetaCdfTable(const BetaParams &params, std::size_t points = 10000);
  double operator()(double x) const;

private:
  double upper_;
  std::vector<double> values_;
};

struct AmplitudeRecord {
  std::vector<std::uint32_t> levels;
  double row_norm_sq = 0.0;
};

/// Quantizes each s_i^2 / ||s||^2 of one row (G = s.size() >= 2 groups of
/// size `groupsize`) with `bits` bits.
AmplitudeRecord quantize_row_amplitudes(std::span<const double> amplitudes,
                                        unsigned bits, std::size_t groupsize);

/// s_i = sqrt(ppf((level + 0.5) / 2^bits) * row_norm_sq).
std::vector<double> dequantize_row_amplitudes(const AmplitudeRecord &record,
                                              unsigned bits,
                                              std::size_t groupsize);

} // namespace pvq
