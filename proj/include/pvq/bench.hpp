#pragma once

// Reproduction harness on synthetic Gaussian sources: QSNR of PVQ against
// round-to-nearest, and Kolmogorov-Smirnov checks of the Beta amplitude law.

#include "pvq/amplitude.hpp"
#include "pvq/codec.hpp"

#include <Eigen/Core>

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace pvq {

struct QsnrReport {
  std::string method;
  std::size_t groupsize = 0;
  double bpw = 0.0;
  double qsnr_db = 0.0; // +inf when the error is exactly zero
  std::size_t sample_count = 0;
  std::uint64_t seed = 0;
  std::optional<std::string> skipped; // reason, when the target is unreachable

  friend bool operator==(const QsnrReport &, const QsnrReport &) = default;
};

/// A quantizer under test: maps one D-vector to its reconstruction.
using VectorQuantizer =
    std::function<Eigen::VectorXd(const Eigen::VectorXd &)>;

/// 10 log10(signal / error); +inf for zero error.
double qsnr_db(double signal_energy, double error_energy);

/// QSNR of an arbitrary quantizer over `samples` iid standard Gaussian
/// D-vectors. Sample i comes from stream derive_seed(seed, i / 256) so the
/// draws do not depend on threading.
QsnrReport measure_qsnr(std::string method, const VectorQuantizer &quantizer,
                        std::size_t groupsize, double bpw, std::size_t samples,
                        std::uint64_t seed);

/// Built-in methods: "pvq" (bpw*D direction bits per group, full-precision
/// amplitude) and "rtn" (bpw-bit symmetric RTN with a per-group scale).
/// Targets that cannot be realized are returned with `skipped` set.
std::vector<QsnrReport> run_qsnr(std::string_view method, std::size_t groupsize,
                                 const std::vector<double> &bpw_targets,
                                 std::size_t samples, std::uint64_t seed);

struct KsResult {
  double statistic = 0.0;
  double critical_value = 0.0;
  double alpha = 0.01;
  std::size_t sample_count = 0;
  bool passed = false;
};

/// Two-sided KS statistic of `samples` against a continuous CDF.
double ks_statistic(std::vector<double> samples,
                    const std::function<double(double)> &cdf);

/// Asymptotic critical value sqrt(-ln(alpha/2)/2) / sqrt(n).
double ks_critical_value(std::size_t n, double alpha);

/// Draws one normalized group energy ||v_1||^2 / ||w||^2 per Gaussian
/// w in R^{G*D}.
std::vector<double> sample_group_energy_shares(std::size_t groupsize,
                                               std::size_t groups,
                                               std::size_t samples,
                                               std::uint64_t seed);

/// KS test of the group energy share against Beta(D/2, D(G-1)/2), or against
/// `reference` when given.
KsResult run_beta_ks(std::size_t groupsize, std::size_t groups,
                     std::size_t samples, std::uint64_t seed,
                     double alpha = 0.01,
                     std::optional<BetaParams> reference = std::nullopt);

/// Columns: method,D,bpw,qsnr_db,samples,seed. Skipped reports are omitted.
std::string emit_csv(const std::vector<QsnrReport> &reports);
std::vector<QsnrReport> parse_csv(std::string_view text);

} // namespace pvq

namespace pvq {

/// Every point of P(d,k), lexicographic over coordinates.
std::vector<PyramidPoint> enumerate_pyramid(std::size_t dims,
                                                   std::size_t pulses);

struct SelftestFailure {
  std::size_t dims = 0;
  std::size_t pulses = 0;
  std::string point;
  std::string code;
  std::string what;
};

struct SelftestReport {
  std::size_t configurations = 0;
  std::size_t points = 0;
  std::size_t checks = 0;
  std::vector<SelftestFailure> failures;
};

/// For 1 <= d <= max_dims and 1 <= k <= max_pulses: encode is a bijection of
/// P(d,k) onto [0, N(d,k)), decode inverts it, every point is a fixed point
/// of quantize_direction, and projected codewords have unit norm.
SelftestReport run_codec_selftest(std::size_t max_dims, std::size_t max_pulses);

} // namespace pvq
