#include "pvq/amplitude.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

namespace pvq {

namespace {

constexpr unsigned kMaxAmplitudeBits = 31;

void check_bits(unsigned bits) {
  if (bits < 1 || bits > kMaxAmplitudeBits)
    throw std::invalid_argument("amplitude bits must be in [1, " +
                                std::to_string(kMaxAmplitudeBits) + "], got " +
                                std::to_string(bits));
}

// Continued fraction for I_x(a,b) (modified Lentz), valid and fast for
// x < (a+1)/(a+b+2).
double incomplete_beta_fraction(double a, double b, double x) {
  constexpr int kMaxIter = 100000;
  constexpr double kEps = 1e-16;
  constexpr double kTiny = 1e-300;
  const double qab = a + b;
  const double qap = a + 1.0;
  const double qam = a - 1.0;
  double c = 1.0;
  double d = 1.0 - qab * x / qap;
  if (std::abs(d) < kTiny)
    d = kTiny;
  d = 1.0 / d;
  double h = d;
  for (int m = 1; m <= kMaxIter; ++m) {
    const double m2 = 2.0 * m;
    double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
    d = 1.0 + aa * d;
    if (std::abs(d) < kTiny)
      d = kTiny;
    c = 1.0 + aa / c;
    if (std::abs(c) < kTiny)
      c = kTiny;
    d = 1.0 / d;
    h *= d * c;
    aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
    d = 1.0 + aa * d;
    if (std::abs(d) < kTiny)
      d = kTiny;
    c = 1.0 + aa / c;
    if (std::abs(c) < kTiny)
      c = kTiny;
    d = 1.0 / d;
    const double delta = d * c;
    h *= delta;
    if (std::abs(delta - 1.0) < kEps)
      return h;
  }
  throw std::runtime_error("incomplete beta continued fraction did not "
                           "converge");
}

// Bisection step for the ppf bracket. Steps are geometric in x near 0 and in
// 1-x near 1, so quantiles deep in either tail are reached in few steps.
double bracket_step(double lo, double hi) {
  if (lo == 0.0)
    return hi * 0.01;
  if (hi == 1.0)
    return 1.0 - (1.0 - lo) * 0.01;
  if (hi / lo > 4.0)
    return std::sqrt(lo * hi);
  if ((1.0 - lo) / (1.0 - hi) > 4.0)
    return 1.0 - std::sqrt((1.0 - lo) * (1.0 - hi));
  return 0.5 * (lo + hi);
}

void check_unit(double x, const char *what) {
  if (!(x >= 0.0 && x <= 1.0))
    throw std::domain_error(std::string(what) + " must lie in [0,1], got " +
                            std::to_string(x));
}

} // namespace

BetaParams::BetaParams(double alpha, double beta) : alpha_(alpha), beta_(beta) {
  if (!(alpha > 0.0) || !(beta > 0.0) || !std::isfinite(alpha) ||
      !std::isfinite(beta))
    throw std::invalid_argument("Beta parameters must be positive and finite");
  log_beta_ = std::lgamma(alpha) + std::lgamma(beta) - std::lgamma(alpha + beta);
}

BetaParams BetaParams::for_groups(std::size_t groupsize, std::size_t groups) {
  if (groupsize < 1 || groups < 2)
    throw std::invalid_argument("Beta amplitude model needs groupsize >= 1 and "
                                "at least 2 groups");
  const double d = static_cast<double>(groupsize);
  return BetaParams(d / 2.0, d * static_cast<double>(groups - 1) / 2.0);
}

double beta_cdf(double x, const BetaParams &params) {
  check_unit(x, "beta_cdf: x");
  if (x == 0.0)
    return 0.0;
  if (x == 1.0)
    return 1.0;
  const double a = params.alpha();
  const double b = params.beta();
  const double log_front =
      a * std::log(x) + b * std::log1p(-x) - params.log_beta_function();
  const double front = std::exp(log_front);
  if (x < (a + 1.0) / (a + b + 2.0))
    return front * incomplete_beta_fraction(a, b, x) / a;
  return 1.0 - front * incomplete_beta_fraction(b, a, 1.0 - x) / b;
}

double beta_pdf(double x, const BetaParams &params) {
  check_unit(x, "beta_pdf: x");
  const double a = params.alpha();
  const double b = params.beta();
  if (x == 0.0)
    return a < 1.0 ? std::numeric_limits<double>::infinity()
                   : (a == 1.0 ? std::exp(-params.log_beta_function()) : 0.0);
  if (x == 1.0)
    return b < 1.0 ? std::numeric_limits<double>::infinity()
                   : (b == 1.0 ? std::exp(-params.log_beta_function()) : 0.0);
  return std::exp((a - 1.0) * std::log(x) + (b - 1.0) * std::log1p(-x) -
                  params.log_beta_function());
}

double beta_ppf(double q, const BetaParams &params) {
  check_unit(q, "beta_ppf: q");
  if (q == 0.0)
    return 0.0;
  if (q == 1.0)
    return 1.0;

  double lo = 0.0;
  double hi = 1.0;
  double x = params.alpha() / (params.alpha() + params.beta());
  constexpr int kMaxIter = 2000;
  for (int iter = 0; iter < kMaxIter; ++iter) {
    const double f = beta_cdf(x, params) - q;
    if (f == 0.0)
      return x;
    if (f < 0.0)
      lo = x;
    else
      hi = x;
    if (hi - lo <= 2.0 * std::numeric_limits<double>::epsilon() * x ||
        hi - lo <= std::numeric_limits<double>::min())
      break;

    double next = std::numeric_limits<double>::quiet_NaN();
    const double density = beta_pdf(x, params);
    if (density > 0.0 && std::isfinite(density))
      next = x - f / density;
    if (!(next > lo && next < hi))
      next = bracket_step(lo, hi);
    if (next == x)
      break;
    x = next;
  }
  return x;
}

std::uint32_t quantize_amplitude(double x, unsigned bits,
                                 const BetaParams &params) {
  check_bits(bits);
  const double levels = std::ldexp(1.0, static_cast<int>(bits));
  const double scaled = std::floor(beta_cdf(x, params) * levels);
  return static_cast<std::uint32_t>(std::clamp(scaled, 0.0, levels - 1.0));
}

double dequantize_amplitude(std::uint32_t level, unsigned bits,
                            const BetaParams &params) {
  check_bits(bits);
  const std::uint64_t levels = std::uint64_t{1} << bits;
  if (level >= levels)
    throw std::out_of_range("amplitude level " + std::to_string(level) +
                            " out of range for " + std::to_string(bits) +
                            " bits");
  return beta_ppf((static_cast<double>(level) + 0.5) /
                      static_cast<double>(levels),
                  params);
}

BetaCdfTable::BetaCdfTable(const BetaParams &params, std::size_t points)
    : upper_(beta_ppf(1.0 - 1e-13, params)), values_(points) {
  if (points < 2)
    throw std::invalid_argument("BetaCdfTable needs at least 2 points");
  for (std::size_t i = 0; i < points; ++i) {
    const double x = upper_ * static_cast<double>(i) /
                     static_cast<double>(points - 1);
    values_[i] = beta_cdf(std::min(x, 1.0), params);
  }
}

double BetaCdfTable::operator()(double x) const {
  check_unit(x, "BetaCdfTable: x");
  if (x >= upper_)
    return x == upper_ ? values_.back() : 1.0;
  const double pos = x / upper_ * static_cast<double>(values_.size() - 1);
  const auto idx = static_cast<std::size_t>(pos);
  const double frac = pos - static_cast<double>(idx);
  return values_[idx] + frac * (values_[idx + 1] - values_[idx]);
}

AmplitudeRecord quantize_row_amplitudes(std::span<const double> amplitudes,
                                        unsigned bits, std::size_t groupsize) {
  check_bits(bits);
  const std::size_t groups = amplitudes.size();
  const BetaParams params = BetaParams::for_groups(groupsize, groups);
  AmplitudeRecord record;
  record.levels.assign(groups, 0);
  for (double s : amplitudes) {
    if (!(s >= 0.0) || !std::isfinite(s))
      throw std::domain_error("amplitudes must be finite and nonnegative");
    record.row_norm_sq += s * s;
  }
  if (record.row_norm_sq == 0.0)
    return record;
  for (std::size_t i = 0; i < groups; ++i) {
    const double share =
        std::min(1.0, amplitudes[i] * amplitudes[i] / record.row_norm_sq);
    record.levels[i] = quantize_amplitude(share, bits, params);
  }
  return record;
}

std::vector<double> dequantize_row_amplitudes(const AmplitudeRecord &record,
                                              unsigned bits,
                                              std::size_t groupsize) {
  const std::size_t groups = record.levels.size();
  std::vector<double> out(groups, 0.0);
  if (record.row_norm_sq == 0.0)
    return out;
  if (!(record.row_norm_sq > 0.0) || !std::isfinite(record.row_norm_sq))
    throw std::domain_error("row_norm_sq must be finite and nonnegative");
  const BetaParams params = BetaParams::for_groups(groupsize, groups);
  for (std::size_t i = 0; i < groups; ++i)
    out[i] = std::sqrt(dequantize_amplitude(record.levels[i], bits, params) *
                       record.row_norm_sq);
  return out;
}

} // namespace pvq
