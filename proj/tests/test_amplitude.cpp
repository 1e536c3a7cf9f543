#include "pvq/amplitude.hpp"
#include "pvq/random.hpp"

#include <boost/math/special_functions/beta.hpp>
#include <doctest.h>

#include <cmath>
#include <vector>

using pvq::BetaParams;

namespace {

// Composite Simpson on the density, then bisection on the integral.
double simpson_cdf(double x, double a, double b) {
  const int n = 20000;
  const double lb = std::lgamma(a) + std::lgamma(b) - std::lgamma(a + b);
  auto f = [&](double t) {
    if (t <= 0.0 || t >= 1.0)
      return 0.0;
    return std::exp((a - 1) * std::log(t) + (b - 1) * std::log1p(-t) - lb);
  };
  const double h = x / n;
  double sum = f(0.0) + f(x);
  for (int i = 1; i < n; ++i)
    sum += f(i * h) * (i % 2 ? 4.0 : 2.0);
  return sum * h / 3.0;
}

double bisect_quantile(double q, double a, double b) {
  double lo = 0.0;
  double hi = 1.0;
  for (int i = 0; i < 60; ++i) {
    const double mid = 0.5 * (lo + hi);
    (simpson_cdf(mid, a, b) < q ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

} // namespace

TEST_CASE("Beta(1,1) is the identity") {
  const BetaParams u(1.0, 1.0);
  for (double x : {0.0, 1e-9, 0.1, 0.25, 0.5, 0.77, 1.0}) {
    CHECK(pvq::beta_cdf(x, u) == doctest::Approx(x).epsilon(1e-12));
    CHECK(pvq::beta_ppf(x, u) == doctest::Approx(x).epsilon(1e-12));
  }
}

TEST_CASE("Beta(1/2,1/2) is symmetric") {
  const BetaParams p(0.5, 0.5);
  CHECK(pvq::beta_cdf(0.5, p) == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(pvq::beta_ppf(0.5, p) == doctest::Approx(0.5).epsilon(1e-10));
  for (double x : {0.01, 0.2, 0.4})
    CHECK(pvq::beta_cdf(x, p) + pvq::beta_cdf(1 - x, p) ==
          doctest::Approx(1.0).epsilon(1e-12));
  // Arcsine law: I_x = (2/pi) asin(sqrt x).
  for (double x : {0.01, 0.3, 0.9})
    CHECK(pvq::beta_cdf(x, p) ==
          doctest::Approx(2.0 / M_PI * std::asin(std::sqrt(x))).epsilon(1e-12));
}

TEST_CASE("Beta(2,6) median against quadrature") {
  const BetaParams p(2.0, 6.0);
  const double expected = bisect_quantile(0.5, 2.0, 6.0);
  CHECK(pvq::beta_ppf(0.5, p) == doctest::Approx(expected).epsilon(1e-8));
  CHECK(expected == doctest::Approx(0.2291).epsilon(1e-3));
}

TEST_CASE("cdf matches boost::math::ibeta") {
  const std::vector<std::pair<double, double>> params{
      {0.5, 0.5}, {1, 1}, {2, 6}, {8, 8}, {8, 504}, {64, 4032}, {1, 15},
      {0.5, 30}, {4, 12}};
  for (auto [a, b] : params) {
    const BetaParams p(a, b);
    for (double x : {1e-8, 1e-5, 1e-3, 0.01, 0.05, 0.1, 0.3, 0.5, 0.8, 0.99}) {
      CAPTURE(a);
      CAPTURE(b);
      CAPTURE(x);
      CHECK(std::abs(pvq::beta_cdf(x, p) - boost::math::ibeta(a, b, x)) <=
            1e-10);
    }
  }
}

TEST_CASE("ppf inverts cdf") {
  const std::vector<std::pair<double, double>> params{
      {0.5, 0.5}, {1, 1}, {2, 6}, {8, 504}, {64, 4032}, {4, 12}};
  for (auto [a, b] : params) {
    const BetaParams p(a, b);
    for (double q = 0.001; q < 1.0; q += 0.0137) {
      const double x = pvq::beta_ppf(q, p);
      CAPTURE(a);
      CAPTURE(q);
      CHECK(std::abs(pvq::beta_cdf(x, p) - q) <= 1e-7);
    }
    CHECK(pvq::beta_ppf(0.0, p) == 0.0);
    CHECK(pvq::beta_ppf(1.0, p) == 1.0);
  }
}

TEST_CASE("domain errors") {
  CHECK_THROWS_AS(BetaParams(0.0, 1.0), std::invalid_argument);
  CHECK_THROWS_AS(BetaParams::for_groups(8, 1), std::invalid_argument);
  const BetaParams p(2, 2);
  CHECK_THROWS_AS(pvq::beta_cdf(1.5, p), std::domain_error);
  CHECK_THROWS_AS(pvq::beta_ppf(-0.1, p), std::domain_error);
  CHECK_THROWS_AS(pvq::quantize_amplitude(0.5, 0, p), std::invalid_argument);
  CHECK_THROWS_AS(pvq::dequantize_amplitude(4, 2, p), std::out_of_range);
}

TEST_CASE("scalar amplitude quantization") {
  const BetaParams u(1.0, 1.0);
  CHECK(pvq::quantize_amplitude(0.3, 2, u) == 1);
  CHECK(pvq::dequantize_amplitude(1, 2, u) == doctest::Approx(0.375));
  CHECK(pvq::quantize_amplitude(1.0, 2, u) == 3);
  CHECK(pvq::quantize_amplitude(0.0, 2, u) == 0);

  const BetaParams p = BetaParams::for_groups(16, 64);
  CHECK(p.alpha() == 8.0);
  CHECK(p.beta() == 504.0);
  for (unsigned bits : {1u, 3u, 6u, 10u}) {
    double prev = -1.0;
    for (std::uint32_t l = 0; l < (1u << bits); ++l) {
      const double x = pvq::dequantize_amplitude(l, bits, p);
      CHECK(x > prev);
      prev = x;
      // A reconstruction lies inside its own bin.
      CHECK(pvq::quantize_amplitude(x, bits, p) == l);
    }
  }
  std::uint32_t prev = 0;
  for (double x = 0.0; x <= 0.2; x += 0.0005) {
    const std::uint32_t l = pvq::quantize_amplitude(x, 5, p);
    CHECK(l >= prev);
    prev = l;
  }
}

TEST_CASE("row amplitudes") {
  const std::size_t d = 16;
  const std::size_t g = 32;

  const std::vector<double> equal(g, 2.0);
  const auto rec = pvq::quantize_row_amplitudes(equal, 6, d);
  CHECK(rec.row_norm_sq == doctest::Approx(4.0 * g));
  for (auto l : rec.levels)
    CHECK(l == rec.levels.front());

  std::vector<double> ordered(g);
  for (std::size_t i = 0; i < g; ++i)
    ordered[i] = 1.0 + 0.1 * static_cast<double>(i);
  const auto ord = pvq::quantize_row_amplitudes(ordered, 8, d);
  for (std::size_t i = 1; i < g; ++i)
    CHECK(ord.levels[i] >= ord.levels[i - 1]);

  const std::vector<double> zeros(g, 0.0);
  const auto z = pvq::quantize_row_amplitudes(zeros, 4, d);
  CHECK(z.row_norm_sq == 0.0);
  for (double s : pvq::dequantize_row_amplitudes(z, 4, d))
    CHECK(s == 0.0);

  double prev_error = 1e300;
  for (unsigned bits = 2; bits <= 8; ++bits) {
    pvq::Rng local(3);
    double error = 0.0;
    double energy = 0.0;
    for (int row = 0; row < 200; ++row) {
      std::vector<double> s(g);
      for (auto &v : s) {
        double e = 0.0;
        for (std::size_t i = 0; i < d; ++i) {
          const double x = local.gaussian();
          e += x * x;
        }
        v = std::sqrt(e);
      }
      const auto r = pvq::quantize_row_amplitudes(s, bits, d);
      const auto back = pvq::dequantize_row_amplitudes(r, bits, d);
      for (std::size_t i = 0; i < g; ++i) {
        error += (s[i] - back[i]) * (s[i] - back[i]);
        energy += s[i] * s[i];
      }
    }
    CAPTURE(bits);
    CHECK(error < prev_error);
    prev_error = error;
    if (bits == 8)
      CHECK(error / energy < 1e-4);
  }
}

TEST_CASE("interpolated cdf table") {
  for (auto [a, b] : std::vector<std::pair<double, double>>{
           {8, 504}, {2, 6}, {1, 1}, {32, 2016}}) {
    const BetaParams p(a, b);
    const pvq::BetaCdfTable table(p);
    for (double q = 0.0005; q < 1.0; q += 0.01) {
      const double x = pvq::beta_ppf(q, p);
      CHECK(std::abs(table(x) - pvq::beta_cdf(x, p)) <= 1e-4);
    }
    CHECK(table(0.0) == 0.0);
    CHECK(table(1.0) == doctest::Approx(1.0));
  }
}
