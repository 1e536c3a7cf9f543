// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any
// failure.

#include "oracles.hpp"
#include "pvq/amplitude.hpp"
#include "pvq/bench.hpp"
#include "pvq/cli.hpp"
#include "pvq/codec.hpp"
#include "pvq/coherence.hpp"
#include "pvq/io.hpp"
#include "pvq/lattice.hpp"
#include "pvq/pipeline.hpp"
#include "pvq/random.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include <unistd.h>

namespace {

struct Outcome {
  bool passed = true;
  std::string detail;

  void require(bool ok, const std::string &what) {
    if (!ok) {
      passed = false;
      if (!detail.empty())
        detail += "; ";
      detail += what;
    }
  }
};

struct Criterion {
  int id;
  std::string name;
  double budget_seconds;
  std::function<Outcome()> run;
};

Eigen::MatrixXd gaussian(Eigen::Index r, Eigen::Index c, std::uint64_t seed) {
  pvq::Rng rng(seed);
  Eigen::MatrixXd m(r, c);
  for (Eigen::Index i = 0; i < r; ++i)
    for (Eigen::Index j = 0; j < c; ++j)
      m(i, j) = rng.gaussian();
  return m;
}

std::string num(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

Outcome size_table_anchor() {
  Outcome o;
  const auto t = pvq::build_size_table(2, 7);
  o.require(t.count(2, 7) == pvq::CodeInteger(28), "N(2,7) != 28");
  const auto big = pvq::build_size_table(16, 16);
  for (std::size_t d = 0; d <= 16; ++d)
    o.require(big.count(d, 0) == pvq::CodeInteger(1), "N(d,0) != 1");
  for (std::size_t k = 1; k <= 16; ++k)
    o.require(big.count(0, k).is_zero(), "N(0,k) != 0");
  std::uint64_t max_code = 0;
  for (const auto &p : pvq::enumerate_pyramid(2, 7))
    max_code = std::max(max_code, pvq::encode(p, t).low_word());
  o.require(max_code == 27, "largest code of P(2,7) is not 27");
  o.detail = o.passed ? "N(2,7)=28, codes span [0,27]" : o.detail;
  return o;
}

Outcome bijectivity() {
  Outcome o;
  std::size_t points = 0;
  auto check = [&](std::size_t d, std::size_t k, bool exhaustive_points) {
    const auto table = pvq::cached_size_table(d, k);
    const std::uint64_t n = table->codebook_size().low_word();
    std::vector<bool> seen(n, false);
    if (exhaustive_points) {
      for (const auto &p : pvq::enumerate_pyramid(d, k)) {
        const pvq::CodeInteger c = pvq::encode(p, *table);
        if (!(c < table->codebook_size()) || seen[c.low_word()] ||
            !(pvq::decode(c, *table) == p)) {
          o.require(false, "failure at d=" + std::to_string(d) +
                               " k=" + std::to_string(k));
          return;
        }
        seen[c.low_word()] = true;
        ++points;
      }
    } else {
      for (std::uint64_t c = 0; c < n; ++c) {
        const pvq::PyramidPoint p = pvq::decode(pvq::CodeInteger(c), *table);
        if (p.l1_norm() != static_cast<std::int64_t>(k) ||
            !(pvq::encode(p, *table) == pvq::CodeInteger(c))) {
          o.require(false, "spot failure at d=" + std::to_string(d) +
                               " k=" + std::to_string(k));
          return;
        }
        seen[c] = true;
        ++points;
      }
    }
    for (bool b : seen)
      if (!b) {
        o.require(false, "code range not covered at d=" + std::to_string(d));
        return;
      }
  };
  for (std::size_t d = 1; d <= 4; ++d)
    for (std::size_t k = 0; k <= 8; ++k)
      check(d, k, true);
  // Codebooks of 2.7e4 to 6.4e5 entries.
  check(3, 400, false);
  check(8, 6, false);
  check(12, 5, false);
  check(16, 4, false);

  const auto t21 = pvq::cached_size_table(2, 1);
  const pvq::PyramidPoint neg{Eigen::Vector2i(-1, 0)};
  o.require(pvq::encode(neg, *t21) == pvq::CodeInteger(3) &&
                pvq::decode(pvq::CodeInteger(3), *t21) == neg,
            "(-1,0) does not roundtrip through code 3");
  if (o.passed)
    o.detail = std::to_string(points) + " points";
  return o;
}

Outcome near_optimality() {
  Outcome o;
  double worst = 0.0;
  for (int d = 2; d <= 4; ++d)
    for (int k = 2; k <= 8; ++k) {
      std::vector<Eigen::VectorXd> book;
      pvq::testing::for_each_box_point(d, k, [&](const std::vector<int> &p) {
        Eigen::VectorXd v(d);
        for (int i = 0; i < d; ++i)
          v[i] = p[static_cast<std::size_t>(i)];
        book.push_back(v.normalized());
      });
      const auto table = pvq::cached_size_table(d, k);
      pvq::Rng rng(pvq::derive_seed(2024, static_cast<std::uint64_t>(d * 16 + k)));
      double greedy = 0.0;
      double best = 0.0;
      for (int s = 0; s < 1000; ++s) {
        Eigen::VectorXd v(d);
        for (int i = 0; i < d; ++i)
          v[i] = rng.gaussian();
        const Eigen::VectorXd u = v.normalized();
        greedy += (u - pvq::to_sphere(pvq::quantize_direction(v, *table)))
                      .squaredNorm();
        double m = 1e300;
        for (const auto &c : book)
          m = std::min(m, (u - c).squaredNorm());
        best += m;
      }
      const double excess = greedy / best - 1.0;
      worst = std::max(worst, excess);
      o.require(excess <= 0.01, "D=" + std::to_string(d) + " K=" +
                                    std::to_string(k) + " excess " +
                                    num(excess));
    }
  if (o.passed)
    o.detail = "worst relative excess " + num(worst);
  return o;
}

Outcome beta_law() {
  Outcome o;
  const auto r = pvq::run_beta_ks(4, 4, 10000, 7, 0.01);
  o.require(r.passed && r.statistic < 0.0163,
            "KS " + num(r.statistic) + " >= " + num(r.critical_value));
  const auto control =
      pvq::run_beta_ks(4, 4, 10000, 7, 0.01, pvq::BetaParams(2.0, 2.0));
  o.require(!control.passed, "Beta(2,2) control was not rejected");
  if (o.passed)
    o.detail = "KS " + num(r.statistic) + " < " + num(r.critical_value) +
               ", control KS " + num(control.statistic);
  return o;
}

Outcome qsnr_ordering() {
  Outcome o;
  const std::vector<double> targets{2, 3, 4};
  double min_margin = 1e300;
  for (std::size_t d : {8, 16, 32}) {
    const auto p = pvq::run_qsnr("pvq", d, targets, 1000, 1);
    const auto r = pvq::run_qsnr("rtn", d, targets, 1000, 1);
    for (std::size_t i = 0; i < targets.size(); ++i) {
      const std::string where =
          "D=" + std::to_string(d) + " bpw=" + num(targets[i]);
      o.require(!p[i].skipped && !r[i].skipped, where + " skipped");
      o.require(p[i].qsnr_db > r[i].qsnr_db, where + " PVQ <= RTN");
      min_margin = std::min(min_margin, p[i].qsnr_db - r[i].qsnr_db);
      if (i > 0) {
        o.require(p[i].qsnr_db > p[i - 1].qsnr_db, where + " PVQ not monotone");
        o.require(r[i].qsnr_db > r[i - 1].qsnr_db, where + " RTN not monotone");
      }
    }
  }
  if (o.passed)
    o.detail = "smallest margin " + num(min_margin) + " dB";
  return o;
}

Outcome error_feedback() {
  Outcome o;
  double mean_ratio = 0.0;
  for (std::uint64_t inst = 0; inst < 20; ++inst) {
    const Eigen::MatrixXd w = gaussian(64, 256, pvq::derive_seed(inst, 0));
    const Eigen::MatrixXd a = gaussian(256, 256, pvq::derive_seed(inst, 1));
    const auto h = pvq::make_hessian_state(a.transpose() * a / 256.0, 0.01);
    pvq::PvqConfig c;
    c.groupsize = 16;
    c.bits_per_group = 48;
    const double with = pvq::proxy_loss(
        w, pvq::dequantize_layer(pvq::quantize_layer(w, c, &h)), h.hessian);
    c.hessian_feedback = false;
    const double without = pvq::proxy_loss(
        w, pvq::dequantize_layer(pvq::quantize_layer(w, c, &h)), h.hessian);
    o.require(with <= without, "instance " + std::to_string(inst) + ": " +
                                   num(with) + " > " + num(without));
    mean_ratio += with / without / 20.0;
  }
  if (o.passed)
    o.detail = "mean loss ratio with/without " + num(mean_ratio);
  return o;
}

Outcome bit_accounting() {
  Outcome o;
  pvq::PvqConfig a;
  a.groupsize = 128;
  a.bits_per_group = pvq::bits_per_group_for(3.0, 128);
  o.require(pvq::nominal_bits_per_weight(a, 16) == 3.125, "D=128 anchor");
  pvq::PvqConfig b;
  b.groupsize = 16;
  b.bits_per_group = pvq::bits_per_group_for(3.0, 16);
  b.amplitude_bits = 4;
  o.require(pvq::nominal_bits_per_weight(b) == 3.25, "D=16 b_a=4 anchor");
  pvq::PvqConfig c;
  c.groupsize = 16;
  c.bits_per_group = 40;
  o.require(pvq::direction_bits_per_weight(c) == 2.5, "bits_per_group=40 anchor");

  const Eigen::MatrixXd w = gaussian(24, 256, 3);
  for (const pvq::PvqConfig &cfg : {a, b, c}) {
    const auto qt = pvq::quantize_layer(w, cfg);
    const std::uint64_t n = qt.rows;
    const std::uint64_t g = qt.groups;
    const std::uint64_t direction = (n * g * cfg.bits_per_group + 7) / 8;
    const std::uint64_t amplitude =
        cfg.amplitude_bits == 0
            ? n * g * 4
            : n * ((g * cfg.amplitude_bits + 7) / 8 + 4);
    const std::uint64_t expected = 45 + direction + amplitude;
    const auto bytes = pvq::serialize_quantized(qt);
    o.require(bytes.size() == expected,
              "file is " + std::to_string(bytes.size()) + " bytes, header "
              "arithmetic gives " + std::to_string(expected));
  }
  if (o.passed)
    o.detail = "3.125, 3.25, 2.5; file sizes match";
  return o;
}

int run_cli(const std::vector<std::string> &args) {
  std::vector<const char *> argv{"pvq"};
  for (const auto &a : args)
    argv.push_back(a.c_str());
  std::ostringstream out, err;
  return pvq::run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
}

Outcome determinism() {
  Outcome o;
  namespace fs = std::filesystem;
  const fs::path dir =
      fs::temp_directory_path() / ("pvq_accept_" + std::to_string(::getpid()));
  fs::create_directories(dir);
  pvq::write_dense(dir / "w.dtf", pvq::DenseTensor::from_matrix(gaussian(32, 256, 4)));
  pvq::write_dense(dir / "x.dtf", pvq::DenseTensor::from_matrix(gaussian(512, 256, 5)));
  std::vector<std::vector<std::uint8_t>> files;
  for (const char *name : {"a.pvqt", "b.pvqt"}) {
    const int code = run_cli({"quantize", "--input", (dir / "w.dtf").string(),
                              "--calib", (dir / "x.dtf").string(),
                              "--groupsize", "16", "--direction-bits", "3",
                              "--amplitude-bits", "6", "--coherence", "--seed",
                              "99", "-o", (dir / name).string()});
    o.require(code == 0, "quantize exited with " + std::to_string(code));
    if (code == 0)
      files.push_back(pvq::read_file(dir / name));
  }
  o.require(files.size() == 2 && files[0] == files[1],
            "PVQT files differ between runs");
  fs::remove_all(dir);

  const Eigen::MatrixXd m = gaussian(64, 512, 6);
  const auto [rs, cs] = pvq::coherence_specs(64, 512, 99);
  const Eigen::MatrixXd back =
      pvq::unrotate_matrix(pvq::rotate_matrix(m, rs, cs), rs, cs);
  const double rel = (back - m).norm() / m.norm();
  o.require(rel <= 1e-5, "coherence roundtrip error " + num(rel));
  if (o.passed)
    o.detail = "identical files, roundtrip error " + num(rel);
  return o;
}

Outcome beta_accuracy() {
  Outcome o;
  const std::vector<std::pair<double, double>> params{
      {0.5, 0.5}, {1, 1}, {2, 6}, {8, 504}, {64, 4032}, {4, 12}};
  double worst = 0.0;
  for (auto [a, b] : params) {
    const pvq::BetaParams p(a, b);
    for (int i = 1; i <= 1000; ++i) {
      const double q = i / 1001.0;
      worst = std::max(worst,
                       std::abs(pvq::beta_cdf(pvq::beta_ppf(q, p), p) - q));
    }
  }
  o.require(worst <= 1e-7, "cdf(ppf(q)) off by " + num(worst));
  const pvq::BetaParams u(1.0, 1.0);
  double identity = 0.0;
  for (int i = 0; i <= 1000; ++i) {
    const double x = i / 1000.0;
    identity = std::max({identity, std::abs(pvq::beta_cdf(x, u) - x),
                         std::abs(pvq::beta_ppf(x, u) - x)});
  }
  o.require(identity <= 1e-12, "Beta(1,1) deviates by " + num(identity));
  if (o.passed)
    o.detail = "max |cdf(ppf(q))-q| " + num(worst) + ", Beta(1,1) " +
               num(identity);
  return o;
}

} // namespace

int main() {
  const std::vector<Criterion> criteria{
      {1, "size table anchor", 1, size_table_anchor},
      {2, "encode/decode bijectivity", 30, bijectivity},
      {3, "quantizer near-optimality", 60, near_optimality},
      {4, "group energy follows Beta law", 10, beta_law},
      {5, "QSNR ordering vs RTN", 120, qsnr_ordering},
      {6, "Hessian error feedback", 120, error_feedback},
      {7, "bit accounting", 10, bit_accounting},
      {8, "determinism", 60, determinism},
      {9, "Beta CDF/PPF accuracy", 10, beta_accuracy},
  };
  int failures = 0;
  for (const auto &c : criteria) {
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception &e) {
      o.passed = false;
      o.detail = std::string("exception: ") + e.what();
    }
    const double seconds = std::chrono::duration<double>(
                               std::chrono::steady_clock::now() - start)
                               .count();
    if (seconds > c.budget_seconds)
      o.require(false, "took " + num(seconds) + " s, budget " +
                           num(c.budget_seconds) + " s");
    if (!o.passed)
      ++failures;
    std::printf("%s [%d] %s (%.2f s): %s\n", o.passed ? "PASS" : "FAIL", c.id,
                c.name.c_str(), seconds, o.detail.c_str());
  }
  std::printf("%d/%zu criteria passed\n",
              static_cast<int>(criteria.size()) - failures, criteria.size());
  return failures == 0 ? 0 : 1;
}
