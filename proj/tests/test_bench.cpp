#include "pvq/bench.hpp"

#include <doctest.h>

#include <cmath>
#include <limits>

TEST_CASE("identity quantizer has infinite QSNR") {
  const auto r = pvq::measure_qsnr(
      "identity", [](const Eigen::VectorXd &x) { return x; }, 8, 0.0, 1000, 1);
  CHECK(std::isinf(r.qsnr_db));
  CHECK(r.sample_count == 1000);
  CHECK(pvq::qsnr_db(1.0, 0.1) == doctest::Approx(10.0));
}

TEST_CASE("pvq beats rtn and both improve with bits") {
  const std::vector<double> targets{2, 3, 4};
  for (std::size_t d : {8, 16, 32}) {
    const auto p = pvq::run_qsnr("pvq", d, targets, 4000, 1);
    const auto r = pvq::run_qsnr("rtn", d, targets, 4000, 1);
    REQUIRE(p.size() == 3);
    REQUIRE(r.size() == 3);
    for (std::size_t i = 0; i < 3; ++i) {
      CAPTURE(d);
      CAPTURE(targets[i]);
      CHECK_FALSE(p[i].skipped);
      CHECK(p[i].qsnr_db > r[i].qsnr_db);
      if (i > 0) {
        CHECK(p[i].qsnr_db > p[i - 1].qsnr_db);
        CHECK(r[i].qsnr_db > r[i - 1].qsnr_db);
      }
    }
  }
}

TEST_CASE("rtn lands in a plausible band") {
  for (unsigned b = 3; b <= 8; ++b) {
    const auto r = pvq::run_qsnr("rtn", 16, {static_cast<double>(b)}, 2000, 2);
    CAPTURE(b);
    CHECK(r[0].qsnr_db > 4.0 * b);
    CHECK(r[0].qsnr_db < 7.0 * b);
  }
}

TEST_CASE("unreachable targets are skipped") {
  const auto p = pvq::run_qsnr("pvq", 16, {2.03, 0.0625}, 1000, 1);
  CHECK(p[0].skipped);
  CHECK(p[1].skipped);
  CHECK(pvq::run_qsnr("pvq", 2, {16}, 1000, 1)[0].skipped);
  const auto r = pvq::run_qsnr("rtn", 16, {2.5, 1.0}, 1000, 1);
  CHECK(r[0].skipped);
  CHECK(r[1].skipped);
  CHECK_THROWS_AS(pvq::run_qsnr("lloyd", 16, {2}, 1000, 1),
                  std::invalid_argument);
  CHECK_THROWS_AS(pvq::run_qsnr("pvq", 16, {2}, 999, 1), std::invalid_argument);
}

TEST_CASE("QSNR runs are reproducible") {
  const auto a = pvq::run_qsnr("pvq", 16, {2, 3}, 2000, 9);
  const auto b = pvq::run_qsnr("pvq", 16, {2, 3}, 2000, 9);
  CHECK(a == b);
  CHECK(pvq::emit_csv(a) == pvq::emit_csv(b));
}

TEST_CASE("csv") {
  const std::string empty = pvq::emit_csv({});
  CHECK(empty == "method,D,bpw,qsnr_db,samples,seed\n");
  CHECK(pvq::parse_csv(empty).empty());

  auto reports = pvq::run_qsnr("rtn", 8, {3, 4}, 1000, 5);
  pvq::QsnrReport perfect{"identity", 4, 32.0,
                          std::numeric_limits<double>::infinity(), 1000, 1,
                          std::nullopt};
  reports.push_back(perfect);
  const std::string text = pvq::emit_csv(reports);
  CHECK(pvq::parse_csv(text) == reports);
  CHECK(text.find("inf") != std::string::npos);

  auto with_skip = reports;
  with_skip.push_back({"pvq", 16, 2.03, 0.0, 1000, 1, "not an integer"});
  CHECK(pvq::emit_csv(with_skip) == text);

  CHECK_THROWS_AS(pvq::parse_csv("a,b\n"), std::invalid_argument);
  CHECK_THROWS_AS(
      pvq::parse_csv("method,D,bpw,qsnr_db,samples,seed\npvq,x,2,1,1000,1\n"),
      std::invalid_argument);
}

TEST_CASE("KS critical value") {
  CHECK(pvq::ks_critical_value(10000, 0.01) ==
        doctest::Approx(0.016276).epsilon(1e-4));
  CHECK(pvq::ks_statistic({0.5}, [](double x) { return x; }) ==
        doctest::Approx(0.5));
}

TEST_CASE("group energy shares follow the Beta law") {
  const auto r = pvq::run_beta_ks(4, 4, 10000, 7);
  CHECK(r.passed);
  CHECK(r.statistic < r.critical_value);
  CHECK(pvq::run_beta_ks(2, 2, 10000, 3).passed);
  CHECK(pvq::run_beta_ks(16, 32, 10000, 4).passed);

  // A wrong reference law must be rejected.
  const auto wrong = pvq::run_beta_ks(4, 4, 10000, 7, 0.01,
                                      pvq::BetaParams(2.0, 2.0));
  CHECK_FALSE(wrong.passed);

  const auto a = pvq::sample_group_energy_shares(4, 4, 1000, 11);
  const auto b = pvq::sample_group_energy_shares(4, 4, 1000, 11);
  CHECK(a == b);
  for (double s : a) {
    CHECK(s >= 0.0);
    CHECK(s <= 1.0);
  }
}

TEST_CASE("codec selftest") {
  const auto report = pvq::run_codec_selftest(4, 6);
  CHECK(report.configurations == 24);
  CHECK(report.failures.empty());
  CHECK(report.points > 0);
  CHECK(pvq::enumerate_pyramid(2, 2).size() == 8);
}
