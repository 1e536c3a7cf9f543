#include "pvq/bench.hpp"

#include "pvq/codec.hpp"
#include "pvq/lattice.hpp"
#include "pvq/parallel.hpp"
#include "pvq/pipeline.hpp"
#include "pvq/random.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>

namespace pvq {

namespace {

constexpr std::size_t kBatch = 256;

std::string format_double(double value) {
  if (std::isinf(value))
    return value > 0 ? "inf" : "-inf";
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, value);
  if (ec != std::errc())
    throw std::runtime_error("failed to format number");
  return std::string(buf, end);
}

double parse_double(std::string_view field) {
  if (field == "inf")
    return std::numeric_limits<double>::infinity();
  if (field == "-inf")
    return -std::numeric_limits<double>::infinity();
  double value = 0.0;
  auto [ptr, ec] =
      std::from_chars(field.data(), field.data() + field.size(), value);
  if (ec != std::errc() || ptr != field.data() + field.size())
    throw std::invalid_argument("bad number in CSV: '" + std::string(field) +
                                "'");
  return value;
}

template <typename T> T parse_unsigned(std::string_view field) {
  T value = 0;
  auto [ptr, ec] =
      std::from_chars(field.data(), field.data() + field.size(), value);
  if (ec != std::errc() || ptr != field.data() + field.size())
    throw std::invalid_argument("bad integer in CSV: '" + std::string(field) +
                                "'");
  return value;
}

std::optional<std::size_t> integral_bits(double bpw, std::size_t groupsize) {
  const double total = bpw * static_cast<double>(groupsize);
  const double rounded = std::round(total);
  if (!(bpw > 0.0) || std::abs(total - rounded) > 1e-9)
    return std::nullopt;
  return static_cast<std::size_t>(rounded);
}

} // namespace

double qsnr_db(double signal_energy, double error_energy) {
  if (error_energy == 0.0)
    return std::numeric_limits<double>::infinity();
  return 10.0 * std::log10(signal_energy / error_energy);
}

QsnrReport measure_qsnr(std::string method, const VectorQuantizer &quantizer,
                        std::size_t groupsize, double bpw, std::size_t samples,
                        std::uint64_t seed) {
  if (groupsize < 1)
    throw std::invalid_argument("groupsize must be >= 1");
  const std::size_t batches = (samples + kBatch - 1) / kBatch;
  std::vector<double> signal(batches, 0.0);
  std::vector<double> error(batches, 0.0);
  parallel_for(0, batches, [&](std::size_t b) {
    Rng rng(derive_seed(seed, b));
    const std::size_t count = std::min(kBatch, samples - b * kBatch);
    Eigen::VectorXd x(static_cast<Eigen::Index>(groupsize));
    for (std::size_t i = 0; i < count; ++i) {
      for (Eigen::Index j = 0; j < x.size(); ++j)
        x[j] = rng.gaussian();
      const Eigen::VectorXd x_hat = quantizer(x);
      signal[b] += x.squaredNorm();
      error[b] += (x - x_hat).squaredNorm();
    }
  });
  double total_signal = 0.0;
  double total_error = 0.0;
  for (std::size_t b = 0; b < batches; ++b) {
    total_signal += signal[b];
    total_error += error[b];
  }
  return QsnrReport{std::move(method), groupsize, bpw,
                    qsnr_db(total_signal, total_error), samples, seed,
                    std::nullopt};
}

std::vector<QsnrReport> run_qsnr(std::string_view method, std::size_t groupsize,
                                 const std::vector<double> &bpw_targets,
                                 std::size_t samples, std::uint64_t seed) {
  if (samples < 1000)
    throw std::invalid_argument("QSNR runs need at least 1000 samples");
  if (method != "pvq" && method != "rtn")
    throw std::invalid_argument("unknown method '" + std::string(method) +
                                "' (expected pvq or rtn)");
  std::vector<QsnrReport> reports;
  for (double bpw : bpw_targets) {
    QsnrReport skipped{std::string(method), groupsize, bpw, 0.0, samples, seed,
                       std::nullopt};
    if (method == "pvq") {
      const auto bits = integral_bits(bpw, groupsize);
      if (!bits) {
        skipped.skipped = "bpw x groupsize is not an integer";
        reports.push_back(skipped);
        continue;
      }
      std::size_t pulses = 0;
      try {
        pulses = choose_pulses(groupsize, *bits);
      } catch (const std::invalid_argument &) {
        skipped.skipped = "bit budget needs more pulses than supported";
        reports.push_back(skipped);
        continue;
      }
      if (pulses < 1) {
        skipped.skipped = "no pulse count fits the bit budget";
        reports.push_back(skipped);
        continue;
      }
      const auto table = cached_size_table(groupsize, pulses);
      reports.push_back(measure_qsnr(
          "pvq",
          [&table](const Eigen::VectorXd &x) -> Eigen::VectorXd {
            const PyramidPoint p = quantize_direction(x, *table);
            return optimal_scale(x, p) * p.coords.cast<double>();
          },
          groupsize, bpw, samples, seed));
    } else {
      const auto bits = integral_bits(bpw, 1);
      if (!bits || *bits < 2 || *bits > 31) {
        skipped.skipped = "rtn needs an integer bit width in [2, 31]";
        reports.push_back(skipped);
        continue;
      }
      const auto b = static_cast<unsigned>(*bits);
      reports.push_back(measure_qsnr(
          "rtn",
          [groupsize, b](const Eigen::VectorXd &x) -> Eigen::VectorXd {
            return rtn_quantize(x.transpose(), groupsize, b).transpose();
          },
          groupsize, bpw, samples, seed));
    }
  }
  return reports;
}

double ks_statistic(std::vector<double> samples,
                    const std::function<double(double)> &cdf) {
  if (samples.empty())
    throw std::invalid_argument("KS statistic needs samples");
  std::sort(samples.begin(), samples.end());
  const auto n = static_cast<double>(samples.size());
  double stat = 0.0;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const double f = cdf(samples[i]);
    stat = std::max(stat, static_cast<double>(i + 1) / n - f);
    stat = std::max(stat, f - static_cast<double>(i) / n);
  }
  return stat;
}

double ks_critical_value(std::size_t n, double alpha) {
  if (!(alpha > 0.0 && alpha < 1.0) || n == 0)
    throw std::invalid_argument("KS critical value needs 0 < alpha < 1, n > 0");
  return std::sqrt(-std::log(alpha / 2.0) / 2.0) /
         std::sqrt(static_cast<double>(n));
}

std::vector<double> sample_group_energy_shares(std::size_t groupsize,
                                               std::size_t groups,
                                               std::size_t samples,
                                               std::uint64_t seed) {
  const std::size_t batches = (samples + kBatch - 1) / kBatch;
  std::vector<double> shares(samples);
  parallel_for(0, batches, [&](std::size_t b) {
    Rng rng(derive_seed(seed, b));
    const std::size_t count = std::min(kBatch, samples - b * kBatch);
    for (std::size_t i = 0; i < count; ++i) {
      double first = 0.0;
      double total = 0.0;
      for (std::size_t j = 0; j < groupsize * groups; ++j) {
        const double z = rng.gaussian();
        total += z * z;
        if (j < groupsize)
          first += z * z;
      }
      shares[b * kBatch + i] = first / total;
    }
  });
  return shares;
}

KsResult run_beta_ks(std::size_t groupsize, std::size_t groups,
                     std::size_t samples, std::uint64_t seed, double alpha,
                     std::optional<BetaParams> reference) {
  if (samples < 1000)
    throw std::invalid_argument("KS runs need at least 1000 samples");
  const BetaParams params =
      reference ? *reference : BetaParams::for_groups(groupsize, groups);
  KsResult result;
  result.alpha = alpha;
  result.sample_count = samples;
  result.statistic = ks_statistic(
      sample_group_energy_shares(groupsize, groups, samples, seed),
      [&params](double x) { return beta_cdf(x, params); });
  result.critical_value = ks_critical_value(samples, alpha);
  result.passed = result.statistic < result.critical_value;
  return result;
}

std::string emit_csv(const std::vector<QsnrReport> &reports) {
  std::string out = "method,D,bpw,qsnr_db,samples,seed\n";
  for (const QsnrReport &r : reports) {
    if (r.skipped)
      continue;
    out += r.method;
    out += ',' + std::to_string(r.groupsize);
    out += ',' + format_double(r.bpw);
    out += ',' + format_double(r.qsnr_db);
    out += ',' + std::to_string(r.sample_count);
    out += ',' + std::to_string(r.seed);
    out += '\n';
  }
  return out;
}

std::vector<QsnrReport> parse_csv(std::string_view text) {
  std::vector<QsnrReport> reports;
  std::size_t line_no = 0;
  while (!text.empty()) {
    const std::size_t eol = text.find('\n');
    std::string_view line = text.substr(0, eol);
    text = eol == std::string_view::npos ? std::string_view{}
                                         : text.substr(eol + 1);
    if (line_no++ == 0) {
      if (line != "method,D,bpw,qsnr_db,samples,seed")
        throw std::invalid_argument("unexpected CSV header");
      continue;
    }
    if (line.empty())
      continue;
    std::vector<std::string_view> fields;
    for (std::size_t start = 0;;) {
      const std::size_t comma = line.find(',', start);
      fields.push_back(line.substr(start, comma - start));
      if (comma == std::string_view::npos)
        break;
      start = comma + 1;
    }
    if (fields.size() != 6)
      throw std::invalid_argument("CSV line " + std::to_string(line_no) +
                                  " has " + std::to_string(fields.size()) +
                                  " fields, expected 6");
    reports.push_back(QsnrReport{
        std::string(fields[0]), parse_unsigned<std::size_t>(fields[1]),
        parse_double(fields[2]), parse_double(fields[3]),
        parse_unsigned<std::size_t>(fields[4]),
        parse_unsigned<std::uint64_t>(fields[5]), std::nullopt});
  }
  if (line_no == 0)
    throw std::invalid_argument("empty CSV");
  return reports;
}

} // namespace pvq

namespace pvq {

namespace {

void enumerate_into(std::size_t index, std::size_t remaining,
                    Eigen::VectorXi &current, std::vector<PyramidPoint> &out) {
  const auto dims = static_cast<std::size_t>(current.size());
  if (index + 1 == dims) {
    const int r = static_cast<int>(remaining);
    current[static_cast<Eigen::Index>(index)] = r;
    out.push_back(PyramidPoint{current});
    if (r != 0) {
      current[static_cast<Eigen::Index>(index)] = -r;
      out.push_back(PyramidPoint{current});
    }
    current[static_cast<Eigen::Index>(index)] = 0;
    return;
  }
  for (int v = -static_cast<int>(remaining); v <= static_cast<int>(remaining);
       ++v) {
    current[static_cast<Eigen::Index>(index)] = v;
    enumerate_into(index + 1, remaining - static_cast<std::size_t>(std::abs(v)),
                   current, out);
  }
  current[static_cast<Eigen::Index>(index)] = 0;
}

std::string point_string(const PyramidPoint &p) {
  std::string s = "(";
  for (Eigen::Index i = 0; i < p.dims(); ++i) {
    if (i)
      s += ',';
    s += std::to_string(p.coords[i]);
  }
  return s + ")";
}

} // namespace

std::vector<PyramidPoint> enumerate_pyramid(std::size_t dims,
                                            std::size_t pulses) {
  if (dims < 1)
    throw std::invalid_argument("enumerate_pyramid: dims must be >= 1");
  std::vector<PyramidPoint> out;
  Eigen::VectorXi current = Eigen::VectorXi::Zero(static_cast<Eigen::Index>(dims));
  enumerate_into(0, pulses, current, out);
  return out;
}

SelftestReport run_codec_selftest(std::size_t max_dims,
                                  std::size_t max_pulses) {
  SelftestReport report;
  for (std::size_t d = 1; d <= max_dims; ++d) {
    for (std::size_t k = 1; k <= max_pulses; ++k) {
      ++report.configurations;
      const auto table = cached_size_table(d, k);
      const CodeInteger size = table->codebook_size();
      const auto points = enumerate_pyramid(d, k);
      auto fail = [&](const PyramidPoint &p, const std::string &code,
                      std::string what) {
        report.failures.push_back(
            SelftestFailure{d, k, point_string(p), code, std::move(what)});
      };
      if (CodeInteger(points.size()) != size)
        fail(PyramidPoint{Eigen::VectorXi::Zero(static_cast<Eigen::Index>(d))},
             size.to_decimal(), "codebook size differs from enumeration");
      ++report.checks;
      std::vector<bool> seen(points.size(), false);
      for (const PyramidPoint &p : points) {
        ++report.points;
        const CodeInteger code = encode(p, *table);
        report.checks += 5;
        if (code >= size || !code.fits_in_word() ||
            code.low_word() >= seen.size()) {
          fail(p, code.to_decimal(), "code out of range");
          continue;
        }
        if (seen[code.low_word()])
          fail(p, code.to_decimal(), "duplicate code");
        seen[code.low_word()] = true;
        if (!(decode(code, *table) == p))
          fail(p, code.to_decimal(), "decode(encode(p)) != p");
        if (!(quantize_direction(p.coords.cast<double>(), *table) == p))
          fail(p, code.to_decimal(), "point is not a quantizer fixed point");
        if (std::abs(to_sphere(p).norm() - 1.0) > 1e-12)
          fail(p, code.to_decimal(), "spherical codeword not unit norm");
      }
    }
  }
  return report;
}

} // namespace pvq
