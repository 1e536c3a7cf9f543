#include "pvq/cli.hpp"

#include "pvq/bench.hpp"
#include "pvq/io.hpp"
#include "pvq/lattice.hpp"
#include "pvq/pipeline.hpp"

#include <CLI11.hpp>

#include <charconv>
#include <cstdio>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace pvq {

namespace {

std::string fmt(double value) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, value);
  return ec == std::errc() ? std::string(buf, end) : std::string("nan");
}

std::string hex64(std::uint64_t value) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx",
                static_cast<unsigned long long>(value));
  return buf;
}

struct QuantizeArgs {
  std::string input;
  std::string calib;
  std::string output;
  std::size_t groupsize = 0;
  double direction_bits = 0.0;
  unsigned amplitude_bits = 0;
  bool coherence = false;
  std::uint64_t seed = 0;
  double dampening = 0.01;
  bool no_feedback = false;
  unsigned report_amplitude_bits = 32;
};

int cmd_quantize(const QuantizeArgs &a, std::ostream &out) {
  PvqConfig config;
  config.groupsize = a.groupsize;
  config.bits_per_group = bits_per_group_for(a.direction_bits, a.groupsize);
  config.amplitude_bits = a.amplitude_bits;
  config.coherence = a.coherence;
  config.seed = a.seed;
  config.dampening = a.dampening;
  config.hessian_feedback = !a.no_feedback;
  config.validate();

  const Eigen::MatrixXd w = read_dense(a.input).to_matrix();
  std::optional<HessianState> hessian;
  if (!a.calib.empty()) {
    const Eigen::MatrixXd calib = read_dense(a.calib).to_matrix();
    if (calib.cols() != w.cols())
      throw std::invalid_argument(
          "calibration data has " + std::to_string(calib.cols()) +
          " columns, input has " + std::to_string(w.cols()));
    hessian = estimate_hessian(calib, a.dampening);
  }

  const QuantizedTensor qt =
      quantize_layer(w, config, hessian ? &*hessian : nullptr);
  const std::vector<std::uint8_t> bytes = serialize_quantized(qt);
  write_file_atomic(a.output, bytes);

  const double weights = static_cast<double>(w.size());
  out << "shape=" << w.rows() << "x" << w.cols() << "\n";
  out << "groupsize=" << config.groupsize << "\n";
  out << "pulses=" << qt.pulses << "\n";
  out << "bits_per_group=" << config.bits_per_group << "\n";
  out << "direction_bpw=" << fmt(direction_bits_per_weight(config)) << "\n";
  out << "bpw=" << fmt(nominal_bits_per_weight(config, a.report_amplitude_bits))
      << "\n";
  out << "bpw_with_row_overhead="
      << fmt(effective_bits_per_weight(config,
                                       static_cast<std::size_t>(w.cols()),
                                       a.report_amplitude_bits))
      << "\n";
  out << "file_bytes=" << bytes.size() << "\n";
  out << "file_bpw=" << fmt(8.0 * static_cast<double>(bytes.size()) / weights)
      << "\n";
  if (hessian) {
    const Eigen::MatrixXd with = dequantize_layer(qt);
    PvqConfig plain = config;
    plain.hessian_feedback = false;
    const Eigen::MatrixXd without = dequantize_layer(quantize_layer(w, plain));
    out << "proxy_loss_without_feedback="
        << fmt(proxy_loss(w, without, hessian->hessian)) << "\n";
    out << "proxy_loss_with_feedback="
        << fmt(proxy_loss(w, with, hessian->hessian)) << "\n";
  }
  return 0;
}

int cmd_dequantize(const std::string &input, const std::string &output,
                   std::ostream &out) {
  const QuantizedTensor qt = read_quantized(input);
  const Eigen::MatrixXd w = dequantize_layer(qt);
  write_dense(output, DenseTensor::from_matrix(w, DType::float32));
  out << "shape=" << w.rows() << "x" << w.cols() << "\n";
  return 0;
}

int cmd_info(const std::string &input, unsigned report_amplitude_bits,
             std::ostream &out) {
  const std::vector<std::uint8_t> bytes = read_file(input);
  const QuantizedTensor qt = parse_quantized(bytes);
  const PvqConfig config = qt.config();
  const std::size_t dir_bytes = qt.directions.bytes.size();
  const std::span<const std::uint8_t> all(bytes);
  out << "format=PVQT\n";
  out << "version=" << kPvqtVersion << "\n";
  out << "rows=" << qt.rows << "\n";
  out << "cols=" << qt.cols() << "\n";
  out << "groups=" << qt.groups << "\n";
  out << "groupsize=" << qt.groupsize << "\n";
  out << "pulses=" << qt.pulses << "\n";
  out << "bits_per_group=" << qt.bits_per_group << "\n";
  out << "amplitude_bits=" << unsigned{qt.amplitude_bits} << "\n";
  out << "coherence=" << (qt.coherence ? 1 : 0) << "\n";
  out << "seed=" << qt.seed << "\n";
  out << "hessian_used=" << (qt.hessian_used ? 1 : 0) << "\n";
  out << "codebook_size=" << cached_size_table(qt.groupsize, qt.pulses)
                                 ->codebook_size()
                                 .to_decimal()
      << "\n";
  out << "direction_bpw=" << fmt(direction_bits_per_weight(config)) << "\n";
  out << "bpw=" << fmt(nominal_bits_per_weight(config, report_amplitude_bits))
      << "\n";
  out << "file_bytes=" << bytes.size() << "\n";
  out << "file_bpw="
      << fmt(8.0 * static_cast<double>(bytes.size()) /
             static_cast<double>(qt.rows * qt.cols()))
      << "\n";
  out << "direction_checksum="
      << hex64(fnv1a64(all.subspan(kPvqtHeaderBytes, dir_bytes))) << "\n";
  out << "amplitude_checksum="
      << hex64(fnv1a64(all.subspan(kPvqtHeaderBytes + dir_bytes))) << "\n";
  return 0;
}

int cmd_table(std::size_t groupsize, std::size_t pulses, std::ostream &out) {
  const SizeTable table = build_size_table(groupsize, pulses);
  for (std::size_t d = 0; d <= groupsize; ++d)
    for (std::size_t k = 0; k <= pulses; ++k)
      out << d << ' ' << k << ' ' << table.count(d, k).to_decimal() << ' '
          << table.cumulative(d, k).to_decimal() << "\n";
  return 0;
}

} // namespace

int run_cli(int argc, const char *const *argv, std::ostream &out,
            std::ostream &err) {
  CLI::App app{"Pyramid vector quantization of dense tensors", "pvq"};
  app.require_subcommand(1);

  QuantizeArgs q;
  auto *quantize = app.add_subcommand("quantize", "quantize a 2-D tensor");
  quantize->add_option("--input", q.input, "input DTF1 tensor")->required();
  quantize->add_option("--calib", q.calib,
                       "calibration activations (M x C DTF1)");
  quantize->add_option("--groupsize", q.groupsize, "group size D")->required();
  quantize
      ->add_option("--direction-bits", q.direction_bits,
                   "direction bits per weight (times D must be an integer)")
      ->required();
  quantize->add_option("--amplitude-bits", q.amplitude_bits,
                       "amplitude bits (0 keeps float32 amplitudes)");
  quantize->add_flag("--coherence", q.coherence,
                     "apply randomized Hadamard rotations");
  quantize->add_option("--seed", q.seed, "coherence seed");
  quantize->add_option("--dampening", q.dampening,
                       "Hessian dampening relative to its mean diagonal");
  quantize->add_flag("--no-feedback", q.no_feedback,
                     "estimate the Hessian but skip error feedback");
  quantize->add_option("--report-amplitude-bits", q.report_amplitude_bits,
                       "bits to count per unquantized amplitude in reported "
                       "BPW (files store 32)");
  quantize->add_option("-o,--output", q.output, "output PVQT file")
      ->required();

  std::string dq_input, dq_output;
  auto *dequantize = app.add_subcommand("dequantize", "PVQT -> float32 DTF1");
  dequantize->add_option("--input", dq_input)->required();
  dequantize->add_option("-o,--output", dq_output)->required();

  std::string info_input;
  unsigned info_amp_bits = 32;
  auto *info = app.add_subcommand("info", "print a PVQT header");
  info->add_option("--input", info_input)->required();
  info->add_option("--report-amplitude-bits", info_amp_bits);

  std::size_t table_d = 0, table_k = 0;
  auto *table = app.add_subcommand("table", "dump N(d,k) and V(d,k)");
  table->add_option("--groupsize", table_d)->required();
  table->add_option("--pulses", table_k)->required();

  auto *bench = app.add_subcommand("bench", "synthetic-source benchmarks");
  bench->require_subcommand(1);
  std::vector<std::string> methods{"pvq", "rtn"};
  std::vector<std::size_t> qsnr_groupsizes{8, 16, 32};
  std::vector<double> qsnr_bpw{2, 3, 4};
  std::size_t qsnr_samples = 1000;
  std::uint64_t qsnr_seed = 0;
  std::string qsnr_output;
  auto *qsnr = bench->add_subcommand("qsnr", "QSNR on Gaussian sources (CSV)");
  qsnr->add_option("--method", methods)->delimiter(',');
  qsnr->add_option("--groupsize", qsnr_groupsizes)->delimiter(',');
  qsnr->add_option("--bpw", qsnr_bpw)->delimiter(',');
  qsnr->add_option("--samples", qsnr_samples);
  qsnr->add_option("--seed", qsnr_seed);
  qsnr->add_option("-o,--output", qsnr_output, "CSV path (default stdout)");

  std::size_t ks_d = 4, ks_g = 4, ks_samples = 10000;
  std::uint64_t ks_seed = 0;
  double ks_alpha = 0.01;
  std::optional<double> ks_ref_a, ks_ref_b;
  auto *ks = bench->add_subcommand("ks", "KS test of group energy shares");
  ks->add_option("--groupsize", ks_d);
  ks->add_option("--groups", ks_g);
  ks->add_option("--samples", ks_samples);
  ks->add_option("--seed", ks_seed);
  ks->add_option("--alpha", ks_alpha);
  ks->add_option("--ref-alpha", ks_ref_a, "test against Beta(a, .) instead");
  ks->add_option("--ref-beta", ks_ref_b, "test against Beta(., b) instead");

  std::size_t st_d = 4, st_k = 8;
  auto *selftest =
      app.add_subcommand("selftest", "exhaustive codec verification");
  selftest->add_option("--max-d", st_d);
  selftest->add_option("--max-k", st_k);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp &e) {
    out << app.help();
    return 0;
  } catch (const CLI::ParseError &e) {
    err << "error: " << e.what() << "\n";
    return 2;
  }

  try {
    if (*quantize)
      return cmd_quantize(q, out);
    if (*dequantize)
      return cmd_dequantize(dq_input, dq_output, out);
    if (*info)
      return cmd_info(info_input, info_amp_bits, out);
    if (*table)
      return cmd_table(table_d, table_k, out);
    if (*qsnr) {
      std::vector<QsnrReport> reports;
      for (const std::string &m : methods)
        for (std::size_t d : qsnr_groupsizes)
          for (QsnrReport &r :
               run_qsnr(m, d, qsnr_bpw, qsnr_samples, qsnr_seed)) {
            if (r.skipped)
              err << "skipped: method=" << r.method << " D=" << r.groupsize
                  << " bpw=" << fmt(r.bpw) << ": " << *r.skipped << "\n";
            reports.push_back(std::move(r));
          }
      const std::string csv = emit_csv(reports);
      if (qsnr_output.empty())
        out << csv;
      else
        write_file_atomic(qsnr_output,
                          std::span<const std::uint8_t>(
                              reinterpret_cast<const std::uint8_t *>(csv.data()),
                              csv.size()));
      return 0;
    }
    if (*ks) {
      std::optional<BetaParams> reference;
      if (ks_ref_a || ks_ref_b) {
        const BetaParams model = BetaParams::for_groups(ks_d, ks_g);
        reference = BetaParams(ks_ref_a.value_or(model.alpha()),
                               ks_ref_b.value_or(model.beta()));
      }
      const KsResult r =
          run_beta_ks(ks_d, ks_g, ks_samples, ks_seed, ks_alpha, reference);
      out << "ks_statistic=" << fmt(r.statistic) << "\n";
      out << "critical_value=" << fmt(r.critical_value) << "\n";
      out << "samples=" << r.sample_count << "\n";
      out << "result=" << (r.passed ? "pass" : "fail") << "\n";
      return r.passed ? 0 : 1;
    }
    if (*selftest) {
      const SelftestReport r = run_codec_selftest(st_d, st_k);
      for (const SelftestFailure &f : r.failures)
        out << "FAIL d=" << f.dims << " k=" << f.pulses << " point=" << f.point
            << " code=" << f.code << ": " << f.what << "\n";
      out << "configurations=" << r.configurations << "\n";
      out << "points=" << r.points << "\n";
      out << "checks=" << r.checks << "\n";
      out << "failures=" << r.failures.size() << "\n";
      return r.failures.empty() ? 0 : 1;
    }
  } catch (const std::exception &e) {
    std::string msg = e.what();
    for (char &ch : msg)
      if (ch == '\n')
        ch = ' ';
    err << "error: " << msg << "\n";
    return 1;
  }
  return 2;
}

} // namespace pvq
