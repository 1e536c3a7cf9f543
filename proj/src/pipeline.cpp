#include "pvq/pipeline.hpp"

#include "pvq/coherence.hpp"
#include "pvq/parallel.hpp"

#include <optional>
#include <string>

namespace pvq {

void PvqConfig::validate() const {
  if (groupsize < 2)
    throw std::invalid_argument("groupsize must be >= 2, got " +
                                std::to_string(groupsize));
  if (bits_per_group < 1)
    throw std::invalid_argument("bits_per_group must be >= 1");
  if (amplitude_bits > 31)
    throw std::invalid_argument("amplitude bits must be <= 31");
  if (!(dampening >= 0.0))
    throw std::invalid_argument("dampening must be nonnegative");
  if (pulses() < 1)
    throw std::invalid_argument(
        "bits_per_group=" + std::to_string(bits_per_group) +
        " cannot hold a single pulse for groupsize " + std::to_string(groupsize));
}

std::size_t bits_per_group_for(double direction_bits, std::size_t groupsize) {
  const double total = direction_bits * static_cast<double>(groupsize);
  const double rounded = std::round(total);
  if (!(direction_bits > 0.0) || std::abs(total - rounded) > 1e-9)
    throw std::invalid_argument(
        "direction bits x groupsize must be a positive integer, got " +
        std::to_string(total));
  return static_cast<std::size_t>(rounded);
}

double direction_bits_per_weight(const PvqConfig &config) {
  return static_cast<double>(config.bits_per_group) /
         static_cast<double>(config.groupsize);
}

double nominal_bits_per_weight(const PvqConfig &config,
                               unsigned unquantized_amplitude_bits) {
  const unsigned amplitude = config.amplitude_bits > 0
                                 ? config.amplitude_bits
                                 : unquantized_amplitude_bits;
  return direction_bits_per_weight(config) +
         static_cast<double>(amplitude) / static_cast<double>(config.groupsize);
}

double effective_bits_per_weight(const PvqConfig &config, std::size_t cols,
                                 unsigned unquantized_amplitude_bits) {
  double bpw = nominal_bits_per_weight(config, unquantized_amplitude_bits);
  if (config.amplitude_bits > 0)
    bpw += 32.0 / static_cast<double>(cols);
  return bpw;
}

HessianState make_hessian_state(Eigen::MatrixXd hessian, double dampening,
                                std::size_t sample_count) {
  if (hessian.rows() != hessian.cols() || hessian.rows() == 0)
    throw std::invalid_argument("Hessian must be square and nonempty");
  if (!(dampening >= 0.0))
    throw std::invalid_argument("dampening must be nonnegative");
  HessianState state;
  state.hessian = 0.5 * (hessian + hessian.transpose());
  state.dampening = dampening;
  state.sample_count = sample_count;
  const double mean_diag = state.hessian.diagonal().mean();
  state.dampened = state.hessian;
  state.dampened.diagonal().array() += dampening * mean_diag;
  state.factor.compute(state.dampened);
  if (state.factor.info() != Eigen::Success || !(mean_diag > 0.0))
    throw std::runtime_error("Cholesky factorization of the dampened Hessian "
                             "failed; increase the dampening");
  return state;
}

HessianAccumulator::HessianAccumulator(Eigen::Index dims)
    : sum_(Eigen::MatrixXd::Zero(dims, dims)) {
  if (dims < 1)
    throw std::invalid_argument("Hessian needs at least one feature");
}

void HessianAccumulator::add_rows(const Eigen::MatrixXd &samples) {
  if (samples.cols() != sum_.rows())
    throw std::invalid_argument("calibration samples have " +
                                std::to_string(samples.cols()) +
                                " features, expected " +
                                std::to_string(sum_.rows()));
  sum_.selfadjointView<Eigen::Lower>().rankUpdate(samples.transpose());
  count_ += static_cast<std::size_t>(samples.rows());
}

HessianState HessianAccumulator::finalize(double dampening) const {
  if (count_ == 0)
    throw std::invalid_argument("Hessian estimate needs at least one sample");
  Eigen::MatrixXd h = sum_.selfadjointView<Eigen::Lower>();
  h /= static_cast<double>(count_);
  return make_hessian_state(std::move(h), dampening, count_);
}

HessianState estimate_hessian(const Eigen::MatrixXd &activations,
                              double dampening) {
  HessianAccumulator acc(activations.cols());
  acc.add_rows(activations);
  return acc.finalize(dampening);
}

PvqConfig QuantizedTensor::config() const {
  PvqConfig c;
  c.groupsize = groupsize;
  c.bits_per_group = bits_per_group;
  c.amplitude_bits = amplitude_bits;
  c.coherence = coherence;
  c.seed = seed;
  c.hessian_feedback = hessian_used;
  return c;
}

double proxy_loss(const Eigen::MatrixXd &w, const Eigen::MatrixXd &w_hat,
                  const Eigen::MatrixXd &hessian) {
  const Eigen::MatrixXd err = w - w_hat;
  return (err * hessian).cwiseProduct(err).sum();
}

QuantizedTensor quantize_layer(const Eigen::MatrixXd &w,
                               const PvqConfig &config,
                               const HessianState *hessian) {
  config.validate();
  const auto d = static_cast<Eigen::Index>(config.groupsize);
  const Eigen::Index n = w.rows();
  const Eigen::Index c = w.cols();
  if (n < 1 || c < 1 || c % d != 0)
    throw std::invalid_argument("matrix columns (" + std::to_string(c) +
                                ") must be a positive multiple of the "
                                "groupsize (" +
                                std::to_string(d) + ")");
  if (!w.allFinite())
    throw std::domain_error("weights must be finite");
  const Eigen::Index g_count = c / d;
  if (config.amplitude_bits > 0 && g_count < 2)
    throw std::invalid_argument("amplitude quantization needs at least two "
                                "groups per row");
  const bool feedback = hessian != nullptr && config.hessian_feedback;
  if (hessian != nullptr && hessian->dims() != c)
    throw std::invalid_argument("Hessian is " +
                                std::to_string(hessian->dims()) +
                                " wide, weights have " + std::to_string(c) +
                                " columns");

  const std::size_t pulses = config.pulses();
  const auto table = cached_size_table(config.groupsize, pulses);

  // Step 1: coherence. Inputs transform as x -> Q_c x, so H -> Q_c H Q_c^T.
  Eigen::MatrixXd work = w;
  std::optional<HessianState> rotated_hessian;
  if (config.coherence) {
    const auto [row_spec, col_spec] = coherence_specs(
        static_cast<std::size_t>(n), static_cast<std::size_t>(c), config.seed);
    work = rotate_matrix(w, row_spec, col_spec);
    if (feedback)
      rotated_hessian = make_hessian_state(
          rotate_matrix(hessian->hessian, col_spec, col_spec),
          hessian->dampening, hessian->sample_count);
  }
  const HessianState *active_hessian =
      rotated_hessian ? &*rotated_hessian : hessian;

  // Upper Cholesky factor U of H^-1 = U^T U. Row block g of U gives the
  // error propagation onto the columns to its right.
  Eigen::MatrixXd inverse_factor;
  if (feedback) {
    const Eigen::MatrixXd inverse = active_hessian->factor.solve(
        Eigen::MatrixXd::Identity(c, c));
    Eigen::LLT<Eigen::MatrixXd> inverse_llt(inverse);
    if (inverse_llt.info() != Eigen::Success)
      throw std::runtime_error("Cholesky factorization of the inverse Hessian "
                               "failed; increase the dampening");
    inverse_factor = inverse_llt.matrixU();
  }

  std::vector<PyramidPoint> points(static_cast<std::size_t>(n * g_count));
  std::vector<double> unit_amplitudes(points.size(), 0.0);

  for (Eigen::Index g = 0; g < g_count; ++g) {
    const Eigen::Index start = g * d;
    Eigen::MatrixXd residual(n, d);
    parallel_for(0, static_cast<std::size_t>(n), [&](std::size_t r_index) {
      const auto r = static_cast<Eigen::Index>(r_index);
      const auto segment = work.row(r).segment(start, d);
      PyramidPoint p = quantize_direction(segment.transpose(), *table);
      const double scale = optimal_scale(segment.transpose(), p);
      const Eigen::RowVectorXd recon =
          scale * p.coords.cast<double>().transpose();
      residual.row(r) = segment - recon;
      const std::size_t slot = r_index * static_cast<std::size_t>(g_count) +
                               static_cast<std::size_t>(g);
      unit_amplitudes[slot] = scale * p.coords.cast<double>().norm();
      points[slot] = std::move(p);
    });

    const Eigen::Index rest = c - start - d;
    if (feedback && rest > 0) {
      const Eigen::MatrixXd propagation =
          inverse_factor.block(start, start, d, d)
              .triangularView<Eigen::Upper>()
              .solve(inverse_factor.block(start, start + d, d, rest));
      work.rightCols(rest).noalias() -= residual * propagation;
    }
  }

  QuantizedTensor qt;
  qt.rows = static_cast<std::uint64_t>(n);
  qt.groups = static_cast<std::uint64_t>(g_count);
  qt.groupsize = static_cast<std::uint32_t>(config.groupsize);
  qt.pulses = static_cast<std::uint32_t>(pulses);
  qt.bits_per_group = static_cast<std::uint32_t>(config.bits_per_group);
  qt.amplitude_bits = static_cast<std::uint8_t>(config.amplitude_bits);
  qt.coherence = config.coherence;
  qt.hessian_used = feedback;
  qt.seed = config.seed;

  std::vector<CodeInteger> codes(points.size());
  parallel_for(0, points.size(),
               [&](std::size_t i) { codes[i] = encode(points[i], *table); });
  qt.directions = pack_codes(codes, config.bits_per_group);

  if (config.amplitude_bits == 0) {
    qt.amplitudes.assign(unit_amplitudes.begin(), unit_amplitudes.end());
  } else {
    qt.amplitude_levels.resize(points.size());
    qt.row_norm_sq.resize(static_cast<std::size_t>(n));
    const auto groups = static_cast<std::size_t>(g_count);
    parallel_for(0, static_cast<std::size_t>(n), [&](std::size_t r) {
      const std::span<const double> row(unit_amplitudes.data() + r * groups,
                                        groups);
      AmplitudeRecord record =
          quantize_row_amplitudes(row, config.amplitude_bits, config.groupsize);
      std::copy(record.levels.begin(), record.levels.end(),
                qt.amplitude_levels.begin() +
                    static_cast<std::ptrdiff_t>(r * groups));
      qt.row_norm_sq[r] = static_cast<float>(record.row_norm_sq);
    });
  }
  return qt;
}

Eigen::MatrixXd dequantize_layer(const QuantizedTensor &qt) {
  const std::size_t total = static_cast<std::size_t>(qt.rows * qt.groups);
  if (qt.groupsize < 1 || qt.pulses < 1)
    throw std::invalid_argument("quantized tensor has an empty configuration");
  if (qt.directions.group_count != total ||
      qt.directions.bits_per_group != qt.bits_per_group)
    throw std::invalid_argument("direction payload does not match the header");
  if (qt.amplitude_bits == 0 ? qt.amplitudes.size() != total
                             : (qt.amplitude_levels.size() != total ||
                                qt.row_norm_sq.size() != qt.rows))
    throw std::invalid_argument("amplitude payload does not match the header");

  const auto table = cached_size_table(qt.groupsize, qt.pulses);
  const std::vector<CodeInteger> codes = unpack_codes(qt.directions);
  const auto d = static_cast<Eigen::Index>(qt.groupsize);
  const auto groups = static_cast<std::size_t>(qt.groups);
  Eigen::MatrixXd out(static_cast<Eigen::Index>(qt.rows),
                      static_cast<Eigen::Index>(qt.cols()));

  parallel_for(0, static_cast<std::size_t>(qt.rows), [&](std::size_t r) {
    std::vector<double> amplitudes(groups);
    if (qt.amplitude_bits == 0) {
      for (std::size_t g = 0; g < groups; ++g)
        amplitudes[g] = qt.amplitudes[r * groups + g];
    } else {
      AmplitudeRecord record;
      record.levels.assign(qt.amplitude_levels.begin() +
                               static_cast<std::ptrdiff_t>(r * groups),
                           qt.amplitude_levels.begin() +
                               static_cast<std::ptrdiff_t>((r + 1) * groups));
      record.row_norm_sq = qt.row_norm_sq[r];
      amplitudes =
          dequantize_row_amplitudes(record, qt.amplitude_bits, qt.groupsize);
    }
    for (std::size_t g = 0; g < groups; ++g) {
      const PyramidPoint p = decode(codes[r * groups + g], *table);
      out.row(static_cast<Eigen::Index>(r))
          .segment(static_cast<Eigen::Index>(g) * d, d) =
          amplitudes[g] * to_sphere(p).transpose();
    }
  });

  if (qt.coherence) {
    const auto [row_spec, col_spec] =
        coherence_specs(static_cast<std::size_t>(qt.rows),
                        static_cast<std::size_t>(qt.cols()), qt.seed);
    out = unrotate_matrix(out, row_spec, col_spec);
  }
  return out;
}

ActivationCodes quantize_activations(const Eigen::VectorXd &x,
                                     std::size_t groupsize,
                                     std::size_t bits_per_group) {
  const auto d = static_cast<Eigen::Index>(groupsize);
  if (d < 1 || x.size() % d != 0)
    throw std::invalid_argument("activation length must be a multiple of the "
                                "groupsize");
  const std::size_t pulses = choose_pulses(groupsize, bits_per_group);
  if (pulses < 1)
    throw std::invalid_argument("bits_per_group cannot hold a single pulse");
  const auto table = cached_size_table(groupsize, pulses);

  ActivationCodes out;
  out.groupsize = groupsize;
  out.pulses = pulses;
  const auto groups = static_cast<std::size_t>(x.size() / d);
  std::vector<CodeInteger> codes;
  codes.reserve(groups);
  out.amplitudes.reserve(groups);
  for (std::size_t g = 0; g < groups; ++g) {
    const auto segment = x.segment(static_cast<Eigen::Index>(g) * d, d);
    const PyramidPoint p = quantize_direction(segment, *table);
    out.amplitudes.push_back(optimal_scale(segment, p) *
                             p.coords.cast<double>().norm());
    codes.push_back(encode(p, *table));
  }
  out.codes = pack_codes(codes, bits_per_group);
  return out;
}

Eigen::VectorXd dequantize_activations(const ActivationCodes &codes) {
  const auto table = cached_size_table(codes.groupsize, codes.pulses);
  const std::vector<CodeInteger> values = unpack_codes(codes.codes);
  if (values.size() != codes.amplitudes.size())
    throw std::invalid_argument("activation codes and amplitudes disagree");
  const auto d = static_cast<Eigen::Index>(codes.groupsize);
  Eigen::VectorXd out(static_cast<Eigen::Index>(values.size()) * d);
  for (std::size_t g = 0; g < values.size(); ++g)
    out.segment(static_cast<Eigen::Index>(g) * d, d) =
        codes.amplitudes[g] * to_sphere(decode(values[g], *table));
  return out;
}

} // namespace pvq
