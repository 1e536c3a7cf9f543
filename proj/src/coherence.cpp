#include "pvq/coherence.hpp"

#include "pvq/random.hpp"

namespace pvq {

HadamardSpec::HadamardSpec(std::size_t dim, std::uint64_t seed,
                           std::vector<double> signs)
    : dim_(dim), seed_(seed), signs_(std::move(signs)) {
  detail::require_power_of_two(dim, "transform size");
}

HadamardSpec::HadamardSpec(std::size_t dim, std::uint64_t seed)
    : HadamardSpec(dim, seed, [&] {
        std::vector<double> signs(dim);
        SplitMix64 gen(seed);
        for (auto &s : signs)
          s = (gen.next() >> 63) ? -1.0 : 1.0;
        return signs;
      }()) {}

HadamardSpec HadamardSpec::unsigned_transform(std::size_t dim) {
  return HadamardSpec(dim, 0, std::vector<double>(dim, 1.0));
}

Eigen::MatrixXd HadamardSpec::materialize() const {
  Eigen::MatrixXd q = Eigen::MatrixXd::Identity(static_cast<Eigen::Index>(dim_),
                                                static_cast<Eigen::Index>(dim_));
  for (Eigen::Index c = 0; c < q.cols(); ++c) {
    auto column = q.col(c);
    fwht_in_place(column, *this, Direction::forward);
  }
  return q;
}

std::pair<HadamardSpec, HadamardSpec>
coherence_specs(std::size_t rows, std::size_t cols, std::uint64_t seed) {
  return {HadamardSpec(rows, derive_seed(seed, 0)),
          HadamardSpec(cols, derive_seed(seed, 1))};
}

} // namespace pvq
