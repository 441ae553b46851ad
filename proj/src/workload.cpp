#include "hermes/workload.hpp"

#include <cmath>
#include <stdexcept>

namespace hermes {

namespace {

double zeta(std::uint64_t n, double theta) {
  double sum = 0;
  for (std::uint64_t i = 1; i <= n; ++i) sum += 1.0 / std::pow(static_cast<double>(i), theta);
  return sum;
}

}  // namespace

std::mt19937_64 substream(std::uint64_t seed, std::uint32_t a, std::uint32_t b) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32), a, b};
  return std::mt19937_64(seq);
}

ZipfGenerator::ZipfGenerator(std::uint64_t n, double theta) : n_(n), theta_(theta) {
  if (n == 0) throw std::invalid_argument("zipf universe must be non-empty");
  if (!(theta > 0) || theta == 1.0) throw std::invalid_argument("zipf exponent must be > 0 and != 1");
  zetan_ = zeta(n, theta);
  zeta2_ = zeta(2, theta);
  alpha_ = 1.0 / (1.0 - theta);
  eta_ = (1.0 - std::pow(2.0 / static_cast<double>(n), 1.0 - theta)) / (1.0 - zeta2_ / zetan_);
}

std::uint64_t ZipfGenerator::next(std::mt19937_64& rng) const {
  const double u = unit_draw(rng);
  const double uz = u * zetan_;
  if (uz < 1.0) return 0;
  if (uz < 1.0 + std::pow(0.5, theta_)) return std::min<std::uint64_t>(1, n_ - 1);
  auto r = static_cast<std::uint64_t>(static_cast<double>(n_) *
                                      std::pow(eta_ * u - eta_ + 1.0, alpha_));
  return std::min(r, n_ - 1);
}

OpStream::OpStream(const WorkloadSpec& spec, std::uint64_t seed, std::uint32_t client,
                   const ZipfGenerator* zipf)
    : spec_(spec),
      client_(client),
      zipf_(zipf),
      rng_(substream(seed, 0xC11E, client)),
      last_seen_(spec.keys, format_numeric(0, spec.value_size)) {}

KeyId OpStream::draw_key() {
  if (spec_.distribution == KeyDistribution::Zipfian && zipf_)
    return static_cast<KeyId>(zipf_->next(rng_));
  return static_cast<KeyId>(rng_() % spec_.keys);
}

ClientOp OpStream::next() {
  ClientOp op;
  const double pick = unit_draw(rng_);
  op.key = draw_key();
  op.cid_draw = rng_();
  ++sequence_;
  // Distinct per client and sequence so histories pin down which write a read saw.
  std::uint64_t modulus = 1;
  for (std::size_t i = 0; i < std::min<std::size_t>(spec_.value_size, 18); ++i) modulus *= 10;
  const auto fresh =
      static_cast<std::int64_t>((std::uint64_t{client_ + 1} * 1'000'003 + sequence_) % modulus);
  if (pick < spec_.write_ratio) {
    op.kind = OpKind::Write;
    op.value = format_numeric(fresh, spec_.value_size);
  } else if (pick < spec_.write_ratio + spec_.rmw_ratio) {
    op.kind = OpKind::Rmw;
    if (rng_() % 2 == 0) {
      op.rmw = RmwSpec::fetch_add(1 + static_cast<std::int64_t>(rng_() % 9));
    } else {
      op.rmw = RmwSpec::compare_and_swap(last_seen_[op.key], format_numeric(fresh, spec_.value_size));
    }
  } else {
    op.kind = OpKind::Read;
  }
  return op;
}

void OpStream::observe(KeyId key, const std::string& value) {
  if (key < last_seen_.size() && !value.empty()) last_seen_[key] = value;
}

}  // namespace hermes
