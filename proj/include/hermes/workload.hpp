#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "hermes/ops.hpp"
#include "hermes/types.hpp"

namespace hermes {

// Uniform double in [0, 1) from the top 53 bits of a 64-bit draw.
inline double unit_draw(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

// Zipfian ranks over [0, n) with rank 0 the hottest, after the YCSB
// generator (Gray et al., "Quickly generating billion-record synthetic
// databases").
class ZipfGenerator {
 public:
  ZipfGenerator(std::uint64_t n, double theta);

  std::uint64_t next(std::mt19937_64& rng) const;
  // Probability of rank 0: 1 / zeta(n, theta).
  double head_mass() const { return 1.0 / zetan_; }
  std::uint64_t size() const { return n_; }

 private:
  std::uint64_t n_;
  double theta_;
  double zetan_;
  double zeta2_;
  double alpha_;
  double eta_;
};

enum class KeyDistribution : std::uint8_t { Uniform, Zipfian };

struct WorkloadSpec {
  std::uint32_t keys = 100;
  std::size_t value_size = 8;
  double write_ratio = 0.05;
  double rmw_ratio = 0.0;
  KeyDistribution distribution = KeyDistribution::Uniform;
  double zipf_exponent = 0.99;
};

struct ClientOp {
  OpKind kind = OpKind::Read;
  KeyId key = 0;
  std::string value;
  RmwSpec rmw;
  std::uint64_t cid_draw = 0;
};

// Reproducible op stream for one closed-loop client.
class OpStream {
 public:
  OpStream(const WorkloadSpec& spec, std::uint64_t seed, std::uint32_t client,
           const ZipfGenerator* zipf);

  ClientOp next();
  // Feeds back a value seen for a key so later CAS ops can expect it.
  void observe(KeyId key, const std::string& value);

 private:
  KeyId draw_key();

  WorkloadSpec spec_;
  std::uint32_t client_;
  const ZipfGenerator* zipf_;
  std::mt19937_64 rng_;
  std::uint64_t sequence_ = 0;
  std::vector<std::string> last_seen_;
};

std::mt19937_64 substream(std::uint64_t seed, std::uint32_t a, std::uint32_t b);

}  // namespace hermes
