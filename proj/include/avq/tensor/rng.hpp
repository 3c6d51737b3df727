#pragma once

#include <cstdint>
#include <random>

namespace avq {

/// Seeded pseudo-random stream. `split(k)` derives an independent child stream
/// from the parent's seed and a key, without advancing the parent, so every
/// consumer (initialization, shuffling, dropout, data synthesis) gets its own
/// reproducible stream from one top-level seed.
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0);

  std::uint64_t seed() const noexcept { return seed_; }
  Rng split(std::uint64_t key) const;

  double uniform();                      // [0, 1)
  double uniform(double lo, double hi);  // [lo, hi)
  double normal(double mean = 0.0, double stddev = 1.0);
  bool bernoulli(double p);
  std::uint64_t next_u64() { return engine_(); }

  std::mt19937_64& engine() noexcept { return engine_; }

 private:
  std::uint64_t seed_;
  std::mt19937_64 engine_;
};

}  // namespace avq
