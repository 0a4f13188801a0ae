#pragma once

#include <cstdint>
#include <random>

namespace adalag {

/// Seeded random stream. Every sampler in the library takes an RngStream&
/// parameter explicitly, so there is no hidden global state and runs are
/// reproducible given the seed. One logical task (a filter run, a replicate)
/// owns exactly one stream.
class RngStream {
 public:
  explicit RngStream(std::uint64_t seed) : engine_(seed) {}

  /// Uniform draw on [0, 1).
  double uniform() { return unif_(engine_); }

  /// Standard normal draw.
  double normal() { return normal_(engine_); }

  std::mt19937_64& engine() { return engine_; }

 private:
  std::mt19937_64 engine_;
  std::uniform_real_distribution<double> unif_{0.0, 1.0};
  std::normal_distribution<double> normal_{0.0, 1.0};
};

namespace detail {
inline std::uint64_t splitmix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}
}  // namespace detail

/// Derives an independent stream seed from a base seed and a stream id.
/// Distinct ids give decorrelated streams; replicates and helper tasks must
/// never share an engine.
inline std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream_id) {
  return detail::splitmix64(detail::splitmix64(base) ^ detail::splitmix64(stream_id));
}

}  // namespace adalag
