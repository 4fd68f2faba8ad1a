#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace mdgpd {

/// Deterministic random stream keyed by (seed, label).
///
/// Child streams derive from the key alone, so `split` never consumes draws
/// and the same label path always reproduces the same sequence.
class RandomStream {
 public:
  RandomStream(std::uint64_t seed, std::string_view label);

  [[nodiscard]] RandomStream split(std::string_view label) const;
  [[nodiscard]] RandomStream split(std::string_view label, std::uint64_t index) const;
  [[nodiscard]] std::uint64_t key() const { return key_; }

  std::uint64_t next_u64() { return engine_(); }
  /// Uniform on the open interval (0, 1).
  double uniform01();
  double uniform(double lo, double hi);
  double exponential();
  double normal();
  std::int64_t poisson(double mean);
  double gamma(double shape, double rate);
  /// Uniform index in [0, n).
  std::size_t index(std::size_t n);
  bool bernoulli(double p) { return uniform01() < p; }

 private:
  explicit RandomStream(std::uint64_t key);

  std::uint64_t key_;
  std::mt19937_64 engine_;
};

/// Convenience: RandomStream(seed, label).
RandomStream split_stream(std::uint64_t seed, std::string_view label);

std::uint64_t mix64(std::uint64_t x);
std::uint64_t fnv1a(std::string_view text);

}  // namespace mdgpd
