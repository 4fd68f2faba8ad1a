#include "mdgpd/random.hpp"

#include <cmath>
#include <string>

#include "mdgpd/core.hpp"

namespace mdgpd {

std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::uint64_t fnv1a(std::string_view text) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

RandomStream::RandomStream(std::uint64_t key) : key_(key), engine_(mix64(key ^ 0x5851f42d4c957f2dULL)) {}

RandomStream::RandomStream(std::uint64_t seed, std::string_view label)
    : RandomStream(mix64(mix64(seed) ^ fnv1a(label))) {}

RandomStream RandomStream::split(std::string_view label) const {
  return RandomStream(mix64(key_ ^ fnv1a(label)));
}

RandomStream RandomStream::split(std::string_view label, std::uint64_t index) const {
  return RandomStream(mix64(mix64(key_ ^ fnv1a(label)) + index));
}

RandomStream split_stream(std::uint64_t seed, std::string_view label) { return {seed, label}; }

double RandomStream::uniform01() {
  return (static_cast<double>(engine_() >> 11) + 0.5) * 0x1.0p-53;
}

double RandomStream::uniform(double lo, double hi) {
  if (lo == hi) return lo;
  return lo + (hi - lo) * uniform01();
}

double RandomStream::exponential() { return -std::log(uniform01()); }

double RandomStream::normal() {
  // Box-Muller, one variate per call so the stream position stays simple.
  const double u1 = uniform01();
  const double u2 = uniform01();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
}

std::int64_t RandomStream::poisson(double mean) {
  if (!(mean >= 0.0) || !std::isfinite(mean)) {
    throw Error(ErrorCode::InvalidArgument, "Poisson mean must be finite and nonnegative");
  }
  std::int64_t total = 0;
  while (mean > 30.0) {
    total += poisson(30.0);
    mean -= 30.0;
  }
  if (mean == 0.0) return total;
  // Sequential inversion.
  double p = std::exp(-mean);
  double cdf = p;
  const double u = uniform01();
  std::int64_t k = 0;
  while (u > cdf) {
    ++k;
    p *= mean / static_cast<double>(k);
    cdf += p;
    if (p == 0.0 && cdf < u) break;
  }
  return total + k;
}

double RandomStream::gamma(double shape, double rate) {
  if (!(shape > 0.0) || !(rate > 0.0)) {
    throw Error(ErrorCode::InvalidArgument, "gamma shape and rate must be positive");
  }
  if (shape < 1.0) {
    const double boost = std::pow(uniform01(), 1.0 / shape);
    return gamma(shape + 1.0, rate) * boost;
  }
  // Marsaglia-Tsang.
  const double d = shape - 1.0 / 3.0;
  const double c = 1.0 / std::sqrt(9.0 * d);
  for (;;) {
    double x = normal();
    double v = 1.0 + c * x;
    if (v <= 0.0) continue;
    v = v * v * v;
    const double u = uniform01();
    if (std::log(u) < 0.5 * x * x + d - d * v + d * std::log(v)) return d * v / rate;
  }
}

std::size_t RandomStream::index(std::size_t n) {
  auto i = static_cast<std::size_t>(uniform01() * static_cast<double>(n));
  return i < n ? i : n - 1;
}

}  // namespace mdgpd
