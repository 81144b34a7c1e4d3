#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <span>

namespace jys {

/// splitmix64 finalizer; used to derive independent child seeds.
constexpr std::uint64_t mix64(std::uint64_t x) noexcept {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Child seed for stream `index` of `seed`. Distinct indices give decorrelated streams.
constexpr std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t index) noexcept {
  return mix64(mix64(seed) ^ mix64(index + 0x632be59bd9b4e019ULL));
}

/// Deterministic random source. The engine is std::mt19937_64 (bit-exact by the
/// standard); conversions to doubles are done here rather than with <random>
/// distributions, whose output is implementation-defined.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }

  /// Uniform in [0, 1).
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  /// Uniform in (0, 1]; safe to take logs of.
  double uniform_open0() { return 1.0 - uniform(); }

  double exponential(double rate) { return -std::log(uniform_open0()) / rate; }

  /// Integer uniform on [0, n).
  int uniform_int(int n) { return static_cast<int>(uniform() * n); }

  /// Index drawn proportional to nonnegative `weights`; returns -1 if they sum to zero.
  int categorical(std::span<const double> weights) { return categorical(weights, uniform()); }

  /// Inverse-CDF categorical draw using a caller-supplied uniform (common random numbers).
  static int categorical(std::span<const double> weights, double u) {
    double total = 0.0;
    for (double w : weights) total += w;
    if (!(total > 0.0)) return -1;
    const double target = u * total;
    double acc = 0.0;
    int last_positive = -1;
    for (std::size_t i = 0; i < weights.size(); ++i) {
      if (weights[i] <= 0.0) continue;
      acc += weights[i];
      last_positive = static_cast<int>(i);
      if (target < acc) return last_positive;
    }
    return last_positive;
  }

 private:
  std::mt19937_64 engine_;
};

}  // namespace jys
