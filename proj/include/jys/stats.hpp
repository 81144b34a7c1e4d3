#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

namespace jys {

/// Pairwise (cascade) summation in a fixed order; bit-stable for a given input order.
inline double pairwise_sum(std::span<const double> v) {
  if (v.size() <= 8) {
    double s = 0.0;
    for (double x : v) s += x;
    return s;
  }
  const std::size_t half = v.size() / 2;
  return pairwise_sum(v.first(half)) + pairwise_sum(v.subspan(half));
}

struct MeanStderr {
  double mean = 0.0;
  double std_error = 0.0;
};

/// Sample mean and its standard error (n - 1 in the variance).
inline MeanStderr mean_and_stderr(std::span<const double> v) {
  MeanStderr out;
  if (v.empty()) return out;
  const double n = static_cast<double>(v.size());
  out.mean = pairwise_sum(v) / n;
  if (v.size() < 2) return out;
  std::vector<double> sq(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) sq[i] = (v[i] - out.mean) * (v[i] - out.mean);
  out.std_error = std::sqrt(pairwise_sum(sq) / (n - 1.0) / n);
  return out;
}

}  // namespace jys
