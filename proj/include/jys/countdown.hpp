#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "jys/dist.hpp"
#include "jys/oracle.hpp"
#include "jys/rng.hpp"

namespace jys {

/// Countdown sequences: a nonzero token must be followed by its predecessor; a zero is
/// followed by a fresh draw from {1, ..., V-1}.
struct CountdownSpec {
  int seq_len = 16;
  int value_count = 8;
  bool with_mask = false;  // adds a mask token with index V

  int vocab_size() const { return value_count + (with_mask ? 1 : 0); }
  void validate() const;
  nlohmann::json to_json() const;
  static CountdownSpec from_json(const nlohmann::json& j);
};

std::vector<State> generate(const CountdownSpec& spec, int n, Rng& rng);
/// Deterministic per-sequence streams: sequence i uses derive_seed(seed, i).
std::vector<State> generate(const CountdownSpec& spec, int n, std::uint64_t seed);

DataDistribution exact_distribution(const CountdownSpec& spec);

struct ViolationStats {
  double per_pair = 0.0;      // fraction of adjacent pairs breaking the rule
  double per_sequence = 0.0;  // fraction of sequences with at least one break
  std::int64_t pairs = 0;
  std::int64_t violations = 0;
};

/// Tokens >= value_count (the mask) always count as violations.
ViolationStats violation_stats(std::span<const State> sequences, int value_count);
double violation_rate(std::span<const State> sequences, int value_count);

void write_sequences(std::ostream& os, std::span<const State> sequences);
std::vector<State> read_sequences(std::istream& is);

}  // namespace jys
