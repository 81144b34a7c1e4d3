#include "jys/countdown.hpp"

#include <istream>
#include <ostream>
#include <sstream>

#include "jys/error.hpp"

namespace jys {

void CountdownSpec::validate() const {
  if (seq_len < 2) throw DomainError("CountdownSpec: D must be >= 2");
  if (value_count < 2) throw DomainError("CountdownSpec: V must be >= 2");
}

nlohmann::json CountdownSpec::to_json() const { return {{"D", seq_len}, {"V", value_count}, {"mask", with_mask}}; }

CountdownSpec CountdownSpec::from_json(const nlohmann::json& j) {
  CountdownSpec s;
  s.seq_len = j.value("D", s.seq_len);
  s.value_count = j.value("V", s.value_count);
  s.with_mask = j.value("mask", s.with_mask);
  s.validate();
  return s;
}

namespace {

int fresh_value(int v, Rng& rng) { return 1 + rng.uniform_int(v - 1); }

State one_sequence(const CountdownSpec& spec, Rng& rng) {
  State x(static_cast<std::size_t>(spec.seq_len));
  x[0] = fresh_value(spec.value_count, rng);
  for (std::size_t d = 1; d < x.size(); ++d) x[d] = x[d - 1] != 0 ? x[d - 1] - 1 : fresh_value(spec.value_count, rng);
  return x;
}

}  // namespace

std::vector<State> generate(const CountdownSpec& spec, int n, Rng& rng) {
  spec.validate();
  if (n < 1) throw DomainError("generate: n must be >= 1");
  std::vector<State> out;
  out.reserve(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) out.push_back(one_sequence(spec, rng));
  return out;
}

std::vector<State> generate(const CountdownSpec& spec, int n, std::uint64_t seed) {
  spec.validate();
  if (n < 1) throw DomainError("generate: n must be >= 1");
  std::vector<State> out;
  out.reserve(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    Rng rng(derive_seed(seed, static_cast<std::uint64_t>(i)));
    out.push_back(one_sequence(spec, rng));
  }
  return out;
}

DataDistribution exact_distribution(const CountdownSpec& spec) {
  spec.validate();
  const int v = spec.value_count;
  const int s = spec.vocab_size();
  const double fresh = 1.0 / (v - 1);
  std::vector<double> initial(static_cast<std::size_t>(s), 0.0);
  for (int k = 1; k < v; ++k) initial[static_cast<std::size_t>(k)] = fresh;
  Matrix m = Matrix::Zero(s, s);
  for (int k = 1; k < v; ++k) m(k, k - 1) = 1.0;
  // Row 0 restarts the count; the mask row (never reached) reuses it to stay stochastic.
  for (int k = 1; k < v; ++k) m(0, k) = fresh;
  if (spec.with_mask) m.row(v) = m.row(0);
  return DataDistribution::from_markov(spec.seq_len, std::move(initial), {m});
}

ViolationStats violation_stats(std::span<const State> sequences, int value_count) {
  if (sequences.empty()) throw DomainError("violation_rate: no sequences");
  ViolationStats st;
  std::int64_t bad_sequences = 0;
  for (const State& x : sequences) {
    bool bad = false;
    for (std::size_t d = 0; d + 1 < x.size(); ++d) {
      ++st.pairs;
      const int a = x[d], b = x[d + 1];
      const bool masked = a >= value_count || b >= value_count;
      if (masked || (a != 0 && b != a - 1)) {
        ++st.violations;
        bad = true;
      }
    }
    bad_sequences += bad ? 1 : 0;
  }
  if (st.pairs == 0) throw DomainError("violation_rate: sequences need at least two tokens");
  st.per_pair = static_cast<double>(st.violations) / static_cast<double>(st.pairs);
  st.per_sequence = static_cast<double>(bad_sequences) / static_cast<double>(sequences.size());
  return st;
}

double violation_rate(std::span<const State> sequences, int value_count) {
  return violation_stats(sequences, value_count).per_pair;
}

void write_sequences(std::ostream& os, std::span<const State> sequences) {
  for (const State& x : sequences) {
    for (std::size_t d = 0; d < x.size(); ++d) os << (d ? " " : "") << x[d];
    os << '\n';
  }
}

std::vector<State> read_sequences(std::istream& is) {
  std::vector<State> out;
  std::string line;
  while (std::getline(is, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ls(line);
    State x;
    int v = 0;
    while (ls >> v) x.push_back(v);
    if (!ls.eof()) throw DomainError("read_sequences: non-integer token in line '" + line + "'");
    if (!x.empty()) out.push_back(std::move(x));
  }
  return out;
}

}  // namespace jys
