#pragma once

#include <span>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

#include "jys/dist.hpp"
#include "jys/kernels.hpp"
#include "jys/rng.hpp"

namespace jys {

/// First-order Markov chain over positions: X^0 ~ initial, X^{d+1} | X^d ~ transitions[d] row.
struct MarkovChain {
  std::vector<double> initial;
  std::vector<Matrix> transitions;  // num_dims - 1 matrices, each S x S, row stochastic
};

/// Data law q_0 = p_data, either enumerated or in Markov form.
class DataDistribution {
 public:
  static DataDistribution from_explicit(Pmf joint);
  static DataDistribution from_markov(int num_dims, std::vector<double> initial, std::vector<Matrix> transitions);

  int num_dims() const noexcept { return num_dims_; }
  int vocab_size() const noexcept { return vocab_size_; }
  StateSpace space() const { return {num_dims_, vocab_size_}; }
  bool is_explicit() const noexcept { return std::holds_alternative<Pmf>(rep_); }

  const Pmf& joint() const;         // throws unless explicit
  const MarkovChain& chain() const;  // throws unless Markov

  /// Enumerated pmf (converts Markov form; subject to the oracle cap).
  Pmf to_explicit() const;
  State sample(Rng& rng) const;
  /// Per-position marginal laws, D x S.
  std::vector<std::vector<double>> position_marginals() const;

  /// Mixture (1 - eps) p + eps * (uniform over tokens [0, num_values)) applied to the
  /// initial law and every transition row (Markov) or to the joint (explicit). Gives
  /// every sequence of data tokens positive mass so reverse rates stay defined after
  /// a parallel step lands on a state outside the original support.
  DataDistribution smoothed(double eps, int num_values) const;

  /// `{"explicit": {...pmf...}}` or `{"markov": {"dims": D, "initial": [...], "transitions": [[[...]]]}}`
  nlohmann::json to_json() const;
  static DataDistribution from_json(const nlohmann::json& j);

 private:
  DataDistribution(int num_dims, int vocab_size, std::variant<Pmf, MarkovChain> rep)
      : num_dims_(num_dims), vocab_size_(vocab_size), rep_(std::move(rep)) {}

  int num_dims_;
  int vocab_size_;
  std::variant<Pmf, MarkovChain> rep_;
};

/// Rates of a factorized (Hamming-1) jump process evaluated at (base, time).
///
/// For every dimension d the full S x S generator of that token is stored with the
/// other dimensions held at `base`: entry (d, i, j) is the rate of moving dim d from
/// i to j. The row i = base[d] is the actual rate row out of `base`; the other rows
/// are what a sampler that freezes this evaluation uses once dim d has moved.
struct ReverseRates {
  State base;
  double time = 0.0;
  int num_dims = 0;
  int vocab_size = 0;
  std::vector<double> generators;  // [(d * S + i) * S + j], diagonal = -(row sum)

  ReverseRates() = default;
  ReverseRates(State base_state, double t, int vocab);

  double& at(int d, int from, int to) {
    return generators[(static_cast<std::size_t>(d) * vocab_size + from) * vocab_size + to];
  }
  double frozen_rate(int d, int from, int to) const {
    return generators[(static_cast<std::size_t>(d) * vocab_size + from) * vocab_size + to];
  }
  /// Rate of base -> base with dim d set to v (0 when v == base[d]).
  double rate(int d, int v) const { return v == base[d] ? 0.0 : frozen_rate(d, base[d], v); }
  std::span<const double> generator_row(int d, int from) const {
    return {generators.data() + (static_cast<std::size_t>(d) * vocab_size + from) * vocab_size,
            static_cast<std::size_t>(vocab_size)};
  }
  Matrix generator(int d) const;
  double dim_exit_rate(int d) const { return -frozen_rate(d, base[d], base[d]); }
  double total_rate() const;

  /// Sets every diagonal entry to minus its row sum.
  void fill_diagonals();
};

/// Anything that can produce per-dimension jump rates at (state, time).
class RateModel {
 public:
  virtual ~RateModel() = default;
  virtual int num_dims() const = 0;
  virtual int vocab_size() const = 0;
  virtual ReverseRates rates(const State& x, double t) const = 0;
};

/// Exact reverse-time rates of the factorized forward process started at `data`.
class ReverseOracle : public RateModel {
 public:
  ReverseOracle(DataDistribution data, FactorizedKernel kernel);

  const DataDistribution& data() const noexcept { return data_; }
  const FactorizedKernel& kernel() const noexcept { return kernel_; }
  int num_dims() const override { return data_.num_dims(); }
  int vocab_size() const override { return data_.vocab_size(); }
  StateSpace space() const { return data_.space(); }

  /// q_t(x).
  double prob(const State& x, double t) const;
  /// Full q_t over the enumerated space.
  Pmf marginal(double t) const;
  /// q_t(x with dim d set to v) / q_t(x) for every (d, v), laid out [d * S + v].
  std::vector<double> neighbor_ratios(const State& x, double t) const;
  double score_ratio(const State& x, int dim, int value, double t) const;
  /// q_{0|t}(. | x) over the full space (enumerable spaces only).
  Pmf denoising_posterior(const State& x, double t) const;
  /// Per-position posterior marginals q_{0|t}(x0^d = a | x), laid out [d * S + a].
  std::vector<double> posterior_marginals(const State& x, double t) const;

  ReverseRates reverse_rates(const State& x, double t) const;
  ReverseRates rates(const State& x, double t) const override { return reverse_rates(x, t); }

  /// Draw from the product prior prod_d pi.
  State sample_prior(Rng& rng) const;
  /// Forward corruption of x0 to time t (one uniform per dim).
  State forward_sample(const State& x0, double t, Rng& rng) const;
  /// X_t given X_0 = x0 and the later forward state X_s = xs (s > t), one uniform per dim.
  State bridge_sample(const State& x0, const State& xs, double t, double s, Rng& rng) const;
  /// Most likely clean token per position given x at time t; used as the final readout.
  State denoise_argmax(const State& x, double t) const;

 private:
  struct Sweep;
  Sweep sweep(const State& x, double t, bool want_posterior) const;

  DataDistribution data_;
  FactorizedKernel kernel_;
};

}  // namespace jys
