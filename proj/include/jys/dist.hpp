#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include <nlohmann/json.hpp>

namespace jys {

/// Token sequence; entry d is the value of dimension d.
using State = std::vector<int>;

/// Largest product space the brute-force paths will enumerate.
inline constexpr std::int64_t kOracleStateCap = 10'000'000;

/// Product space {0..S-1}^D with a mixed-radix flat index (dimension 0 least significant).
class StateSpace {
 public:
  StateSpace(int num_dims, int vocab_size);

  int num_dims() const noexcept { return num_dims_; }
  int vocab_size() const noexcept { return vocab_size_; }
  /// S^D. Throws DomainError when S^D exceeds kOracleStateCap.
  std::int64_t total_states() const;
  bool enumerable() const noexcept;

  std::int64_t index(std::span<const int> values) const;
  State decode(std::int64_t index) const;
  void decode_into(std::int64_t index, std::span<int> out) const;

  bool operator==(const StateSpace&) const = default;

 private:
  int num_dims_;
  int vocab_size_;
};

/// Explicit probability mass function over a (product) state space.
class Pmf {
 public:
  /// Validates nonnegativity and |sum - 1| <= 1e-9, then renormalizes.
  Pmf(StateSpace space, std::vector<double> probs);

  static Pmf uniform(StateSpace space);
  static Pmf point_mass(StateSpace space, std::int64_t index);
  /// Outer product of per-dimension pmfs (all over the same vocabulary).
  static Pmf product(const std::vector<std::vector<double>>& factors);

  const StateSpace& space() const noexcept { return space_; }
  std::span<const double> probs() const noexcept { return probs_; }
  double operator[](std::int64_t i) const { return probs_[static_cast<std::size_t>(i)]; }
  std::size_t size() const noexcept { return probs_.size(); }

  /// Marginal of one dimension, length S.
  std::vector<double> marginal(int dim) const;

 private:
  StateSpace space_;
  std::vector<double> probs_;
};

/// Flat mixed-radix index of `values` in the S^D space.
std::int64_t state_index(std::span<const int> values, const StateSpace& space);

/// KL(p || q) in nats. Throws SupportMismatchError if q vanishes where p does not.
double kl_divergence(const Pmf& p, const Pmf& q);
double kl_divergence(std::span<const double> p, std::span<const double> q);

double total_variation(std::span<const double> p, std::span<const double> q);

/// Total correlation sum_d H(X_d) - H(X); equals KL(joint || product of marginals).
double mutual_information(const Pmf& joint);

Pmf product_of_marginals(const Pmf& joint);

/// `{"dims": D, "vocab": S, "probs": [...]}`
nlohmann::json to_json(const Pmf& pmf);
Pmf pmf_from_json(const nlohmann::json& j);

}  // namespace jys
