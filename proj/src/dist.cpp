#include "jys/dist.hpp"

#include <cmath>
#include <string>

#include "jys/error.hpp"

namespace jys {

namespace {

constexpr double kPmfSumTolerance = 1e-9;

}  // namespace

StateSpace::StateSpace(int num_dims, int vocab_size) : num_dims_(num_dims), vocab_size_(vocab_size) {
  if (num_dims < 1) throw DomainError("StateSpace: num_dims must be >= 1");
  if (vocab_size < 2) throw DomainError("StateSpace: vocab_size must be >= 2");
}

bool StateSpace::enumerable() const noexcept {
  std::int64_t n = 1;
  for (int d = 0; d < num_dims_; ++d) {
    n *= vocab_size_;
    if (n > kOracleStateCap) return false;
  }
  return true;
}

std::int64_t StateSpace::total_states() const {
  if (!enumerable()) {
    throw DomainError("StateSpace: S^D = " + std::to_string(vocab_size_) + "^" + std::to_string(num_dims_) +
                      " exceeds the enumeration cap");
  }
  std::int64_t n = 1;
  for (int d = 0; d < num_dims_; ++d) n *= vocab_size_;
  return n;
}

std::int64_t StateSpace::index(std::span<const int> values) const {
  if (static_cast<int>(values.size()) != num_dims_) throw DomainError("state_index: wrong number of dims");
  std::int64_t idx = 0;
  for (int d = num_dims_ - 1; d >= 0; --d) {
    const int v = values[static_cast<std::size_t>(d)];
    if (v < 0 || v >= vocab_size_) {
      throw DomainError("state_index: value " + std::to_string(v) + " out of range at dim " + std::to_string(d));
    }
    idx = idx * vocab_size_ + v;
  }
  return idx;
}

void StateSpace::decode_into(std::int64_t index, std::span<int> out) const {
  for (int d = 0; d < num_dims_; ++d) {
    out[static_cast<std::size_t>(d)] = static_cast<int>(index % vocab_size_);
    index /= vocab_size_;
  }
}

State StateSpace::decode(std::int64_t index) const {
  if (index < 0 || index >= total_states()) throw DomainError("StateSpace::decode: index out of range");
  State s(static_cast<std::size_t>(num_dims_));
  decode_into(index, s);
  return s;
}

std::int64_t state_index(std::span<const int> values, const StateSpace& space) { return space.index(values); }

Pmf::Pmf(StateSpace space, std::vector<double> probs) : space_(space), probs_(std::move(probs)) {
  if (static_cast<std::int64_t>(probs_.size()) != space_.total_states()) {
    throw DomainError("Pmf: expected " + std::to_string(space_.total_states()) + " entries, got " +
                      std::to_string(probs_.size()));
  }
  double sum = 0.0;
  for (double p : probs_) {
    if (!(p >= 0.0) || !std::isfinite(p)) throw DomainError("Pmf: negative or non-finite probability");
    sum += p;
  }
  if (std::abs(sum - 1.0) > kPmfSumTolerance) {
    throw DomainError("Pmf: probabilities sum to " + std::to_string(sum));
  }
  for (double& p : probs_) p /= sum;
}

Pmf Pmf::uniform(StateSpace space) {
  const auto n = space.total_states();
  return Pmf(space, std::vector<double>(static_cast<std::size_t>(n), 1.0 / static_cast<double>(n)));
}

Pmf Pmf::point_mass(StateSpace space, std::int64_t index) {
  std::vector<double> p(static_cast<std::size_t>(space.total_states()), 0.0);
  p.at(static_cast<std::size_t>(index)) = 1.0;
  return Pmf(space, std::move(p));
}

Pmf Pmf::product(const std::vector<std::vector<double>>& factors) {
  if (factors.empty()) throw DomainError("Pmf::product: no factors");
  const int vocab = static_cast<int>(factors.front().size());
  StateSpace space(static_cast<int>(factors.size()), vocab);
  const auto n = space.total_states();
  std::vector<double> p(static_cast<std::size_t>(n));
  State x(factors.size());
  for (std::int64_t i = 0; i < n; ++i) {
    space.decode_into(i, x);
    double v = 1.0;
    for (std::size_t d = 0; d < factors.size(); ++d) {
      if (static_cast<int>(factors[d].size()) != vocab) throw DomainError("Pmf::product: ragged factors");
      v *= factors[d][static_cast<std::size_t>(x[d])];
    }
    p[static_cast<std::size_t>(i)] = v;
  }
  return Pmf(space, std::move(p));
}

std::vector<double> Pmf::marginal(int dim) const {
  if (dim < 0 || dim >= space_.num_dims()) throw DomainError("Pmf::marginal: dim out of range");
  std::vector<double> m(static_cast<std::size_t>(space_.vocab_size()), 0.0);
  std::int64_t stride = 1;
  for (int d = 0; d < dim; ++d) stride *= space_.vocab_size();
  for (std::size_t i = 0; i < probs_.size(); ++i) {
    const auto v = (static_cast<std::int64_t>(i) / stride) % space_.vocab_size();
    m[static_cast<std::size_t>(v)] += probs_[i];
  }
  return m;
}

double kl_divergence(std::span<const double> p, std::span<const double> q) {
  if (p.size() != q.size()) throw DomainError("kl_divergence: size mismatch");
  double kl = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (p[i] <= 0.0) continue;
    if (q[i] <= 0.0) {
      throw SupportMismatchError("kl_divergence: q vanishes at index " + std::to_string(i) + " where p > 0");
    }
    kl += p[i] * std::log(p[i] / q[i]);
  }
  // Rounding can leave tiny negative values for p ~ q.
  return kl < 0.0 ? 0.0 : kl;
}

double kl_divergence(const Pmf& p, const Pmf& q) {
  if (!(p.space() == q.space())) throw DomainError("kl_divergence: pmfs live on different spaces");
  return kl_divergence(p.probs(), q.probs());
}

double total_variation(std::span<const double> p, std::span<const double> q) {
  if (p.size() != q.size()) throw DomainError("total_variation: size mismatch");
  double tv = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) tv += std::abs(p[i] - q[i]);
  return 0.5 * tv;
}

namespace {

double entropy(std::span<const double> p) {
  double h = 0.0;
  for (double v : p) {
    if (v > 0.0) h -= v * std::log(v);
  }
  return h;
}

}  // namespace

double mutual_information(const Pmf& joint) {
  if (joint.space().num_dims() < 2) throw DegenerateInputError("mutual_information: needs at least two dims");
  double sum_marginal = 0.0;
  for (int d = 0; d < joint.space().num_dims(); ++d) sum_marginal += entropy(joint.marginal(d));
  const double mi = sum_marginal - entropy(joint.probs());
  return mi < 0.0 ? 0.0 : mi;
}

Pmf product_of_marginals(const Pmf& joint) {
  std::vector<std::vector<double>> factors;
  factors.reserve(static_cast<std::size_t>(joint.space().num_dims()));
  for (int d = 0; d < joint.space().num_dims(); ++d) factors.push_back(joint.marginal(d));
  return Pmf::product(factors);
}

nlohmann::json to_json(const Pmf& pmf) {
  return {{"dims", pmf.space().num_dims()},
          {"vocab", pmf.space().vocab_size()},
          {"probs", std::vector<double>(pmf.probs().begin(), pmf.probs().end())}};
}

Pmf pmf_from_json(const nlohmann::json& j) {
  StateSpace space(j.at("dims").get<int>(), j.at("vocab").get<int>());
  return Pmf(space, j.at("probs").get<std::vector<double>>());
}

}  // namespace jys
