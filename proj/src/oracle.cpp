#include "jys/oracle.hpp"

#include <cmath>
#include <string>

#include "jys/error.hpp"

namespace jys {

namespace {

constexpr double kStochasticTolerance = 1e-9;

std::vector<double> checked_law(std::vector<double> p, int vocab, const char* what) {
  if (static_cast<int>(p.size()) != vocab) throw DomainError(std::string(what) + ": wrong length");
  double sum = 0.0;
  for (double v : p) {
    if (!(v >= 0.0) || !std::isfinite(v)) throw DomainError(std::string(what) + ": negative or non-finite entry");
    sum += v;
  }
  if (std::abs(sum - 1.0) > kStochasticTolerance) {
    throw DomainError(std::string(what) + ": entries sum to " + std::to_string(sum));
  }
  for (double& v : p) v /= sum;
  return p;
}

std::vector<double> row_of(const Matrix& m, int r) {
  std::vector<double> out(static_cast<std::size_t>(m.cols()));
  for (int c = 0; c < m.cols(); ++c) out[static_cast<std::size_t>(c)] = m(r, c);
  return out;
}

// Applies the per-token kernel k to dimension `dim` of a flat joint vector.
void apply_along_dim(std::vector<double>& probs, const Matrix& k, int dim, int vocab) {
  std::size_t stride = 1;
  for (int d = 0; d < dim; ++d) stride *= static_cast<std::size_t>(vocab);
  const std::size_t block = stride * static_cast<std::size_t>(vocab);
  std::vector<double> in(static_cast<std::size_t>(vocab));
  for (std::size_t base = 0; base < probs.size(); base += block) {
    for (std::size_t off = 0; off < stride; ++off) {
      for (int a = 0; a < vocab; ++a) in[static_cast<std::size_t>(a)] = probs[base + off + a * stride];
      for (int b = 0; b < vocab; ++b) {
        double acc = 0.0;
        for (int a = 0; a < vocab; ++a) acc += in[static_cast<std::size_t>(a)] * k(a, b);
        probs[base + off + b * stride] = acc;
      }
    }
  }
}

}  // namespace

// ---------------------------------------------------------------------------
// DataDistribution

DataDistribution DataDistribution::from_explicit(Pmf joint) {
  const int d = joint.space().num_dims();
  const int s = joint.space().vocab_size();
  return DataDistribution(d, s, std::move(joint));
}

DataDistribution DataDistribution::from_markov(int num_dims, std::vector<double> initial,
                                               std::vector<Matrix> transitions) {
  if (num_dims < 1) throw DomainError("DataDistribution: num_dims must be >= 1");
  const int s = static_cast<int>(initial.size());
  if (s < 2) throw DomainError("DataDistribution: vocab must be >= 2");
  if (transitions.size() == 1 && num_dims > 2) transitions.resize(static_cast<std::size_t>(num_dims - 1), transitions[0]);
  if (static_cast<int>(transitions.size()) != num_dims - 1) {
    throw DomainError("DataDistribution: expected " + std::to_string(num_dims - 1) + " transition matrices");
  }
  MarkovChain chain;
  chain.initial = checked_law(std::move(initial), s, "markov initial law");
  for (auto& m : transitions) {
    if (m.rows() != s || m.cols() != s) throw DomainError("DataDistribution: transition matrix must be S x S");
    for (int r = 0; r < s; ++r) {
      const auto row = checked_law(row_of(m, r), s, "markov transition row");
      for (int c = 0; c < s; ++c) m(r, c) = row[static_cast<std::size_t>(c)];
    }
  }
  chain.transitions = std::move(transitions);
  return DataDistribution(num_dims, s, std::move(chain));
}

const Pmf& DataDistribution::joint() const {
  if (const auto* p = std::get_if<Pmf>(&rep_)) return *p;
  throw DomainError("DataDistribution: not in explicit form");
}

const MarkovChain& DataDistribution::chain() const {
  if (const auto* c = std::get_if<MarkovChain>(&rep_)) return *c;
  throw DomainError("DataDistribution: not in Markov form");
}

Pmf DataDistribution::to_explicit() const {
  if (is_explicit()) return joint();
  const auto& c = chain();
  const StateSpace sp = space();
  const auto n = sp.total_states();
  std::vector<double> probs(static_cast<std::size_t>(n));
  State x(static_cast<std::size_t>(num_dims_));
  for (std::int64_t i = 0; i < n; ++i) {
    sp.decode_into(i, x);
    double p = c.initial[static_cast<std::size_t>(x[0])];
    for (int d = 0; d + 1 < num_dims_ && p > 0.0; ++d) p *= c.transitions[static_cast<std::size_t>(d)](x[d], x[d + 1]);
    probs[static_cast<std::size_t>(i)] = p;
  }
  return Pmf(sp, std::move(probs));
}

State DataDistribution::sample(Rng& rng) const {
  if (is_explicit()) {
    const auto& p = joint();
    const int idx = Rng::categorical(p.probs(), rng.uniform());
    return p.space().decode(idx);
  }
  const auto& c = chain();
  State x(static_cast<std::size_t>(num_dims_));
  x[0] = Rng::categorical(c.initial, rng.uniform());
  std::vector<double> row;
  for (int d = 0; d + 1 < num_dims_; ++d) {
    row = row_of(c.transitions[static_cast<std::size_t>(d)], x[d]);
    x[d + 1] = Rng::categorical(row, rng.uniform());
  }
  return x;
}

std::vector<std::vector<double>> DataDistribution::position_marginals() const {
  std::vector<std::vector<double>> out;
  if (is_explicit()) {
    for (int d = 0; d < num_dims_; ++d) out.push_back(joint().marginal(d));
    return out;
  }
  const auto& c = chain();
  Eigen::RowVectorXd m = Eigen::Map<const Eigen::RowVectorXd>(c.initial.data(), vocab_size_);
  for (int d = 0; d < num_dims_; ++d) {
    out.emplace_back(m.data(), m.data() + vocab_size_);
    if (d + 1 < num_dims_) m = m * c.transitions[static_cast<std::size_t>(d)];
  }
  return out;
}

DataDistribution DataDistribution::smoothed(double eps, int num_values) const {
  if (!(eps >= 0.0 && eps < 1.0)) throw DomainError("smoothed: eps must lie in [0, 1)");
  if (num_values < 1 || num_values > vocab_size_) throw DomainError("smoothed: num_values out of range");
  const double floor = eps / num_values;
  if (is_explicit()) {
    // Uniform mass over sequences built only from tokens [0, num_values).
    const StateSpace sp = space();
    std::vector<double> p(joint().probs().begin(), joint().probs().end());
    std::int64_t count = 1;
    for (int d = 0; d < num_dims_; ++d) count *= num_values;
    State x(static_cast<std::size_t>(num_dims_));
    for (std::size_t i = 0; i < p.size(); ++i) {
      sp.decode_into(static_cast<std::int64_t>(i), x);
      bool inside = true;
      for (int v : x) inside = inside && v < num_values;
      p[i] = (1.0 - eps) * p[i] + (inside ? eps / static_cast<double>(count) : 0.0);
    }
    return from_explicit(Pmf(sp, std::move(p)));
  }
  auto c = chain();
  for (int v = 0; v < vocab_size_; ++v) {
    auto& pv = c.initial[static_cast<std::size_t>(v)];
    pv = (1.0 - eps) * pv + (v < num_values ? floor : 0.0);
  }
  for (auto& m : c.transitions) {
    m *= (1.0 - eps);
    m.leftCols(num_values).array() += floor;
  }
  return from_markov(num_dims_, std::move(c.initial), std::move(c.transitions));
}

nlohmann::json DataDistribution::to_json() const {
  if (is_explicit()) return {{"explicit", jys::to_json(joint())}};
  const auto& c = chain();
  nlohmann::json mats = nlohmann::json::array();
  for (const auto& m : c.transitions) {
    nlohmann::json rows = nlohmann::json::array();
    for (int r = 0; r < m.rows(); ++r) rows.push_back(row_of(m, r));
    mats.push_back(rows);
  }
  return {{"markov", {{"dims", num_dims_}, {"initial", c.initial}, {"transitions", mats}}}};
}

DataDistribution DataDistribution::from_json(const nlohmann::json& j) {
  if (j.contains("explicit")) {
    const auto& e = j.at("explicit");
    if (e.is_array()) {
      StateSpace sp(j.at("dims").get<int>(), j.at("vocab").get<int>());
      return from_explicit(Pmf(sp, e.get<std::vector<double>>()));
    }
    return from_explicit(pmf_from_json(e));
  }
  if (!j.contains("markov")) throw DomainError("data distribution JSON needs an 'explicit' or 'markov' key");
  const auto& m = j.at("markov");
  auto initial = m.at("initial").get<std::vector<double>>();
  const auto& tr = m.at("transitions");
  auto to_matrix = [](const nlohmann::json& rows) {
    const auto n = static_cast<int>(rows.size());
    Matrix out(n, n);
    for (int r = 0; r < n; ++r) {
      const auto row = rows.at(static_cast<std::size_t>(r)).get<std::vector<double>>();
      if (static_cast<int>(row.size()) != n) throw DomainError("markov transition matrix must be square");
      for (int c = 0; c < n; ++c) out(r, c) = row[static_cast<std::size_t>(c)];
    }
    return out;
  };
  std::vector<Matrix> mats;
  // A single S x S matrix is shared by every position.
  const bool shared = !tr.empty() && tr.at(0).is_array() && !tr.at(0).empty() && tr.at(0).at(0).is_number();
  if (shared) {
    mats.push_back(to_matrix(tr));
  } else {
    for (const auto& t : tr) mats.push_back(to_matrix(t));
  }
  const int dims = m.value("dims", static_cast<int>(mats.size()) + 1);
  if (dims == 1) mats.clear();
  return from_markov(dims, std::move(initial), std::move(mats));
}

// ---------------------------------------------------------------------------
// ReverseRates

ReverseRates::ReverseRates(State base_state, double t, int vocab)
    : base(std::move(base_state)),
      time(t),
      num_dims(static_cast<int>(base.size())),
      vocab_size(vocab),
      generators(static_cast<std::size_t>(num_dims) * vocab * vocab, 0.0) {}

Matrix ReverseRates::generator(int d) const {
  Matrix g(vocab_size, vocab_size);
  for (int i = 0; i < vocab_size; ++i) {
    for (int j = 0; j < vocab_size; ++j) g(i, j) = frozen_rate(d, i, j);
  }
  return g;
}

double ReverseRates::total_rate() const {
  double total = 0.0;
  for (int d = 0; d < num_dims; ++d) total += dim_exit_rate(d);
  return total;
}

void ReverseRates::fill_diagonals() {
  for (int d = 0; d < num_dims; ++d) {
    for (int i = 0; i < vocab_size; ++i) {
      double sum = 0.0;
      for (int j = 0; j < vocab_size; ++j) {
        if (j != i) sum += at(d, i, j);
      }
      at(d, i, i) = -sum;
    }
  }
}

// ---------------------------------------------------------------------------
// ReverseOracle

struct ReverseOracle::Sweep {
  double prob = 0.0;
  std::vector<double> ratios;     // [d * S + v]
  std::vector<double> posterior;  // [d * S + a]
};

ReverseOracle::ReverseOracle(DataDistribution data, FactorizedKernel kernel)
    : data_(std::move(data)), kernel_(std::move(kernel)) {
  if (data_.vocab_size() != kernel_.vocab_size()) {
    throw DomainError("ReverseOracle: data vocab " + std::to_string(data_.vocab_size()) + " != kernel vocab " +
                      std::to_string(kernel_.vocab_size()));
  }
}

ReverseOracle::Sweep ReverseOracle::sweep(const State& x, double t, bool want_posterior) const {
  const int dims = num_dims();
  const int s = vocab_size();
  if (static_cast<int>(x.size()) != dims) throw DomainError("oracle query: wrong number of dims");
  for (int v : x) {
    if (v < 0 || v >= s) throw DomainError("oracle query: token out of range");
  }
  const Matrix k = kernel_.transition_kernel_for_noise(kernel_.sigma(t));
  Sweep out;
  out.ratios.assign(static_cast<std::size_t>(dims) * s, 0.0);
  if (want_posterior) out.posterior.assign(static_cast<std::size_t>(dims) * s, 0.0);

  if (data_.is_explicit()) {
    const auto& joint = data_.joint();
    const auto& sp = joint.space();
    State x0(static_cast<std::size_t>(dims));
    std::vector<double> w(static_cast<std::size_t>(dims)), prefix(static_cast<std::size_t>(dims) + 1),
        suffix(static_cast<std::size_t>(dims) + 1);
    double total = 0.0;
    for (std::size_t i = 0; i < joint.size(); ++i) {
      const double p = joint.probs()[i];
      if (p <= 0.0) continue;
      sp.decode_into(static_cast<std::int64_t>(i), x0);
      prefix[0] = p;
      for (int d = 0; d < dims; ++d) {
        w[static_cast<std::size_t>(d)] = k(x0[d], x[d]);
        prefix[static_cast<std::size_t>(d) + 1] = prefix[static_cast<std::size_t>(d)] * w[static_cast<std::size_t>(d)];
      }
      suffix[static_cast<std::size_t>(dims)] = 1.0;
      for (int d = dims - 1; d >= 0; --d) {
        suffix[static_cast<std::size_t>(d)] = suffix[static_cast<std::size_t>(d) + 1] * w[static_cast<std::size_t>(d)];
      }
      const double full = prefix[static_cast<std::size_t>(dims)];
      total += full;
      for (int d = 0; d < dims; ++d) {
        const double loo = prefix[static_cast<std::size_t>(d)] * suffix[static_cast<std::size_t>(d) + 1];
        if (loo == 0.0) continue;
        for (int v = 0; v < s; ++v) out.ratios[static_cast<std::size_t>(d * s + v)] += loo * k(x0[d], v);
        if (want_posterior) out.posterior[static_cast<std::size_t>(d * s + x0[d])] += full;
      }
    }
    out.prob = total;
    if (total > 0.0) {
      for (double& r : out.ratios) r /= total;
      for (double& r : out.posterior) r /= total;
    }
    return out;
  }

  // Markov chain: scaled forward-backward over positions.
  const auto& c = data_.chain();
  std::vector<std::vector<double>> pre(static_cast<std::size_t>(dims), std::vector<double>(static_cast<std::size_t>(s)));
  std::vector<std::vector<double>> alpha(static_cast<std::size_t>(dims), std::vector<double>(static_cast<std::size_t>(s)));
  std::vector<double> scale(static_cast<std::size_t>(dims));
  double log_prob = 0.0;
  for (int d = 0; d < dims; ++d) {
    auto& pr = pre[static_cast<std::size_t>(d)];
    if (d == 0) {
      pr = c.initial;
    } else {
      const Matrix& a = c.transitions[static_cast<std::size_t>(d - 1)];
      const auto& prev = alpha[static_cast<std::size_t>(d - 1)];
      for (int b = 0; b < s; ++b) {
        double acc = 0.0;
        for (int a0 = 0; a0 < s; ++a0) acc += prev[static_cast<std::size_t>(a0)] * a(a0, b);
        pr[static_cast<std::size_t>(b)] = acc;
      }
    }
    double cd = 0.0;
    auto& al = alpha[static_cast<std::size_t>(d)];
    for (int a0 = 0; a0 < s; ++a0) {
      al[static_cast<std::size_t>(a0)] = pr[static_cast<std::size_t>(a0)] * k(a0, x[d]);
      cd += al[static_cast<std::size_t>(a0)];
    }
    if (!(cd > 0.0)) {
      out.prob = 0.0;
      return out;
    }
    for (double& v : al) v /= cd;
    scale[static_cast<std::size_t>(d)] = cd;
    log_prob += std::log(cd);
  }
  out.prob = std::exp(log_prob);

  std::vector<double> beta_hat(static_cast<std::size_t>(s), 1.0), next(static_cast<std::size_t>(s));
  for (int d = dims - 1; d >= 0; --d) {
    if (d < dims - 1) {
      const Matrix& a = c.transitions[static_cast<std::size_t>(d)];
      const double cn = scale[static_cast<std::size_t>(d) + 1];
      for (int a0 = 0; a0 < s; ++a0) {
        double acc = 0.0;
        for (int b = 0; b < s; ++b) acc += a(a0, b) * k(b, x[d + 1]) * beta_hat[static_cast<std::size_t>(b)];
        next[static_cast<std::size_t>(a0)] = acc / cn;
      }
      beta_hat.swap(next);
    }
    const auto& pr = pre[static_cast<std::size_t>(d)];
    const double cd = scale[static_cast<std::size_t>(d)];
    for (int v = 0; v < s; ++v) {
      double acc = 0.0;
      for (int a0 = 0; a0 < s; ++a0) acc += pr[static_cast<std::size_t>(a0)] * k(a0, v) * beta_hat[static_cast<std::size_t>(a0)];
      out.ratios[static_cast<std::size_t>(d * s + v)] = acc / cd;
    }
    if (want_posterior) {
      const auto& al = alpha[static_cast<std::size_t>(d)];
      for (int a0 = 0; a0 < s; ++a0) {
        out.posterior[static_cast<std::size_t>(d * s + a0)] = al[static_cast<std::size_t>(a0)] * beta_hat[static_cast<std::size_t>(a0)];
      }
    }
  }
  return out;
}

double ReverseOracle::prob(const State& x, double t) const { return sweep(x, t, false).prob; }

Pmf ReverseOracle::marginal(double t) const {
  const Pmf p0 = data_.to_explicit();
  std::vector<double> probs(p0.probs().begin(), p0.probs().end());
  if (kernel_.sigma(t) > 0.0) {
    const Matrix k = kernel_.transition_kernel_for_noise(kernel_.sigma(t));
    for (int d = 0; d < num_dims(); ++d) apply_along_dim(probs, k, d, vocab_size());
  }
  double sum = 0.0;
  for (double v : probs) sum += v;
  for (double& v : probs) v /= sum;
  return Pmf(p0.space(), std::move(probs));
}

namespace {

[[noreturn]] void throw_zero_support(double t) {
  throw ZeroSupportError("query state has zero probability under q_t at t = " + std::to_string(t));
}

}  // namespace

std::vector<double> ReverseOracle::neighbor_ratios(const State& x, double t) const {
  auto sw = sweep(x, t, false);
  if (!(sw.prob > 0.0)) throw_zero_support(t);
  // The identity change is exactly 1 by definition; the sweep gives it up to rounding.
  for (int d = 0; d < num_dims(); ++d) sw.ratios[static_cast<std::size_t>(d * vocab_size() + x[d])] = 1.0;
  return std::move(sw.ratios);
}

double ReverseOracle::score_ratio(const State& x, int dim, int value, double t) const {
  if (dim < 0 || dim >= num_dims() || value < 0 || value >= vocab_size()) {
    throw DomainError("score_ratio: dim or value out of range");
  }
  return neighbor_ratios(x, t)[static_cast<std::size_t>(dim * vocab_size() + value)];
}

Pmf ReverseOracle::denoising_posterior(const State& x, double t) const {
  const Pmf p0 = data_.to_explicit();
  const auto& sp = p0.space();
  const Matrix k = kernel_.transition_kernel_for_noise(kernel_.sigma(t));
  std::vector<double> post(p0.size(), 0.0);
  State x0(static_cast<std::size_t>(num_dims()));
  double total = 0.0;
  for (std::size_t i = 0; i < p0.size(); ++i) {
    double w = p0.probs()[i];
    if (w <= 0.0) continue;
    sp.decode_into(static_cast<std::int64_t>(i), x0);
    for (int d = 0; d < num_dims() && w > 0.0; ++d) w *= k(x0[d], x[d]);
    post[i] = w;
    total += w;
  }
  if (!(total > 0.0)) throw_zero_support(t);
  for (double& v : post) v /= total;
  return Pmf(sp, std::move(post));
}

std::vector<double> ReverseOracle::posterior_marginals(const State& x, double t) const {
  auto sw = sweep(x, t, true);
  if (!(sw.prob > 0.0)) throw_zero_support(t);
  return std::move(sw.posterior);
}

ReverseRates ReverseOracle::reverse_rates(const State& x, double t) const {
  if (!(t > 0.0 && t <= kernel_.horizon())) throw DomainError("reverse_rates: t must lie in (0, T]");
  const auto ratios = neighbor_ratios(x, t);
  const int s = vocab_size();
  const double b = kernel_.beta(t);
  const Matrix& shape = kernel_.shape();
  ReverseRates r(x, t, s);
  for (int d = 0; d < num_dims(); ++d) {
    const double* rd = ratios.data() + static_cast<std::size_t>(d) * s;
    for (int i = 0; i < s; ++i) {
      if (!(rd[i] > 0.0)) continue;  // row for a value the data cannot explain here
      for (int j = 0; j < s; ++j) {
        if (j == i || shape(j, i) == 0.0) continue;
        r.at(d, i, j) = b * shape(j, i) * rd[j] / rd[i];
      }
    }
  }
  r.fill_diagonals();
  return r;
}

State ReverseOracle::sample_prior(Rng& rng) const {
  const auto pi = kernel_.stationary_distribution();
  State x(static_cast<std::size_t>(num_dims()));
  for (auto& v : x) v = Rng::categorical(pi, rng.uniform());
  return x;
}

State ReverseOracle::forward_sample(const State& x0, double t, Rng& rng) const {
  const Matrix k = kernel_.transition_kernel_for_noise(kernel_.sigma(t));
  State x(x0.size());
  std::vector<double> row;
  for (std::size_t d = 0; d < x0.size(); ++d) {
    row = row_of(k, x0[d]);
    x[d] = Rng::categorical(row, rng.uniform());
  }
  return x;
}

State ReverseOracle::bridge_sample(const State& x0, const State& xs, double t, double s, Rng& rng) const {
  if (!(s > t)) throw IntervalError("bridge_sample: requires s > t");
  const Matrix k0 = kernel_.transition_kernel_for_noise(kernel_.sigma(t));
  const Matrix ks = kernel_.transition_kernel_for_noise(kernel_.sigma(s) - kernel_.sigma(t));
  const int sv = vocab_size();
  State x(x0.size());
  std::vector<double> w(static_cast<std::size_t>(sv));
  for (std::size_t d = 0; d < x0.size(); ++d) {
    for (int b = 0; b < sv; ++b) w[static_cast<std::size_t>(b)] = k0(x0[d], b) * ks(b, xs[d]);
    const int v = Rng::categorical(w, rng.uniform());
    if (v < 0) throw ZeroSupportError("bridge_sample: endpoints are inconsistent");
    x[d] = v;
  }
  return x;
}

State ReverseOracle::denoise_argmax(const State& x, double t) const {
  const auto post = posterior_marginals(x, t);
  const int s = vocab_size();
  State out(x.size());
  for (int d = 0; d < num_dims(); ++d) {
    int best = 0;
    for (int a = 1; a < s; ++a) {
      if (post[static_cast<std::size_t>(d * s + a)] > post[static_cast<std::size_t>(d * s + best)]) best = a;
    }
    out[static_cast<std::size_t>(d)] = best;
  }
  return out;
}

}  // namespace jys
