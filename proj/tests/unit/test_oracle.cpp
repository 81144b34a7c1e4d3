#include <doctest.h>

#include <cmath>

#include "jys/error.hpp"
#include "jys/oracle.hpp"
#include "jys/verify.hpp"

using namespace jys;

namespace {

std::vector<double> random_probs(Rng& rng, std::size_t n) {
  std::vector<double> p(n);
  double sum = 0.0;
  for (auto& v : p) sum += (v = rng.exponential(1.0));
  for (auto& v : p) v /= sum;
  return p;
}

// q_t(x) = sum_{x0} p(x0) prod_d K(x0_d, x_d), enumerated directly.
std::vector<double> brute_marginal(const Pmf& data, const FactorizedKernel& k, double t) {
  const auto& sp = data.space();
  const Matrix kt = t > 0.0 ? k.transition_kernel(0.0, t) : Matrix::Identity(k.vocab_size(), k.vocab_size());
  std::vector<double> q(data.size(), 0.0);
  for (std::int64_t x = 0; x < sp.total_states(); ++x) {
    const State xs = sp.decode(x);
    for (std::int64_t a = 0; a < sp.total_states(); ++a) {
      const State as = sp.decode(a);
      double w = data[a];
      for (int d = 0; d < sp.num_dims(); ++d) w *= kt(as[d], xs[d]);
      q[static_cast<std::size_t>(x)] += w;
    }
  }
  return q;
}

Matrix random_stochastic(Rng& rng, int s) {
  Matrix m(s, s);
  for (int r = 0; r < s; ++r) {
    const auto row = random_probs(rng, static_cast<std::size_t>(s));
    for (int c = 0; c < s; ++c) m(r, c) = row[static_cast<std::size_t>(c)];
  }
  return m;
}

}  // namespace

TEST_CASE("marginals match brute-force enumeration") {
  Rng rng(3);
  for (auto f : {KernelFamily::Uniform, KernelFamily::Absorbing, KernelFamily::Gaussian}) {
    const ReverseOracle o = random_oracle(f, 2, 3, rng);
    const Pmf data = o.data().joint();
    for (double t : {0.0, 0.25, 0.8}) {
      const auto ref = brute_marginal(data, o.kernel(), t);
      const auto q = o.marginal(t);
      for (std::size_t i = 0; i < ref.size(); ++i) CHECK(std::abs(q[static_cast<std::int64_t>(i)] - ref[i]) <= 1e-14);
    }
    // t = T: near the product prior.
    const auto qT = o.marginal(1.0);
    const auto pi = o.kernel().stationary_distribution();
    const auto prior = Pmf::product({pi, pi});
    CHECK(total_variation(qT.probs(), prior.probs()) <= 2 * 1e-3);
  }
}

TEST_CASE("Markov and explicit forms agree") {
  Rng rng(17);
  for (int dims : {2, 3}) {
    std::vector<Matrix> tr;
    for (int d = 0; d + 1 < dims; ++d) tr.push_back(random_stochastic(rng, 3));
    const auto markov = DataDistribution::from_markov(dims, random_probs(rng, 3), tr);
    const auto expl = DataDistribution::from_explicit(markov.to_explicit());
    const FactorizedKernel k(KernelFamily::Uniform, 3);
    const ReverseOracle om(markov, k), oe(expl, k);
    for (double t : {0.1, 0.5, 0.95}) {
      const auto a = om.marginal(t), b = oe.marginal(t);
      for (std::size_t i = 0; i < a.size(); ++i) CHECK(std::abs(a[i] - b[i]) <= 1e-12);
      const State x = om.space().decode(static_cast<std::int64_t>(rng.uniform_int(static_cast<int>(a.size()))));
      const auto ra = om.reverse_rates(x, t), rb = oe.reverse_rates(x, t);
      for (int d = 0; d < dims; ++d) {
        for (int v = 0; v < 3; ++v) CHECK(ra.rate(d, v) == doctest::Approx(rb.rate(d, v)).epsilon(1e-12));
      }
    }
  }
}

TEST_CASE("score ratios") {
  Rng rng(8);
  const ReverseOracle o = random_oracle(KernelFamily::Uniform, 2, 3, rng);
  const auto q = o.marginal(0.4);
  const State x{1, 2};
  CHECK(o.score_ratio(x, 0, 1, 0.4) == doctest::Approx(1.0));
  const State y{0, 2};
  CHECK(o.score_ratio(x, 0, 0, 0.4) ==
        doctest::Approx(q[state_index(y, o.space())] / q[state_index(x, o.space())]).epsilon(1e-12));

  const ReverseOracle flat(DataDistribution::from_explicit(Pmf::uniform(StateSpace(2, 3))),
                           FactorizedKernel(KernelFamily::Uniform, 3));
  for (int v = 0; v < 3; ++v) CHECK(flat.score_ratio(x, 1, v, 0.3) == doctest::Approx(1.0).epsilon(1e-14));
}

TEST_CASE("denoising posterior by Bayes rule") {
  Rng rng(21);
  const ReverseOracle o = random_oracle(KernelFamily::Gaussian, 2, 3, rng);
  const Pmf data = o.data().joint();
  const double t = 0.35;
  const Matrix kt = o.kernel().transition_kernel(0.0, t);
  const State x{2, 0};
  std::vector<double> ref(data.size());
  double z = 0.0;
  for (std::size_t a = 0; a < data.size(); ++a) {
    const State as = o.space().decode(static_cast<std::int64_t>(a));
    ref[a] = data[static_cast<std::int64_t>(a)] * kt(as[0], x[0]) * kt(as[1], x[1]);
    z += ref[a];
  }
  const auto post = o.denoising_posterior(x, t);
  for (std::size_t a = 0; a < ref.size(); ++a) CHECK(std::abs(post[static_cast<std::int64_t>(a)] - ref[a] / z) <= 1e-12);

  const auto at0 = o.denoising_posterior(x, 0.0);
  CHECK(at0[state_index(x, o.space())] == doctest::Approx(1.0));

  // Uniform kernel at t = T forgets x: posterior is close to p_data.
  const ReverseOracle u = random_oracle(KernelFamily::Uniform, 2, 3, rng);
  const auto pT = u.denoising_posterior(x, 1.0);
  CHECK(total_variation(pT.probs(), u.data().joint().probs()) <= 2e-3);
}

TEST_CASE("reverse rates: both parametrizations agree") {
  Rng rng(99);
  for (auto f : {KernelFamily::Uniform, KernelFamily::Absorbing, KernelFamily::Gaussian}) {
    const ReverseOracle o = random_oracle(f, 2, 3, rng);
    for (int probe = 0; probe < 10; ++probe) {
      const double t = 0.05 + 0.9 * rng.uniform();
      const auto q = o.marginal(t);
      std::int64_t idx = 0;
      do idx = rng.uniform_int(static_cast<int>(q.size()));
      while (!(q[idx] > 0.0));
      const State x = o.space().decode(idx);
      const auto r = o.reverse_rates(x, t);
      for (int d = 0; d < 2; ++d) {
        for (int v = 0; v < 3; ++v) {
          if (v == x[d]) continue;
          const double dn = denoising_form_rate(o, x, d, v, t);
          CHECK(std::abs(r.rate(d, v) - dn) <= 1e-10 * std::max(1.0, std::abs(dn)));
        }
      }
    }
  }
}

TEST_CASE("reverse rate special cases") {
  Rng rng(4);
  const ReverseOracle absorb = random_oracle(KernelFamily::Absorbing, 2, 3, rng);
  const auto clean = absorb.reverse_rates(State{0, 1}, 0.5);
  CHECK(clean.total_rate() == 0.0);

  // Product data under the stationary law: R~(x, y) = R(y, x) pi(y)/pi(x) = R(y, x) for uniform pi.
  const FactorizedKernel g(KernelFamily::Gaussian, 4);
  const auto pi = g.stationary_distribution();
  const ReverseOracle stat(DataDistribution::from_explicit(Pmf::product({pi, pi})), g);
  const State x{1, 3};
  const auto r = stat.reverse_rates(x, 0.6);
  const Matrix fwd = g.rate_matrix(0.6);
  for (int d = 0; d < 2; ++d) {
    for (int v = 0; v < 4; ++v) {
      if (v != x[d]) CHECK(r.rate(d, v) == doctest::Approx(fwd(v, x[d])).epsilon(1e-12));
    }
  }

  CHECK_THROWS_AS(absorb.reverse_rates(State{0, 1}, 0.0), DomainError);
  const ReverseOracle point(DataDistribution::from_explicit(Pmf::point_mass(StateSpace(1, 3), 0)),
                            FactorizedKernel(KernelFamily::Absorbing, 3));
  CHECK_THROWS_AS(point.reverse_rates(State{1}, 0.5), ZeroSupportError);
}

TEST_CASE("forward and bridge samples") {
  Rng rng(12);
  const ReverseOracle o = random_oracle(KernelFamily::Absorbing, 1, 3, rng);
  const int n = 40000;
  int masked = 0;
  for (int i = 0; i < n; ++i) masked += o.forward_sample(State{0}, 0.5, rng)[0] == 2;
  const double expect = 1.0 - std::exp(-o.kernel().sigma(0.5));
  CHECK(std::abs(masked / static_cast<double>(n) - expect) <= 4 * std::sqrt(expect * (1 - expect) / n));

  // Bridge with an unmasked end point: nothing can have happened in between.
  for (int i = 0; i < 100; ++i) CHECK(o.bridge_sample(State{1}, State{1}, 0.3, 0.7, rng) == State{1});
}

TEST_CASE("data distribution json and smoothing") {
  Rng rng(2);
  const auto m = DataDistribution::from_markov(3, {0.2, 0.8}, {random_stochastic(rng, 2), random_stochastic(rng, 2)});
  const auto back = DataDistribution::from_json(m.to_json());
  const auto a = m.to_explicit(), b = back.to_explicit();
  for (std::size_t i = 0; i < a.size(); ++i) CHECK(a[i] == doctest::Approx(b[i]).epsilon(1e-15));

  const auto sm = DataDistribution::from_explicit(Pmf::point_mass(StateSpace(2, 3), 0)).smoothed(0.1, 2);
  const auto& j = sm.joint();
  CHECK(j[0] == doctest::Approx(0.9 + 0.1 / 4));
  CHECK(j[state_index(std::vector<int>{1, 1}, j.space())] == doctest::Approx(0.1 / 4));
  CHECK(j[state_index(std::vector<int>{2, 0}, j.space())] == 0.0);
}
