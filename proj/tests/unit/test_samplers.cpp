#include <doctest.h>

#include <cmath>
#include <map>
#include <sstream>

#include "jys/error.hpp"
#include "jys/samplers.hpp"
#include "jys/verify.hpp"

using namespace jys;

namespace {

// Time-homogeneous single-token model with a fixed S x S generator.
class ConstantModel : public RateModel {
 public:
  explicit ConstantModel(Matrix gen) : gen_(std::move(gen)) {}
  int num_dims() const override { return 1; }
  int vocab_size() const override { return static_cast<int>(gen_.rows()); }
  ReverseRates rates(const State& x, double t) const override {
    ReverseRates r(x, t, vocab_size());
    for (int i = 0; i < vocab_size(); ++i) {
      for (int j = 0; j < vocab_size(); ++j) r.at(0, i, j) = gen_(i, j);
    }
    return r;
  }

 private:
  Matrix gen_;
};

Matrix one_way(double lambda) {
  Matrix g = Matrix::Zero(2, 2);
  g(0, 1) = lambda;
  g(0, 0) = -lambda;
  return g;
}

std::map<State, double> histogram(const std::vector<State>& xs) {
  std::map<State, double> h;
  for (const auto& x : xs) h[x] += 1.0 / static_cast<double>(xs.size());
  return h;
}

double tv(const std::map<State, double>& a, const std::map<State, double>& b) {
  double s = 0.0;
  for (const auto& [k, v] : a) s += std::abs(v - (b.count(k) ? b.at(k) : 0.0));
  for (const auto& [k, v] : b) {
    if (!a.count(k)) s += v;
  }
  return 0.5 * s;
}

}  // namespace

TEST_CASE("gillespie holding time under a constant rate") {
  const ConstantModel m(one_way(1.0));
  Rng rng(1);
  const int n = 100000;
  int quiet = 0;
  for (int i = 0; i < n; ++i) quiet += gillespie_exact(m, State{0}, 1.0, 0.0, rng).events.empty();
  CHECK(std::abs(quiet / static_cast<double>(n) - std::exp(-1.0)) <= 0.01);

  const ConstantModel zero(Matrix::Zero(2, 2));
  CHECK(gillespie_exact(zero, State{1}, 1.0, 0.0, rng).events.empty());
}

TEST_CASE("tau-leap step kernels") {
  const ConstantModel m(one_way(1.0));
  const auto r = m.rates(State{0}, 0.5);
  Rng rng(2);
  const int n = 100000;
  int flips = 0;
  for (int i = 0; i < n; ++i) flips += tau_leap_step(State{0}, r, 0.5, rng, StepKernel::ExactHold)[0] == 1;
  CHECK(std::abs(flips / static_cast<double>(n) - (1.0 - std::exp(-0.5))) <= 0.005);

  const auto euler = step_row(r, 0, 0, 0.3, StepKernel::Euler);
  CHECK(euler[1] == doctest::Approx(0.3));
  CHECK(euler[0] == doctest::Approx(0.7));
  const auto capped = step_row(r, 0, 0, 3.0, StepKernel::Euler);
  CHECK(capped[1] == doctest::Approx(1.0));
  CHECK(capped[0] == 0.0);

  CHECK(tau_leap_step(State{0}, r, 0.0, rng, StepKernel::Euler) == State{0});
  const ConstantModel zero(Matrix::Zero(2, 2));
  CHECK(tau_leap_step(State{1}, zero.rates(State{1}, 0.5), 0.7, rng, StepKernel::ExactHold) == State{1});

  // Two-way chain: ExactHold agrees with the matrix exponential row.
  Matrix g(2, 2);
  g << -1.0, 1.0, 2.0, -2.0;
  const ConstantModel two(g);
  const auto row = step_row(two.rates(State{0}, 0.5), 0, 0, 0.4, StepKernel::ExactHold);
  const Matrix ref = matrix_exponential(0.4 * g);
  CHECK(row[0] == doctest::Approx(ref(0, 0)).epsilon(1e-12));
  CHECK(row[1] == doctest::Approx(ref(0, 1)).epsilon(1e-12));
}

TEST_CASE("path structure, determinism and NFE") {
  Rng gen(5);
  const ReverseOracle o = random_oracle(KernelFamily::Uniform, 2, 3, gen);
  const std::vector<double> steps{1.0, 0.6, 0.3, 1e-4};
  for (std::uint64_t seed = 0; seed < 200; ++seed) {
    Rng a(seed), b(seed);
    const Path p = tau_leap_sample(o, steps, a, StepKernel::Euler);
    const Path q = tau_leap_sample(o, steps, b, StepKernel::Euler);
    CHECK(p == q);
    CHECK(p.nfe == 3);
    CHECK_NOTHROW(p.validate());
    Rng c(seed);
    CHECK_NOTHROW(gillespie_exact(o, 1.0, 1e-4, c).validate());
  }
  Path bad;
  bad.start_time = 1.0;
  bad.end_time = 0.0;
  bad.initial = {0};
  bad.events = {{0.5, 0, 1, 2}};
  CHECK_THROWS_AS(bad.validate(), DomainError);
}

TEST_CASE("absorbing paths unmask each dim at most once") {
  Rng gen(6);
  const ReverseOracle o = random_oracle(KernelFamily::Absorbing, 3, 3, gen);
  const int mask = o.kernel().mask_token();
  for (std::uint64_t seed = 0; seed < 300; ++seed) {
    Rng r1(seed), r2(seed), r3(seed);
    const Path g = gillespie_exact(o, 1.0, 1e-4, r1);
    const Path t = tau_leap_sample(o, std::vector<double>{1.0, 0.5, 0.2, 1e-4}, r2, StepKernel::Euler);
    const Path k = k_gillespie_sample(o, 2, 1.0, 1e-4, r3);
    for (const Path* p : {&g, &t, &k}) {
      CHECK_NOTHROW(p->validate());
      std::vector<int> per_dim(3, 0);
      for (const auto& e : p->events) {
        CHECK(e.from == mask);
        ++per_dim[static_cast<std::size_t>(e.dim)];
      }
      int initially_masked = 0, still_masked = 0;
      for (int d = 0; d < 3; ++d) {
        CHECK(per_dim[static_cast<std::size_t>(d)] <= 1);
        initially_masked += p->initial[static_cast<std::size_t>(d)] == mask;
        still_masked += p->final_state()[static_cast<std::size_t>(d)] == mask;
      }
      CHECK(static_cast<int>(p->events.size()) == initially_masked - still_masked);
    }
    CHECK(k.nfe <= 2);
    CHECK(k.final_state() == State(readout(o, k)));
  }
  Rng r(0);
  const Path all = k_gillespie_sample(o, 10, 1.0, 1e-4, r);
  CHECK(all.nfe == 1);
  CHECK(all.events.size() == 3);
  const ReverseOracle uni = random_oracle(KernelFamily::Uniform, 1, 3, gen);
  CHECK_THROWS_AS(k_gillespie_sample(uni, 1, 1.0, 0.1, r), UnsupportedFamilyError);
}

TEST_CASE("fine tau-leaping and k=1 k-Gillespie match exact Gillespie") {
  Rng gen(7);
  const ReverseOracle o = random_oracle(KernelFamily::Uniform, 2, 3, gen);
  const int n = 40000;
  std::vector<double> fine(2001);
  for (int i = 0; i <= 2000; ++i) fine[static_cast<std::size_t>(i)] = 1.0 - (1.0 - 1e-4) * i / 2000.0;
  std::vector<State> exact, leap;
  for (int i = 0; i < n; ++i) {
    Rng a(derive_seed(1, i)), b(derive_seed(2, i));
    exact.push_back(gillespie_exact(o, 1.0, 1e-4, a).final_state());
    leap.push_back(tau_leap_sample(o, fine, b, StepKernel::Euler).final_state());
  }
  CHECK(tv(histogram(exact), histogram(leap)) <= 0.02);

  const ReverseOracle a = random_oracle(KernelFamily::Absorbing, 3, 4, gen);
  std::vector<State> g, k;
  for (int i = 0; i < n; ++i) {
    Rng r1(derive_seed(3, i)), r2(derive_seed(4, i));
    g.push_back(gillespie_exact(a, 1.0, 1e-4, r1).final_state());
    k.push_back(k_gillespie_sample(a, 1, 1.0, 1e-4, r2).final_state());
  }
  CHECK(tv(histogram(g), histogram(k)) <= 0.02);
}

TEST_CASE("frozen process and ensembles") {
  Rng gen(8);
  const ReverseOracle o = random_oracle(KernelFamily::Gaussian, 2, 3, gen);
  const FrozenProcess fp(o, {1.0, 0.5, 0.1});
  CHECK(fp.step_of(1.0) == 0);
  CHECK(fp.step_of(0.7) == 0);
  CHECK(fp.step_of(0.5) == 1);  // steps cover (next, current]
  CHECK(fp.step_of(0.3) == 1);
  CHECK(fp.step_of(0.1) == 1);

  SamplerConfig cfg;
  cfg.seed = 33;
  std::ostringstream log1, log2;
  const auto e1 = sample_ensemble(o, std::vector<double>{1.0, 0.5, 1e-4}, cfg, 50, &log1);
  const auto e2 = sample_ensemble(o, std::vector<double>{1.0, 0.5, 1e-4}, cfg, 50, &log2);
  CHECK(e1.samples == e2.samples);
  CHECK(log1.str() == log2.str());
  CHECK(e1.nfe == 100);
  const auto first = nlohmann::json::parse(log1.str().substr(0, log1.str().find('\n')));
  CHECK(first.contains("init"));
  CHECK(first.contains("events"));

  cfg.k = 0;
  CHECK_THROWS_AS(cfg.validate(), DomainError);
}
