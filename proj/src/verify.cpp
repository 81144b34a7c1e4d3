#include "jys/verify.hpp"

#include <algorithm>
#include <array>
#include <cmath>

#include "jys/error.hpp"
#include "jys/klub.hpp"
#include "jys/samplers.hpp"

namespace jys {

ReverseOracle random_oracle(KernelFamily family, int num_dims, int vocab_size, Rng& rng) {
  const StateSpace sp(num_dims, vocab_size);
  const int data_values = family == KernelFamily::Absorbing ? vocab_size - 1 : vocab_size;
  std::vector<double> w(static_cast<std::size_t>(sp.total_states()), 0.0);
  State x(static_cast<std::size_t>(num_dims));
  for (std::size_t i = 0; i < w.size(); ++i) {
    sp.decode_into(static_cast<std::int64_t>(i), x);
    const bool data = std::all_of(x.begin(), x.end(), [&](int v) { return v < data_values; });
    if (data) w[i] = -std::log(rng.uniform_open0());
  }
  double total = 0.0;
  for (double v : w) total += v;
  for (double& v : w) v /= total;
  return ReverseOracle(DataDistribution::from_explicit(Pmf(sp, std::move(w))), FactorizedKernel(family, vocab_size));
}

std::vector<double> random_schedule(double horizon, double t_min, int steps, Rng& rng) {
  if (steps < 1) throw DomainError("random_schedule: steps must be >= 1");
  std::vector<double> inner;
  for (int i = 0; i + 1 < steps; ++i) inner.push_back(t_min + (horizon - t_min) * (0.05 + 0.9 * rng.uniform()));
  std::sort(inner.begin(), inner.end(), std::greater<>());
  std::vector<double> out{horizon};
  for (double t : inner) {
    if (t < out.back()) out.push_back(t);
  }
  out.push_back(t_min);
  return out;
}

bool VerifyReport::passed() const {
  return std::all_of(checks.begin(), checks.end(), [](const CheckResult& c) { return c.passed || !c.asserted; });
}

nlohmann::json VerifyReport::to_json() const {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& c : checks) {
    arr.push_back({{"name", c.name},
                   {"passed", c.passed},
                   {"asserted", c.asserted},
                   {"value", c.value},
                   {"threshold", c.threshold},
                   {"detail", c.detail}});
  }
  return {{"passed", passed()}, {"checks", arr}};
}

namespace {

constexpr KernelFamily kFamilies[] = {KernelFamily::Uniform, KernelFamily::Absorbing, KernelFamily::Gaussian};

// Instance i of the shared random sweep: D <= 3, S <= 4, every family in turn.
ReverseOracle sweep_instance(int i, Rng& rng) {
  const KernelFamily family = kFamilies[i % 3];
  const int dims = 1 + rng.uniform_int(3);
  const int vocab = family == KernelFamily::Absorbing ? 3 + rng.uniform_int(2) : 2 + rng.uniform_int(3);
  return random_oracle(family, dims, vocab, rng);
}

std::string describe(const ReverseOracle& o) {
  return to_string(o.kernel().family()) + " D=" + std::to_string(o.num_dims()) + " S=" + std::to_string(o.vocab_size());
}

}  // namespace

double denoising_form_rate(const ReverseOracle& oracle, const State& x, int d, int v, double t) {
  const auto& k = oracle.kernel();
  const Matrix kt = k.transition_kernel_for_noise(k.sigma(t));
  const int xd = x[static_cast<std::size_t>(d)];
  const double forward = k.beta(t) * k.shape()(v, xd);
  if (forward == 0.0) return 0.0;
  const Pmf post = oracle.denoising_posterior(x, t);
  const StateSpace& sp = post.space();
  State x0(static_cast<std::size_t>(sp.num_dims()));
  double acc = 0.0;
  for (std::int64_t i = 0; i < sp.total_states(); ++i) {
    const double w = post[i];
    if (w == 0.0) continue;
    sp.decode_into(i, x0);
    const int a = x0[static_cast<std::size_t>(d)];
    acc += w * kt(a, v) / kt(a, xd);
  }
  return forward * acc;
}

CheckResult check_forward_marginal_identity(const VerifyOptions& opts) {
  CheckResult r{"forward_marginal_identity"};
  r.threshold = 1e-6;
  Rng rng(derive_seed(opts.seed, 1));
  for (int i = 0; i < 6; ++i) {
    const auto oracle = sweep_instance(i, rng);
    const double horizon = oracle.kernel().horizon();
    const std::vector<double> grid{horizon, 0.7 * horizon, 0.3 * horizon, 0.05 * horizon, 1e-4 * horizon};
    const auto marginals = exact_reverse_marginals(oracle, grid);
    for (std::size_t g = 0; g < grid.size(); ++g) {
      r.value = std::max(r.value, total_variation(marginals[g].probs(), oracle.marginal(grid[g]).probs()));
    }
  }
  r.passed = r.value <= r.threshold;
  return r;
}

CheckResult check_cde_bound(const VerifyOptions& opts, BruteStep step) {
  CheckResult r{"cde_bound_" + to_string(step)};
  r.threshold = 1e-9;
  r.value = -1e300;
  // The inequality is about the product of exact per-token conditionals; hold and
  // first-order steps add their own discretization error and are reported only.
  r.asserted = step == BruteStep::ExactMarginal;
  Rng rng(derive_seed(opts.seed, 2));
  constexpr int kSteps[] = {1, 2, 4};
  int holds = 0;
  nlohmann::json rows = nlohmann::json::array();
  for (int i = 0; i < opts.instances; ++i) {
    const auto oracle = sweep_instance(i, rng);
    const double horizon = oracle.kernel().horizon();
    const auto sched = random_schedule(horizon, 1e-4 * horizon, kSteps[(i / 3) % 3], rng);
    const auto rep = verify_cde_bound(oracle, sched, step, r.threshold);
    holds += rep.holds ? 1 : 0;
    r.value = std::max(r.value, rep.lhs - rep.rhs);
    rows.push_back({{"instance", describe(oracle)}, {"N", sched.size() - 1}, {"lhs", rep.lhs}, {"rhs", rep.rhs}});
  }
  r.detail = {{"holds", holds}, {"instances", opts.instances}, {"rows", rows}};
  r.passed = holds == opts.instances;
  return r;
}

CheckResult check_path_kl_bound(const VerifyOptions& opts) {
  CheckResult r{"path_kl_bound"};
  r.threshold = 0.0;
  r.value = -1e300;
  Rng rng(derive_seed(opts.seed, 3));
  int holds = 0;
  nlohmann::json rows = nlohmann::json::array();
  for (int i = 0; i < opts.instances; ++i) {
    const KernelFamily family = kFamilies[i % 3];
    const int dims = 1 + (i / 3) % 2;
    const int vocab = family == KernelFamily::Absorbing ? 3 : 2 + rng.uniform_int(2);
    const auto oracle = random_oracle(family, dims, vocab, rng);
    const double horizon = oracle.kernel().horizon();
    const double s = horizon * (0.3 + 0.7 * rng.uniform());
    const double t = s * (0.2 + 0.6 * rng.uniform());
    std::vector<double> segment{s, t};
    if (i % 2 == 1) segment = {s, 0.5 * (s + t), t};
    auto rep = verify_path_kl_bound(oracle, segment, opts.path_kl_paths, derive_seed(opts.seed, 100 + i));
    if (opts.fault == Fault::RateSign) {
      rep.path_kl.value = -rep.path_kl.value;
      rep.holds = rep.endpoint_kl <= rep.path_kl.value + 3.0 * rep.path_kl.standard_error;
    }
    holds += rep.holds ? 1 : 0;
    // Worst slack: endpoint minus (bound + 3 stderr); the check passes when all are <= 0.
    r.value = std::max(r.value, rep.endpoint_kl - rep.path_kl.value - 3.0 * rep.path_kl.standard_error);
    rows.push_back({{"instance", describe(oracle)},
                    {"segment", segment},
                    {"endpoint_kl", rep.endpoint_kl},
                    {"path_kl", rep.path_kl.value},
                    {"stderr", rep.path_kl.standard_error},
                    {"event_only", rep.event_only.value}});
  }
  r.detail = {{"holds", holds}, {"instances", opts.instances}, {"paths", opts.path_kl_paths}, {"rows", rows}};
  r.passed = holds == opts.instances;
  return r;
}

CheckResult check_parametrization(const VerifyOptions& opts) {
  CheckResult r{"parametrization_equivalence"};
  r.threshold = 1e-10;
  Rng rng(derive_seed(opts.seed, 4));
  for (int probe = 0; probe < 100; ++probe) {
    const auto oracle = sweep_instance(probe, rng);
    const StateSpace sp = oracle.space();
    const State x = sp.decode(static_cast<std::int64_t>(rng.uniform() * static_cast<double>(sp.total_states())));
    const double t = oracle.kernel().horizon() * (0.01 + 0.99 * rng.uniform());
    const auto rates = oracle.reverse_rates(x, t);
    for (int d = 0; d < sp.num_dims(); ++d) {
      for (int v = 0; v < sp.vocab_size(); ++v) {
        if (v == x[static_cast<std::size_t>(d)]) continue;
        const double a = rates.rate(d, v);
        const double b = denoising_form_rate(oracle, x, d, v, t);
        r.value = std::max(r.value, std::abs(a - b) / std::max(1.0, std::abs(b)));
      }
    }
  }
  r.passed = r.value <= r.threshold;
  return r;
}

CheckResult check_chapman_kolmogorov(const VerifyOptions& opts) {
  CheckResult r{"chapman_kolmogorov"};
  r.threshold = 1e-9;
  Rng rng(derive_seed(opts.seed, 5));
  for (KernelFamily family : kFamilies) {
    const FactorizedKernel k(family, 4 + rng.uniform_int(3));
    for (int i = 0; i < 50; ++i) {
      std::array<double, 3> ts{rng.uniform(), rng.uniform(), rng.uniform()};
      std::sort(ts.begin(), ts.end());
      const Matrix direct = k.transition_kernel(ts[0], ts[2]);
      const Matrix chained = k.transition_kernel(ts[0], ts[1]) * k.transition_kernel(ts[1], ts[2]);
      r.value = std::max(r.value, (direct - chained).cwiseAbs().maxCoeff());
    }
  }
  r.passed = r.value <= r.threshold;
  return r;
}

CheckResult check_cde_identity(const VerifyOptions& opts) {
  CheckResult r{"cde_equals_mi"};
  r.threshold = 1e-12;
  Rng rng(derive_seed(opts.seed, 6));
  int probes = 0;
  double min_cde = 0.0;
  for (int i = 0; i < opts.instances; ++i) {
    const auto oracle = sweep_instance(i, rng);
    const double horizon = oracle.kernel().horizon();
    const auto sched = random_schedule(horizon, 1e-4 * horizon, 2, rng);
    for (std::size_t k = 0; k + 1 < sched.size(); ++k) {
      const auto rep = cde(oracle, sched[k], sched[k + 1]);
      r.value = std::max(r.value, rep.max_identity_gap);
      for (double c : rep.conditional_cde) min_cde = std::min(min_cde, c);
      probes += static_cast<int>(rep.conditional_cde.size());
    }
  }
  r.detail = {{"probes", probes}, {"min_cde", min_cde}};
  r.passed = r.value <= r.threshold && min_cde >= -1e-15;
  return r;
}

CheckResult check_transition_counts(const VerifyOptions& opts) {
  CheckResult r{"transition_count_law"};
  r.threshold = 0.05;
  Rng rng(derive_seed(opts.seed, 7));
  struct Case {
    KernelFamily family;
    int dims;
    int vocab;
  };
  const Case cases[] = {{KernelFamily::Uniform, 1, 2}, {KernelFamily::Gaussian, 2, 2}, {KernelFamily::Absorbing, 2, 3}};
  nlohmann::json rows = nlohmann::json::array();
  for (const Case& c : cases) {
    const auto oracle = random_oracle(c.family, c.dims, c.vocab, rng);
    const double s = 0.5 * oracle.kernel().horizon();
    State x(static_cast<std::size_t>(c.dims), 0);
    if (c.family == KernelFamily::Absorbing) std::fill(x.begin(), x.end(), oracle.kernel().mask_token());
    const auto rates = oracle.reverse_rates(x, s);
    double max_exit = 0.0;
    for (int d = 0; d < c.dims; ++d) max_exit = std::max(max_exit, rates.dim_exit_rate(d));
    const double delta = 0.05 / max_exit;
    const FrozenProcess frozen(oracle, {s, s - delta});
    std::vector<double> counts(static_cast<std::size_t>(c.dims * c.vocab), 0.0);
    for (int p = 0; p < opts.count_paths; ++p) {
      Rng path_rng(derive_seed(derive_seed(opts.seed, 70), static_cast<std::uint64_t>(p)));
      const Path path = simulate_process(frozen, x, s, s - delta, path_rng);
      for (const Event& e : path.events) {
        if (e.from == x[static_cast<std::size_t>(e.dim)]) counts[static_cast<std::size_t>(e.dim * c.vocab + e.to)] += 1.0;
      }
    }
    for (int d = 0; d < c.dims; ++d) {
      for (int v = 0; v < c.vocab; ++v) {
        const double expected = rates.rate(d, v) * delta;
        // Pairs this rare carry more Monte-Carlo noise than the tolerance allows.
        if (expected < 0.02) continue;
        const double observed = counts[static_cast<std::size_t>(d * c.vocab + v)] / opts.count_paths;
        const double rel = std::abs(observed - expected) / expected;
        r.value = std::max(r.value, rel);
        rows.push_back({{"instance", describe(oracle)}, {"dim", d}, {"to", v}, {"expected", expected},
                        {"observed", observed}});
      }
    }
  }
  r.detail = {{"paths", opts.count_paths}, {"rows", rows}};
  r.passed = r.value <= r.threshold;
  return r;
}

CheckResult check_absorbing_single_jump(const VerifyOptions& opts) {
  CheckResult r{"absorbing_single_jump"};
  r.threshold = 1.0;
  Rng rng(derive_seed(opts.seed, 8));
  const auto oracle = random_oracle(KernelFamily::Absorbing, 3, 4, rng);
  const double horizon = oracle.kernel().horizon();
  const auto sched = random_schedule(horizon, 1e-4 * horizon, 4, rng);
  const int n = std::max(1, opts.count_paths / 10);
  for (int p = 0; p < n; ++p) {
    Rng path_rng(derive_seed(derive_seed(opts.seed, 80), static_cast<std::uint64_t>(p)));
    const Path paths[] = {gillespie_exact(oracle, horizon, 1e-4 * horizon, path_rng),
                          tau_leap_sample(oracle, sched, path_rng, StepKernel::Euler),
                          k_gillespie_sample(oracle, 2, horizon, 1e-4 * horizon, path_rng)};
    for (const Path& path : paths) {
      std::vector<int> per_dim(3, 0);
      for (const Event& e : path.events) ++per_dim[static_cast<std::size_t>(e.dim)];
      r.value = std::max(r.value, static_cast<double>(*std::max_element(per_dim.begin(), per_dim.end())));
    }
  }
  r.detail = {{"paths_per_sampler", n}};
  r.passed = r.value <= r.threshold;
  return r;
}

VerifyReport run_verify_suite(const VerifyOptions& opts) {
  VerifyReport rep;
  rep.checks.push_back(check_forward_marginal_identity(opts));
  rep.checks.push_back(check_cde_bound(opts, BruteStep::ExactMarginal));
  rep.checks.push_back(check_cde_bound(opts, BruteStep::ExactHold));
  rep.checks.push_back(check_cde_bound(opts, BruteStep::Euler));
  rep.checks.push_back(check_path_kl_bound(opts));
  rep.checks.push_back(check_parametrization(opts));
  rep.checks.push_back(check_chapman_kolmogorov(opts));
  rep.checks.push_back(check_cde_identity(opts));
  rep.checks.push_back(check_transition_counts(opts));
  rep.checks.push_back(check_absorbing_single_jump(opts));
  return rep;
}

}  // namespace jys
