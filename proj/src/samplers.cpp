#include "jys/samplers.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <ostream>

#include "jys/error.hpp"

namespace jys {

namespace {

constexpr int kMaxBoundDoublings = 64;

}  // namespace

State Path::final_state() const {
  State x = initial;
  for (const auto& e : events) x[static_cast<std::size_t>(e.dim)] = e.to;
  return x;
}

State Path::state_at(double t) const {
  State x = initial;
  for (const auto& e : events) {
    if (e.time < t) break;
    x[static_cast<std::size_t>(e.dim)] = e.to;
  }
  return x;
}

void Path::validate() const {
  if (!(start_time > end_time)) throw DomainError("Path: start_time must exceed end_time");
  State x = initial;
  double last = start_time;
  for (std::size_t i = 0; i < events.size(); ++i) {
    const auto& e = events[i];
    if (e.dim < 0 || e.dim >= static_cast<int>(x.size())) throw DomainError("Path: event dim out of range");
    if (!(e.time > end_time && e.time <= start_time)) {
      throw DomainError("Path: event " + std::to_string(i) + " time outside (end, start]");
    }
    if (e.time > last) throw DomainError("Path: event times increase at " + std::to_string(i));
    if (x[static_cast<std::size_t>(e.dim)] != e.from) {
      throw DomainError("Path: event " + std::to_string(i) + " 'from' disagrees with the replayed state");
    }
    if (e.from == e.to) throw DomainError("Path: self-transition at event " + std::to_string(i));
    x[static_cast<std::size_t>(e.dim)] = e.to;
    last = e.time;
  }
}

std::string to_string(SamplerMethod m) {
  switch (m) {
    case SamplerMethod::GillespieExact: return "gillespie";
    case SamplerMethod::TauLeap: return "tau_leap";
    case SamplerMethod::KGillespie: return "k_gillespie";
  }
  return "unknown";
}

std::string to_string(StepKernel k) { return k == StepKernel::Euler ? "euler" : "exact_hold"; }

SamplerMethod sampler_method_from_string(const std::string& s) {
  if (s == "gillespie" || s == "gillespie_exact") return SamplerMethod::GillespieExact;
  if (s == "tau_leap" || s == "tau-leap" || s == "tau") return SamplerMethod::TauLeap;
  if (s == "k_gillespie" || s == "k-gillespie") return SamplerMethod::KGillespie;
  throw DomainError("unknown sampler method '" + s + "'");
}

StepKernel step_kernel_from_string(const std::string& s) {
  if (s == "euler") return StepKernel::Euler;
  if (s == "exact_hold" || s == "exact-hold" || s == "exacthold") return StepKernel::ExactHold;
  throw DomainError("unknown step kernel '" + s + "'");
}

void SamplerConfig::validate() const {
  if (k < 1) throw DomainError("SamplerConfig: k must be >= 1");
  if (!(t_min_fraction > 0.0 && t_min_fraction < 1.0)) throw DomainError("SamplerConfig: t_min must be positive");
}

ReverseRates ExactProcess::at(double u, const State& x, const State&) const { return model_->rates(x, u); }

FrozenProcess::FrozenProcess(const RateModel& model, std::vector<double> timesteps)
    : model_(&model), timesteps_(std::move(timesteps)) {
  if (timesteps_.size() < 2) throw DomainError("FrozenProcess: need at least two timesteps");
  for (std::size_t i = 1; i < timesteps_.size(); ++i) {
    if (!(timesteps_[i] < timesteps_[i - 1])) throw DomainError("FrozenProcess: timesteps must decrease strictly");
  }
}

std::size_t FrozenProcess::step_of(double u) const {
  // First node strictly below u; the step starts one node earlier.
  const auto it = std::upper_bound(timesteps_.begin(), timesteps_.end(), u, std::greater<>());
  auto i = static_cast<std::size_t>(std::distance(timesteps_.begin(), it));
  if (i == 0) return 0;
  return std::min(i - 1, timesteps_.size() - 2);
}

ReverseRates FrozenProcess::at(double u, const State&, const State& anchor) const {
  return model_->rates(anchor, timesteps_[step_of(u)]);
}

double exit_rate_from(const ReverseRates& rates, const State& x) {
  double total = 0.0;
  for (int d = 0; d < rates.num_dims; ++d) total -= rates.frozen_rate(d, x[static_cast<std::size_t>(d)], x[static_cast<std::size_t>(d)]);
  return total;
}

std::vector<double> step_row(const ReverseRates& rates, int dim, int from, double delta, StepKernel kernel) {
  const int s = rates.vocab_size;
  std::vector<double> p(static_cast<std::size_t>(s), 0.0);
  const auto row = rates.generator_row(dim, from);
  double out = 0.0;
  for (int v = 0; v < s; ++v) {
    if (v != from) out += std::max(0.0, row[static_cast<std::size_t>(v)]);
  }
  if (!(out > 0.0) || !(delta > 0.0)) {
    p[static_cast<std::size_t>(from)] = 1.0;
    return p;
  }
  if (kernel == StepKernel::Euler) {
    double sum = 0.0;
    for (int v = 0; v < s; ++v) {
      if (v == from) continue;
      p[static_cast<std::size_t>(v)] = std::max(0.0, row[static_cast<std::size_t>(v)]) * delta;
      sum += p[static_cast<std::size_t>(v)];
    }
    if (sum > 1.0) {
      for (double& q : p) q /= sum;
    } else {
      p[static_cast<std::size_t>(from)] = 1.0 - sum;
    }
    return p;
  }
  // Exact hold. When every reachable value is itself absorbing (the unmasking case) the
  // row of exp(delta G) is a single exponential race.
  bool one_shot = true;
  for (int v = 0; v < s && one_shot; ++v) {
    if (v == from || row[static_cast<std::size_t>(v)] <= 0.0) continue;
    one_shot = rates.frozen_rate(dim, v, v) == 0.0;
  }
  if (one_shot) {
    const double stay = std::exp(-out * delta);
    p[static_cast<std::size_t>(from)] = stay;
    for (int v = 0; v < s; ++v) {
      if (v != from) p[static_cast<std::size_t>(v)] = (1.0 - stay) * std::max(0.0, row[static_cast<std::size_t>(v)]) / out;
    }
    return p;
  }
  const Matrix m = matrix_exponential(delta * rates.generator(dim));
  double sum = 0.0;
  for (int v = 0; v < s; ++v) {
    p[static_cast<std::size_t>(v)] = std::max(0.0, m(from, v));
    sum += p[static_cast<std::size_t>(v)];
  }
  for (double& q : p) q /= sum;
  return p;
}

State tau_leap_step(const State& x, const ReverseRates& rates, double delta, std::span<const double> uniforms,
                    StepKernel kernel) {
  if (uniforms.size() < x.size()) throw DomainError("tau_leap_step: one uniform per dim required");
  State next = x;
  for (std::size_t d = 0; d < x.size(); ++d) {
    const auto p = step_row(rates, static_cast<int>(d), x[d], delta, kernel);
    const int v = Rng::categorical(p, uniforms[d]);
    if (v >= 0) next[d] = v;
  }
  return next;
}

State tau_leap_step(const State& x, const ReverseRates& rates, double delta, Rng& rng, StepKernel kernel) {
  std::vector<double> u(x.size());
  for (double& v : u) v = rng.uniform();
  return tau_leap_step(x, rates, delta, u, kernel);
}

Path tau_leap_sample(const RateModel& model, std::span<const double> timesteps, const State& initial, Rng& rng,
                     StepKernel kernel) {
  if (timesteps.size() < 2) throw DomainError("tau_leap_sample: schedule needs at least two timesteps");
  Path path;
  path.start_time = timesteps.front();
  path.end_time = timesteps.back();
  path.initial = initial;
  State x = initial;
  std::vector<double> u(x.size());
  for (std::size_t i = 0; i + 1 < timesteps.size(); ++i) {
    const double hi = timesteps[i];
    const double lo = timesteps[i + 1];
    if (!(lo < hi)) throw DomainError("tau_leap_sample: timesteps must decrease strictly");
    const auto rates = model.rates(x, hi);
    ++path.nfe;
    for (double& v : u) v = rng.uniform();
    const State next = tau_leap_step(x, rates, hi - lo, u, kernel);
    const double stamp = 0.5 * (hi + lo);
    for (std::size_t d = 0; d < x.size(); ++d) {
      if (next[d] != x[d]) path.events.push_back({stamp, static_cast<int>(d), x[d], next[d]});
    }
    x = next;
  }
  return path;
}

Path tau_leap_sample(const ReverseOracle& oracle, std::span<const double> timesteps, Rng& rng, StepKernel kernel) {
  const State init = oracle.sample_prior(rng);
  return tau_leap_sample(oracle, timesteps, init, rng, kernel);
}

namespace {

// Picks (dim, value) with probability proportional to the rate out of x.
std::pair<int, int> choose_transition(const ReverseRates& r, const State& x, double total, Rng& rng) {
  const double target = rng.uniform() * total;
  double acc = 0.0;
  std::pair<int, int> last{-1, -1};
  for (int d = 0; d < r.num_dims; ++d) {
    for (int v = 0; v < r.vocab_size; ++v) {
      const double w = rate_from(r, x, d, v);
      if (w <= 0.0) continue;
      acc += w;
      last = {d, v};
      if (target < acc) return last;
    }
  }
  return last;
}

}  // namespace

Path simulate_process(const RateProcess& process, const State& initial, double start, double end, Rng& rng) {
  if (!(start > end)) throw IntervalError("simulate_process: requires start > end");
  Path path;
  path.start_time = start;
  path.end_time = end;
  path.initial = initial;
  State x = initial;

  std::vector<double> nodes{start};
  for (double b : process.breakpoints()) {
    if (b < start && b > end) nodes.push_back(b);
  }
  nodes.push_back(end);

  for (std::size_t piece = 0; piece + 1 < nodes.size(); ++piece) {
    const double hi = nodes[piece];
    const double lo = nodes[piece + 1];
    const State anchor = x;
    double u = hi;
    if (process.piecewise_constant()) {
      const auto r = process.at(hi, x, anchor);
      ++path.nfe;
      for (;;) {
        const double lambda = exit_rate_from(r, x);
        if (!(lambda > 0.0)) break;
        u -= rng.exponential(lambda);
        if (u <= lo) break;
        const auto [d, v] = choose_transition(r, x, lambda, rng);
        path.events.push_back({u, d, x[static_cast<std::size_t>(d)], v});
        x[static_cast<std::size_t>(d)] = v;
      }
      continue;
    }
    // Thinning in windows [u - w, u] with w <= u / 4 (floored at a fixed fraction of
    // the piece so the walk reaches 0), so a rate growing like 1/u at
    // most changes by a bounded factor inside one window. The bound is twice the
    // largest exit rate seen at the window's ends and middle; a proposal that
    // leaves the window restarts at its edge, which is exact by memorylessness.
    double lambda_hi = exit_rate_from(process.at(u, x, anchor), x);
    ++path.nfe;
    int doublings = 0;
    while (u > lo) {
      const double a = u - std::min(u - lo, std::max(0.25 * u, (hi - lo) / 4096.0));
      const double lambda_mid = exit_rate_from(process.at(0.5 * (u + a), x, anchor), x);
      const double lambda_lo = exit_rate_from(process.at(a, x, anchor), x);
      path.nfe += 2;
      double bound = 2.0 * std::max({lambda_hi, lambda_mid, lambda_lo});
      bool moved = false;
      while (bound > 0.0) {
        const double proposal = u - rng.exponential(bound);
        if (proposal <= a) break;
        const auto rp = process.at(proposal, x, anchor);
        ++path.nfe;
        const double lp = exit_rate_from(rp, x);
        if (lp > bound) {
          bound *= 2.0;
          ++path.bound_doublings;
          if (++doublings > kMaxBoundDoublings) {
            throw BoundViolationError("simulate_process: thinning bound could not be raised above the exit rate");
          }
          continue;
        }
        u = proposal;
        if (rng.uniform() * bound < lp) {
          const auto [d, v] = choose_transition(rp, x, lp, rng);
          path.events.push_back({u, d, x[static_cast<std::size_t>(d)], v});
          x[static_cast<std::size_t>(d)] = v;
          lambda_hi = exit_rate_from(process.at(u, x, anchor), x);
          ++path.nfe;
          moved = true;
          break;
        }
      }
      if (!moved) {
        u = a;
        lambda_hi = lambda_lo;
      }
    }
  }
  return path;
}

Path gillespie_exact(const RateModel& model, const State& initial, double start, double end, Rng& rng) {
  return simulate_process(ExactProcess(model), initial, start, end, rng);
}

Path gillespie_exact(const ReverseOracle& oracle, double start, double end, Rng& rng) {
  const State init = oracle.sample_prior(rng);
  return gillespie_exact(oracle, init, start, end, rng);
}

Path k_gillespie_sample(const ReverseOracle& oracle, int k, double start, double end, Rng& rng) {
  if (!oracle.kernel().is_absorbing()) {
    throw UnsupportedFamilyError("k_gillespie_sample: only absorbing kernels have a fixed number of transitions");
  }
  if (k < 1) throw DomainError("k_gillespie_sample: k must be >= 1");
  if (!(start > end)) throw IntervalError("k_gillespie_sample: requires start > end");
  const int mask = oracle.kernel().mask_token();
  Path path;
  path.start_time = start;
  path.end_time = end;
  path.initial = oracle.sample_prior(rng);
  State x = path.initial;
  double u = start;
  std::vector<std::pair<double, int>> clocks;
  for (;;) {
    clocks.clear();
    for (int d = 0; d < oracle.num_dims(); ++d) {
      if (x[static_cast<std::size_t>(d)] == mask) clocks.emplace_back(0.0, d);
    }
    if (clocks.empty()) break;
    const auto r = oracle.reverse_rates(x, u);
    ++path.nfe;
    for (auto& [tau, d] : clocks) {
      const double lam = r.dim_exit_rate(d);
      tau = lam > 0.0 ? rng.exponential(lam) : std::numeric_limits<double>::infinity();
    }
    std::sort(clocks.begin(), clocks.end());
    const std::size_t m = std::min<std::size_t>(static_cast<std::size_t>(k), clocks.size());
    double last = clocks[m - 1].first;
    if (!std::isfinite(last)) throw NumericalError("k_gillespie_sample: masked token with zero unmask rate");
    // A batch that would overshoot the end time is compressed into the first half of
    // (end, u), leaving room for the batches that still have to commit.
    const double scale = (u - last > end) ? 1.0 : 0.5 * (u - end) / last;
    const double floor_time = std::nextafter(end, start);
    for (std::size_t i = 0; i < m; ++i) {
      const int d = clocks[i].second;
      const auto row = r.generator_row(d, mask);
      std::vector<double> w(row.begin(), row.end());
      w[static_cast<std::size_t>(mask)] = 0.0;
      for (double& q : w) q = std::max(0.0, q);
      const int v = rng.categorical(w);
      if (v < 0) throw NumericalError("k_gillespie_sample: empty unmask row");
      path.events.push_back({std::max(u - clocks[i].first * scale, floor_time), d, mask, v});
      x[static_cast<std::size_t>(d)] = v;
    }
    u = std::max(u - last * scale, floor_time);
  }
  return path;
}

State readout(const ReverseOracle& oracle, const Path& path, int* filled) {
  State x = path.final_state();
  int count = 0;
  if (oracle.kernel().is_absorbing()) {
    const int mask = oracle.kernel().mask_token();
    if (std::find(x.begin(), x.end(), mask) != x.end()) {
      const State best = oracle.denoise_argmax(x, path.end_time);
      for (std::size_t d = 0; d < x.size(); ++d) {
        if (x[d] == mask) {
          x[d] = best[d];
          ++count;
        }
      }
    }
  }
  if (filled != nullptr) *filled = count;
  return x;
}

Ensemble sample_ensemble(const ReverseOracle& oracle, std::span<const double> timesteps, const SamplerConfig& config,
                         int n, std::ostream* path_log) {
  config.validate();
  if (n < 1) throw DomainError("sample_ensemble: n must be >= 1");
  if (timesteps.size() < 2) throw DomainError("sample_ensemble: need at least two timesteps");
  Ensemble out;
  out.samples.reserve(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    Rng rng(derive_seed(config.seed, static_cast<std::uint64_t>(i)));
    Path path;
    switch (config.method) {
      case SamplerMethod::TauLeap: path = tau_leap_sample(oracle, timesteps, rng, config.step_kernel); break;
      case SamplerMethod::GillespieExact: path = gillespie_exact(oracle, timesteps.front(), timesteps.back(), rng); break;
      case SamplerMethod::KGillespie:
        path = k_gillespie_sample(oracle, config.k, timesteps.front(), timesteps.back(), rng);
        break;
    }
    if (path_log != nullptr) write_path_line(*path_log, path);
    int filled = 0;
    out.samples.push_back(readout(oracle, path, &filled));
    out.events += static_cast<std::int64_t>(path.events.size());
    out.nfe += path.nfe;
    out.readout_tokens += filled;
  }
  return out;
}

nlohmann::json path_to_json(const Path& path) {
  nlohmann::json ev = nlohmann::json::array();
  for (const auto& e : path.events) ev.push_back({e.time, e.dim, e.from, e.to});
  return {{"init", path.initial}, {"events", ev}};
}

void write_path_line(std::ostream& os, const Path& path) { os << path_to_json(path).dump() << '\n'; }

}  // namespace jys
