#pragma once

#include <cstdint>
#include <iosfwd>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "jys/oracle.hpp"
#include "jys/rng.hpp"

namespace jys {

/// One token change at reverse time `time`.
struct Event {
  double time = 0.0;
  int dim = 0;
  int from = 0;
  int to = 0;

  bool operator==(const Event&) const = default;
};

/// A reverse trajectory from start_time down to end_time.
struct Path {
  double start_time = 0.0;
  double end_time = 0.0;
  State initial;
  std::vector<Event> events;  // times non-increasing; parallel steps share a stamp
  int nfe = 0;                // rate evaluations spent producing the path
  int bound_doublings = 0;    // thinning bounds that had to be raised (Gillespie only)

  State final_state() const;
  /// State just after replaying every event with time >= t.
  State state_at(double t) const;
  /// Replays the events; throws DomainError if any `from` disagrees with the running state,
  /// an event time falls outside (end, start], or times increase.
  void validate() const;

  bool operator==(const Path& o) const {
    return start_time == o.start_time && end_time == o.end_time && initial == o.initial && events == o.events;
  }
};

enum class SamplerMethod { GillespieExact, TauLeap, KGillespie };
enum class StepKernel { Euler, ExactHold };

std::string to_string(SamplerMethod m);
std::string to_string(StepKernel k);
SamplerMethod sampler_method_from_string(const std::string& s);
StepKernel step_kernel_from_string(const std::string& s);

struct SamplerConfig {
  SamplerMethod method = SamplerMethod::TauLeap;
  StepKernel step_kernel = StepKernel::Euler;
  int k = 1;
  std::uint64_t seed = 0;
  double t_min_fraction = 1e-4;  // t_min = t_min_fraction * T

  void validate() const;
};

/// Jump rates in force along a path. `anchor` is the path state at the most recent
/// breakpoint at or above u; processes without breakpoints ignore it.
class RateProcess {
 public:
  virtual ~RateProcess() = default;
  virtual int num_dims() const = 0;
  virtual int vocab_size() const = 0;
  virtual ReverseRates at(double u, const State& x, const State& anchor) const = 0;
  /// Decreasing times where the process re-anchors; empty for exact processes.
  virtual std::vector<double> breakpoints() const { return {}; }
  /// True when rates are constant in time between breakpoints.
  virtual bool piecewise_constant() const { return false; }
};

/// The model's own time-inhomogeneous rates, evaluated at the current state.
class ExactProcess : public RateProcess {
 public:
  explicit ExactProcess(const RateModel& model) : model_(&model) {}
  int num_dims() const override { return model_->num_dims(); }
  int vocab_size() const override { return model_->vocab_size(); }
  ReverseRates at(double u, const State& x, const State& anchor) const override;

 private:
  const RateModel* model_;
};

/// The τ-leap process: on each step (t_i, t_{i+1}] the per-dim generators are frozen
/// at (anchor = X_{t_i}, t_i). Each dimension then runs a homogeneous chain.
class FrozenProcess : public RateProcess {
 public:
  FrozenProcess(const RateModel& model, std::vector<double> timesteps);
  int num_dims() const override { return model_->num_dims(); }
  int vocab_size() const override { return model_->vocab_size(); }
  ReverseRates at(double u, const State& x, const State& anchor) const override;
  std::vector<double> breakpoints() const override { return timesteps_; }
  bool piecewise_constant() const override { return true; }

  /// Index i of the step with t_i >= u > t_{i+1}.
  std::size_t step_of(double u) const;

 private:
  const RateModel* model_;
  std::vector<double> timesteps_;
};

/// Rate of dim d moving from x[d] to v under `rates` (rows chosen by the current value).
inline double rate_from(const ReverseRates& rates, const State& x, int d, int v) {
  return v == x[static_cast<std::size_t>(d)] ? 0.0 : rates.frozen_rate(d, x[static_cast<std::size_t>(d)], v);
}
/// Total exit rate out of x under `rates`.
double exit_rate_from(const ReverseRates& rates, const State& x);

/// Per-dim one-step law for a frozen generator: S probabilities for the value of dim d
/// after `delta`, starting from `from`.
std::vector<double> step_row(const ReverseRates& rates, int dim, int from, double delta, StepKernel kernel);

/// One τ-leap step with caller-supplied uniforms (exactly one per dim).
State tau_leap_step(const State& x, const ReverseRates& rates, double delta, std::span<const double> uniforms,
                    StepKernel kernel);
State tau_leap_step(const State& x, const ReverseRates& rates, double delta, Rng& rng, StepKernel kernel);

/// τ-leaping along `timesteps` (strictly decreasing). Events are stamped at the midpoint
/// of the step that produced them.
Path tau_leap_sample(const RateModel& model, std::span<const double> timesteps, const State& initial, Rng& rng,
                     StepKernel kernel);
Path tau_leap_sample(const ReverseOracle& oracle, std::span<const double> timesteps, Rng& rng, StepKernel kernel);

/// Event-driven simulation of any RateProcess on (end, start]. Piecewise-constant processes
/// draw exponential holding times directly. Time-varying ones use thinning in short windows
/// with bound 2 * max(exit rate at the window's ends and middle), doubled on violation;
/// BoundViolationError after 64 doublings.
Path simulate_process(const RateProcess& process, const State& initial, double start, double end, Rng& rng);

Path gillespie_exact(const RateModel& model, const State& initial, double start, double end, Rng& rng);
Path gillespie_exact(const ReverseOracle& oracle, double start, double end, Rng& rng);

/// k-Gillespie for absorbing kernels: per rate evaluation, commit the next k unmasking
/// events under the frozen rates.
Path k_gillespie_sample(const ReverseOracle& oracle, int k, double start, double end, Rng& rng);

/// Final state of an absorbing-kernel path with any token still masked at the last
/// time replaced by its most likely clean value; other families pass through.
State readout(const ReverseOracle& oracle, const Path& path, int* filled = nullptr);

struct Ensemble {
  std::vector<State> samples;
  std::int64_t events = 0;
  std::int64_t nfe = 0;
  std::int64_t readout_tokens = 0;  // masked tokens filled by the final readout
};

/// n independent samples; sample i uses derive_seed(config.seed, i). τ-leaping follows
/// `timesteps`; the event-driven methods run from its first to its last time.
/// `path_log`, when given, receives every path as a JSON line.
Ensemble sample_ensemble(const ReverseOracle& oracle, std::span<const double> timesteps, const SamplerConfig& config,
                         int n, std::ostream* path_log = nullptr);

/// `{"init": [...], "events": [[u, d, from, to], ...]}` on one line.
nlohmann::json path_to_json(const Path& path);
void write_path_line(std::ostream& os, const Path& path);

}  // namespace jys
