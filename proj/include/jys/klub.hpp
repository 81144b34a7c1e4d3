#pragma once

#include <cstdint>
#include <span>
#include <string>

#include <nlohmann/json.hpp>

#include "jys/oracle.hpp"
#include "jys/samplers.hpp"

namespace jys {

/// Where X_t comes from in the refinement estimator.
/// QPath: one coarse τ-leap step from X_s. PForward: the forward process, X_t | (X_0, X_s).
enum class KlubVariant { QPath, PForward };

/// Length of the leg multiplying the fine rates: t - u (FineLeg) or s - t (CoarseLeg).
enum class DeltaConvention { FineLeg, CoarseLeg };

/// EventOnly is the bare sum of log rate ratios over jumps. Girsanov adds the
/// compensator integral of (exit2 - exit1), giving the exact path-space KL.
enum class PathKlForm { EventOnly, Girsanov };

std::string to_string(KlubVariant v);
std::string to_string(DeltaConvention d);
KlubVariant klub_variant_from_string(const std::string& s);
DeltaConvention delta_convention_from_string(const std::string& s);

struct KlubEstimate {
  double value = 0.0;
  double standard_error = 0.0;
  std::int64_t num_samples = 0;
  KlubVariant variant = KlubVariant::QPath;
  double s = 0.0;
  double t = 0.0;
  double u = 0.0;
  bool clamped = false;  // some coarse rate was zero and got floored
};

struct KlubConfig {
  int num_samples = 2048;
  KlubVariant variant = KlubVariant::QPath;
  DeltaConvention delta_convention = DeltaConvention::FineLeg;
  StepKernel step_kernel = StepKernel::Euler;  // for the QPath coarse step
  double zero_rate_floor = 1e-12;

  void validate() const;
};

/// Monte-Carlo path functional over `paths` drawn from process 1.
/// Throws SupportMismatchError when process 2 has zero rate at an observed jump.
KlubEstimate path_kl_functional(std::span<const Path> paths, const RateProcess& process1,
                                const RateProcess& process2, PathKlForm form = PathKlForm::EventOnly);

/// KLUB(Q^{s->t->u} || Q^{s->u}) by the closed-form transition-count estimator.
/// Sample i uses the stream derive_seed(seed, i) and draws X_0 and X_s before anything
/// that depends on t, so estimates at different t share random numbers.
KlubEstimate klub_refinement(const ReverseOracle& oracle, double s, double t, double u, const KlubConfig& cfg,
                             std::uint64_t seed);
KlubEstimate klub_refinement(const ReverseOracle& oracle, double s, double t, double u, const KlubConfig& cfg,
                             Rng& rng);

/// KLUB of the exact reverse process against τ-leaping on `timesteps`: the expected
/// event-only log ratio, written as a time integral over the schedule and estimated
/// with a uniformly drawn time per sample.
KlubEstimate klub_schedule_total(const ReverseOracle& oracle, std::span<const double> timesteps,
                                 const KlubConfig& cfg, std::uint64_t seed);

nlohmann::json to_json(const KlubEstimate& e);

}  // namespace jys
