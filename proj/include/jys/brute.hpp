#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include <nlohmann/json.hpp>

#include "jys/dist.hpp"
#include "jys/klub.hpp"
#include "jys/oracle.hpp"
#include "jys/samplers.hpp"

namespace jys {

/// Per-step kernel used when propagating a schedule exactly.
/// ExactMarginal takes the product of the exact per-token conditional marginals, which
/// is the parallel step whose error is exactly the compounding decoding error.
enum class BruteStep { Euler, ExactHold, ExactMarginal };

std::string to_string(BruteStep s);
BruteStep brute_step_from_string(const std::string& s);
BruteStep to_brute_step(StepKernel k);

struct IntegratorOptions {
  double tolerance = 1e-10;  // local error per step, max-norm
  int max_steps = 2'000'000;
};

/// Transition matrix of the exact reverse process from time `from` down to `to`:
/// row x is P_{to|from}(. | x). States outside the support of q_from stay put.
Matrix reverse_transition_matrix(const ReverseOracle& oracle, double from, double to,
                                 const IntegratorOptions& opts = {});

/// Row vectors `rows` (k x S^D) pushed through the reverse equation from `from` to `to`.
Matrix propagate_reverse(const ReverseOracle& oracle, const Matrix& rows, double from, double to,
                         const IntegratorOptions& opts = {});

/// q_{grid[0]} integrated down the grid; entry i is the law at grid[i].
std::vector<Pmf> exact_reverse_marginals(const ReverseOracle& oracle, std::span<const double> grid,
                                         const IntegratorOptions& opts = {});

/// Law of the parallel sampler at the last timestep, started from `start` at timesteps[0].
Pmf schedule_distribution(const ReverseOracle& oracle, std::span<const double> timesteps, BruteStep step,
                          const Pmf& start, const IntegratorOptions& opts = {});
/// Same, started from q at timesteps[0].
Pmf schedule_distribution(const ReverseOracle& oracle, std::span<const double> timesteps, BruteStep step,
                          const IntegratorOptions& opts = {});

struct CdeReport {
  double s = 0.0;
  double t = 0.0;
  std::vector<double> start_probs;      // P_s(x) for each flat x
  std::vector<double> conditional_cde;  // KL(joint || product of marginals) per x
  std::vector<double> conditional_mi;   // entropy-route mutual information per x
  double marginal_cde = 0.0;            // sum_x P_s(x) * CDE(x)
  double max_identity_gap = 0.0;        // max_x |CDE(x) - MI(x)|
};

CdeReport cde(const ReverseOracle& oracle, double s, double t, const IntegratorOptions& opts = {});

struct CdeBoundReport {
  double lhs = 0.0;  // KL(q at the last timestep || parallel-sampler law)
  double rhs = 0.0;  // sum of per-segment marginal CDEs
  std::vector<double> segment_cde;
  bool holds = false;
};

CdeBoundReport verify_cde_bound(const ReverseOracle& oracle, std::span<const double> timesteps, BruteStep step,
                               double slack = 1e-9, const IntegratorOptions& opts = {});

struct PathKlBoundReport {
  double endpoint_kl = 0.0;  // KL(P_t || Q_t), both started from q_s
  KlubEstimate path_kl;      // Girsanov path functional
  KlubEstimate event_only;   // bare log-ratio sum along the same paths
  bool holds = false;
};

/// Exact reverse process against τ-leaping (frozen rates) on `segment` (decreasing,
/// segment.front() = s, segment.back() = t), both started from q_s.
PathKlBoundReport verify_path_kl_bound(const ReverseOracle& oracle, std::span<const double> segment, int num_paths,
                               std::uint64_t seed, const IntegratorOptions& opts = {});

nlohmann::json to_json(const CdeReport& r);
nlohmann::json to_json(const CdeBoundReport& r);
nlohmann::json to_json(const PathKlBoundReport& r);

}  // namespace jys
