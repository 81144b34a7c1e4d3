#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "jys/brute.hpp"
#include "jys/oracle.hpp"

namespace jys {

/// Small random problem: an explicit data law with Dirichlet(1) weights over the data
/// tokens (all but the mask for Absorbing) and the default noise schedule.
ReverseOracle random_oracle(KernelFamily family, int num_dims, int vocab_size, Rng& rng);

/// Strictly decreasing times from T down to t_min with N steps and random interior nodes.
std::vector<double> random_schedule(double horizon, double t_min, int steps, Rng& rng);

struct CheckResult {
  std::string name;
  bool passed = false;
  bool asserted = true;  // informational rows never fail the suite
  double value = 0.0;    // worst observed statistic
  double threshold = 0.0;
  nlohmann::json detail = nlohmann::json::object();
};

enum class Fault { None, RateSign };

struct VerifyOptions {
  std::uint64_t seed = 20240611;
  int instances = 20;
  int path_kl_paths = 100000;
  int count_paths = 100000;
  Fault fault = Fault::None;  // negative control: flips the sign of the path log-ratio
};

struct VerifyReport {
  std::vector<CheckResult> checks;
  bool passed() const;
  nlohmann::json to_json() const;
};

CheckResult check_forward_marginal_identity(const VerifyOptions& opts);
CheckResult check_cde_bound(const VerifyOptions& opts, BruteStep step);
CheckResult check_path_kl_bound(const VerifyOptions& opts);
CheckResult check_parametrization(const VerifyOptions& opts);
CheckResult check_chapman_kolmogorov(const VerifyOptions& opts);
CheckResult check_cde_identity(const VerifyOptions& opts);
CheckResult check_transition_counts(const VerifyOptions& opts);
CheckResult check_absorbing_single_jump(const VerifyOptions& opts);

VerifyReport run_verify_suite(const VerifyOptions& opts);

/// Reverse rate of the jump x -> (x with dim d set to v), computed through the
/// denoising posterior over the full space instead of the score ratio.
double denoising_form_rate(const ReverseOracle& oracle, const State& x, int d, int v, double t);

}  // namespace jys
