#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "jys/klub.hpp"
#include "jys/oracle.hpp"

namespace jys {

enum class ScheduleOrigin { Uniform, Jys, File };

struct ScheduleProvenance {
  ScheduleOrigin origin = ScheduleOrigin::Uniform;
  int rounds = 0;  // K for JYS schedules
  std::uint64_t seed = 0;
  KlubVariant variant = KlubVariant::QPath;
  int num_samples = 0;
};

/// Strictly decreasing timesteps from the horizon down to t_min.
struct Schedule {
  std::vector<double> timesteps;
  ScheduleProvenance provenance;

  int nfe() const { return static_cast<int>(timesteps.size()) - 1; }
  double horizon() const { return timesteps.front(); }
  double t_min() const { return timesteps.back(); }
  std::vector<double> widths() const;
  void validate() const;
};

struct GoldenSectionResult {
  double argmax = 0.0;
  double value = 0.0;
  int iterations = 0;
  std::vector<std::pair<double, double>> probes;  // every (t, f(t)) evaluated, in order
};

/// Golden-section maximization on [lo, hi]. Stops once the bracket is narrower than
/// `tol` or after `max_iter` shrinks, then returns the bracket midpoint unless an
/// earlier probe scored strictly higher. Throws SearchError on a non-finite f.
GoldenSectionResult golden_section_maximize(const std::function<double(double)>& f, double lo, double hi,
                                            double tol, int max_iter);

struct SearchConfig {
  double tol_fraction = 1.0 / 2048.0;  // bracket tolerance as a fraction of the horizon
  int max_iter = 32;
  double margin = 1e-3;  // relative margin kept away from both segment ends
};

struct SegmentTrace {
  int round = 0;
  int index = 0;
  double s = 0.0;
  double u = 0.0;
  double t_star = 0.0;
  double value = 0.0;
  bool clamped = false;
  std::vector<std::pair<double, double>> probes;
};

/// Breakpoint in (u, s) maximizing the refinement KLUB, with a fixed seed for the whole
/// search so the objective is a deterministic function of t.
double refine_segment(const ReverseOracle& oracle, double s, double u, const SearchConfig& search,
                      const KlubConfig& klub, std::uint64_t seed, SegmentTrace* trace = nullptr);

/// Hierarchical breakdown: K rounds, each splitting every current segment once,
/// giving 2^K steps from the horizon down to t_min.
Schedule jump_your_steps(const ReverseOracle& oracle, int rounds, const SearchConfig& search, const KlubConfig& klub,
                         std::uint64_t seed, double t_min, std::vector<SegmentTrace>* trace = nullptr);

Schedule uniform_schedule(double horizon, double t_min, int steps);

/// Schedule file. Timesteps are written with 17 significant digits so they round-trip
/// exactly; `meta` keys (config hash, seed) are merged into the top-level object.
std::string schedule_to_json(const Schedule& schedule, const FactorizedKernel& kernel,
                             const nlohmann::json& meta = nlohmann::json::object());
Schedule schedule_from_json(const nlohmann::json& j);

std::string to_string(ScheduleOrigin o);

}  // namespace jys
