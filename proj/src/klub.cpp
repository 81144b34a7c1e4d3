#include "jys/klub.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <optional>

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "jys/error.hpp"
#include "jys/stats.hpp"

namespace jys {

std::string to_string(KlubVariant v) { return v == KlubVariant::QPath ? "q_path" : "p_forward"; }
std::string to_string(DeltaConvention d) { return d == DeltaConvention::FineLeg ? "fine_leg" : "coarse_leg"; }

KlubVariant klub_variant_from_string(const std::string& s) {
  if (s == "q_path" || s == "qpath" || s == "q") return KlubVariant::QPath;
  if (s == "p_forward" || s == "pforward" || s == "p") return KlubVariant::PForward;
  throw DomainError("unknown KLUB variant '" + s + "'");
}

DeltaConvention delta_convention_from_string(const std::string& s) {
  if (s == "fine_leg" || s == "t-u") return DeltaConvention::FineLeg;
  if (s == "coarse_leg" || s == "s-t") return DeltaConvention::CoarseLeg;
  throw DomainError("unknown delta convention '" + s + "'");
}

void KlubConfig::validate() const {
  if (num_samples < 1) throw DomainError("KlubConfig: num_samples must be >= 1");
  if (!(zero_rate_floor > 0.0)) throw DomainError("KlubConfig: zero_rate_floor must be positive");
}

namespace {

bool is_node(const std::vector<double>& nodes, double t) {
  return std::binary_search(nodes.begin(), nodes.end(), t, std::greater<>());
}

double compensator(const RateProcess& p1, const RateProcess& p2, const std::optional<ReverseRates>& c1,
                   const std::optional<ReverseRates>& c2, const State& x, const State& a1, const State& a2,
                   double lo, double hi) {
  if (!(hi > lo)) return 0.0;
  auto exit_at = [&](const RateProcess& p, const std::optional<ReverseRates>& cached, const State& anchor,
                     double u) { return cached ? exit_rate_from(*cached, x) : exit_rate_from(p.at(u, x, anchor), x); };
  if (c1 && c2) return (exit_rate_from(*c2, x) - exit_rate_from(*c1, x)) * (hi - lo);
  auto f = [&](double u) { return exit_at(p2, c2, a2, u) - exit_at(p1, c1, a1, u); };
  double err = 0.0;
  const double value = boost::math::quadrature::gauss_kronrod<double, 15>::integrate(f, lo, hi, 6, 1e-9, &err);
  if (!std::isfinite(value)) throw IntegrationError("path_kl_functional: compensator integral is not finite");
  return value;
}

}  // namespace

KlubEstimate path_kl_functional(std::span<const Path> paths, const RateProcess& process1,
                                const RateProcess& process2, PathKlForm form) {
  if (paths.empty()) throw DomainError("path_kl_functional: no paths");
  const auto bp1 = process1.breakpoints();
  const auto bp2 = process2.breakpoints();
  std::vector<double> values;
  values.reserve(paths.size());
  for (const Path& path : paths) {
    std::vector<double> nodes{path.start_time};
    for (double b : bp1) {
      if (b < path.start_time && b > path.end_time) nodes.push_back(b);
    }
    for (double b : bp2) {
      if (b < path.start_time && b > path.end_time) nodes.push_back(b);
    }
    nodes.push_back(path.end_time);
    std::sort(nodes.begin(), nodes.end(), std::greater<>());
    nodes.erase(std::unique(nodes.begin(), nodes.end()), nodes.end());

    State x = path.initial;
    State a1 = x, a2 = x;
    double total = 0.0;
    std::size_t next_event = 0;
    for (std::size_t piece = 0; piece + 1 < nodes.size(); ++piece) {
      const double hi = nodes[piece];
      const double lo = nodes[piece + 1];
      if (piece == 0 || is_node(bp1, hi)) a1 = x;
      if (piece == 0 || is_node(bp2, hi)) a2 = x;
      std::optional<ReverseRates> c1, c2;
      if (process1.piecewise_constant()) c1 = process1.at(hi, x, a1);
      if (process2.piecewise_constant()) c2 = process2.at(hi, x, a2);
      double cur = hi;
      while (next_event < path.events.size() && path.events[next_event].time > lo) {
        const Event& e = path.events[next_event];
        if (form == PathKlForm::Girsanov) total += compensator(process1, process2, c1, c2, x, a1, a2, e.time, cur);
        const double r1 = rate_from(c1 ? *c1 : process1.at(e.time, x, a1), x, e.dim, e.to);
        const double r2 = rate_from(c2 ? *c2 : process2.at(e.time, x, a2), x, e.dim, e.to);
        if (!(r1 > 0.0)) throw DomainError("path_kl_functional: path jumps where process 1 has zero rate");
        if (!(r2 > 0.0)) {
          throw SupportMismatchError("path_kl_functional: process 2 has zero rate at an observed jump (u = " +
                                     std::to_string(e.time) + ")");
        }
        total += std::log(r1 / r2);
        x[static_cast<std::size_t>(e.dim)] = e.to;
        cur = e.time;
        ++next_event;
      }
      if (form == PathKlForm::Girsanov) total += compensator(process1, process2, c1, c2, x, a1, a2, lo, cur);
    }
    values.push_back(total);
  }
  const auto ms = mean_and_stderr(values);
  KlubEstimate est;
  est.value = ms.mean;
  est.standard_error = ms.std_error;
  est.num_samples = static_cast<std::int64_t>(paths.size());
  est.s = paths.front().start_time;
  est.t = paths.front().end_time;
  est.u = paths.front().end_time;
  return est;
}

namespace {

// Sum over dims and targets of fine * ln(fine / coarse), with the coarse row chosen by
// the current value of each dim.
double log_ratio_mass(const ReverseRates& fine, const ReverseRates& coarse, const State& x, double floor,
                      bool& clamped) {
  double acc = 0.0;
  for (int d = 0; d < fine.num_dims; ++d) {
    for (int v = 0; v < fine.vocab_size; ++v) {
      const double rf = rate_from(fine, x, d, v);
      if (!(rf > 0.0)) continue;
      double rc = rate_from(coarse, x, d, v);
      if (!(rc > 0.0)) {
        rc = floor;
        clamped = true;
      }
      acc += rf * std::log(rf / rc);
    }
  }
  return acc;
}

}  // namespace

KlubEstimate klub_refinement(const ReverseOracle& oracle, double s, double t, double u, const KlubConfig& cfg,
                             std::uint64_t seed) {
  cfg.validate();
  if (!(s > t && t > u && u >= 0.0)) throw IntervalError("klub_refinement: requires s > t > u >= 0");
  if (s > oracle.kernel().horizon()) throw DomainError("klub_refinement: s exceeds the horizon");
  const double delta = cfg.delta_convention == DeltaConvention::FineLeg ? t - u : s - t;
  std::vector<double> values(static_cast<std::size_t>(cfg.num_samples));
  bool clamped = false;
  for (int i = 0; i < cfg.num_samples; ++i) {
    Rng rng(derive_seed(seed, static_cast<std::uint64_t>(i)));
    const State x0 = oracle.data().sample(rng);
    const State xs = oracle.forward_sample(x0, s, rng);
    const auto coarse = oracle.reverse_rates(xs, s);
    State xt;
    if (cfg.variant == KlubVariant::QPath) {
      xt = tau_leap_step(xs, coarse, s - t, rng, cfg.step_kernel);
    } else {
      xt = oracle.bridge_sample(x0, xs, t, s, rng);
    }
    const auto fine = oracle.reverse_rates(xt, t);
    values[static_cast<std::size_t>(i)] = delta * log_ratio_mass(fine, coarse, xt, cfg.zero_rate_floor, clamped);
  }
  const auto ms = mean_and_stderr(values);
  KlubEstimate est;
  est.value = ms.mean;
  est.standard_error = ms.std_error;
  est.num_samples = cfg.num_samples;
  est.variant = cfg.variant;
  est.s = s;
  est.t = t;
  est.u = u;
  est.clamped = clamped;
  return est;
}

KlubEstimate klub_refinement(const ReverseOracle& oracle, double s, double t, double u, const KlubConfig& cfg,
                             Rng& rng) {
  return klub_refinement(oracle, s, t, u, cfg, rng.next_u64());
}

KlubEstimate klub_schedule_total(const ReverseOracle& oracle, std::span<const double> timesteps,
                                 const KlubConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  if (timesteps.size() < 2) throw DomainError("klub_schedule_total: schedule needs at least two timesteps");
  for (std::size_t i = 1; i < timesteps.size(); ++i) {
    if (!(timesteps[i] < timesteps[i - 1])) throw DomainError("klub_schedule_total: timesteps must decrease");
  }
  const double top = timesteps.front();
  const double bottom = timesteps.back();
  const double span = top - bottom;
  std::vector<double> values(static_cast<std::size_t>(cfg.num_samples));
  bool clamped = false;
  for (int i = 0; i < cfg.num_samples; ++i) {
    Rng rng(derive_seed(seed, static_cast<std::uint64_t>(i)));
    // A uniform time in (bottom, top]; the enclosing step freezes rates at its upper node.
    const double w = top - span * rng.uniform();
    const auto it = std::upper_bound(timesteps.begin(), timesteps.end(), w, std::greater<>());
    const std::size_t step = std::min<std::size_t>(static_cast<std::size_t>(it - timesteps.begin()) - 1,
                                                   timesteps.size() - 2);
    const double node = timesteps[step];
    const State x0 = oracle.data().sample(rng);
    const State xn = oracle.forward_sample(x0, node, rng);
    const State xw = w < node ? oracle.bridge_sample(x0, xn, w, node, rng) : xn;
    if (!(w > 0.0)) continue;
    const auto coarse = oracle.reverse_rates(xn, node);
    const auto fine = oracle.reverse_rates(xw, w);
    values[static_cast<std::size_t>(i)] = span * log_ratio_mass(fine, coarse, xw, cfg.zero_rate_floor, clamped);
  }
  const auto ms = mean_and_stderr(values);
  KlubEstimate est;
  est.value = ms.mean;
  est.standard_error = ms.std_error;
  est.num_samples = cfg.num_samples;
  est.variant = KlubVariant::PForward;
  est.s = top;
  est.t = timesteps.size() > 2 ? timesteps[1] : bottom;
  est.u = bottom;
  est.clamped = clamped;
  return est;
}

nlohmann::json to_json(const KlubEstimate& e) {
  return {{"value", e.value},
          {"stderr", e.standard_error},
          {"n", e.num_samples},
          {"variant", to_string(e.variant)},
          {"clamped", e.clamped},
          {"segment", {e.s, e.t, e.u}}};
}

}  // namespace jys
