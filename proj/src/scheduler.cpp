#include "jys/scheduler.hpp"

#include <cmath>
#include <cstdio>
#include <sstream>

#include "jys/error.hpp"

namespace jys {

std::vector<double> Schedule::widths() const {
  std::vector<double> w;
  for (std::size_t i = 0; i + 1 < timesteps.size(); ++i) w.push_back(timesteps[i] - timesteps[i + 1]);
  return w;
}

void Schedule::validate() const {
  if (timesteps.size() < 2) throw DomainError("Schedule: needs at least two timesteps");
  for (std::size_t i = 1; i < timesteps.size(); ++i) {
    if (!(timesteps[i] < timesteps[i - 1])) throw DomainError("Schedule: timesteps must decrease strictly");
  }
  if (timesteps.back() < 0.0) throw DomainError("Schedule: negative final time");
  if (provenance.origin == ScheduleOrigin::Jys && nfe() != (1 << provenance.rounds)) {
    throw DomainError("Schedule: JYS schedule must have 2^K steps");
  }
}

std::string to_string(ScheduleOrigin o) {
  switch (o) {
    case ScheduleOrigin::Uniform: return "uniform";
    case ScheduleOrigin::Jys: return "jys";
    case ScheduleOrigin::File: return "file";
  }
  return "unknown";
}

GoldenSectionResult golden_section_maximize(const std::function<double(double)>& f, double lo, double hi,
                                            double tol, int max_iter) {
  if (!(lo < hi)) throw DomainError("golden_section_maximize: requires lo < hi");
  if (!(tol > 0.0) || max_iter < 0) throw DomainError("golden_section_maximize: bad tolerance or iteration cap");
  const double r = (std::sqrt(5.0) - 1.0) / 2.0;
  GoldenSectionResult out;
  auto eval = [&](double t) {
    const double v = f(t);
    if (!std::isfinite(v)) throw SearchError("golden_section_maximize: objective is not finite", t);
    out.probes.emplace_back(t, v);
    return v;
  };
  double a = lo, b = hi;
  double c = b - r * (b - a), d = a + r * (b - a);
  double fc = eval(c), fd = eval(d);
  while (b - a >= tol && out.iterations < max_iter) {
    if (fc > fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - r * (b - a);
      fc = eval(c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + r * (b - a);
      fd = eval(d);
    }
    ++out.iterations;
  }
  out.argmax = 0.5 * (a + b);
  out.value = eval(out.argmax);
  for (const auto& [t, v] : out.probes) {
    if (v > out.value) {
      out.argmax = t;
      out.value = v;
    }
  }
  return out;
}

double refine_segment(const ReverseOracle& oracle, double s, double u, const SearchConfig& search,
                      const KlubConfig& klub, std::uint64_t seed, SegmentTrace* trace) {
  if (!(s > u)) throw IntervalError("refine_segment: requires s > u");
  const double margin = (s - u) * search.margin;
  bool clamped = false;
  auto objective = [&](double t) {
    const auto est = klub_refinement(oracle, s, t, u, klub, seed);
    clamped = clamped || est.clamped;
    return est.value;
  };
  const auto res = golden_section_maximize(objective, u + margin, s - margin,
                                           oracle.kernel().horizon() * search.tol_fraction, search.max_iter);
  if (trace != nullptr) {
    trace->s = s;
    trace->u = u;
    trace->t_star = res.argmax;
    trace->value = res.value;
    trace->clamped = clamped;
    trace->probes = res.probes;
  }
  return res.argmax;
}

Schedule jump_your_steps(const ReverseOracle& oracle, int rounds, const SearchConfig& search, const KlubConfig& klub,
                         std::uint64_t seed, double t_min, std::vector<SegmentTrace>* trace) {
  if (rounds < 1) throw DomainError("jump_your_steps: K must be >= 1");
  const double horizon = oracle.kernel().horizon();
  if (!(t_min >= 0.0 && t_min < horizon)) throw DomainError("jump_your_steps: t_min must lie in [0, T)");
  std::vector<double> steps{horizon, t_min};
  for (int k = 1; k <= rounds; ++k) {
    const std::uint64_t round_seed = derive_seed(seed, static_cast<std::uint64_t>(k));
    std::vector<double> split;
    split.reserve(2 * steps.size() - 1);
    for (std::size_t i = 0; i + 1 < steps.size(); ++i) {
      SegmentTrace seg;
      seg.round = k;
      seg.index = static_cast<int>(i);
      const double t = refine_segment(oracle, steps[i], steps[i + 1], search, klub,
                                      derive_seed(round_seed, static_cast<std::uint64_t>(i)), trace ? &seg : nullptr);
      split.push_back(steps[i]);
      split.push_back(t);
      if (trace != nullptr) trace->push_back(std::move(seg));
    }
    split.push_back(steps.back());
    steps = std::move(split);
  }
  Schedule out;
  out.timesteps = std::move(steps);
  out.provenance = {ScheduleOrigin::Jys, rounds, seed, klub.variant, klub.num_samples};
  out.validate();
  return out;
}

Schedule uniform_schedule(double horizon, double t_min, int steps) {
  if (steps < 1) throw DomainError("uniform_schedule: N must be >= 1");
  if (!(horizon > t_min)) throw DomainError("uniform_schedule: horizon must exceed t_min");
  Schedule out;
  out.timesteps.resize(static_cast<std::size_t>(steps) + 1);
  const double width = (horizon - t_min) / steps;
  for (int i = 0; i <= steps; ++i) out.timesteps[static_cast<std::size_t>(i)] = horizon - width * i;
  out.timesteps.back() = t_min;
  out.provenance.origin = ScheduleOrigin::Uniform;
  return out;
}

namespace {

std::string fmt17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

std::string schedule_to_json(const Schedule& schedule, const FactorizedKernel& kernel, const nlohmann::json& meta) {
  nlohmann::json prov = {{"origin", to_string(schedule.provenance.origin)}};
  if (schedule.provenance.origin == ScheduleOrigin::Jys) {
    prov["K"] = schedule.provenance.rounds;
    prov["seed"] = schedule.provenance.seed;
    prov["variant"] = to_string(schedule.provenance.variant);
    prov["num_samples"] = schedule.provenance.num_samples;
  }
  std::ostringstream os;
  os << "{\n";
  os << "  \"horizon\": " << fmt17(schedule.horizon()) << ",\n";
  os << "  \"t_min\": " << fmt17(schedule.t_min()) << ",\n";
  os << "  \"nfe\": " << schedule.nfe() << ",\n";
  os << "  \"timesteps\": [";
  for (std::size_t i = 0; i < schedule.timesteps.size(); ++i) os << (i ? ", " : "") << fmt17(schedule.timesteps[i]);
  os << "],\n";
  os << "  \"provenance\": " << prov.dump() << ",\n";
  for (const auto& [key, value] : meta.items()) os << "  \"" << key << "\": " << value.dump() << ",\n";
  os << "  \"kernel\": " << kernel.to_json().dump() << "\n";
  os << "}\n";
  return os.str();
}

Schedule schedule_from_json(const nlohmann::json& j) {
  Schedule s;
  s.timesteps = j.at("timesteps").get<std::vector<double>>();
  s.provenance.origin = ScheduleOrigin::File;
  if (j.contains("provenance")) {
    const auto& p = j.at("provenance");
    const std::string origin = p.value("origin", "file");
    if (origin == "uniform") s.provenance.origin = ScheduleOrigin::Uniform;
    if (origin == "jys") {
      s.provenance.origin = ScheduleOrigin::Jys;
      s.provenance.rounds = p.value("K", 0);
      s.provenance.seed = p.value("seed", std::uint64_t{0});
      s.provenance.variant = klub_variant_from_string(p.value("variant", std::string("q_path")));
      s.provenance.num_samples = p.value("num_samples", 0);
    }
  }
  s.validate();
  return s;
}

}  // namespace jys
