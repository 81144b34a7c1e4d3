#include "commands.hpp"

#include <chrono>
#include <cinttypes>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <ostream>
#include <sstream>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "jys/brute.hpp"
#include "jys/countdown.hpp"
#include "jys/error.hpp"
#include "jys/klub.hpp"
#include "jys/oracle.hpp"
#include "jys/samplers.hpp"
#include "jys/scheduler.hpp"
#include "jys/verify.hpp"

namespace jys::cli {

std::uint64_t fnv1a(const std::string& bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016" PRIx64, v);
  return buf;
}

namespace {

namespace fs = std::filesystem;

// Largest space the brute-force schedule law is computed for; its per-step scatter is
// quadratic in the number of states.
constexpr std::int64_t kBruteStates = 4096;

struct Options {
  std::string command;
  // forward process
  std::string kernel = "absorbing";
  double eps_min = 1e-3;
  double horizon = 1.0;
  double bandwidth = 1.0;
  int truncation = 3;
  // data
  std::vector<std::string> countdown;
  bool countdown_given = false;
  std::string data_file;
  double smoothing = 1e-9;
  // schedules
  int uniform = 0;
  int jys = 0;
  std::vector<std::string> schedule_files;
  // sampler
  std::string method = "tau_leap";
  std::string step_kernel = "euler";
  int k = 1;
  double t_min_fraction = 1e-4;
  // KLUB and search
  int num_samples = 2048;
  std::string variant = "q_path";
  std::string delta = "fine_leg";
  // runs
  int count = 1000;
  int ensemble = 1000;
  std::uint64_t seed = 0;
  std::string out_dir = ".";
  std::string output;
  std::string dump_paths;
  bool timing = false;
  // verify
  int instances = 20;
  int path_kl_paths = 100000;
  int count_paths = 100000;
  std::string inject_fault = "none";
};

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DomainError("cannot read '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

fs::path output_path(const Options& o, const std::string& fallback) {
  fs::create_directories(o.out_dir);
  return fs::path(o.out_dir) / (o.output.empty() ? fallback : o.output);
}

std::ofstream open_out(const fs::path& p) {
  std::ofstream os(p, std::ios::binary);
  if (!os) throw DomainError("cannot write '" + p.string() + "'");
  return os;
}

fs::path sibling(const fs::path& p, const std::string& suffix) {
  return p.parent_path() / (p.stem().string() + suffix);
}

std::string num(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.12g", v);
  return buf;
}

CountdownSpec countdown_spec(const Options& o) {
  CountdownSpec spec;
  for (const std::string& kv : o.countdown) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw DomainError("--countdown expects KEY=VALUE, got '" + kv + "'");
    const std::string key = kv.substr(0, eq);
    const int value = std::stoi(kv.substr(eq + 1));
    if (key == "D") {
      spec.seq_len = value;
    } else if (key == "V") {
      spec.value_count = value;
    } else {
      throw DomainError("--countdown: unknown key '" + key + "' (use D and V)");
    }
  }
  spec.with_mask = kernel_family_from_string(o.kernel) == KernelFamily::Absorbing;
  spec.validate();
  return spec;
}

struct Problem {
  ReverseOracle oracle;
  std::optional<CountdownSpec> countdown;
};

Problem build_problem(const Options& o) {
  const KernelFamily family = kernel_family_from_string(o.kernel);
  const NoiseSchedule schedule{o.eps_min, o.horizon};
  if (!o.data_file.empty()) {
    auto data = DataDistribution::from_json(nlohmann::json::parse(read_file(o.data_file)));
    const int vocab = data.vocab_size();
    return {ReverseOracle(std::move(data), FactorizedKernel(family, vocab, schedule, o.bandwidth, o.truncation)),
            std::nullopt};
  }
  const CountdownSpec spec = countdown_spec(o);
  // A tiny uniform admixture keeps reverse rates defined after a parallel step
  // produces a sequence the countdown rule forbids.
  auto data = exact_distribution(spec).smoothed(o.smoothing, spec.value_count);
  return {ReverseOracle(std::move(data), FactorizedKernel(family, spec.vocab_size(), schedule, o.bandwidth,
                                                          o.truncation)),
          spec};
}

nlohmann::json config_json(const Options& o) {
  nlohmann::json j = {{"command", o.command},
                      {"kernel", o.kernel},
                      {"eps_min", o.eps_min},
                      {"horizon", o.horizon},
                      {"bandwidth", o.bandwidth},
                      {"truncation", o.truncation},
                      {"smoothing", o.smoothing},
                      {"uniform", o.uniform},
                      {"jys", o.jys},
                      {"method", o.method},
                      {"step_kernel", o.step_kernel},
                      {"k", o.k},
                      {"t_min_fraction", o.t_min_fraction},
                      {"num_samples", o.num_samples},
                      {"variant", o.variant},
                      {"delta", o.delta},
                      {"count", o.count},
                      {"ensemble", o.ensemble},
                      {"instances", o.instances},
                      {"path_kl_paths", o.path_kl_paths},
                      {"count_paths", o.count_paths},
                      {"inject_fault", o.inject_fault}};
  if (!o.data_file.empty()) {
    j["data"] = hex64(fnv1a(read_file(o.data_file)));
  } else {
    j["countdown"] = o.countdown;
  }
  nlohmann::json files = nlohmann::json::array();
  for (const auto& f : o.schedule_files) files.push_back(hex64(fnv1a(read_file(f))));
  j["schedules"] = files;
  return j;
}

std::string config_hash(const Options& o) { return hex64(fnv1a(config_json(o).dump())); }

std::string header(const Options& o) {
  return "# jys " + o.command + " config_hash=" + config_hash(o) + " seed=" + std::to_string(o.seed) + "\n";
}

KlubConfig klub_config(const Options& o) {
  KlubConfig c;
  c.num_samples = o.num_samples;
  c.variant = klub_variant_from_string(o.variant);
  c.delta_convention = delta_convention_from_string(o.delta);
  c.step_kernel = step_kernel_from_string(o.step_kernel);
  c.validate();
  return c;
}

SamplerConfig sampler_config(const Options& o) {
  SamplerConfig c;
  c.method = sampler_method_from_string(o.method);
  c.step_kernel = step_kernel_from_string(o.step_kernel);
  c.k = o.k;
  c.seed = o.seed;
  c.t_min_fraction = o.t_min_fraction;
  c.validate();
  return c;
}

struct NamedSchedule {
  std::string name;
  Schedule schedule;
};

NamedSchedule optimized(const Options& o, const ReverseOracle& oracle, int rounds,
                        std::vector<SegmentTrace>* trace = nullptr) {
  const double t_min = o.t_min_fraction * oracle.kernel().horizon();
  return {"jys_K" + std::to_string(rounds),
          jump_your_steps(oracle, rounds, SearchConfig{}, klub_config(o), o.seed, t_min, trace)};
}

NamedSchedule uniform(const Options& o, const ReverseOracle& oracle, int steps) {
  const double horizon = oracle.kernel().horizon();
  return {"uniform_N" + std::to_string(steps), uniform_schedule(horizon, o.t_min_fraction * horizon, steps)};
}

std::vector<NamedSchedule> load_schedules(const Options& o) {
  std::vector<NamedSchedule> out;
  for (const auto& f : o.schedule_files) {
    out.push_back({fs::path(f).stem().string(), schedule_from_json(nlohmann::json::parse(read_file(f)))});
  }
  return out;
}

void check_horizon(const Schedule& s, const ReverseOracle& oracle) {
  if (s.horizon() > oracle.kernel().horizon()) throw DomainError("schedule starts beyond the kernel horizon");
  if (!(s.t_min() > 0.0)) throw DomainError("schedule must end at a positive time");
}

// ---------------------------------------------------------------------------

int cmd_gen_data(const Options& o, std::ostream& out) {
  const CountdownSpec spec = countdown_spec(o);
  const auto seqs = generate(spec, o.count, o.seed);
  const fs::path path = output_path(o, "countdown.txt");
  {
    auto os = open_out(path);
    os << header(o);
    write_sequences(os, seqs);
  }
  {
    auto os = open_out(fs::path(path.string() + ".json"));
    os << nlohmann::json{{"countdown", spec.to_json()},
                         {"n", o.count},
                         {"seed", o.seed},
                         {"config_hash", config_hash(o)}}
              .dump(2)
       << "\n";
  }
  out << "wrote " << seqs.size() << " sequences to " << path.string() << "\n";
  return kOk;
}

int cmd_optimize(const Options& o, std::ostream& out) {
  const Problem p = build_problem(o);
  std::vector<SegmentTrace> trace;
  const auto t0 = std::chrono::steady_clock::now();
  const NamedSchedule s = optimized(o, p.oracle, o.jys > 0 ? o.jys : 2, &trace);
  const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

  const fs::path path = output_path(o, "schedule.json");
  {
    auto os = open_out(path);
    os << schedule_to_json(s.schedule, p.oracle.kernel(), {{"config_hash", config_hash(o)}, {"seed", o.seed}});
  }
  const fs::path trace_path = sibling(path, "_trace.csv");
  {
    auto os = open_out(trace_path);
    os << header(o) << "round,segment,s,u,probe,t,klub\n";
    for (const auto& seg : trace) {
      for (std::size_t i = 0; i < seg.probes.size(); ++i) {
        os << seg.round << ',' << seg.index << ',' << num(seg.s) << ',' << num(seg.u) << ',' << i << ','
           << num(seg.probes[i].first) << ',' << num(seg.probes[i].second) << '\n';
      }
    }
  }

  const auto widths = s.schedule.widths();
  std::size_t widest = 0;
  out << "timesteps:";
  for (double t : s.schedule.timesteps) out << ' ' << num(t);
  out << "\ninterval widths:";
  for (std::size_t i = 0; i < widths.size(); ++i) {
    out << ' ' << num(widths[i]);
    if (widths[i] > widths[widest]) widest = i;
  }
  const double mid = 0.5 * (s.schedule.timesteps[widest] + s.schedule.timesteps[widest + 1]);
  const double half = 0.5 * (s.schedule.horizon() + s.schedule.t_min());
  out << "\nlargest interval lies in the " << (mid > half ? "upper (noisy)" : "lower (clean)") << " half\n";
  for (const auto& seg : trace) {
    if (seg.clamped) out << "note: round " << seg.round << " segment " << seg.index << " floored a zero coarse rate\n";
  }
  if (o.timing) out << "optimize wall time: " << num(seconds) << " s\n";
  out << "wrote " << path.string() << " and " << trace_path.string() << "\n";
  return kOk;
}

int cmd_sample(const Options& o, std::ostream& out) {
  const Problem p = build_problem(o);
  auto files = load_schedules(o);
  const NamedSchedule s = !files.empty() ? files.front()
                          : o.jys > 0    ? optimized(o, p.oracle, o.jys)
                                         : uniform(o, p.oracle, o.uniform > 0 ? o.uniform : 4);
  check_horizon(s.schedule, p.oracle);
  const SamplerConfig cfg = sampler_config(o);

  const auto t0 = std::chrono::steady_clock::now();
  std::ofstream paths;
  if (!o.dump_paths.empty()) {
    fs::create_directories(o.out_dir);
    paths = open_out(fs::path(o.out_dir) / o.dump_paths);
  }
  const Ensemble ens =
      sample_ensemble(p.oracle, s.schedule.timesteps, cfg, o.ensemble, o.dump_paths.empty() ? nullptr : &paths);
  const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

  const fs::path path = output_path(o, "samples.txt");
  {
    auto os = open_out(path);
    os << header(o);
    write_sequences(os, ens.samples);
  }
  const fs::path metrics_path = sibling(path, "_metrics.csv");
  {
    auto os = open_out(metrics_path);
    os << header(o) << "schedule,method,step_kernel,nfe,mean_nfe,n,mean_events,readout_tokens";
    if (p.countdown) os << ",violation_rate,violation_rate_sequence";
    if (o.timing) os << ",wall_time_s";
    os << '\n';
    os << s.name << ',' << o.method << ',' << o.step_kernel << ',' << s.schedule.nfe() << ','
       << num(static_cast<double>(ens.nfe) / o.ensemble) << ',' << o.ensemble << ','
       << num(static_cast<double>(ens.events) / o.ensemble) << ',' << ens.readout_tokens;
    if (p.countdown) {
      const auto v = violation_stats(ens.samples, p.countdown->value_count);
      os << ',' << num(v.per_pair) << ',' << num(v.per_sequence);
      out << "violation rate (per pair): " << num(v.per_pair) << "\n";
    }
    if (o.timing) os << ',' << num(seconds);
    os << '\n';
  }
  out << "wrote " << ens.samples.size() << " samples to " << path.string() << " and " << metrics_path.string() << "\n";
  return kOk;
}

double marginal_tv(const ReverseOracle& oracle, const std::vector<State>& samples) {
  const auto exact = oracle.data().position_marginals();
  const int s = oracle.vocab_size();
  double total = 0.0;
  for (std::size_t d = 0; d < exact.size(); ++d) {
    std::vector<double> emp(static_cast<std::size_t>(s), 0.0);
    for (const State& x : samples) emp[static_cast<std::size_t>(x[d])] += 1.0 / static_cast<double>(samples.size());
    total += total_variation(emp, exact[d]);
  }
  return total / static_cast<double>(exact.size());
}

int cmd_evaluate(const Options& o, std::ostream& out) {
  const Problem p = build_problem(o);
  auto schedules = load_schedules(o);
  if (o.jys > 0) schedules.push_back(optimized(o, p.oracle, o.jys));
  if (o.uniform > 0) schedules.push_back(uniform(o, p.oracle, o.uniform));
  if (schedules.empty()) {
    schedules.push_back(optimized(o, p.oracle, 2));
    schedules.push_back(uniform(o, p.oracle, 4));
  }
  for (const auto& s : schedules) check_horizon(s.schedule, p.oracle);
  const bool brute = p.oracle.space().enumerable() && p.oracle.space().total_states() <= kBruteStates;
  const SamplerConfig cfg = sampler_config(o);

  const fs::path path = output_path(o, "evaluate.csv");
  auto os = open_out(path);
  os << header(o) << "schedule,nfe";
  if (brute) os << ",kl";
  os << ",marginal_tv";
  if (p.countdown) os << ",violation_rate,violation_rate_sequence";
  os << '\n';
  for (const auto& s : schedules) {
    os << s.name << ',' << s.schedule.nfe();
    out << s.name << " (NFE " << s.schedule.nfe() << "):";
    if (brute) {
      const auto& ts = s.schedule.timesteps;
      const Pmf q = schedule_distribution(p.oracle, ts, to_brute_step(cfg.step_kernel), p.oracle.marginal(ts.front()));
      const double kl = kl_divergence(p.oracle.marginal(ts.back()), q);
      os << ',' << num(kl);
      out << " KL " << num(kl);
    }
    const Ensemble ens = sample_ensemble(p.oracle, s.schedule.timesteps, cfg, o.ensemble);
    const double tv = marginal_tv(p.oracle, ens.samples);
    os << ',' << num(tv);
    out << " marginal TV " << num(tv);
    if (p.countdown) {
      const auto v = violation_stats(ens.samples, p.countdown->value_count);
      os << ',' << num(v.per_pair) << ',' << num(v.per_sequence);
      out << " violation rate " << num(v.per_pair);
    }
    os << '\n';
    out << '\n';
  }
  out << "wrote " << path.string() << "\n";
  return kOk;
}

int cmd_verify(const Options& o, std::ostream& out) {
  VerifyOptions v;
  v.seed = o.seed;
  v.instances = o.instances;
  v.path_kl_paths = o.path_kl_paths;
  v.count_paths = o.count_paths;
  if (o.inject_fault == "rate_sign") {
    v.fault = Fault::RateSign;
  } else if (o.inject_fault != "none") {
    throw DomainError("--inject-fault must be none or rate_sign");
  }
  const VerifyReport rep = run_verify_suite(v);
  for (const auto& c : rep.checks) {
    const char* status = !c.asserted ? "info" : c.passed ? "pass" : "FAIL";
    char line[160];
    std::snprintf(line, sizeof line, "%-30s %-4s value=%-12.4g threshold=%.3g\n", c.name.c_str(), status, c.value,
                  c.threshold);
    out << line;
  }
  nlohmann::json j = rep.to_json();
  j["config_hash"] = config_hash(o);
  j["seed"] = o.seed;
  const fs::path path = output_path(o, "verify.json");
  auto os = open_out(path);
  os << j.dump(2) << "\n";
  out << (rep.passed() ? "all checks passed" : "verification FAILED") << "; report in " << path.string() << "\n";
  return rep.passed() ? kOk : kVerifyFailed;
}

void add_options(CLI::App& app, Options& o) {
  app.set_config("--config", "", "TOML/INI file; keys are the long option names");
  app.add_option("--kernel", o.kernel, "uniform | absorbing | gaussian")->capture_default_str();
  app.add_option("--eps-min", o.eps_min, "noise schedule eps_min")->capture_default_str();
  app.add_option("--horizon", o.horizon, "time horizon T")->capture_default_str();
  app.add_option("--bandwidth", o.bandwidth, "Gaussian kernel bandwidth")->capture_default_str();
  app.add_option("--truncation", o.truncation, "Gaussian kernel truncation")->capture_default_str();
  app.add_option("--countdown", o.countdown, "countdown data, e.g. D=16 V=8 (the default source)")
      ->expected(0, 2);
  app.add_option("--data", o.data_file, "data distribution JSON instead of countdown")->check(CLI::ExistingFile);
  app.add_option("--smoothing", o.smoothing, "uniform admixture added to countdown data")->capture_default_str();
  app.add_option("--uniform", o.uniform, "uniform schedule with N steps");
  app.add_option("--jys", o.jys, "optimized schedule with K rounds (2^K steps)");
  app.add_option("--schedule", o.schedule_files, "schedule JSON file (repeatable)")->check(CLI::ExistingFile);
  app.add_option("--method", o.method, "tau_leap | gillespie | k_gillespie")->capture_default_str();
  app.add_option("--step-kernel", o.step_kernel, "euler | exact_hold")->capture_default_str();
  app.add_option("--k", o.k, "tokens per k-Gillespie update")->capture_default_str();
  app.add_option("--t-min-fraction", o.t_min_fraction, "final time as a fraction of T")->capture_default_str();
  app.add_option("--num-samples", o.num_samples, "Monte-Carlo samples per KLUB estimate")->capture_default_str();
  app.add_option("--variant", o.variant, "q_path | p_forward")->capture_default_str();
  app.add_option("--delta", o.delta, "fine_leg | coarse_leg")->capture_default_str();
  app.add_option("-n,--count", o.count, "sequences to generate")->capture_default_str();
  app.add_option("--ensemble", o.ensemble, "samples per schedule")->capture_default_str();
  app.add_option("--seed", o.seed, "random seed")->envname("JYS_SEED")->capture_default_str();
  app.add_option("--out-dir", o.out_dir, "output directory")->capture_default_str();
  app.add_option("-o,--output", o.output, "output file name inside --out-dir");
  app.add_option("--dump-paths", o.dump_paths, "sample: also write every path as a JSON line");
  app.add_flag("--timing", o.timing, "report wall time (outputs are then no longer reproducible)");
  app.add_option("--instances", o.instances, "verify: random instances per check")->capture_default_str();
  app.add_option("--path-kl-paths", o.path_kl_paths, "verify: paths per path-space bound")->capture_default_str();
  app.add_option("--count-paths", o.count_paths, "verify: paths for the transition-count law")->capture_default_str();
  app.add_option("--inject-fault", o.inject_fault, "verify negative control: none | rate_sign")->capture_default_str();
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Sampling-schedule optimization for discrete diffusion with exact reverse-rate oracles", "jys"};
  Options o;
  add_options(app, o);
  app.fallthrough();
  app.require_subcommand(1);
  const std::pair<const char*, const char*> commands[] = {
      {"gen-data", "generate a countdown dataset"},
      {"optimize", "optimize a schedule and write it with a per-segment search trace"},
      {"sample", "draw an ensemble of samples under a schedule"},
      {"evaluate", "compare schedules by exact KL or ensemble metrics"},
      {"verify", "run the property suite"}};
  for (const auto& [name, help] : commands) app.add_subcommand(name, help)->fallthrough();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    std::ostringstream o_msg, e_msg;
    const int code = app.exit(e, o_msg, e_msg);
    out << o_msg.str();
    err << e_msg.str();
    return code == 0 ? kOk : kUsage;
  }
  o.command = app.get_subcommands().front()->get_name();
  try {
    if (o.command == "gen-data") return cmd_gen_data(o, out);
    if (o.command == "optimize") return cmd_optimize(o, out);
    if (o.command == "sample") return cmd_sample(o, out);
    if (o.command == "evaluate") return cmd_evaluate(o, out);
    return cmd_verify(o, out);
  } catch (const NumericalError& e) {
    err << "numerical error: " << e.what() << "\n";
    return kNumerical;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kUsage;
  }
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  std::vector<const char*> argv{"jys"};
  for (const auto& a : args) argv.push_back(a.c_str());
  return run(static_cast<int>(argv.size()), argv.data(), out, err);
}

}  // namespace jys::cli
