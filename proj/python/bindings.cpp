#include <pybind11/eigen.h>
#include <pybind11/functional.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "jys/brute.hpp"
#include "jys/countdown.hpp"
#include "jys/dist.hpp"
#include "jys/error.hpp"
#include "jys/kernels.hpp"
#include "jys/klub.hpp"
#include "jys/oracle.hpp"
#include "jys/samplers.hpp"
#include "jys/scheduler.hpp"
#include "jys/verify.hpp"

namespace py = pybind11;
using namespace jys;

namespace {

ReverseOracle make_explicit_oracle(const std::string& family, int dims, int vocab, std::vector<double> probs,
                                   double eps_min, double horizon) {
  FactorizedKernel kernel(kernel_family_from_string(family), vocab, NoiseSchedule{eps_min, horizon});
  return {DataDistribution::from_explicit(Pmf(StateSpace(dims, vocab), std::move(probs))), std::move(kernel)};
}

ReverseOracle make_countdown_oracle(int seq_len, int value_count, double smoothing, double eps_min) {
  CountdownSpec spec{seq_len, value_count, true};
  spec.validate();
  FactorizedKernel kernel(KernelFamily::Absorbing, spec.vocab_size(), NoiseSchedule{eps_min, 1.0});
  auto data = exact_distribution(spec);
  if (smoothing > 0.0) data = data.smoothed(smoothing, value_count);
  return {std::move(data), std::move(kernel)};
}

py::dict estimate_dict(const KlubEstimate& e) {
  py::dict d;
  d["value"] = e.value;
  d["standard_error"] = e.standard_error;
  d["num_samples"] = e.num_samples;
  d["clamped"] = e.clamped;
  return d;
}

KlubConfig klub_config(int num_samples, const std::string& variant) {
  KlubConfig cfg;
  cfg.num_samples = num_samples;
  cfg.variant = klub_variant_from_string(variant);
  cfg.validate();
  return cfg;
}

}  // namespace

PYBIND11_MODULE(_jys, m) {
  m.doc() = "Sampling-schedule optimization for discrete diffusion on small exact problems";

  auto base = py::register_exception<Error>(m, "JysError", PyExc_RuntimeError);
  py::register_exception<DomainError>(m, "DomainError", base.ptr());
  py::register_exception<NumericalError>(m, "NumericalError", base.ptr());

  m.def("derive_seed", &derive_seed, py::arg("seed"), py::arg("index"));
  m.def("sigma", [](double t, double eps_min, double horizon) { return sigma(NoiseSchedule{eps_min, horizon}, t); },
        py::arg("t"), py::arg("eps_min") = 1e-3, py::arg("horizon") = 1.0);
  m.def("beta", [](double t, double eps_min, double horizon) { return beta(NoiseSchedule{eps_min, horizon}, t); },
        py::arg("t"), py::arg("eps_min") = 1e-3, py::arg("horizon") = 1.0);
  m.def("kl_divergence",
        [](const std::vector<double>& p, const std::vector<double>& q) { return kl_divergence(p, q); });
  m.def("transition_kernel",
        [](const std::string& family, int vocab, double s, double t) {
          return FactorizedKernel(kernel_family_from_string(family), vocab).transition_kernel(s, t);
        },
        py::arg("family"), py::arg("vocab"), py::arg("s"), py::arg("t"));

  py::class_<ReverseOracle>(m, "Oracle")
      .def_static("explicit", &make_explicit_oracle, py::arg("family"), py::arg("dims"), py::arg("vocab"),
                  py::arg("probs"), py::arg("eps_min") = 1e-3, py::arg("horizon") = 1.0)
      .def_static("countdown", &make_countdown_oracle, py::arg("seq_len") = 16, py::arg("value_count") = 8,
                  py::arg("smoothing") = 1e-9, py::arg("eps_min") = 1e-3)
      .def_property_readonly("dims", &ReverseOracle::num_dims)
      .def_property_readonly("vocab", &ReverseOracle::vocab_size)
      .def_property_readonly("horizon", [](const ReverseOracle& o) { return o.kernel().horizon(); })
      .def("prob", &ReverseOracle::prob, py::arg("x"), py::arg("t"))
      .def("marginal", [](const ReverseOracle& o, double t) {
        const auto pmf = o.marginal(t);
        const auto p = pmf.probs();
        return std::vector<double>(p.begin(), p.end());
      })
      .def("score_ratio", &ReverseOracle::score_ratio, py::arg("x"), py::arg("dim"), py::arg("value"), py::arg("t"))
      .def("rate", [](const ReverseOracle& o, const State& x, int dim, int value, double t) {
        return o.reverse_rates(x, t).rate(dim, value);
      }, py::arg("x"), py::arg("dim"), py::arg("value"), py::arg("t"));

  m.def("uniform_schedule",
        [](double horizon, double t_min, int steps) { return uniform_schedule(horizon, t_min, steps).timesteps; },
        py::arg("horizon"), py::arg("t_min"), py::arg("steps"));
  m.def("jump_your_steps",
        [](const ReverseOracle& o, int rounds, int num_samples, const std::string& variant, std::uint64_t seed,
           double t_min_fraction) {
          const double t_min = t_min_fraction * o.kernel().horizon();
          return jump_your_steps(o, rounds, SearchConfig{}, klub_config(num_samples, variant), seed, t_min).timesteps;
        },
        py::arg("oracle"), py::arg("rounds"), py::arg("num_samples") = 2048, py::arg("variant") = "q_path",
        py::arg("seed") = 0, py::arg("t_min_fraction") = 1e-4);
  m.def("golden_section_maximize",
        [](const std::function<double(double)>& f, double lo, double hi, double tol, int max_iter) {
          const auto r = golden_section_maximize(f, lo, hi, tol, max_iter);
          return py::make_tuple(r.argmax, r.value, r.iterations);
        },
        py::arg("f"), py::arg("lo"), py::arg("hi"), py::arg("tol"), py::arg("max_iter") = 32);

  m.def("klub_refinement",
        [](const ReverseOracle& o, double s, double t, double u, int num_samples, const std::string& variant,
           std::uint64_t seed) {
          return estimate_dict(klub_refinement(o, s, t, u, klub_config(num_samples, variant), seed));
        },
        py::arg("oracle"), py::arg("s"), py::arg("t"), py::arg("u"), py::arg("num_samples") = 2048,
        py::arg("variant") = "q_path", py::arg("seed") = 0);

  m.def("sample",
        [](const ReverseOracle& o, const std::vector<double>& timesteps, int n, const std::string& method,
           std::uint64_t seed) {
          SamplerConfig cfg;
          cfg.method = sampler_method_from_string(method);
          cfg.seed = seed;
          return sample_ensemble(o, timesteps, cfg, n).samples;
        },
        py::arg("oracle"), py::arg("timesteps"), py::arg("n"), py::arg("method") = "tau_leap", py::arg("seed") = 0);

  m.def("schedule_kl",
        [](const ReverseOracle& o, const std::vector<double>& timesteps, const std::string& step) {
          const auto q = schedule_distribution(o, timesteps, brute_step_from_string(step));
          const auto p = o.marginal(timesteps.back());
          return kl_divergence(p, q);
        },
        py::arg("oracle"), py::arg("timesteps"), py::arg("step") = "euler");

  m.def("countdown_generate",
        [](int seq_len, int value_count, int n, std::uint64_t seed) {
          return generate(CountdownSpec{seq_len, value_count, false}, n, seed);
        },
        py::arg("seq_len") = 16, py::arg("value_count") = 8, py::arg("n") = 1, py::arg("seed") = 0);
  m.def("violation_rate",
        [](const std::vector<State>& seqs, int value_count) { return violation_rate(seqs, value_count); },
        py::arg("sequences"), py::arg("value_count") = 8);

  m.def("verify",
        [](std::uint64_t seed, int instances, int path_kl_paths, int count_paths) {
          VerifyOptions opts;
          opts.seed = seed;
          opts.instances = instances;
          opts.path_kl_paths = path_kl_paths;
          opts.count_paths = count_paths;
          return run_verify_suite(opts).to_json().dump();
        },
        py::arg("seed") = 20240611, py::arg("instances") = 20, py::arg("path_kl_paths") = 100000,
        py::arg("count_paths") = 100000);
}
