#include <doctest.h>

#include <cmath>
#include <limits>
#include <numbers>

#include "jys/countdown.hpp"
#include "jys/error.hpp"
#include "jys/scheduler.hpp"
#include "jys/verify.hpp"

using namespace jys;

TEST_CASE("golden section on analytic functions") {
  const double tol = 1.0 / 2048.0;
  const auto quad = golden_section_maximize([](double t) { return -(t - 0.3) * (t - 0.3); }, 0.0, 1.0, tol, 32);
  CHECK(std::abs(quad.argmax - 0.3) <= tol);
  CHECK(quad.iterations <= 32);

  const auto sine = golden_section_maximize([](double t) { return std::sin(std::numbers::pi * t); }, 0.0, 1.0, tol, 32);
  CHECK(std::abs(sine.argmax - 0.5) <= tol);

  const auto flat = golden_section_maximize([](double) { return 1.0; }, 0.0, 1.0, tol, 32);
  CHECK(flat.value == 1.0);
  CHECK(flat.argmax > 0.0);
  CHECK(flat.argmax < 1.0);

  CHECK_THROWS_AS(golden_section_maximize([](double) { return 0.0; }, 1.0, 0.0, tol, 32), DomainError);
  try {
    golden_section_maximize([](double t) { return t > 0.5 ? std::numeric_limits<double>::quiet_NaN() : t; }, 0.0,
                            1.0, tol, 32);
    FAIL("expected a search error");
  } catch (const SearchError& e) {
    CHECK(e.at() > 0.5);
  }
}

TEST_CASE("golden section bracket shrinks by the golden ratio") {
  const double r = (std::sqrt(5.0) - 1.0) / 2.0;
  for (int k : {1, 5, 12}) {
    // A tolerance just below the expected width stops the search after exactly k shrinks.
    const double width = std::pow(r, k);
    const auto res = golden_section_maximize([](double t) { return -std::abs(t - 0.61); }, 0.0, 1.0,
                                             width * (1.0 - 1e-9), 100);
    CHECK(res.iterations == k + 1);
    const auto capped = golden_section_maximize([](double t) { return -std::abs(t - 0.61); }, 0.0, 1.0, 1e-15, k);
    CHECK(capped.iterations == k);
    CHECK(std::abs(capped.argmax - 0.61) <= width);
  }
}

TEST_CASE("uniform schedules") {
  CHECK(uniform_schedule(1.0, 1e-4, 1).timesteps == std::vector<double>{1.0, 1e-4});
  CHECK(uniform_schedule(1.0, 0.0, 2).timesteps == std::vector<double>{1.0, 0.5, 0.0});
  const auto w = uniform_schedule(1.0, 1e-4, 4).widths();
  for (double x : w) CHECK(x == doctest::Approx(w[0]).epsilon(1e-12));
  CHECK_THROWS_AS(uniform_schedule(1.0, 0.0, 0), DomainError);
}

TEST_CASE("jump your steps structure and determinism") {
  Rng gen(3);
  const ReverseOracle o = random_oracle(KernelFamily::Uniform, 2, 3, gen);
  KlubConfig klub;
  klub.num_samples = 128;
  for (int k : {1, 3}) {
    std::vector<SegmentTrace> trace;
    const auto s = jump_your_steps(o, k, SearchConfig{}, klub, 5, 1e-4, &trace);
    CHECK(s.timesteps.size() == (1u << k) + 1);
    CHECK(s.timesteps.front() == 1.0);
    CHECK(s.timesteps.back() == 1e-4);
    CHECK_NOTHROW(s.validate());
    CHECK(trace.size() == (1u << k) - 1);
    for (const auto& seg : trace) {
      // The chosen point scores at least as well as the two initial probes.
      CHECK(seg.value >= seg.probes[0].second);
      CHECK(seg.value >= seg.probes[1].second);
      const double margin = (seg.s - seg.u) * 1e-3;
      CHECK(seg.t_star >= seg.u + margin);
      CHECK(seg.t_star <= seg.s - margin);
    }
    const auto again = jump_your_steps(o, k, SearchConfig{}, klub, 5, 1e-4);
    CHECK(again.timesteps == s.timesteps);
  }
  CHECK_THROWS_AS(jump_your_steps(o, 0, SearchConfig{}, klub, 5, 1e-4), DomainError);
}

TEST_CASE("refine_segment on the countdown toy beats quarter points") {
  const CountdownSpec spec{16, 8, true};
  const ReverseOracle o(exact_distribution(spec).smoothed(1e-9, 8), FactorizedKernel(KernelFamily::Absorbing, 9));
  KlubConfig klub;
  klub.num_samples = 512;
  const double t = refine_segment(o, 1.0, 1e-4, SearchConfig{}, klub, 21);
  const double at = klub_refinement(o, 1.0, t, 1e-4, klub, 21).value;
  CHECK(at >= klub_refinement(o, 1.0, 0.25, 1e-4, klub, 21).value);
  CHECK(at >= klub_refinement(o, 1.0, 0.75, 1e-4, klub, 21).value);
  CHECK(refine_segment(o, 1.0, 1e-4, SearchConfig{}, klub, 21) == t);
}

TEST_CASE("schedule json round trip is exact") {
  Schedule s;
  s.timesteps = {1.0, 0.7123456789012345, 1.0 / 3.0, 1e-4};
  s.provenance.origin = ScheduleOrigin::File;
  const FactorizedKernel k(KernelFamily::Absorbing, 5);
  const auto text = schedule_to_json(s, k, {{"seed", 4}});
  const auto j = nlohmann::json::parse(text);
  CHECK(j["seed"] == 4);
  CHECK(j["nfe"] == 3);
  CHECK(j["kernel"]["family"] == "absorbing");
  CHECK(schedule_from_json(j).timesteps == s.timesteps);

  Schedule jys;
  jys.timesteps = {1.0, 0.4, 1e-4};
  jys.provenance = {ScheduleOrigin::Jys, 1, 9, KlubVariant::PForward, 256};
  const auto back = schedule_from_json(nlohmann::json::parse(schedule_to_json(jys, k)));
  CHECK(back.provenance.origin == ScheduleOrigin::Jys);
  CHECK(back.provenance.rounds == 1);
  CHECK(back.provenance.variant == KlubVariant::PForward);

  Schedule bad;
  bad.timesteps = {1.0, 1.0};
  CHECK_THROWS_AS(bad.validate(), DomainError);
  jys.timesteps = {1.0, 0.5, 0.2, 1e-4};
  CHECK_THROWS_AS(jys.validate(), DomainError);
}
