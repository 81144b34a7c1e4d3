#include <doctest.h>

#include <cmath>
#include <set>

#include "jys/dist.hpp"
#include "jys/error.hpp"
#include "jys/rng.hpp"

using namespace jys;

namespace {

std::vector<double> random_probs(Rng& rng, std::size_t n) {
  std::vector<double> p(n);
  double sum = 0.0;
  for (auto& v : p) sum += (v = rng.exponential(1.0));
  for (auto& v : p) v /= sum;
  return p;
}

// Reference KL in long double, written out independently of the library.
long double kl_reference(const std::vector<double>& p, const std::vector<double>& q) {
  long double acc = 0.0L;
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (p[i] > 0.0) acc += static_cast<long double>(p[i]) * std::log(static_cast<long double>(p[i]) / q[i]);
  }
  return acc;
}

}  // namespace

TEST_CASE("state_index mixed radix") {
  const StateSpace s3(2, 3);
  CHECK(state_index(std::vector<int>{0, 0}, s3) == 0);
  CHECK(state_index(std::vector<int>{1, 0}, s3) == 1);
  CHECK(state_index(std::vector<int>{2, 1}, s3) == 5);
  CHECK(state_index(std::vector<int>{0, 0, 0}, StateSpace(3, 4)) == 0);

  std::set<std::int64_t> seen;
  for (int a = 0; a < 3; ++a) {
    for (int b = 0; b < 3; ++b) {
      const auto idx = state_index(std::vector<int>{a, b}, s3);
      CHECK(s3.decode(idx) == State{a, b});
      seen.insert(idx);
    }
  }
  CHECK(seen.size() == 9);
  CHECK_THROWS_AS(state_index(std::vector<int>{3, 0}, s3), DomainError);
  CHECK_THROWS_AS(StateSpace(8, 10).total_states(), DomainError);
  CHECK_FALSE(StateSpace(8, 10).enumerable());
}

TEST_CASE("kl_divergence values") {
  CHECK(kl_divergence(std::vector<double>{0.5, 0.5}, std::vector<double>{0.25, 0.75}) ==
        doctest::Approx(0.143841036).epsilon(1e-6));
  CHECK(kl_divergence(std::vector<double>{1.0, 0.0}, std::vector<double>{0.5, 0.5}) ==
        doctest::Approx(std::log(2.0)).epsilon(1e-12));
  const std::vector<double> p{0.2, 0.3, 0.5};
  CHECK(kl_divergence(p, p) == 0.0);
  CHECK_THROWS_AS(kl_divergence(std::vector<double>{0.5, 0.5}, std::vector<double>{1.0, 0.0}), SupportMismatchError);
}

TEST_CASE("kl_divergence is nonnegative and matches a long-double reference") {
  Rng rng(11);
  for (int i = 0; i < 100; ++i) {
    const auto p = random_probs(rng, 6);
    const auto q = random_probs(rng, 6);
    const double kl = kl_divergence(p, q);
    CHECK(kl > 0.0);
    CHECK(kl == doctest::Approx(static_cast<double>(kl_reference(p, q))).epsilon(1e-12));
  }
}

TEST_CASE("mutual information") {
  const StateSpace pair(2, 2);
  CHECK(mutual_information(Pmf(pair, {0.5, 0.0, 0.0, 0.5})) == doctest::Approx(std::log(2.0)).epsilon(1e-12));
  const auto indep = Pmf::product({{0.3, 0.7}, {0.6, 0.4}});
  CHECK(std::abs(mutual_information(indep)) <= 1e-12);
  CHECK_THROWS_AS(mutual_information(Pmf::uniform(StateSpace(1, 3))), DegenerateInputError);

  Rng rng(5);
  for (int i = 0; i < 20; ++i) {
    const Pmf joint(StateSpace(2, 3), random_probs(rng, 9));
    CHECK(std::abs(mutual_information(joint) - kl_divergence(joint, product_of_marginals(joint))) <= 1e-12);
  }
}

TEST_CASE("product_of_marginals") {
  const auto diag = product_of_marginals(Pmf(StateSpace(2, 2), {0.5, 0.0, 0.0, 0.5}));
  for (double p : diag.probs()) CHECK(p == doctest::Approx(0.25));

  Rng rng(9);
  const Pmf joint(StateSpace(2, 3), random_probs(rng, 9));
  const auto prod = product_of_marginals(joint);
  // Marginals by direct summation over the 3x3 table (dim 0 is the fast index).
  for (int a = 0; a < 3; ++a) {
    double row = 0.0, col = 0.0;
    for (int b = 0; b < 3; ++b) {
      row += joint[a + 3 * b];
      col += joint[b + 3 * a];
    }
    CHECK(prod.marginal(0)[a] == doctest::Approx(row).epsilon(1e-14));
    CHECK(prod.marginal(1)[a] == doctest::Approx(col).epsilon(1e-14));
  }
  const auto twice = product_of_marginals(prod);
  for (std::size_t i = 0; i < prod.size(); ++i) CHECK(std::abs(twice[i] - prod[i]) <= 1e-15);
}

TEST_CASE("Pmf validation and json round trip") {
  CHECK_THROWS_AS(Pmf(StateSpace(1, 2), {0.7, 0.7}), DomainError);
  CHECK_THROWS_AS(Pmf(StateSpace(1, 2), {-0.1, 1.1}), DomainError);
  const Pmf p(StateSpace(2, 2), {0.1, 0.2, 0.3, 0.4});
  const auto back = pmf_from_json(to_json(p));
  CHECK(back.space() == p.space());
  for (std::size_t i = 0; i < p.size(); ++i) CHECK(back[i] == p[i]);
}

TEST_CASE("total variation") {
  CHECK(total_variation(std::vector<double>{1.0, 0.0}, std::vector<double>{0.0, 1.0}) == doctest::Approx(1.0));
  CHECK(total_variation(std::vector<double>{0.5, 0.5}, std::vector<double>{0.25, 0.75}) == doctest::Approx(0.25));
}
