#include <doctest.h>

#include <cmath>

#include "jys/error.hpp"
#include "jys/kernels.hpp"
#include "jys/rng.hpp"

using namespace jys;

namespace {

// exp(A) by a truncated Taylor series after halving A until its norm is small, then squaring.
Matrix taylor_exp(const Matrix& a) {
  int halvings = 0;
  double norm = a.cwiseAbs().rowwise().sum().maxCoeff();
  while (norm > 0.05) {
    norm /= 2.0;
    ++halvings;
  }
  const Matrix b = a / std::ldexp(1.0, halvings);
  Matrix term = Matrix::Identity(a.rows(), a.cols());
  Matrix sum = term;
  for (int k = 1; k < 30; ++k) {
    term = term * b / static_cast<double>(k);
    sum += term;
  }
  for (int i = 0; i < halvings; ++i) sum = sum * sum;
  return sum;
}

const KernelFamily kFamilies[] = {KernelFamily::Uniform, KernelFamily::Absorbing, KernelFamily::Gaussian};

}  // namespace

TEST_CASE("log-linear noise schedule") {
  const NoiseSchedule ns;
  CHECK(sigma(ns, 0.0) == 0.0);
  CHECK(sigma(ns, 1.0) == doctest::Approx(std::log(1000.0)).epsilon(1e-12));
  CHECK(sigma(ns, 0.5) == doctest::Approx(-std::log(0.5005)).epsilon(1e-12));
  CHECK(sigma(ns, 0.5) == doctest::Approx(0.69215).epsilon(1e-5));
  CHECK_THROWS_AS(sigma(ns, 1.5), DomainError);
  CHECK_THROWS_AS(sigma(ns, -0.1), DomainError);
  // beta is the derivative of sigma.
  for (double t : {0.1, 0.5, 0.9}) {
    const double h = 1e-6;
    CHECK(beta(ns, t) == doctest::Approx((sigma(ns, t + h) - sigma(ns, t - h)) / (2 * h)).epsilon(1e-7));
  }
  CHECK(beta(ns, 1.0) == doctest::Approx(999.0).epsilon(1e-12));
}

TEST_CASE("rate matrices") {
  const FactorizedKernel uni(KernelFamily::Uniform, 2);
  // beta(t) = 1 at t = 0.999 / 0.999 ... choose the unit shape directly.
  CHECK(uni.shape()(0, 0) == doctest::Approx(-0.5));
  CHECK(uni.shape()(0, 1) == doctest::Approx(0.5));
  CHECK(uni.shape()(1, 0) == doctest::Approx(0.5));

  const FactorizedKernel abs3(KernelFamily::Absorbing, 3);
  for (int j = 0; j < 3; ++j) CHECK(abs3.shape()(2, j) == 0.0);
  CHECK(abs3.shape()(0, 2) == 1.0);
  CHECK(abs3.shape()(0, 1) == 0.0);

  const FactorizedKernel gau(KernelFamily::Gaussian, 6);
  CHECK(gau.shape()(0, 4) == 0.0);  // beyond truncation 3
  CHECK(gau.shape()(0, 1) == doctest::Approx(std::exp(-0.5)));
  CHECK(gau.shape()(0, 3) == doctest::Approx(std::exp(-4.5)));
  for (int i = 0; i < 6; ++i) {
    for (int j = 0; j < 6; ++j) CHECK(gau.shape()(i, j) == gau.shape()(j, i));
  }

  for (auto f : kFamilies) {
    const FactorizedKernel k(f, 5);
    const Matrix r = k.rate_matrix(0.4);
    for (int i = 0; i < 5; ++i) {
      CHECK(std::abs(r.row(i).sum()) <= 1e-12);
      for (int j = 0; j < 5; ++j) {
        if (i != j) CHECK(r(i, j) >= 0.0);
      }
    }
    CHECK((r - k.beta(0.4) * k.shape()).cwiseAbs().maxCoeff() == 0.0);
  }
}

TEST_CASE("transition kernels") {
  const FactorizedKernel uni(KernelFamily::Uniform, 4);
  const Matrix k = uni.transition_kernel_for_noise(std::log(2.0));
  CHECK(k(0, 0) == doctest::Approx(0.625).epsilon(1e-12));
  CHECK(k(0, 1) == doctest::Approx(0.125).epsilon(1e-12));
  CHECK_THROWS_AS(uni.transition_kernel(0.5, 0.5), IntervalError);
  CHECK_THROWS_AS(uni.transition_kernel(0.6, 0.5), IntervalError);

  const Matrix near = uni.transition_kernel(0.3, 0.3 + 1e-12);
  CHECK((near - Matrix::Identity(4, 4)).cwiseAbs().maxCoeff() <= 1e-10);

  // Rows mix to uniform; the spectral gap shrinks with S, so larger vocabularies need more noise.
  for (auto [vocab, noise] : {std::pair{4, 50.0}, {6, 50.0}, {7, 200.0}}) {
    const Matrix far = FactorizedKernel(KernelFamily::Gaussian, vocab).transition_kernel_for_noise(noise);
    for (int i = 0; i < vocab; ++i) CHECK(far.row(i).maxCoeff() - far.row(i).minCoeff() <= 1e-6);
  }
  const FactorizedKernel gau(KernelFamily::Gaussian, 7);

  for (double ds : {0.01, 0.3, 2.0}) {
    const Matrix ours = gau.transition_kernel_for_noise(ds);
    const Matrix ref = taylor_exp(ds * gau.shape());
    CHECK((ours - ref).cwiseAbs().maxCoeff() <= 1e-12);
  }

  // Closed forms for the analytic families agree with the matrix exponential.
  for (auto f : {KernelFamily::Uniform, KernelFamily::Absorbing}) {
    const FactorizedKernel kern(f, 5);
    const Matrix ours = kern.transition_kernel(0.2, 0.7);
    const double ds = kern.sigma(0.7) - kern.sigma(0.2);
    CHECK((ours - matrix_exponential(ds * kern.shape())).cwiseAbs().maxCoeff() <= 1e-12);
  }
}

TEST_CASE("Chapman-Kolmogorov and stochasticity") {
  Rng rng(42);
  for (auto f : kFamilies) {
    const FactorizedKernel k(f, 5);
    for (int i = 0; i < 50; ++i) {
      double a = rng.uniform(), b = rng.uniform(), c = rng.uniform();
      if (a > b) std::swap(a, b);
      if (b > c) std::swap(b, c);
      if (a > b) std::swap(a, b);
      if (!(a < b && b < c)) continue;
      const Matrix direct = k.transition_kernel(a, c);
      const Matrix composed = k.transition_kernel(a, b) * k.transition_kernel(b, c);
      CHECK((direct - composed).cwiseAbs().maxCoeff() <= 1e-9);
      CHECK(direct.minCoeff() >= 0.0);
      for (int r = 0; r < 5; ++r) CHECK(std::abs(direct.row(r).sum() - 1.0) <= 1e-10);
    }
  }
}

TEST_CASE("stationary distributions") {
  const auto abs5 = FactorizedKernel(KernelFamily::Absorbing, 5).stationary_distribution();
  CHECK(abs5 == std::vector<double>{0, 0, 0, 0, 1});
  const auto uni4 = FactorizedKernel(KernelFamily::Uniform, 4).stationary_distribution();
  for (double p : uni4) CHECK(p == 0.25);
  for (auto f : kFamilies) {
    const FactorizedKernel k(f, 6);
    const auto pi = k.stationary_distribution();
    const Eigen::Map<const Eigen::RowVectorXd> row(pi.data(), 6);
    CHECK((row * k.shape()).cwiseAbs().maxCoeff() <= 1e-12);
    CHECK((row * k.transition_kernel(0.1, 0.8) - row).cwiseAbs().maxCoeff() <= 1e-9);
  }
}

TEST_CASE("kernel json round trip") {
  const FactorizedKernel k(KernelFamily::Gaussian, 6, NoiseSchedule{1e-2, 2.0}, 1.5, 2);
  const auto back = FactorizedKernel::from_json(k.to_json());
  CHECK(back.family() == KernelFamily::Gaussian);
  CHECK(back.vocab_size() == 6);
  CHECK(back.horizon() == 2.0);
  CHECK(back.gaussian_bandwidth() == 1.5);
  CHECK(back.gaussian_truncation() == 2);
  CHECK_THROWS_AS(kernel_family_from_string("nope"), DomainError);
}
