#include "jys/kernels.hpp"

#include <cmath>

#include <unsupported/Eigen/MatrixFunctions>

#include "jys/error.hpp"

namespace jys {

void NoiseSchedule::validate() const {
  if (!(eps_min > 0.0 && eps_min < 1.0)) throw DomainError("NoiseSchedule: eps_min must lie in (0, 1)");
  if (!(horizon > 0.0) || !std::isfinite(horizon)) throw DomainError("NoiseSchedule: horizon must be positive");
}

namespace {

void check_time(const NoiseSchedule& s, double t) {
  if (!(t >= 0.0 && t <= s.horizon)) {
    throw DomainError("time " + std::to_string(t) + " outside [0, " + std::to_string(s.horizon) + "]");
  }
}

}  // namespace

double sigma(const NoiseSchedule& schedule, double t) {
  check_time(schedule, t);
  return -std::log1p(-(1.0 - schedule.eps_min) * (t / schedule.horizon));
}

double beta(const NoiseSchedule& schedule, double t) {
  check_time(schedule, t);
  const double slope = (1.0 - schedule.eps_min) / schedule.horizon;
  return slope / (1.0 - slope * t);
}

std::string to_string(KernelFamily family) {
  switch (family) {
    case KernelFamily::Uniform: return "uniform";
    case KernelFamily::Absorbing: return "absorbing";
    case KernelFamily::Gaussian: return "gaussian";
  }
  return "unknown";
}

KernelFamily kernel_family_from_string(const std::string& name) {
  if (name == "uniform") return KernelFamily::Uniform;
  if (name == "absorbing" || name == "absorb" || name == "mask") return KernelFamily::Absorbing;
  if (name == "gaussian") return KernelFamily::Gaussian;
  throw DomainError("unknown kernel family '" + name + "'");
}

FactorizedKernel::FactorizedKernel(KernelFamily family, int vocab_size, NoiseSchedule schedule,
                                   double gaussian_bandwidth, int gaussian_truncation)
    : family_(family),
      vocab_size_(vocab_size),
      schedule_(schedule),
      bandwidth_(gaussian_bandwidth),
      truncation_(gaussian_truncation),
      shape_(Matrix::Zero(vocab_size, vocab_size)) {
  schedule_.validate();
  if (vocab_size < 2) throw DomainError("FactorizedKernel: vocab_size must be >= 2");
  const int s = vocab_size;
  switch (family) {
    case KernelFamily::Uniform:
      shape_.setConstant(1.0 / s);
      shape_.diagonal().setConstant(-(s - 1.0) / s);
      break;
    case KernelFamily::Absorbing: {
      const int mask = s - 1;
      for (int x = 0; x < mask; ++x) {
        shape_(x, mask) = 1.0;
        shape_(x, x) = -1.0;
      }
      break;
    }
    case KernelFamily::Gaussian:
      if (!(bandwidth_ > 0.0)) throw DomainError("FactorizedKernel: gaussian_bandwidth must be positive");
      if (truncation_ < 1) throw DomainError("FactorizedKernel: gaussian_truncation must be >= 1");
      for (int i = 0; i < s; ++i) {
        for (int j = 0; j < s; ++j) {
          const int gap = std::abs(i - j);
          if (gap >= 1 && gap <= truncation_) {
            shape_(i, j) = std::exp(-static_cast<double>(gap * gap) / (2.0 * bandwidth_ * bandwidth_));
          }
        }
        shape_(i, i) = -shape_.row(i).sum();
      }
      {
        const Eigen::SelfAdjointEigenSolver<Matrix> eig(shape_);
        eigenvectors_ = eig.eigenvectors();
        eigenvalues_ = eig.eigenvalues();
      }
      break;
  }
}

Matrix FactorizedKernel::rate_matrix(double t) const { return beta(t) * shape_; }

Matrix FactorizedKernel::transition_kernel(double s, double t) const {
  if (!(s < t)) throw IntervalError("transition_kernel: requires s < t");
  return transition_kernel_for_noise(sigma(t) - sigma(s));
}

Matrix FactorizedKernel::transition_kernel_for_noise(double delta_sigma) const {
  if (!(delta_sigma >= 0.0)) throw IntervalError("transition_kernel: negative noise increment");
  const int s = vocab_size_;
  const double keep = std::exp(-delta_sigma);
  Matrix k(s, s);
  switch (family_) {
    case KernelFamily::Uniform:
      k.setConstant((1.0 - keep) / s);
      k.diagonal().array() += keep;
      break;
    case KernelFamily::Absorbing: {
      const int mask = s - 1;
      k.setZero();
      for (int x = 0; x < mask; ++x) {
        k(x, x) = keep;
        k(x, mask) = 1.0 - keep;
      }
      k(mask, mask) = 1.0;
      break;
    }
    case KernelFamily::Gaussian:
      k = eigenvectors_ * (delta_sigma * eigenvalues_).array().exp().matrix().asDiagonal() *
          eigenvectors_.transpose();
      // Tiny negative round-off is not a probability.
      k = k.cwiseMax(0.0);
      for (int i = 0; i < s; ++i) k.row(i) /= k.row(i).sum();
      break;
  }
  return k;
}

std::vector<double> FactorizedKernel::stationary_distribution() const {
  std::vector<double> pi(static_cast<std::size_t>(vocab_size_), 0.0);
  if (family_ == KernelFamily::Absorbing) {
    pi.back() = 1.0;
  } else {
    for (double& p : pi) p = 1.0 / vocab_size_;
  }
  return pi;
}

nlohmann::json FactorizedKernel::to_json() const {
  nlohmann::json j = {{"family", to_string(family_)},
                      {"vocab_size", vocab_size_},
                      {"eps_min", schedule_.eps_min},
                      {"horizon", schedule_.horizon}};
  if (family_ == KernelFamily::Gaussian) {
    j["gaussian_bandwidth"] = bandwidth_;
    j["gaussian_truncation"] = truncation_;
  }
  return j;
}

FactorizedKernel FactorizedKernel::from_json(const nlohmann::json& j) {
  NoiseSchedule ns;
  ns.eps_min = j.value("eps_min", 1e-3);
  ns.horizon = j.value("horizon", 1.0);
  return FactorizedKernel(kernel_family_from_string(j.at("family").get<std::string>()), j.at("vocab_size").get<int>(),
                          ns, j.value("gaussian_bandwidth", 1.0), j.value("gaussian_truncation", 3));
}

Matrix matrix_exponential(const Matrix& a) { return a.exp(); }

}  // namespace jys
