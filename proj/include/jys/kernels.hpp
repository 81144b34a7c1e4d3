#pragma once

#include <string>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

namespace jys {

using Matrix = Eigen::MatrixXd;

/// Log-linear cumulative noise: sigma(t) = -ln(1 - (1 - eps_min) t / T).
struct NoiseSchedule {
  double eps_min = 1e-3;
  double horizon = 1.0;

  void validate() const;
};

double sigma(const NoiseSchedule& schedule, double t);
/// d sigma / dt, the instantaneous rate multiplier beta(t).
double beta(const NoiseSchedule& schedule, double t);

enum class KernelFamily { Uniform, Absorbing, Gaussian };

std::string to_string(KernelFamily family);
KernelFamily kernel_family_from_string(const std::string& name);

/// Per-token forward corruption process shared by every dimension.
/// The per-token rate matrix factors as R_t = beta(t) * shape, with `shape` time independent.
class FactorizedKernel {
 public:
  FactorizedKernel(KernelFamily family, int vocab_size, NoiseSchedule schedule = {},
                   double gaussian_bandwidth = 1.0, int gaussian_truncation = 3);

  KernelFamily family() const noexcept { return family_; }
  int vocab_size() const noexcept { return vocab_size_; }
  const NoiseSchedule& schedule() const noexcept { return schedule_; }
  double horizon() const noexcept { return schedule_.horizon; }
  double gaussian_bandwidth() const noexcept { return bandwidth_; }
  int gaussian_truncation() const noexcept { return truncation_; }
  /// Absorbing kernels reserve the last token as the mask.
  int mask_token() const noexcept { return vocab_size_ - 1; }
  bool is_absorbing() const noexcept { return family_ == KernelFamily::Absorbing; }

  /// Unit-rate generator shape (rows sum to zero).
  const Matrix& shape() const noexcept { return shape_; }

  double sigma(double t) const { return jys::sigma(schedule_, t); }
  double beta(double t) const { return jys::beta(schedule_, t); }

  Matrix rate_matrix(double t) const;
  /// q_{t|s}: row x is the law of the token at time t given value x at time s.
  Matrix transition_kernel(double s, double t) const;
  /// Same kernel parametrized directly by the noise increment sigma(t) - sigma(s).
  Matrix transition_kernel_for_noise(double delta_sigma) const;
  std::vector<double> stationary_distribution() const;

  nlohmann::json to_json() const;
  static FactorizedKernel from_json(const nlohmann::json& j);

 private:
  KernelFamily family_;
  int vocab_size_;
  NoiseSchedule schedule_;
  double bandwidth_;
  int truncation_;
  Matrix shape_;
  // Gaussian only: the shape is symmetric, so kernels come from one eigendecomposition.
  Matrix eigenvectors_;
  Eigen::VectorXd eigenvalues_;
};

/// exp(A) by Pade scaling-and-squaring.
Matrix matrix_exponential(const Matrix& a);

}  // namespace jys
