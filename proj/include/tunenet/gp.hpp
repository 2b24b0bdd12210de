#pragma once

#include <vector>

#include <Eigen/Dense>

namespace tunenet::baselines {

struct RbfKernel {
  double length_scale = 0.1;
  double variance = 1.0;

  double operator()(double a, double b) const;
};

/// Scalar-input Gaussian process with an RBF kernel and a constant prior mean.
class GpSurrogate {
 public:
  GpSurrogate(RbfKernel kernel, double noise_variance, double prior_mean = 0.0);

  /// Factorizes K + noise*I, escalating diagonal jitter from 1e-10 up to
  /// 1e-4 before throwing NumericalError.
  void fit(std::vector<double> xs, std::vector<double> ys);

  struct Posterior {
    Eigen::VectorXd mean;
    Eigen::MatrixXd cov;
  };
  Posterior posterior(const std::vector<double>& grid) const;

  double log_marginal_likelihood() const;

  const RbfKernel& kernel() const { return kernel_; }
  double noise_variance() const { return noise_; }
  double jitter() const { return jitter_; }
  std::size_t size() const { return xs_.size(); }

 private:
  RbfKernel kernel_;
  double noise_;
  double prior_mean_;
  double jitter_ = 0.0;
  std::vector<double> xs_;
  Eigen::VectorXd ys_;
  Eigen::MatrixXd chol_;  // lower factor of K + (noise + jitter) I
  Eigen::VectorXd alpha_;
};

/// Lower Cholesky factor of a, adding jitter * I from 1e-10 upward (x10) until
/// it succeeds; throws NumericalError past max_jitter. used_jitter receives
/// the jitter that was applied (0 when none was needed).
Eigen::MatrixXd robust_cholesky(const Eigen::MatrixXd& a, double* used_jitter = nullptr,
                                double max_jitter = 1e-4);

}  // namespace tunenet::baselines
