#include "tunenet/gp.hpp"

#include <cmath>
#include <numbers>

#include "tunenet/errors.hpp"

namespace tunenet::baselines {

double RbfKernel::operator()(double a, double b) const {
  const double d = (a - b) / length_scale;
  return variance * std::exp(-0.5 * d * d);
}

Eigen::MatrixXd robust_cholesky(const Eigen::MatrixXd& a, double* used_jitter, double max_jitter) {
  const auto n = a.rows();
  double jitter = 0.0;
  while (true) {
    Eigen::LLT<Eigen::MatrixXd> llt(a + jitter * Eigen::MatrixXd::Identity(n, n));
    if (llt.info() == Eigen::Success) {
      if (used_jitter) *used_jitter = jitter;
      return llt.matrixL();
    }
    jitter = jitter == 0.0 ? 1e-10 : jitter * 10.0;
    if (jitter > max_jitter * (1.0 + 1e-9)) {
      throw NumericalError("Cholesky factorization failed after jitter escalation");
    }
  }
}

GpSurrogate::GpSurrogate(RbfKernel kernel, double noise_variance, double prior_mean)
    : kernel_(kernel), noise_(noise_variance), prior_mean_(prior_mean) {
  if (!(kernel_.length_scale > 0.0) || !(kernel_.variance > 0.0) || !(noise_ >= 0.0)) {
    throw ParameterDomainError("GP hyperparameters must be positive");
  }
}

void GpSurrogate::fit(std::vector<double> xs, std::vector<double> ys) {
  if (xs.size() != ys.size()) throw DimensionError("GP fit: xs and ys differ in length");
  xs_ = std::move(xs);
  const auto n = static_cast<Eigen::Index>(xs_.size());
  ys_.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) ys_[i] = ys[static_cast<std::size_t>(i)] - prior_mean_;
  Eigen::MatrixXd k(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j) k(i, j) = kernel_(xs_[i], xs_[j]);
  k.diagonal().array() += noise_;
  chol_ = robust_cholesky(k, &jitter_);
  alpha_ = chol_.triangularView<Eigen::Lower>().solve(ys_);
  alpha_ = chol_.transpose().triangularView<Eigen::Upper>().solve(alpha_);
}

GpSurrogate::Posterior GpSurrogate::posterior(const std::vector<double>& grid) const {
  const auto m = static_cast<Eigen::Index>(grid.size());
  const auto n = static_cast<Eigen::Index>(xs_.size());
  Posterior post;
  post.cov.resize(m, m);
  for (Eigen::Index i = 0; i < m; ++i)
    for (Eigen::Index j = 0; j < m; ++j) post.cov(i, j) = kernel_(grid[i], grid[j]);
  post.mean = Eigen::VectorXd::Constant(m, prior_mean_);
  if (n == 0) return post;
  Eigen::MatrixXd kxs(n, m);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < m; ++j) kxs(i, j) = kernel_(xs_[i], grid[j]);
  post.mean += kxs.transpose() * alpha_;
  const Eigen::MatrixXd v = chol_.triangularView<Eigen::Lower>().solve(kxs);
  post.cov.noalias() -= v.transpose() * v;
  return post;
}

double GpSurrogate::log_marginal_likelihood() const {
  const auto n = static_cast<double>(xs_.size());
  return -0.5 * ys_.dot(alpha_) - chol_.diagonal().array().log().sum() -
         0.5 * n * std::log(2.0 * std::numbers::pi);
}

}  // namespace tunenet::baselines
