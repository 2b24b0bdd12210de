#include "tunenet/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <random>

#include <json.hpp>

#include "tunenet/datasets.hpp"
#include "tunenet/errors.hpp"

namespace tunenet::baselines {

ParamVector mean_baseline(const std::vector<ParamVector>& targets) {
  if (targets.empty()) throw ParameterDomainError("mean_baseline: empty target list");
  ParamVector m(targets.front().size(), 0.0);
  for (const auto& t : targets) {
    if (t.size() != m.size()) throw DimensionError("mean_baseline: targets differ in dimension");
    for (std::size_t i = 0; i < m.size(); ++i) m[i] += t[i];
  }
  for (double& v : m) v /= static_cast<double>(targets.size());
  return m;
}

// ---------------------------------------------------------------------------
// Direct prediction

DirectModel direct_predict_train(const data::Dataset& dataset, const nn::TrainConfig& cfg) {
  const auto& pairs = dataset.train;
  if (pairs.empty()) throw DimensionError("direct_predict_train: empty training split");
  const std::size_t pdim = pairs.front().zeta_t.size();

  DirectModel model;
  model.shape = {pairs.front().o_t.num_channels(), pairs.front().o_t.length()};
  for (const auto& r : dataset.spec.target_range) {
    model.center.push_back(r.mid());
    model.scale.push_back(r.width());
  }
  std::vector<const sim::Observation*> obs;
  for (const auto& s : pairs) obs.push_back(&s.o_t);
  model.norm = Normalizer::fit(obs);

  std::mt19937_64 rng(mix_seed(cfg.seed, 2));
  const nn::BlockShape shapes[] = {{model.shape.flat_size(), kFeatureSize},
                                   {kFeatureSize, kEstimatorHidden},
                                   {kEstimatorHidden, pdim}};
  const nn::Activation acts[] = {nn::Activation::relu, nn::Activation::relu, nn::Activation::tanh};
  for (std::size_t i = 0; i < 3; ++i) {
    model.net.layers.push_back(nn::init_block_layer(std::span(&shapes[i], 1), acts[i], rng));
  }

  nn::RegressionData reg;
  const auto n = static_cast<Eigen::Index>(pairs.size());
  reg.inputs.resize(static_cast<Eigen::Index>(model.shape.flat_size()), n);
  reg.targets.resize(static_cast<Eigen::Index>(pdim), n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& s = pairs[static_cast<std::size_t>(i)];
    const auto x = model.norm.apply(s.o_t);
    reg.inputs.col(i) = Eigen::Map<const Eigen::VectorXd>(x.data(), static_cast<Eigen::Index>(x.size()));
    for (std::size_t d = 0; d < pdim; ++d) {
      reg.targets(static_cast<Eigen::Index>(d), i) = (s.zeta_t[d] - model.center[d]) / model.scale[d];
    }
  }
  model.net = nn::train_sgd(std::move(model.net), reg, cfg).model;
  return model;
}

ParamVector direct_predict(const DirectModel& model, const sim::Observation& o_t) {
  const bool ok = o_t.num_channels() == model.shape.channels && o_t.length() == model.shape.length;
  const sim::Observation resampled =
      ok || o_t.num_channels() != model.shape.channels ? o_t : resample(o_t, model.shape.length);
  const auto x = model.norm.apply(resampled);
  const Eigen::VectorXd out = nn::forward(
      model.net, Eigen::Map<const Eigen::VectorXd>(x.data(), static_cast<Eigen::Index>(x.size())));
  ParamVector zeta(model.center.size());
  for (std::size_t i = 0; i < zeta.size(); ++i) {
    zeta[i] = model.center[i] + model.scale[i] * out[static_cast<Eigen::Index>(i)];
  }
  return zeta;
}

void save_direct(const DirectModel& model, const std::string& weights_path,
                 const std::string& meta_path) {
  std::ofstream w(weights_path);
  if (!w) throw FormatError("cannot open " + weights_path + " for writing");
  nn::save_model(model.net, w);
  nlohmann::json meta;
  meta["format"] = "tunenet-direct-meta";
  meta["version"] = 1;
  meta["shape"] = {{"channels", model.shape.channels}, {"length", model.shape.length}};
  auto norm = nlohmann::json::array();
  for (const auto& c : model.norm.channels) norm.push_back({c.lo, c.hi});
  meta["norm"] = norm;
  meta["center"] = model.center;
  meta["scale"] = model.scale;
  std::ofstream m(meta_path);
  if (!m) throw FormatError("cannot open " + meta_path + " for writing");
  m << meta.dump(2) << '\n';
}

DirectModel load_direct(const std::string& weights_path, const std::string& meta_path) {
  std::ifstream w(weights_path);
  if (!w) throw MissingArtifactError("missing model weights " + weights_path);
  std::ifstream m(meta_path);
  if (!m) throw MissingArtifactError("missing model metadata " + meta_path);
  DirectModel model;
  model.net = nn::load_model(w);
  try {
    nlohmann::json meta;
    m >> meta;
    if (meta.value("format", "") != "tunenet-direct-meta" || meta.value("version", -1) != 1) {
      throw FormatError("unsupported direct-model metadata in " + meta_path);
    }
    model.shape = {meta.at("shape").at("channels").get<std::size_t>(),
                   meta.at("shape").at("length").get<std::size_t>()};
    for (const auto& c : meta.at("norm")) model.norm.channels.push_back({c.at(0).get<double>(), c.at(1).get<double>()});
    model.center = meta.at("center").get<std::vector<double>>();
    model.scale = meta.at("scale").get<std::vector<double>>();
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("corrupt direct-model metadata: ") + e.what());
  }
  return model;
}

Discrepancy normalized_mse(Normalizer norm) {
  return [norm = std::move(norm)](const sim::Observation& a, const sim::Observation& b) {
    const auto x = norm.apply(a);
    const auto y = norm.apply(b);
    if (x.size() != y.size()) throw DimensionError("discrepancy: observations differ in size");
    double s = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) s += (x[i] - y[i]) * (x[i] - y[i]);
    return s / static_cast<double>(x.size());
  };
}

namespace {

sim::Observation match_length(const sim::Observation& target, const sim::Observation& candidate) {
  return target.length() == candidate.length() ? target : resample(target, candidate.length());
}

}  // namespace

// ---------------------------------------------------------------------------
// CMA-ES

CmaesResult cmaes_minimize(const Objective& f, const ParamVector& initial, std::size_t budget,
                           const CmaesOptions& opt) {
  const std::size_t lambda = opt.population;
  if (lambda < 2) throw ParameterDomainError("cmaes: population must be >= 2");
  if (budget < lambda) throw ParameterDomainError("cmaes: budget is smaller than one generation");
  if (!(opt.sigma0 > 0.0)) throw ParameterDomainError("cmaes: sigma0 must be positive");
  const auto n = static_cast<Eigen::Index>(initial.size());
  if (n < 1) throw DimensionError("cmaes: empty initial guess");
  if (!opt.bounds.empty() && opt.bounds.size() != initial.size()) {
    throw DimensionError("cmaes: bounds have wrong dimension");
  }
  const bool boxed = !opt.bounds.empty();

  auto to_param = [&](const Eigen::VectorXd& x) {
    ParamVector p(initial.size());
    for (std::size_t i = 0; i < p.size(); ++i) {
      const double xi = x[static_cast<Eigen::Index>(i)];
      p[i] = boxed ? opt.bounds[i].lo + xi * opt.bounds[i].width() : xi;
    }
    return p;
  };

  // Strategy parameters (Hansen's defaults).
  const std::size_t mu = lambda / 2;
  Eigen::VectorXd w(static_cast<Eigen::Index>(mu));
  for (std::size_t i = 0; i < mu; ++i) {
    w[static_cast<Eigen::Index>(i)] = std::log(static_cast<double>(mu) + 0.5) - std::log(static_cast<double>(i + 1));
  }
  w /= w.sum();
  const double mueff = 1.0 / w.squaredNorm();
  const double dn = static_cast<double>(n);
  const double cc = (4.0 + mueff / dn) / (dn + 4.0 + 2.0 * mueff / dn);
  const double cs = (mueff + 2.0) / (dn + mueff + 5.0);
  const double c1 = 2.0 / ((dn + 1.3) * (dn + 1.3) + mueff);
  const double cmu = std::min(1.0 - c1, 2.0 * (mueff - 2.0 + 1.0 / mueff) / ((dn + 2.0) * (dn + 2.0) + mueff));
  const double damps = 1.0 + 2.0 * std::max(0.0, std::sqrt((mueff - 1.0) / (dn + 1.0)) - 1.0) + cs;
  const double chi_n = std::sqrt(dn) * (1.0 - 1.0 / (4.0 * dn) + 1.0 / (21.0 * dn * dn));

  EsState st;
  st.population = lambda;
  st.mean.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double p = initial[static_cast<std::size_t>(i)];
    st.mean[i] = boxed ? (p - opt.bounds[static_cast<std::size_t>(i)].lo) / opt.bounds[static_cast<std::size_t>(i)].width() : p;
  }
  st.sigma = opt.sigma0;
  st.cov = Eigen::MatrixXd::Identity(n, n);
  st.path_sigma = Eigen::VectorXd::Zero(n);
  st.path_c = Eigen::VectorXd::Zero(n);

  std::mt19937_64 rng(opt.seed);
  std::normal_distribution<double> normal(0.0, 1.0);

  CmaesResult res;
  res.best_value = std::numeric_limits<double>::infinity();
  const std::size_t max_generations = budget / lambda;
  std::vector<Eigen::VectorXd> xs(lambda), ys(lambda);
  std::vector<double> fs(lambda);
  std::vector<std::size_t> order(lambda);

  for (std::size_t g = 0; g < max_generations; ++g) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(st.cov);
    const Eigen::MatrixXd basis = eig.eigenvectors();
    const Eigen::VectorXd scales = eig.eigenvalues().cwiseMax(0.0).cwiseSqrt();

    for (std::size_t k = 0; k < lambda; ++k) {
      Eigen::VectorXd z(n);
      for (Eigen::Index i = 0; i < n; ++i) z[i] = normal(rng);
      Eigen::VectorXd x = st.mean + st.sigma * (basis * scales.cwiseProduct(z));
      if (boxed) x = x.cwiseMax(0.0).cwiseMin(1.0);
      xs[k] = x;
      ys[k] = (x - st.mean) / st.sigma;
      const ParamVector p = to_param(x);
      fs[k] = f(p);
      ++res.rollouts;
      if (fs[k] < res.best_value) {
        res.best_value = fs[k];
        res.best = p;
      }
    }

    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return fs[a] < fs[b]; });
    Eigen::VectorXd y_w = Eigen::VectorXd::Zero(n);
    for (std::size_t i = 0; i < mu; ++i) y_w += w[static_cast<Eigen::Index>(i)] * ys[order[i]];
    st.mean += st.sigma * y_w;

    const Eigen::MatrixXd inv_sqrt_c =
        basis * scales.cwiseMax(1e-300).cwiseInverse().asDiagonal() * basis.transpose();
    st.path_sigma = (1.0 - cs) * st.path_sigma + std::sqrt(cs * (2.0 - cs) * mueff) * (inv_sqrt_c * y_w);
    const double ps_norm = st.path_sigma.norm();
    const double denom = std::sqrt(1.0 - std::pow(1.0 - cs, 2.0 * static_cast<double>(g + 1)));
    const bool hsig = ps_norm / denom < (1.4 + 2.0 / (dn + 1.0)) * chi_n;
    st.path_c = (1.0 - cc) * st.path_c + (hsig ? std::sqrt(cc * (2.0 - cc) * mueff) : 0.0) * y_w;

    Eigen::MatrixXd rank_mu = Eigen::MatrixXd::Zero(n, n);
    for (std::size_t i = 0; i < mu; ++i) {
      rank_mu += w[static_cast<Eigen::Index>(i)] * ys[order[i]] * ys[order[i]].transpose();
    }
    const double hsig_correction = hsig ? 0.0 : cc * (2.0 - cc);
    st.cov = (1.0 - c1 - cmu) * st.cov +
             c1 * (st.path_c * st.path_c.transpose() + hsig_correction * st.cov) + cmu * rank_mu;
    st.cov = 0.5 * (st.cov + st.cov.transpose());
    st.sigma *= std::exp((cs / damps) * (ps_norm / chi_n - 1.0));
    ++st.generation;

    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> after(st.cov, Eigen::EigenvaluesOnly);
    res.min_eigenvalues.push_back(after.eigenvalues().minCoeff());
    res.trace.push_back({res.rollouts, res.best, res.best_value});
    ++res.generations;
    if (st.sigma * std::sqrt(after.eigenvalues().maxCoeff()) < opt.tolerance) {
      res.converged = true;
      break;
    }
  }
  res.final_state = st;
  return res;
}

CmaesResult cmaes_tune(const sim::Observation& o_t, const Simulator& simulator,
                       const ParamVector& initial, std::size_t budget,
                       const Discrepancy& discrepancy, const CmaesOptions& options) {
  return cmaes_minimize(
      [&](const ParamVector& p) {
        const sim::Observation cand = simulator(p);
        return discrepancy(cand, match_length(o_t, cand));
      },
      initial, budget, options);
}

// ---------------------------------------------------------------------------
// Greedy entropy search

std::vector<double> grid_centers(Interval range, std::size_t bins) {
  std::vector<double> g(bins);
  for (std::size_t b = 0; b < bins; ++b) {
    g[b] = range.lo + (static_cast<double>(b) + 0.5) * range.width() / static_cast<double>(bins);
  }
  return g;
}

namespace {

struct QuadratureRule {
  std::vector<double> nodes;
  std::vector<double> weights;
};

// Probabilists' Gauss-Hermite rules, weights normalized to sum to one.
QuadratureRule hermite_rule(std::size_t n) {
  switch (n) {
    case 1: return {{0.0}, {1.0}};
    case 3: return {{-std::sqrt(3.0), 0.0, std::sqrt(3.0)}, {1.0 / 6.0, 2.0 / 3.0, 1.0 / 6.0}};
    case 5:
      return {{-2.8569700138728056, -1.3556261799742659, 0.0, 1.3556261799742659, 2.8569700138728056},
              {0.011257411327720691, 0.22207592200561264, 0.5333333333333333, 0.22207592200561264,
               0.011257411327720691}};
    default: throw ParameterDomainError("entropy search: fantasies must be 1, 3 or 5");
  }
}

// Histogram of the per-column argmin of (mean + samples).
std::vector<double> argmin_distribution(const Eigen::VectorXd& mean, const Eigen::MatrixXd& samples) {
  const auto bins = samples.rows();
  std::vector<double> p(static_cast<std::size_t>(bins), 0.0);
  for (Eigen::Index c = 0; c < samples.cols(); ++c) {
    Eigen::Index best = 0;
    double best_v = mean[0] + samples(0, c);
    for (Eigen::Index r = 1; r < bins; ++r) {
      const double v = mean[r] + samples(r, c);
      if (v < best_v) {
        best_v = v;
        best = r;
      }
    }
    p[static_cast<std::size_t>(best)] += 1.0;
  }
  for (double& v : p) v /= static_cast<double>(samples.cols());
  return p;
}

double entropy(const std::vector<double>& p) {
  double h = 0.0;
  for (double v : p)
    if (v > 0.0) h -= v * std::log(v);
  return h;
}

std::size_t mode(const std::vector<double>& p) {
  return static_cast<std::size_t>(std::max_element(p.begin(), p.end()) - p.begin());
}

struct Standardized {
  std::vector<double> values;
  double mean = 0.0;
  double scale = 1.0;
};

Standardized standardize(const std::vector<double>& ys) {
  Standardized s;
  const double n = static_cast<double>(ys.size());
  s.mean = std::accumulate(ys.begin(), ys.end(), 0.0) / n;
  double var = 0.0;
  for (double y : ys) var += (y - s.mean) * (y - s.mean);
  var = ys.size() > 1 ? var / (n - 1.0) : 0.0;
  s.scale = var > 0.0 ? std::sqrt(var) : (s.mean != 0.0 ? std::abs(s.mean) : 1.0);
  for (double y : ys) s.values.push_back((y - s.mean) / s.scale);
  return s;
}

}  // namespace

EntropySearchResult entropy_search_minimize(const std::function<double(double)>& f, double initial,
                                            std::size_t budget, const EntropySearchOptions& opt) {
  if (budget < 1) throw ParameterDomainError("entropy search: budget must be >= 1");
  if (opt.bins < 2 || opt.population < 1) throw ParameterDomainError("entropy search: invalid discretization");
  if (!(opt.bounds.hi > opt.bounds.lo)) throw ParameterDomainError("entropy search: degenerate bounds");
  const QuadratureRule rule = hermite_rule(opt.fantasies);
  const std::vector<double> grid = grid_centers(opt.bounds, opt.bins);
  const auto m = static_cast<Eigen::Index>(opt.bins);
  const auto pop = static_cast<Eigen::Index>(opt.population);

  std::mt19937_64 rng(opt.seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  double length_scale = opt.length_scale_fraction * opt.bounds.width();

  EntropySearchResult res;
  res.noise_variance = opt.noise_variance;
  std::vector<double> xs, ys;
  double x_next = opt.bounds.clamp(initial);
  std::size_t previous_mode = opt.bins;
  std::size_t unchanged = 0;

  for (std::size_t step = 0; step < budget; ++step) {
    const double y = f(x_next);
    ++res.rollouts;
    xs.push_back(x_next);
    ys.push_back(y);
    const Standardized z = standardize(ys);

    if (xs.size() >= 2 && xs.size() % opt.refit_every == 0) {
      double best_ll = -std::numeric_limits<double>::infinity();
      for (double frac : {0.03, 0.05, 0.1, 0.2, 0.3, 0.5}) {
        GpSurrogate trial({frac * opt.bounds.width(), 1.0}, opt.noise_variance);
        trial.fit(xs, z.values);
        const double ll = trial.log_marginal_likelihood();
        if (ll > best_ll) {
          best_ll = ll;
          length_scale = frac * opt.bounds.width();
        }
      }
    }

    GpSurrogate gp({length_scale, 1.0}, opt.noise_variance);
    gp.fit(xs, z.values);
    const auto post = gp.posterior(grid);
    double jitter = 0.0;
    const Eigen::MatrixXd chol = robust_cholesky(post.cov, &jitter, 1e-2);
    Eigen::MatrixXd draws(m, pop);
    for (Eigen::Index r = 0; r < m; ++r)
      for (Eigen::Index c = 0; c < pop; ++c) draws(r, c) = normal(rng);
    const Eigen::MatrixXd samples = chol.triangularView<Eigen::Lower>() * draws;
    const std::vector<double> p_min = argmin_distribution(post.mean, samples);
    const std::size_t est = mode(p_min);
    res.estimate = grid[est];
    res.jitter = gp.jitter();
    res.trace.push_back({res.rollouts, {res.estimate}, y});
    const auto at_obs = gp.posterior(xs);
    res.observed_variance.assign(at_obs.cov.diagonal().data(),
                                 at_obs.cov.diagonal().data() + at_obs.cov.rows());

    if (opt.early_stop) {
      unchanged = est == previous_mode ? unchanged + 1 : 0;
      previous_mode = est;
      if (unchanged >= 2) {
        res.stopped_early = true;
        break;
      }
    }
    if (step + 1 == budget) break;

    // Greedy query: minimize the expected entropy of the argmin distribution
    // after one more (fantasized) observation at each grid bin.
    double best_h = std::numeric_limits<double>::infinity();
    std::size_t best_bin = 0;
    for (Eigen::Index c = 0; c < m; ++c) {
      const double s2 = post.cov(c, c) + opt.noise_variance;
      const Eigen::VectorXd k = post.cov.col(c);
      const Eigen::MatrixXd cov_next = post.cov - (k * k.transpose()) / s2;
      const Eigen::MatrixXd l_next = robust_cholesky(cov_next, nullptr, 1e-2);
      const Eigen::MatrixXd s_next = l_next.triangularView<Eigen::Lower>() * draws;
      double h = 0.0;
      for (std::size_t q = 0; q < rule.nodes.size(); ++q) {
        const Eigen::VectorXd mean_next = post.mean + k * (rule.nodes[q] / std::sqrt(s2));
        h += rule.weights[q] * entropy(argmin_distribution(mean_next, s_next));
      }
      if (h < best_h) {
        best_h = h;
        best_bin = static_cast<std::size_t>(c);
      }
    }
    x_next = grid[best_bin];
  }
  return res;
}

EntropySearchResult entropy_search_tune(const sim::Observation& o_t, const Simulator& simulator,
                                        const ParamVector& initial, std::size_t budget,
                                        const Discrepancy& discrepancy,
                                        const EntropySearchOptions& options) {
  if (initial.size() != 1) throw DimensionError("entropy search supports scalar parameters only");
  return entropy_search_minimize(
      [&](double x) {
        const sim::Observation cand = simulator({x});
        return discrepancy(cand, match_length(o_t, cand));
      },
      initial[0], budget, options);
}

}  // namespace tunenet::baselines
