#include "dgp/gp.hpp"

#include <chrono>
#include <cmath>
#include <numbers>

#include "dgp/errors.hpp"
#include "dgp/linalg.hpp"

namespace dgp {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

void check_noise(double noise_var) {
  if (!(noise_var > 0.0) || !std::isfinite(noise_var))
    throw DomainError("noise variance must be positive");
}

Eigen::VectorXd prior_diag(const KernelConfig& cfg, const Points& query) {
  Eigen::VectorXd d(query.rows());
  for (Eigen::Index i = 0; i < query.rows(); ++i) d[i] = prior_variance(cfg, query.row(i));
  return d;
}

}  // namespace

void Dataset::validate() const {
  if (x.rows() != y.size()) throw ContractError("dataset has mismatched x/y lengths");
  if (!x.allFinite() || !y.allFinite()) throw ContractError("dataset has non-finite entries");
}

Dataset Dataset::one_dimensional(const std::vector<double>& xs, const std::vector<double>& ys,
                                 std::string source) {
  if (xs.size() != ys.size()) throw ContractError("dataset has mismatched x/y lengths");
  Dataset d;
  d.x = Eigen::Map<const Eigen::VectorXd>(xs.data(), static_cast<Eigen::Index>(xs.size()));
  d.y = Eigen::Map<const Eigen::VectorXd>(ys.data(), static_cast<Eigen::Index>(ys.size()));
  d.source = std::move(source);
  return d;
}

Points unit_grid(Eigen::Index size) {
  if (size < 2) throw ContractError("grid needs at least two points");
  Points g(size, 1);
  for (Eigen::Index i = 0; i < size; ++i) g(i, 0) = static_cast<double>(i) / (size - 1);
  return g;
}

LocalPosterior::LocalPosterior(GpFit fit, int shard_id)
    : components_{std::move(fit)}, weights_{1.0}, shard_id_(shard_id) {
  fit_seconds_ = components_.front().fit_seconds;
}

LocalPosterior::LocalPosterior(std::vector<GpFit> components, std::vector<double> weights,
                               int shard_id)
    : components_(std::move(components)), weights_(std::move(weights)), shard_id_(shard_id) {
  if (components_.empty() || components_.size() != weights_.size())
    throw ContractError("mixture needs one weight per component");
  for (const auto& c : components_) fit_seconds_ += c.fit_seconds;
}

GpFit fit_exact(const KernelConfig& cfg, double noise_var, const Dataset& shard, int shard_id) {
  const auto t0 = Clock::now();
  cfg.validate();
  check_noise(noise_var);
  shard.validate();

  GpFit post;
  post.cfg = cfg;
  post.noise_var = noise_var;
  post.train = shard;
  if (!shard.empty()) {
    post.chol = gram_matrix(cfg, shard.x);
    post.chol.diagonal().array() += noise_var + jitter(cfg);
    if (!linalg::cholesky_lower(post.chol))
      throw NumericalDegeneracy("Cholesky factorization failed", shard_id);
    post.alpha = shard.y;
    linalg::solve_lower(post.chol, post.alpha);
    linalg::solve_lower_transposed(post.chol, post.alpha);
  }
  post.fit_seconds = seconds_since(t0);
  return post;
}

LocalPosterior fit(const KernelConfig& cfg, double noise_var, const Dataset& shard, int shard_id) {
  return LocalPosterior(fit_exact(cfg, noise_var, shard, shard_id), shard_id);
}

GpFit extend(const GpFit& post, const Dataset& extra) {
  extra.validate();
  if (post.train.empty()) return fit_exact(post.cfg, post.noise_var, extra);
  if (extra.empty()) return post;
  if (extra.dim() != post.train.dim()) throw ContractError("dimension mismatch in extend");

  const Eigen::Index n = post.train.size(), b = extra.size();
  const Eigen::MatrixXd k_ab = gram_matrix(post.cfg, post.train.x, extra.x);
  Eigen::MatrixXd k_bb = gram_matrix(post.cfg, extra.x);
  k_bb.diagonal().array() += post.noise_var + jitter(post.cfg);

  // [L 0; C^T L22] with C = L^{-1} K_ab, L22 L22^T = K_bb - C^T C.
  Eigen::MatrixXd c = k_ab;
  linalg::solve_lower(post.chol, c);
  Eigen::MatrixXd l22 = k_bb - c.transpose() * c;
  if (!linalg::cholesky_lower(l22)) throw NumericalDegeneracy("Cholesky update failed");

  GpFit out;
  out.cfg = post.cfg;
  out.noise_var = post.noise_var;
  out.train.x.resize(n + b, post.train.dim());
  out.train.x << post.train.x, extra.x;
  out.train.y.resize(n + b);
  out.train.y << post.train.y, extra.y;
  out.train.source = post.train.source;
  out.chol = Eigen::MatrixXd::Zero(n + b, n + b);
  out.chol.topLeftCorner(n, n) = post.chol;
  out.chol.bottomLeftCorner(b, n) = c.transpose();
  out.chol.bottomRightCorner(b, b) = l22;
  out.alpha = out.train.y;
  linalg::solve_lower(out.chol, out.alpha);
  linalg::solve_lower_transposed(out.chol, out.alpha);
  out.fit_seconds = post.fit_seconds;
  return out;
}

Prediction predict(const GpFit& post, const Points& query) {
  Prediction p;
  p.var = prior_diag(post.cfg, query);
  if (post.train.empty()) {
    p.mean = Eigen::VectorXd::Zero(query.rows());
    return p;
  }
  Eigen::MatrixXd v = gram_matrix(post.cfg, post.train.x, query);
  p.mean = v.transpose() * post.alpha;
  linalg::solve_lower(post.chol, v);
  p.var -= v.colwise().squaredNorm().transpose();
  p.var = p.var.cwiseMax(0.0);
  return p;
}

Prediction predict(const LocalPosterior& post, const Points& query) {
  if (!post.is_mixture()) return predict(post.primary(), query);
  Prediction out;
  out.mean = Eigen::VectorXd::Zero(query.rows());
  Eigen::VectorXd second = Eigen::VectorXd::Zero(query.rows());
  for (std::size_t j = 0; j < post.components().size(); ++j) {
    const double w = post.weights()[j];
    if (w == 0.0) continue;
    const Prediction c = predict(post.components()[j], query);
    out.mean += w * c.mean;
    second += w * (c.var + c.mean.cwiseAbs2());
  }
  out.var = (second - out.mean.cwiseAbs2()).cwiseMax(0.0);
  return out;
}

Eigen::MatrixXd predictive_covariance(const GpFit& post, const Points& query) {
  Eigen::MatrixXd cov = gram_matrix(post.cfg, query);
  if (!post.train.empty()) {
    Eigen::MatrixXd v = gram_matrix(post.cfg, post.train.x, query);
    linalg::solve_lower(post.chol, v);
    cov.noalias() -= v.transpose() * v;
  }
  return cov;
}

Eigen::VectorXd sample_mvn(const Eigen::VectorXd& mean, const Eigen::MatrixXd& cov, Rng& rng,
                           double jitter_base) {
  const Eigen::Index q = mean.size();
  std::normal_distribution<double> normal(0.0, 1.0);
  Eigen::VectorXd z(q);
  for (Eigen::Index i = 0; i < q; ++i) z[i] = normal(rng);

  const Eigen::MatrixXd sym = 0.5 * (cov + cov.transpose());
  if (sym.diagonal().maxCoeff() <= 0.0) return mean;
  for (double j = jitter_base; j <= 1e4 * jitter_base; j *= 10.0) {
    Eigen::MatrixXd c = sym;
    c.diagonal().array() += j;
    if (linalg::cholesky_lower(c)) return mean + c.triangularView<Eigen::Lower>() * z;
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(sym);
  if (eig.info() != Eigen::Success || !eig.eigenvalues().allFinite())
    throw NumericalDegeneracy("predictive covariance factorization failed");
  const Eigen::VectorXd root = eig.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  return mean + eig.eigenvectors() * (root.asDiagonal() * z);
}

Eigen::VectorXd draw(const GpFit& post, const Points& query, Rng& rng) {
  if (query.rows() > kMaxDrawGrid) throw ContractError("draw grid larger than 10000 points");
  const Prediction p = predict(post, query);
  return sample_mvn(p.mean, predictive_covariance(post, query), rng, jitter(post.cfg));
}

Eigen::VectorXd draw(const LocalPosterior& post, const Points& query, Rng& rng) {
  if (!post.is_mixture()) return draw(post.primary(), query, rng);
  std::discrete_distribution<std::size_t> pick(post.weights().begin(), post.weights().end());
  return draw(post.components()[pick(rng)], query, rng);
}

double log_marginal_likelihood(const KernelConfig& cfg, double noise_var, const Dataset& shard) {
  cfg.validate();
  check_noise(noise_var);
  shard.validate();
  if (shard.empty()) return 0.0;
  Eigen::MatrixXd l = gram_matrix(cfg, shard.x);
  l.diagonal().array() += noise_var + jitter(cfg);
  if (!linalg::cholesky_lower(l)) throw NumericalDegeneracy("Cholesky factorization failed");
  Eigen::VectorXd white = shard.y;
  linalg::solve_lower(l, white);
  const double log_det = 2.0 * l.diagonal().array().log().sum();
  const double n = static_cast<double>(shard.size());
  return -0.5 * white.squaredNorm() - 0.5 * log_det - 0.5 * n * std::log(2.0 * std::numbers::pi);
}

}  // namespace dgp

namespace dgp {

double log_marginal_likelihood(const GpFit& post) {
  if (post.train.empty()) return 0.0;
  const double log_det = 2.0 * post.chol.diagonal().array().log().sum();
  const double n = static_cast<double>(post.train.size());
  return -0.5 * post.train.y.dot(post.alpha) - 0.5 * log_det -
         0.5 * n * std::log(2.0 * std::numbers::pi);
}

}  // namespace dgp
