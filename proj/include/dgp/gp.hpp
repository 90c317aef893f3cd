#ifndef DGP_GP_HPP_
#define DGP_GP_HPP_

#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "dgp/kernels.hpp"
#include "dgp/rng.hpp"

namespace dgp {

// Covariate/response pairs. x holds one observation per row.
struct Dataset {
  Points x;
  Eigen::VectorXd y;
  std::string source;

  Eigen::Index size() const { return y.size(); }
  Eigen::Index dim() const { return x.cols(); }
  bool empty() const { return y.size() == 0; }

  // Throws ContractError on shape mismatch or non-finite entries.
  void validate() const;

  static Dataset one_dimensional(const std::vector<double>& xs, const std::vector<double>& ys,
                                 std::string source = "inline");
};

// Uniform grid of `size` points on [0, 1], endpoints included.
Points unit_grid(Eigen::Index size);

// Region owned by a shard: an interval (a, b] in 1-d, or a k-d cell.
struct Region {
  enum class Kind { Interval, Cell };
  Kind kind = Kind::Interval;
  double lo = 0.0;
  double hi = 1.0;
  int cell_id = 0;
  Eigen::RowVectorXd centroid;
};

// Exact GP posterior for one shard under a fixed kernel.
struct GpFit {
  KernelConfig cfg;
  double noise_var = 1.0;
  Dataset train;
  Eigen::MatrixXd chol;    // lower factor of K + (noise + jitter) I
  Eigen::VectorXd alpha;   // (K + noise I)^{-1} y
  double fit_seconds = 0.0;
};

struct Prediction {
  Eigen::VectorXd mean;
  Eigen::VectorXd var;
};

// Per-shard posterior: a single GpFit or a finite mixture of GpFits
// (the tau-grid marginalisation of a hierarchical prior).
class LocalPosterior {
 public:
  LocalPosterior() = default;
  explicit LocalPosterior(GpFit fit, int shard_id = -1);
  LocalPosterior(std::vector<GpFit> components, std::vector<double> weights, int shard_id = -1);

  const std::vector<GpFit>& components() const { return components_; }
  const std::vector<double>& weights() const { return weights_; }
  const GpFit& primary() const { return components_.front(); }
  bool is_mixture() const { return components_.size() > 1; }

  int shard_id() const { return shard_id_; }
  const std::optional<Region>& region() const { return region_; }
  void set_region(Region region) { region_ = std::move(region); }

  double fit_seconds() const { return fit_seconds_; }
  void add_fit_seconds(double s) { fit_seconds_ += s; }

 private:
  std::vector<GpFit> components_;
  std::vector<double> weights_;
  int shard_id_ = -1;
  std::optional<Region> region_;
  double fit_seconds_ = 0.0;
};

// Condition the zero-mean prior on a shard. An empty shard yields a
// prior-only posterior.
GpFit fit_exact(const KernelConfig& cfg, double noise_var, const Dataset& shard,
                int shard_id = -1);

LocalPosterior fit(const KernelConfig& cfg, double noise_var, const Dataset& shard,
                   int shard_id = -1);

// Exact rank-|extra| update of the Cholesky factor: equivalent to refitting
// on train ∪ extra.
GpFit extend(const GpFit& post, const Dataset& extra);

Prediction predict(const GpFit& post, const Points& query);

// Mixture predictive: mean = sum w_j mu_j, var = sum w_j (s_j^2 + mu_j^2) - mean^2.
Prediction predict(const LocalPosterior& post, const Points& query);

// Joint predictive covariance on `query` (no jitter).
Eigen::MatrixXd predictive_covariance(const GpFit& post, const Points& query);

// One sample path on the query points. Mixtures first pick a component by weight.
Eigen::VectorXd draw(const GpFit& post, const Points& query, Rng& rng);
Eigen::VectorXd draw(const LocalPosterior& post, const Points& query, Rng& rng);

// Draw from N(mean, cov); cov is factorized with escalating jitter, falling
// back to a clamped eigendecomposition for numerically singular matrices.
Eigen::VectorXd sample_mvn(const Eigen::VectorXd& mean, const Eigen::MatrixXd& cov, Rng& rng,
                           double jitter_base);

double log_marginal_likelihood(const KernelConfig& cfg, double noise_var, const Dataset& shard);

// Same quantity read off an existing factorization.
double log_marginal_likelihood(const GpFit& post);

constexpr Eigen::Index kMaxDrawGrid = 10000;

}  // namespace dgp

#endif  // DGP_GP_HPP_
