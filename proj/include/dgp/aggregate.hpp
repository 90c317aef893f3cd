#ifndef DGP_AGGREGATE_HPP_
#define DGP_AGGREGATE_HPP_

#include <string>
#include <string_view>
#include <vector>

#include "dgp/gp.hpp"
#include "dgp/partition.hpp"
#include "dgp/rng.hpp"

namespace dgp {

// ConsensusAvg: 1/m each (random shards, prior inflated by m).
// Glue:         indicator of the owning region.
// InvVar:       1/s_k^2(x), normalised.
// ExpWeight:    exp(-rho m^2 |x - c_k|^2) / s_k^2(x), normalised.
enum class AggregationRule { ConsensusAvg, Glue, InvVar, ExpWeight };

std::string to_string(AggregationRule rule);

// Floor applied to local variances before they are inverted.
constexpr double kVarianceFloor = 1e-12;

class AggregatedPosterior {
 public:
  AggregatedPosterior(std::vector<LocalPosterior> locals, AggregationRule rule,
                      Partition partition, double rho = 1.0);

  const std::vector<LocalPosterior>& locals() const { return locals_; }
  AggregationRule rule() const { return rule_; }
  const Partition& partition() const { return partition_; }
  double rho() const { return rho_; }
  int m() const { return static_cast<int>(locals_.size()); }

  // Same locals, different combination rule (the fits are shared).
  AggregatedPosterior with_rule(AggregationRule rule) const;

 private:
  std::vector<LocalPosterior> locals_;
  AggregationRule rule_;
  Partition partition_;
  double rho_;
};

// Weights given the local predictive variances at x. Result sums to 1.
std::vector<double> weights_from_variances(const AggregatedPosterior& agg,
                                           const Eigen::Ref<const Eigen::RowVectorXd>& x,
                                           const Eigen::Ref<const Eigen::VectorXd>& local_vars);

std::vector<double> weights_at(const AggregatedPosterior& agg,
                               const Eigen::Ref<const Eigen::RowVectorXd>& x);

// Local predictions stacked as m x q matrices.
struct LocalPredictions {
  Eigen::MatrixXd mean;
  Eigen::MatrixXd var;
};
LocalPredictions predict_locals(const AggregatedPosterior& agg, const Points& query);

// mean = sum_k w_k mu_k, var = sum_k w_k^2 s_k^2. OpenMP over query points.
Prediction agg_mean_var(const AggregatedPosterior& agg, const Points& query);

// Combine precomputed local predictions (used to share local work between rules).
Prediction combine(const AggregatedPosterior& agg, const Points& query, const LocalPredictions& lp);

// m independent local draws combined pointwise with the plug-in weights.
Eigen::VectorXd agg_draw(const AggregatedPosterior& agg, const Points& grid, Rng& rng);

// Prior covariance inflated by m, i.e. prior precision scaled by 1/m.
KernelConfig consensus_prepare(const KernelConfig& cfg, int m);

namespace serial {

Prediction combine(const AggregatedPosterior& agg, const Points& query, const LocalPredictions& lp);

}  // namespace serial

}  // namespace dgp

#endif  // DGP_AGGREGATE_HPP_
