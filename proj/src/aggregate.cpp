#include "dgp/aggregate.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "dgp/errors.hpp"

namespace dgp {

namespace {

// Writes normalised weights into w (length m). x must be covered by the
// partition for Glue; callers validate that before parallel regions.
void fill_weights(const AggregatedPosterior& agg, const Eigen::Ref<const Eigen::RowVectorXd>& x,
                  const double* vars, double* w) {
  const int m = agg.m();
  switch (agg.rule()) {
    case AggregationRule::ConsensusAvg:
      std::fill(w, w + m, 1.0 / m);
      return;
    case AggregationRule::Glue: {
      std::fill(w, w + m, 0.0);
      w[agg.partition().owner(x)] = 1.0;
      return;
    }
    case AggregationRule::InvVar:
    case AggregationRule::ExpWeight: {
      const bool exp_rule = agg.rule() == AggregationRule::ExpWeight;
      const double sharp = agg.rho() * static_cast<double>(m) * static_cast<double>(m);
      double top = -std::numeric_limits<double>::infinity();
      for (int k = 0; k < m; ++k) {
        double lw = -std::log(std::max(vars[k], kVarianceFloor));
        if (exp_rule) lw -= sharp * (x - agg.partition().centers.row(k)).squaredNorm();
        w[k] = lw;
        top = std::max(top, lw);
      }
      double total = 0.0;
      for (int k = 0; k < m; ++k) total += (w[k] = std::exp(w[k] - top));
      for (int k = 0; k < m; ++k) w[k] /= total;
      return;
    }
  }
}

void check_query(const AggregatedPosterior& agg, const Points& query) {
  if (agg.rule() != AggregationRule::Glue) return;
  for (Eigen::Index i = 0; i < query.rows(); ++i) (void)agg.partition().owner(query.row(i));
}

}  // namespace

std::string to_string(AggregationRule rule) {
  switch (rule) {
    case AggregationRule::ConsensusAvg:
      return "consensus";
    case AggregationRule::Glue:
      return "glue";
    case AggregationRule::InvVar:
      return "invvar";
    case AggregationRule::ExpWeight:
      return "expweight";
  }
  return "unknown";
}

AggregatedPosterior::AggregatedPosterior(std::vector<LocalPosterior> locals, AggregationRule rule,
                                         Partition partition, double rho)
    : locals_(std::move(locals)), rule_(rule), partition_(std::move(partition)), rho_(rho) {
  if (locals_.empty()) throw ContractError("aggregation needs at least one local posterior");
  if (static_cast<int>(locals_.size()) != partition_.m)
    throw ContractError("one local posterior per shard required");
  if (!(rho_ > 0.0)) throw DomainError("rho must be positive");
  const bool spatial_rule = rule_ != AggregationRule::ConsensusAvg;
  if (spatial_rule != partition_.spatial())
    throw ContractError(to_string(rule_) + " aggregation requires a " +
                        (spatial_rule ? "spatial" : "random") + " partition");
}

AggregatedPosterior AggregatedPosterior::with_rule(AggregationRule rule) const {
  return AggregatedPosterior(locals_, rule, partition_, rho_);
}

std::vector<double> weights_from_variances(const AggregatedPosterior& agg,
                                           const Eigen::Ref<const Eigen::RowVectorXd>& x,
                                           const Eigen::Ref<const Eigen::VectorXd>& local_vars) {
  if (local_vars.size() != agg.m()) throw ContractError("one variance per local posterior required");
  if (agg.rule() == AggregationRule::Glue) (void)agg.partition().owner(x);
  std::vector<double> w(agg.m());
  fill_weights(agg, x, local_vars.data(), w.data());
  return w;
}

std::vector<double> weights_at(const AggregatedPosterior& agg,
                               const Eigen::Ref<const Eigen::RowVectorXd>& x) {
  Eigen::VectorXd vars(agg.m());
  const bool needs_vars =
      agg.rule() == AggregationRule::InvVar || agg.rule() == AggregationRule::ExpWeight;
  if (needs_vars) {
    const Points q = x;
    for (int k = 0; k < agg.m(); ++k) vars[k] = predict(agg.locals()[k], q).var[0];
  } else {
    vars.setOnes();
  }
  return weights_from_variances(agg, x, vars);
}

LocalPredictions predict_locals(const AggregatedPosterior& agg, const Points& query) {
  LocalPredictions lp;
  lp.mean.resize(agg.m(), query.rows());
  lp.var.resize(agg.m(), query.rows());
  for (int k = 0; k < agg.m(); ++k) {
    const Prediction p = predict(agg.locals()[k], query);
    lp.mean.row(k) = p.mean.transpose();
    lp.var.row(k) = p.var.transpose();
  }
  return lp;
}

Prediction combine(const AggregatedPosterior& agg, const Points& query, const LocalPredictions& lp) {
  check_query(agg, query);
  const Eigen::Index q = query.rows();
  const int m = agg.m();
  Prediction out;
  out.mean.resize(q);
  out.var.resize(q);
#pragma omp parallel
  {
    std::vector<double> w(m);
#pragma omp for schedule(static)
    for (Eigen::Index i = 0; i < q; ++i) {
      fill_weights(agg, query.row(i), lp.var.col(i).data(), w.data());
      double mu = 0.0, v = 0.0;
      for (int k = 0; k < m; ++k) {
        mu += w[k] * lp.mean(k, i);
        v += w[k] * w[k] * lp.var(k, i);
      }
      out.mean[i] = mu;
      out.var[i] = v;
    }
  }
  return out;
}

Prediction agg_mean_var(const AggregatedPosterior& agg, const Points& query) {
  check_query(agg, query);
  return combine(agg, query, predict_locals(agg, query));
}

Eigen::VectorXd agg_draw(const AggregatedPosterior& agg, const Points& grid, Rng& rng) {
  check_query(agg, grid);
  const std::uint64_t base = rng();
  const int m = agg.m();
  Eigen::MatrixXd draws(m, grid.rows());
  const LocalPredictions lp = predict_locals(agg, grid);
  for (int k = 0; k < m; ++k) {
    Rng local = make_rng(base, {static_cast<std::uint64_t>(k)});
    draws.row(k) = draw(agg.locals()[k], grid, local).transpose();
  }
  Eigen::VectorXd f(grid.rows());
  std::vector<double> w(m);
  for (Eigen::Index i = 0; i < grid.rows(); ++i) {
    fill_weights(agg, grid.row(i), lp.var.col(i).data(), w.data());
    double v = 0.0;
    for (int k = 0; k < m; ++k) v += w[k] * draws(k, i);
    f[i] = v;
  }
  return f;
}

KernelConfig consensus_prepare(const KernelConfig& cfg, int m) {
  if (m < 1) throw ContractError("number of shards must be at least 1");
  KernelConfig out = cfg;
  out.signal_var *= m;
  return out;
}

namespace serial {

Prediction combine(const AggregatedPosterior& agg, const Points& query, const LocalPredictions& lp) {
  Prediction out;
  out.mean.resize(query.rows());
  out.var.resize(query.rows());
  for (Eigen::Index i = 0; i < query.rows(); ++i) {
    const Eigen::VectorXd vars = lp.var.col(i);
    const std::vector<double> w = weights_from_variances(agg, query.row(i), vars);
    double mu = 0.0, v = 0.0;
    for (int k = 0; k < agg.m(); ++k) {
      mu += w[k] * lp.mean(k, i);
      v += w[k] * w[k] * lp.var(k, i);
    }
    out.mean[i] = mu;
    out.var[i] = v;
  }
  return out;
}

}  // namespace serial

}  // namespace dgp
