#include "dgp/selftest.hpp"

#include <cmath>
#include <functional>
#include <random>
#include <string>

#include "dgp/aggregate.hpp"
#include "dgp/harness.hpp"
#include "dgp/partition.hpp"

namespace dgp {

namespace {

Dataset random_dataset(Eigen::Index n, Rng& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::normal_distribution<double> z(0.0, 1.0);
  Dataset d;
  d.x.resize(n, 1);
  d.y.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) d.x(i, 0) = u(rng);
  for (Eigen::Index i = 0; i < n; ++i) d.y[i] = std::sin(6.0 * d.x(i, 0)) + 0.3 * z(rng);
  return d;
}

double glue_m1_gap(std::uint64_t seed) {
  double worst = 0.0;
  const Points grid = unit_grid(401);
  for (int trial = 0; trial < 3; ++trial) {
    Rng rng = make_rng(seed, {1, static_cast<std::uint64_t>(trial)});
    const Dataset d = random_dataset(60, rng);
    for (const KernelConfig& kc :
         {KernelConfig::matern(2.5, 3.0), KernelConfig::squared_exponential(4.0)}) {
      const Prediction full = predict(fit(kc, 0.1, d), grid);
      PartitionResult pr = partition_spatial_1d(d, 1);
      std::vector<LocalPosterior> locals{fit(kc, 0.1, pr.shards[0], 0)};
      AggregatedPosterior agg(std::move(locals), AggregationRule::Glue, pr.partition);
      const Prediction p = agg_mean_var(agg, grid);
      worst = std::max({worst, (p.mean - full.mean).cwiseAbs().maxCoeff(),
                        (p.var - full.var).cwiseAbs().maxCoeff()});
    }
  }
  return worst;
}

double weight_sum_gap(std::uint64_t seed) {
  Rng rng = make_rng(seed, {2});
  const Dataset d = random_dataset(80, rng);
  const KernelConfig kc = KernelConfig::matern(1.5, 5.0);
  PartitionResult pr = partition_spatial_1d(d, 4);
  std::vector<LocalPosterior> locals;
  for (int k = 0; k < 4; ++k) {
    locals.push_back(fit(kc, 0.1, pr.shards[static_cast<std::size_t>(k)], k));
    locals.back().set_region(pr.partition.regions[static_cast<std::size_t>(k)]);
  }
  AggregatedPosterior base(std::move(locals), AggregationRule::Glue, pr.partition);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  double worst = 0.0;
  for (AggregationRule rule : {AggregationRule::Glue, AggregationRule::InvVar, AggregationRule::ExpWeight}) {
    const AggregatedPosterior agg = base.with_rule(rule);
    for (int i = 0; i < 100; ++i) {
      Eigen::RowVectorXd x(1);
      x[0] = u(rng);
      double s = 0.0;
      for (double w : weights_at(agg, x)) s += w;
      worst = std::max(worst, std::abs(s - 1.0));
    }
  }
  return worst;
}

double dense_oracle_gap(std::uint64_t seed) {
  Rng rng = make_rng(seed, {3});
  const Dataset d = random_dataset(20, rng);
  const KernelConfig kc = KernelConfig::matern(2.5, 2.0, 1.3);
  const double noise = 0.2;
  const Points q = unit_grid(11);
  const Prediction p = predict(fit_exact(kc, noise, d), q);
  const Eigen::MatrixXd K = gram_matrix(kc, d.x) +
                            (noise + jitter(kc)) * Eigen::MatrixXd::Identity(d.size(), d.size());
  const Eigen::MatrixXd Kinv = K.inverse();
  const Eigen::MatrixXd Ks = gram_matrix(kc, q, d.x);
  const Eigen::VectorXd mean = Ks * Kinv * d.y;
  const Eigen::VectorXd var = (gram_matrix(kc, q) - Ks * Kinv * Ks.transpose()).diagonal();
  return std::max((p.mean - mean).cwiseAbs().maxCoeff(), (p.var - var).cwiseAbs().maxCoeff());
}

bool deterministic_report(std::uint64_t seed) {
  ExperimentConfig cfg;
  cfg.n = 120;
  cfg.m = 4;
  cfg.reps = 2;
  cfg.seed = seed;
  cfg.record_timing = false;
  const std::string a = run_experiment(cfg).report.detail_csv();
  const std::string b = run_experiment(cfg).report.detail_csv();
  return a == b;
}

}  // namespace

int run_selftest(std::ostream& out, std::uint64_t seed) {
  int failures = 0;
  auto check = [&](const std::string& name, const std::function<bool(std::string&)>& body) {
    std::string detail;
    bool ok = false;
    try {
      ok = body(detail);
    } catch (const std::exception& e) {
      detail = std::string("threw: ") + e.what();
    }
    out << (ok ? "PASS " : "FAIL ") << name;
    if (!detail.empty()) out << " (" << detail << ")";
    out << '\n';
    failures += ok ? 0 : 1;
  };
  check("glue with one shard equals the full posterior", [&](std::string& d) {
    const double g = glue_m1_gap(seed);
    d = "max gap " + std::to_string(g);
    return g < 1e-8;
  });
  check("aggregation weights sum to one", [&](std::string& d) {
    const double g = weight_sum_gap(seed);
    d = "max gap " + std::to_string(g);
    return g < 1e-12;
  });
  check("cholesky posterior matches dense inverse", [&](std::string& d) {
    const double g = dense_oracle_gap(seed);
    d = "max gap " + std::to_string(g);
    return g < 1e-8;
  });
  check("identical config gives identical report", [&](std::string&) { return deterministic_report(seed); });
  return failures;
}

}  // namespace dgp
