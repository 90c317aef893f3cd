#include <cmath>
#include <numbers>
#include <numeric>

#include <doctest.h>

#include "dgp/errors.hpp"
#include "dgp/gp.hpp"
#include "dgp/linalg.hpp"
#include "helpers.hpp"

using namespace dgp;

namespace {

// Posterior and evidence through an explicit inverse; independent of the
// Cholesky code path under test.
struct DenseOracle {
  Eigen::VectorXd mean, var;
  double log_evidence;
};

DenseOracle dense(const KernelConfig& cfg, double noise, const Dataset& d, const Points& q) {
  Eigen::MatrixXd k = gram_matrix(cfg, d.x);
  k.diagonal().array() += noise;
  const Eigen::MatrixXd kinv = k.inverse();
  const Eigen::MatrixXd ks = gram_matrix(cfg, d.x, q);
  DenseOracle o;
  o.mean = ks.transpose() * kinv * d.y;
  o.var = gram_matrix(cfg, q).diagonal() - (ks.transpose() * kinv * ks).diagonal();
  o.log_evidence = -0.5 * d.y.dot(kinv * d.y) - 0.5 * std::log(k.determinant()) -
                   0.5 * static_cast<double>(d.size()) * std::log(2 * std::numbers::pi);
  return o;
}

}  // namespace

TEST_SUITE("gp") {

TEST_CASE("one observation conditioned by hand") {
  const GpFit post = fit_exact(KernelConfig::squared_exponential(1.0), 1.0,
                               Dataset::one_dimensional({0.0}, {2.0}));
  Points q(1, 1);
  q << 0.0;
  const Prediction p = predict(post, q);
  CHECK(p.mean[0] == doctest::Approx(1.0).epsilon(1e-9));
  CHECK(p.var[0] == doctest::Approx(0.5).epsilon(1e-9));
}

TEST_CASE("interpolation limit at a training point") {
  const Dataset d = Dataset::one_dimensional({0.1, 0.5, 0.8}, {1.0, -2.0, 0.5});
  const GpFit post = fit_exact(KernelConfig::matern(2.5, 3.0), 1e-8, d);
  const Prediction p = predict(post, d.x);
  for (int i = 0; i < 3; ++i) {
    CHECK(std::abs(p.mean[i] - d.y[i]) < 1e-6);
    CHECK(p.var[i] < 1e-6);
  }
}

TEST_CASE("dense-inverse oracle on random problems") {
  const Points q = unit_grid(7);
  for (int trial = 0; trial < 20; ++trial) {
    const Dataset d = test::random_dataset(5 + trial, 300 + trial);
    const KernelConfig cfg = trial % 2 ? KernelConfig::matern(1.5, 2.0 + trial, 1.3)
                                       : KernelConfig::squared_exponential(3.0 + trial, 0.7);
    const double noise = 0.05 + 0.01 * trial;
    const DenseOracle o = dense(cfg, noise, d, q);
    const GpFit post = fit_exact(cfg, noise, d);
    const Prediction p = predict(post, q);
    CHECK((p.mean - o.mean).cwiseAbs().maxCoeff() < 1e-8);
    CHECK((p.var - o.var).cwiseAbs().maxCoeff() < 1e-8);
    CHECK(std::abs(log_marginal_likelihood(cfg, noise, d) - o.log_evidence) < 1e-8);
    CHECK(std::abs(log_marginal_likelihood(post) - o.log_evidence) < 1e-8);
    const Eigen::MatrixXd cov = predictive_covariance(post, q);
    CHECK((cov.diagonal() - o.var).cwiseAbs().maxCoeff() < 1e-8);
  }
}

TEST_CASE("log evidence of a single zero observation") {
  const Dataset d = Dataset::one_dimensional({0.4}, {0.0});
  const double expected = -0.5 * std::log(2.0) - 0.5 * std::log(2 * std::numbers::pi);
  CHECK(log_marginal_likelihood(KernelConfig::matern(2.5, 1.0), 1.0, d) ==
        doctest::Approx(expected).epsilon(1e-9));
  CHECK(expected == doctest::Approx(-1.26551).epsilon(1e-5));
}

TEST_CASE("evidence of independent shards adds up") {
  // Far-apart points under a short-range kernel are independent.
  const KernelConfig k = KernelConfig::matern(0.5, 200.0);
  const Dataset a = Dataset::one_dimensional({0.0, 0.01}, {0.3, -0.4});
  const Dataset b = Dataset::one_dimensional({0.9, 0.91}, {1.0, 0.2});
  const Dataset ab = Dataset::one_dimensional({0.0, 0.01, 0.9, 0.91}, {0.3, -0.4, 1.0, 0.2});
  CHECK(log_marginal_likelihood(k, 0.5, ab) ==
        doctest::Approx(log_marginal_likelihood(k, 0.5, a) + log_marginal_likelihood(k, 0.5, b)).epsilon(1e-12));
}

TEST_CASE("evidence peaks near the generating hyperparameters") {
  Rng rng(3);
  const Points x = unit_grid(150);
  Eigen::MatrixXd k = gram_matrix(KernelConfig::squared_exponential(8.0), x);
  k.diagonal().array() += 0.04;
  Dataset d{x, sample_mvn(Eigen::VectorXd::Zero(150), k, rng, 1e-10), "mvn"};
  double best = -1e300, best_tau = 0;
  for (double tau : {1.0, 2.0, 4.0, 8.0, 16.0, 32.0, 64.0}) {
    const double le = log_marginal_likelihood(KernelConfig::squared_exponential(tau), 0.04, d);
    if (le > best) best = le, best_tau = tau;
  }
  CHECK(best_tau >= 4.0);
  CHECK(best_tau <= 16.0);
}

TEST_CASE("posterior variance is below the prior and order does not matter") {
  const Dataset d = test::random_dataset(25, 9);
  const KernelConfig k = KernelConfig::matern(2.5, 5.0, 2.0);
  const Points q = unit_grid(101);
  const Prediction p = predict(fit_exact(k, 0.1, d), q);
  CHECK((p.var.array() <= 2.0 + 1e-10).all());
  CHECK((p.var.array() >= 0.0).all());

  std::vector<Eigen::Index> perm(25);
  std::iota(perm.begin(), perm.end(), 0);
  std::reverse(perm.begin(), perm.end());
  std::swap(perm[3], perm[17]);
  Dataset shuffled = d;
  for (Eigen::Index i = 0; i < 25; ++i) {
    shuffled.x.row(i) = d.x.row(perm[i]);
    shuffled.y[i] = d.y[perm[i]];
  }
  const Prediction ps = predict(fit_exact(k, 0.1, shuffled), q);
  CHECK((p.mean - ps.mean).cwiseAbs().maxCoeff() < 1e-10);
  CHECK((p.var - ps.var).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("exact update equals the joint fit") {
  const Dataset all = test::random_dataset(20, 21);
  Dataset a{all.x.topRows(12), all.y.head(12), "a"}, b{all.x.bottomRows(8), all.y.tail(8), "b"};
  const KernelConfig k = KernelConfig::squared_exponential(6.0);
  const GpFit joint = fit_exact(k, 0.2, all);
  const GpFit updated = extend(fit_exact(k, 0.2, a), b);
  const Points q = unit_grid(51);
  const Prediction pj = predict(joint, q), pu = predict(updated, q);
  CHECK((pj.mean - pu.mean).cwiseAbs().maxCoeff() < 1e-8);
  CHECK((pj.var - pu.var).cwiseAbs().maxCoeff() < 1e-8);
  CHECK(log_marginal_likelihood(updated) == doctest::Approx(log_marginal_likelihood(joint)).epsilon(1e-10));
  Dataset empty;
  empty.x.resize(0, 1);
  const GpFit from_empty = extend(fit_exact(k, 0.2, empty), all);
  CHECK((predict(from_empty, q).mean - pj.mean).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("empty shard predicts from the prior") {
  Dataset empty;
  empty.x.resize(0, 1);
  const Prediction p = predict(fit_exact(KernelConfig::matern(1.5, 2.0, 3.0), 1.0, empty), unit_grid(5));
  CHECK(p.mean.cwiseAbs().maxCoeff() == 0.0);
  CHECK((p.var.array() == 3.0).all());
}

TEST_CASE("draws reproduce the predictive moments") {
  const Dataset d = test::random_dataset(15, 4);
  const GpFit post = fit_exact(KernelConfig::matern(2.5, 4.0), 0.3, d);
  const Points q = unit_grid(21);
  const Prediction p = predict(post, q);
  Rng rng(99);
  const int draws = 10000;
  Eigen::VectorXd sum = Eigen::VectorXd::Zero(21), sq = Eigen::VectorXd::Zero(21);
  for (int i = 0; i < draws; ++i) {
    const Eigen::VectorXd f = draw(post, q, rng);
    sum += f;
    sq += f.cwiseAbs2();
  }
  const Eigen::VectorXd mean = sum / draws;
  const Eigen::VectorXd var = (sq / draws - mean.cwiseAbs2()) * draws / (draws - 1.0);
  for (Eigen::Index i : {0, 10, 20}) {
    CHECK(std::abs(mean[i] - p.mean[i]) < 4.0 * std::sqrt(p.var[i] / draws));
    CHECK(std::abs(var[i] / p.var[i] - 1.0) < 0.1);
  }
  Rng a(5), b(5);
  CHECK((draw(post, q, a) - draw(post, q, b)).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("zero covariance yields the mean") {
  Rng rng(1);
  const Eigen::VectorXd mu = Eigen::VectorXd::LinSpaced(4, 0.0, 1.0);
  CHECK((sample_mvn(mu, Eigen::MatrixXd::Zero(4, 4), rng, 1e-10) - mu).norm() == 0.0);
  Eigen::MatrixXd rank_one = Eigen::MatrixXd::Ones(4, 4);
  const Eigen::VectorXd f = sample_mvn(mu, rank_one, rng, 1e-10);
  const Eigen::VectorXd diff = f - mu;
  CHECK((diff.array() - diff[0]).abs().maxCoeff() < 1e-3);
}

TEST_CASE("mixture predictive moments") {
  const Dataset d = test::random_dataset(12, 8);
  std::vector<GpFit> comps = {fit_exact(KernelConfig::matern(2.5, 2.0), 0.2, d),
                              fit_exact(KernelConfig::matern(2.5, 9.0), 0.2, d)};
  const LocalPosterior mix(comps, {0.3, 0.7});
  const Points q = unit_grid(11);
  const Prediction a = predict(comps[0], q), b = predict(comps[1], q), m = predict(mix, q);
  const Eigen::VectorXd mean = 0.3 * a.mean + 0.7 * b.mean;
  const Eigen::VectorXd var =
      0.3 * (a.var + a.mean.cwiseAbs2()) + 0.7 * (b.var + b.mean.cwiseAbs2()) - mean.cwiseAbs2();
  CHECK((m.mean - mean).cwiseAbs().maxCoeff() < 1e-12);
  CHECK((m.var - var).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("contract violations") {
  const Dataset d = test::random_dataset(5, 1);
  CHECK_THROWS_AS(fit_exact(KernelConfig::matern(2.5, 1.0), 0.0, d), DomainError);
  Dataset bad = d;
  bad.y[2] = std::nan("");
  CHECK_THROWS_AS(fit_exact(KernelConfig::matern(2.5, 1.0), 1.0, bad), ContractError);
  Rng rng(1);
  CHECK_THROWS_AS(draw(fit_exact(KernelConfig::matern(2.5, 1.0), 1.0, d), unit_grid(10001), rng),
                  ContractError);
}

}

TEST_SUITE("linalg") {

TEST_CASE("Cholesky, triangular solves and inverse") {
  const Eigen::Index n = 120;
  Eigen::MatrixXd a = gram_matrix(KernelConfig::matern(1.5, 10.0), unit_grid(n));
  a.diagonal().array() += 0.3;
  Eigen::MatrixXd l = a;
  REQUIRE(linalg::cholesky_lower(l));
  CHECK((l * l.transpose() - a).norm() < 1e-10 * a.norm());
  CHECK(l.triangularView<Eigen::StrictlyUpper>().toDenseMatrix().norm() == 0.0);
  const Eigen::VectorXd x = Eigen::VectorXd::LinSpaced(n, -1.0, 2.0);
  Eigen::VectorXd b = l * x;
  linalg::solve_lower(l, b);
  CHECK((b - x).norm() < 1e-9);
  b = l.transpose() * x;
  linalg::solve_lower_transposed(l, b);
  CHECK((b - x).norm() < 1e-9);
  Eigen::MatrixXd bm = l * Eigen::MatrixXd::Ones(n, 3);
  linalg::solve_lower(l, bm);
  CHECK((bm.array() - 1.0).abs().maxCoeff() < 1e-9);
  const Eigen::MatrixXd inv = linalg::inverse_from_cholesky(l);
  CHECK((inv * a - Eigen::MatrixXd::Identity(n, n)).norm() < 1e-8);
  CHECK((inv - inv.transpose()).norm() == 0.0);
}

TEST_CASE("indefinite input is reported") {
  Eigen::MatrixXd a(2, 2);
  a << 1.0, 2.0, 2.0, 1.0;
  CHECK_FALSE(linalg::cholesky_lower(a));
}

}
