#include <cmath>

#include <doctest.h>

#include "dgp/metrics.hpp"
#include "helpers.hpp"

using namespace dgp;

TEST_SUITE("metrics") {

TEST_CASE("L2 error") {
  const TrueFunction tf(1.5, 1.0);
  const Points g = unit_grid(401);
  const Eigen::VectorXd f0 = tf(g);
  CHECK(l2_error(f0, tf, g) == 0.0);
  CHECK(l2_error(f0.array() + 0.1, tf, g) == doctest::Approx(0.1).epsilon(1e-12));
  const Points g1001 = unit_grid(1001);
  CHECK(std::abs(l2_error(tf(g1001) + g1001.col(0), tf, g1001) - 1.0 / std::sqrt(3.0)) < 1e-4);
  // Refinement stability for a smooth mean.
  auto smooth = [](const Points& x) { return Eigen::VectorXd((3.0 * x.col(0).array()).sin() * 0.2); };
  CHECK(std::abs(l2_error(smooth(g), tf, g) - l2_error(smooth(g1001), tf, g1001)) < 1e-3);
}

TEST_CASE("credible radius") {
  const Points g = unit_grid(401);
  CHECK(credible_radius(Eigen::VectorXd::Constant(401, 0.01), g) == doctest::Approx(0.2).epsilon(1e-12));
  CHECK(credible_radius(Eigen::VectorXd::Zero(401), g) == 0.0);
  const Points g1001 = unit_grid(1001);
  CHECK(std::abs(credible_radius(g1001.col(0), g1001) - std::sqrt(2.0)) < 1e-3);
  // Monotone under pointwise domination.
  const Eigen::VectorXd v = g.col(0).array().square();
  CHECK(credible_radius(v, g) <= credible_radius(v.array() + 1e-3, g));
}

TEST_CASE("coverage and RMSE") {
  CHECK(covered(0.1, 0.2) == 1);
  CHECK(covered(0.2, 0.1) == 0);
  CHECK(covered(0.2, 0.2) == 0);
  const Eigen::Vector2d t(3.0, 4.0);
  CHECK(rmse(t, t) == 0.0);
  CHECK(rmse(t.array() + 2.0, t) == doctest::Approx(2.0));
  CHECK(rmse(Eigen::Vector2d::Zero(), t) == doctest::Approx(3.5355339059).epsilon(1e-10));
}

TEST_CASE("summary rows equal statistics recomputed from the detail rows") {
  ExperimentReport r;
  const double l2[] = {0.1, 0.13, 0.2, 0.07};
  const double rad[] = {0.2, 0.1, 0.25, 0.3};
  for (int i = 0; i < 4; ++i) r.add({"M2", 100, 5, i, l2[i], rad[i], covered(l2[i], rad[i]), 0.5 + i});
  r.add({"M2", 100, 5, 4, 0.0, 0.0, 0, 0.0, true});
  const std::vector<SummaryRow> s = r.summary();
  REQUIRE(s.size() == 1);
  CHECK(s[0].rows == 5);
  CHECK(s[0].failed == 1);
  CHECK(s[0].l2_mean == doctest::Approx(0.125).epsilon(1e-15));
  CHECK(s[0].coverage == doctest::Approx(0.75));
  const double sd = std::sqrt((0.025 * 0.025 + 0.005 * 0.005 + 0.075 * 0.075 + 0.055 * 0.055) / 3.0);
  CHECK(s[0].l2_sd == doctest::Approx(sd).epsilon(1e-12));
  CHECK(s[0].time_mean == doctest::Approx(2.0));
  CHECK(r.failed_rows() == 1);
  CHECK(r.detail_csv().rfind("method,n,m,rep,l2_error,radius,covered,fit_seconds\n", 0) == 0);
}

}
