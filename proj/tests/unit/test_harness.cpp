#include <cmath>
#include <fstream>
#include <sstream>

#include <doctest.h>

#include "dgp/errors.hpp"
#include "dgp/harness.hpp"
#include "dgp/selftest.hpp"
#include "helpers.hpp"

using namespace dgp;

namespace {

ExperimentConfig small(std::vector<Method> methods, long n, int m) {
  ExperimentConfig cfg;
  cfg.methods = std::move(methods);
  cfg.n = n;
  cfg.m = m;
  cfg.record_timing = false;
  cfg.validate();
  return cfg;
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// 8 features, target = a * feature + b + noise.
void write_flight_fixture(const std::filesystem::path& path, int rows, double slope, double noise_sd,
                          std::uint64_t seed) {
  std::ofstream f(path);
  f << "Month,DayofMonth,DayOfWeek,DepTime,ArrTime,AirTime,Distance,PlaneAge,ArrDelay\n";
  Rng g(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::normal_distribution<double> z(0.0, noise_sd);
  for (int i = 0; i < rows; ++i) {
    const double dist = 100 + 2000 * u(g);
    f << 1 + int(12 * u(g)) << ',' << 1 + int(28 * u(g)) << ',' << 1 + int(7 * u(g)) << ','
      << int(2400 * u(g)) << ',' << int(2400 * u(g)) << ',' << 30 + 300 * u(g) << ',' << dist << ','
      << int(30 * u(g)) << ',' << 10.0 + slope * dist + z(g) << '\n';
  }
}

}  // namespace

TEST_SUITE("harness") {

TEST_CASE("method and mode names") {
  CHECK(parse_methods("M4,BM,M4") == std::vector<Method>{Method::M4, Method::BM});
  CHECK(join_methods({Method::BM, Method::M2}) == "BM,M2");
  CHECK_THROWS_AS(parse_method("M5"), UnsupportedParameter);
  CHECK(parse_scale_mode("hier") == ScaleMode::HierarchicalGrid);
  CHECK(to_string(ScaleMode::MMLE) == "mmle");
  ExperimentConfig cfg;
  cfg.kernel = KernelFamily::SquaredExponential;
  cfg.scale_mode = ScaleMode::MMLE;
  CHECK(cfg.scenario() == Scenario::SEAdaptive);
  cfg.m = 0;
  CHECK_THROWS(cfg.validate());
}

TEST_CASE("smoke run and byte-identical reruns") {
  const ExperimentConfig cfg = small({Method::BM}, 50, 1);
  const ExperimentResult a = run_experiment(cfg);
  REQUIRE(a.report.rows().size() == 1);
  CHECK(a.report.summary().size() == 1);
  CHECK(std::isfinite(a.report.rows()[0].l2_error));
  CHECK(a.report.detail_csv() == run_experiment(cfg).report.detail_csv());
}

TEST_CASE("thread count and method order do not change results") {
  ExperimentConfig cfg = small({Method::BM, Method::M1, Method::M2, Method::M3, Method::M4}, 200, 4);
  cfg.reps = 3;
  const std::string one = run_experiment(cfg).report.detail_csv();
  cfg.threads = 3;
  CHECK(run_experiment(cfg).report.detail_csv() == one);

  ExperimentConfig bm_only = small({Method::M4, Method::BM}, 200, 4);
  bm_only.reps = 3;
  const ExperimentResult r = run_experiment(bm_only);
  const ExperimentResult full = run_experiment(cfg);
  for (int rep = 0; rep < 3; ++rep) {
    CHECK(r.report.rows()[2 * rep].method == "BM");
    CHECK(r.report.rows()[2 * rep].l2_error == full.report.rows()[5 * rep].l2_error);
    CHECK(r.report.rows()[2 * rep + 1].l2_error == full.report.rows()[5 * rep + 4].l2_error);
  }
}

TEST_CASE("one shard reproduces the benchmark") {
  for (ScaleMode mode : {ScaleMode::FixedOptimal, ScaleMode::MMLE}) {
    ExperimentConfig cfg = small({Method::BM, Method::M2}, 120, 1);
    cfg.scale_mode = mode;
    cfg.reps = 2;
    const ExperimentResult r = run_experiment(cfg);
    for (int rep = 0; rep < 2; ++rep) {
      CHECK(std::abs(r.report.rows()[2 * rep].l2_error - r.report.rows()[2 * rep + 1].l2_error) < 1e-8);
      CHECK(std::abs(r.report.rows()[2 * rep].radius - r.report.rows()[2 * rep + 1].radius) < 1e-8);
    }
  }
}

TEST_CASE("hierarchical and integrated BM scenarios run") {
  ExperimentConfig cfg = small({Method::M2, Method::M4}, 200, 4);
  cfg.scale_mode = ScaleMode::HierarchicalGrid;
  cfg.tau_grid.points = 8;
  const ExperimentResult h = run_experiment(cfg);
  CHECK(h.failed == 0);
  for (const ReportRow& row : h.report.rows()) CHECK(std::isfinite(row.l2_error));

  ExperimentConfig ibm = small({Method::BM, Method::M2}, 200, 4);
  ibm.kernel = KernelFamily::IntegratedBM;
  ibm.regularity = 1;
  const ExperimentResult b = run_experiment(ibm);
  CHECK(b.failed == 0);
  CHECK(b.report.rows()[0].l2_error < 0.5);
}

TEST_CASE("BM cap") {
  ExperimentConfig cfg = small({Method::BM, Method::M2}, 100, 2);
  cfg.max_bm_n = 50;
  const ExperimentResult r = run_experiment(cfg);
  CHECK(r.bm_skipped);
  REQUIRE(r.report.rows().size() == 1);
  CHECK(r.report.rows()[0].method == "M2");
}

TEST_CASE("output files") {
  test::TempDir dir("out");
  const ExperimentConfig cfg = small({Method::M2}, 80, 2);
  write_experiment_outputs(run_experiment(cfg), "n=80\n", dir.path);
  CHECK(slurp(dir.path / "config.resolved") == "n=80\n");
  CHECK(slurp(dir.path / "detail.csv").rfind("method,n,m,rep", 0) == 0);
  CHECK(std::filesystem::exists(dir.path / "summary.csv"));
  // Missing directories are created; a regular file in the way is an I/O error.
  write_experiment_outputs(run_experiment(cfg), "", dir.path / "nested" / "dir");
  CHECK(std::filesystem::exists(dir.path / "nested" / "dir" / "summary.csv"));
  CHECK_THROWS_AS(write_experiment_outputs(run_experiment(cfg), "", dir.path / "detail.csv" / "sub"), IoError);
}

TEST_CASE("plot data") {
  test::TempDir dir("plot");
  const TrueFunction tf(1.5, 1.0);
  const Points grid = unit_grid(401);
  Prediction zero{Eigen::VectorXd::LinSpaced(401, 0, 1), Eigen::VectorXd::Zero(401)};
  emit_plot_data(zero, tf, grid, dir.path / "z.csv");
  std::ifstream in(dir.path / "z.csv");
  std::string line;
  std::getline(in, line);
  CHECK(line == "x,f0,mean,lower,upper");
  int rows = 0;
  while (std::getline(in, line)) {
    double x, f0, mean, lo, hi;
    char c;
    std::istringstream ss(line);
    ss >> x >> c >> f0 >> c >> mean >> c >> lo >> c >> hi;
    CHECK(lo == mean);
    CHECK(hi == mean);
    CHECK(std::abs(f0 - tf(x)) < 1e-12);
    ++rows;
  }
  CHECK(rows == 401);

  const ExperimentConfig cfg = small({Method::M4}, 100, 3);
  const auto preds = replication_predictions(cfg, 0);
  const Prediction& p = preds.at(Method::M4);
  emit_plot_data(p, tf, grid, dir.path / "m4.csv");
  std::ifstream in4(dir.path / "m4.csv");
  std::getline(in4, line);
  for (Eigen::Index i = 0; std::getline(in4, line); ++i) {
    double x, f0, mean, lo, hi;
    char c;
    std::istringstream ss(line);
    ss >> x >> c >> f0 >> c >> mean >> c >> lo >> c >> hi;
    const double half = 1.96 * std::sqrt(p.var[i]);
    CHECK(std::abs((hi - mean) - half) < 1e-12);
    CHECK(std::abs((mean - lo) - half) < 1e-12);
  }
  CHECK_THROWS_AS(emit_plot_data(zero, tf, grid, dir.path / "no" / "x.csv"), IoError);
}

TEST_CASE("flight fixtures") {
  test::TempDir dir("flightrun");
  ExperimentConfig cfg = small({Method::M1, Method::M2, Method::M3, Method::M4}, 400, 4);
  cfg.scale_mode = ScaleMode::MMLE;
  FlightConfig fc;
  fc.train_size = 400;
  fc.test_size = 100;
  fc.chunk = 33;

  fc.data_path = dir.path / "smoke.csv";
  write_flight_fixture(fc.data_path, 500, 0.0, 5.0, 1);
  const FlightReport smoke = run_flight(cfg, fc);
  REQUIRE(smoke.rows.size() == 4);
  for (const FlightRow& r : smoke.rows) {
    CHECK(std::isfinite(r.rmse));
    // Constant target: nothing to learn beyond the mean, so RMSE ~ noise sd.
    CHECK(r.rmse == doctest::Approx(smoke.baseline_rmse).epsilon(0.1));
  }
  CHECK(smoke.baseline_rmse == doctest::Approx(5.0).epsilon(0.2));

  fc.data_path = dir.path / "linear.csv";
  write_flight_fixture(fc.data_path, 500, 0.05, 2.0, 2);
  cfg.methods = {Method::M2};
  const FlightReport lin = run_flight(cfg, fc);
  CHECK(lin.rows[0].rmse < 0.5 * lin.baseline_rmse);
  CHECK(lin.csv().rfind("method,", 0) == 0);
}

TEST_CASE("self-test passes") {
  std::ostringstream os;
  CHECK(run_selftest(os, 3) == 0);
  CHECK(os.str().find("FAIL") == std::string::npos);
}

}
