#ifndef DGP_METRICS_HPP_
#define DGP_METRICS_HPP_

#include <filesystem>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "dgp/data.hpp"
#include "dgp/gp.hpp"

namespace dgp {

// Trapezoid rule on a uniform grid over [0, 1].
double trapezoid_unit(const Eigen::Ref<const Eigen::VectorXd>& values);

// sqrt( int_0^1 (mean - f0)^2 ), grid uniform on [0, 1] with >= 101 points.
double l2_error(const Eigen::Ref<const Eigen::VectorXd>& mean_on_grid, const TrueFunction& tf,
                const Points& grid);
double l2_error(const Eigen::Ref<const Eigen::VectorXd>& mean_on_grid,
                const Eigen::Ref<const Eigen::VectorXd>& truth_on_grid);

// 2 sqrt( int_0^1 s^2(x) dx ).
double credible_radius(const Eigen::Ref<const Eigen::VectorXd>& vars_on_grid, const Points& grid);

// Strict: the truth is inside the ball only when l2 < radius.
inline int covered(double l2_err, double radius) { return l2_err < radius ? 1 : 0; }

double rmse(const Eigen::Ref<const Eigen::VectorXd>& pred, const Eigen::Ref<const Eigen::VectorXd>& targets);

struct ReportRow {
  std::string method;
  long n = 0;
  int m = 1;
  int rep = 0;
  double l2_error = 0.0;
  double radius = 0.0;
  int covered = 0;
  double fit_seconds = 0.0;
  bool failed = false;
};

struct SummaryRow {
  std::string method;
  long n = 0;
  int m = 1;
  double l2_mean = 0.0, l2_sd = 0.0;
  double radius_mean = 0.0, radius_sd = 0.0;
  double coverage = 0.0;
  double time_mean = 0.0, time_sd = 0.0;
  int rows = 0;    // all rows of the group, failed ones included
  int failed = 0;
};

class ExperimentReport {
 public:
  void add(ReportRow row) { rows_.push_back(std::move(row)); }
  const std::vector<ReportRow>& rows() const { return rows_; }

  // One row per (method, n, m) in first-appearance order; failed rows are
  // counted but excluded from the statistics. Standard deviations use n - 1.
  std::vector<SummaryRow> summary() const;
  int failed_rows() const;

  void write_detail_csv(const std::filesystem::path& path) const;
  void write_summary_csv(const std::filesystem::path& path) const;

  std::string detail_csv() const;
  std::string summary_csv() const;

 private:
  std::vector<ReportRow> rows_;
};

}  // namespace dgp

#endif  // DGP_METRICS_HPP_
