#include "dgp/metrics.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "dgp/errors.hpp"

namespace dgp {

namespace {

void check_grid(const Points& grid, Eigen::Index values) {
  if (grid.cols() != 1 || grid.rows() != values) throw ContractError("grid/value length mismatch");
  if (grid.rows() < 101) throw ContractError("metric grid needs at least 101 points");
}

struct Moments {
  double mean = 0.0, sd = 0.0;
};

Moments moments(const std::vector<double>& v) {
  Moments m;
  if (v.empty()) return {std::nan(""), std::nan("")};
  for (double x : v) m.mean += x;
  m.mean /= static_cast<double>(v.size());
  if (v.size() > 1) {
    double ss = 0.0;
    for (double x : v) ss += (x - m.mean) * (x - m.mean);
    m.sd = std::sqrt(ss / static_cast<double>(v.size() - 1));
  }
  return m;
}

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

void write_file(const std::filesystem::path& path, const std::string& body) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << body;
  if (!out) throw IoError("write failed for " + path.string());
}

}  // namespace

double trapezoid_unit(const Eigen::Ref<const Eigen::VectorXd>& values) {
  const Eigen::Index g = values.size();
  if (g < 2) throw ContractError("trapezoid rule needs two points");
  const double h = 1.0 / static_cast<double>(g - 1);
  return h * (values.sum() - 0.5 * (values[0] + values[g - 1]));
}

double l2_error(const Eigen::Ref<const Eigen::VectorXd>& mean_on_grid,
                const Eigen::Ref<const Eigen::VectorXd>& truth_on_grid) {
  if (mean_on_grid.size() != truth_on_grid.size()) throw ContractError("length mismatch");
  return std::sqrt(trapezoid_unit((mean_on_grid - truth_on_grid).cwiseAbs2()));
}

double l2_error(const Eigen::Ref<const Eigen::VectorXd>& mean_on_grid, const TrueFunction& tf,
                const Points& grid) {
  check_grid(grid, mean_on_grid.size());
  return l2_error(mean_on_grid, tf(grid));
}

double credible_radius(const Eigen::Ref<const Eigen::VectorXd>& vars_on_grid, const Points& grid) {
  check_grid(grid, vars_on_grid.size());
  if ((vars_on_grid.array() < 0.0).any()) throw ContractError("negative posterior variance");
  return 2.0 * std::sqrt(trapezoid_unit(vars_on_grid));
}

double rmse(const Eigen::Ref<const Eigen::VectorXd>& pred, const Eigen::Ref<const Eigen::VectorXd>& targets) {
  if (pred.size() != targets.size() || pred.size() == 0)
    throw ContractError("rmse needs equal, non-zero lengths");
  return std::sqrt((pred - targets).squaredNorm() / static_cast<double>(pred.size()));
}

std::vector<SummaryRow> ExperimentReport::summary() const {
  std::vector<SummaryRow> out;
  std::vector<std::vector<const ReportRow*>> groups;
  for (const auto& r : rows_) {
    std::size_t g = 0;
    for (; g < out.size(); ++g)
      if (out[g].method == r.method && out[g].n == r.n && out[g].m == r.m) break;
    if (g == out.size()) {
      SummaryRow s;
      s.method = r.method;
      s.n = r.n;
      s.m = r.m;
      out.push_back(s);
      groups.emplace_back();
    }
    groups[g].push_back(&r);
  }
  for (std::size_t g = 0; g < out.size(); ++g) {
    std::vector<double> l2, rad, t;
    double cov = 0.0;
    for (const ReportRow* r : groups[g]) {
      ++out[g].rows;
      if (r->failed) {
        ++out[g].failed;
        continue;
      }
      l2.push_back(r->l2_error);
      rad.push_back(r->radius);
      t.push_back(r->fit_seconds);
      cov += r->covered;
    }
    const Moments ml = moments(l2), mr = moments(rad), mt = moments(t);
    out[g].l2_mean = ml.mean;
    out[g].l2_sd = ml.sd;
    out[g].radius_mean = mr.mean;
    out[g].radius_sd = mr.sd;
    out[g].time_mean = mt.mean;
    out[g].time_sd = mt.sd;
    out[g].coverage = l2.empty() ? std::nan("") : cov / static_cast<double>(l2.size());
  }
  return out;
}

int ExperimentReport::failed_rows() const {
  int f = 0;
  for (const auto& r : rows_) f += r.failed ? 1 : 0;
  return f;
}

std::string ExperimentReport::detail_csv() const {
  std::ostringstream os;
  os << "method,n,m,rep,l2_error,radius,covered,fit_seconds\n";
  for (const auto& r : rows_) {
    os << r.method << ',' << r.n << ',' << r.m << ',' << r.rep << ',';
    if (r.failed) {
      os << "nan,nan,0,nan\n";
    } else {
      os << fmt(r.l2_error) << ',' << fmt(r.radius) << ',' << r.covered << ','
         << fmt(r.fit_seconds) << '\n';
    }
  }
  return os.str();
}

std::string ExperimentReport::summary_csv() const {
  std::ostringstream os;
  os << "method,n,m,l2_mean,l2_sd,radius_mean,radius_sd,coverage,time_mean,time_sd\n";
  for (const auto& s : summary()) {
    os << s.method << ',' << s.n << ',' << s.m << ',' << fmt(s.l2_mean) << ',' << fmt(s.l2_sd)
       << ',' << fmt(s.radius_mean) << ',' << fmt(s.radius_sd) << ',' << fmt(s.coverage) << ','
       << fmt(s.time_mean) << ',' << fmt(s.time_sd) << '\n';
  }
  return os.str();
}

void ExperimentReport::write_detail_csv(const std::filesystem::path& path) const {
  write_file(path, detail_csv());
}

void ExperimentReport::write_summary_csv(const std::filesystem::path& path) const {
  write_file(path, summary_csv());
}

}  // namespace dgp
