#ifndef DGP_DATA_HPP_
#define DGP_DATA_HPP_

#include <array>
#include <complex>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "dgp/gp.hpp"
#include "dgp/rng.hpp"

namespace dgp {

// f0(x) = sum_{i >= 4} c i^{-1/2-beta} sin(i) psi_i(x), psi_i(t) = sqrt(2) cos(pi (i - 1/2) t).
//
// With truncation == 0 the infinite series is evaluated in closed form
// through periodic polylogarithms, which is exact to rounding for every
// beta > 1/2. A positive truncation sums the terms i = 4..N_max directly.
class TrueFunction {
 public:
  TrueFunction(double c, double beta, long truncation = 0);

  double c() const { return c_; }
  double beta() const { return beta_; }
  long truncation() const { return truncation_; }

  double operator()(double x) const;
  Eigen::VectorXd operator()(const Points& xs) const;

  // Basis coefficient f_{0,i}; zero for i <= 3.
  double coefficient(long i) const;

 private:
  double series_exact(double x) const;
  double series_truncated(double x, long n_max) const;

  double c_;
  double beta_;
  long truncation_;
  double s_;                     // 1/2 + beta
  std::vector<double> taylor_;   // zeta(s - k) / k!
};

double eval_true_function(const TrueFunction& tf, double x);

// Li_s(e^{i theta}) for real s > 0 and real theta; s = 1 requires theta != 0 mod 2 pi.
// `taylor` may carry precomputed zeta(s - k)/k! coefficients.
std::complex<double> polylog_unit_circle(double s, double theta,
                                         const std::vector<double>* taylor = nullptr);

// Y_i = f0(X_i) + Z_i with X_i ~ U(0,1), Z_i ~ N(0, sigma^2).
Dataset generate_synthetic(const TrueFunction& tf, Eigen::Index n, double sigma, Rng& rng);

// CSV with header `x,y`, 17 significant digits.
void save_dataset_csv(const Dataset& data, const std::filesystem::path& path);
Dataset load_dataset_csv(const std::filesystem::path& path);

// Feature slots of the airline-delay regression, in input order.
inline constexpr std::array<const char*, 8> kFlightFeatures = {
    "age", "distance", "airtime", "dep_time", "arr_time", "month", "day_of_week", "day_of_month"};

// Maps each feature slot (and `target`) to a CSV column name.
struct FlightSchema {
  std::map<std::string, std::string> columns;

  static FlightSchema defaults();
  // Flat key=value text, '#' comments; keys override the defaults.
  static FlightSchema load(const std::filesystem::path& path);
};

struct FlightData {
  Dataset train;
  Dataset test;
  long rows_read = 0;
  long rows_dropped = 0;
  Eigen::RowVectorXd feature_mean;
  Eigen::RowVectorXd feature_sd;
};

// Parses the flight CSV, drops malformed rows, draws a random disjoint
// train/test split and standardises features with train statistics.
FlightData ingest_flights(const std::filesystem::path& path, const FlightSchema& schema,
                          Eigen::Index train_size, Eigen::Index test_size, Rng& rng);

}  // namespace dgp

#endif  // DGP_DATA_HPP_
