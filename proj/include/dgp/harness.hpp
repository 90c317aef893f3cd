#ifndef DGP_HARNESS_HPP_
#define DGP_HARNESS_HPP_

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "dgp/aggregate.hpp"
#include "dgp/data.hpp"
#include "dgp/kernels.hpp"
#include "dgp/metrics.hpp"
#include "dgp/scale_select.hpp"

namespace dgp {

// BM: full-data benchmark. M1: random shards + consensus averaging.
// M2/M3/M4: spatial shards with glue / inverse-variance / exponential weights.
enum class Method { BM = 0, M1 = 1, M2 = 2, M3 = 3, M4 = 4 };

std::string to_string(Method method);
Method parse_method(std::string_view name);
std::vector<Method> parse_methods(std::string_view list);
std::string join_methods(const std::vector<Method>& methods);

enum class Scenario { MaternFixed, MaternAdaptive, SEFixed, SEAdaptive, IBMFixed, IBMAdaptive, Flight };

std::string to_string(Scenario s);
std::string to_string(ScaleMode mode);
ScaleMode parse_scale_mode(std::string_view name);

struct ExperimentConfig {
  KernelFamily kernel = KernelFamily::Matern;
  double regularity = 2.5;  // Matern alpha, or the IBM fold count
  double poly_scale = 1.0;  // IBM amplitude B
  ScaleMode scale_mode = ScaleMode::FixedOptimal;
  long n = 2000;
  int m = 20;
  std::vector<Method> methods = {Method::BM, Method::M1, Method::M2, Method::M3, Method::M4};
  int reps = 1;
  std::uint64_t seed = 1;
  double c = 1.5;
  double beta = 1.0;
  double sigma = 1.0;
  double rho = 1.0;
  double hyper_rate = 1.0;  // D in the hyperprior exponent
  int grid = 401;
  int threads = 1;
  long max_bm_n = 0;  // 0: no cap
  bool record_timing = true;
  MmleSettings search;
  TauGrid tau_grid;

  void validate() const;
  Scenario scenario() const;
};

struct ExperimentResult {
  ExperimentReport report;
  bool bm_skipped = false;
  int failed = 0;
  int attempted = 0;

  // More than 10% failed rows.
  bool failed_too_often() const { return attempted > 0 && failed * 10 > attempted; }
};

// Replications are independent: each derives its streams from
// (seed, replication, method, shard), so the report does not depend on the
// thread schedule. Rows are ordered by (replication, method).
ExperimentResult run_experiment(const ExperimentConfig& cfg);

// Grid predictions of every requested method for one replication.
std::map<Method, Prediction> replication_predictions(const ExperimentConfig& cfg, int rep);

// CSV `x,f0,mean,lower,upper`, bands at mean -/+ 1.96 sd.
void emit_plot_data(const Prediction& pred, const TrueFunction& tf, const Points& grid,
                    const std::filesystem::path& out_path);
void emit_plot_data(const AggregatedPosterior& agg, const TrueFunction& tf, const Points& grid,
                    const std::filesystem::path& out_path);
void emit_plot_data(const LocalPosterior& post, const TrueFunction& tf, const Points& grid,
                    const std::filesystem::path& out_path);

struct FlightConfig {
  std::filesystem::path data_path;
  std::filesystem::path schema_path;  // empty: built-in column names
  Eigen::Index train_size = 70000;
  Eigen::Index test_size = 100000;
  Eigen::Index chunk = 2048;          // test points predicted per block
};

struct FlightRow {
  std::string method;
  Eigen::Index train_size = 0;
  int m = 1;
  double rmse = 0.0;
  double fit_seconds = 0.0;
};

struct FlightReport {
  std::vector<FlightRow> rows;
  long rows_read = 0;
  long rows_dropped = 0;
  double baseline_rmse = 0.0;  // predicting the train mean everywhere

  std::string csv() const;
};

// MMLE-adaptive local fits on k-d shards (M2-M4) and random shards (M1);
// BM only when train_size <= max_bm_n (or no cap is set and BM is requested).
FlightReport run_flight(const ExperimentConfig& cfg, const FlightConfig& flight);

// Writes detail.csv, summary.csv and config.resolved into `dir`.
void write_experiment_outputs(const ExperimentResult& result, const std::string& resolved_config,
                              const std::filesystem::path& dir);

}  // namespace dgp

#endif  // DGP_HARNESS_HPP_
