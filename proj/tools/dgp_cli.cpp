#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "dgp/errors.hpp"
#include "dgp/harness.hpp"
#include "dgp/selftest.hpp"

namespace fs = std::filesystem;

namespace {

struct Options {
  long n = 2000;
  int m = 20;
  std::string methods = "BM,M1,M2,M3,M4";
  int reps = 1;
  std::uint64_t seed = 1;
  double rho = 1.0;
  std::string kernel = "matern";
  double alpha = 2.5;
  double beta = 1.0;
  double c = 1.5;
  double sigma = 1.0;
  double poly_scale = 1.0;
  double hyper_rate = 1.0;
  std::string scale_mode = "fixed";
  std::string out = "out";
  int threads = 1;
  long max_bm_n = 0;
  int grid = 401;
  bool deterministic = false;
  std::string optimizer = "nm";

  // flight
  std::string data;
  std::string schema;
  long train = 70000;
  long test = 100000;

  // plot
  int rep = 0;
};

dgp::ExperimentConfig to_config(const Options& o) {
  dgp::ExperimentConfig cfg;
  cfg.kernel = dgp::parse_kernel_family(o.kernel);
  cfg.regularity = o.alpha;
  cfg.poly_scale = o.poly_scale;
  cfg.scale_mode = dgp::parse_scale_mode(o.scale_mode);
  cfg.n = o.n;
  cfg.m = o.m;
  cfg.methods = dgp::parse_methods(o.methods);
  cfg.reps = o.reps;
  cfg.seed = o.seed;
  cfg.c = o.c;
  cfg.beta = o.beta;
  cfg.sigma = o.sigma;
  cfg.rho = o.rho;
  cfg.hyper_rate = o.hyper_rate;
  cfg.grid = o.grid;
  cfg.threads = o.threads;
  cfg.max_bm_n = o.max_bm_n;
  cfg.record_timing = !o.deterministic;
  cfg.search.optimizer =
      o.optimizer == "cg" ? dgp::MmleOptimizer::ConjugateGradient : dgp::MmleOptimizer::NelderMead;
  cfg.validate();
  return cfg;
}

void write_file(const fs::path& path, const std::string& body) {
  std::ofstream f(path, std::ios::binary);
  if (!f || !(f << body)) throw dgp::IoError("cannot write " + path.string());
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Distributed Gaussian process regression experiments"};
  app.set_config("--config", "", "flat key=value file; command-line flags override it");
  app.require_subcommand(1);
  app.fallthrough();

  Options o;
  app.add_option("--n", o.n, "sample size")->capture_default_str();
  app.add_option("--m", o.m, "number of shards")->capture_default_str();
  app.add_option("--methods", o.methods, "comma list from BM,M1,M2,M3,M4")->capture_default_str();
  app.add_option("--reps", o.reps, "replications")->capture_default_str();
  app.add_option("--seed", o.seed, "master seed")->capture_default_str();
  app.add_option("--rho", o.rho, "exponential-weight temperature")->capture_default_str();
  app.add_option("--kernel", o.kernel, "matern, se or ibm")->capture_default_str();
  app.add_option("--alpha", o.alpha, "matern regularity, or ibm fold count")->capture_default_str();
  app.add_option("--beta", o.beta, "truth smoothness")->capture_default_str();
  app.add_option("--c", o.c, "truth amplitude")->capture_default_str();
  app.add_option("--sigma", o.sigma, "noise sd")->capture_default_str();
  app.add_option("--poly-scale", o.poly_scale, "ibm polynomial amplitude")->capture_default_str();
  app.add_option("--hyper-rate", o.hyper_rate, "hyperprior rate constant")->capture_default_str();
  app.add_option("--scale-mode", o.scale_mode, "fixed, mmle or hier")
      ->check(CLI::IsMember({"fixed", "mmle", "hier"}))
      ->capture_default_str();
  app.add_option("--out", o.out, "output directory")->capture_default_str();
  app.add_option("--threads", o.threads, "OpenMP threads over replications")->capture_default_str();
  app.add_option("--max-bm-n", o.max_bm_n, "skip BM above this n (0: no cap)")->capture_default_str();
  app.add_option("--grid", o.grid, "evaluation grid size")->capture_default_str();
  app.add_option("--optimizer", o.optimizer, "MMLE search: nm (Nelder-Mead) or cg (conjugate gradients)")
      ->check(CLI::IsMember({"nm", "cg"}))
      ->capture_default_str();
  app.add_flag("--deterministic", o.deterministic, "write zero timings so reruns are byte-identical");

  auto* synth = app.add_subcommand("synth", "synthetic scenario: detail.csv, summary.csv");
  auto* flight = app.add_subcommand("flight", "airline delay data: flight.csv");
  flight->add_option("--data", o.data, "flight CSV")->required();
  flight->add_option("--schema", o.schema, "column map (key=value)");
  flight->add_option("--train", o.train, "training rows")->capture_default_str();
  flight->add_option("--test", o.test, "test rows")->capture_default_str();
  auto* plot = app.add_subcommand("plot", "plotdata_<method>.csv for one replication");
  plot->add_option("--rep", o.rep, "replication index")->capture_default_str();
  auto* selftest = app.add_subcommand("selftest", "fast invariant checks");

  CLI11_PARSE(app, argc, argv);

  try {
    if (selftest->parsed()) return dgp::run_selftest(std::cout, o.seed) == 0 ? 0 : 1;

    const dgp::ExperimentConfig cfg = to_config(o);
    const fs::path out_dir(o.out);
    std::error_code ec;
    fs::create_directories(out_dir, ec);
    if (ec) throw dgp::IoError("cannot create " + out_dir.string());
    const std::string resolved = app.config_to_str(true, false);

    if (synth->parsed()) {
      const dgp::ExperimentResult res = dgp::run_experiment(cfg);
      dgp::write_experiment_outputs(res, resolved, out_dir);
      std::cout << res.report.summary_csv();
      if (res.failed > 0)
        std::cerr << res.failed << " of " << res.attempted << " rows failed\n";
      return res.failed_too_often() ? 1 : 0;
    }
    if (flight->parsed()) {
      dgp::FlightConfig fc;
      fc.data_path = o.data;
      fc.schema_path = o.schema;
      fc.train_size = o.train;
      fc.test_size = o.test;
      const dgp::FlightReport rep = dgp::run_flight(cfg, fc);
      write_file(out_dir / "flight.csv", rep.csv());
      write_file(out_dir / "config.resolved", resolved);
      std::cout << rep.csv();
      std::cerr << "rows read " << rep.rows_read << ", dropped " << rep.rows_dropped
                << ", train-mean RMSE " << rep.baseline_rmse << '\n';
      return 0;
    }
    if (plot->parsed()) {
      const dgp::TrueFunction tf(cfg.c, cfg.beta);
      const dgp::Points grid = dgp::unit_grid(cfg.grid);
      for (const auto& [method, pred] : dgp::replication_predictions(cfg, o.rep)) {
        const fs::path p = out_dir / ("plotdata_" + dgp::to_string(method) + ".csv");
        dgp::emit_plot_data(pred, tf, grid, p);
        std::cout << p.string() << '\n';
      }
      write_file(out_dir / "config.resolved", resolved);
      return 0;
    }
  } catch (const dgp::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
