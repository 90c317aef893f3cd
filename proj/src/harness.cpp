#include "dgp/harness.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>

#include <omp.h>

#include "dgp/errors.hpp"
#include "dgp/partition.hpp"

namespace dgp {

namespace {

// Stream tags mixed into derive_seed paths next to the replication index.
constexpr std::uint64_t kDataStream = 100;
constexpr std::uint64_t kFlightSplit = 200;

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

KernelConfig kernel_template(const ExperimentConfig& cfg) {
  switch (cfg.kernel) {
    case KernelFamily::Matern:
      return KernelConfig::matern(cfg.regularity, 1.0);
    case KernelFamily::SquaredExponential:
      return KernelConfig::squared_exponential(1.0);
    case KernelFamily::IntegratedBM:
      return KernelConfig::integrated_bm(static_cast<int>(std::lround(cfg.regularity)), 1.0,
                                         cfg.poly_scale);
  }
  throw ContractError("unknown kernel family");
}

ScaleRule scale_rule(const ExperimentConfig& cfg) {
  ScaleRule rule;
  rule.mode = cfg.scale_mode;
  if (cfg.scale_mode == ScaleMode::FixedOptimal) rule.beta = cfg.beta;
  rule.search = cfg.search;
  rule.grid = cfg.tau_grid;
  return rule;
}

HyperPrior hyper_prior(const ExperimentConfig& cfg, long n, int m) {
  if (cfg.kernel == KernelFamily::Matern) return HyperPrior::matern(cfg.regularity, n, m, cfg.hyper_rate);
  if (cfg.kernel == KernelFamily::IntegratedBM)
    return HyperPrior::ibm(static_cast<int>(std::lround(cfg.regularity)), n, m, cfg.hyper_rate);
  throw UnsupportedParameter("hierarchical scale mode needs a matern or ibm kernel");
}

// Scale selection and conditioning for one shard. `n_total` and `m` feed the
// rate-optimal scale and the hyperprior; `consensus` inflates the prior by m.
LocalPosterior local_fit(const ExperimentConfig& cfg, const Dataset& shard, long n_total, int m,
                         bool consensus, Rng& rng, int shard_id) {
  const auto t0 = Clock::now();
  KernelConfig kc = kernel_template(cfg);
  double noise = cfg.sigma * cfg.sigma;
  LocalPosterior post;
  if (cfg.scale_mode == ScaleMode::FixedOptimal) {
    kc.scale = optimal_scale(cfg.kernel, cfg.regularity, cfg.beta, n_total);
    if (consensus) kc = consensus_prepare(kc, m);
    post = fit(kc, noise, shard, shard_id);
  } else if (shard.empty()) {
    if (consensus) kc = consensus_prepare(kc, m);
    post = fit(kc, noise, shard, shard_id);
  } else {
    // The evidence of the tempered prior m * sf^2 K depends on m * sf^2 only,
    // so estimating sf on it absorbs the consensus inflation: the fitted local
    // posterior is the plain empirical-Bayes one.
    const MmleResult est = mmle_fit(kc, shard, scale_rule(cfg), rng);
    kc = est.cfg;
    noise = est.noise_var;
    if (cfg.scale_mode == ScaleMode::MMLE) {
      post = fit(kc, noise, shard, shard_id);
    } else {
      const HyperPrior hp = hyper_prior(cfg, n_total, m);
      post = hierarchical_fit(kc, noise, shard, hp, log_tau_grid(est.cfg.scale, cfg.tau_grid), rng,
                              shard_id)
                 .posterior;
    }
  }
  post.add_fit_seconds(seconds_since(t0));
  return post;
}

std::vector<LocalPosterior> fit_shards(const ExperimentConfig& cfg, const std::vector<Dataset>& shards,
                                       long n_total, int m, bool consensus, int rep, Method method,
                                       const Partition& partition) {
  std::vector<LocalPosterior> locals;
  locals.reserve(shards.size());
  for (std::size_t k = 0; k < shards.size(); ++k) {
    Rng rng = make_rng(cfg.seed, {static_cast<std::uint64_t>(rep),
                                  static_cast<std::uint64_t>(method), k});
    locals.push_back(local_fit(cfg, shards[k], n_total, m, consensus, rng, static_cast<int>(k)));
    if (partition.spatial()) locals.back().set_region(partition.regions[k]);
  }
  return locals;
}

double total_fit_seconds(const std::vector<LocalPosterior>& locals) {
  double s = 0.0;
  for (const auto& l : locals) s += l.fit_seconds();
  return s;
}

AggregationRule rule_for(Method method) {
  switch (method) {
    case Method::M1: return AggregationRule::ConsensusAvg;
    case Method::M2: return AggregationRule::Glue;
    case Method::M3: return AggregationRule::InvVar;
    case Method::M4: return AggregationRule::ExpWeight;
    case Method::BM: break;
  }
  throw ContractError("BM has no aggregation rule");
}

bool wants(const ExperimentConfig& cfg, Method m) {
  for (Method x : cfg.methods)
    if (x == m) return true;
  return false;
}

bool bm_capped(const ExperimentConfig& cfg) { return cfg.max_bm_n > 0 && cfg.n > cfg.max_bm_n; }

struct MethodOutput {
  Method method;
  Prediction pred;
  double seconds = 0.0;
};

// All requested methods for one replication. Spatial fits are shared by
// M2-M4; each of their timings is the shared fit cost plus its own combine.
std::vector<MethodOutput> run_methods(const ExperimentConfig& cfg, const Dataset& data,
                                      const Points& grid, int rep) {
  std::vector<MethodOutput> out;
  if (wants(cfg, Method::BM) && !bm_capped(cfg)) {
    Rng rng = make_rng(cfg.seed, {static_cast<std::uint64_t>(rep), 0, 0});
    const auto t0 = Clock::now();
    LocalPosterior post = local_fit(cfg, data, cfg.n, 1, false, rng, 0);
    Prediction p = predict(post, grid);
    out.push_back({Method::BM, std::move(p), seconds_since(t0)});
  }
  if (wants(cfg, Method::M1)) {
    Rng prng = make_rng(cfg.seed, {static_cast<std::uint64_t>(rep), 1, kDataStream});
    PartitionResult pr = partition_random(data, cfg.m, prng);
    auto locals = fit_shards(cfg, pr.shards, cfg.n, cfg.m, true, rep, Method::M1, pr.partition);
    const double fit_s = total_fit_seconds(locals);
    const auto t0 = Clock::now();
    AggregatedPosterior agg(std::move(locals), AggregationRule::ConsensusAvg, pr.partition, cfg.rho);
    Prediction p = agg_mean_var(agg, grid);
    out.push_back({Method::M1, std::move(p), fit_s + seconds_since(t0)});
  }
  const bool spatial = wants(cfg, Method::M2) || wants(cfg, Method::M3) || wants(cfg, Method::M4);
  if (spatial) {
    PartitionResult pr = partition_spatial_1d(data, cfg.m);
    auto locals = fit_shards(cfg, pr.shards, cfg.n, cfg.m, false, rep, Method::M2, pr.partition);
    const double fit_s = total_fit_seconds(locals);
    auto t0 = Clock::now();
    AggregatedPosterior base(std::move(locals), AggregationRule::Glue, pr.partition, cfg.rho);
    const LocalPredictions lp = predict_locals(base, grid);
    const double local_s = seconds_since(t0);
    for (Method method : {Method::M2, Method::M3, Method::M4}) {
      if (!wants(cfg, method)) continue;
      t0 = Clock::now();
      AggregatedPosterior agg = base.with_rule(rule_for(method));
      Prediction p = combine(agg, grid, lp);
      out.push_back({method, std::move(p), fit_s + local_s + seconds_since(t0)});
    }
  }
  return out;
}

Dataset replication_data(const ExperimentConfig& cfg, const TrueFunction& tf, int rep) {
  Rng rng = make_rng(cfg.seed, {static_cast<std::uint64_t>(rep), kDataStream});
  return generate_synthetic(tf, cfg.n, cfg.sigma, rng);
}

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

void write_text(const std::filesystem::path& path, const std::string& body) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << body;
  if (!out) throw IoError("write failed for " + path.string());
}

}  // namespace

std::string to_string(Method method) {
  switch (method) {
    case Method::BM: return "BM";
    case Method::M1: return "M1";
    case Method::M2: return "M2";
    case Method::M3: return "M3";
    case Method::M4: return "M4";
  }
  return "?";
}

Method parse_method(std::string_view name) {
  for (Method m : {Method::BM, Method::M1, Method::M2, Method::M3, Method::M4})
    if (to_string(m) == name) return m;
  throw UnsupportedParameter("unknown method '" + std::string(name) + "'");
}

std::vector<Method> parse_methods(std::string_view list) {
  std::vector<Method> out;
  std::size_t pos = 0;
  while (pos <= list.size()) {
    std::size_t end = list.find(',', pos);
    if (end == std::string_view::npos) end = list.size();
    std::string_view tok = list.substr(pos, end - pos);
    while (!tok.empty() && tok.front() == ' ') tok.remove_prefix(1);
    while (!tok.empty() && tok.back() == ' ') tok.remove_suffix(1);
    if (!tok.empty()) {
      const Method m = parse_method(tok);
      bool dup = false;
      for (Method x : out) dup = dup || x == m;
      if (!dup) out.push_back(m);
    }
    pos = end + 1;
  }
  if (out.empty()) throw ContractError("method list is empty");
  return out;
}

std::string join_methods(const std::vector<Method>& methods) {
  std::string s;
  for (Method m : methods) {
    if (!s.empty()) s += ',';
    s += to_string(m);
  }
  return s;
}

std::string to_string(Scenario s) {
  switch (s) {
    case Scenario::MaternFixed: return "MaternFixed";
    case Scenario::MaternAdaptive: return "MaternAdaptive";
    case Scenario::SEFixed: return "SEFixed";
    case Scenario::SEAdaptive: return "SEAdaptive";
    case Scenario::IBMFixed: return "IBMFixed";
    case Scenario::IBMAdaptive: return "IBMAdaptive";
    case Scenario::Flight: return "Flight";
  }
  return "?";
}

std::string to_string(ScaleMode mode) {
  switch (mode) {
    case ScaleMode::FixedOptimal: return "fixed";
    case ScaleMode::MMLE: return "mmle";
    case ScaleMode::HierarchicalGrid: return "hier";
  }
  return "?";
}

ScaleMode parse_scale_mode(std::string_view name) {
  if (name == "fixed") return ScaleMode::FixedOptimal;
  if (name == "mmle") return ScaleMode::MMLE;
  if (name == "hier") return ScaleMode::HierarchicalGrid;
  throw UnsupportedParameter("unknown scale mode '" + std::string(name) + "'");
}

void ExperimentConfig::validate() const {
  if (reps < 1) throw ContractError("reps must be >= 1");
  if (methods.empty()) throw ContractError("method list is empty");
  if (n < 1) throw ContractError("n must be >= 1");
  if (m < 1) throw ContractError("m must be >= 1");
  if (grid < 101) throw ContractError("grid needs at least 101 points");
  if (threads < 1) throw ContractError("threads must be >= 1");
  if (!(sigma > 0.0)) throw DomainError("sigma must be positive");
  if (!(rho > 0.0)) throw DomainError("rho must be positive");
  if (max_bm_n < 0) throw ContractError("max-bm-n must be >= 0");
  kernel_template(*this).validate();
  if (scale_mode == ScaleMode::HierarchicalGrid && kernel == KernelFamily::SquaredExponential)
    throw UnsupportedParameter("hierarchical scale mode needs a matern or ibm kernel");
}

Scenario ExperimentConfig::scenario() const {
  const bool fixed = scale_mode == ScaleMode::FixedOptimal;
  switch (kernel) {
    case KernelFamily::Matern: return fixed ? Scenario::MaternFixed : Scenario::MaternAdaptive;
    case KernelFamily::SquaredExponential: return fixed ? Scenario::SEFixed : Scenario::SEAdaptive;
    case KernelFamily::IntegratedBM: return fixed ? Scenario::IBMFixed : Scenario::IBMAdaptive;
  }
  return Scenario::MaternFixed;
}

ExperimentResult run_experiment(const ExperimentConfig& cfg) {
  cfg.validate();
  const TrueFunction tf(cfg.c, cfg.beta);
  const Points grid = unit_grid(cfg.grid);
  const Eigen::VectorXd truth = tf(grid);

  std::vector<Method> order;
  for (Method m : {Method::BM, Method::M1, Method::M2, Method::M3, Method::M4})
    if (wants(cfg, m) && !(m == Method::BM && bm_capped(cfg))) order.push_back(m);

  std::vector<std::vector<ReportRow>> per_rep(static_cast<std::size_t>(cfg.reps));
  std::vector<std::string> errors(static_cast<std::size_t>(cfg.reps));

#pragma omp parallel for schedule(dynamic) num_threads(cfg.threads)
  for (int r = 0; r < cfg.reps; ++r) {
    auto& rows = per_rep[static_cast<std::size_t>(r)];
    auto failed_rows = [&] {
      rows.clear();
      for (Method m : order) {
        ReportRow row;
        row.method = to_string(m);
        row.n = cfg.n;
        row.m = m == Method::BM ? 1 : cfg.m;
        row.rep = r;
        row.failed = true;
        rows.push_back(row);
      }
    };
    try {
      const Dataset data = replication_data(cfg, tf, r);
      for (auto& mo : run_methods(cfg, data, grid, r)) {
        ReportRow row;
        row.method = to_string(mo.method);
        row.n = cfg.n;
        row.m = mo.method == Method::BM ? 1 : cfg.m;
        row.rep = r;
        row.l2_error = l2_error(mo.pred.mean, truth);
        row.radius = credible_radius(mo.pred.var, grid);
        row.covered = covered(row.l2_error, row.radius);
        row.fit_seconds = cfg.record_timing ? mo.seconds : 0.0;
        row.failed = !std::isfinite(row.l2_error) || !std::isfinite(row.radius);
        rows.push_back(row);
      }
    } catch (const std::exception& e) {
      errors[static_cast<std::size_t>(r)] = e.what();
      failed_rows();
    }
  }

  ExperimentResult result;
  result.bm_skipped = wants(cfg, Method::BM) && bm_capped(cfg);
  if (result.bm_skipped)
    std::cerr << "BM skipped: n=" << cfg.n << " exceeds max-bm-n=" << cfg.max_bm_n << '\n';
  for (int r = 0; r < cfg.reps; ++r) {
    if (!errors[static_cast<std::size_t>(r)].empty())
      std::cerr << "replication " << r << " failed (seed " << cfg.seed
                << ", child " << derive_seed(cfg.seed, {static_cast<std::uint64_t>(r), kDataStream})
                << "): " << errors[static_cast<std::size_t>(r)] << '\n';
    for (auto& row : per_rep[static_cast<std::size_t>(r)]) {
      ++result.attempted;
      if (row.failed) ++result.failed;
      result.report.add(std::move(row));
    }
  }
  return result;
}

std::map<Method, Prediction> replication_predictions(const ExperimentConfig& cfg, int rep) {
  cfg.validate();
  const TrueFunction tf(cfg.c, cfg.beta);
  const Points grid = unit_grid(cfg.grid);
  const Dataset data = replication_data(cfg, tf, rep);
  std::map<Method, Prediction> out;
  for (auto& mo : run_methods(cfg, data, grid, rep)) out.emplace(mo.method, std::move(mo.pred));
  return out;
}

void emit_plot_data(const Prediction& pred, const TrueFunction& tf, const Points& grid,
                    const std::filesystem::path& out_path) {
  if (grid.cols() != 1 || grid.rows() != pred.mean.size() || pred.var.size() != pred.mean.size())
    throw ContractError("plot grid and prediction lengths differ");
  if ((pred.var.array() < 0.0).any()) throw ContractError("negative posterior variance");
  const Eigen::VectorXd f0 = tf(grid);
  std::ostringstream os;
  os << "x,f0,mean,lower,upper\n";
  for (Eigen::Index i = 0; i < grid.rows(); ++i) {
    const double half = 1.96 * std::sqrt(pred.var[i]);
    os << fmt(grid(i, 0)) << ',' << fmt(f0[i]) << ',' << fmt(pred.mean[i]) << ','
       << fmt(pred.mean[i] - half) << ',' << fmt(pred.mean[i] + half) << '\n';
  }
  write_text(out_path, os.str());
}

void emit_plot_data(const AggregatedPosterior& agg, const TrueFunction& tf, const Points& grid,
                    const std::filesystem::path& out_path) {
  emit_plot_data(agg_mean_var(agg, grid), tf, grid, out_path);
}

void emit_plot_data(const LocalPosterior& post, const TrueFunction& tf, const Points& grid,
                    const std::filesystem::path& out_path) {
  emit_plot_data(predict(post, grid), tf, grid, out_path);
}

std::string FlightReport::csv() const {
  std::ostringstream os;
  os << "method,train_size,m,rmse,fit_seconds\n";
  for (const auto& r : rows)
    os << r.method << ',' << r.train_size << ',' << r.m << ',' << fmt(r.rmse) << ','
       << fmt(r.fit_seconds) << '\n';
  return os.str();
}

FlightReport run_flight(const ExperimentConfig& cfg, const FlightConfig& flight) {
  if (cfg.methods.empty()) throw ContractError("method list is empty");
  if (flight.chunk < 1) throw ContractError("chunk must be >= 1");
  const FlightSchema schema =
      flight.schema_path.empty() ? FlightSchema::defaults() : FlightSchema::load(flight.schema_path);
  Rng split = make_rng(cfg.seed, {kFlightSplit});
  FlightData fd = ingest_flights(flight.data_path, schema, flight.train_size, flight.test_size, split);

  // Zero-mean priors: centre the target on its train mean.
  const double offset = fd.train.y.mean();
  fd.train.y.array() -= offset;
  const Eigen::VectorXd test_y = fd.test.y.array() - offset;
  const long n = static_cast<long>(fd.train.size());

  ExperimentConfig local = cfg;
  if (local.scale_mode == ScaleMode::FixedOptimal) local.scale_mode = ScaleMode::MMLE;

  FlightReport report;
  report.rows_read = fd.rows_read;
  report.rows_dropped = fd.rows_dropped;
  report.baseline_rmse = rmse(Eigen::VectorXd::Zero(test_y.size()), test_y);

  auto chunked = [&](auto&& predict_block) {
    Eigen::VectorXd mean(test_y.size());
    for (Eigen::Index s = 0; s < test_y.size(); s += flight.chunk) {
      const Eigen::Index len = std::min(flight.chunk, test_y.size() - s);
      const Points block = fd.test.x.middleRows(s, len);
      mean.segment(s, len) = predict_block(block);
    }
    return mean;
  };
  auto add_row = [&](Method method, int m, const Eigen::VectorXd& mean, double secs) {
    FlightRow row;
    row.method = to_string(method);
    row.train_size = n;
    row.m = m;
    row.rmse = rmse(mean, test_y);
    row.fit_seconds = cfg.record_timing ? secs : 0.0;
    report.rows.push_back(row);
  };

  const bool bm_allowed = cfg.max_bm_n == 0 || n <= cfg.max_bm_n;
  if (wants(cfg, Method::BM)) {
    if (!bm_allowed) {
      std::cerr << "BM skipped: train size " << n << " exceeds max-bm-n=" << cfg.max_bm_n << '\n';
    } else {
      Rng rng = make_rng(cfg.seed, {0, 0, 0});
      const LocalPosterior post = local_fit(local, fd.train, n, 1, false, rng, 0);
      const Eigen::VectorXd mean =
          chunked([&](const Points& q) -> Eigen::VectorXd { return predict(post, q).mean; });
      add_row(Method::BM, 1, mean, post.fit_seconds());
    }
  }
  if (wants(cfg, Method::M1)) {
    Rng prng = make_rng(cfg.seed, {0, 1, kDataStream});
    PartitionResult pr = partition_random(fd.train, cfg.m, prng);
    auto locals = fit_shards(local, pr.shards, n, cfg.m, true, 0, Method::M1, pr.partition);
    const double fit_s = total_fit_seconds(locals);
    AggregatedPosterior agg(std::move(locals), AggregationRule::ConsensusAvg, pr.partition, cfg.rho);
    const Eigen::VectorXd mean =
        chunked([&](const Points& q) -> Eigen::VectorXd { return agg_mean_var(agg, q).mean; });
    add_row(Method::M1, cfg.m, mean, fit_s);
  }
  if (wants(cfg, Method::M2) || wants(cfg, Method::M3) || wants(cfg, Method::M4)) {
    Rng prng = make_rng(cfg.seed, {0, 2, kDataStream});
    PartitionResult pr = partition_spatial_kd(fd.train, cfg.m, prng);
    auto locals = fit_shards(local, pr.shards, n, cfg.m, false, 0, Method::M2, pr.partition);
    const double fit_s = total_fit_seconds(locals);
    std::vector<Method> rules;
    for (Method method : {Method::M2, Method::M3, Method::M4})
      if (wants(cfg, method)) rules.push_back(method);
    // One aggregate per rule; the local fits are copied once, not per block.
    std::vector<AggregatedPosterior> aggs;
    aggs.emplace_back(std::move(locals), rule_for(rules.front()), pr.partition, cfg.rho);
    for (std::size_t j = 1; j < rules.size(); ++j) aggs.push_back(aggs.front().with_rule(rule_for(rules[j])));
    std::vector<Eigen::VectorXd> means(rules.size(), Eigen::VectorXd(test_y.size()));
    for (Eigen::Index s = 0; s < test_y.size(); s += flight.chunk) {
      const Eigen::Index len = std::min(flight.chunk, test_y.size() - s);
      const Points block = fd.test.x.middleRows(s, len);
      const LocalPredictions lp = predict_locals(aggs.front(), block);
      for (std::size_t j = 0; j < rules.size(); ++j) means[j].segment(s, len) = combine(aggs[j], block, lp).mean;
    }
    for (std::size_t j = 0; j < rules.size(); ++j) add_row(rules[j], cfg.m, means[j], fit_s);
  }
  return report;
}

void write_experiment_outputs(const ExperimentResult& result, const std::string& resolved_config,
                              const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
  result.report.write_detail_csv(dir / "detail.csv");
  result.report.write_summary_csv(dir / "summary.csv");
  write_text(dir / "config.resolved", resolved_config);
}

}  // namespace dgp
