#ifndef DGP_SCALE_SELECT_HPP_
#define DGP_SCALE_SELECT_HPP_

#include <optional>
#include <vector>

#include "dgp/gp.hpp"
#include "dgp/kernels.hpp"
#include "dgp/rng.hpp"

namespace dgp {

enum class ScaleMode { FixedOptimal, MMLE, HierarchicalGrid };

// NelderMead is derivative-free. ConjugateGradient uses analytic evidence
// gradients with Polak-Ribiere directions and a cubic line search, like the
// usual GP toolbox minimiser; on small random shards it often stops at the
// signal-sd floor with lower evidence than NelderMead reaches.
enum class MmleOptimizer { NelderMead, ConjugateGradient };

struct MmleSettings {
  MmleOptimizer optimizer = MmleOptimizer::NelderMead;
  // Nelder-Mead: cap on iterations that improve the best value.
  // Conjugate gradients: cap on line searches.
  int max_iters = 100;
  // Hard cap on evidence evaluations.
  int max_evals = 600;
  // Start (log tau, log signal sd, log noise sd); hyperparameter values 1.
  double init_log_scale = 0.0;
  double init_log_signal_sd = 0.0;
  double init_log_noise_sd = 0.0;
  double log_noise_sd_floor = -3.0;
  // Box keeping the search inside representable kernels.
  double log_scale_min = -5.0;
  double log_scale_max = 9.0;
  double log_signal_sd_min = -3.0;
  double log_signal_sd_max = 6.0;
  double log_noise_sd_max = 6.0;
  // When set, noise variance is held at this value and not searched.
  std::optional<double> fixed_noise_var;
};

struct TauGrid {
  int points = 32;
  double lo_factor = 1e-2;
  double hi_factor = 1e2;
};

struct ScaleRule {
  ScaleMode mode = ScaleMode::FixedOptimal;
  std::optional<double> beta;  // required iff FixedOptimal
  MmleSettings search;
  TauGrid grid;

  void validate() const;
};

// n^{e} power-law scale that gives the minimax rate for a beta-smooth truth.
//   Matern:       e = (alpha - beta) / (alpha (1 + 2 beta))
//   IntegratedBM: e = (l + 1/2 - beta) / ((l + 1/2)(2 beta + 1))
//   SE:           e = 1 / (1 + 2 beta)
double optimal_scale(KernelFamily family, double regularity, double beta, long n);

struct MmleResult {
  KernelConfig cfg;
  double noise_var = 1.0;
  double log_evidence = 0.0;
  double start_log_evidence = 0.0;
  int evaluations = 0;
  int improvements = 0;
};

// Empirical-Bayes hyperparameters: maximises the log marginal likelihood over
// (log tau, log signal sd, log noise sd) inside a box, with the search chosen
// by rule.search.optimizer. The rng is unused (the search is deterministic) and kept so
// every scale rule shares one signature.
MmleResult mmle_fit(const KernelConfig& cfg_template, const Dataset& shard, const ScaleRule& rule,
                    Rng& rng);

// Density N exp(-lambda tau^p) on (0, inf) with
//   IBM:    p = (l + 1/2)/(l + 1),   lambda = D n^{1/(2l+2)} / m
//   Matern: p = alpha/(alpha + 1/2), lambda = D n^{1/(2 alpha+1)} / m
// and N = p lambda^{1/p} / Gamma(1/p).
struct HyperPrior {
  enum class Family { IBM, Matern, Custom };
  Family family = Family::Matern;
  double regularity = 2.5;
  long n = 1;
  int m = 1;
  double rate_const = 1.0;
  double p = 1.0;
  double lambda = 1.0;

  static HyperPrior ibm(int ell, long n, int m, double rate_const = 1.0);
  static HyperPrior matern(double alpha, long n, int m, double rate_const = 1.0);
  // Arbitrary exponent/rate, e.g. p = 1 for an exponential law.
  static HyperPrior custom(double p, double lambda);

  double normalizer() const;
  double density(double tau) const;
  double log_density(double tau) const;
  // Closed-form CDF P(G <= tau^p) with G ~ Gamma(1/p, rate lambda).
  double cdf(double tau) const;
  double sample(Rng& rng) const;
};

double hyperprior_density(const HyperPrior& hp, double tau);
double hyperprior_sample(const HyperPrior& hp, Rng& rng);

// Log-spaced grid of `grid.points` values on [lo_factor, hi_factor] * center.
std::vector<double> log_tau_grid(double center, const TauGrid& grid);

struct HierarchicalResult {
  LocalPosterior posterior;
  std::vector<double> taus;
  std::vector<double> weights;
};

// Mixture over a tau grid with weights proportional to
// evidence(tau_j) * g(tau_j) * cell width_j.
HierarchicalResult hierarchical_fit(const KernelConfig& cfg_template, double noise_var,
                                    const Dataset& shard, const HyperPrior& hp,
                                    const std::vector<double>& taus, Rng& rng,
                                    int shard_id = -1);

}  // namespace dgp

#endif  // DGP_SCALE_SELECT_HPP_
