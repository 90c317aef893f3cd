#include "dgp/scale_select.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>

#include <boost/math/special_functions/gamma.hpp>

#include "dgp/errors.hpp"
#include "dgp/linalg.hpp"

namespace dgp {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

struct Box {
  Eigen::VectorXd lo, hi;
  Eigen::VectorXd clamp(const Eigen::VectorXd& v) const { return v.cwiseMax(lo).cwiseMin(hi); }
};

struct NelderMeadResult {
  Eigen::VectorXd best;
  double value = kInf;
  double start_value = kInf;
  int evaluations = 0;
  int improvements = 0;
};

// Minimises f inside `box`; candidate vertices are projected onto the box.
template <typename F>
NelderMeadResult nelder_mead(F&& f, const Eigen::VectorXd& start, const Box& box, double step,
                             int max_improvements, int max_evals) {
  const Eigen::Index dim = start.size();
  NelderMeadResult res;
  auto eval = [&](const Eigen::VectorXd& v) {
    ++res.evaluations;
    const double y = f(v);
    return std::isfinite(y) ? y : kInf;
  };

  std::vector<Eigen::VectorXd> simplex;
  std::vector<double> values;
  simplex.push_back(box.clamp(start));
  values.push_back(eval(simplex[0]));
  res.start_value = values[0];
  for (Eigen::Index i = 0; i < dim; ++i) {
    Eigen::VectorXd v = simplex[0];
    v[i] += step;
    if (v[i] > box.hi[i]) v[i] = simplex[0][i] - step;
    v = box.clamp(v);
    simplex.push_back(v);
    values.push_back(eval(v));
  }

  std::vector<std::size_t> order(simplex.size());
  double best = *std::min_element(values.begin(), values.end());
  while (res.improvements < max_improvements && res.evaluations < max_evals) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      return values[a] < values[b];
    });
    const std::size_t lo = order.front(), hi = order.back(), second = order[order.size() - 2];

    double spread = 0.0;
    for (const auto& v : simplex) spread = std::max(spread, (v - simplex[lo]).cwiseAbs().maxCoeff());
    if (std::isfinite(values[hi]) && values[hi] - values[lo] <= 1e-10 * (1.0 + std::abs(values[lo])) &&
        spread < 1e-6)
      break;

    Eigen::VectorXd centroid = Eigen::VectorXd::Zero(dim);
    for (std::size_t i = 0; i < simplex.size(); ++i)
      if (i != hi) centroid += simplex[i];
    centroid /= static_cast<double>(dim);

    const Eigen::VectorXd xr = box.clamp(centroid + (centroid - simplex[hi]));
    const double fr = eval(xr);
    if (fr < values[lo]) {
      const Eigen::VectorXd xe = box.clamp(centroid + 2.0 * (centroid - simplex[hi]));
      const double fe = eval(xe);
      if (fe < fr) {
        simplex[hi] = xe;
        values[hi] = fe;
      } else {
        simplex[hi] = xr;
        values[hi] = fr;
      }
    } else if (fr < values[second]) {
      simplex[hi] = xr;
      values[hi] = fr;
    } else {
      const bool outside = fr < values[hi];
      const Eigen::VectorXd xc = outside ? Eigen::VectorXd(box.clamp(centroid + 0.5 * (xr - centroid)))
                                         : Eigen::VectorXd(box.clamp(centroid + 0.5 * (simplex[hi] - centroid)));
      const double fc = eval(xc);
      if (fc < (outside ? fr : values[hi])) {
        simplex[hi] = xc;
        values[hi] = fc;
      } else {
        for (std::size_t i = 0; i < simplex.size(); ++i) {
          if (i == lo) continue;
          simplex[i] = box.clamp(simplex[lo] + 0.5 * (simplex[i] - simplex[lo]));
          values[i] = eval(simplex[i]);
        }
      }
    }
    const double now = *std::min_element(values.begin(), values.end());
    if (now < best) {
      best = now;
      ++res.improvements;
    }
  }
  const auto it = std::min_element(values.begin(), values.end());
  res.best = simplex[static_cast<std::size_t>(it - values.begin())];
  res.value = *it;
  return res;
}

// Polak-Ribiere conjugate gradients with a cubic-interpolation line search
// under Wolfe-Powell conditions (the classic `minimize` scheme). `fg`
// returns the value and writes the gradient. At most `max_searches` line
// searches and `max_evals` evaluations; stops early once stationary.
template <typename FG>
NelderMeadResult conjugate_gradient(FG&& fg, const Eigen::VectorXd& start, int max_searches,
                                    int max_evals) {
  constexpr double kInt = 0.1, kExt = 3.0, kRatio = 10.0, kSig = 0.1, kRho = kSig / 2;
  constexpr int kMaxPerSearch = 20;
  NelderMeadResult res;
  const Eigen::Index dim = start.size();
  Eigen::VectorXd x = start, df0(dim), df3(dim);
  double f0 = fg(x, df0);
  res.evaluations = 1;
  res.start_value = f0;
  if (!std::isfinite(f0) || !df0.allFinite()) {
    res.best = x;
    res.value = f0;
    return res;
  }
  Eigen::VectorXd s = -df0;
  double d0 = -s.squaredNorm();
  double x3 = 1.0 / (1.0 - d0);
  bool ls_failed = false;

  for (int search = 0; search < max_searches && res.evaluations < max_evals; ++search) {
    Eigen::VectorXd x_best = x, df_best = df0;
    double f_best = f0;
    int budget = std::min(kMaxPerSearch, max_evals - res.evaluations);
    double x1 = 0, f1 = 0, d1 = 0, x2 = 0, f2 = f0, d2 = d0, f3 = f0, d3 = d0;
    double x4 = 0, f4 = 0, d4 = 0;
    auto eval_at = [&](double t) {
      Eigen::VectorXd g(dim);
      const double f = fg(x + t * s, g);
      ++res.evaluations;
      --budget;
      df3 = g;
      f3 = f;
      if (std::isfinite(f) && f < f_best) {
        x_best = x + t * s;
        f_best = f;
        df_best = g;
      }
    };

    // Extrapolate until the slope condition holds or the budget runs out.
    while (true) {
      x2 = 0;
      f2 = f0;
      d2 = d0;
      f3 = f0;
      df3 = df0;
      bool ok = false;
      while (!ok && budget > 0) {
        eval_at(x3);
        ok = std::isfinite(f3) && df3.allFinite();
        if (!ok) x3 = 0.5 * (x2 + x3);
      }
      d3 = df3.dot(s);
      if (d3 > kSig * d0 || f3 > f0 + x3 * kRho * d0 || budget <= 0) break;
      x1 = x2;
      f1 = f2;
      d1 = d2;
      x2 = x3;
      f2 = f3;
      d2 = d3;
      const double a = 6 * (f1 - f2) + 3 * (d2 + d1) * (x2 - x1);
      const double b = 3 * (f2 - f1) - (2 * d1 + d2) * (x2 - x1);
      const double disc = b * b - a * d1 * (x2 - x1);
      x3 = disc >= 0 ? x1 - d1 * (x2 - x1) * (x2 - x1) / (b + std::sqrt(disc)) : -1.0;
      if (!std::isfinite(x3) || x3 < 0 || x3 > x2 * kExt)
        x3 = x2 * kExt;
      else if (x3 < x2 + kInt * (x2 - x1))
        x3 = x2 + kInt * (x2 - x1);
    }
    // Interpolate back into the bracket.
    while ((std::abs(d3) > -kSig * d0 || f3 > f0 + x3 * kRho * d0) && budget > 0) {
      if (d3 > 0 || f3 > f0 + x3 * kRho * d0) {
        x4 = x3;
        f4 = f3;
        d4 = d3;
      } else {
        x2 = x3;
        f2 = f3;
        d2 = d3;
      }
      if (f4 > f0) {
        x3 = x2 - (0.5 * d2 * (x4 - x2) * (x4 - x2)) / (f4 - f2 - d2 * (x4 - x2));
      } else {
        const double a = 6 * (f2 - f4) / (x4 - x2) + 3 * (d4 + d2);
        const double b = 3 * (f4 - f2) - (2 * d2 + d4) * (x4 - x2);
        x3 = x2 + (std::sqrt(b * b - a * d2 * (x4 - x2) * (x4 - x2)) - b) / a;
      }
      if (!std::isfinite(x3)) x3 = 0.5 * (x2 + x4);
      x3 = std::max(std::min(x3, x4 - kInt * (x4 - x2)), x2 + kInt * (x4 - x2));
      eval_at(x3);
      d3 = df3.dot(s);
    }

    if (std::abs(d3) < -kSig * d0 && f3 < f0 + x3 * kRho * d0) {
      x += x3 * s;
      const double gain = f0 - f3;
      f0 = f3;
      ++res.improvements;
      // Stationary: further searches only polish the last digits.
      if (df3.lpNorm<Eigen::Infinity>() < 1e-6 || gain < 1e-12 * (1.0 + std::abs(f0))) break;
      s = (df3.squaredNorm() - df0.dot(df3)) / df0.squaredNorm() * s - df3;
      df0 = df3;
      const double d_prev = d0;
      d0 = df0.dot(s);
      if (d0 > 0) {
        s = -df0;
        d0 = -s.squaredNorm();
      }
      x3 *= std::min(kRatio, d_prev / (d0 - std::numeric_limits<double>::min()));
      ls_failed = false;
    } else {
      x = x_best;
      f0 = f_best;
      df0 = df_best;
      if (ls_failed) break;
      s = -df0;
      d0 = -s.squaredNorm();
      x3 = 1.0 / (1.0 - d0);
      ls_failed = true;
    }
  }
  res.best = x;
  res.value = f0;
  return res;
}

double regularity_for_rate(KernelFamily family, double regularity) {
  // Effective smoothness of the prior sample paths.
  return family == KernelFamily::IntegratedBM ? regularity + 0.5 : regularity;
}

}  // namespace

void ScaleRule::validate() const {
  if ((mode == ScaleMode::FixedOptimal) != beta.has_value())
    throw ContractError("beta is required exactly when the scale mode is fixed-optimal");
  if (beta && !(*beta > 0.0)) throw DomainError("beta must be positive");
  if (search.max_iters < 1) throw ContractError("MMLE needs at least one iteration");
  if (grid.points < 1 || grid.points > 64) throw ContractError("tau grid must have 1..64 points");
}

double optimal_scale(KernelFamily family, double regularity, double beta, long n) {
  if (n < 1) throw DomainError("sample size must be positive");
  if (!(beta > 0.0)) throw DomainError("beta must be positive");
  const double nn = static_cast<double>(n);
  switch (family) {
    case KernelFamily::SquaredExponential:
      return std::pow(nn, 1.0 / (1.0 + 2.0 * beta));
    case KernelFamily::Matern:
    case KernelFamily::IntegratedBM: {
      const double a = regularity_for_rate(family, regularity);
      if (beta > a)
        throw DomainError("truth smoother than the prior: beta must not exceed the prior regularity");
      return std::pow(nn, (a - beta) / (a * (1.0 + 2.0 * beta)));
    }
  }
  throw DomainError("unknown kernel family");
}

MmleResult mmle_fit(const KernelConfig& cfg_template, const Dataset& shard, const ScaleRule& rule,
                    Rng& /*rng*/) {
  if (rule.mode == ScaleMode::FixedOptimal)
    throw ContractError("mmle_fit called with a fixed-optimal scale rule");
  if (shard.empty()) throw ContractError("MMLE needs a non-empty shard");
  cfg_template.validate();
  const MmleSettings& s = rule.search;
  const bool fit_noise = !s.fixed_noise_var.has_value();

  auto unpack = [&](const Eigen::VectorXd& v, KernelConfig& cfg, double& noise) {
    cfg = cfg_template;
    cfg.scale = std::exp(v[0]);
    cfg.signal_var = std::exp(2.0 * v[1]);
    noise = fit_noise ? std::exp(2.0 * v[2]) : *s.fixed_noise_var;
  };
  auto objective = [&](const Eigen::VectorXd& v) {
    KernelConfig cfg;
    double noise = 0.0;
    unpack(v, cfg, noise);
    try {
      return -log_marginal_likelihood(cfg, noise, shard);
    } catch (const NumericalDegeneracy&) {
      return kInf;
    }
  };

  const Eigen::Index dim = fit_noise ? 3 : 2;
  Eigen::VectorXd start(dim);
  Box box{Eigen::VectorXd(dim), Eigen::VectorXd(dim)};
  start[0] = s.init_log_scale;
  start[1] = s.init_log_signal_sd;
  box.lo[0] = s.log_scale_min;
  box.hi[0] = s.log_scale_max;
  box.lo[1] = s.log_signal_sd_min;
  box.hi[1] = s.log_signal_sd_max;
  if (fit_noise) {
    start[2] = s.init_log_noise_sd;
    box.lo[2] = s.log_noise_sd_floor;
    box.hi[2] = s.log_noise_sd_max;
  }

  // Value and gradient of the negative evidence at the box projection of v,
  // so the objective is flat beyond the bounds.
  auto value_and_gradient = [&](const Eigen::VectorXd& v, Eigen::VectorXd& grad) {
    const Eigen::VectorXd u = box.clamp(v);
    KernelConfig cfg;
    double noise = 0.0;
    unpack(u, cfg, noise);
    grad.setZero(v.size());
    Eigen::MatrixXd l = gram_matrix(cfg, shard.x);
    l.diagonal().array() += noise + jitter(cfg);
    const Eigen::MatrixXd k_noisy = l;
    if (!linalg::cholesky_lower(l)) return kInf;
    Eigen::VectorXd a = shard.y;
    linalg::solve_lower(l, a);
    const double nlz = 0.5 * a.squaredNorm() + l.diagonal().array().log().sum() +
                       0.5 * static_cast<double>(shard.size()) * std::log(2.0 * std::numbers::pi);
    linalg::solve_lower_transposed(l, a);
    // W = K^{-1} - a a^T; d nlZ / d theta = tr(W dK) / 2.
    Eigen::MatrixXd w = linalg::inverse_from_cholesky(l);
    w.noalias() -= a * a.transpose();
    grad[0] = 0.5 * (w.cwiseProduct(gram_matrix_dlogscale(cfg, shard.x))).sum();
    Eigen::MatrixXd k_signal = k_noisy;
    k_signal.diagonal().array() -= noise;
    grad[1] = w.cwiseProduct(k_signal).sum();
    if (fit_noise) grad[2] = noise * w.trace();
    for (Eigen::Index i = 0; i < v.size(); ++i) {
      if (v[i] < box.lo[i] || v[i] > box.hi[i]) grad[i] = 0;
    }
    return nlz;
  };

  NelderMeadResult nm;
  if (s.optimizer == MmleOptimizer::ConjugateGradient) {
    nm = conjugate_gradient(value_and_gradient, start, s.max_iters, s.max_evals);
    nm.best = box.clamp(nm.best);
  } else {
    nm = nelder_mead(objective, start, box, 1.0, s.max_iters, s.max_evals);
  }
  if (!std::isfinite(nm.value)) throw OptimizationFailure("no finite evidence value during MMLE search");

  MmleResult out;
  unpack(nm.best, out.cfg, out.noise_var);
  out.log_evidence = -nm.value;
  out.start_log_evidence = -nm.start_value;
  out.evaluations = nm.evaluations;
  out.improvements = nm.improvements;
  return out;
}

HyperPrior HyperPrior::ibm(int ell, long n, int m, double rate_const) {
  if (ell < 0 || n < 1 || m < 1 || !(rate_const > 0.0)) throw DomainError("invalid IBM hyperprior");
  HyperPrior hp;
  hp.family = Family::IBM;
  hp.regularity = ell;
  hp.n = n;
  hp.m = m;
  hp.rate_const = rate_const;
  hp.p = (ell + 0.5) / (ell + 1.0);
  hp.lambda = rate_const * std::pow(static_cast<double>(n), 1.0 / (2.0 * ell + 2.0)) / m;
  return hp;
}

HyperPrior HyperPrior::matern(double alpha, long n, int m, double rate_const) {
  if (!(alpha > 0.0) || n < 1 || m < 1 || !(rate_const > 0.0))
    throw DomainError("invalid Matern hyperprior");
  HyperPrior hp;
  hp.family = Family::Matern;
  hp.regularity = alpha;
  hp.n = n;
  hp.m = m;
  hp.rate_const = rate_const;
  hp.p = alpha / (alpha + 0.5);
  hp.lambda = rate_const * std::pow(static_cast<double>(n), 1.0 / (2.0 * alpha + 1.0)) / m;
  return hp;
}

HyperPrior HyperPrior::custom(double p, double lambda) {
  if (!(p > 0.0) || !(lambda > 0.0)) throw DomainError("invalid hyperprior shape");
  HyperPrior hp;
  hp.family = Family::Custom;
  hp.p = p;
  hp.lambda = lambda;
  return hp;
}

double HyperPrior::normalizer() const {
  return p * std::pow(lambda, 1.0 / p) / std::tgamma(1.0 / p);
}

double HyperPrior::log_density(double tau) const {
  if (!(tau > 0.0)) throw DomainError("hyperprior density needs tau > 0");
  return std::log(p) + std::log(lambda) / p - std::lgamma(1.0 / p) - lambda * std::pow(tau, p);
}

double HyperPrior::density(double tau) const { return std::exp(log_density(tau)); }

double HyperPrior::cdf(double tau) const {
  if (tau <= 0.0) return 0.0;
  return boost::math::gamma_p(1.0 / p, lambda * std::pow(tau, p));
}

double HyperPrior::sample(Rng& rng) const {
  std::gamma_distribution<double> g(1.0 / p, 1.0 / lambda);
  return std::pow(g(rng), 1.0 / p);
}

double hyperprior_density(const HyperPrior& hp, double tau) { return hp.density(tau); }

double hyperprior_sample(const HyperPrior& hp, Rng& rng) { return hp.sample(rng); }

std::vector<double> log_tau_grid(double center, const TauGrid& grid) {
  if (!(center > 0.0)) throw DomainError("tau grid center must be positive");
  if (grid.points < 1) throw ContractError("tau grid needs at least one point");
  if (grid.points == 1) return {center};
  std::vector<double> taus(grid.points);
  const double a = std::log(center * grid.lo_factor), b = std::log(center * grid.hi_factor);
  for (int j = 0; j < grid.points; ++j) taus[j] = std::exp(a + (b - a) * j / (grid.points - 1));
  return taus;
}

HierarchicalResult hierarchical_fit(const KernelConfig& cfg_template, double noise_var,
                                    const Dataset& shard, const HyperPrior& hp,
                                    const std::vector<double>& taus, Rng& /*rng*/, int shard_id) {
  if (taus.empty() || taus.size() > 64) throw ContractError("tau grid must have 1..64 points");
  if (!std::is_sorted(taus.begin(), taus.end())) throw ContractError("tau grid must be ascending");
  const auto t0 = std::chrono::steady_clock::now();
  const std::size_t g = taus.size();

  std::vector<double> log_w(g);
  std::vector<GpFit> comps;
  comps.reserve(g);
  for (std::size_t j = 0; j < g; ++j) {
    KernelConfig cfg = cfg_template;
    cfg.scale = taus[j];
    double width = 1.0;
    if (g > 1) {
      const double left = j == 0 ? taus[0] : taus[j - 1];
      const double right = j + 1 == g ? taus[g - 1] : taus[j + 1];
      width = 0.5 * (right - left);
    }
    comps.push_back(fit_exact(cfg, noise_var, shard, shard_id));
    log_w[j] = log_marginal_likelihood(comps.back()) + hp.log_density(taus[j]) + std::log(width);
  }
  // Re-centre before exponentiating so the largest weight is exp(0).
  const double top = *std::max_element(log_w.begin(), log_w.end());
  std::vector<double> w(g);
  double total = 0.0;
  for (std::size_t j = 0; j < g; ++j) total += (w[j] = std::exp(log_w[j] - top));
  for (double& v : w) v /= total;

  HierarchicalResult out{LocalPosterior(std::move(comps), w, shard_id), taus, w};
  out.posterior.add_fit_seconds(
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count() -
      out.posterior.fit_seconds());
  return out;
}

}  // namespace dgp
