#include "dgp/kernels.hpp"

#include <cmath>

#include "dgp/errors.hpp"

namespace dgp {

namespace {

bool is_half_integer_in_range(double a, int& p) {
  // a = p + 1/2 for p in {0, 1, 2, 3}
  const double twice = 2.0 * a;
  const double rounded = std::round(twice);
  if (std::abs(twice - rounded) > 1e-12) return false;
  const int odd = static_cast<int>(rounded);
  if (odd % 2 != 1) return false;
  p = (odd - 1) / 2;
  return p >= 0 && p <= 3;
}

// exp(-z) * p!/(2p)! * sum_i (p+i)!/(i!(p-i)!) (2z)^{p-i}, normalised so that
// k(0) = 1. Coefficients precomputed for p = 0..3.
double matern_half_integer(int p, double z) {
  const double e = std::exp(-z);
  switch (p) {
    case 0:
      return e;
    case 1:
      return (1.0 + z) * e;
    case 2:
      return (1.0 + z + z * z / 3.0) * e;
    case 3:
      return (1.0 + z + 0.4 * z * z + z * z * z / 15.0) * e;
    default:
      throw UnsupportedParameter("Matern order out of closed-form range");
  }
}

// z * d/dz of matern_half_integer(p, z).
double matern_half_integer_zdz(int p, double z) {
  const double e = std::exp(-z);
  switch (p) {
    case 0:
      return -z * e;
    case 1:
      return -z * z * e;
    case 2:
      return -z * z * (1.0 + z) / 3.0 * e;
    case 3:
      return -z * z * (3.0 + 3.0 * z + z * z) / 15.0 * e;
    default:
      throw UnsupportedParameter("Matern order out of closed-form range");
  }
}

double factorial(int k) {
  double f = 1.0;
  for (int i = 2; i <= k; ++i) f *= i;
  return f;
}

double binomial(int n, int k) { return factorial(n) / (factorial(k) * factorial(n - k)); }

// Cov of the released integrated BM at clock times a, b >= 0.
double integrated_bm_cov(int ell, double poly_scale, double a, double b) {
  double poly = 0.0;
  double fj = 1.0;
  double ap = 1.0, bp = 1.0;
  for (int j = 0; j <= ell; ++j) {
    if (j > 0) {
      fj *= j;
      ap *= a;
      bp *= b;
    }
    poly += ap * bp / (fj * fj);
  }
  // int_0^c (a-u)^l (b-u)^l du with c = min(a,b), d = |a-b|:
  //   = sum_k C(l,k) d^{l-k} c^{l+k+1} / (l+k+1)
  const double c = std::min(a, b);
  const double d = std::abs(a - b);
  double integral = 0.0;
  for (int k = 0; k <= ell; ++k) {
    integral += binomial(ell, k) * std::pow(d, ell - k) * std::pow(c, ell + k + 1) /
                (ell + k + 1);
  }
  const double lf = factorial(ell);
  return poly_scale * poly_scale * poly + integral / (lf * lf);
}

// Reject inputs that would make eval_kernel throw, before entering a
// parallel region.
void check_inputs(const KernelConfig& cfg, const Points& xs, const Points& ys) {
  cfg.validate();
  if (xs.cols() != ys.cols()) throw ContractError("point sets differ in dimension");
  if (!xs.allFinite() || !ys.allFinite()) throw DomainError("non-finite kernel input");
  if (cfg.family == KernelFamily::IntegratedBM) {
    if (xs.cols() != 1) throw DomainError("integrated BM kernel is one-dimensional");
    if ((xs.size() > 0 && xs.minCoeff() < 0.0) || (ys.size() > 0 && ys.minCoeff() < 0.0))
      throw DomainError("integrated BM kernel needs inputs >= 0");
  }
}

}  // namespace

std::string to_string(KernelFamily family) {
  switch (family) {
    case KernelFamily::Matern:
      return "matern";
    case KernelFamily::SquaredExponential:
      return "se";
    case KernelFamily::IntegratedBM:
      return "ibm";
  }
  return "unknown";
}

KernelFamily parse_kernel_family(std::string_view name) {
  if (name == "matern") return KernelFamily::Matern;
  if (name == "se" || name == "sqexp") return KernelFamily::SquaredExponential;
  if (name == "ibm") return KernelFamily::IntegratedBM;
  throw DomainError("unknown kernel family '" + std::string(name) + "'");
}

void KernelConfig::validate() const {
  if (!(regularity > 0.0) && family != KernelFamily::IntegratedBM)
    throw DomainError("kernel regularity must be positive");
  if (!(scale > 0.0) || !std::isfinite(scale)) throw DomainError("kernel scale must be positive");
  if (!(signal_var > 0.0) || !std::isfinite(signal_var))
    throw DomainError("kernel signal variance must be positive");
  switch (family) {
    case KernelFamily::Matern: {
      int p = 0;
      if (!is_half_integer_in_range(regularity, p))
        throw UnsupportedParameter("Matern regularity " + std::to_string(regularity) +
                                   " has no closed form; supported: 0.5, 1.5, 2.5, 3.5");
      break;
    }
    case KernelFamily::IntegratedBM:
      if (regularity < 0.0 || std::abs(regularity - std::round(regularity)) > 1e-12)
        throw DomainError("integrated BM fold count must be a non-negative integer");
      if (!(poly_scale > 0.0)) throw DomainError("integrated BM polynomial amplitude must be positive");
      break;
    case KernelFamily::SquaredExponential:
      break;
  }
}

KernelConfig KernelConfig::matern(double alpha, double tau, double signal_var) {
  return {KernelFamily::Matern, alpha, tau, 1.0, signal_var};
}

KernelConfig KernelConfig::squared_exponential(double tau, double signal_var) {
  return {KernelFamily::SquaredExponential, 1.0, tau, 1.0, signal_var};
}

KernelConfig KernelConfig::integrated_bm(int ell, double tau, double poly_scale) {
  return {KernelFamily::IntegratedBM, static_cast<double>(ell), tau, poly_scale, 1.0};
}

double stationary_profile(const KernelConfig& cfg, double r) {
  const double tr = cfg.scale * r;
  switch (cfg.family) {
    case KernelFamily::SquaredExponential:
      return cfg.signal_var * std::exp(-0.5 * tr * tr);
    case KernelFamily::Matern: {
      int p = 0;
      if (!is_half_integer_in_range(cfg.regularity, p))
        throw UnsupportedParameter("Matern regularity has no closed form");
      return cfg.signal_var * matern_half_integer(p, std::sqrt(2.0 * cfg.regularity) * tr);
    }
    case KernelFamily::IntegratedBM:
      break;
  }
  throw ContractError("integrated BM kernel is not stationary");
}

double eval_kernel(const KernelConfig& cfg, double s, double t) {
  if (cfg.family == KernelFamily::IntegratedBM) {
    if (s < 0.0 || t < 0.0) throw DomainError("integrated BM kernel needs inputs >= 0");
    const double k = integrated_bm_cov(static_cast<int>(std::lround(cfg.regularity)),
                                       cfg.poly_scale, cfg.scale * s, cfg.scale * t);
    return cfg.signal_var * k;
  }
  return stationary_profile(cfg, std::abs(s - t));
}

double eval_kernel(const KernelConfig& cfg, const Eigen::Ref<const Eigen::RowVectorXd>& s,
                   const Eigen::Ref<const Eigen::RowVectorXd>& t) {
  if (cfg.family == KernelFamily::IntegratedBM) {
    if (s.size() != 1 || t.size() != 1)
      throw DomainError("integrated BM kernel is one-dimensional");
    return eval_kernel(cfg, s[0], t[0]);
  }
  return stationary_profile(cfg, (s - t).norm());
}

double prior_variance(const KernelConfig& cfg, const Eigen::Ref<const Eigen::RowVectorXd>& x) {
  if (cfg.stationary()) return cfg.signal_var;
  return eval_kernel(cfg, x, x);
}

Eigen::MatrixXd gram_matrix(const KernelConfig& cfg, const Points& xs, const Points& ys) {
  check_inputs(cfg, xs, ys);
  const Eigen::Index n = xs.rows(), q = ys.rows();
  Eigen::MatrixXd k(n, q);
  if (xs.cols() == 1 && ys.cols() == 1) {
#pragma omp parallel for schedule(static)
    for (Eigen::Index j = 0; j < q; ++j)
      for (Eigen::Index i = 0; i < n; ++i) k(i, j) = eval_kernel(cfg, xs(i, 0), ys(j, 0));
    return k;
  }
#pragma omp parallel for schedule(static)
  for (Eigen::Index j = 0; j < q; ++j) {
    for (Eigen::Index i = 0; i < n; ++i) k(i, j) = eval_kernel(cfg, xs.row(i), ys.row(j));
  }
  return k;
}

Eigen::MatrixXd gram_matrix(const KernelConfig& cfg, const Points& xs) {
  check_inputs(cfg, xs, xs);
  const Eigen::Index n = xs.rows();
  Eigen::MatrixXd k(n, n);
  const bool one_d = xs.cols() == 1;
#pragma omp parallel for schedule(dynamic, 16)
  for (Eigen::Index j = 0; j < n; ++j) {
    for (Eigen::Index i = j; i < n; ++i) {
      k(i, j) = one_d ? eval_kernel(cfg, xs(i, 0), xs(j, 0))
                      : eval_kernel(cfg, xs.row(i), xs.row(j));
    }
  }
  for (Eigen::Index j = 1; j < n; ++j)
    for (Eigen::Index i = 0; i < j; ++i) k(i, j) = k(j, i);
  return k;
}

Eigen::MatrixXd gram_matrix_dlogscale(const KernelConfig& cfg, const Points& xs) {
  check_inputs(cfg, xs, xs);
  if (cfg.family == KernelFamily::IntegratedBM) {
    const double h = 1e-5;
    KernelConfig up = cfg, down = cfg;
    up.scale *= std::exp(h);
    down.scale *= std::exp(-h);
    return (gram_matrix(up, xs) - gram_matrix(down, xs)) / (2.0 * h);
  }
  int p = 0;
  double zfac = cfg.scale;
  if (cfg.family == KernelFamily::Matern) {
    is_half_integer_in_range(cfg.regularity, p);
    zfac *= std::sqrt(2.0 * cfg.regularity);
  }
  const Eigen::Index n = xs.rows();
  Eigen::MatrixXd d(n, n);
#pragma omp parallel for schedule(dynamic, 16)
  for (Eigen::Index j = 0; j < n; ++j) {
    for (Eigen::Index i = j; i < n; ++i) {
      const double r = (xs.row(i) - xs.row(j)).norm();
      if (cfg.family == KernelFamily::SquaredExponential) {
        const double u = cfg.scale * r;
        d(i, j) = -cfg.signal_var * u * u * std::exp(-0.5 * u * u);
      } else {
        d(i, j) = cfg.signal_var * matern_half_integer_zdz(p, zfac * r);
      }
    }
  }
  for (Eigen::Index j = 1; j < n; ++j)
    for (Eigen::Index i = 0; i < j; ++i) d(i, j) = d(j, i);
  return d;
}

namespace serial {

Eigen::MatrixXd gram_matrix(const KernelConfig& cfg, const Points& xs, const Points& ys) {
  check_inputs(cfg, xs, ys);
  Eigen::MatrixXd k(xs.rows(), ys.rows());
  for (Eigen::Index j = 0; j < ys.rows(); ++j)
    for (Eigen::Index i = 0; i < xs.rows(); ++i) k(i, j) = eval_kernel(cfg, xs.row(i), ys.row(j));
  return k;
}

}  // namespace serial

}  // namespace dgp
