#ifndef DGP_KERNELS_HPP_
#define DGP_KERNELS_HPP_

#include <string>
#include <string_view>

#include <Eigen/Dense>

namespace dgp {

// Row-major point set: one point per row, one coordinate per column.
using Points = Eigen::MatrixXd;

enum class KernelFamily { Matern, SquaredExponential, IntegratedBM };

std::string to_string(KernelFamily family);
KernelFamily parse_kernel_family(std::string_view name);

// Everything needed to evaluate a prior covariance.
//
//  - Matern:   k(r) = v * 2^{1-a}/Gamma(a) (sqrt(2a) tau r)^a K_a(sqrt(2a) tau r),
//              evaluated through the half-integer closed forms a in {1/2,...,7/2}.
//  - SE:       k(r) = v * exp(-(tau r)^2 / 2).
//  - IntegratedBM: covariance of the released l-fold integrated Brownian
//              motion run on the clock t -> tau t, with polynomial amplitude B.
//              Only defined for 1-d inputs in [0, inf).
struct KernelConfig {
  KernelFamily family = KernelFamily::Matern;
  double regularity = 2.5;
  double scale = 1.0;
  double poly_scale = 1.0;
  double signal_var = 1.0;

  // Throws DomainError / UnsupportedParameter when the invariants fail.
  void validate() const;

  bool stationary() const { return family != KernelFamily::IntegratedBM; }

  static KernelConfig matern(double alpha, double tau, double signal_var = 1.0);
  static KernelConfig squared_exponential(double tau, double signal_var = 1.0);
  static KernelConfig integrated_bm(int ell, double tau, double poly_scale = 1.0);
};

// Stationary profile k(r) for r = |s - t| >= 0. Not valid for IntegratedBM.
double stationary_profile(const KernelConfig& cfg, double r);

double eval_kernel(const KernelConfig& cfg, double s, double t);

// Isotropic evaluation in d dimensions (Euclidean distance); IntegratedBM
// requires d == 1.
double eval_kernel(const KernelConfig& cfg, const Eigen::Ref<const Eigen::RowVectorXd>& s,
                   const Eigen::Ref<const Eigen::RowVectorXd>& t);

// Prior variance k(x, x).
double prior_variance(const KernelConfig& cfg, const Eigen::Ref<const Eigen::RowVectorXd>& x);

// Entry (i, j) = k(xs.row(i), ys.row(j)). OpenMP-parallel over rows.
Eigen::MatrixXd gram_matrix(const KernelConfig& cfg, const Points& xs, const Points& ys);

// Symmetric Gram matrix of one point set (fills only one triangle, then mirrors).
Eigen::MatrixXd gram_matrix(const KernelConfig& cfg, const Points& xs);

// Entry (i, j) = d k(x_i, x_j) / d log(scale), symmetric. Closed form for the
// stationary families, central differences for IntegratedBM.
Eigen::MatrixXd gram_matrix_dlogscale(const KernelConfig& cfg, const Points& xs);

// Diagonal added to every Gram matrix that is about to be factorized.
inline double jitter(const KernelConfig& cfg) { return 1e-10 * cfg.signal_var; }

namespace serial {

// Single-threaded reference of gram_matrix, kept for tests and benchmarks.
Eigen::MatrixXd gram_matrix(const KernelConfig& cfg, const Points& xs, const Points& ys);

}  // namespace serial

}  // namespace dgp

#endif  // DGP_KERNELS_HPP_
