#include "dgp/linalg.hpp"

#include <cmath>
#include <iostream>

#ifdef DGP_HAVE_LAPACKE
#include <complex>
#define lapack_complex_float std::complex<float>
#define lapack_complex_double std::complex<double>
#include <cblas.h>
#include <lapacke.h>
#endif

namespace dgp::linalg {

namespace {

#ifdef DGP_HAVE_LAPACKE

bool lapack_cholesky(Eigen::MatrixXd& a) {
  const auto n = static_cast<lapack_int>(a.rows());
  if (n == 0) return true;
  if (LAPACKE_dpotrf(LAPACK_COL_MAJOR, 'L', n, a.data(), n) != 0) return false;
  a.triangularView<Eigen::StrictlyUpper>().setZero();
  return true;
}

void blas_trsm(const Eigen::MatrixXd& l, double* b, Eigen::Index cols, bool transposed) {
  const auto n = static_cast<int>(l.rows());
  if (n == 0 || cols == 0) return;
  cblas_dtrsm(CblasColMajor, CblasLeft, CblasLower, transposed ? CblasTrans : CblasNoTrans,
              CblasNonUnit, n, static_cast<int>(cols), 1.0, l.data(), n, b, n);
}

bool lapack_inverse(Eigen::MatrixXd& l) {
  const auto n = static_cast<lapack_int>(l.rows());
  if (n == 0) return true;
  if (LAPACKE_dpotri(LAPACK_COL_MAJOR, 'L', n, l.data(), n) != 0) return false;
  l.triangularView<Eigen::StrictlyUpper>() = l.transpose();
  return true;
}

// Some OpenBLAS builds pick a broken kernel set for the host CPU and return
// garbage without reporting an error, so the backend has to earn its use.
bool probe() {
  const Eigen::Index n = 150;
  Eigen::MatrixXd a(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j)
      a(i, j) = std::exp(-std::abs(static_cast<double>(i - j)) / 7.0) + (i == j ? 0.5 : 0.0);
  Eigen::MatrixXd l = a;
  if (!lapack_cholesky(l)) return false;
  if ((l * l.transpose() - a).norm() > 1e-10 * a.norm()) return false;
  const Eigen::MatrixXd x = Eigen::MatrixXd::Ones(n, 3);
  Eigen::MatrixXd b = l * x;
  blas_trsm(l, b.data(), b.cols(), false);
  if ((b - x).norm() > 1e-8 * x.norm()) return false;
  b = l.transpose() * x;
  blas_trsm(l, b.data(), b.cols(), true);
  if ((b - x).norm() > 1e-8 * x.norm()) return false;
  Eigen::MatrixXd inv = l;
  if (!lapack_inverse(inv)) return false;
  return (inv * a - Eigen::MatrixXd::Identity(n, n)).norm() <= 1e-8 * std::sqrt(double(n));
}

#endif

bool detect() {
#ifdef DGP_HAVE_LAPACKE
  if (probe()) return true;
  std::cerr << "dgp: LAPACK/BLAS backend failed its self-check, falling back to Eigen kernels "
               "(OpenBLAS may need OPENBLAS_CORETYPE set for this CPU)\n";
#endif
  return false;
}

}  // namespace

bool backend_active() {
  static const bool active = detect();
  return active;
}

bool cholesky_lower(Eigen::MatrixXd& a) {
#ifdef DGP_HAVE_LAPACKE
  if (backend_active()) return lapack_cholesky(a);
#endif
  Eigen::LLT<Eigen::Ref<Eigen::MatrixXd>> llt(a);
  if (llt.info() != Eigen::Success) return false;
  a.triangularView<Eigen::StrictlyUpper>().setZero();
  return true;
}

void solve_lower(const Eigen::MatrixXd& l, Eigen::MatrixXd& b) {
#ifdef DGP_HAVE_LAPACKE
  if (backend_active()) return blas_trsm(l, b.data(), b.cols(), false);
#endif
  l.triangularView<Eigen::Lower>().solveInPlace(b);
}

void solve_lower(const Eigen::MatrixXd& l, Eigen::VectorXd& b) {
#ifdef DGP_HAVE_LAPACKE
  if (backend_active()) return blas_trsm(l, b.data(), 1, false);
#endif
  l.triangularView<Eigen::Lower>().solveInPlace(b);
}

void solve_lower_transposed(const Eigen::MatrixXd& l, Eigen::VectorXd& b) {
#ifdef DGP_HAVE_LAPACKE
  if (backend_active()) return blas_trsm(l, b.data(), 1, true);
#endif
  l.triangularView<Eigen::Lower>().transpose().solveInPlace(b);
}

Eigen::MatrixXd inverse_from_cholesky(const Eigen::MatrixXd& l) {
#ifdef DGP_HAVE_LAPACKE
  if (backend_active()) {
    Eigen::MatrixXd inv = l;
    if (lapack_inverse(inv)) return inv;
  }
#endif
  Eigen::MatrixXd linv = Eigen::MatrixXd::Identity(l.rows(), l.cols());
  l.triangularView<Eigen::Lower>().solveInPlace(linv);
  return linv.transpose() * linv;
}

}  // namespace dgp::linalg
