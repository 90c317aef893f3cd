#ifndef DGP_LINALG_HPP_
#define DGP_LINALG_HPP_

#include <Eigen/Dense>

// Dense kernels behind the GP fits. When the library is built against
// LAPACKE/CBLAS, the external routines are used only after a one-time probe
// reproduces a known factorization; otherwise Eigen's own kernels run.
namespace dgp::linalg {

bool backend_active();

// Overwrites `a` (symmetric positive definite) with its lower Cholesky factor,
// strictly upper part zeroed. Returns false when `a` is not positive definite.
bool cholesky_lower(Eigen::MatrixXd& a);

// b <- L^{-1} b.
void solve_lower(const Eigen::MatrixXd& l, Eigen::MatrixXd& b);
void solve_lower(const Eigen::MatrixXd& l, Eigen::VectorXd& b);
// b <- L^{-T} b.
void solve_lower_transposed(const Eigen::MatrixXd& l, Eigen::VectorXd& b);

// (L L^T)^{-1} from the lower factor L, both triangles filled.
Eigen::MatrixXd inverse_from_cholesky(const Eigen::MatrixXd& l);

}  // namespace dgp::linalg

#endif  // DGP_LINALG_HPP_
