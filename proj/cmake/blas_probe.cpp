// Exit 0 iff dpotrf reproduces a known SPD matrix.
#include <cmath>
#include <complex>
#include <vector>
#define lapack_complex_float std::complex<float>
#define lapack_complex_double std::complex<double>
#include <lapacke.h>

int main() {
  const int n = 150;
  std::vector<double> a(n * n), l;
  for (int j = 0; j < n; ++j)
    for (int i = 0; i < n; ++i) a[i + n * j] = std::exp(-std::abs(i - j) / 7.0) + (i == j ? 0.5 : 0.0);
  l = a;
  if (LAPACKE_dpotrf(LAPACK_COL_MAJOR, 'L', n, l.data(), n) != 0) return 1;
  double err = 0.0;
  for (int j = 0; j < n; ++j)
    for (int i = j; i < n; ++i) {
      double s = 0.0;
      for (int k = 0; k <= j; ++k) s += l[i + n * k] * l[j + n * k];
      err = std::max(err, std::abs(s - a[i + n * j]));
    }
  return err < 1e-10 ? 0 : 2;
}
