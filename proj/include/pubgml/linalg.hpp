#pragma once

#include <cmath>
#include <cstddef>
#include <optional>
#include <vector>

namespace pubgml::linalg {

/// Dense symmetric matrix stored row-major.
struct SymMatrix {
  std::size_t n = 0;
  std::vector<double> a;

  explicit SymMatrix(std::size_t size) : n(size), a(size * size, 0.0) {}
  double& operator()(std::size_t i, std::size_t j) { return a[i * n + j]; }
  double operator()(std::size_t i, std::size_t j) const { return a[i * n + j]; }
  double trace() const {
    double t = 0.0;
    for (std::size_t i = 0; i < n; ++i) t += a[i * n + i];
    return t;
  }
};

/// Solves A x = b by Cholesky. Returns nullopt when A is not numerically
/// positive definite (a pivot falls below rel_tol times the largest diagonal).
inline std::optional<std::vector<double>> cholesky_solve(SymMatrix A, std::vector<double> b,
                                                         double rel_tol = 1e-12) {
  const std::size_t n = A.n;
  double max_diag = 0.0;
  for (std::size_t i = 0; i < n; ++i) max_diag = std::max(max_diag, A(i, i));
  if (n > 0 && !(max_diag > 0.0)) return std::nullopt;
  for (std::size_t j = 0; j < n; ++j) {
    double d = A(j, j);
    for (std::size_t k = 0; k < j; ++k) d -= A(j, k) * A(j, k);
    if (!(d > rel_tol * max_diag)) return std::nullopt;
    const double l = std::sqrt(d);
    A(j, j) = l;
    for (std::size_t i = j + 1; i < n; ++i) {
      double s = A(i, j);
      for (std::size_t k = 0; k < j; ++k) s -= A(i, k) * A(j, k);
      A(i, j) = s / l;
    }
  }
  for (std::size_t i = 0; i < n; ++i) {
    double s = b[i];
    for (std::size_t k = 0; k < i; ++k) s -= A(i, k) * b[k];
    b[i] = s / A(i, i);
  }
  for (std::size_t i = n; i-- > 0;) {
    double s = b[i];
    for (std::size_t k = i + 1; k < n; ++k) s -= A(k, i) * b[k];
    b[i] = s / A(i, i);
  }
  return b;
}

}  // namespace pubgml::linalg
