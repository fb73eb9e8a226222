// Test-only oracles, independent of the implementation paths they check.
#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

namespace oracles {

inline double sigmoid(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

// Mean negative log-likelihood plus l1 penalty (intercept unpenalized).
inline double l1_logistic_objective(const std::vector<double>& X,
                                    const std::vector<std::uint8_t>& y, int n,
                                    int p, const std::vector<double>& beta,
                                    double intercept, double lambda) {
  double nll = 0.0;
  for (int i = 0; i < n; ++i) {
    double z = intercept;
    for (int j = 0; j < p; ++j) z += X[static_cast<std::size_t>(i) * p + j] * beta[j];
    // log(1 + exp(-m)) with m = z for y=1 and m = -z for y=0.
    const double m = y[i] ? z : -z;
    nll += m >= 0 ? std::log1p(std::exp(-m)) : -m + std::log1p(std::exp(m));
  }
  nll /= n;
  double l1 = 0.0;
  for (double b : beta) l1 += std::abs(b);
  return nll + lambda * l1;
}

// Slow proximal-gradient (ISTA) solver for the same objective. Step size from
// the global curvature bound 0.25 * ||X||_F^2 / n.
inline void l1_logistic_pgd(const std::vector<double>& X,
                            const std::vector<std::uint8_t>& y, int n, int p,
                            double lambda, int iters,
                            std::vector<double>& beta, double& intercept) {
  beta.assign(p, 0.0);
  intercept = 0.0;
  double lips = 0.0;
  for (double v : X) lips += v * v;
  lips = 0.25 * (lips / n + 1.0);
  const double step = 1.0 / lips;
  std::vector<double> grad(p);
  for (int it = 0; it < iters; ++it) {
    std::fill(grad.begin(), grad.end(), 0.0);
    double grad0 = 0.0;
    for (int i = 0; i < n; ++i) {
      double z = intercept;
      const double* row = X.data() + static_cast<std::size_t>(i) * p;
      for (int j = 0; j < p; ++j) z += row[j] * beta[j];
      const double r = sigmoid(z) - static_cast<double>(y[i]);
      grad0 += r;
      for (int j = 0; j < p; ++j) grad[j] += r * row[j];
    }
    intercept -= step * grad0 / n;
    for (int j = 0; j < p; ++j) {
      const double cand = beta[j] - step * grad[j] / n;
      const double t = step * lambda;
      beta[j] = cand > t ? cand - t : (cand < -t ? cand + t : 0.0);
    }
  }
}

// Jacobi eigendecomposition of a symmetric matrix (row-major, dim x dim).
// Returns eigenvalues descending with matching eigenvectors in columns of V.
inline void jacobi_eigen(std::vector<double> A, int dim,
                         std::vector<double>& eigenvalues,
                         std::vector<double>& V) {
  V.assign(static_cast<std::size_t>(dim) * dim, 0.0);
  for (int i = 0; i < dim; ++i) V[static_cast<std::size_t>(i) * dim + i] = 1.0;
  auto at = [&](std::vector<double>& M, int r, int c) -> double& {
    return M[static_cast<std::size_t>(r) * dim + c];
  };
  for (int sweep = 0; sweep < 200; ++sweep) {
    double off = 0.0;
    for (int i = 0; i < dim; ++i) {
      for (int j = i + 1; j < dim; ++j) off += at(A, i, j) * at(A, i, j);
    }
    if (off < 1e-24) break;
    for (int i = 0; i < dim; ++i) {
      for (int j = i + 1; j < dim; ++j) {
        const double app = at(A, i, i), aqq = at(A, j, j), apq = at(A, i, j);
        if (std::abs(apq) < 1e-300) continue;
        const double phi = 0.5 * std::atan2(2.0 * apq, aqq - app);
        const double c = std::cos(phi), s = std::sin(phi);
        for (int k = 0; k < dim; ++k) {
          const double aik = at(A, i, k), ajk = at(A, j, k);
          at(A, i, k) = c * aik - s * ajk;
          at(A, j, k) = s * aik + c * ajk;
        }
        for (int k = 0; k < dim; ++k) {
          const double aki = at(A, k, i), akj = at(A, k, j);
          at(A, k, i) = c * aki - s * akj;
          at(A, k, j) = s * aki + c * akj;
        }
        for (int k = 0; k < dim; ++k) {
          const double vki = at(V, k, i), vkj = at(V, k, j);
          at(V, k, i) = c * vki - s * vkj;
          at(V, k, j) = s * vki + c * vkj;
        }
      }
    }
  }
  eigenvalues.resize(dim);
  for (int i = 0; i < dim; ++i) eigenvalues[i] = at(A, i, i);
  // Sort descending, permuting eigenvector columns alongside.
  std::vector<int> order(dim);
  for (int i = 0; i < dim; ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](int a, int b) {
    return eigenvalues[a] > eigenvalues[b];
  });
  std::vector<double> ev(dim);
  std::vector<double> vv(V.size());
  for (int c = 0; c < dim; ++c) {
    ev[c] = eigenvalues[order[c]];
    for (int r = 0; r < dim; ++r) {
      vv[static_cast<std::size_t>(r) * dim + c] =
          V[static_cast<std::size_t>(r) * dim + order[c]];
    }
  }
  eigenvalues = std::move(ev);
  V = std::move(vv);
}

}  // namespace oracles
