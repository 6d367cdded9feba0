#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

#include "dcdgd/consensus.hpp"
#include "dcdgd/linalg.hpp"

namespace dcdgd {

struct EigenDecomposition {
  Vec eigenvalues;   // sorted descending
  Matrix vectors;    // column k is the eigenvector of eigenvalues[k]
  double offdiag_residual = 0.0;
  int sweeps = 0;
};

/// Cyclic Jacobi rotations for dense symmetric matrices. Stops when the
/// off-diagonal Frobenius norm falls below `offdiag_tol`; throws after
/// `max_sweeps` full sweeps, reporting the achieved residual.
inline EigenDecomposition jacobi_eigensymm(Matrix a, double offdiag_tol = kTolerances.jacobi_offdiag,
                                           int max_sweeps = kTolerances.jacobi_max_sweeps) {
  const int n = a.rows();
  if (n != a.cols()) throw std::invalid_argument("jacobi_eigensymm: matrix not square");
  Matrix v(n, n, 0.0);
  for (int i = 0; i < n; ++i) v(i, i) = 1.0;

  auto offdiag_norm = [&]() {
    double s = 0.0;
    for (int p = 0; p < n; ++p)
      for (int q = p + 1; q < n; ++q) s += a(p, q) * a(p, q);
    return std::sqrt(2.0 * s);
  };

  int sweeps = 0;
  double off = offdiag_norm();
  while (off > offdiag_tol) {
    if (sweeps >= max_sweeps)
      throw std::runtime_error("jacobi_eigensymm: no convergence after " +
                               std::to_string(max_sweeps) + " sweeps, off-diagonal residual " +
                               detail::fmt_double(off));
    for (int p = 0; p < n; ++p) {
      for (int q = p + 1; q < n; ++q) {
        const double apq = a(p, q);
        if (apq == 0.0) continue;
        const double theta = (a(q, q) - a(p, p)) / (2.0 * apq);
        const double t = (theta >= 0.0 ? 1.0 : -1.0) /
                         (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;
        const double tau = s / (1.0 + c);

        const double app = a(p, p), aqq = a(q, q);
        a(p, p) = app - t * apq;
        a(q, q) = aqq + t * apq;
        a(p, q) = 0.0;
        a(q, p) = 0.0;
        for (int k = 0; k < n; ++k) {
          if (k != p && k != q) {
            const double akp = a(k, p), akq = a(k, q);
            a(k, p) = akp - s * (akq + tau * akp);
            a(p, k) = a(k, p);
            a(k, q) = akq + s * (akp - tau * akq);
            a(q, k) = a(k, q);
          }
          const double vkp = v(k, p), vkq = v(k, q);
          v(k, p) = vkp - s * (vkq + tau * vkp);
          v(k, q) = vkq + s * (vkp - tau * vkq);
        }
      }
    }
    ++sweeps;
    off = offdiag_norm();
  }

  EigenDecomposition dec;
  dec.offdiag_residual = off;
  dec.sweeps = sweeps;
  dec.eigenvalues.resize(n);
  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](int x, int y) { return a(x, x) > a(y, y); });
  dec.vectors = Matrix(n, n);
  for (int k = 0; k < n; ++k) {
    dec.eigenvalues[k] = a(order[k], order[k]);
    for (int i = 0; i < n; ++i) dec.vectors(i, k) = v(i, order[k]);
  }
  return dec;
}

struct SpectralReport {
  double lambda1 = 0.0;
  double lambda2 = 0.0;
  double lambda_n = 0.0;
  double beta = 0.0;            // max(|lambda2|, |lambda_n|)
  double eigen_tolerance = 0.0; // achieved off-diagonal residual
  double max_pair_residual = 0.0;
  double ones_alignment = 0.0;  // |<v1, 1>| / (||v1|| sqrt(n))
  bool unit_eigenvalue_simple = false;
  bool degenerate_complete = false;  // beta == 0 rank-one projector case
  Vec eigenvalues;                   // sorted descending
};

/// Full symmetric eigendecomposition of a consensus matrix plus the derived
/// quantities lambda_2, lambda_N and beta.
inline SpectralReport spectral(const ConsensusMatrix& m,
                               const ValidationTolerances& tol = kTolerances) {
  EigenDecomposition dec = jacobi_eigensymm(m.weights, tol.jacobi_offdiag, tol.jacobi_max_sweeps);
  const int n = m.n;
  SpectralReport r;
  r.eigenvalues = dec.eigenvalues;
  r.eigen_tolerance = dec.offdiag_residual;
  r.lambda1 = dec.eigenvalues.front();
  r.lambda2 = dec.eigenvalues[1];
  r.lambda_n = dec.eigenvalues.back();
  r.beta = std::max(std::abs(r.lambda2), std::abs(r.lambda_n));
  r.degenerate_complete = r.beta < tol.unit_eigenvalue;

  int near_one = 0;
  for (double ev : dec.eigenvalues)
    if (std::abs(ev - 1.0) <= tol.unit_eigenvalue) ++near_one;
  r.unit_eigenvalue_simple = (near_one == 1);

  Vec v1(n), wv(n);
  for (int i = 0; i < n; ++i) v1[i] = dec.vectors(i, 0);
  double s = 0.0;
  for (double x : v1) s += x;
  r.ones_alignment = std::abs(s) / (norm2(v1) * std::sqrt(static_cast<double>(n)));

  double worst = 0.0;
  Vec vk(n);
  for (int k = 0; k < n; ++k) {
    for (int i = 0; i < n; ++i) vk[i] = dec.vectors(i, k);
    m.weights.multiply(vk, wv);
    axpy(-dec.eigenvalues[k], vk, wv);
    worst = std::max(worst, norm2(wv) / norm2(vk));
  }
  r.max_pair_residual = worst;
  return r;
}

/// Spectrum-level consensus-matrix checks: all eigenvalues in (-1, 1] and
/// exactly one eigenvalue equal to 1 with eigenvector along the ones vector.
inline void validate_spectrum(const SpectralReport& r, MatrixValidation& v,
                              const ValidationTolerances& tol = kTolerances) {
  if (std::abs(r.lambda1 - 1.0) > tol.unit_eigenvalue)
    v.fail("largest eigenvalue is " + detail::fmt_double(r.lambda1) + ", expected 1");
  if (!(r.lambda_n > -1.0))
    v.fail("smallest eigenvalue " + detail::fmt_double(r.lambda_n) + " is not above -1");
  if (!r.unit_eigenvalue_simple)
    v.fail("eigenvalue 1 is not simple");
  if (r.ones_alignment < 1.0 - tol.unit_eigenvalue)
    v.fail("top eigenvector is not proportional to the ones vector (alignment " +
           detail::fmt_double(r.ones_alignment) + ")");
  if (r.max_pair_residual > tol.eigen_residual * 100)
    v.fail("eigenpair residual " + detail::fmt_double(r.max_pair_residual) + " too large");
}

/// Validates a raw square matrix against a topology; on success the stored
/// matrix is exactly symmetrized so that [W]_ij == [W]_ji holds bit-for-bit.
inline LoadResult load_matrix(const Matrix& raw, const Topology& topology,
                              const ValidationTolerances& tol = kTolerances) {
  LoadResult result;
  result.validation = validate_structure(raw, topology, tol);
  if (!result.validation.ok) return result;

  ConsensusMatrix m;
  m.n = raw.rows();
  m.topology = topology;
  m.weights = raw;
  for (int i = 0; i < m.n; ++i)
    for (int j = i + 1; j < m.n; ++j) {
      const double avg = 0.5 * (raw(i, j) + raw(j, i));
      m.weights(i, j) = avg;
      m.weights(j, i) = avg;
    }

  SpectralReport r = spectral(m, tol);
  validate_spectrum(r, result.validation, tol);
  if (!result.validation.ok) return result;
  result.matrix = std::move(m);
  return result;
}

/// Step-size and SNR feasibility thresholds induced by a consensus matrix:
/// eta_min below which no step-size works, the corresponding sparsifier
/// probability floor, and the largest admissible constant step-size.
struct TheoryThresholds {
  double lambda_n = 0.0;
  double l_smooth = 1.0;
  double eta_min = 0.0;
  double p_min = 0.0;  // sparsifier keep-probability floor eta_min/(1+eta_min)

  double alpha_max(double eta) const {
    return (lambda_n * (eta + 1.0) + eta - 1.0) / (l_smooth * (1.0 + eta));
  }
};

inline TheoryThresholds thresholds(const SpectralReport& report, double l_smooth) {
  if (!(l_smooth > 0.0)) throw std::invalid_argument("thresholds: L must be positive");
  if (!(report.lambda_n > -1.0))
    throw std::invalid_argument("thresholds: invalid report, lambda_N <= -1");
  TheoryThresholds t;
  t.lambda_n = report.lambda_n;
  t.l_smooth = l_smooth;
  t.eta_min = (1.0 - report.lambda_n) / (1.0 + report.lambda_n);
  t.p_min = t.eta_min / (1.0 + t.eta_min);
  return t;
}

}  // namespace dcdgd
