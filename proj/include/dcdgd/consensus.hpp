#pragma once

#include <cmath>
#include <cstdio>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "dcdgd/linalg.hpp"
#include "dcdgd/topology.hpp"

namespace dcdgd {

/// All numeric tolerances used when validating and analyzing consensus
/// matrices, gathered in one place so tests can reference them.
struct ValidationTolerances {
  double row_sum = 1e-10;
  double symmetry = 1e-12;
  double unit_eigenvalue = 1e-8;
  double eigen_residual = 1e-10;
  double jacobi_offdiag = 1e-12;
  int jacobi_max_sweeps = 100;
};

inline constexpr ValidationTolerances kTolerances{};

/// Symmetric doubly stochastic weight matrix whose off-diagonal sparsity
/// pattern matches an undirected connected topology.
struct ConsensusMatrix {
  int n = 0;
  Matrix weights;
  Topology topology;
};

struct MatrixValidation {
  bool ok = true;
  std::vector<std::string> violations;

  void fail(std::string msg) {
    ok = false;
    violations.push_back(std::move(msg));
  }
};

namespace detail {

inline std::string fmt_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace detail

/// Checks double stochasticity, symmetry and the topology-defined sparsity
/// pattern. Spectrum checks live in spectral.hpp and are run by load_matrix.
inline MatrixValidation validate_structure(const Matrix& w, const Topology& topology,
                                           const ValidationTolerances& tol = kTolerances) {
  MatrixValidation v;
  const int n = w.rows();
  if (n != w.cols()) {
    v.fail("matrix is not square");
    return v;
  }
  if (n < 2) {
    v.fail("matrix order must be at least 2, got " + std::to_string(n));
    return v;
  }
  if (topology.n != n) {
    v.fail("topology has " + std::to_string(topology.n) + " nodes but matrix order is " +
           std::to_string(n));
    return v;
  }
  int unreachable = topology.first_unreachable();
  if (unreachable >= 0)
    v.fail("topology is disconnected: node " + std::to_string(unreachable) + " is unreachable");

  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j)
      if (std::abs(w(i, j) - w(j, i)) > tol.symmetry)
        v.fail("asymmetry at (" + std::to_string(i) + "," + std::to_string(j) +
               "): " + detail::fmt_double(w(i, j)) + " vs " + detail::fmt_double(w(j, i)));

  for (int i = 0; i < n; ++i) {
    double rs = 0.0, cs = 0.0;
    for (int j = 0; j < n; ++j) {
      rs += w(i, j);
      cs += w(j, i);
    }
    if (std::abs(rs - 1.0) > tol.row_sum)
      v.fail("row sum " + std::to_string(i) + " is " + detail::fmt_double(rs));
    if (std::abs(cs - 1.0) > tol.row_sum)
      v.fail("column sum " + std::to_string(i) + " is " + detail::fmt_double(cs));
  }

  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j) {
      const bool adjacent = topology.has_edge(i, j);
      if (adjacent && !(w(i, j) > 0.0))
        v.fail("edge (" + std::to_string(i) + "," + std::to_string(j) +
               ") has non-positive weight " + detail::fmt_double(w(i, j)));
      if (!adjacent && w(i, j) != 0.0)
        v.fail("non-adjacent pair (" + std::to_string(i) + "," + std::to_string(j) +
               ") has weight " + detail::fmt_double(w(i, j)));
    }
  return v;
}

/// Metropolis-Hastings weights: 1/(1+max(deg_i,deg_j)) on edges, diagonal
/// absorbs the remainder.
inline ConsensusMatrix build_metropolis(const Topology& topology) {
  int unreachable = topology.first_unreachable();
  if (unreachable >= 0)
    throw std::invalid_argument("build_metropolis: topology is disconnected, node " +
                                std::to_string(unreachable) + " is unreachable");
  if (topology.n < 2) throw std::invalid_argument("build_metropolis: need at least 2 nodes");
  const int n = topology.n;
  const auto deg = topology.degrees();
  Matrix w(n, n, 0.0);
  for (const auto& [i, j] : topology.edges) {
    const double wij = 1.0 / (1.0 + std::max(deg[i], deg[j]));
    w(i, j) = wij;
    w(j, i) = wij;
  }
  for (int i = 0; i < n; ++i) {
    double off = 0.0;
    for (int j = 0; j < n; ++j)
      if (j != i) off += w(i, j);
    w(i, i) = 1.0 - off;
  }
  return ConsensusMatrix{n, std::move(w), topology};
}

/// Half-lazy variant (I + W)/2 of the Metropolis matrix; its spectrum is
/// strictly positive, which is handy for building test topologies with
/// lambda_N > 0.
inline ConsensusMatrix build_lazy_metropolis(const Topology& topology) {
  ConsensusMatrix m = build_metropolis(topology);
  for (int i = 0; i < m.n; ++i)
    for (int j = 0; j < m.n; ++j) m.weights(i, j) = (i == j ? 0.5 : 0.0) + 0.5 * m.weights(i, j);
  return m;
}

inline ConsensusMatrix build_uniform_complete(int n) {
  Topology t = make_complete(n);
  Matrix w(n, n, 1.0 / n);
  return ConsensusMatrix{n, std::move(w), std::move(t)};
}

struct LoadResult {
  std::optional<ConsensusMatrix> matrix;
  MatrixValidation validation;
};

/// Matrix file format: first line `n`, then n lines of n numbers.
inline Matrix read_matrix_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open matrix file: " + path);
  int n = 0;
  if (!(in >> n) || n < 1) throw std::runtime_error("matrix file " + path + ": bad order");
  Matrix w(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      if (!(in >> w(i, j)))
        throw std::runtime_error("matrix file " + path + ": truncated at row " +
                                 std::to_string(i));
  return w;
}

inline void write_matrix_file(const Matrix& w, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write matrix file: " + path);
  out << w.rows() << "\n";
  for (int i = 0; i < w.rows(); ++i) {
    for (int j = 0; j < w.cols(); ++j) out << (j ? " " : "") << detail::fmt_double(w(i, j));
    out << "\n";
  }
}

/// Topology implied by the nonzero off-diagonal pattern of a raw matrix.
inline Topology implied_topology(const Matrix& w) {
  Topology t;
  t.n = w.rows();
  for (int i = 0; i < t.n; ++i)
    for (int j = i + 1; j < t.n; ++j)
      if (w(i, j) != 0.0 || w(j, i) != 0.0) t.add_edge(i, j);
  return t;
}

}  // namespace dcdgd
