#pragma once

#include <cmath>
#include <cstdint>
#include <fstream>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "dcdgd/linalg.hpp"
#include "dcdgd/random.hpp"

namespace dcdgd {

/// One node's objective: callable value and gradient over R^dim plus a
/// smoothness-constant estimate computed at construction.
struct LocalObjective {
  int dim = 0;
  std::function<double(std::span<const double>)> value;
  std::function<void(std::span<const double>, std::span<double>)> grad;
  double l_est = 0.0;

  Vec gradient(std::span<const double> x) const {
    Vec g(dim, 0.0);
    grad(x, g);
    return g;
  }
};

struct GlobalObjective {
  int dim = 0;
  std::vector<LocalObjective> locals;
  double f_star_ref = 0.0;  // optional reference value for gap reporting

  int node_count() const { return static_cast<int>(locals.size()); }

  double value(std::span<const double> x) const {
    double s = 0.0;
    for (const auto& f : locals) s += f.value(x);
    return s;
  }

  Vec gradient(std::span<const double> x) const {
    Vec g(dim, 0.0);
    Vec gi(dim, 0.0);
    for (const auto& f : locals) {
      f.grad(x, gi);
      for (int j = 0; j < dim; ++j) g[j] += gi[j];
    }
    return g;
  }

  double l_est_max() const {
    double m = 0.0;
    for (const auto& f : locals) m = std::max(m, f.l_est);
    return m;
  }

  double l_est_sum() const {
    double s = 0.0;
    for (const auto& f : locals) s += f.l_est;
    return s;
  }
};

/// Largest eigenvalue of a symmetric positive semidefinite operator given by
/// its matrix-vector product, via power iteration.
inline double power_iteration(int dim, const std::function<void(std::span<const double>,
                                                                std::span<double>)>& matvec,
                              double tol = 1e-10, int max_iters = 20000,
                              std::uint64_t seed = 12345) {
  RandomStream rng = RandomStream::derive(seed, 0x9077e7);
  Vec v = rng.gaussian_vector(dim);
  double nv = norm2(v);
  if (nv == 0.0) v[0] = 1.0, nv = 1.0;
  for (auto& x : v) x /= nv;
  Vec av(dim, 0.0);
  double lambda = 0.0;
  for (int it = 0; it < max_iters; ++it) {
    matvec(v, av);
    lambda = dot(v, av);
    Vec resid = av;
    axpy(-lambda, v, resid);
    const double r = norm2(resid);
    if (r <= tol * std::max(1.0, std::abs(lambda))) return lambda;
    const double na = norm2(av);
    if (na == 0.0) return 0.0;  // operator annihilates the iterate
    for (int j = 0; j < dim; ++j) v[j] = av[j] / na;
  }
  Vec resid(dim, 0.0);
  matvec(v, av);
  lambda = dot(v, av);
  resid = av;
  axpy(-lambda, v, resid);
  throw std::runtime_error("power_iteration: no convergence, residual " +
                           std::to_string(norm2(resid)));
}

/// Max over the locals' smoothness estimates.
inline double estimate_L(const GlobalObjective& objective) { return objective.l_est_max(); }

struct SyntheticCoefficients {
  std::vector<Vec> a;  // one direction per node
  Vec b;               // one offset per node
};

inline SyntheticCoefficients synthetic_five_coefficients(std::uint64_t seed, int dim) {
  SyntheticCoefficients coeffs;
  for (int node = 0; node < 5; ++node) {
    RandomStream rng = RandomStream::derive(seed, 0x5f1e, static_cast<std::uint64_t>(node));
    coeffs.a.push_back(rng.gaussian_vector(dim));
    coeffs.b.push_back(rng.next_gaussian());
  }
  return coeffs;
}

/// Five local objectives over a shared dimension: two smooth non-convex
/// log terms log(1 + (a'x + b)^2 / 2) and three quadratics (a'x - b)^2 / 2,
/// coefficients drawn from the standard Gaussian.
inline GlobalObjective make_synthetic_five(std::uint64_t seed, int dim = 10) {
  if (dim < 1) throw std::invalid_argument("make_synthetic_five: dim must be positive");
  const SyntheticCoefficients coeffs = synthetic_five_coefficients(seed, dim);
  GlobalObjective obj;
  obj.dim = dim;
  for (int node = 0; node < 5; ++node) {
    auto a = std::make_shared<Vec>(coeffs.a[node]);
    const double b = coeffs.b[node];
    LocalObjective f;
    f.dim = dim;
    const double a_sq = norm2_sq(*a);
    if (node < 2) {
      f.value = [a, b](std::span<const double> x) {
        const double u = dot(*a, x) + b;
        return std::log1p(u * u / 2.0);
      };
      f.grad = [a, b, dim](std::span<const double> x, std::span<double> g) {
        const double u = dot(*a, x) + b;
        const double scale = u / (1.0 + u * u / 2.0);
        for (int j = 0; j < dim; ++j) g[j] = scale * (*a)[j];
      };
      f.l_est = a_sq;  // |d^2/du^2 log(1+u^2/2)| peaks at 1
    } else {
      f.value = [a, b](std::span<const double> x) {
        const double u = dot(*a, x) - b;
        return u * u / 2.0;
      };
      f.grad = [a, b, dim](std::span<const double> x, std::span<double> g) {
        const double u = dot(*a, x) - b;
        for (int j = 0; j < dim; ++j) g[j] = u * (*a)[j];
      };
      // rank-one Hessian a a'; power iteration recovers ||a||^2
      f.l_est = power_iteration(dim, [a](std::span<const double> v, std::span<double> out) {
        const double s = dot(*a, v);
        for (std::size_t j = 0; j < out.size(); ++j) out[j] = s * (*a)[j];
      });
    }
    obj.locals.push_back(std::move(f));
  }
  return obj;
}

struct Dataset {
  int feature_count = 0;
  std::vector<Vec> rows;       // standardized features
  std::vector<int> labels;     // 0/1
  std::uint64_t content_checksum = 0;  // FNV-1a of the raw file bytes

  int row_count() const { return static_cast<int>(rows.size()); }
};

namespace detail {

inline std::uint64_t fnv1a_bytes(const std::string& bytes) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

}  // namespace detail

/// Comma-separated numeric file: feature_count feature columns plus a 0/1
/// label at label_column. Features are standardized to per-column mean 0 and
/// unit variance (columns with zero variance are left centered).
inline Dataset load_csv_dataset(const std::string& path, int feature_count,
                                int label_column,
                                std::optional<std::uint64_t> expected_checksum = std::nullopt,
                                bool standardize = true) {
  if (label_column < 0 || label_column > feature_count)
    throw std::invalid_argument("load_csv_dataset: label_column out of range");
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open dataset file: " + path);
  std::ostringstream raw;
  raw << in.rdbuf();
  const std::string content = raw.str();

  Dataset ds;
  ds.feature_count = feature_count;
  ds.content_checksum = detail::fnv1a_bytes(content);
  if (expected_checksum && *expected_checksum != ds.content_checksum)
    throw std::runtime_error("dataset checksum mismatch for " + path);

  std::istringstream lines(content);
  std::string line;
  int line_no = 0;
  const int columns = feature_count + 1;
  while (std::getline(lines, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::vector<double> fields;
    fields.reserve(columns);
    std::istringstream cells(line);
    std::string cell;
    while (std::getline(cells, cell, ',')) {
      try {
        fields.push_back(std::stod(cell));
      } catch (const std::exception&) {
        throw std::runtime_error(path + ":" + std::to_string(line_no) +
                                 ": cannot parse value '" + cell + "'");
      }
    }
    if (static_cast<int>(fields.size()) != columns)
      throw std::runtime_error(path + ":" + std::to_string(line_no) + ": expected " +
                               std::to_string(columns) + " columns, got " +
                               std::to_string(fields.size()));
    const double label = fields[label_column];
    if (label != 0.0 && label != 1.0)
      throw std::runtime_error(path + ":" + std::to_string(line_no) +
                               ": label must be 0 or 1, got " + std::to_string(label));
    Vec features;
    features.reserve(feature_count);
    for (int c = 0; c < columns; ++c)
      if (c != label_column) features.push_back(fields[c]);
    ds.rows.push_back(std::move(features));
    ds.labels.push_back(static_cast<int>(label));
  }
  if (ds.rows.empty()) throw std::runtime_error("dataset file " + path + " is empty");

  if (standardize) {
    const int n = ds.row_count();
    for (int c = 0; c < feature_count; ++c) {
      double mean = 0.0;
      for (const auto& r : ds.rows) mean += r[c];
      mean /= n;
      double var = 0.0;
      for (const auto& r : ds.rows) var += (r[c] - mean) * (r[c] - mean);
      var /= n;
      const double scale = var > 0.0 ? 1.0 / std::sqrt(var) : 1.0;
      for (auto& r : ds.rows) r[c] = (r[c] - mean) * scale;
    }
  }
  return ds;
}

struct Partition {
  int node_count = 0;
  std::vector<std::vector<int>> node_rows;  // row indices per node
};

/// Seeded shuffle followed by contiguous blocks whose sizes differ by at
/// most one.
inline Partition partition_even(const Dataset& ds, int nodes, std::uint64_t seed = 1) {
  if (nodes <= 0) throw std::invalid_argument("partition_even: node count must be positive");
  if (nodes > ds.row_count())
    throw std::invalid_argument("partition_even: more nodes than rows");
  const int n = ds.row_count();
  std::vector<int> order(n);
  for (int i = 0; i < n; ++i) order[i] = i;
  RandomStream rng = RandomStream::derive(seed, 0x9a47);
  for (int i = n - 1; i > 0; --i)
    std::swap(order[i], order[rng.next_below(static_cast<std::uint64_t>(i) + 1)]);

  Partition part;
  part.node_count = nodes;
  part.node_rows.resize(nodes);
  const int base = n / nodes;
  const int extra = n % nodes;
  int at = 0;
  for (int node = 0; node < nodes; ++node) {
    const int size = base + (node < extra ? 1 : 0);
    part.node_rows[node].assign(order.begin() + at, order.begin() + at + size);
    at += size;
  }
  return part;
}

namespace detail {

inline double softplus(double t) {
  // log(1 + e^t) without overflow
  return t > 0.0 ? t + std::log1p(std::exp(-t)) : std::log1p(std::exp(t));
}

inline double sigmoid(double t) {
  if (t >= 0.0) return 1.0 / (1.0 + std::exp(-t));
  const double e = std::exp(t);
  return e / (1.0 + e);
}

}  // namespace detail

/// Cross-entropy loss over one node's partition rows plus the bounded
/// non-convex regularizer rho * sum_d x_d^2 / (1 + x_d^2).
inline LocalObjective make_logistic_nonconvex(std::shared_ptr<const Dataset> ds,
                                              std::vector<int> row_indices, double rho) {
  if (rho < 0.0) throw std::invalid_argument("make_logistic_nonconvex: rho must be >= 0");
  if (row_indices.empty())
    throw std::invalid_argument("make_logistic_nonconvex: empty partition");
  const int dim = ds->feature_count;
  const auto rows = std::make_shared<std::vector<int>>(std::move(row_indices));
  const int ni = static_cast<int>(rows->size());

  LocalObjective f;
  f.dim = dim;
  f.value = [ds, rows, rho, ni](std::span<const double> x) {
    double loss = 0.0;
    for (int r : *rows) {
      const double t = dot(ds->rows[r], x);
      loss += detail::softplus(t) - ds->labels[r] * t;
    }
    loss /= ni;
    double reg = 0.0;
    for (double xd : x) reg += xd * xd / (1.0 + xd * xd);
    return loss + rho * reg;
  };
  f.grad = [ds, rows, rho, ni, dim](std::span<const double> x, std::span<double> g) {
    for (int j = 0; j < dim; ++j) g[j] = 0.0;
    for (int r : *rows) {
      const double t = dot(ds->rows[r], x);
      const double coeff = detail::sigmoid(t) - ds->labels[r];
      axpy(coeff, ds->rows[r], g);
    }
    for (int j = 0; j < dim; ++j) {
      const double xd = x[j];
      const double denom = 1.0 + xd * xd;
      g[j] = g[j] / ni + rho * 2.0 * xd / (denom * denom);
    }
  };
  // (1/4n) lambda_max(Z'Z) bounds the cross-entropy curvature; the
  // regularizer's second derivative peaks at 2 rho.
  const double zz_top = power_iteration(
      dim, [ds, rows, dim](std::span<const double> v, std::span<double> out) {
        for (int j = 0; j < dim; ++j) out[j] = 0.0;
        for (int r : *rows) {
          const double s = dot(ds->rows[r], v);
          axpy(s, ds->rows[r], out);
        }
      });
  f.l_est = zz_top / (4.0 * ni) + 2.0 * rho;
  return f;
}

/// Full distributed objective over a dataset partition.
inline GlobalObjective make_logistic_global(std::shared_ptr<const Dataset> ds,
                                            const Partition& part, double rho) {
  GlobalObjective obj;
  obj.dim = ds->feature_count;
  for (int node = 0; node < part.node_count; ++node)
    obj.locals.push_back(make_logistic_nonconvex(ds, part.node_rows[node], rho));
  return obj;
}

/// Long-horizon centralized gradient descent, used to produce a reference
/// objective value for gap reporting.
inline double centralized_gd_reference(const GlobalObjective& obj, int iterations,
                                       double step) {
  Vec x(obj.dim, 0.0);
  for (int t = 0; t < iterations; ++t) {
    Vec g = obj.gradient(x);
    axpy(-step, g, x);
    if (!all_finite(x)) throw std::runtime_error("centralized_gd_reference: diverged");
  }
  return obj.value(x);
}

}  // namespace dcdgd
