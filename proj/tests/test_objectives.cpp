#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include "dcdgd/objective.hpp"
#include "dcdgd/random.hpp"

using namespace dcdgd;

namespace {

// Central finite differences, the independent gradient oracle.
Vec fd_gradient(const LocalObjective& f, const Vec& x) {
  Vec g(f.dim);
  for (int j = 0; j < f.dim; ++j) {
    const double h = 1e-5 * (1.0 + std::abs(x[j]));
    Vec xp = x, xm = x;
    xp[j] += h;
    xm[j] -= h;
    g[j] = (f.value(xp) - f.value(xm)) / (2.0 * h);
  }
  return g;
}

double max_rel_grad_error(const LocalObjective& f, const Vec& x) {
  const Vec analytic = f.gradient(x);
  const Vec numeric = fd_gradient(f, x);
  double worst = 0.0;
  for (int j = 0; j < f.dim; ++j) {
    const double scale = std::max({1.0, std::abs(analytic[j]), std::abs(numeric[j])});
    worst = std::max(worst, std::abs(analytic[j] - numeric[j]) / scale);
  }
  return worst;
}

std::string write_temp_dataset(const std::string& name, const std::string& content) {
  const std::string path =
      (std::filesystem::temp_directory_path() / name).string();
  std::ofstream out(path, std::ios::binary);
  out << content;
  return path;
}

std::shared_ptr<const Dataset> small_logistic_dataset() {
  // 40 rows, 6 features, labels from a linear rule with noise
  RandomStream rng = RandomStream::derive(42, 0xda7a);
  auto ds = std::make_shared<Dataset>();
  ds->feature_count = 6;
  Vec w = rng.gaussian_vector(6);
  for (int r = 0; r < 40; ++r) {
    Vec row = rng.gaussian_vector(6);
    const double score = dot(row, w) + 0.3 * rng.next_gaussian();
    ds->labels.push_back(score > 0 ? 1 : 0);
    ds->rows.push_back(std::move(row));
  }
  return ds;
}

}  // namespace

TEST_CASE("synthetic five values at the origin match the closed forms") {
  const std::uint64_t seed = 11;
  const int dim = 6;
  GlobalObjective obj = make_synthetic_five(seed, dim);
  SyntheticCoefficients coeffs = synthetic_five_coefficients(seed, dim);
  Vec zero(dim, 0.0);
  for (int node = 0; node < 5; ++node) {
    const double b = coeffs.b[node];
    const double expected = node < 2 ? std::log1p(b * b / 2.0) : b * b / 2.0;
    CHECK(obj.locals[node].value(zero) == doctest::Approx(expected).epsilon(1e-14));
  }
}

TEST_CASE("quadratic gradient equals (a'x - b) a") {
  const std::uint64_t seed = 12;
  const int dim = 5;
  GlobalObjective obj = make_synthetic_five(seed, dim);
  SyntheticCoefficients coeffs = synthetic_five_coefficients(seed, dim);
  RandomStream rng = RandomStream::derive(13);
  Vec x = rng.gaussian_vector(dim);
  const Vec g = obj.locals[3].gradient(x);
  const double u = dot(coeffs.a[3], x) - coeffs.b[3];
  for (int j = 0; j < dim; ++j)
    CHECK(g[j] == doctest::Approx(u * coeffs.a[3][j]).epsilon(1e-12));
  CHECK(max_rel_grad_error(obj.locals[3], x) <= 1e-6);
}

TEST_CASE("log-term curvature peaks at ||a||^2 where a'x + b = 0") {
  const std::uint64_t seed = 14;
  const int dim = 4;
  GlobalObjective obj = make_synthetic_five(seed, dim);
  SyntheticCoefficients coeffs = synthetic_five_coefficients(seed, dim);
  const Vec& a = coeffs.a[0];
  const double a_sq = norm2_sq(a);
  // x with a'x + b = 0
  Vec x(dim);
  for (int j = 0; j < dim; ++j) x[j] = -coeffs.b[0] * a[j] / a_sq;
  // second directional difference along a/||a||
  const double h = 1e-4;
  Vec xp = x, xm = x;
  axpy(h / std::sqrt(a_sq), a, xp);
  axpy(-h / std::sqrt(a_sq), a, xm);
  const auto& f = obj.locals[0];
  const double second = (f.value(xp) - 2.0 * f.value(x) + f.value(xm)) / (h * h);
  CHECK(second == doctest::Approx(a_sq).epsilon(1e-4));
  CHECK(f.l_est >= a_sq * (1.0 - 1e-9));
}

TEST_CASE("every synthetic local passes the finite-difference suite") {
  GlobalObjective obj = make_synthetic_five(15, 7);
  for (const auto& f : obj.locals) {
    RandomStream rng = RandomStream::derive(16, 0xf0);
    for (int point = 0; point < 10; ++point) {
      Vec x = rng.gaussian_vector(f.dim);
      CHECK(max_rel_grad_error(f, x) <= 1e-5);
    }
  }
}

TEST_CASE("logistic objective at zero is log 2 plus nothing") {
  auto ds = small_logistic_dataset();
  std::vector<int> all_rows(ds->row_count());
  for (int i = 0; i < ds->row_count(); ++i) all_rows[i] = i;
  LocalObjective f = make_logistic_nonconvex(ds, all_rows, 0.1);
  Vec zero(6, 0.0);
  CHECK(f.value(zero) == doctest::Approx(std::log(2.0)).epsilon(1e-12));
}

TEST_CASE("regularizer gradient component is rho/2 at x_d = 1") {
  auto ds = small_logistic_dataset();
  std::vector<int> all_rows(ds->row_count());
  for (int i = 0; i < ds->row_count(); ++i) all_rows[i] = i;
  const double rho = 0.1;
  LocalObjective with_reg = make_logistic_nonconvex(ds, all_rows, rho);
  LocalObjective without_reg = make_logistic_nonconvex(ds, all_rows, 0.0);
  Vec x(6, 0.0);
  x[2] = 1.0;
  const Vec g1 = with_reg.gradient(x);
  const Vec g0 = without_reg.gradient(x);
  CHECK(g1[2] - g0[2] == doctest::Approx(rho / 2.0).epsilon(1e-12));
}

TEST_CASE("logistic gradients match finite differences") {
  auto ds = small_logistic_dataset();
  Partition part = partition_even(*ds, 4, 3);
  for (int node = 0; node < 4; ++node) {
    LocalObjective f = make_logistic_nonconvex(ds, part.node_rows[node], 0.1);
    RandomStream rng = RandomStream::derive(17, node);
    for (int point = 0; point < 10; ++point) {
      Vec x = rng.gaussian_vector(f.dim);
      CHECK(max_rel_grad_error(f, x) <= 1e-5);
    }
  }
}

TEST_CASE("logistic smoothness estimate dominates directional curvature") {
  auto ds = small_logistic_dataset();
  std::vector<int> all_rows(ds->row_count());
  for (int i = 0; i < ds->row_count(); ++i) all_rows[i] = i;
  LocalObjective f = make_logistic_nonconvex(ds, all_rows, 0.1);
  RandomStream rng = RandomStream::derive(18);
  for (int trial = 0; trial < 20; ++trial) {
    Vec x = rng.gaussian_vector(6);
    Vec dir = rng.gaussian_vector(6);
    const double nd = norm2(dir);
    for (auto& v : dir) v /= nd;
    const double h = 1e-4;
    Vec xp = x, xm = x;
    axpy(h, dir, xp);
    axpy(-h, dir, xm);
    const double second = (f.value(xp) - 2.0 * f.value(x) + f.value(xm)) / (h * h);
    CHECK(second <= f.l_est * (1.0 + 1e-3) + 1e-6);
  }
}

TEST_CASE("regularizer term stays bounded with bounded slope") {
  // r(u) = u^2/(1+u^2) in [0,1]; |r'(u)| <= 3*sqrt(3)/8
  const double slope_bound = 3.0 * std::sqrt(3.0) / 8.0;
  for (double u = -10.0; u <= 10.0; u += 0.01) {
    const double r = u * u / (1.0 + u * u);
    CHECK(r >= 0.0);
    CHECK(r <= 1.0);
    const double dr = 2.0 * u / ((1.0 + u * u) * (1.0 + u * u));
    CHECK(std::abs(dr) <= slope_bound + 1e-12);
  }
}

TEST_CASE("csv loader standardizes a hand-checked fixture") {
  // three rows, two features; label in the last column
  const std::string path = write_temp_dataset("dcdgd_fixture.csv",
                                              "1,10,0\n"
                                              "2,20,1\n"
                                              "3,30,1\n");
  Dataset ds = load_csv_dataset(path, 2, 2);
  CHECK(ds.row_count() == 3);
  // column means 2 and 20, population std sqrt(2/3) and sqrt(200/3)
  const double s1 = std::sqrt(2.0 / 3.0);
  CHECK(ds.rows[0][0] == doctest::Approx(-1.0 / s1).epsilon(1e-12));
  CHECK(ds.rows[1][0] == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(ds.rows[2][0] == doctest::Approx(1.0 / s1).epsilon(1e-12));
  CHECK(ds.labels == std::vector<int>{0, 1, 1});
  std::remove(path.c_str());
}

TEST_CASE("csv loader rejects malformed input with its line number") {
  SUBCASE("empty file") {
    const std::string path = write_temp_dataset("dcdgd_empty.csv", "");
    CHECK_THROWS(load_csv_dataset(path, 2, 2));
    std::remove(path.c_str());
  }
  SUBCASE("unparseable cell") {
    const std::string path = write_temp_dataset("dcdgd_badcell.csv", "1,2,0\n1,x,1\n");
    CHECK_THROWS_WITH_AS(load_csv_dataset(path, 2, 2), doctest::Contains(":2"),
                         std::runtime_error);
    std::remove(path.c_str());
  }
  SUBCASE("non-binary label") {
    const std::string path = write_temp_dataset("dcdgd_badlabel.csv", "1,2,7\n");
    CHECK_THROWS_WITH_AS(load_csv_dataset(path, 2, 2), doctest::Contains("label"),
                         std::runtime_error);
    std::remove(path.c_str());
  }
  SUBCASE("column count mismatch") {
    const std::string path = write_temp_dataset("dcdgd_badcols.csv", "1,2,3,0\n");
    CHECK_THROWS(load_csv_dataset(path, 2, 2));
    std::remove(path.c_str());
  }
  SUBCASE("checksum mismatch") {
    const std::string path = write_temp_dataset("dcdgd_sum.csv", "1,2,0\n");
    CHECK_THROWS_WITH_AS(load_csv_dataset(path, 2, 2, 12345u),
                         doctest::Contains("checksum"), std::runtime_error);
    std::remove(path.c_str());
  }
}

TEST_CASE("even partition sizes differ by at most one and cover all rows") {
  Dataset ds;
  ds.feature_count = 1;
  for (int i = 0; i < 4601; ++i) {
    ds.rows.push_back({0.0});
    ds.labels.push_back(0);
  }
  Partition part = partition_even(ds, 10, 5);
  std::vector<int> sizes;
  for (const auto& rows : part.node_rows) sizes.push_back(static_cast<int>(rows.size()));
  std::sort(sizes.begin(), sizes.end(), std::greater<>());
  CHECK(sizes[0] == 461);
  for (int i = 1; i < 10; ++i) CHECK(sizes[i] == 460);
  std::vector<char> seen(4601, 0);
  for (const auto& rows : part.node_rows)
    for (int r : rows) {
      CHECK(!seen[r]);
      seen[r] = 1;
    }

  Partition one = partition_even(ds, 1, 5);
  CHECK(one.node_rows[0].size() == 4601);
  Partition all = partition_even(ds, 4601, 5);
  for (const auto& rows : all.node_rows) CHECK(rows.size() == 1);
  CHECK_THROWS_AS(partition_even(ds, 0, 5), std::invalid_argument);
}

TEST_CASE("smoothness estimates: identity Hessian and rank-one Hessian") {
  // f(x) = ||x||^2 / 2 has unit curvature everywhere
  const double top = power_iteration(5, [](std::span<const double> v, std::span<double> out) {
    for (std::size_t j = 0; j < v.size(); ++j) out[j] = v[j];
  });
  CHECK(top == doctest::Approx(1.0).epsilon(1e-9));

  GlobalObjective obj = make_synthetic_five(19, 6);
  SyntheticCoefficients coeffs = synthetic_five_coefficients(19, 6);
  CHECK(obj.locals[4].l_est == doctest::Approx(norm2_sq(coeffs.a[4])).epsilon(1e-9));
  CHECK(estimate_L(obj) == doctest::Approx(obj.l_est_max()));
}

TEST_CASE("power iteration reports non-convergence with the residual") {
  // plane rotation has no dominant eigenvector for the power method
  auto rotate = [](std::span<const double> v, std::span<double> out) {
    out[0] = -v[1];
    out[1] = v[0];
  };
  CHECK_THROWS_WITH_AS(power_iteration(2, rotate, 1e-14, 50),
                       doctest::Contains("residual"), std::runtime_error);
}

TEST_CASE("global objective is the exact sum of its locals") {
  GlobalObjective obj = make_synthetic_five(21, 5);
  RandomStream rng = RandomStream::derive(22);
  Vec x = rng.gaussian_vector(5);
  double v = 0.0;
  Vec g(5, 0.0);
  for (const auto& f : obj.locals) {
    v += f.value(x);
    Vec gi = f.gradient(x);
    for (int j = 0; j < 5; ++j) g[j] += gi[j];
  }
  CHECK(obj.value(x) == doctest::Approx(v).epsilon(1e-12));
  const Vec gg = obj.gradient(x);
  for (int j = 0; j < 5; ++j) CHECK(gg[j] == doctest::Approx(g[j]).epsilon(1e-12));
}

TEST_CASE("centralized reference descends a quadratic to its optimum") {
  GlobalObjective obj;
  obj.dim = 3;
  for (int node = 0; node < 2; ++node) {
    LocalObjective f;
    f.dim = 3;
    f.value = [](std::span<const double> x) { return 0.5 * norm2_sq(x); };
    f.grad = [](std::span<const double> x, std::span<double> g) {
      for (std::size_t j = 0; j < x.size(); ++j) g[j] = x[j];
    };
    f.l_est = 1.0;
    obj.locals.push_back(std::move(f));
  }
  // start away from zero so the descent has work to do
  GlobalObjective shifted = obj;
  shifted.locals[0].value = [](std::span<const double> x) {
    Vec y(x.begin(), x.end());
    y[0] -= 2.0;
    return 0.5 * norm2_sq(y);
  };
  shifted.locals[0].grad = [](std::span<const double> x, std::span<double> g) {
    for (std::size_t j = 0; j < x.size(); ++j) g[j] = x[j];
    g[0] -= 2.0;
  };
  const double ref = centralized_gd_reference(shifted, 2000, 0.25);
  // min of 0.5|x-2e1|^2 + 0.5|x|^2 is at x = e1, value 0.5 + 0.5 = 1
  CHECK(ref == doctest::Approx(1.0).epsilon(1e-6));
}
