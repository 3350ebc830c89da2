#include <catch_amalgamated.hpp>

#include "aurl/classgen.hpp"

using namespace aurl;

namespace {

Matrix rows(std::initializer_list<Vector> rs) {
  Matrix m(rs.size(), rs.begin()->size());
  std::size_t i = 0;
  for (const auto& r : rs) m.set_row(i++, r);
  return m;
}

Matrix identity(std::size_t n) {
  Matrix m(n, n);
  for (std::size_t i = 0; i < n; ++i) m.at(i, i) = 1.0;
  return m;
}

// Independent nonnegative-least-squares oracle (projected coordinate
// descent): solves min ||A x - b||, x >= 0. Small systems only.
double nnls_residual(const Matrix& a_cols /* d x D */, const Vector& b) {
  const std::size_t d = a_cols.rows, n = a_cols.cols;
  Vector x(n, 0.0);
  Vector col_sq(n, 0.0);
  for (std::size_t j = 0; j < n; ++j)
    for (std::size_t i = 0; i < d; ++i) col_sq[j] += a_cols.at(i, j) * a_cols.at(i, j);
  Vector r = b;  // residual b - A x
  for (int sweep = 0; sweep < 20000; ++sweep) {
    double moved = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      if (col_sq[j] == 0.0) continue;
      double g = 0.0;
      for (std::size_t i = 0; i < d; ++i) g += a_cols.at(i, j) * r[i];
      double nx = x[j] + g / col_sq[j];
      if (nx < 0.0) nx = 0.0;
      const double delta = nx - x[j];
      if (delta != 0.0) {
        for (std::size_t i = 0; i < d; ++i) r[i] -= delta * a_cols.at(i, j);
        x[j] = nx;
        moved += std::abs(delta);
      }
    }
    if (moved < 1e-15) break;
  }
  return norm2(r);
}

}  // namespace

TEST_CASE("identity transform reproduces the normalized sources") {
  const Matrix w = rows({{3, 0, 0}, {0, 2, 0}});
  const Matrix s = rows({{0, 5, 0}, {0, 0, 7}});
  const Matrix norm_w = rows({{1, 0, 0}, {0, 1, 0}});
  const Matrix norm_s = rows({{0, 1, 0}, {0, 0, 1}});
  const SyntheticClassBank bank = apply_transform(norm_w, norm_s, identity(2));
  CHECK(bank.theta == norm_w);
  CHECK(bank.z == norm_s);
}

TEST_CASE("a transform row is a plain linear combination") {
  const Matrix norm_w = rows({{1, 0, 0, 0}, {0, 1, 0, 0}});
  Matrix m(1, 2);
  m.a = {0.5, 0.5};
  const SyntheticClassBank bank = apply_transform(norm_w, norm_w, m);
  CHECK(bank.theta.row_vec(0) == Vector{0.5, 0.5, 0.0, 0.0});
}

TEST_CASE("alpha = 0 keeps synthetic rows inside the conic hull") {
  Rng rng(2);
  const std::size_t d = 4, k = 6;
  Matrix w(k, d), s(k, d);
  for (std::size_t i = 0; i < k; ++i) {
    w.set_row(i, gaussian_vector(d, rng));
    s.set_row(i, gaussian_vector(d, rng));
  }
  GeneratorConfig cfg;
  cfg.k_u = 20;
  cfg.d_classes = 0;
  cfg.alpha = 0.0;
  const SyntheticClassBank bank = synthesize(w, s, cfg, rng);

  // Independent oracle: each theta row must be expressible as a nonnegative
  // combination of the normalized centers.
  Matrix a_cols(d, k);
  for (std::size_t j = 0; j < k; ++j) {
    const Vector nw = normalize(w.row_vec(j));
    for (std::size_t i = 0; i < d; ++i) a_cols.at(i, j) = nw[i];
  }
  for (std::size_t r = 0; r < bank.theta.rows; ++r) {
    CHECK(nnls_residual(a_cols, bank.theta.row_vec(r)) < 1e-8);
  }
}

TEST_CASE("bank is reproducible bit-exactly from the stored transform") {
  Rng rng(5);
  Matrix w(5, 3), s(5, 3);
  for (std::size_t i = 0; i < 5; ++i) {
    w.set_row(i, gaussian_vector(3, rng));
    s.set_row(i, gaussian_vector(3, rng));
  }
  GeneratorConfig cfg;
  cfg.k_u = 12;
  cfg.alpha = -0.5;
  cfg.d_classes = 0;
  const SyntheticClassBank bank = synthesize(w, s, cfg, rng);

  Matrix norm_w(5, 3), norm_s(5, 3);
  for (std::size_t i = 0; i < 5; ++i) {
    norm_w.set_row(i, normalize(w.row_vec(i)));
    norm_s.set_row(i, normalize(s.row_vec(i)));
  }
  const SyntheticClassBank again = apply_transform(norm_w, norm_s, bank.m);
  CHECK(again.theta == bank.theta);
  CHECK(again.z == bank.z);

  // All transform entries in [alpha, 1).
  for (double x : bank.m.a) {
    CHECK(x >= cfg.alpha);
    CHECK(x < 1.0);
  }

  // Same seed, same bank.
  Rng r1(123), r2(123);
  const SyntheticClassBank b1 = synthesize(w, s, cfg, r1);
  const SyntheticClassBank b2 = synthesize(w, s, cfg, r2);
  CHECK(b1.theta == b2.theta);
  CHECK(b1.m == b2.m);
}

TEST_CASE("synthesize validation") {
  Rng rng(1);
  Matrix w(4, 3, 1.0), s(4, 3, 1.0);
  GeneratorConfig cfg;
  cfg.k_u = 4;

  cfg.alpha = 1.0;
  CHECK_THROWS_AS(synthesize(w, s, cfg, rng), error);  // InvalidAlpha
  cfg.alpha = -1.5;
  CHECK_THROWS_AS(synthesize(w, s, cfg, rng), error);
  cfg.alpha = 0.0;

  Matrix s_bad(3, 3, 1.0);
  CHECK_THROWS_AS(synthesize(w, s_bad, cfg, rng), error);  // row count mismatch

  cfg.d_classes = 9;  // more than available classes
  CHECK_THROWS_AS(synthesize(w, s, cfg, rng), error);
  cfg.d_classes = 0;

  Matrix w_zero = w;
  for (std::size_t c = 0; c < 3; ++c) w_zero.at(1, c) = 0.0;
  CHECK_THROWS_AS(synthesize(w_zero, s, cfg, rng), error);  // ZeroNorm on a source row
}

TEST_CASE("coverage statistics") {
  const Matrix theta = rows({{1, 0, 0}, {0, 1, 0}});
  CHECK(coverage_stats(theta, theta) == Catch::Approx(0.0).margin(1e-12));

  const Matrix single = rows({{1.0, 0.0}});
  const Matrix probe = rows({{-1.0, 0.0}});
  CHECK(coverage_stats(single, probe) == Catch::Approx(2.0).margin(1e-12));

  CHECK_THROWS_AS(coverage_stats(Matrix(0, 3), theta), error);
}

TEST_CASE("coverage improves as alpha decreases") {
  // 10 random unit centers in 3-D, 500 synthetic classes, 1000 uniform
  // probes: extrapolation (alpha < 0) covers more of the sphere.
  Rng dir_rng(40);
  Matrix w(10, 3);
  for (std::size_t i = 0; i < 10; ++i) w.set_row(i, normalize(gaussian_vector(3, dir_rng)));

  Rng probe_rng(41);
  Matrix probes(1000, 3);
  for (std::size_t i = 0; i < 1000; ++i) probes.set_row(i, normalize(gaussian_vector(3, probe_rng)));

  const std::vector<double> alphas{0.9, 0.5, 0.0, -0.5, -1.0};
  std::vector<double> coverage;
  for (const double alpha : alphas) {
    GeneratorConfig cfg;
    cfg.k_u = 500;
    cfg.alpha = alpha;
    cfg.d_classes = 0;
    Rng rng(42);
    const SyntheticClassBank bank = synthesize(w, w, cfg, rng);
    coverage.push_back(coverage_stats(bank.theta, probes));
  }
  for (std::size_t i = 1; i < coverage.size(); ++i) {
    CHECK(coverage[i] < coverage[i - 1] * 1.05);  // 5% noise band
  }
  CHECK(coverage.back() < coverage.front());
}
