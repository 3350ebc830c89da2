#include <catch_amalgamated.hpp>

#include "aurl/losses.hpp"
#include "aurl/projector.hpp"

using namespace aurl;

namespace {

Matrix rows(std::initializer_list<Vector> rs) {
  Matrix m(rs.size(), rs.begin()->size());
  std::size_t i = 0;
  for (const auto& r : rs) m.set_row(i++, r);
  return m;
}

}  // namespace

TEST_CASE("sup_contrastive closed forms") {
  const LossConfig l10{10.0};

  // Equal cosines to both classes: uniform softmax over K=2.
  {
    const Vector v{1, 0};
    const Matrix s = rows({{0, 1}, {0, -1}});  // both orthogonal to v
    const LossBreakdown bd = sup_contrastive(v, s, 0, l10);
    CHECK(bd.total == Catch::Approx(std::log(2.0)).margin(1e-12));
  }

  // v = s_pos with one orthogonal negative: log(1 + e^{-lambda}).
  {
    const Vector v{1, 0};
    const Matrix s = rows({{1, 0}, {0, 1}});
    const LossBreakdown bd = sup_contrastive(v, s, 0, l10);
    CHECK(bd.total == Catch::Approx(std::log1p(std::exp(-10.0))).margin(1e-12));
    CHECK(bd.total == Catch::Approx(4.5398899216870319e-05).margin(1e-12));
  }

  // Two orthogonal negatives: alignment -1, uniformity ln2/10.
  {
    const Vector v{1, 0, 0};
    const Matrix s = rows({{1, 0, 0}, {0, 1, 0}, {0, 0, 1}});
    const LossBreakdown bd = sup_contrastive(v, s, 0, l10);
    CHECK(bd.alignment_term == Catch::Approx(-1.0).margin(1e-12));
    CHECK(bd.uniformity_term == Catch::Approx(std::log(2.0) / 10.0).margin(1e-12));
  }

  const Vector v{1, 0};
  const Matrix s = rows({{1, 0}, {0, 1}});
  CHECK_THROWS_AS(sup_contrastive(v, s, 5, l10), error);                // BadIndex
  CHECK_THROWS_AS(sup_contrastive(Vector{1, 0, 0}, s, 0, l10), error);  // DimMismatch
  CHECK_THROWS_AS(sup_contrastive(Vector{0, 0}, s, 0, l10), error);     // ZeroNorm
  CHECK_THROWS_AS(sup_contrastive(v, rows({{1, 0}}), 0, l10), error);   // K < 2
}

TEST_CASE("decomposition identity on random instances") {
  Rng rng(101);
  for (int t = 0; t < 1000; ++t) {
    const std::size_t d = 2 + rng.uniform_index(8);
    const std::size_t k = 2 + rng.uniform_index(8);
    const double lambda = std::vector<double>{1.0, 10.0, 100.0}[rng.uniform_index(3)];
    const LossConfig cfg{lambda};
    const Vector v = gaussian_vector(d, rng);
    Matrix s(k, d);
    for (std::size_t j = 0; j < k; ++j) s.set_row(j, gaussian_vector(d, rng));
    const std::size_t pos = rng.uniform_index(k);

    const LossBreakdown bd = sup_contrastive(v, s, pos, cfg);
    const double rebuilt = lambda * softplus_lambda(bd.alignment_term + bd.uniformity_term, lambda);
    CHECK(std::abs(bd.total - rebuilt) < 1e-9);

    // Including the positive in the denominator is one softplus away from
    // the self-supervised form.
    const double self_val = self_contrastive(v, s, pos, cfg);
    CHECK(std::abs(bd.total - softplus_lambda(self_val, 1.0)) < 1e-9);
    CHECK(bd.total > 0.0);
    CHECK(bd.alignment_term >= -1.0);
    CHECK(bd.alignment_term <= 1.0);
  }
}

TEST_CASE("losses are scale invariant") {
  Rng rng(55);
  const LossConfig cfg{10.0};
  for (int t = 0; t < 200; ++t) {
    const std::size_t d = 3, k = 4;
    Vector v = gaussian_vector(d, rng);
    Matrix s(k, d);
    for (std::size_t j = 0; j < k; ++j) s.set_row(j, gaussian_vector(d, rng));
    const double before = sup_contrastive(v, s, 1, cfg).total;
    const double self_before = self_contrastive(v, s, 1, cfg);

    const double a = std::exp(rng.uniform(-2.0, 2.0));
    for (auto& x : v) x *= a;
    const std::size_t row = rng.uniform_index(k);
    const double b = std::exp(rng.uniform(-2.0, 2.0));
    for (std::size_t c = 0; c < d; ++c) s.at(row, c) *= b;

    CHECK(std::abs(sup_contrastive(v, s, 1, cfg).total - before) < 1e-9);
    CHECK(std::abs(self_contrastive(v, s, 1, cfg) - self_before) < 1e-9);
  }
}

TEST_CASE("self_contrastive closed forms") {
  const LossConfig l10{10.0};
  {
    const Vector v{1, 0};
    const Matrix s = rows({{0, 1}, {0, -1}});
    CHECK(self_contrastive(v, s, 0, l10) == Catch::Approx(0.0).margin(1e-12));
  }
  {
    const Vector v{1, 0};
    const Matrix s = rows({{1, 0}, {0, 1}});
    CHECK(self_contrastive(v, s, 0, l10) == Catch::Approx(-10.0).margin(1e-12));
  }
  {
    const LossConfig l1{1.0};
    const Vector v{1, 0, 0};
    const Matrix s = rows({{1, 0, 0}, {0, 1, 0}, {0, 0, 1}});
    CHECK(self_contrastive(v, s, 0, l1) == Catch::Approx(-1.0 + std::log(2.0)).margin(1e-12));
  }
}

TEST_CASE("sup gradient vanishes at the symmetric optimum") {
  // v = s_pos, all negatives antipodal, large lambda: the softmax saturates
  // and the slope w.r.t. the query dies out.
  const LossConfig cfg{50.0};
  const Vector v{1, 0, 0};
  const Matrix s = rows({{1, 0, 0}, {-1, 0, 0}, {-1, 0, 0}});
  const GradPair g = sup_contrastive_grad(v, s, 0, cfg);
  CHECK(norm2(g.d_query) < 1e-6);
}

TEST_CASE("duplicated negative rows split the gradient additively") {
  const LossConfig cfg{3.0};
  const Vector v = normalize(Vector{0.3, -0.7, 0.2});
  const Vector a = normalize(Vector{-0.1, 0.4, 0.8});
  Matrix s = rows({{1, 0, 0}, a, a});
  const GradPair g = sup_contrastive_grad(v, s, 0, cfg);
  for (std::size_t c = 0; c < 3; ++c)
    CHECK(g.d_prototypes.at(1, c) == Catch::Approx(g.d_prototypes.at(2, c)).margin(1e-12));

  // Moving both copies together costs the sum of the per-copy gradients.
  const auto fn = [&](std::span<const double> p) {
    Matrix sd = s;
    for (std::size_t c = 0; c < 3; ++c) {
      sd.at(1, c) = p[c];
      sd.at(2, c) = p[c];
    }
    return sup_contrastive(v, sd, 0, cfg).total;
  };
  Vector combined(3);
  for (std::size_t c = 0; c < 3; ++c) combined[c] = 2.0 * g.d_prototypes.at(1, c);
  const auto rep = finite_diff_check(fn, a, combined, 1e-6, 1e-4);
  CHECK(rep.pass);
}

TEST_CASE("gradients match finite differences") {
  Rng rng(77);
  for (int t = 0; t < 25; ++t) {
    const std::size_t d = 5, k = 4;
    const LossConfig cfg{10.0};
    const Vector v = normalize(gaussian_vector(d, rng));
    Matrix s(k, d);
    for (std::size_t j = 0; j < k; ++j) s.set_row(j, normalize(gaussian_vector(d, rng)));
    const std::size_t pos = rng.uniform_index(k);

    std::vector<double> params(v);
    params.insert(params.end(), s.a.begin(), s.a.end());

    {
      const GradPair g = sup_contrastive_grad(v, s, pos, cfg);
      std::vector<double> analytic(g.d_query);
      analytic.insert(analytic.end(), g.d_prototypes.a.begin(), g.d_prototypes.a.end());
      const auto fn = [&](std::span<const double> p) {
        const Vector vv(p.begin(), p.begin() + d);
        Matrix ss(k, d);
        std::copy(p.begin() + d, p.end(), ss.a.begin());
        return sup_contrastive(vv, ss, pos, cfg).total;
      };
      CHECK(finite_diff_check(fn, params, analytic, 1e-6, 1e-4).pass);
    }
    {
      const GradPair g = self_contrastive_grad(v, s, pos, cfg);
      std::vector<double> analytic(g.d_query);
      analytic.insert(analytic.end(), g.d_prototypes.a.begin(), g.d_prototypes.a.end());
      const auto fn = [&](std::span<const double> p) {
        const Vector vv(p.begin(), p.begin() + d);
        Matrix ss(k, d);
        std::copy(p.begin() + d, p.end(), ss.a.begin());
        return self_contrastive(vv, ss, pos, cfg);
      };
      CHECK(finite_diff_check(fn, params, analytic, 1e-6, 1e-4).pass);
    }
  }
}

TEST_CASE("classification loss") {
  const LossConfig l10{10.0};
  // Uniform cosines give ln K.
  {
    const Vector v{1, 0, 0};
    const Matrix w = rows({{0, 1, 0}, {0, 0, 1}, {0, -1, 0}});
    CHECK(classification_loss(v, w, 0, l10).first == Catch::Approx(std::log(3.0)).margin(1e-12));
  }
  // v = w_pos, two orthogonal others: log(1 + 2 e^{-10}).
  {
    const Vector v{1, 0, 0};
    const Matrix w = rows({{1, 0, 0}, {0, 1, 0}, {0, 0, 1}});
    const double expected = std::log1p(2.0 * std::exp(-10.0));
    CHECK(classification_loss(v, w, 0, l10).first == Catch::Approx(expected).margin(1e-12));
    CHECK(expected == Catch::Approx(9.0799e-5).epsilon(1e-4));
  }
}

TEST_CASE("unseen loss") {
  const LossConfig l10{10.0};
  // Theta = Z = orthonormal rows: every row contributes log(1 + 2 e^{-10}).
  {
    const Matrix eye = rows({{1, 0, 0}, {0, 1, 0}, {0, 0, 1}});
    const auto res = unseen_loss(eye, eye, l10);
    CHECK(res.value == Catch::Approx(std::log1p(2.0 * std::exp(-10.0))).margin(1e-12));
  }
  // All rows identical: uniform softmax over K_u = 2.
  {
    const Matrix m = rows({{0.5, 0.5}, {0.5, 0.5}});
    CHECK(unseen_loss(m, m, l10).value == Catch::Approx(std::log(2.0)).margin(1e-12));
  }
  // Gradient check on a random 4x5 instance.
  {
    Rng rng(31);
    Matrix theta(4, 5), z(4, 5);
    for (std::size_t i = 0; i < 4; ++i) {
      theta.set_row(i, gaussian_vector(5, rng));
      z.set_row(i, gaussian_vector(5, rng));
    }
    const auto res = unseen_loss(theta, z, l10);
    std::vector<double> params(theta.a);
    params.insert(params.end(), z.a.begin(), z.a.end());
    std::vector<double> analytic(res.d_theta.a);
    analytic.insert(analytic.end(), res.d_z.a.begin(), res.d_z.a.end());
    const auto fn = [&](std::span<const double> p) {
      Matrix th(4, 5), zz(4, 5);
      std::copy(p.begin(), p.begin() + 20, th.a.begin());
      std::copy(p.begin() + 20, p.end(), zz.a.begin());
      return unseen_loss(th, zz, l10).value;
    };
    CHECK(finite_diff_check(fn, params, analytic, 1e-6, 1e-4).pass);
  }

  Matrix a(3, 2, 1.0), b(2, 2, 1.0);
  CHECK_THROWS_AS(unseen_loss(a, b, l10), error);  // ShapeMismatch
  Matrix z(2, 2, 0.0);
  CHECK_THROWS_AS(unseen_loss(z, z, l10), error);  // ZeroNormRow
}

TEST_CASE("mse baseline") {
  const Vector v{1, 0};
  CHECK(mse_baseline(v, v).first == 0.0);
  CHECK(mse_baseline(Vector{1, 0}, Vector{0, 1}).first == Catch::Approx(1.0).margin(1e-15));
  CHECK_THROWS_AS(mse_baseline(Vector{1, 0}, Vector{1, 0, 0}), error);

  Rng rng(13);
  const Vector q = gaussian_vector(6, rng);
  const Vector s = gaussian_vector(6, rng);
  const auto [value, grad] = mse_baseline(q, s);
  const auto fn = [&](std::span<const double> p) { return mse_baseline(Vector(p.begin(), p.end()), s).first; };
  CHECK(finite_diff_check(fn, q, grad, 1e-6, 1e-6).pass);
}

TEST_CASE("total is the plain sum") {
  CHECK(total_aurl(0, 0, 0) == 0.0);
  CHECK(total_aurl(1.5, -0.25, 2.0) == 1.5 - 0.25 + 2.0);
}
