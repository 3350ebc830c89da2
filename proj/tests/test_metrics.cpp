#include <catch_amalgamated.hpp>

#include <map>

#include "aurl/metrics.hpp"

using namespace aurl;

namespace {

Matrix rows(std::initializer_list<Vector> rs) {
  Matrix m(rs.size(), rs.begin()->size());
  std::size_t i = 0;
  for (const auto& r : rs) m.set_row(i++, r);
  return m;
}

// Brute-force references written independently of the library path.
double closeness_reference(const Matrix& v, const std::vector<int>& labels, const Matrix& s,
                           const std::vector<int>& ids) {
  std::map<int, std::size_t> row_of;
  for (std::size_t i = 0; i < ids.size(); ++i) row_of[ids[i]] = i;
  std::map<int, std::vector<std::size_t>> members;
  for (std::size_t n = 0; n < v.rows; ++n) members[labels[n]].push_back(n);
  double acc = 0.0;
  for (const auto& [cid, idx] : members) {
    double inner = 0.0;
    for (const auto n : idx) inner += 1.0 - cosine(v.row_vec(n), s.row_vec(row_of.at(cid)));
    acc += inner / static_cast<double>(idx.size());
  }
  return acc / static_cast<double>(members.size());
}

double dispersion_reference(const Matrix& v, const std::vector<int>& labels) {
  std::map<int, std::vector<std::size_t>> members;
  for (std::size_t n = 0; n < v.rows; ++n) members[labels[n]].push_back(n);
  std::vector<Vector> means;
  for (const auto& [cid, idx] : members) {
    Vector mean(v.cols, 0.0);
    for (const auto n : idx) {
      const Vector u = normalize(v.row_vec(n));
      for (std::size_t j = 0; j < v.cols; ++j) mean[j] += u[j] / static_cast<double>(idx.size());
    }
    means.push_back(mean);
  }
  double acc = 0.0;
  for (std::size_t i = 0; i < means.size(); ++i) {
    double best = 2.0;
    for (std::size_t k = 0; k < means.size(); ++k)
      if (k != i) best = std::min(best, 1.0 - cosine(means[i], means[k]));
    acc += best;
  }
  return acc / static_cast<double>(means.size());
}

}  // namespace

TEST_CASE("closeness trivial cases") {
  // Every sample equals its class semantic: distance 0.
  const Matrix s = rows({{1, 0}, {0, 1}});
  const Matrix v = rows({{1, 0}, {1, 0}, {0, 1}});
  CHECK(closeness(v, {0, 0, 1}, s, {0, 1}) == 0.0);

  // Single orthogonal pair: distance 1.
  const Matrix v1 = rows({{0, 1}});
  const Matrix s1 = rows({{1, 0}});
  CHECK(closeness(v1, {3}, s1, {3}) == Catch::Approx(1.0).margin(1e-15));

  CHECK_THROWS_AS(closeness(v1, {4}, s1, {3}), error);  // MissingClass
}

TEST_CASE("closeness matches the brute-force reference") {
  Rng rng(20);
  for (int t = 0; t < 50; ++t) {
    const std::size_t k = 3, per = 4, d = 6;
    Matrix v(k * per, d);
    std::vector<int> labels;
    for (std::size_t c = 0; c < k; ++c)
      for (std::size_t n = 0; n < per; ++n) {
        v.set_row(c * per + n, gaussian_vector(d, rng));
        labels.push_back(static_cast<int>(c) * 7);  // ids need not be dense
      }
    Matrix s(k, d);
    std::vector<int> ids;
    for (std::size_t c = 0; c < k; ++c) {
      s.set_row(c, gaussian_vector(d, rng));
      ids.push_back(static_cast<int>(c) * 7);
    }
    CHECK(std::abs(closeness(v, labels, s, ids) - closeness_reference(v, labels, s, ids)) < 1e-12);
  }
}

TEST_CASE("dispersion trivial cases") {
  const Matrix anti = rows({{1, 0}, {-1, 0}});
  CHECK(dispersion(anti, {0, 1}) == Catch::Approx(2.0).margin(1e-12));

  const Matrix same = rows({{1, 0}, {1, 0}});
  CHECK(dispersion(same, {0, 1}) == Catch::Approx(0.0).margin(1e-12));

  CHECK_THROWS_AS(dispersion(same, {0, 0}), error);  // SingleClass

  // A class whose unit samples cancel out has no usable mean.
  const Matrix cancel = rows({{1, 0}, {-1, 0}, {0, 1}});
  CHECK_THROWS_AS(dispersion(cancel, {0, 0, 1}), error);  // ZeroNormMean
}

TEST_CASE("dispersion matches the brute-force reference") {
  Rng rng(21);
  for (int t = 0; t < 50; ++t) {
    const std::size_t k = 5, per = 3, d = 4;
    Matrix v(k * per, d);
    std::vector<int> labels;
    for (std::size_t c = 0; c < k; ++c) {
      const Vector center = normalize(gaussian_vector(d, rng));
      for (std::size_t n = 0; n < per; ++n) {
        Vector x = center;
        for (std::size_t j = 0; j < d; ++j) x[j] += 0.2 * rng.gaussian();
        v.set_row(c * per + n, x);
        labels.push_back(static_cast<int>(c));
      }
    }
    CHECK(std::abs(dispersion(v, labels) - dispersion_reference(v, labels)) < 1e-12);
  }
}

TEST_CASE("metrics ignore positive per-vector rescaling") {
  Rng rng(22);
  const std::size_t k = 3, per = 4, d = 5;
  Matrix v(k * per, d);
  std::vector<int> labels;
  for (std::size_t c = 0; c < k; ++c)
    for (std::size_t n = 0; n < per; ++n) {
      v.set_row(c * per + n, gaussian_vector(d, rng));
      labels.push_back(static_cast<int>(c));
    }
  Matrix s(k, d);
  std::vector<int> ids{0, 1, 2};
  for (std::size_t c = 0; c < k; ++c) s.set_row(c, gaussian_vector(d, rng));

  const double c0 = closeness(v, labels, s, ids);
  const double d0 = dispersion(v, labels);

  Matrix vs = v;
  for (std::size_t n = 0; n < vs.rows; ++n) {
    const double a = std::exp(rng.uniform(-2.0, 2.0));
    for (std::size_t j = 0; j < d; ++j) vs.at(n, j) *= a;
  }
  CHECK(std::abs(closeness(vs, labels, s, ids) - c0) < 1e-12);
  CHECK(std::abs(dispersion(vs, labels) - d0) < 1e-12);

  CHECK(c0 >= 0.0);
  CHECK(c0 <= 2.0);
  CHECK(d0 >= 0.0);
  CHECK(d0 <= 2.0);
}

TEST_CASE("dispersion is stable under relabeling, closeness under permutation") {
  Rng rng(23);
  const std::size_t k = 4, per = 3, d = 4;
  Matrix v(k * per, d);
  std::vector<int> labels;
  for (std::size_t c = 0; c < k; ++c)
    for (std::size_t n = 0; n < per; ++n) {
      v.set_row(c * per + n, gaussian_vector(d, rng));
      labels.push_back(static_cast<int>(c));
    }
  const double d0 = dispersion(v, labels);

  // Bijective relabeling c -> 100 - c.
  std::vector<int> relabeled;
  for (int l : labels) relabeled.push_back(100 - l);
  CHECK(std::abs(dispersion(v, relabeled) - d0) < 1e-12);

  // Sample permutation leaves closeness unchanged.
  Matrix s(k, d);
  std::vector<int> ids{0, 1, 2, 3};
  for (std::size_t c = 0; c < k; ++c) s.set_row(c, gaussian_vector(d, rng));
  const double c0 = closeness(v, labels, s, ids);
  Matrix vp(v.rows, d);
  std::vector<int> lp(labels.size());
  for (std::size_t n = 0; n < v.rows; ++n) {
    const std::size_t m = (n * 5 + 3) % v.rows;  // fixed permutation
    vp.set_row(n, v.row(m));
    lp[n] = labels[m];
  }
  CHECK(std::abs(closeness(vp, lp, s, ids) - c0) < 1e-12);
}

TEST_CASE("topk accuracy") {
  // Perfect scores.
  Matrix perfect(3, 4);
  for (std::size_t n = 0; n < 3; ++n)
    for (std::size_t c = 0; c < 4; ++c) perfect.at(n, c) = (c == n) ? 1.0 : -1.0;
  CHECK(topk_accuracy(perfect, {0, 1, 2}, 1) == 1.0);

  // k = classes is always 1.
  Matrix rnd(5, 3);
  Rng rng(24);
  for (double& x : rnd.a) x = rng.gaussian();
  CHECK(topk_accuracy(rnd, {0, 1, 2, 0, 1}, 3) == 1.0);

  // Hand case: exactly one of three correct at k=1.
  Matrix hand(3, 3);
  hand.a = {
      0.9, 0.1, 0.0,   // true 0 -> predicted 0 (hit)
      0.8, 0.1, 0.1,   // true 1 -> predicted 0 (miss)
      0.2, 0.7, 0.1,   // true 2 -> predicted 1 (miss)
  };
  CHECK(topk_accuracy(hand, {0, 1, 2}, 1) == Catch::Approx(1.0 / 3.0).margin(1e-15));

  // Ties break toward the lower class index.
  Matrix tie(1, 3);
  tie.a = {0.5, 0.5, 0.1};
  CHECK(topk_accuracy(tie, {0}, 1) == 1.0);  // class 0 wins the tie
  CHECK(topk_accuracy(tie, {1}, 1) == 0.0);  // class 1 loses it

  CHECK_THROWS_AS(topk_accuracy(tie, {0}, 0), error);
  CHECK_THROWS_AS(topk_accuracy(tie, {0}, 4), error);
}
