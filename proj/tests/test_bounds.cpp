#include <catch_amalgamated.hpp>

#include "aurl/bounds.hpp"

using namespace aurl;

TEST_CASE("self bound closed forms") {
  CHECK(self_bound(0.4, 0.4, 2, 10.0) == Catch::Approx(0.0).margin(1e-12));
  CHECK(self_bound(1.0, 0.0, 3, 10.0) == Catch::Approx(-10.0 + std::log(2.0)).margin(1e-12));
  CHECK_THROWS_AS(self_bound(0, 0, 1, 10.0), error);
}

TEST_CASE("sup bound closed forms") {
  CHECK(sup_bound(0.4, 0.4, 2, 10.0) == Catch::Approx(std::log(2.0)).margin(1e-12));
  // sim_pos=1, sim_max=-1, K=2: the max clamps at 0.
  CHECK(sup_bound(1.0, -1.0, 2, 10.0) == Catch::Approx(std::log(2.0)).margin(1e-12));
  CHECK_THROWS_AS(sup_bound(0, 0, 0, 10.0), error);
}

TEST_CASE("regime thresholds") {
  CHECK(regime(662, 10.0) == Regime::triplet_like);   // log(661)/10 ~ 0.649
  CHECK(regime(2, 0.1) == Regime::triplet_like);      // log(1) = 0
  CHECK(regime(1000000000, 1.0) == Regime::contrastive_like);
  CHECK_THROWS_AS(regime(1, 10.0), error);
}

TEST_CASE("bounds dominate the losses on random configurations") {
  Rng rng(17);
  for (int t = 0; t < 1000; ++t) {
    const std::size_t d = 2 + rng.uniform_index(8);
    const std::size_t k = 2 + rng.uniform_index(8);
    const double lambda = std::vector<double>{1.0, 10.0, 100.0}[rng.uniform_index(3)];
    const LossConfig cfg{lambda};
    const Vector v = normalize(gaussian_vector(d, rng));
    Matrix s(k, d);
    for (std::size_t j = 0; j < k; ++j) s.set_row(j, normalize(gaussian_vector(d, rng)));
    const std::size_t pos = rng.uniform_index(k);

    const double sim_pos = cosine(v, s.row_vec(pos));
    double sim_max = -1.0;
    for (std::size_t j = 0; j < k; ++j)
      if (j != pos) sim_max = std::max(sim_max, cosine(v, s.row_vec(j)));

    const double bs = self_bound(sim_pos, sim_max, static_cast<long long>(k), lambda);
    const double bp = sup_bound(sim_pos, sim_max, static_cast<long long>(k), lambda);
    const double ls = self_contrastive(v, s, pos, cfg);
    const double lp = sup_contrastive(v, s, pos, cfg).total;
    CHECK(bs - ls >= -1e-9);
    CHECK(bp - lp >= -1e-9);

    // When the clamp is inactive the two bounds differ by exactly log 2.
    const double inner = sim_max - sim_pos + std::log(static_cast<double>(k - 1)) / lambda;
    if (inner > 0.0) CHECK(bp == Catch::Approx(bs + std::log(2.0)).margin(1e-12));
  }
}

TEST_CASE("verify_bounds harness") {
  Rng rng(23);
  const BoundsSummary summary = verify_bounds(1000, 8, 5, 10.0, rng);
  CHECK(summary.samples == 1000);
  CHECK(summary.all_hold);
  CHECK(summary.min_self_slack >= -1e-9);
  CHECK(summary.min_sup_slack >= -1e-9);

  // Deterministic for a fixed seed.
  Rng r1(99), r2(99);
  const BoundsSummary a = verify_bounds(50, 4, 3, 10.0, r1);
  const BoundsSummary b = verify_bounds(50, 4, 3, 10.0, r2);
  CHECK(a.min_self_slack == b.min_self_slack);
  CHECK(a.min_sup_slack == b.min_sup_slack);

  // K=2: the self bound is an equality (LSE over one element).
  Rng r3(7);
  for (int t = 0; t < 200; ++t) {
    const Vector v = normalize(gaussian_vector(4, r3));
    Matrix s(2, 4);
    s.set_row(0, normalize(gaussian_vector(4, r3)));
    s.set_row(1, normalize(gaussian_vector(4, r3)));
    const LossConfig cfg{10.0};
    const double loss = self_contrastive(v, s, 0, cfg);
    const double bound = self_bound(cosine(v, s.row_vec(0)), cosine(v, s.row_vec(1)), 2, 10.0);
    CHECK(std::abs(bound - loss) < 1e-12);
  }
}
