#include <catch_amalgamated.hpp>

#include "aurl/core.hpp"

using namespace aurl;

TEST_CASE("normalize basics") {
  const Vector v = normalize(Vector{3.0, 4.0});
  CHECK(v[0] == Catch::Approx(0.6).margin(1e-15));
  CHECK(v[1] == Catch::Approx(0.8).margin(1e-15));

  const Vector unit = normalize(Vector{1.0, 0.0, 0.0});
  CHECK(unit == Vector{1.0, 0.0, 0.0});

  CHECK_THROWS_MATCHES(normalize(Vector{0.0, 0.0}), error,
                       Catch::Matchers::Predicate<error>([](const error& e) { return e.code() == errc::zero_norm; }));
}

TEST_CASE("normalize is idempotent") {
  Rng rng(7);
  for (int t = 0; t < 50; ++t) {
    const Vector v = gaussian_vector(5, rng);
    const Vector n1 = normalize(v);
    const Vector n2 = normalize(n1);
    for (std::size_t i = 0; i < v.size(); ++i) CHECK(std::abs(n1[i] - n2[i]) < 1e-12);
    CHECK(std::abs(norm2(n1) - 1.0) < 1e-12);
  }
}

TEST_CASE("cosine basics") {
  CHECK(cosine(Vector{1, 0}, Vector{0, 1}) == 0.0);
  const Vector v{0.3, -1.2, 4.5};
  CHECK(cosine(v, v) == Catch::Approx(1.0).margin(1e-15));
  CHECK(cosine(Vector{1, 1}, Vector{1, 0}) == Catch::Approx(1.0 / std::sqrt(2.0)).margin(1e-12));

  CHECK_THROWS_AS(cosine(Vector{1, 0}, Vector{1, 0, 0}), error);
  CHECK_THROWS_AS(cosine(Vector{0, 0}, Vector{1, 0}), error);
}

TEST_CASE("cosine is scale invariant") {
  Rng rng(11);
  for (int t = 0; t < 100; ++t) {
    const Vector u = gaussian_vector(4, rng);
    const Vector v = gaussian_vector(4, rng);
    const double a = std::exp(rng.uniform(-3.0, 3.0));
    const double b = std::exp(rng.uniform(-3.0, 3.0));
    Vector au = u, bv = v;
    for (auto& x : au) x *= a;
    for (auto& x : bv) x *= b;
    CHECK(std::abs(cosine(au, bv) - cosine(u, v)) < 1e-12);
  }
}

TEST_CASE("lse") {
  CHECK(lse(Vector{0.0, 0.0}) == Catch::Approx(std::log(2.0)).margin(1e-12));
  CHECK(lse(Vector{1000.0, 1000.0}) == Catch::Approx(1000.0 + std::log(2.0)).margin(1e-9));
  CHECK(lse(Vector{-4.2}) == -4.2);
  CHECK_THROWS_AS(lse(Vector{}), error);

  // n identical entries shift by ln n.
  Rng rng(3);
  for (int t = 0; t < 20; ++t) {
    const double x = rng.uniform(-50.0, 50.0);
    const std::size_t n = 1 + rng.uniform_index(10);
    CHECK(std::abs(lse(Vector(n, x)) - (x + std::log(static_cast<double>(n)))) < 1e-10);
  }
}

TEST_CASE("softplus_lambda") {
  CHECK(softplus_lambda(0.0, 10.0) == Catch::Approx(std::log(2.0) / 10.0).margin(1e-12));
  CHECK(softplus_lambda(0.0, 1.0) == Catch::Approx(std::log(2.0)).margin(1e-12));
  CHECK(softplus_lambda(5.0, 10.0) == Catch::Approx(5.0).margin(1e-9));

  // lambda * SP_lambda(x) = log(1 + exp(lambda x)) for moderate arguments.
  Rng rng(5);
  for (int t = 0; t < 200; ++t) {
    const double lambda = std::exp(rng.uniform(-2.0, 4.0));
    const double x = rng.uniform(-30.0 / lambda, 30.0 / lambda);
    const double lhs = lambda * softplus_lambda(x, lambda);
    const double rhs = std::log(1.0 + std::exp(lambda * x));
    CHECK(std::abs(lhs - rhs) < 1e-10);
  }
}

TEST_CASE("sample_uniform_matrix range and determinism") {
  Rng rng(42);
  const Matrix m = sample_uniform_matrix(2, 2, 0.0, rng);
  for (double x : m.a) {
    CHECK(x >= 0.0);
    CHECK(x < 1.0);
  }

  Rng r1(9), r2(9);
  const Matrix a = sample_uniform_matrix(7, 5, -0.3, r1);
  const Matrix b = sample_uniform_matrix(7, 5, -0.3, r2);
  CHECK(a == b);

  CHECK_THROWS_AS(sample_uniform_matrix(2, 2, 1.0, rng), error);
  CHECK_THROWS_AS(sample_uniform_matrix(2, 2, -1.5, rng), error);
}

TEST_CASE("sample_uniform_matrix mean of U(-1,1)") {
  Rng rng(1234);
  const Matrix m = sample_uniform_matrix(1000, 1, -1.0, rng);
  double mean = 0.0;
  for (double x : m.a) mean += x / 1000.0;
  CHECK(mean > -0.05);
  CHECK(mean < 0.05);
  for (double x : m.a) {
    CHECK(x >= -1.0);
    CHECK(x < 1.0);
  }
}

TEST_CASE("rng streams are reproducible and split") {
  Rng a(77), b(77);
  for (int i = 0; i < 100; ++i) CHECK(a.next_u64() == b.next_u64());

  Rng parent(5);
  Rng child = parent.split();
  // Child stream differs from where the parent continues.
  bool all_equal = true;
  Rng parent2 = parent;
  for (int i = 0; i < 16; ++i) all_equal = all_equal && (child.next_u64() == parent2.next_u64());
  CHECK_FALSE(all_equal);

  // State save/restore continues the identical stream.
  Rng c(123);
  c.next_u64();
  const auto state = c.state();
  const auto x1 = c.next_u64();
  Rng d(0);
  d.set_state(state);
  CHECK(d.next_u64() == x1);
}

TEST_CASE("double text round trip at 17 digits") {
  Rng rng(2024);
  for (int t = 0; t < 1000; ++t) {
    const double x = (rng.uniform01() * 2.0 - 1.0) * std::exp(rng.uniform(-30.0, 30.0));
    const double y = parse_double(format_double(x));
    CHECK(x == y);
  }
  CHECK(parse_double(format_double(0.1)) == 0.1);
  CHECK_THROWS_AS(parse_double("12x"), error);
}

TEST_CASE("matmul and transpose") {
  Matrix a(2, 3);
  a.a = {1, 2, 3, 4, 5, 6};
  Matrix b(3, 2);
  b.a = {7, 8, 9, 10, 11, 12};
  const Matrix c = matmul(a, b);
  CHECK(c.rows == 2);
  CHECK(c.cols == 2);
  CHECK(c.at(0, 0) == 58.0);
  CHECK(c.at(0, 1) == 64.0);
  CHECK(c.at(1, 0) == 139.0);
  CHECK(c.at(1, 1) == 154.0);

  const Matrix at = transpose(a);
  CHECK(at.rows == 3);
  CHECK(at.at(2, 1) == 6.0);

  CHECK_THROWS_AS(matmul(a, a), error);
}
