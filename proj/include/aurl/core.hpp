#pragma once

// Unit-hypersphere numeric primitives: vectors/matrices of 64-bit floats,
// stable log-sum-exp / softplus, and a seeded counter-style RNG
// (splitmix64-seeded xoshiro256++) so every experiment is bit-reproducible.

#include <array>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace aurl {

// ---------------------------------------------------------------------------
// Errors
// ---------------------------------------------------------------------------

enum class errc {
  zero_norm,
  dim_mismatch,
  empty_input,
  invalid_alpha,
  bad_index,
  shape_mismatch,
  zero_norm_row,
  bad_k,
  degenerate_row,
  batch_too_small,
  bad_spec,
  stale_cache,
  bad_iter,
  empty_data,
  label_out_of_vocab,
  missing_class,
  single_class,
  zero_norm_mean,
  rejection_exhausted,
  not_three_dim,
  ragged_groups,
  empty_vocab,
  bad_header,
  bad_row,
  duplicate_id,
  corrupt_file,
  version_mismatch,
  io_failure,
  bad_config,
};

inline const char* errc_name(errc c) {
  switch (c) {
    case errc::zero_norm: return "ZeroNorm";
    case errc::dim_mismatch: return "DimMismatch";
    case errc::empty_input: return "EmptyInput";
    case errc::invalid_alpha: return "InvalidAlpha";
    case errc::bad_index: return "BadIndex";
    case errc::shape_mismatch: return "ShapeMismatch";
    case errc::zero_norm_row: return "ZeroNormRow";
    case errc::bad_k: return "BadK";
    case errc::degenerate_row: return "DegenerateRow";
    case errc::batch_too_small: return "BatchTooSmall";
    case errc::bad_spec: return "BadSpec";
    case errc::stale_cache: return "StaleCache";
    case errc::bad_iter: return "BadIter";
    case errc::empty_data: return "EmptyData";
    case errc::label_out_of_vocab: return "LabelOutOfVocab";
    case errc::missing_class: return "MissingClass";
    case errc::single_class: return "SingleClass";
    case errc::zero_norm_mean: return "ZeroNormMean";
    case errc::rejection_exhausted: return "RejectionExhausted";
    case errc::not_three_dim: return "NotThreeDim";
    case errc::ragged_groups: return "RaggedGroups";
    case errc::empty_vocab: return "EmptyVocab";
    case errc::bad_header: return "BadHeader";
    case errc::bad_row: return "BadRow";
    case errc::duplicate_id: return "DuplicateId";
    case errc::corrupt_file: return "CorruptFile";
    case errc::version_mismatch: return "VersionMismatch";
    case errc::io_failure: return "IoFailure";
    case errc::bad_config: return "BadConfig";
  }
  return "Unknown";
}

class error : public std::runtime_error {
 public:
  error(errc code, const std::string& what)
      : std::runtime_error(std::string(errc_name(code)) + ": " + what), code_(code) {}
  errc code() const { return code_; }

 private:
  errc code_;
};

[[noreturn]] inline void raise(errc code, const std::string& what) { throw error(code, what); }

// I/O-category errors map to CLI exit code 2; everything else is a
// validation failure (exit code 1).
inline bool is_io_error(errc c) {
  switch (c) {
    case errc::bad_header:
    case errc::bad_row:
    case errc::duplicate_id:
    case errc::corrupt_file:
    case errc::version_mismatch:
    case errc::io_failure:
      return true;
    default:
      return false;
  }
}

// ---------------------------------------------------------------------------
// Vector / Matrix
// ---------------------------------------------------------------------------

using Vector = std::vector<double>;

constexpr double kNormEps = 1e-12;

// Row-major dense matrix of doubles.
struct Matrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> a;

  Matrix() = default;
  Matrix(std::size_t r, std::size_t c, double fill = 0.0) : rows(r), cols(c), a(r * c, fill) {}

  double& at(std::size_t r, std::size_t c) { return a[r * cols + c]; }
  double at(std::size_t r, std::size_t c) const { return a[r * cols + c]; }

  std::span<double> row(std::size_t r) { return {a.data() + r * cols, cols}; }
  std::span<const double> row(std::size_t r) const { return {a.data() + r * cols, cols}; }

  Vector row_vec(std::size_t r) const { return Vector(a.begin() + r * cols, a.begin() + (r + 1) * cols); }

  void set_row(std::size_t r, std::span<const double> v) {
    for (std::size_t j = 0; j < cols; ++j) a[r * cols + j] = v[j];
  }

  bool same_shape(const Matrix& o) const { return rows == o.rows && cols == o.cols; }
  friend bool operator==(const Matrix& x, const Matrix& y) {
    return x.rows == y.rows && x.cols == y.cols && x.a == y.a;
  }
};

inline Matrix matmul(const Matrix& x, const Matrix& y) {
  if (x.cols != y.rows) raise(errc::dim_mismatch, "matmul: inner dimensions disagree");
  Matrix out(x.rows, y.cols);
  for (std::size_t i = 0; i < x.rows; ++i) {
    for (std::size_t k = 0; k < x.cols; ++k) {
      const double xv = x.at(i, k);
      if (xv == 0.0) continue;
      for (std::size_t j = 0; j < y.cols; ++j) out.at(i, j) += xv * y.at(k, j);
    }
  }
  return out;
}

inline Matrix transpose(const Matrix& x) {
  Matrix out(x.cols, x.rows);
  for (std::size_t i = 0; i < x.rows; ++i)
    for (std::size_t j = 0; j < x.cols; ++j) out.at(j, i) = x.at(i, j);
  return out;
}

// ---------------------------------------------------------------------------
// Basic vector math
// ---------------------------------------------------------------------------

inline double dot(std::span<const double> u, std::span<const double> v) {
  double s = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) s += u[i] * v[i];
  return s;
}

inline double norm2(std::span<const double> v) { return std::sqrt(dot(v, v)); }

inline Vector normalize(std::span<const double> v) {
  const double n = norm2(v);
  if (!(n > kNormEps)) raise(errc::zero_norm, "normalize: vector norm <= " + std::to_string(kNormEps));
  Vector out(v.begin(), v.end());
  for (double& x : out) x /= n;
  return out;
}

inline Vector normalize(const Vector& v) { return normalize(std::span<const double>(v)); }

// Cosine similarity, clamped to [-1, 1] to absorb rounding.
inline double cosine(std::span<const double> u, std::span<const double> v) {
  if (u.size() != v.size()) raise(errc::dim_mismatch, "cosine: dims differ");
  const double nu = norm2(u);
  const double nv = norm2(v);
  if (!(nu > kNormEps) || !(nv > kNormEps)) raise(errc::zero_norm, "cosine: zero-norm operand");
  double c = dot(u, v) / (nu * nv);
  if (c > 1.0) c = 1.0;
  if (c < -1.0) c = -1.0;
  return c;
}

inline double cosine(const Vector& u, const Vector& v) {
  return cosine(std::span<const double>(u), std::span<const double>(v));
}

// log(sum_i exp(x_i)) via max-subtraction; safe for |x_i| up to ~1e6.
inline double lse(std::span<const double> xs) {
  if (xs.empty()) raise(errc::empty_input, "lse: empty input");
  double m = xs[0];
  for (double x : xs) m = std::max(m, x);
  double s = 0.0;
  for (double x : xs) s += std::exp(x - m);
  return m + std::log(s);
}

inline double lse(const Vector& xs) { return lse(std::span<const double>(xs)); }

// SP_lambda(x) = (1/lambda) log(1 + exp(lambda x)), overflow-safe on both tails.
inline double softplus_lambda(double x, double lambda) {
  if (!(lambda > 0.0)) raise(errc::invalid_alpha, "softplus_lambda: lambda must be positive");
  const double y = lambda * x;
  if (y > 0.0) return x + std::log1p(std::exp(-y)) / lambda;
  return std::log1p(std::exp(y)) / lambda;
}

// ---------------------------------------------------------------------------
// Rng: xoshiro256++ seeded through splitmix64. State is four 64-bit words,
// serialized in checkpoints. Same seed + same call sequence => same stream.
// ---------------------------------------------------------------------------

class Rng {
 public:
  explicit Rng(std::uint64_t seed) {
    std::uint64_t x = seed;
    for (auto& w : s_) w = splitmix64(x);
  }

  // Independent stream derived from (seed, stream id); used so that e.g.
  // probe-subset selection never consumes draws from the training stream.
  static Rng stream(std::uint64_t seed, std::uint64_t stream_id) {
    Rng r(seed ^ (0x9e3779b97f4a7c15ull * (stream_id + 1)));
    return r;
  }

  std::uint64_t next_u64() {
    const std::uint64_t result = rotl(s_[0] + s_[3], 23) + s_[0];
    const std::uint64_t t = s_[1] << 17;
    s_[2] ^= s_[0];
    s_[3] ^= s_[1];
    s_[1] ^= s_[2];
    s_[0] ^= s_[3];
    s_[2] ^= t;
    s_[3] = rotl(s_[3], 45);
    return result;
  }

  // Uniform in [0, 1) with 53 random bits.
  double uniform01() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  // Uniform in [lo, hi); guards against round-up to hi.
  double uniform(double lo, double hi) {
    double v = lo + uniform01() * (hi - lo);
    if (v >= hi) v = std::nextafter(hi, lo);
    return v;
  }

  std::size_t uniform_index(std::size_t n) {
    const auto i = static_cast<std::size_t>(uniform01() * static_cast<double>(n));
    return i < n ? i : n - 1;
  }

  // Box-Muller without cached state so the stream stays a pure function of
  // the call count.
  double gaussian() {
    double u1 = uniform01();
    while (u1 <= 0.0) u1 = uniform01();
    const double u2 = uniform01();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
  }

  // Child stream for concurrent use; advances this stream by two draws.
  Rng split() {
    const std::uint64_t a = next_u64();
    const std::uint64_t b = next_u64();
    return Rng(a ^ rotl(b, 32));
  }

  std::array<std::uint64_t, 4> state() const { return s_; }
  void set_state(const std::array<std::uint64_t, 4>& s) { s_ = s; }

 private:
  static std::uint64_t rotl(std::uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }

  static std::uint64_t splitmix64(std::uint64_t& x) {
    x += 0x9e3779b97f4a7c15ull;
    std::uint64_t z = x;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
  }

  std::array<std::uint64_t, 4> s_{};
};

// Matrix with entries ~ U(alpha, 1), row-major draw order.
inline Matrix sample_uniform_matrix(std::size_t rows, std::size_t cols, double alpha, Rng& rng) {
  if (!(alpha < 1.0) || alpha < -1.0) raise(errc::invalid_alpha, "alpha must be in [-1, 1)");
  Matrix m(rows, cols);
  for (double& x : m.a) x = rng.uniform(alpha, 1.0);
  return m;
}

inline Vector gaussian_vector(std::size_t n, Rng& rng) {
  Vector v(n);
  for (double& x : v) x = rng.gaussian();
  return v;
}

// ---------------------------------------------------------------------------
// Exact text round-trip for doubles (17 significant digits).
// ---------------------------------------------------------------------------

inline std::string format_double(double x) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", x);
  return buf;
}

inline double parse_double(const std::string& s) {
  const char* begin = s.c_str();
  char* end = nullptr;
  const double v = std::strtod(begin, &end);
  if (end == begin || end != begin + s.size()) raise(errc::bad_row, "not a number: '" + s + "'");
  return v;
}

inline bool all_finite(std::span<const double> v) {
  for (double x : v)
    if (!std::isfinite(x)) return false;
  return true;
}

}  // namespace aurl
