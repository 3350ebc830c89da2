#pragma once

// Synthetic unseen-class generator. One shared random matrix M ~ U(alpha, 1)
// linearly combines the row-normalized visual centers and the row-normalized
// seen semantics, producing paired banks (theta, z). Positive alpha keeps the
// synthetic points inside the seen hull (interpolation); negative alpha
// extrapolates and covers larger regions of the sphere.

#include <cstddef>
#include <string>

#include "aurl/core.hpp"

namespace aurl {

struct GeneratorConfig {
  long long k_u = 662;           // number of synthetic classes
  long long d_classes = 0;       // seen classes used; 0 = all
  double alpha = 0.0;            // lower end of U(alpha, 1)
  bool resample_each_step = true;
};

constexpr double kGenEps = 1e-6;  // minimum acceptable output row norm

struct SyntheticClassBank {
  Matrix theta;  // K_u x d synthetic visual centers
  Matrix z;      // K_u x d synthetic semantics
  Matrix m;      // K_u x D transformation actually used
};

namespace detail {

inline Matrix normalized_rows(const Matrix& x, std::size_t take_rows) {
  Matrix out(take_rows, x.cols);
  for (std::size_t i = 0; i < take_rows; ++i) out.set_row(i, normalize(x.row(i)));
  return out;
}

}  // namespace detail

// Applies a fixed transformation; no resampling. Test hook and the exact
// reproduction path for a stored bank.
inline SyntheticClassBank apply_transform(const Matrix& norm_w, const Matrix& norm_s, const Matrix& m) {
  if (norm_w.rows != norm_s.rows) raise(errc::dim_mismatch, "center/semantic row counts differ");
  if (m.cols != norm_w.rows) raise(errc::dim_mismatch, "transform columns != source classes");
  SyntheticClassBank bank;
  bank.theta = matmul(m, norm_w);
  bank.z = matmul(m, norm_s);
  bank.m = m;
  return bank;
}

// Row-normalizes W and S (first D rows), samples M from U(alpha, 1)^{K_u x D}
// and produces theta = M norm(W), z = M norm(S). An output row below kGenEps
// in either bank gets its M row resampled (up to 100 retries).
inline SyntheticClassBank synthesize(const Matrix& w, const Matrix& s, const GeneratorConfig& cfg, Rng& rng) {
  if (w.rows != s.rows) raise(errc::dim_mismatch, "centers and semantics disagree on class count");
  if (cfg.k_u < 2) raise(errc::bad_k, "need at least 2 synthetic classes");
  if (!(cfg.alpha < 1.0) || cfg.alpha < -1.0) raise(errc::invalid_alpha, "alpha must be in [-1, 1)");

  const std::size_t k = w.rows;
  const std::size_t d_use = cfg.d_classes == 0 ? k : static_cast<std::size_t>(cfg.d_classes);
  if (d_use > k) raise(errc::dim_mismatch, "D exceeds available seen classes");
  if (d_use < 1) raise(errc::dim_mismatch, "D must be positive");

  const Matrix norm_w = detail::normalized_rows(w, d_use);
  const Matrix norm_s = detail::normalized_rows(s, d_use);

  const auto ku = static_cast<std::size_t>(cfg.k_u);
  Matrix m = sample_uniform_matrix(ku, d_use, cfg.alpha, rng);
  SyntheticClassBank bank = apply_transform(norm_w, norm_s, m);

  for (std::size_t i = 0; i < ku; ++i) {
    int retries = 0;
    while (norm2(bank.theta.row(i)) < kGenEps || norm2(bank.z.row(i)) < kGenEps) {
      if (++retries > 100) raise(errc::degenerate_row, "row " + std::to_string(i) + ": retries exhausted");
      for (std::size_t j = 0; j < d_use; ++j) bank.m.at(i, j) = rng.uniform(cfg.alpha, 1.0);
      for (std::size_t c = 0; c < norm_w.cols; ++c) {
        double th = 0.0, zz = 0.0;
        for (std::size_t j = 0; j < d_use; ++j) {
          th += bank.m.at(i, j) * norm_w.at(j, c);
          zz += bank.m.at(i, j) * norm_s.at(j, c);
        }
        bank.theta.at(i, c) = th;
        bank.z.at(i, c) = zz;
      }
    }
  }
  return bank;
}

// Mean over probes of the nearest-synthetic cosine distance; lower means the
// bank covers the probed region better.
inline double coverage_stats(const Matrix& theta, const Matrix& probes) {
  if (probes.rows < 1 || theta.rows < 1) raise(errc::empty_input, "coverage needs probes and synthetics");
  double total = 0.0;
  for (std::size_t p = 0; p < probes.rows; ++p) {
    double best = 2.0;
    for (std::size_t i = 0; i < theta.rows; ++i) {
      const double dist = 1.0 - cosine(probes.row(p), theta.row(i));
      best = std::min(best, dist);
    }
    total += best;
  }
  return total / static_cast<double>(probes.rows);
}

}  // namespace aurl
