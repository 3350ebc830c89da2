#pragma once

// Upper bounds of the two contrastive losses and the regime classifier.
// With sim_max the largest negative-pair similarity:
//
//   self loss <= lambda (sim_max - sim_pos) + log(K-1)
//   sup  loss <= lambda max(sim_max - sim_pos + log(K-1)/lambda, 0) + log 2
//
// When log(K-1)/lambda < 2 the supervised bound behaves like a triplet loss
// with hard mining; otherwise the two bounds are essentially the same.

#include <algorithm>
#include <cstddef>

#include "aurl/core.hpp"
#include "aurl/losses.hpp"

namespace aurl {

enum class Regime { contrastive_like, triplet_like };

inline const char* regime_name(Regime r) {
  return r == Regime::triplet_like ? "triplet_like" : "contrastive_like";
}

inline void check_k(long long k) {
  if (k < 2) raise(errc::bad_k, "need K >= 2");
}

inline double self_bound(double sim_pos, double sim_max, long long k, double lambda) {
  check_k(k);
  return lambda * (sim_max - sim_pos) + std::log(static_cast<double>(k - 1));
}

inline double sup_bound(double sim_pos, double sim_max, long long k, double lambda) {
  check_k(k);
  const double inner = sim_max - sim_pos + std::log(static_cast<double>(k - 1)) / lambda;
  return lambda * std::max(inner, 0.0) + std::log(2.0);
}

inline Regime regime(long long k, double lambda) {
  check_k(k);
  const double ratio = std::log(static_cast<double>(k - 1)) / lambda;
  return ratio < 2.0 ? Regime::triplet_like : Regime::contrastive_like;
}

struct BoundReport {
  double loss_value = 0.0;
  double bound_value = 0.0;
  double slack = 0.0;  // bound - loss; must stay >= -1e-9
  Regime regime = Regime::triplet_like;
};

struct BoundsSummary {
  std::size_t samples = 0;
  double min_self_slack = 0.0;
  double min_sup_slack = 0.0;
  bool all_hold = false;
};

// Samples random unit configurations and checks both bounds empirically,
// with sim_max taken per sample from the actual negatives.
inline BoundsSummary verify_bounds(std::size_t n_samples, std::size_t dim, std::size_t k, double lambda,
                                   Rng& rng) {
  if (n_samples < 1) raise(errc::empty_input, "need at least one sample");
  check_k(static_cast<long long>(k));
  const LossConfig cfg{lambda};

  BoundsSummary summary;
  summary.samples = n_samples;
  bool first = true;
  for (std::size_t t = 0; t < n_samples; ++t) {
    const Vector v = normalize(gaussian_vector(dim, rng));
    Matrix s(k, dim);
    for (std::size_t j = 0; j < k; ++j) s.set_row(j, normalize(gaussian_vector(dim, rng)));
    const std::size_t pos = rng.uniform_index(k);

    const double sim_pos = cosine(v, s.row_vec(pos));
    double sim_max = -1.0;
    for (std::size_t j = 0; j < k; ++j)
      if (j != pos) sim_max = std::max(sim_max, cosine(v, s.row_vec(j)));

    const double self_loss = self_contrastive(v, s, pos, cfg);
    const double sup_loss = sup_contrastive(v, s, pos, cfg).total;
    const double bs = self_bound(sim_pos, sim_max, static_cast<long long>(k), lambda);
    const double bp = sup_bound(sim_pos, sim_max, static_cast<long long>(k), lambda);

    const double self_slack = bs - self_loss;
    const double sup_slack = bp - sup_loss;
    if (first) {
      summary.min_self_slack = self_slack;
      summary.min_sup_slack = sup_slack;
      first = false;
    } else {
      summary.min_self_slack = std::min(summary.min_self_slack, self_slack);
      summary.min_sup_slack = std::min(summary.min_sup_slack, sup_slack);
    }
  }
  summary.all_hold = summary.min_self_slack >= -1e-9 && summary.min_sup_slack >= -1e-9;
  return summary;
}

}  // namespace aurl
