#pragma once

// Representation diagnostics. Closeness is the mean within-class cosine
// distance between sample embeddings and their class semantic (lower =
// better alignment). Dispersion is the mean over classes of the minimal
// cosine distance between class-mean visual clusters (higher = better
// uniformity). Class means average the unit-normalized embeddings.

#include <algorithm>
#include <map>
#include <vector>

#include "aurl/core.hpp"

namespace aurl {

struct DiagnosticsReport {
  double closeness = 0.0;
  double dispersion = 0.0;
  double top1 = 0.0;
  double top5 = 0.0;
  std::map<int, double> per_class_accuracy;
};

inline double closeness(const Matrix& v, const std::vector<int>& labels, const Matrix& s,
                        const std::vector<int>& s_class_ids) {
  if (labels.size() != v.rows) raise(errc::dim_mismatch, "label count != sample count");
  if (s_class_ids.size() != s.rows) raise(errc::dim_mismatch, "semantic id count != semantic rows");
  if (v.rows == 0) raise(errc::empty_input, "no samples");
  if (v.cols != s.cols) raise(errc::dim_mismatch, "embedding dims differ");

  std::map<int, std::size_t> sem_row;
  for (std::size_t i = 0; i < s_class_ids.size(); ++i) sem_row[s_class_ids[i]] = i;

  std::map<int, std::pair<double, std::size_t>> per_class;  // sum of distances, count
  for (std::size_t n = 0; n < v.rows; ++n) {
    const auto it = sem_row.find(labels[n]);
    if (it == sem_row.end())
      raise(errc::missing_class, "no semantic embedding for class " + std::to_string(labels[n]));
    auto& acc = per_class[labels[n]];
    acc.first += 1.0 - cosine(v.row(n), s.row(it->second));
    acc.second += 1;
  }
  double total = 0.0;
  for (const auto& [cid, acc] : per_class) total += acc.first / static_cast<double>(acc.second);
  return total / static_cast<double>(per_class.size());
}

inline double dispersion(const Matrix& v, const std::vector<int>& labels) {
  if (labels.size() != v.rows) raise(errc::dim_mismatch, "label count != sample count");
  if (v.rows == 0) raise(errc::empty_input, "no samples");

  std::map<int, std::pair<Vector, std::size_t>> sums;
  for (std::size_t n = 0; n < v.rows; ++n) {
    const Vector u = normalize(v.row(n));
    auto& acc = sums[labels[n]];
    if (acc.first.empty()) acc.first.assign(v.cols, 0.0);
    for (std::size_t j = 0; j < v.cols; ++j) acc.first[j] += u[j];
    acc.second += 1;
  }
  if (sums.size() < 2) raise(errc::single_class, "dispersion needs at least 2 classes");

  std::vector<Vector> means;
  means.reserve(sums.size());
  for (auto& [cid, acc] : sums) {
    for (double& x : acc.first) x /= static_cast<double>(acc.second);
    if (!(norm2(acc.first) > kNormEps))
      raise(errc::zero_norm_mean, "class " + std::to_string(cid) + " mean has zero norm");
    means.push_back(acc.first);
  }

  double total = 0.0;
  for (std::size_t i = 0; i < means.size(); ++i) {
    double best = 2.0;
    for (std::size_t k = 0; k < means.size(); ++k)
      if (k != i) best = std::min(best, 1.0 - cosine(means[i], means[k]));
    total += best;
  }
  return total / static_cast<double>(means.size());
}

// Fraction of samples whose true column is among the k best scores; ties go
// to the lower class index.
inline double topk_accuracy(const Matrix& scores, const std::vector<int>& true_cols, std::size_t k) {
  if (true_cols.size() != scores.rows) raise(errc::dim_mismatch, "label count != sample count");
  if (k == 0 || k > scores.cols) raise(errc::bad_k, "k must be in [1, classes]");
  if (scores.rows == 0) raise(errc::empty_input, "no samples");

  std::size_t hits = 0;
  for (std::size_t n = 0; n < scores.rows; ++n) {
    const auto t = static_cast<std::size_t>(true_cols[n]);
    if (t >= scores.cols) raise(errc::bad_index, "true column out of range");
    const double st = scores.at(n, t);
    std::size_t better = 0;
    for (std::size_t c = 0; c < scores.cols; ++c) {
      if (c == t) continue;
      if (scores.at(n, c) > st || (scores.at(n, c) == st && c < t)) ++better;
    }
    if (better < k) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(scores.rows);
}

}  // namespace aurl
