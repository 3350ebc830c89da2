#pragma once

// Zero-shot machinery: the train/test class-disjointness filter on raw word
// embeddings and nearest-neighbor-search inference over projected test
// semantics.

#include <algorithm>
#include <map>
#include <set>
#include <vector>

#include "aurl/core.hpp"
#include "aurl/dataio.hpp"
#include "aurl/metrics.hpp"
#include "aurl/model.hpp"

namespace aurl {

struct FilterConfig {
  double tau = 0.05;
};

struct FilterResult {
  struct Exclusion {
    int train_id;
    int nearest_test_id;
    double distance;  // 1 - cos on raw word embeddings
  };
  std::vector<int> retained;
  std::vector<Exclusion> excluded;
};

// A train class survives iff its minimal word-embedding cosine distance to
// every test class exceeds tau.
inline FilterResult filter_train_classes(const ClassVocabulary& train_vocab, const ClassVocabulary& test_vocab,
                                         const FilterConfig& cfg) {
  if (test_vocab.entries.empty()) raise(errc::empty_vocab, "test vocabulary is empty");
  if (!(cfg.tau >= 0.0) || cfg.tau > 2.0) raise(errc::bad_config, "tau must be in [0, 2]");
  FilterResult out;
  for (const auto& tr : train_vocab.entries) {
    double best = 2.0;
    int best_id = test_vocab.entries.front().class_id;
    for (const auto& te : test_vocab.entries) {
      const double dist = 1.0 - cosine(tr.embedding, te.embedding);
      if (dist < best) {
        best = dist;
        best_id = te.class_id;
      }
    }
    if (best > cfg.tau)
      out.retained.push_back(tr.class_id);
    else
      out.excluded.push_back({tr.class_id, best_id, best});
  }
  return out;
}

// Class ids of test_semantics rows must be supplied in matching order; ties
// break toward the lowest class id.
inline int predict_from_semantics(std::span<const double> embedded_query, const Matrix& test_semantics,
                                  const std::vector<int>& class_ids) {
  if (test_semantics.rows == 0) raise(errc::empty_vocab, "no test classes");
  if (class_ids.size() != test_semantics.rows) raise(errc::dim_mismatch, "class id count mismatch");
  double best_sim = 0.0;
  int best_id = 0;
  bool first = true;
  for (std::size_t j = 0; j < test_semantics.rows; ++j) {
    const double sim = cosine(embedded_query, test_semantics.row(j));
    if (first || sim > best_sim || (sim == best_sim && class_ids[j] < best_id)) {
      best_sim = sim;
      best_id = class_ids[j];
      first = false;
    }
  }
  return best_id;
}

// NNS over the projected test vocabulary for one raw query feature.
inline int predict(const Vector& raw_query, const Model& model, const ClassVocabulary& test_vocab) {
  if (test_vocab.entries.empty()) raise(errc::empty_vocab, "test vocabulary is empty");
  Matrix q(1, raw_query.size());
  q.set_row(0, raw_query);
  const Matrix v = project_visual_eval(model, q);
  const Matrix sem = project_semantic_eval(model, test_vocab.embedding_matrix());
  return predict_from_semantics(v.row(0), sem, test_vocab.class_ids());
}

struct EvaluationSet {
  FeatureSet features;
  ClassVocabulary vocab;
};

// Full evaluation pass. With clips_per_video > 1, consecutive rows sharing a
// group id form one video and their projected embeddings are averaged before
// scoring; closeness/dispersion are computed on the representative
// embeddings against the projected test semantics.
inline DiagnosticsReport evaluate(const Model& model, const EvaluationSet& eval_set, long long clips_per_video = 1) {
  const FeatureSet& fs = eval_set.features;
  if (eval_set.vocab.entries.empty()) raise(errc::empty_vocab, "test vocabulary is empty");
  if (fs.count() == 0) raise(errc::empty_data, "no evaluation samples");
  if (clips_per_video < 1) raise(errc::bad_config, "clips_per_video must be >= 1");

  const Matrix projected = project_visual_eval(model, fs.features);
  const Matrix sem = project_semantic_eval(model, eval_set.vocab.embedding_matrix());
  const std::vector<int> class_ids = eval_set.vocab.class_ids();

  // Representative embedding per video: mean of its clips, post-projector.
  Matrix videos;
  std::vector<int> labels;
  if (clips_per_video == 1) {
    videos = projected;
    labels = fs.class_ids;
  } else {
    const auto clips = static_cast<std::size_t>(clips_per_video);
    if (fs.count() % clips != 0) raise(errc::ragged_groups, "row count not a multiple of clips_per_video");
    const std::size_t n_videos = fs.count() / clips;
    videos = Matrix(n_videos, projected.cols);
    labels.resize(n_videos);
    for (std::size_t g = 0; g < n_videos; ++g) {
      const std::size_t base = g * clips;
      for (std::size_t c = 1; c < clips; ++c) {
        if (fs.group_ids[base + c] != fs.group_ids[base] || fs.class_ids[base + c] != fs.class_ids[base])
          raise(errc::ragged_groups, "rows " + std::to_string(base) + ".." + std::to_string(base + clips - 1) +
                                         " do not form one video group");
      }
      for (std::size_t c = 0; c < clips; ++c)
        for (std::size_t j = 0; j < projected.cols; ++j) videos.at(g, j) += projected.at(base + c, j);
      for (std::size_t j = 0; j < projected.cols; ++j) videos.at(g, j) /= static_cast<double>(clips);
      labels[g] = fs.class_ids[base];
    }
  }

  std::map<int, std::size_t> col_of;
  for (std::size_t j = 0; j < class_ids.size(); ++j) col_of[class_ids[j]] = j;

  Matrix scores(videos.rows, sem.rows);
  std::vector<int> true_cols(videos.rows);
  for (std::size_t n = 0; n < videos.rows; ++n) {
    const auto it = col_of.find(labels[n]);
    if (it == col_of.end())
      raise(errc::label_out_of_vocab, "sample labeled with class " + std::to_string(labels[n]) +
                                          " missing from the test vocabulary");
    true_cols[n] = static_cast<int>(it->second);
    for (std::size_t j = 0; j < sem.rows; ++j) scores.at(n, j) = cosine(videos.row(n), sem.row(j));
  }

  DiagnosticsReport report;
  report.top1 = topk_accuracy(scores, true_cols, 1);
  report.top5 = topk_accuracy(scores, true_cols, std::min<std::size_t>(5, sem.rows));
  report.closeness = closeness(videos, labels, sem, class_ids);
  if (std::set<int>(labels.begin(), labels.end()).size() >= 2) report.dispersion = dispersion(videos, labels);

  std::map<int, std::pair<std::size_t, std::size_t>> hits;  // class -> (correct, total)
  for (std::size_t n = 0; n < videos.rows; ++n) {
    auto& h = hits[labels[n]];
    h.second += 1;
    // Recompute the argmax with the tie rule to score per-class top-1.
    const int pred = predict_from_semantics(videos.row(n), sem, class_ids);
    if (pred == labels[n]) h.first += 1;
  }
  for (const auto& [cid, h] : hits)
    report.per_class_accuracy[cid] = static_cast<double>(h.first) / static_cast<double>(h.second);
  return report;
}

}  // namespace aurl
