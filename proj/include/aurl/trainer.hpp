#pragma once

// End-to-end optimization loop: per iteration it projects the mini-batch and
// the full vocabulary, evaluates the active losses of the chosen ablation
// mode, backpropagates by hand through both projectors (and through the
// class generator's row normalization into W and S), and applies SGD with
// momentum, weight decay and cosine learning-rate decay. Everything is a
// deterministic function of the seed.

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "aurl/classgen.hpp"
#include "aurl/core.hpp"
#include "aurl/dataio.hpp"
#include "aurl/losses.hpp"
#include "aurl/metrics.hpp"
#include "aurl/model.hpp"

namespace aurl {

struct TrainConfig {
  long long batch_size = 256;
  double base_lr = 0.05;
  double momentum = 0.9;
  double weight_decay = 1e-4;
  long long total_iters = 1000;
  double lambda_temp = 10.0;
  GeneratorConfig generator;
  std::uint64_t seed = 0;
  LossMode loss_mode = LossMode::aurl;

  // Architecture (desk-scale runs shrink these).
  std::size_t embed_dim = 2048;
  std::size_t hidden_dim = 2048;
  std::size_t word_front_dim = 512;

  long long eval_interval = 50;
  long long probe_limit = 2000;
};

inline double cosine_lr(long long t, long long total, double lr0) {
  if (total <= 0 || t < 0 || t > total) raise(errc::bad_iter, "iteration outside [0, total]");
  return 0.5 * lr0 * (1.0 + std::cos(M_PI * static_cast<double>(t) / static_cast<double>(total)));
}

// g' = g + wd p; v <- momentum v + g'; p <- p - lr v
inline void sgd_step(std::span<double> params, std::span<const double> grads, std::span<double> velocity,
                     double lr, double momentum, double weight_decay) {
  if (params.size() != grads.size() || params.size() != velocity.size())
    raise(errc::shape_mismatch, "sgd_step: tensor sizes disagree");
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double g = grads[i] + weight_decay * params[i];
    velocity[i] = momentum * velocity[i] + g;
    params[i] -= lr * velocity[i];
  }
}

struct TrainLogRecord {
  long long iter = 0;
  double lr = 0.0;
  double loss_s = 0.0;
  double loss_us = 0.0;
  double loss_c = 0.0;
  double loss_total = 0.0;
  std::optional<double> closeness;
  std::optional<double> dispersion;
};

using LogSink = std::function<void(const TrainLogRecord&)>;

struct TrainerState {
  TrainConfig cfg;
  Model model;
  std::vector<Vector> velocity;  // one buffer per model tensor, fixed order
  Rng rng{0};
  long long iter = 0;
  std::optional<Matrix> fixed_m;  // kept when the generator is not resampled per step
  std::vector<std::string> warnings;
};

namespace detail {

inline std::map<int, std::size_t> vocab_rows(const ClassVocabulary& vocab) {
  std::map<int, std::size_t> rows;
  for (std::size_t i = 0; i < vocab.entries.size(); ++i) {
    if (!rows.emplace(vocab.entries[i].class_id, i).second)
      raise(errc::duplicate_id, "vocabulary repeats class id " + std::to_string(vocab.entries[i].class_id));
  }
  return rows;
}

// Deterministic held-in probe subset for periodic diagnostics; a pure
// function of (seed, sample count), so resuming recomputes the same subset.
inline std::vector<std::size_t> probe_indices(const TrainConfig& cfg, std::size_t n) {
  const auto limit = static_cast<std::size_t>(cfg.probe_limit);
  std::vector<std::size_t> idx(n);
  for (std::size_t i = 0; i < n; ++i) idx[i] = i;
  if (n <= limit) return idx;
  Rng rng = Rng::stream(cfg.seed, 1);
  for (std::size_t i = 0; i < limit; ++i) {
    const std::size_t j = i + rng.uniform_index(n - i);
    std::swap(idx[i], idx[j]);
  }
  idx.resize(limit);
  std::sort(idx.begin(), idx.end());
  return idx;
}

// Backpropagates through rows of out = M norm(src): d_src row j accumulates
// the row-normalization Jacobian applied to (M^T d_out) row j.
inline void chain_through_generator(Matrix& d_src, const Matrix& src, const Matrix& d_out, const Matrix& m) {
  const Matrix d_norm = matmul(transpose(m), d_out);  // D x d
  for (std::size_t j = 0; j < d_norm.rows; ++j) {
    const auto w = src.row(j);
    const double nw = norm2(w);
    const auto dn = d_norm.row(j);
    double ndot = 0.0;
    for (std::size_t k = 0; k < w.size(); ++k) ndot += (w[k] / nw) * dn[k];
    for (std::size_t k = 0; k < w.size(); ++k) d_src.at(j, k) += (dn[k] - ndot * w[k] / nw) / nw;
  }
}

inline void validate_train_config(const TrainConfig& cfg) {
  if (cfg.batch_size < 1 || cfg.total_iters < 1 || cfg.eval_interval < 1 || cfg.probe_limit < 1)
    raise(errc::bad_config, "batch_size, total_iters, eval_interval, probe_limit must be positive");
  if (!(cfg.base_lr >= 0.0) || !(cfg.momentum >= 0.0) || !(cfg.weight_decay >= 0.0))
    raise(errc::bad_config, "negative optimizer constant");
  if (!(cfg.lambda_temp > 0.0)) raise(errc::bad_config, "lambda_temp must be positive");
  if (cfg.embed_dim == 0 || cfg.hidden_dim == 0 || cfg.word_front_dim == 0)
    raise(errc::bad_config, "zero architecture dimension");
}

}  // namespace detail

// One full loss-graph evaluation: train-mode forwards, the active losses of
// the model's mode, and (optionally) gradients for every parameter tensor.
// The synthetic bank comes from fixed_m when given, otherwise it is sampled
// from gen_rng; used_m reports the transformation actually applied.
struct StepResult {
  double loss_s = 0.0;
  double loss_us = 0.0;
  double loss_c = 0.0;
  ProjectorGrads g_fv;
  std::optional<ProjectorGrads> g_fs;
  Matrix d_w;
  Matrix used_m;

  double total() const { return loss_s + loss_us + loss_c; }
};

inline StepResult loss_graph_step(Model& model, const Matrix& x, const std::vector<std::size_t>& batch_pos,
                                  const Matrix& vocab_embed, const GeneratorConfig& gen, Rng* gen_rng,
                                  const Matrix* fixed_m, bool need_grads = true) {
  if (batch_pos.size() != x.rows) raise(errc::dim_mismatch, "batch labels do not match batch rows");
  const LossMode mode = model.cfg.loss_mode;
  const LossConfig lcfg{model.cfg.lambda_temp};
  const double inv_b = 1.0 / static_cast<double>(x.rows);

  auto [v, cache_v] = forward_train(model.fv, x);

  Matrix s;
  std::optional<ForwardCache> cache_s;
  if (model.fs) {
    auto [sv, cs] = forward_train(*model.fs, vocab_embed);
    s = std::move(sv);
    cache_s = std::move(cs);
  } else {
    s = vocab_embed;
  }

  StepResult res;
  Matrix d_v(v.rows, v.cols);
  Matrix d_s(s.rows, s.cols);
  res.d_w = Matrix(model.w_centers.rows, model.w_centers.cols);

  for (std::size_t i = 0; i < x.rows; ++i) {
    const Vector vi = v.row_vec(i);
    const std::size_t pos = batch_pos[i];
    if (pos >= s.rows) raise(errc::bad_index, "batch position outside vocabulary");
    if (mode == LossMode::mse_baseline) {
      auto [l, g] = mse_baseline(vi, s.row_vec(pos));
      res.loss_s += l * inv_b;
      if (need_grads)
        for (std::size_t k = 0; k < g.size(); ++k) d_v.at(i, k) += g[k] * inv_b;
    } else if (need_grads) {
      auto [bd, g] = sup_contrastive_with_grad(vi, s, pos, lcfg);
      res.loss_s += bd.total * inv_b;
      for (std::size_t k = 0; k < vi.size(); ++k) d_v.at(i, k) += g.d_query[k] * inv_b;
      for (std::size_t k = 0; k < d_s.a.size(); ++k) d_s.a[k] += g.d_prototypes.a[k] * inv_b;
    } else {
      res.loss_s += sup_contrastive(vi, s, pos, lcfg).total * inv_b;
    }
    if (uses_centers_loss(mode)) {
      if (need_grads) {
        auto [l, g] = classification_loss(vi, model.w_centers, pos, lcfg);
        res.loss_c += l * inv_b;
        for (std::size_t k = 0; k < vi.size(); ++k) d_v.at(i, k) += g.d_query[k] * inv_b;
        for (std::size_t k = 0; k < res.d_w.a.size(); ++k) res.d_w.a[k] += g.d_prototypes.a[k] * inv_b;
      } else {
        res.loss_c += sup_contrastive(vi, model.w_centers, pos, lcfg).total * inv_b;
      }
    }
  }

  if (uses_unseen_loss(mode)) {
    SyntheticClassBank bank;
    if (fixed_m != nullptr) {
      bank = apply_transform(detail::normalized_rows(model.w_centers, fixed_m->cols),
                             detail::normalized_rows(s, fixed_m->cols), *fixed_m);
    } else {
      if (gen_rng == nullptr) raise(errc::bad_config, "unseen loss needs a transformation source");
      bank = synthesize(model.w_centers, s, gen, *gen_rng);
    }
    res.used_m = bank.m;
    const auto ul = unseen_loss(bank.theta, bank.z, lcfg);
    res.loss_us = ul.value;
    if (need_grads) {
      detail::chain_through_generator(res.d_w, model.w_centers, ul.d_theta, bank.m);
      detail::chain_through_generator(d_s, s, ul.d_z, bank.m);
    }
  }

  if (need_grads) {
    auto [g_fv, d_x] = backward(model.fv, cache_v, d_v);
    res.g_fv = std::move(g_fv);
    if (model.fs) {
      auto [g, d_c] = backward(*model.fs, *cache_s, d_s);
      res.g_fs = std::move(g);
    }
  }
  return res;
}

inline TrainerState init_training(const TrainConfig& cfg, const FeatureSet& data, const ClassVocabulary& vocab) {
  detail::validate_train_config(cfg);
  if (data.count() == 0) raise(errc::empty_data, "no training samples");
  if (vocab.entries.size() < 2) raise(errc::bad_k, "need at least 2 classes");
  const auto rows = detail::vocab_rows(vocab);
  for (std::size_t i = 0; i < data.count(); ++i)
    if (!rows.count(data.class_ids[i]))
      raise(errc::label_out_of_vocab, "sample " + std::to_string(i) + " labeled with unknown class " +
                                          std::to_string(data.class_ids[i]));

  TrainerState st;
  st.cfg = cfg;
  st.rng = Rng::stream(cfg.seed, 0);

  ModelConfig mc;
  mc.loss_mode = cfg.loss_mode;
  mc.raw_dim = data.dim;
  mc.word_dim = vocab.dim;
  mc.embed_dim = cfg.embed_dim;
  mc.hidden_dim = cfg.hidden_dim;
  mc.word_front_dim = cfg.word_front_dim;
  mc.lambda_temp = cfg.lambda_temp;
  st.model = init_model(mc, vocab.entries.size(), st.rng);

  auto tensors = model_tensors(st.model);
  st.velocity.reserve(tensors.size());
  for (const auto& t : tensors) st.velocity.emplace_back(t.data.size(), 0.0);

  if (uses_unseen_loss(cfg.loss_mode)) {
    const std::size_t k = vocab.entries.size();
    const std::size_t d_use =
        cfg.generator.d_classes == 0 ? k : static_cast<std::size_t>(cfg.generator.d_classes);
    if (d_use > k) raise(errc::dim_mismatch, "generator D exceeds seen class count");
    if (d_use < mc.output_dim())
      st.warnings.push_back("generator uses D=" + std::to_string(d_use) + " < d=" +
                            std::to_string(mc.output_dim()) +
                            "; synthetic rows cannot span the embedding space");
  }
  return st;
}

// Runs iterations [state.iter, until_iter) and logs one record per iteration
// (closeness/dispersion attached every eval_interval and at the final step).
inline void train_steps(TrainerState& st, const FeatureSet& data, const ClassVocabulary& vocab,
                        long long until_iter, const LogSink& sink = nullptr) {
  const TrainConfig& cfg = st.cfg;
  if (until_iter > cfg.total_iters || until_iter < st.iter)
    raise(errc::bad_iter, "until_iter outside [iter, total_iters]");
  Model& model = st.model;

  const auto rows = detail::vocab_rows(vocab);
  std::vector<std::size_t> pos_of(data.count());
  for (std::size_t i = 0; i < data.count(); ++i) pos_of[i] = rows.at(data.class_ids[i]);
  const Matrix vocab_embed = vocab.embedding_matrix();
  const std::vector<int> vocab_ids = vocab.class_ids();

  const auto probes = detail::probe_indices(cfg, data.count());
  Matrix probe_x(probes.size(), data.dim);
  std::vector<int> probe_labels(probes.size());
  for (std::size_t i = 0; i < probes.size(); ++i) {
    probe_x.set_row(i, data.features.row(probes[i]));
    probe_labels[i] = data.class_ids[probes[i]];
  }
  const bool probe_multiclass = std::set<int>(probe_labels.begin(), probe_labels.end()).size() >= 2;

  const auto batch = static_cast<std::size_t>(cfg.batch_size);

  for (long long t = st.iter; t < until_iter; ++t) {
    const double lr = cosine_lr(t, cfg.total_iters, cfg.base_lr);

    Matrix x(batch, data.dim);
    std::vector<std::size_t> batch_pos(batch);
    for (std::size_t i = 0; i < batch; ++i) {
      const std::size_t pick = st.rng.uniform_index(data.count());
      x.set_row(i, data.features.row(pick));
      batch_pos[i] = pos_of[pick];
    }

    const bool want_fresh_m = cfg.generator.resample_each_step || !st.fixed_m;
    StepResult res = loss_graph_step(model, x, batch_pos, vocab_embed, cfg.generator,
                                     want_fresh_m ? &st.rng : nullptr,
                                     want_fresh_m ? nullptr : &*st.fixed_m);
    if (!cfg.generator.resample_each_step && !st.fixed_m && res.used_m.rows > 0) st.fixed_m = res.used_m;

    // Gradient spans in model_tensors order: fv, fs, centers.
    std::vector<std::span<double>> grad_spans;
    for (auto& g : grad_tensors(res.g_fv, model.fv)) grad_spans.push_back(g.data);
    if (res.g_fs)
      for (auto& g : grad_tensors(*res.g_fs, *model.fs)) grad_spans.push_back(g.data);
    grad_spans.push_back(std::span<double>(res.d_w.a));

    auto tensors = model_tensors(model);
    if (tensors.size() != grad_spans.size() || tensors.size() != st.velocity.size())
      raise(errc::shape_mismatch, "tensor/gradient bookkeeping out of sync");
    for (std::size_t i = 0; i < tensors.size(); ++i) {
      if (!tensors[i].trainable) continue;
      const bool is_bn = tensors[i].kind == ParamKind::bn_scale || tensors[i].kind == ParamKind::bn_shift;
      sgd_step(tensors[i].data, grad_spans[i], st.velocity[i], lr, cfg.momentum,
               is_bn ? 0.0 : cfg.weight_decay);
    }

    TrainLogRecord rec;
    rec.iter = t;
    rec.lr = lr;
    rec.loss_s = res.loss_s;
    rec.loss_us = res.loss_us;
    rec.loss_c = res.loss_c;
    rec.loss_total = total_aurl(res.loss_s, res.loss_us, res.loss_c);
    if ((t + 1) % cfg.eval_interval == 0 || t + 1 == cfg.total_iters) {
      const Matrix pv = forward_eval(model.fv, probe_x);
      const Matrix ps = model.fs ? forward_eval(*model.fs, vocab_embed) : vocab_embed;
      rec.closeness = closeness(pv, probe_labels, ps, vocab_ids);
      if (probe_multiclass) rec.dispersion = dispersion(pv, probe_labels);
    }
    if (sink) sink(rec);
    st.iter = t + 1;
  }
}

inline TrainerState train(const TrainConfig& cfg, const FeatureSet& data, const ClassVocabulary& vocab,
                          const LogSink& sink = nullptr) {
  TrainerState st = init_training(cfg, data, vocab);
  train_steps(st, data, vocab, cfg.total_iters, sink);
  return st;
}

}  // namespace aurl
