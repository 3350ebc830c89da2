#pragma once

// A trained model: the video projector f_v, the word projector f_s (absent in
// the non-end-to-end "base" modes, where raw word embeddings are used
// directly), and the per-class visual centers W learned by the angular
// softmax loss.
//
// Ablation modes:
//   aurl          seen contrastive + synthetic-class contrastive + centers
//   aurl_no_cg    as aurl without the synthetic-class term
//   ls_e2e        seen contrastive only, both projectors trainable
//   ls_only       seen contrastive, frozen trunk, raw word embeddings
//   mse_baseline  mean-squared error, frozen trunk, raw word embeddings

#include <optional>
#include <string>
#include <vector>

#include "aurl/core.hpp"
#include "aurl/projector.hpp"

namespace aurl {

enum class LossMode { aurl, ls_only, ls_e2e, mse_baseline, aurl_no_cg };

inline const char* loss_mode_name(LossMode m) {
  switch (m) {
    case LossMode::aurl: return "aurl";
    case LossMode::ls_only: return "ls_only";
    case LossMode::ls_e2e: return "ls_e2e";
    case LossMode::mse_baseline: return "mse_baseline";
    case LossMode::aurl_no_cg: return "aurl_no_cg";
  }
  return "?";
}

inline LossMode parse_loss_mode(const std::string& s) {
  if (s == "aurl") return LossMode::aurl;
  if (s == "ls_only") return LossMode::ls_only;
  if (s == "ls_e2e") return LossMode::ls_e2e;
  if (s == "mse_baseline") return LossMode::mse_baseline;
  if (s == "aurl_no_cg") return LossMode::aurl_no_cg;
  raise(errc::bad_config, "unknown loss mode: " + s);
}

inline bool is_base_mode(LossMode m) { return m == LossMode::ls_only || m == LossMode::mse_baseline; }
inline bool uses_word_projector(LossMode m) { return !is_base_mode(m); }
inline bool uses_centers_loss(LossMode m) { return m == LossMode::aurl || m == LossMode::aurl_no_cg; }
inline bool uses_unseen_loss(LossMode m) { return m == LossMode::aurl; }

struct ModelConfig {
  LossMode loss_mode = LossMode::aurl;
  std::size_t raw_dim = 512;        // ingested feature dimension
  std::size_t word_dim = 300;       // word embedding dimension
  std::size_t embed_dim = 2048;     // shared embedding dimension d
  std::size_t hidden_dim = 2048;    // MLP width
  std::size_t word_front_dim = 512; // first fc of the word projector
  double lambda_temp = 10.0;

  // Base modes project straight into word-embedding space.
  std::size_t output_dim() const { return is_base_mode(loss_mode) ? word_dim : embed_dim; }
};

// f_v: two fc+bn+relu blocks and a final fc+bn. In base modes the trunk is
// kept but the head maps into word space with no trailing batchnorm (only
// that last linear layer trains there).
inline std::vector<LayerSpec> video_projector_spec(const ModelConfig& cfg) {
  std::vector<LayerSpec> spec{
      {LayerKind::linear, cfg.raw_dim, cfg.hidden_dim},
      {LayerKind::batchnorm, cfg.hidden_dim, cfg.hidden_dim},
      {LayerKind::relu, cfg.hidden_dim, cfg.hidden_dim},
      {LayerKind::linear, cfg.hidden_dim, cfg.hidden_dim},
      {LayerKind::batchnorm, cfg.hidden_dim, cfg.hidden_dim},
      {LayerKind::relu, cfg.hidden_dim, cfg.hidden_dim},
  };
  if (is_base_mode(cfg.loss_mode)) {
    spec.push_back({LayerKind::linear, cfg.hidden_dim, cfg.word_dim});
  } else {
    spec.push_back({LayerKind::linear, cfg.hidden_dim, cfg.embed_dim});
    spec.push_back({LayerKind::batchnorm, cfg.embed_dim, cfg.embed_dim});
  }
  return spec;
}

// f_s: one fc into the front width, then the same 3-layer MLP shape.
inline std::vector<LayerSpec> word_projector_spec(const ModelConfig& cfg) {
  return {
      {LayerKind::linear, cfg.word_dim, cfg.word_front_dim},
      {LayerKind::linear, cfg.word_front_dim, cfg.hidden_dim},
      {LayerKind::batchnorm, cfg.hidden_dim, cfg.hidden_dim},
      {LayerKind::relu, cfg.hidden_dim, cfg.hidden_dim},
      {LayerKind::linear, cfg.hidden_dim, cfg.hidden_dim},
      {LayerKind::batchnorm, cfg.hidden_dim, cfg.hidden_dim},
      {LayerKind::relu, cfg.hidden_dim, cfg.hidden_dim},
      {LayerKind::linear, cfg.hidden_dim, cfg.embed_dim},
      {LayerKind::batchnorm, cfg.embed_dim, cfg.embed_dim},
  };
}

struct Model {
  ModelConfig cfg;
  Projector fv;
  std::optional<Projector> fs;
  Matrix w_centers;  // n_classes x output_dim
};

// Initialization order is fixed (fv, fs, W) so a seed pins every parameter.
inline Model init_model(const ModelConfig& cfg, std::size_t n_classes, Rng& rng) {
  if (n_classes < 2) raise(errc::bad_k, "need at least 2 classes");
  Model m;
  m.cfg = cfg;
  m.fv = init_projector(video_projector_spec(cfg), rng);
  if (uses_word_projector(cfg.loss_mode)) m.fs = init_projector(word_projector_spec(cfg), rng);
  const std::size_t out = cfg.output_dim();
  m.w_centers = Matrix(n_classes, out);
  const double bound = 1.0 / std::sqrt(static_cast<double>(out));
  for (double& x : m.w_centers.a) x = rng.uniform(-bound, bound);
  return m;
}

inline Matrix project_visual_eval(const Model& m, const Matrix& raw) { return forward_eval(m.fv, raw); }

inline Matrix project_semantic_eval(const Model& m, const Matrix& word_embeddings) {
  if (m.fs) return forward_eval(*m.fs, word_embeddings);
  if (word_embeddings.cols != m.cfg.word_dim) raise(errc::dim_mismatch, "word embedding dim mismatch");
  return word_embeddings;
}

// Fixed enumeration of every trainable tensor: f_v tensors, f_s tensors, then
// the centers. Optimizer state and checkpoints share this order.
struct ModelTensor {
  std::string name;
  ParamKind kind;
  std::span<double> data;
  bool trainable;
};

inline std::vector<double> flatten_model_params(Model& m);
inline void unflatten_model_params(Model& m, std::span<const double> flat);

inline std::vector<ModelTensor> model_tensors(Model& m) {
  std::vector<ModelTensor> out;
  const LossMode mode = m.cfg.loss_mode;

  const auto fv_tensors = param_tensors(m.fv);
  // In base modes only the head (the last weight/bias pair) trains.
  const std::size_t head_start = fv_tensors.size() >= 2 ? fv_tensors.size() - 2 : 0;
  for (std::size_t i = 0; i < fv_tensors.size(); ++i) {
    const bool trainable = is_base_mode(mode) ? i >= head_start : true;
    out.push_back({"fv." + std::to_string(i), fv_tensors[i].kind, fv_tensors[i].data, trainable});
  }
  if (m.fs) {
    auto fs_tensors = param_tensors(*m.fs);
    for (std::size_t i = 0; i < fs_tensors.size(); ++i)
      out.push_back({"fs." + std::to_string(i), fs_tensors[i].kind, fs_tensors[i].data, true});
  }
  out.push_back({"w_centers", ParamKind::linear_weight, std::span<double>(m.w_centers.a),
                 uses_centers_loss(mode)});
  return out;
}

inline std::vector<double> flatten_model_params(Model& m) {
  std::vector<double> flat;
  for (const auto& t : model_tensors(m)) flat.insert(flat.end(), t.data.begin(), t.data.end());
  return flat;
}

inline void unflatten_model_params(Model& m, std::span<const double> flat) {
  std::size_t off = 0;
  for (auto& t : model_tensors(m)) {
    if (off + t.data.size() > flat.size()) raise(errc::shape_mismatch, "flat parameter vector too short");
    std::copy(flat.begin() + off, flat.begin() + off + t.data.size(), t.data.begin());
    off += t.data.size();
  }
  if (off != flat.size()) raise(errc::shape_mismatch, "flat parameter vector too long");
}

}  // namespace aurl
