#pragma once

// Training objectives on the unit hypersphere. The supervised contrastive
// loss keeps the positive pair in the softmax denominator and splits exactly
// into an alignment term (-cos of the positive pair) plus a uniformity term
// (temperature-scaled LSE over the negatives):
//
//   total = -log softmax = lambda * SP_lambda(alignment + uniformity)
//
// Every loss ships with hand-derived gradients; the finite-difference harness
// in projector.hpp is the independent check.

#include <cstddef>
#include <utility>

#include "aurl/core.hpp"

namespace aurl {

struct LossConfig {
  double lambda_temp = 10.0;
};

struct LossBreakdown {
  double total = 0.0;
  double alignment_term = 0.0;   // -cos(v, s_pos), in [-1, 1]
  double uniformity_term = 0.0;  // (1/lambda) LSE(lambda cos(v, s_j), j != pos)
};

struct GradPair {
  Vector d_query;
  Matrix d_prototypes;
};

namespace detail {

// cos values of v against every row of S plus the norms needed by gradients.
struct CosineRow {
  Vector cos;      // K entries, clamped
  Vector row_norm; // K entries
  double v_norm = 0.0;
};

inline CosineRow cosines_against_rows(const Vector& v, const Matrix& s) {
  if (v.size() != s.cols) raise(errc::dim_mismatch, "query dim != prototype dim");
  CosineRow out;
  out.v_norm = norm2(v);
  if (!(out.v_norm > kNormEps)) raise(errc::zero_norm, "query has zero norm");
  out.cos.resize(s.rows);
  out.row_norm.resize(s.rows);
  for (std::size_t j = 0; j < s.rows; ++j) {
    const auto row = s.row(j);
    const double nj = norm2(row);
    if (!(nj > kNormEps)) raise(errc::zero_norm, "prototype row " + std::to_string(j) + " has zero norm");
    double c = dot(v, row) / (out.v_norm * nj);
    if (c > 1.0) c = 1.0;
    if (c < -1.0) c = -1.0;
    out.cos[j] = c;
    out.row_norm[j] = nj;
  }
  return out;
}

inline void check_pos(const Matrix& s, std::size_t pos) {
  if (s.rows < 2) raise(errc::bad_k, "need at least 2 classes");
  if (pos >= s.rows) raise(errc::bad_index, "positive index out of range");
}

// Softmax over lambda*cos, max-subtracted.
inline Vector softmax_scaled(const Vector& cos, double lambda) {
  Vector p(cos.size());
  double m = cos[0];
  for (double c : cos) m = std::max(m, c);
  double z = 0.0;
  for (std::size_t j = 0; j < cos.size(); ++j) {
    p[j] = std::exp(lambda * (cos[j] - m));
    z += p[j];
  }
  for (double& x : p) x /= z;
  return p;
}

// Accumulates coef * d cos(v, s_j) / d{v, s_j} into the gradient pair.
inline void accumulate_cosine_grad(const Vector& v, const Matrix& s, const CosineRow& cr, std::size_t j,
                                   double coef, GradPair& g) {
  const auto row = s.row(j);
  const double nv = cr.v_norm;
  const double nj = cr.row_norm[j];
  const double c = cr.cos[j];
  for (std::size_t k = 0; k < v.size(); ++k) {
    g.d_query[k] += coef * (row[k] / (nv * nj) - c * v[k] / (nv * nv));
    g.d_prototypes.at(j, k) += coef * (v[k] / (nv * nj) - c * row[k] / (nj * nj));
  }
}

}  // namespace detail

// -log[ exp(l cos(v,s_pos)) / sum_j exp(l cos(v,s_j)) ], positive included in
// the denominator. total is computed through the softmax route; the
// decomposition identity against lambda*SP_lambda is a tested invariant.
inline LossBreakdown sup_contrastive(const Vector& v, const Matrix& s, std::size_t pos, const LossConfig& cfg) {
  detail::check_pos(s, pos);
  const auto cr = detail::cosines_against_rows(v, s);
  const double l = cfg.lambda_temp;

  Vector scaled_all(s.rows), scaled_neg;
  scaled_neg.reserve(s.rows - 1);
  for (std::size_t j = 0; j < s.rows; ++j) {
    scaled_all[j] = l * cr.cos[j];
    if (j != pos) scaled_neg.push_back(l * cr.cos[j]);
  }

  LossBreakdown out;
  out.total = lse(scaled_all) - l * cr.cos[pos];
  out.alignment_term = -cr.cos[pos];
  out.uniformity_term = lse(scaled_neg) / l;
  return out;
}

inline GradPair sup_contrastive_grad(const Vector& v, const Matrix& s, std::size_t pos, const LossConfig& cfg) {
  detail::check_pos(s, pos);
  const auto cr = detail::cosines_against_rows(v, s);
  const double l = cfg.lambda_temp;
  const Vector p = detail::softmax_scaled(cr.cos, l);

  GradPair g{Vector(v.size(), 0.0), Matrix(s.rows, s.cols)};
  for (std::size_t j = 0; j < s.rows; ++j) {
    const double coef = l * (p[j] - (j == pos ? 1.0 : 0.0));
    detail::accumulate_cosine_grad(v, s, cr, j, coef, g);
  }
  return g;
}

// Fused value + gradient (one cosine pass); the training loop's hot path.
inline std::pair<LossBreakdown, GradPair> sup_contrastive_with_grad(const Vector& v, const Matrix& s,
                                                                    std::size_t pos, const LossConfig& cfg) {
  detail::check_pos(s, pos);
  const auto cr = detail::cosines_against_rows(v, s);
  const double l = cfg.lambda_temp;

  Vector scaled_all(s.rows), scaled_neg;
  scaled_neg.reserve(s.rows - 1);
  for (std::size_t j = 0; j < s.rows; ++j) {
    scaled_all[j] = l * cr.cos[j];
    if (j != pos) scaled_neg.push_back(l * cr.cos[j]);
  }
  LossBreakdown bd;
  bd.total = lse(scaled_all) - l * cr.cos[pos];
  bd.alignment_term = -cr.cos[pos];
  bd.uniformity_term = lse(scaled_neg) / l;

  const Vector p = detail::softmax_scaled(cr.cos, l);
  GradPair g{Vector(v.size(), 0.0), Matrix(s.rows, s.cols)};
  for (std::size_t j = 0; j < s.rows; ++j) {
    const double coef = l * (p[j] - (j == pos ? 1.0 : 0.0));
    detail::accumulate_cosine_grad(v, s, cr, j, coef, g);
  }
  return {bd, g};
}

// Label-reformulated self-supervised loss: the positive is excluded from the
// denominator, so the value can go negative.
inline double self_contrastive(const Vector& v, const Matrix& s, std::size_t pos, const LossConfig& cfg) {
  detail::check_pos(s, pos);
  const auto cr = detail::cosines_against_rows(v, s);
  const double l = cfg.lambda_temp;
  Vector scaled_neg;
  scaled_neg.reserve(s.rows - 1);
  for (std::size_t j = 0; j < s.rows; ++j)
    if (j != pos) scaled_neg.push_back(l * cr.cos[j]);
  return -l * cr.cos[pos] + lse(scaled_neg);
}

inline GradPair self_contrastive_grad(const Vector& v, const Matrix& s, std::size_t pos, const LossConfig& cfg) {
  detail::check_pos(s, pos);
  const auto cr = detail::cosines_against_rows(v, s);
  const double l = cfg.lambda_temp;

  // Softmax over the negatives only.
  Vector neg_cos;
  neg_cos.reserve(s.rows - 1);
  for (std::size_t j = 0; j < s.rows; ++j)
    if (j != pos) neg_cos.push_back(cr.cos[j]);
  const Vector q = detail::softmax_scaled(neg_cos, l);

  GradPair g{Vector(v.size(), 0.0), Matrix(s.rows, s.cols)};
  std::size_t qi = 0;
  for (std::size_t j = 0; j < s.rows; ++j) {
    const double coef = (j == pos) ? -l : l * q[qi++];
    detail::accumulate_cosine_grad(v, s, cr, j, coef, g);
  }
  return g;
}

// Angular-softmax center loss: identical form with visual centers W as
// prototypes. Pushes each visual feature toward its class center.
inline std::pair<double, GradPair> classification_loss(const Vector& v, const Matrix& w, std::size_t pos,
                                                       const LossConfig& cfg) {
  auto [bd, g] = sup_contrastive_with_grad(v, w, pos, cfg);
  return {bd.total, std::move(g)};
}

struct UnseenLossResult {
  double value = 0.0;
  Matrix d_theta;
  Matrix d_z;
};

// Mean over synthetic classes i of the supervised contrastive loss of
// (theta_i, Z) with positive i; gradients flow into both matrices.
inline UnseenLossResult unseen_loss(const Matrix& theta, const Matrix& z, const LossConfig& cfg) {
  if (!theta.same_shape(z)) raise(errc::shape_mismatch, "theta and z shapes differ");
  if (theta.rows < 2) raise(errc::bad_k, "need at least 2 synthetic classes");
  const std::size_t ku = theta.rows;
  const double l = cfg.lambda_temp;

  Vector theta_norm(ku), z_norm(ku);
  for (std::size_t i = 0; i < ku; ++i) {
    theta_norm[i] = norm2(theta.row(i));
    z_norm[i] = norm2(z.row(i));
    if (!(theta_norm[i] > kNormEps) || !(z_norm[i] > kNormEps))
      raise(errc::zero_norm_row, "row " + std::to_string(i) + " has zero norm");
  }

  Matrix cos(ku, ku);
  for (std::size_t i = 0; i < ku; ++i)
    for (std::size_t j = 0; j < ku; ++j) {
      double c = dot(theta.row(i), z.row(j)) / (theta_norm[i] * z_norm[j]);
      if (c > 1.0) c = 1.0;
      if (c < -1.0) c = -1.0;
      cos.at(i, j) = c;
    }

  UnseenLossResult out;
  out.d_theta = Matrix(ku, theta.cols);
  out.d_z = Matrix(ku, z.cols);
  const double inv_ku = 1.0 / static_cast<double>(ku);

  for (std::size_t i = 0; i < ku; ++i) {
    const Vector row_cos(cos.a.begin() + i * ku, cos.a.begin() + (i + 1) * ku);
    Vector scaled(ku);
    for (std::size_t j = 0; j < ku; ++j) scaled[j] = l * row_cos[j];
    out.value += (lse(scaled) - l * row_cos[i]) * inv_ku;

    const Vector p = detail::softmax_scaled(row_cos, l);
    const auto ti = theta.row(i);
    for (std::size_t j = 0; j < ku; ++j) {
      const double coef = inv_ku * l * (p[j] - (j == i ? 1.0 : 0.0));
      if (coef == 0.0) continue;
      const auto zj = z.row(j);
      const double nt = theta_norm[i];
      const double nz = z_norm[j];
      const double c = cos.at(i, j);
      for (std::size_t k = 0; k < theta.cols; ++k) {
        out.d_theta.at(i, k) += coef * (zj[k] / (nt * nz) - c * ti[k] / (nt * nt));
        out.d_z.at(j, k) += coef * (ti[k] / (nt * nz) - c * zj[k] / (nz * nz));
      }
    }
  }
  return out;
}

// Ablation baseline: mean squared difference; gradient w.r.t. the query.
inline std::pair<double, Vector> mse_baseline(const Vector& v, const Vector& s) {
  if (v.size() != s.size()) raise(errc::dim_mismatch, "mse: dims differ");
  if (v.empty()) raise(errc::empty_input, "mse: empty vectors");
  const double inv_d = 1.0 / static_cast<double>(v.size());
  double loss = 0.0;
  Vector grad(v.size());
  for (std::size_t k = 0; k < v.size(); ++k) {
    const double d = v[k] - s[k];
    loss += d * d * inv_d;
    grad[k] = 2.0 * d * inv_d;
  }
  return {loss, grad};
}

// Overall objective is the unweighted sum of its active components.
inline double total_aurl(double loss_s, double loss_us, double loss_c) { return loss_s + loss_us + loss_c; }

}  // namespace aurl
