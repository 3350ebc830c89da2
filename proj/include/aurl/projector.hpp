#pragma once

// Small MLP projectors (linear / batchnorm / relu chains) with hand-derived
// backward passes. Batch statistics are treated as differentiable functions
// of the batch, so the backward is exact and checkable by central finite
// differences (the harness at the bottom of this header).

#include <algorithm>
#include <cstddef>
#include <functional>
#include <set>
#include <utility>
#include <vector>

#include "aurl/core.hpp"

namespace aurl {

enum class LayerKind { linear, batchnorm, relu };

struct LayerSpec {
  LayerKind kind;
  std::size_t in_dim;
  std::size_t out_dim;
};

struct LinearParams {
  Matrix w;  // out x in
  Vector b;
};

struct BatchNormParams {
  Vector gamma, beta;
  Vector running_mean, running_var;
  double eps = 1e-5;
  double momentum = 0.1;
};

struct Projector {
  std::vector<LayerSpec> spec;
  std::vector<LinearParams> linears;   // in spec order
  std::vector<BatchNormParams> bns;    // in spec order

  std::size_t in_dim() const { return spec.front().in_dim; }
  std::size_t out_dim() const { return spec.back().out_dim; }
  bool has_batchnorm() const {
    for (const auto& l : spec)
      if (l.kind == LayerKind::batchnorm) return true;
    return false;
  }
};

inline void validate_spec(const std::vector<LayerSpec>& spec) {
  if (spec.empty()) raise(errc::bad_spec, "empty layer chain");
  for (std::size_t i = 0; i < spec.size(); ++i) {
    const auto& l = spec[i];
    if (l.in_dim == 0 || l.out_dim == 0) raise(errc::bad_spec, "zero dimension in layer " + std::to_string(i));
    if (l.kind != LayerKind::linear && l.in_dim != l.out_dim)
      raise(errc::bad_spec, "batchnorm/relu layer " + std::to_string(i) + " must keep its dimension");
    if (i > 0 && spec[i - 1].out_dim != l.in_dim)
      raise(errc::bad_spec, "layer " + std::to_string(i) + " input does not match previous output");
  }
}

// Linear weights ~ U(-1/sqrt(in), 1/sqrt(in)), biases zero; batchnorm starts
// as the identity with unit running variance.
inline Projector init_projector(const std::vector<LayerSpec>& spec, Rng& rng) {
  validate_spec(spec);
  Projector p;
  p.spec = spec;
  for (const auto& l : spec) {
    if (l.kind == LayerKind::linear) {
      const double bound = 1.0 / std::sqrt(static_cast<double>(l.in_dim));
      LinearParams lp{Matrix(l.out_dim, l.in_dim), Vector(l.out_dim, 0.0)};
      for (double& x : lp.w.a) x = rng.uniform(-bound, bound);
      p.linears.push_back(std::move(lp));
    } else if (l.kind == LayerKind::batchnorm) {
      BatchNormParams bp;
      bp.gamma.assign(l.in_dim, 1.0);
      bp.beta.assign(l.in_dim, 0.0);
      bp.running_mean.assign(l.in_dim, 0.0);
      bp.running_var.assign(l.in_dim, 1.0);
      p.bns.push_back(std::move(bp));
    }
  }
  return p;
}

struct BnCache {
  Matrix xhat;
  Vector inv_std;
};

struct ForwardCache {
  std::vector<LayerSpec> spec;     // chain this cache belongs to
  std::vector<Matrix> inputs;      // input of every layer
  std::vector<BnCache> bn;         // per batchnorm layer
  std::size_t batch = 0;
};

namespace detail {

inline Matrix linear_forward(const LinearParams& lp, const Matrix& x) {
  Matrix y(x.rows, lp.w.rows);
  for (std::size_t n = 0; n < x.rows; ++n)
    for (std::size_t o = 0; o < lp.w.rows; ++o) {
      double s = lp.b[o];
      for (std::size_t i = 0; i < lp.w.cols; ++i) s += x.at(n, i) * lp.w.at(o, i);
      y.at(n, o) = s;
    }
  return y;
}

}  // namespace detail

// Eval mode: batchnorm uses running statistics, so rows are independent.
inline Matrix forward_eval(const Projector& p, const Matrix& x) {
  if (x.cols != p.in_dim()) raise(errc::dim_mismatch, "input dim != projector input");
  Matrix cur = x;
  std::size_t li = 0, bi = 0;
  for (const auto& l : p.spec) {
    switch (l.kind) {
      case LayerKind::linear:
        cur = detail::linear_forward(p.linears[li++], cur);
        break;
      case LayerKind::batchnorm: {
        const auto& bp = p.bns[bi++];
        for (std::size_t j = 0; j < cur.cols; ++j) {
          const double inv_std = 1.0 / std::sqrt(bp.running_var[j] + bp.eps);
          for (std::size_t n = 0; n < cur.rows; ++n)
            cur.at(n, j) = bp.gamma[j] * (cur.at(n, j) - bp.running_mean[j]) * inv_std + bp.beta[j];
        }
        break;
      }
      case LayerKind::relu:
        for (double& v : cur.a) v = std::max(v, 0.0);
        break;
    }
  }
  return cur;
}

// Train mode: batchnorm normalizes with the batch statistics of this call and
// updates the running statistics in place.
inline std::pair<Matrix, ForwardCache> forward_train(Projector& p, const Matrix& x) {
  if (x.cols != p.in_dim()) raise(errc::dim_mismatch, "input dim != projector input");
  if (p.has_batchnorm() && x.rows < 2) raise(errc::batch_too_small, "train-mode batchnorm needs batch >= 2");

  ForwardCache cache;
  cache.spec = p.spec;
  cache.batch = x.rows;

  Matrix cur = x;
  std::size_t li = 0, bi = 0;
  for (const auto& l : p.spec) {
    cache.inputs.push_back(cur);
    switch (l.kind) {
      case LayerKind::linear:
        cur = detail::linear_forward(p.linears[li++], cur);
        break;
      case LayerKind::batchnorm: {
        auto& bp = p.bns[bi++];
        const auto n = static_cast<double>(cur.rows);
        BnCache bc;
        bc.xhat = Matrix(cur.rows, cur.cols);
        bc.inv_std.resize(cur.cols);
        for (std::size_t j = 0; j < cur.cols; ++j) {
          double mean = 0.0;
          for (std::size_t r = 0; r < cur.rows; ++r) mean += cur.at(r, j);
          mean /= n;
          double var = 0.0;
          for (std::size_t r = 0; r < cur.rows; ++r) {
            const double d = cur.at(r, j) - mean;
            var += d * d;
          }
          var /= n;
          const double inv_std = 1.0 / std::sqrt(var + bp.eps);
          bc.inv_std[j] = inv_std;
          for (std::size_t r = 0; r < cur.rows; ++r) {
            const double xh = (cur.at(r, j) - mean) * inv_std;
            bc.xhat.at(r, j) = xh;
            cur.at(r, j) = bp.gamma[j] * xh + bp.beta[j];
          }
          bp.running_mean[j] = (1.0 - bp.momentum) * bp.running_mean[j] + bp.momentum * mean;
          bp.running_var[j] = (1.0 - bp.momentum) * bp.running_var[j] + bp.momentum * var;
        }
        cache.bn.push_back(std::move(bc));
        break;
      }
      case LayerKind::relu:
        for (double& v : cur.a) v = std::max(v, 0.0);
        break;
    }
  }
  return {std::move(cur), std::move(cache)};
}

struct BnGrads {
  Vector d_gamma, d_beta;
};

struct ProjectorGrads {
  std::vector<LinearParams> linear;  // d_w / d_b per linear layer
  std::vector<BnGrads> bn;
};

inline ProjectorGrads make_grads(const Projector& p) {
  ProjectorGrads g;
  for (const auto& lp : p.linears) g.linear.push_back({Matrix(lp.w.rows, lp.w.cols), Vector(lp.b.size(), 0.0)});
  for (const auto& bp : p.bns) g.bn.push_back({Vector(bp.gamma.size(), 0.0), Vector(bp.beta.size(), 0.0)});
  return g;
}

// Exact gradients w.r.t. all parameters and the input for a train-mode
// forward. d_out must match the forward output shape.
inline std::pair<ProjectorGrads, Matrix> backward(const Projector& p, const ForwardCache& cache,
                                                  const Matrix& d_out) {
  if (cache.spec.size() != p.spec.size() || cache.inputs.size() != p.spec.size())
    raise(errc::stale_cache, "cache does not match this projector");
  for (std::size_t i = 0; i < p.spec.size(); ++i)
    if (cache.spec[i].kind != p.spec[i].kind || cache.spec[i].in_dim != p.spec[i].in_dim ||
        cache.spec[i].out_dim != p.spec[i].out_dim)
      raise(errc::stale_cache, "layer chain changed since forward");
  if (d_out.rows != cache.batch || d_out.cols != p.out_dim())
    raise(errc::stale_cache, "upstream gradient shape does not match cached forward");

  ProjectorGrads grads = make_grads(p);
  Matrix d_cur = d_out;
  std::size_t li = p.linears.size(), bi = p.bns.size();

  for (std::size_t idx = p.spec.size(); idx-- > 0;) {
    const auto& l = p.spec[idx];
    const Matrix& input = cache.inputs[idx];
    switch (l.kind) {
      case LayerKind::linear: {
        --li;
        const auto& lp = p.linears[li];
        auto& g = grads.linear[li];
        for (std::size_t n = 0; n < input.rows; ++n)
          for (std::size_t o = 0; o < lp.w.rows; ++o) {
            const double dy = d_cur.at(n, o);
            if (dy == 0.0) continue;
            g.b[o] += dy;
            for (std::size_t i = 0; i < lp.w.cols; ++i) g.w.at(o, i) += dy * input.at(n, i);
          }
        Matrix d_in(input.rows, input.cols);
        for (std::size_t n = 0; n < input.rows; ++n)
          for (std::size_t o = 0; o < lp.w.rows; ++o) {
            const double dy = d_cur.at(n, o);
            if (dy == 0.0) continue;
            for (std::size_t i = 0; i < lp.w.cols; ++i) d_in.at(n, i) += dy * lp.w.at(o, i);
          }
        d_cur = std::move(d_in);
        break;
      }
      case LayerKind::batchnorm: {
        --bi;
        const auto& bp = p.bns[bi];
        const auto& bc = cache.bn[bi];
        auto& g = grads.bn[bi];
        const auto n = static_cast<double>(input.rows);
        Matrix d_in(input.rows, input.cols);
        for (std::size_t j = 0; j < input.cols; ++j) {
          double sum_dxhat = 0.0, sum_dxhat_xhat = 0.0;
          for (std::size_t r = 0; r < input.rows; ++r) {
            const double dy = d_cur.at(r, j);
            g.d_gamma[j] += dy * bc.xhat.at(r, j);
            g.d_beta[j] += dy;
            const double dxh = dy * bp.gamma[j];
            sum_dxhat += dxh;
            sum_dxhat_xhat += dxh * bc.xhat.at(r, j);
          }
          const double istd = bc.inv_std[j];
          for (std::size_t r = 0; r < input.rows; ++r) {
            const double dxh = d_cur.at(r, j) * bp.gamma[j];
            d_in.at(r, j) = (istd / n) * (n * dxh - sum_dxhat - bc.xhat.at(r, j) * sum_dxhat_xhat);
          }
        }
        d_cur = std::move(d_in);
        break;
      }
      case LayerKind::relu: {
        Matrix d_in(input.rows, input.cols);
        for (std::size_t i = 0; i < input.a.size(); ++i) d_in.a[i] = input.a[i] > 0.0 ? d_cur.a[i] : 0.0;
        d_cur = std::move(d_in);
        break;
      }
    }
  }
  return {std::move(grads), std::move(d_cur)};
}

// ---------------------------------------------------------------------------
// Parameter enumeration (fixed order: layers in spec order; weight before
// bias, scale before shift). Optimizer state and checkpoints index into this.
// ---------------------------------------------------------------------------

enum class ParamKind { linear_weight, linear_bias, bn_scale, bn_shift };

struct ParamRef {
  ParamKind kind;
  std::span<double> data;
};

inline std::vector<ParamRef> param_tensors(Projector& p) {
  std::vector<ParamRef> out;
  std::size_t li = 0, bi = 0;
  for (const auto& l : p.spec) {
    if (l.kind == LayerKind::linear) {
      auto& lp = p.linears[li++];
      out.push_back({ParamKind::linear_weight, std::span<double>(lp.w.a)});
      out.push_back({ParamKind::linear_bias, std::span<double>(lp.b)});
    } else if (l.kind == LayerKind::batchnorm) {
      auto& bp = p.bns[bi++];
      out.push_back({ParamKind::bn_scale, std::span<double>(bp.gamma)});
      out.push_back({ParamKind::bn_shift, std::span<double>(bp.beta)});
    }
  }
  return out;
}

inline std::vector<ParamRef> grad_tensors(ProjectorGrads& g, const Projector& p) {
  std::vector<ParamRef> out;
  std::size_t li = 0, bi = 0;
  for (const auto& l : p.spec) {
    if (l.kind == LayerKind::linear) {
      auto& lp = g.linear[li++];
      out.push_back({ParamKind::linear_weight, std::span<double>(lp.w.a)});
      out.push_back({ParamKind::linear_bias, std::span<double>(lp.b)});
    } else if (l.kind == LayerKind::batchnorm) {
      auto& bp = g.bn[bi++];
      out.push_back({ParamKind::bn_scale, std::span<double>(bp.d_gamma)});
      out.push_back({ParamKind::bn_shift, std::span<double>(bp.d_beta)});
    }
  }
  return out;
}

inline std::vector<double> flatten_params(Projector& p) {
  std::vector<double> out;
  for (const auto& t : param_tensors(p)) out.insert(out.end(), t.data.begin(), t.data.end());
  return out;
}

inline void unflatten_params(Projector& p, std::span<const double> flat) {
  std::size_t off = 0;
  for (auto& t : param_tensors(p)) {
    std::copy(flat.begin() + off, flat.begin() + off + t.data.size(), t.data.begin());
    off += t.data.size();
  }
  if (off != flat.size()) raise(errc::shape_mismatch, "flat parameter size mismatch");
}

inline std::vector<double> flatten_grads(ProjectorGrads& g, const Projector& p) {
  std::vector<double> out;
  for (const auto& t : grad_tensors(g, p)) out.insert(out.end(), t.data.begin(), t.data.end());
  return out;
}

// ---------------------------------------------------------------------------
// Central finite-difference verification harness.
// ---------------------------------------------------------------------------

struct FiniteDiffReport {
  double max_rel_err = 0.0;
  std::size_t worst_coord = 0;
  double worst_analytic = 0.0;
  double worst_numeric = 0.0;
  std::size_t coords_checked = 0;
  std::size_t coords_skipped = 0;  // below the resolution of this step size
  bool pass = false;
};

// Compares analytic against central differences of fn. Relative error uses
// max(1e-8, |analytic| + |numeric|) in the denominator. Coordinates whose
// analytic and numeric values both sit below the rounding resolution of the
// difference quotient (ulp(f)/2h blown up by 1/tol) cannot be certified at
// this step size and are counted as skipped instead of compared; a genuinely
// wrong gradient still fails on the resolvable coordinates. With max_coords >
// 0 and a large parameter vector, checks a random subset of at least 200
// coordinates drawn from subset_rng.
inline FiniteDiffReport finite_diff_check(const std::function<double(std::span<const double>)>& fn,
                                          std::vector<double> params, std::span<const double> analytic,
                                          double step, double tol, std::size_t max_coords = 0,
                                          Rng* subset_rng = nullptr) {
  if (params.size() != analytic.size()) raise(errc::shape_mismatch, "analytic gradient size mismatch");

  std::vector<std::size_t> coords;
  if (max_coords > 0 && params.size() > std::max<std::size_t>(max_coords, 200) && subset_rng != nullptr) {
    const std::size_t want = std::max<std::size_t>(max_coords, 200);
    std::set<std::size_t> chosen;
    while (chosen.size() < want) chosen.insert(subset_rng->uniform_index(params.size()));
    coords.assign(chosen.begin(), chosen.end());
  } else {
    coords.resize(params.size());
    for (std::size_t i = 0; i < coords.size(); ++i) coords[i] = i;
  }

  const double f0 = fn(params);
  const double quantum = 8.0 * 2.220446049250313e-16 * std::max(1.0, std::abs(f0)) / (2.0 * step);
  const double resolvable = quantum / std::max(tol, 1e-5);

  FiniteDiffReport report;
  report.coords_checked = coords.size();
  for (const std::size_t i : coords) {
    const double saved = params[i];
    params[i] = saved + step;
    const double up = fn(params);
    params[i] = saved - step;
    const double down = fn(params);
    params[i] = saved;
    const double numeric = (up - down) / (2.0 * step);
    const double mass = std::abs(analytic[i]) + std::abs(numeric);
    if (mass < resolvable) {
      ++report.coords_skipped;
      continue;
    }
    const double rel = std::abs(analytic[i] - numeric) / std::max(1e-8, mass);
    if (rel > report.max_rel_err) {
      report.max_rel_err = rel;
      report.worst_coord = i;
      report.worst_analytic = analytic[i];
      report.worst_numeric = numeric;
    }
  }
  report.pass = report.max_rel_err < tol;
  return report;
}

}  // namespace aurl
