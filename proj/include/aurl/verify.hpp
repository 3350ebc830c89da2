#pragma once

// Numerical self-checks behind the `verify` CLI command and the acceptance
// suite: the loss decomposition identity, the upper bounds, the regime
// classifier, and finite-difference checks of every analytic gradient
// including the full two-projector training graph.

#include <algorithm>
#include <string>
#include <vector>

#include "aurl/bounds.hpp"
#include "aurl/core.hpp"
#include "aurl/losses.hpp"
#include "aurl/model.hpp"
#include "aurl/projector.hpp"
#include "aurl/trainer.hpp"

namespace aurl {

struct VerifyCheck {
  std::string name;
  bool pass = false;
  double stat = 0.0;  // the quantity compared against the threshold
  std::string detail;
};

struct VerifyReport {
  std::vector<VerifyCheck> checks;
  bool all_pass() const {
    for (const auto& c : checks)
      if (!c.pass) return false;
    return true;
  }
};

namespace verify_detail {

constexpr std::size_t kDims[] = {4, 16};
constexpr std::size_t kClassCounts[] = {3, 10, 100};
constexpr double kLambdas[] = {1.0, 10.0, 100.0};

struct Instance {
  Vector v;
  Matrix s;
  std::size_t pos;
  double lambda;
};

inline Instance random_instance(std::size_t dim, std::size_t k, double lambda, Rng& rng) {
  Instance inst;
  inst.v = normalize(gaussian_vector(dim, rng));
  inst.s = Matrix(k, dim);
  for (std::size_t j = 0; j < k; ++j) inst.s.set_row(j, normalize(gaussian_vector(dim, rng)));
  inst.pos = rng.uniform_index(k);
  inst.lambda = lambda;
  return inst;
}

}  // namespace verify_detail

// |sup_total - lambda SP_lambda(alignment + uniformity)| over the (d, K,
// lambda) sweep, plus the softplus relationship against the self loss.
inline VerifyCheck check_decomposition(std::size_t n_samples, std::uint64_t seed) {
  Rng rng = Rng::stream(seed, 10);
  double max_err = 0.0;
  std::size_t done = 0;
  while (done < n_samples) {
    for (std::size_t dim : verify_detail::kDims)
      for (std::size_t k : verify_detail::kClassCounts)
        for (double lambda : verify_detail::kLambdas) {
          if (done >= n_samples) break;
          const auto inst = verify_detail::random_instance(dim, k, lambda, rng);
          const LossConfig cfg{inst.lambda};
          const LossBreakdown bd = sup_contrastive(inst.v, inst.s, inst.pos, cfg);
          const double reconstructed =
              inst.lambda * softplus_lambda(bd.alignment_term + bd.uniformity_term, inst.lambda);
          max_err = std::max(max_err, std::abs(bd.total - reconstructed));
          const double self_val = self_contrastive(inst.v, inst.s, inst.pos, cfg);
          max_err = std::max(max_err, std::abs(bd.total - softplus_lambda(self_val, 1.0)));
          ++done;
        }
  }
  VerifyCheck c;
  c.name = "decomposition identity";
  c.stat = max_err;
  c.pass = max_err < 1e-9;
  c.detail = std::to_string(n_samples) + " samples, max |direct - reconstructed| = " + format_double(max_err);
  return c;
}

inline VerifyCheck check_bounds_sweep(std::size_t n_samples, std::uint64_t seed) {
  Rng rng = Rng::stream(seed, 11);
  double min_slack = 1e300;
  std::size_t combos = 0;
  for (std::size_t dim : verify_detail::kDims)
    for (std::size_t k : verify_detail::kClassCounts)
      for (double lambda : verify_detail::kLambdas) ++combos;
  const std::size_t per_combo = std::max<std::size_t>(1, n_samples / combos);

  for (std::size_t dim : verify_detail::kDims)
    for (std::size_t k : verify_detail::kClassCounts)
      for (double lambda : verify_detail::kLambdas) {
        const auto summary = verify_bounds(per_combo, dim, k, lambda, rng);
        min_slack = std::min({min_slack, summary.min_self_slack, summary.min_sup_slack});
      }
  VerifyCheck c;
  c.name = "upper bounds";
  c.stat = min_slack;
  c.pass = min_slack >= -1e-9;
  c.detail = "min slack over sweep = " + format_double(min_slack);
  return c;
}

// With a single negative the LSE collapses and the self bound is an equality.
inline VerifyCheck check_k2_tightness(std::size_t n_samples, std::uint64_t seed) {
  Rng rng = Rng::stream(seed, 12);
  double max_abs_slack = 0.0;
  for (double lambda : verify_detail::kLambdas) {
    for (std::size_t t = 0; t < n_samples; ++t) {
      const auto inst = verify_detail::random_instance(4, 2, lambda, rng);
      const LossConfig cfg{lambda};
      const double loss = self_contrastive(inst.v, inst.s, inst.pos, cfg);
      const double sim_pos = cosine(inst.v, inst.s.row_vec(inst.pos));
      const double sim_max = cosine(inst.v, inst.s.row_vec(1 - inst.pos));
      const double bound = self_bound(sim_pos, sim_max, 2, lambda);
      max_abs_slack = std::max(max_abs_slack, std::abs(bound - loss));
    }
  }
  VerifyCheck c;
  c.name = "K=2 self bound tight";
  c.stat = max_abs_slack;
  c.pass = max_abs_slack <= 1e-12;
  c.detail = "max |bound - loss| = " + format_double(max_abs_slack);
  return c;
}

inline VerifyCheck check_regime() {
  VerifyCheck c;
  c.name = "regime classification";
  const bool a = regime(662, 10.0) == Regime::triplet_like;
  const bool b = regime(2, 0.001) == Regime::triplet_like;
  const bool d = regime(1000000000, 1.0) == Regime::contrastive_like;
  c.pass = a && b && d;
  c.stat = std::log(661.0) / 10.0;
  c.detail = "log(661)/10 = " + format_double(c.stat) + (c.pass ? " < 2" : " misclassified");
  return c;
}

// ---------------------------------------------------------------------------
// Gradient suite
// ---------------------------------------------------------------------------

namespace verify_detail {

constexpr double kFdStep = 1e-6;
constexpr double kFdTol = 1e-4;
// lambda = 100 stays out of the difference-quotient suites: its third
// derivative makes the O(h^2) truncation larger than the tolerance.
constexpr double kFdLambdas[] = {1.0, 10.0};

inline std::vector<double> pack(const Vector& v, const Matrix& m) {
  std::vector<double> flat(v);
  flat.insert(flat.end(), m.a.begin(), m.a.end());
  return flat;
}

inline VerifyCheck grad_check_loop(const std::string& name, std::size_t instances, std::uint64_t seed,
                                   std::uint64_t stream,
                                   const std::function<FiniteDiffReport(Rng&)>& one_instance) {
  Rng rng = Rng::stream(seed, stream);
  VerifyCheck c;
  c.name = name;
  c.pass = true;
  for (std::size_t t = 0; t < instances; ++t) {
    const FiniteDiffReport rep = one_instance(rng);
    c.stat = std::max(c.stat, rep.max_rel_err);
    if (!rep.pass) c.pass = false;
  }
  c.detail = std::to_string(instances) + " instances, max rel err = " + format_double(c.stat);
  return c;
}

}  // namespace verify_detail

inline VerifyCheck check_grad_sup(std::size_t instances, std::uint64_t seed) {
  using namespace verify_detail;
  return grad_check_loop("grad: supervised contrastive", instances, seed, 20, [](Rng& rng) {
    const std::size_t dim = 3 + rng.uniform_index(4);
    const std::size_t k = 2 + rng.uniform_index(4);
    const double lambda = kFdLambdas[rng.uniform_index(2)];
    const auto inst = random_instance(dim, k, lambda, rng);
    const LossConfig cfg{lambda};
    const GradPair g = sup_contrastive_grad(inst.v, inst.s, inst.pos, cfg);
    const auto fn = [&](std::span<const double> p) {
      const Vector v(p.begin(), p.begin() + dim);
      Matrix s(k, dim);
      std::copy(p.begin() + dim, p.end(), s.a.begin());
      return sup_contrastive(v, s, inst.pos, cfg).total;
    };
    return finite_diff_check(fn, pack(inst.v, inst.s), pack(g.d_query, g.d_prototypes), kFdStep, kFdTol);
  });
}

inline VerifyCheck check_grad_self(std::size_t instances, std::uint64_t seed) {
  using namespace verify_detail;
  return grad_check_loop("grad: self contrastive", instances, seed, 21, [](Rng& rng) {
    const std::size_t dim = 3 + rng.uniform_index(4);
    const std::size_t k = 2 + rng.uniform_index(4);
    const double lambda = kFdLambdas[rng.uniform_index(2)];
    const auto inst = random_instance(dim, k, lambda, rng);
    const LossConfig cfg{lambda};
    const GradPair g = self_contrastive_grad(inst.v, inst.s, inst.pos, cfg);
    const auto fn = [&](std::span<const double> p) {
      const Vector v(p.begin(), p.begin() + dim);
      Matrix s(k, dim);
      std::copy(p.begin() + dim, p.end(), s.a.begin());
      return self_contrastive(v, s, inst.pos, cfg);
    };
    return finite_diff_check(fn, pack(inst.v, inst.s), pack(g.d_query, g.d_prototypes), kFdStep, kFdTol);
  });
}

inline VerifyCheck check_grad_classification(std::size_t instances, std::uint64_t seed) {
  using namespace verify_detail;
  return grad_check_loop("grad: classification", instances, seed, 22, [](Rng& rng) {
    const std::size_t dim = 3 + rng.uniform_index(4);
    const std::size_t k = 2 + rng.uniform_index(4);
    const double lambda = kFdLambdas[rng.uniform_index(2)];
    const auto inst = random_instance(dim, k, lambda, rng);
    const LossConfig cfg{lambda};
    const auto [value, g] = classification_loss(inst.v, inst.s, inst.pos, cfg);
    const auto fn = [&](std::span<const double> p) {
      const Vector v(p.begin(), p.begin() + dim);
      Matrix w(k, dim);
      std::copy(p.begin() + dim, p.end(), w.a.begin());
      return classification_loss(v, w, inst.pos, cfg).first;
    };
    return finite_diff_check(fn, pack(inst.v, inst.s), pack(g.d_query, g.d_prototypes), kFdStep, kFdTol);
  });
}

inline VerifyCheck check_grad_unseen(std::size_t instances, std::uint64_t seed) {
  using namespace verify_detail;
  return grad_check_loop("grad: unseen classes", instances, seed, 23, [](Rng& rng) {
    const std::size_t dim = 3 + rng.uniform_index(4);
    const std::size_t ku = 2 + rng.uniform_index(4);
    const double lambda = kFdLambdas[rng.uniform_index(2)];
    const LossConfig cfg{lambda};
    Matrix theta(ku, dim), z(ku, dim);
    for (std::size_t i = 0; i < ku; ++i) {
      theta.set_row(i, gaussian_vector(dim, rng));
      z.set_row(i, gaussian_vector(dim, rng));
    }
    const auto res = unseen_loss(theta, z, cfg);
    std::vector<double> params(theta.a);
    params.insert(params.end(), z.a.begin(), z.a.end());
    std::vector<double> analytic(res.d_theta.a);
    analytic.insert(analytic.end(), res.d_z.a.begin(), res.d_z.a.end());
    const auto fn = [&](std::span<const double> p) {
      Matrix th(ku, dim), zz(ku, dim);
      std::copy(p.begin(), p.begin() + ku * dim, th.a.begin());
      std::copy(p.begin() + ku * dim, p.end(), zz.a.begin());
      return unseen_loss(th, zz, cfg).value;
    };
    return finite_diff_check(fn, params, analytic, kFdStep, kFdTol);
  });
}

inline VerifyCheck check_grad_mse(std::size_t instances, std::uint64_t seed) {
  using namespace verify_detail;
  return grad_check_loop("grad: mse baseline", instances, seed, 24, [](Rng& rng) {
    const std::size_t dim = 3 + rng.uniform_index(6);
    const Vector v = gaussian_vector(dim, rng);
    const Vector s = gaussian_vector(dim, rng);
    const auto [value, g] = mse_baseline(v, s);
    const auto fn = [&](std::span<const double> p) {
      return mse_baseline(Vector(p.begin(), p.end()), s).first;
    };
    return finite_diff_check(fn, v, g, kFdStep, 1e-6);
  });
}

// Full two-projector training graph (L_S + L_US + L_C) with a fixed
// transformation M; gradients flow through both projectors, the centers and
// the generator's row normalization.
inline VerifyCheck check_grad_graph(std::size_t instances, std::uint64_t seed) {
  using namespace verify_detail;
  return grad_check_loop("grad: full training graph", instances, seed, 25, [](Rng& rng) {
    ModelConfig mc;
    mc.loss_mode = LossMode::aurl;
    mc.raw_dim = 5;
    mc.word_dim = 4;
    mc.embed_dim = 3;
    mc.hidden_dim = 6;
    mc.word_front_dim = 4;
    mc.lambda_temp = 10.0;
    const std::size_t k = 3, batch = 4, ku = 4;

    Model model = init_model(mc, k, rng);
    Matrix x(batch, mc.raw_dim);
    for (std::size_t i = 0; i < batch; ++i) x.set_row(i, gaussian_vector(mc.raw_dim, rng));
    std::vector<std::size_t> pos(batch);
    for (auto& p : pos) p = rng.uniform_index(k);
    Matrix vocab(k, mc.word_dim);
    for (std::size_t i = 0; i < k; ++i) vocab.set_row(i, gaussian_vector(mc.word_dim, rng));
    const Matrix m = sample_uniform_matrix(ku, k, -0.5, rng);
    const GeneratorConfig gen{static_cast<long long>(ku), 0, -0.5, true};

    Model work = model;
    StepResult res = loss_graph_step(work, x, pos, vocab, gen, nullptr, &m, true);
    std::vector<double> analytic;
    for (auto& g : grad_tensors(res.g_fv, work.fv)) analytic.insert(analytic.end(), g.data.begin(), g.data.end());
    for (auto& g : grad_tensors(*res.g_fs, *work.fs)) analytic.insert(analytic.end(), g.data.begin(), g.data.end());
    analytic.insert(analytic.end(), res.d_w.a.begin(), res.d_w.a.end());

    const auto fn = [&](std::span<const double> p) {
      Model probe = model;
      unflatten_model_params(probe, p);
      return loss_graph_step(probe, x, pos, vocab, gen, nullptr, &m, false).total();
    };
    return finite_diff_check(fn, flatten_model_params(model), analytic, kFdStep, kFdTol);
  });
}

inline VerifyReport run_verify(std::size_t n_samples, std::size_t grad_instances, std::size_t graph_instances,
                               std::uint64_t seed) {
  VerifyReport report;
  report.checks.push_back(check_decomposition(n_samples, seed));
  report.checks.push_back(check_bounds_sweep(n_samples, seed));
  report.checks.push_back(check_k2_tightness(std::max<std::size_t>(1, n_samples / 10), seed));
  report.checks.push_back(check_regime());
  report.checks.push_back(check_grad_sup(grad_instances, seed));
  report.checks.push_back(check_grad_self(grad_instances, seed));
  report.checks.push_back(check_grad_classification(grad_instances, seed));
  report.checks.push_back(check_grad_unseen(grad_instances, seed));
  report.checks.push_back(check_grad_mse(grad_instances, seed));
  report.checks.push_back(check_grad_graph(graph_instances, seed));
  return report;
}

}  // namespace aurl
