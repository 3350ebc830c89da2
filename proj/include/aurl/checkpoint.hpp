#pragma once

// Versioned text checkpoints. Everything needed to continue a run bit-exactly
// is stored: config, projector parameters and batchnorm running statistics,
// visual centers, optimizer velocities, RNG state and the iteration counter.
// Doubles are printed at 17 significant digits, so save/load round-trips are
// exact.

#include <fstream>
#include <sstream>
#include <string>

#include "aurl/core.hpp"
#include "aurl/model.hpp"
#include "aurl/trainer.hpp"

namespace aurl {

constexpr const char* kCheckpointMagic = "aurlckpt";
constexpr int kCheckpointVersion = 1;

namespace detail {

class TokenReader {
 public:
  explicit TokenReader(std::istream& in) : in_(in) {}

  std::string next() {
    std::string tok;
    if (!(in_ >> tok)) raise(errc::corrupt_file, "unexpected end of checkpoint");
    return tok;
  }
  void expect(const std::string& want) {
    const std::string got = next();
    if (got != want) raise(errc::corrupt_file, "expected '" + want + "', found '" + got + "'");
  }
  long long next_int() {
    const std::string tok = next();
    try {
      std::size_t used = 0;
      const long long v = std::stoll(tok, &used);
      if (used != tok.size()) throw std::invalid_argument(tok);
      return v;
    } catch (const std::exception&) {
      raise(errc::corrupt_file, "expected integer, found '" + tok + "'");
    }
  }
  std::uint64_t next_u64() {
    const std::string tok = next();
    try {
      std::size_t used = 0;
      const std::uint64_t v = std::stoull(tok, &used);
      if (used != tok.size()) throw std::invalid_argument(tok);
      return v;
    } catch (const std::exception&) {
      raise(errc::corrupt_file, "expected unsigned integer, found '" + tok + "'");
    }
  }
  double next_double() {
    const std::string tok = next();
    try {
      return parse_double(tok);
    } catch (const error&) {
      raise(errc::corrupt_file, "expected number, found '" + tok + "'");
    }
  }
  void read_doubles(std::span<double> out) {
    for (double& x : out) x = next_double();
  }

 private:
  std::istream& in_;
};

inline void write_doubles(std::ostream& out, std::span<const double> xs) {
  for (std::size_t i = 0; i < xs.size(); ++i) {
    if (i) out << ' ';
    out << format_double(xs[i]);
  }
  out << '\n';
}

inline void write_projector(std::ostream& out, const Projector& p) {
  out << "projector " << p.spec.size() << '\n';
  std::size_t li = 0, bi = 0;
  for (const auto& l : p.spec) {
    switch (l.kind) {
      case LayerKind::linear: {
        const auto& lp = p.linears[li++];
        out << "layer linear " << l.in_dim << ' ' << l.out_dim << '\n';
        write_doubles(out, lp.w.a);
        write_doubles(out, lp.b);
        break;
      }
      case LayerKind::batchnorm: {
        const auto& bp = p.bns[bi++];
        out << "layer batchnorm " << l.in_dim << ' ' << format_double(bp.eps) << ' '
            << format_double(bp.momentum) << '\n';
        write_doubles(out, bp.gamma);
        write_doubles(out, bp.beta);
        write_doubles(out, bp.running_mean);
        write_doubles(out, bp.running_var);
        break;
      }
      case LayerKind::relu:
        out << "layer relu " << l.in_dim << '\n';
        break;
    }
  }
}

inline Projector read_projector_body(TokenReader& r, std::size_t n_layers) {
  Projector p;
  for (std::size_t i = 0; i < n_layers; ++i) {
    r.expect("layer");
    const std::string kind = r.next();
    if (kind == "linear") {
      const auto in = static_cast<std::size_t>(r.next_int());
      const auto out_dim = static_cast<std::size_t>(r.next_int());
      p.spec.push_back({LayerKind::linear, in, out_dim});
      LinearParams lp{Matrix(out_dim, in), Vector(out_dim)};
      r.read_doubles(lp.w.a);
      r.read_doubles(lp.b);
      p.linears.push_back(std::move(lp));
    } else if (kind == "batchnorm") {
      const auto dim = static_cast<std::size_t>(r.next_int());
      p.spec.push_back({LayerKind::batchnorm, dim, dim});
      BatchNormParams bp;
      bp.eps = r.next_double();
      bp.momentum = r.next_double();
      bp.gamma.resize(dim);
      bp.beta.resize(dim);
      bp.running_mean.resize(dim);
      bp.running_var.resize(dim);
      r.read_doubles(bp.gamma);
      r.read_doubles(bp.beta);
      r.read_doubles(bp.running_mean);
      r.read_doubles(bp.running_var);
      p.bns.push_back(std::move(bp));
    } else if (kind == "relu") {
      const auto dim = static_cast<std::size_t>(r.next_int());
      p.spec.push_back({LayerKind::relu, dim, dim});
    } else {
      raise(errc::corrupt_file, "unknown layer kind '" + kind + "'");
    }
  }
  validate_spec(p.spec);
  return p;
}

inline Projector read_projector(TokenReader& r) {
  r.expect("projector");
  const auto n_layers = static_cast<std::size_t>(r.next_int());
  return read_projector_body(r, n_layers);
}

}  // namespace detail

inline void save_checkpoint(TrainerState& st, const std::string& path) {
  std::ofstream out(path);
  if (!out) raise(errc::io_failure, "cannot open for writing: " + path);
  const TrainConfig& cfg = st.cfg;

  out << kCheckpointMagic << ' ' << kCheckpointVersion << '\n';
  out << "mode " << loss_mode_name(cfg.loss_mode) << '\n';
  out << "cfg.batch_size " << cfg.batch_size << '\n';
  out << "cfg.base_lr " << format_double(cfg.base_lr) << '\n';
  out << "cfg.momentum " << format_double(cfg.momentum) << '\n';
  out << "cfg.weight_decay " << format_double(cfg.weight_decay) << '\n';
  out << "cfg.total_iters " << cfg.total_iters << '\n';
  out << "cfg.lambda_temp " << format_double(cfg.lambda_temp) << '\n';
  out << "cfg.seed " << cfg.seed << '\n';
  out << "cfg.embed_dim " << cfg.embed_dim << '\n';
  out << "cfg.hidden_dim " << cfg.hidden_dim << '\n';
  out << "cfg.word_front_dim " << cfg.word_front_dim << '\n';
  out << "cfg.eval_interval " << cfg.eval_interval << '\n';
  out << "cfg.probe_limit " << cfg.probe_limit << '\n';
  out << "gen.k_u " << cfg.generator.k_u << '\n';
  out << "gen.d_classes " << cfg.generator.d_classes << '\n';
  out << "gen.alpha " << format_double(cfg.generator.alpha) << '\n';
  out << "gen.resample_each_step " << (cfg.generator.resample_each_step ? 1 : 0) << '\n';
  out << "model.raw_dim " << st.model.cfg.raw_dim << '\n';
  out << "model.word_dim " << st.model.cfg.word_dim << '\n';
  out << "iter " << st.iter << '\n';
  const auto rs = st.rng.state();
  out << "rng " << rs[0] << ' ' << rs[1] << ' ' << rs[2] << ' ' << rs[3] << '\n';

  out << "fv ";
  detail::write_projector(out, st.model.fv);
  if (st.model.fs) {
    out << "fs ";
    detail::write_projector(out, *st.model.fs);
  } else {
    out << "fs none\n";
  }
  out << "w_centers " << st.model.w_centers.rows << ' ' << st.model.w_centers.cols << '\n';
  detail::write_doubles(out, st.model.w_centers.a);

  out << "velocity " << st.velocity.size() << '\n';
  for (const auto& v : st.velocity) {
    out << v.size() << '\n';
    detail::write_doubles(out, v);
  }

  if (st.fixed_m) {
    out << "fixed_m " << st.fixed_m->rows << ' ' << st.fixed_m->cols << '\n';
    detail::write_doubles(out, st.fixed_m->a);
  } else {
    out << "fixed_m none\n";
  }
  out << "end\n";
  if (!out) raise(errc::io_failure, "write failed: " + path);
}

inline TrainerState load_checkpoint(const std::string& path) {
  std::ifstream in(path);
  if (!in) raise(errc::io_failure, "cannot open: " + path);
  detail::TokenReader r(in);

  if (r.next() != kCheckpointMagic) raise(errc::corrupt_file, "not a checkpoint file: " + path);
  const long long version = r.next_int();
  if (version != kCheckpointVersion)
    raise(errc::version_mismatch, "checkpoint version " + std::to_string(version) + ", expected " +
                                      std::to_string(kCheckpointVersion));

  TrainerState st;
  TrainConfig& cfg = st.cfg;
  r.expect("mode");
  cfg.loss_mode = parse_loss_mode(r.next());
  r.expect("cfg.batch_size");
  cfg.batch_size = r.next_int();
  r.expect("cfg.base_lr");
  cfg.base_lr = r.next_double();
  r.expect("cfg.momentum");
  cfg.momentum = r.next_double();
  r.expect("cfg.weight_decay");
  cfg.weight_decay = r.next_double();
  r.expect("cfg.total_iters");
  cfg.total_iters = r.next_int();
  r.expect("cfg.lambda_temp");
  cfg.lambda_temp = r.next_double();
  r.expect("cfg.seed");
  cfg.seed = r.next_u64();
  r.expect("cfg.embed_dim");
  cfg.embed_dim = static_cast<std::size_t>(r.next_int());
  r.expect("cfg.hidden_dim");
  cfg.hidden_dim = static_cast<std::size_t>(r.next_int());
  r.expect("cfg.word_front_dim");
  cfg.word_front_dim = static_cast<std::size_t>(r.next_int());
  r.expect("cfg.eval_interval");
  cfg.eval_interval = r.next_int();
  r.expect("cfg.probe_limit");
  cfg.probe_limit = r.next_int();
  r.expect("gen.k_u");
  cfg.generator.k_u = r.next_int();
  r.expect("gen.d_classes");
  cfg.generator.d_classes = r.next_int();
  r.expect("gen.alpha");
  cfg.generator.alpha = r.next_double();
  r.expect("gen.resample_each_step");
  cfg.generator.resample_each_step = r.next_int() != 0;

  ModelConfig mc;
  mc.loss_mode = cfg.loss_mode;
  r.expect("model.raw_dim");
  mc.raw_dim = static_cast<std::size_t>(r.next_int());
  r.expect("model.word_dim");
  mc.word_dim = static_cast<std::size_t>(r.next_int());
  mc.embed_dim = cfg.embed_dim;
  mc.hidden_dim = cfg.hidden_dim;
  mc.word_front_dim = cfg.word_front_dim;
  mc.lambda_temp = cfg.lambda_temp;
  st.model.cfg = mc;

  r.expect("iter");
  st.iter = r.next_int();
  r.expect("rng");
  std::array<std::uint64_t, 4> rs{};
  for (auto& w : rs) w = r.next_u64();
  st.rng.set_state(rs);

  r.expect("fv");
  st.model.fv = detail::read_projector(r);
  r.expect("fs");
  {
    const std::string tok = r.next();
    if (tok == "none") {
      st.model.fs.reset();
    } else if (tok == "projector") {
      st.model.fs = detail::read_projector_body(r, static_cast<std::size_t>(r.next_int()));
    } else {
      raise(errc::corrupt_file, "expected 'none' or 'projector', found '" + tok + "'");
    }
  }

  r.expect("w_centers");
  const auto wr = static_cast<std::size_t>(r.next_int());
  const auto wc = static_cast<std::size_t>(r.next_int());
  st.model.w_centers = Matrix(wr, wc);
  r.read_doubles(st.model.w_centers.a);

  r.expect("velocity");
  const auto n_vel = static_cast<std::size_t>(r.next_int());
  st.velocity.resize(n_vel);
  for (auto& v : st.velocity) {
    v.resize(static_cast<std::size_t>(r.next_int()));
    r.read_doubles(v);
  }

  r.expect("fixed_m");
  {
    const std::string tok = r.next();
    if (tok == "none") {
      st.fixed_m.reset();
    } else {
      const auto rows = static_cast<std::size_t>(std::stoll(tok));
      const auto cols = static_cast<std::size_t>(r.next_int());
      st.fixed_m = Matrix(rows, cols);
      r.read_doubles(st.fixed_m->a);
    }
  }
  r.expect("end");

  // Cross-check the tensor layout against the restored velocities.
  auto tensors = model_tensors(st.model);
  if (tensors.size() != st.velocity.size()) raise(errc::corrupt_file, "velocity count does not match model");
  for (std::size_t i = 0; i < tensors.size(); ++i)
    if (tensors[i].data.size() != st.velocity[i].size())
      raise(errc::corrupt_file, "velocity " + std::to_string(i) + " size does not match tensor");
  return st;
}

}  // namespace aurl
