#pragma once

// Command implementations behind the single `aurl` executable. Each command
// is a thin adapter over the library; configuration comes from a key=value
// file plus overrides (overrides win), and every run echoes its effective
// configuration first so a run can be reproduced bit-exactly from its log.
//
// Exit codes: 0 success, 1 validation failure, 2 I/O error.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "aurl/checkpoint.hpp"
#include "aurl/classgen.hpp"
#include "aurl/core.hpp"
#include "aurl/dataio.hpp"
#include "aurl/metrics.hpp"
#include "aurl/model.hpp"
#include "aurl/trainer.hpp"
#include "aurl/verify.hpp"
#include "aurl/zeroshot.hpp"

namespace aurl {

using KvMap = std::map<std::string, std::string>;

// ---------------------------------------------------------------------------
// key = value configuration
// ---------------------------------------------------------------------------

namespace cli_detail {

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

inline const std::vector<std::string>& known_keys() {
  static const std::vector<std::string> keys = {
      "train.batch_size",  "train.base_lr",       "train.momentum",   "train.weight_decay",
      "train.total_iters", "train.lambda_temp",   "train.seed",       "train.loss_mode",
      "train.embed_dim",   "train.hidden_dim",    "train.word_front_dim", "train.eval_interval",
      "train.probe_limit", "generator.k_u",       "generator.d",      "generator.alpha",
      "generator.resample_each_step", "filter.tau", "data.features",  "data.vocab",
  };
  return keys;
}

inline long long to_int(const std::string& key, const std::string& v) {
  try {
    std::size_t used = 0;
    const long long x = std::stoll(v, &used);
    if (used != v.size()) throw std::invalid_argument(v);
    return x;
  } catch (const std::exception&) {
    raise(errc::bad_config, key + ": expected integer, got '" + v + "'");
  }
}

inline std::uint64_t to_u64(const std::string& key, const std::string& v) {
  try {
    std::size_t used = 0;
    const std::uint64_t x = std::stoull(v, &used);
    if (used != v.size()) throw std::invalid_argument(v);
    return x;
  } catch (const std::exception&) {
    raise(errc::bad_config, key + ": expected unsigned integer, got '" + v + "'");
  }
}

inline double to_double(const std::string& key, const std::string& v) {
  try {
    return parse_double(v);
  } catch (const error&) {
    raise(errc::bad_config, key + ": expected number, got '" + v + "'");
  }
}

inline bool to_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  raise(errc::bad_config, key + ": expected true/false, got '" + v + "'");
}

}  // namespace cli_detail

inline KvMap parse_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) raise(errc::io_failure, "cannot open config: " + path);
  KvMap kv;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = cli_detail::trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      raise(errc::bad_config, path + ":" + std::to_string(line_no) + ": expected key = value");
    const std::string key = cli_detail::trim(line.substr(0, eq));
    const std::string value = cli_detail::trim(line.substr(eq + 1));
    if (key.empty()) raise(errc::bad_config, path + ":" + std::to_string(line_no) + ": empty key");
    kv[key] = value;
  }
  return kv;
}

inline void apply_override(KvMap& kv, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos) raise(errc::bad_config, "override must be key=value: " + assignment);
  kv[cli_detail::trim(assignment.substr(0, eq))] = cli_detail::trim(assignment.substr(eq + 1));
}

struct CliConfig {
  TrainConfig train;
  FilterConfig filter;
  std::string data_features;
  std::string data_vocab;
};

// Strict: unknown keys are an error.
inline CliConfig build_cli_config(const KvMap& kv) {
  using namespace cli_detail;
  for (const auto& [key, value] : kv) {
    bool known = false;
    for (const auto& k : known_keys())
      if (k == key) {
        known = true;
        break;
      }
    if (!known) raise(errc::bad_config, "unknown configuration key: " + key);
  }

  CliConfig cc;
  auto get = [&](const char* key) -> std::optional<std::string> {
    const auto it = kv.find(key);
    if (it == kv.end()) return std::nullopt;
    return it->second;
  };

  if (auto v = get("train.batch_size")) cc.train.batch_size = to_int("train.batch_size", *v);
  if (auto v = get("train.base_lr")) cc.train.base_lr = to_double("train.base_lr", *v);
  if (auto v = get("train.momentum")) cc.train.momentum = to_double("train.momentum", *v);
  if (auto v = get("train.weight_decay")) cc.train.weight_decay = to_double("train.weight_decay", *v);
  if (auto v = get("train.total_iters")) cc.train.total_iters = to_int("train.total_iters", *v);
  if (auto v = get("train.lambda_temp")) cc.train.lambda_temp = to_double("train.lambda_temp", *v);
  if (auto v = get("train.seed")) cc.train.seed = to_u64("train.seed", *v);
  if (auto v = get("train.loss_mode")) cc.train.loss_mode = parse_loss_mode(*v);
  if (auto v = get("train.embed_dim")) cc.train.embed_dim = static_cast<std::size_t>(to_int("train.embed_dim", *v));
  if (auto v = get("train.hidden_dim"))
    cc.train.hidden_dim = static_cast<std::size_t>(to_int("train.hidden_dim", *v));
  if (auto v = get("train.word_front_dim"))
    cc.train.word_front_dim = static_cast<std::size_t>(to_int("train.word_front_dim", *v));
  if (auto v = get("train.eval_interval")) cc.train.eval_interval = to_int("train.eval_interval", *v);
  if (auto v = get("train.probe_limit")) cc.train.probe_limit = to_int("train.probe_limit", *v);
  if (auto v = get("generator.k_u")) cc.train.generator.k_u = to_int("generator.k_u", *v);
  if (auto v = get("generator.d")) cc.train.generator.d_classes = to_int("generator.d", *v);
  if (auto v = get("generator.alpha")) cc.train.generator.alpha = to_double("generator.alpha", *v);
  if (auto v = get("generator.resample_each_step"))
    cc.train.generator.resample_each_step = to_bool("generator.resample_each_step", *v);
  if (auto v = get("filter.tau")) cc.filter.tau = to_double("filter.tau", *v);
  if (auto v = get("data.features")) cc.data_features = *v;
  if (auto v = get("data.vocab")) cc.data_vocab = *v;
  return cc;
}

// The fully resolved configuration, defaults included.
inline KvMap effective_config(const CliConfig& cc) {
  KvMap kv;
  kv["train.batch_size"] = std::to_string(cc.train.batch_size);
  kv["train.base_lr"] = format_double(cc.train.base_lr);
  kv["train.momentum"] = format_double(cc.train.momentum);
  kv["train.weight_decay"] = format_double(cc.train.weight_decay);
  kv["train.total_iters"] = std::to_string(cc.train.total_iters);
  kv["train.lambda_temp"] = format_double(cc.train.lambda_temp);
  kv["train.seed"] = std::to_string(cc.train.seed);
  kv["train.loss_mode"] = loss_mode_name(cc.train.loss_mode);
  kv["train.embed_dim"] = std::to_string(cc.train.embed_dim);
  kv["train.hidden_dim"] = std::to_string(cc.train.hidden_dim);
  kv["train.word_front_dim"] = std::to_string(cc.train.word_front_dim);
  kv["train.eval_interval"] = std::to_string(cc.train.eval_interval);
  kv["train.probe_limit"] = std::to_string(cc.train.probe_limit);
  kv["generator.k_u"] = std::to_string(cc.train.generator.k_u);
  kv["generator.d"] = std::to_string(cc.train.generator.d_classes);
  kv["generator.alpha"] = format_double(cc.train.generator.alpha);
  kv["generator.resample_each_step"] = cc.train.generator.resample_each_step ? "true" : "false";
  kv["filter.tau"] = format_double(cc.filter.tau);
  kv["data.features"] = cc.data_features;
  kv["data.vocab"] = cc.data_vocab;
  return kv;
}

// ---------------------------------------------------------------------------
// Command option structs + implementations
// ---------------------------------------------------------------------------

namespace cli_detail {

inline int exit_code_for(const error& e) { return is_io_error(e.code()) ? 2 : 1; }

template <class Fn>
int guarded(Fn&& fn) {
  try {
    return fn();
  } catch (const error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return exit_code_for(e);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
}

inline nlohmann::json record_for(const TrainLogRecord& rec) {
  nlohmann::json j;
  j["record"] = "train";
  j["iter"] = rec.iter;
  j["lr"] = rec.lr;
  j["loss_S"] = rec.loss_s;
  j["loss_US"] = rec.loss_us;
  j["loss_C"] = rec.loss_c;
  j["loss_total"] = rec.loss_total;
  if (rec.closeness) j["closeness"] = *rec.closeness;
  if (rec.dispersion) j["dispersion"] = *rec.dispersion;
  return j;
}

inline nlohmann::json report_json(const DiagnosticsReport& r) {
  nlohmann::json j;
  j["closeness"] = r.closeness;
  j["dispersion"] = r.dispersion;
  j["top1"] = r.top1;
  j["top5"] = r.top5;
  nlohmann::json per;
  for (const auto& [cid, acc] : r.per_class_accuracy) per[std::to_string(cid)] = acc;
  j["per_class_accuracy"] = per;
  return j;
}

}  // namespace cli_detail

struct SynthOpts {
  std::string out_dir;
  SynthBenchConfig cfg;
};

inline int cmd_synth(const SynthOpts& opts) {
  return cli_detail::guarded([&] {
    std::filesystem::create_directories(opts.out_dir);
    Rng rng(opts.cfg.seed);
    const SynthBenchmark bench = synth_benchmark(opts.cfg, rng);
    const auto dir = std::filesystem::path(opts.out_dir);
    write_features(bench.train_features, (dir / "train.fvec").string());
    write_vocab(bench.train_vocab, (dir / "train.cvoc").string());
    write_features(bench.test_features, (dir / "test.fvec").string());
    write_vocab(bench.test_vocab, (dir / "test.cvoc").string());

    nlohmann::json j;
    j["record"] = "synth";
    j["seed"] = opts.cfg.seed;
    j["d_raw"] = opts.cfg.d_raw;
    j["word_dim"] = opts.cfg.word_dim;
    j["seen_classes"] = opts.cfg.n_seen_classes;
    j["unseen_classes"] = opts.cfg.n_unseen_classes;
    j["samples_per_class"] = opts.cfg.samples_per_class;
    j["cluster_spread"] = opts.cfg.cluster_spread;
    j["out"] = opts.out_dir;
    std::cout << j.dump() << '\n';
    return 0;
  });
}

struct TrainOpts {
  std::string config_path;                // optional key=value file
  std::vector<std::string> overrides;     // repeated key=value
  std::optional<std::string> loss_mode;   // sugar for train.loss_mode
  std::optional<std::uint64_t> seed;      // sugar for train.seed
  std::optional<long long> iters;         // sugar for train.total_iters
  std::optional<std::string> features;    // sugar for data.features
  std::optional<std::string> vocab;       // sugar for data.vocab
  std::string out_dir;
  bool quiet = false;                     // suppress stdout mirroring
};

inline int cmd_train(const TrainOpts& opts) {
  return cli_detail::guarded([&] {
    KvMap kv;
    if (!opts.config_path.empty()) kv = parse_config_file(opts.config_path);
    for (const auto& s : opts.overrides) apply_override(kv, s);
    if (opts.loss_mode) kv["train.loss_mode"] = *opts.loss_mode;
    if (opts.seed) kv["train.seed"] = std::to_string(*opts.seed);
    if (opts.iters) kv["train.total_iters"] = std::to_string(*opts.iters);
    if (opts.features) kv["data.features"] = *opts.features;
    if (opts.vocab) kv["data.vocab"] = *opts.vocab;
    const CliConfig cc = build_cli_config(kv);
    if (cc.data_features.empty() || cc.data_vocab.empty())
      raise(errc::bad_config, "data.features and data.vocab are required");
    if (opts.out_dir.empty()) raise(errc::bad_config, "--out directory is required");

    std::filesystem::create_directories(opts.out_dir);
    const auto log_path = std::filesystem::path(opts.out_dir) / "log.jsonl";
    std::ofstream log(log_path);
    if (!log) raise(errc::io_failure, "cannot open log: " + log_path.string());

    auto emit = [&](const nlohmann::json& j) {
      const std::string line = j.dump();
      log << line << '\n';
      if (!opts.quiet) std::cout << line << '\n';
    };

    nlohmann::json head;
    head["record"] = "effective-config";
    head["config"] = effective_config(cc);
    emit(head);

    const FeatureSet data = read_features(cc.data_features);
    const ClassVocabulary vocab = read_vocab(cc.data_vocab);

    TrainerState st = init_training(cc.train, data, vocab);
    for (const auto& w : st.warnings) {
      nlohmann::json j;
      j["record"] = "warning";
      j["message"] = w;
      emit(j);
    }
    train_steps(st, data, vocab, cc.train.total_iters,
                [&](const TrainLogRecord& rec) { emit(cli_detail::record_for(rec)); });

    const auto ckpt_path = std::filesystem::path(opts.out_dir) / "checkpoint.txt";
    save_checkpoint(st, ckpt_path.string());
    nlohmann::json done;
    done["record"] = "done";
    done["checkpoint"] = ckpt_path.string();
    done["iters"] = st.iter;
    emit(done);
    if (!log) raise(errc::io_failure, "log write failed");
    return 0;
  });
}

struct EvalOpts {
  std::string checkpoint;
  std::string features;
  std::string vocab;
  long long clips = 1;
  std::optional<double> tau;           // with train_vocab: enforce disjointness
  std::string train_vocab;
  long long splits = 1;                // N-test-splits convenience
  long long split_classes = 0;         // classes per split (0 = all)
  std::uint64_t split_seed = 0;
  std::string out_path;                // optional JSON output file
};

inline int cmd_eval(const EvalOpts& opts) {
  return cli_detail::guarded([&] {
    TrainerState st = load_checkpoint(opts.checkpoint);
    EvaluationSet eval_set{read_features(opts.features), read_vocab(opts.vocab)};
    if (eval_set.vocab.entries.empty()) raise(errc::empty_vocab, "test vocabulary is empty");

    if (opts.tau) {
      if (opts.train_vocab.empty())
        raise(errc::bad_config, "--tau requires --train-vocab to check disjointness against");
      const ClassVocabulary tv = read_vocab(opts.train_vocab);
      const FilterResult fr = filter_train_classes(tv, eval_set.vocab, FilterConfig{*opts.tau});
      if (!fr.excluded.empty()) {
        for (const auto& ex : fr.excluded)
          std::cerr << "overlap: train class " << ex.train_id << " within " << format_double(ex.distance)
                    << " of test class " << ex.nearest_test_id << '\n';
        raise(errc::label_out_of_vocab, "train/test vocabularies overlap at tau=" + format_double(*opts.tau));
      }
    }

    nlohmann::json out;
    if (opts.splits <= 1) {
      out = cli_detail::report_json(evaluate(st.model, eval_set, opts.clips));
    } else {
      // Seeded class subsampling, mean over splits.
      Rng rng(opts.split_seed);
      const auto all = eval_set.vocab.entries;
      const std::size_t per =
          opts.split_classes > 0 ? std::min<std::size_t>(opts.split_classes, all.size()) : all.size();
      nlohmann::json splits = nlohmann::json::array();
      double mean_top1 = 0.0, mean_top5 = 0.0;
      for (long long s = 0; s < opts.splits; ++s) {
        std::vector<std::size_t> idx(all.size());
        for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
        for (std::size_t i = 0; i < per; ++i) std::swap(idx[i], idx[i + rng.uniform_index(idx.size() - i)]);
        idx.resize(per);
        std::sort(idx.begin(), idx.end());
        EvaluationSet sub;
        sub.vocab.dim = eval_set.vocab.dim;
        std::set<int> keep;
        for (const auto i : idx) {
          sub.vocab.entries.push_back(all[i]);
          keep.insert(all[i].class_id);
        }
        sub.features.dim = eval_set.features.dim;
        std::vector<std::size_t> rows;
        for (std::size_t r = 0; r < eval_set.features.count(); ++r)
          if (keep.count(eval_set.features.class_ids[r])) rows.push_back(r);
        sub.features.features = Matrix(rows.size(), eval_set.features.dim);
        for (std::size_t r = 0; r < rows.size(); ++r) {
          sub.features.features.set_row(r, eval_set.features.features.row(rows[r]));
          sub.features.class_ids.push_back(eval_set.features.class_ids[rows[r]]);
          sub.features.group_ids.push_back(eval_set.features.group_ids[rows[r]]);
        }
        const DiagnosticsReport rep = evaluate(st.model, sub, opts.clips);
        mean_top1 += rep.top1 / static_cast<double>(opts.splits);
        mean_top5 += rep.top5 / static_cast<double>(opts.splits);
        splits.push_back(cli_detail::report_json(rep));
      }
      out["splits"] = splits;
      out["mean_top1"] = mean_top1;
      out["mean_top5"] = mean_top5;
    }
    const std::string text = out.dump();
    std::cout << text << '\n';
    if (!opts.out_path.empty()) {
      std::ofstream f(opts.out_path);
      if (!f) raise(errc::io_failure, "cannot open: " + opts.out_path);
      f << text << '\n';
    }
    return 0;
  });
}

struct DiagnoseOpts {
  std::string checkpoint;
  std::string features;
  std::string vocab;
};

inline int cmd_diagnose(const DiagnoseOpts& opts) {
  return cli_detail::guarded([&] {
    TrainerState st = load_checkpoint(opts.checkpoint);
    const FeatureSet fs = read_features(opts.features);
    const ClassVocabulary vocab = read_vocab(opts.vocab);
    if (fs.count() == 0) raise(errc::empty_data, "no samples");
    const Matrix v = project_visual_eval(st.model, fs.features);
    const Matrix s = project_semantic_eval(st.model, vocab.embedding_matrix());
    nlohmann::json j;
    j["closeness"] = closeness(v, fs.class_ids, s, vocab.class_ids());
    j["dispersion"] = dispersion(v, fs.class_ids);
    std::cout << j.dump() << '\n';
    return 0;
  });
}

struct VerifyOpts {
  std::size_t samples = 1000;
  std::size_t grad_instances = 20;
  std::size_t graph_instances = 3;
  std::uint64_t seed = 0;
};

inline int cmd_verify(const VerifyOpts& opts) {
  return cli_detail::guarded([&] {
    const VerifyReport report = run_verify(opts.samples, opts.grad_instances, opts.graph_instances, opts.seed);
    for (const auto& c : report.checks)
      std::cout << (c.pass ? "PASS" : "FAIL") << "  " << c.name << "  (" << c.detail << ")\n";
    return report.all_pass() ? 0 : 1;
  });
}

struct GenClassesOpts {
  std::string checkpoint;
  std::string vocab;
  double alpha = 0.0;
  long long k_u = 662;
  std::uint64_t seed = 0;
  std::string out_dir;
};

inline int cmd_gen_classes(const GenClassesOpts& opts) {
  return cli_detail::guarded([&] {
    TrainerState st = load_checkpoint(opts.checkpoint);
    const ClassVocabulary vocab = read_vocab(opts.vocab);
    if (vocab.entries.size() != st.model.w_centers.rows)
      raise(errc::dim_mismatch, "vocabulary size does not match checkpoint centers");
    const Matrix sem = project_semantic_eval(st.model, vocab.embedding_matrix());

    GeneratorConfig gen;
    gen.k_u = opts.k_u;
    gen.d_classes = 0;  // all seen classes
    gen.alpha = opts.alpha;
    Rng rng(opts.seed);
    const SyntheticClassBank bank = synthesize(st.model.w_centers, sem, gen, rng);

    std::filesystem::create_directories(opts.out_dir);
    const auto dir = std::filesystem::path(opts.out_dir);
    auto dump = [&](const Matrix& m, const std::string& name) {
      FeatureSet fs;
      fs.dim = m.cols;
      fs.features = m;
      for (std::size_t i = 0; i < m.rows; ++i) {
        fs.class_ids.push_back(static_cast<int>(i));
        fs.group_ids.push_back(static_cast<long long>(i));
      }
      write_features(fs, (dir / name).string());
    };
    dump(bank.theta, "theta.fvec");
    dump(bank.z, "z.fvec");
    dump(bank.m, "m.fvec");

    // Coverage of random unit probes by the synthetic visual centers.
    Rng probe_rng = Rng::stream(opts.seed, 2);
    Matrix probes(1000, bank.theta.cols);
    for (std::size_t i = 0; i < probes.rows; ++i) probes.set_row(i, normalize(gaussian_vector(probes.cols, probe_rng)));

    nlohmann::json j;
    j["record"] = "gen-classes";
    j["k_u"] = opts.k_u;
    j["alpha"] = opts.alpha;
    j["seed"] = opts.seed;
    j["coverage_mean_nn_distance"] = coverage_stats(bank.theta, probes);
    j["out"] = opts.out_dir;
    std::cout << j.dump() << '\n';
    return 0;
  });
}

struct FilterOpts {
  std::string train_vocab;
  std::string test_vocab;
  double tau = 0.05;
};

inline int cmd_filter(const FilterOpts& opts) {
  return cli_detail::guarded([&] {
    const ClassVocabulary train = read_vocab(opts.train_vocab);
    const ClassVocabulary test = read_vocab(opts.test_vocab);
    const FilterResult fr = filter_train_classes(train, test, FilterConfig{opts.tau});
    for (const auto& ex : fr.excluded)
      std::cerr << "excluded: train class " << ex.train_id << " (distance " << format_double(ex.distance)
                << " to test class " << ex.nearest_test_id << ")\n";
    for (const int id : fr.retained) std::cout << id << '\n';
    return 0;
  });
}

struct ExportPlotOpts {
  std::string checkpoint;
  std::string features;
  std::string vocab;
  std::string out_path;
};

inline int cmd_export_plot(const ExportPlotOpts& opts) {
  return cli_detail::guarded([&] {
    TrainerState st = load_checkpoint(opts.checkpoint);
    const FeatureSet fs = read_features(opts.features);
    const ClassVocabulary vocab = read_vocab(opts.vocab);
    const Matrix v = project_visual_eval(st.model, fs.features);
    const Matrix s = project_semantic_eval(st.model, vocab.embedding_matrix());
    export_projection(v, fs.class_ids, s, vocab.class_ids(), opts.out_path);
    nlohmann::json j;
    j["record"] = "export-plot";
    j["rows"] = v.rows + s.rows;
    j["out"] = opts.out_path;
    std::cout << j.dump() << '\n';
    return 0;
  });
}

}  // namespace aurl
