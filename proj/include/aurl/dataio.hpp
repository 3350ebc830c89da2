#pragma once

// File formats and the synthetic benchmark.
//
//   fvec 1 <dim> <count>            feature sets; one row per line:
//   <class_id> <group_id> <v1> ... <vdim>
//
//   cvoc 1 <word_dim>               class vocabularies; tab-separated rows:
//   <class_id> \t <name> \t <numbers>
//   where <numbers> is either one prototype vector or one vector per word of
//   the name (averaged into the prototype).
//
// Floats are printed at 17 significant digits so read(write(x)) == x
// bit-exactly. Parsers reject malformed lines with their line number.

#include <cstdint>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "aurl/core.hpp"

namespace aurl {

struct FeatureSet {
  std::size_t dim = 0;
  std::vector<int> class_ids;
  std::vector<long long> group_ids;
  Matrix features;  // count x dim

  std::size_t count() const { return features.rows; }
};

struct VocabEntry {
  int class_id = 0;
  std::string name;
  Vector embedding;
};

struct ClassVocabulary {
  std::size_t dim = 0;
  std::vector<VocabEntry> entries;

  Matrix embedding_matrix() const {
    Matrix m(entries.size(), dim);
    for (std::size_t i = 0; i < entries.size(); ++i) m.set_row(i, entries[i].embedding);
    return m;
  }
  std::vector<int> class_ids() const {
    std::vector<int> ids;
    ids.reserve(entries.size());
    for (const auto& e : entries) ids.push_back(e.class_id);
    return ids;
  }
};

namespace detail {

inline std::vector<std::string> split_ws(const std::string& s) {
  std::vector<std::string> out;
  std::istringstream is(s);
  std::string tok;
  while (is >> tok) out.push_back(tok);
  return out;
}

inline long long parse_int(const std::string& s, std::size_t line_no) {
  try {
    std::size_t used = 0;
    const long long v = std::stoll(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    raise(errc::bad_row, "line " + std::to_string(line_no) + ": not an integer: '" + s + "'");
  }
}

inline double parse_num(const std::string& s, std::size_t line_no) {
  try {
    return parse_double(s);
  } catch (const error&) {
    raise(errc::bad_row, "line " + std::to_string(line_no) + ": not a number: '" + s + "'");
  }
}

}  // namespace detail

inline void write_features(const FeatureSet& fs, const std::string& path) {
  if (fs.features.cols != fs.dim || fs.class_ids.size() != fs.count() || fs.group_ids.size() != fs.count())
    raise(errc::dim_mismatch, "inconsistent feature set");
  std::ofstream out(path);
  if (!out) raise(errc::io_failure, "cannot open for writing: " + path);
  out << "fvec 1 " << fs.dim << ' ' << fs.count() << '\n';
  for (std::size_t i = 0; i < fs.count(); ++i) {
    out << fs.class_ids[i] << ' ' << fs.group_ids[i];
    for (std::size_t j = 0; j < fs.dim; ++j) out << ' ' << format_double(fs.features.at(i, j));
    out << '\n';
  }
  if (!out) raise(errc::io_failure, "write failed: " + path);
}

inline FeatureSet read_features(const std::string& path) {
  std::ifstream in(path);
  if (!in) raise(errc::io_failure, "cannot open: " + path);
  std::string line;
  if (!std::getline(in, line)) raise(errc::bad_header, "empty file: " + path);
  const auto head = detail::split_ws(line);
  if (head.size() != 4 || head[0] != "fvec" || head[1] != "1")
    raise(errc::bad_header, "expected 'fvec 1 <dim> <count>' in " + path);
  FeatureSet fs;
  fs.dim = static_cast<std::size_t>(detail::parse_int(head[2], 1));
  const auto count = static_cast<std::size_t>(detail::parse_int(head[3], 1));
  if (fs.dim == 0) raise(errc::bad_header, "zero dimension");
  fs.features = Matrix(count, fs.dim);
  fs.class_ids.reserve(count);
  fs.group_ids.reserve(count);

  std::size_t row = 0, line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    if (row >= count) raise(errc::bad_row, "line " + std::to_string(line_no) + ": more rows than header count");
    const auto toks = detail::split_ws(line);
    if (toks.size() != 2 + fs.dim)
      raise(errc::bad_row, "line " + std::to_string(line_no) + ": expected " + std::to_string(2 + fs.dim) +
                               " fields, got " + std::to_string(toks.size()));
    const long long cid = detail::parse_int(toks[0], line_no);
    if (cid < 0) raise(errc::bad_row, "line " + std::to_string(line_no) + ": negative class id");
    fs.class_ids.push_back(static_cast<int>(cid));
    fs.group_ids.push_back(detail::parse_int(toks[1], line_no));
    for (std::size_t j = 0; j < fs.dim; ++j) fs.features.at(row, j) = detail::parse_num(toks[2 + j], line_no);
    ++row;
  }
  if (row != count)
    raise(errc::bad_row, "header promises " + std::to_string(count) + " rows, file has " + std::to_string(row));
  return fs;
}

inline void write_vocab(const ClassVocabulary& vocab, const std::string& path) {
  std::ofstream out(path);
  if (!out) raise(errc::io_failure, "cannot open for writing: " + path);
  out << "cvoc 1 " << vocab.dim << '\n';
  for (const auto& e : vocab.entries) {
    if (e.embedding.size() != vocab.dim) raise(errc::dim_mismatch, "entry dim mismatch: " + e.name);
    if (e.name.find('\t') != std::string::npos || e.name.find('\n') != std::string::npos)
      raise(errc::bad_row, "class name contains tab/newline: " + e.name);
    out << e.class_id << '\t' << e.name << '\t';
    for (std::size_t j = 0; j < vocab.dim; ++j) {
      if (j) out << ' ';
      out << format_double(e.embedding[j]);
    }
    out << '\n';
  }
  if (!out) raise(errc::io_failure, "write failed: " + path);
}

// Rows may carry one prototype vector or one vector per whitespace-separated
// word of the class name; per-word vectors are averaged into the prototype.
inline ClassVocabulary read_vocab(const std::string& path) {
  std::ifstream in(path);
  if (!in) raise(errc::io_failure, "cannot open: " + path);
  std::string line;
  if (!std::getline(in, line)) raise(errc::bad_header, "empty file: " + path);
  const auto head = detail::split_ws(line);
  if (head.size() != 3 || head[0] != "cvoc" || head[1] != "1")
    raise(errc::bad_header, "expected 'cvoc 1 <word_dim>' in " + path);
  ClassVocabulary vocab;
  vocab.dim = static_cast<std::size_t>(detail::parse_int(head[2], 1));
  if (vocab.dim == 0) raise(errc::bad_header, "zero word dimension");

  std::set<int> seen_ids;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto t1 = line.find('\t');
    const auto t2 = t1 == std::string::npos ? std::string::npos : line.find('\t', t1 + 1);
    if (t2 == std::string::npos)
      raise(errc::bad_row, "line " + std::to_string(line_no) + ": expected 3 tab-separated fields");
    VocabEntry entry;
    entry.class_id = static_cast<int>(detail::parse_int(line.substr(0, t1), line_no));
    entry.name = line.substr(t1 + 1, t2 - t1 - 1);
    if (entry.name.empty()) raise(errc::bad_row, "line " + std::to_string(line_no) + ": empty class name");
    if (!seen_ids.insert(entry.class_id).second)
      raise(errc::duplicate_id, "line " + std::to_string(line_no) + ": class id " +
                                    std::to_string(entry.class_id) + " appears twice");

    const auto nums = detail::split_ws(line.substr(t2 + 1));
    const std::size_t n_words = detail::split_ws(entry.name).size();
    if (nums.size() == vocab.dim) {
      entry.embedding.resize(vocab.dim);
      for (std::size_t j = 0; j < vocab.dim; ++j) entry.embedding[j] = detail::parse_num(nums[j], line_no);
    } else if (n_words > 1 && nums.size() == n_words * vocab.dim) {
      entry.embedding.assign(vocab.dim, 0.0);
      for (std::size_t w = 0; w < n_words; ++w)
        for (std::size_t j = 0; j < vocab.dim; ++j)
          entry.embedding[j] += detail::parse_num(nums[w * vocab.dim + j], line_no);
      for (double& x : entry.embedding) x /= static_cast<double>(n_words);
    } else {
      raise(errc::dim_mismatch, "line " + std::to_string(line_no) + ": expected " + std::to_string(vocab.dim) +
                                    " or " + std::to_string(n_words * vocab.dim) + " numbers, got " +
                                    std::to_string(nums.size()));
    }
    vocab.entries.push_back(std::move(entry));
  }
  return vocab;
}

// ---------------------------------------------------------------------------
// Synthetic benchmark: a desk-scale stand-in for pre-extracted video features
// plus word embeddings, with train/test classes disjoint by construction.
// ---------------------------------------------------------------------------

struct SynthBenchConfig {
  std::size_t d_raw = 32;
  std::size_t n_seen_classes = 20;
  std::size_t n_unseen_classes = 8;
  std::size_t samples_per_class = 100;
  double cluster_spread = 0.5;  // expected norm of the pre-normalization perturbation
  std::size_t word_dim = 16;
  std::uint64_t seed = 1;
};

struct SynthBenchmark {
  FeatureSet train_features;
  ClassVocabulary train_vocab;
  FeatureSet test_features;
  ClassVocabulary test_vocab;
};

// Unit class directions (pairwise cosine < 0.95 by rejection); samples are
// normalize(direction + spread * noise); word embeddings are a fixed random
// linear image of the direction plus 5% noise, so semantic similarity tracks
// visual similarity.
inline SynthBenchmark synth_benchmark(const SynthBenchConfig& cfg, Rng& rng) {
  if (cfg.d_raw == 0 || cfg.word_dim == 0 || cfg.samples_per_class == 0 || cfg.n_seen_classes < 2 ||
      cfg.n_unseen_classes < 2 || !(cfg.cluster_spread > 0.0))
    raise(errc::bad_config, "invalid benchmark configuration");

  const std::size_t n_total = cfg.n_seen_classes + cfg.n_unseen_classes;
  std::vector<Vector> dirs;
  dirs.reserve(n_total);
  for (std::size_t c = 0; c < n_total; ++c) {
    bool placed = false;
    for (int attempt = 0; attempt < 1000 && !placed; ++attempt) {
      Vector dir = normalize(gaussian_vector(cfg.d_raw, rng));
      placed = true;
      for (const auto& prev : dirs)
        if (cosine(dir, prev) >= 0.95) {
          placed = false;
          break;
        }
      if (placed) dirs.push_back(std::move(dir));
    }
    if (!placed) raise(errc::rejection_exhausted, "could not place class direction " + std::to_string(c));
  }

  // Fixed random linear map into word space.
  Matrix word_map(cfg.word_dim, cfg.d_raw);
  const double scale = 1.0 / std::sqrt(static_cast<double>(cfg.d_raw));
  for (double& x : word_map.a) x = rng.gaussian() * scale;

  std::vector<Vector> prototypes(n_total);
  const double noise_coord = 0.05 / std::sqrt(static_cast<double>(cfg.word_dim));
  for (std::size_t c = 0; c < n_total; ++c) {
    Vector w(cfg.word_dim, 0.0);
    for (std::size_t i = 0; i < cfg.word_dim; ++i) w[i] = dot(word_map.row(i), dirs[c]);
    w = normalize(w);
    for (std::size_t i = 0; i < cfg.word_dim; ++i) w[i] += noise_coord * rng.gaussian();
    prototypes[c] = std::move(w);
  }

  const double spread_coord = cfg.cluster_spread / std::sqrt(static_cast<double>(cfg.d_raw));
  auto make_split = [&](std::size_t first, std::size_t n_classes) {
    FeatureSet fs;
    fs.dim = cfg.d_raw;
    fs.features = Matrix(n_classes * cfg.samples_per_class, cfg.d_raw);
    long long group = 0;
    std::size_t row = 0;
    for (std::size_t c = 0; c < n_classes; ++c) {
      const auto cid = static_cast<int>(first + c);
      for (std::size_t s = 0; s < cfg.samples_per_class; ++s) {
        Vector x = dirs[first + c];
        for (std::size_t i = 0; i < cfg.d_raw; ++i) x[i] += spread_coord * rng.gaussian();
        fs.features.set_row(row++, normalize(x));
        fs.class_ids.push_back(cid);
        fs.group_ids.push_back(group++);
      }
    }
    return fs;
  };

  auto make_vocab = [&](std::size_t first, std::size_t n_classes) {
    ClassVocabulary v;
    v.dim = cfg.word_dim;
    for (std::size_t c = 0; c < n_classes; ++c) {
      const auto cid = static_cast<int>(first + c);
      v.entries.push_back({cid, "class_" + std::to_string(cid), prototypes[first + c]});
    }
    return v;
  };

  SynthBenchmark bench;
  bench.train_features = make_split(0, cfg.n_seen_classes);
  bench.train_vocab = make_vocab(0, cfg.n_seen_classes);
  bench.test_features = make_split(cfg.n_seen_classes, cfg.n_unseen_classes);
  bench.test_vocab = make_vocab(cfg.n_seen_classes, cfg.n_unseen_classes);
  return bench;
}

// ---------------------------------------------------------------------------
// 3-D coordinate export for external plotting.
// ---------------------------------------------------------------------------

inline void export_projection(const Matrix& visual, const std::vector<int>& visual_labels, const Matrix& semantic,
                              const std::vector<int>& semantic_ids, const std::string& path) {
  if (visual.cols != 3 || semantic.cols != 3) raise(errc::not_three_dim, "projection export needs 3-D embeddings");
  if (visual_labels.size() != visual.rows || semantic_ids.size() != semantic.rows)
    raise(errc::dim_mismatch, "label count mismatch");
  std::ofstream out(path);
  if (!out) raise(errc::io_failure, "cannot open for writing: " + path);
  auto emit = [&](int cid, char kind, std::span<const double> v) {
    const Vector u = normalize(v);
    out << cid << ' ' << kind << ' ' << format_double(u[0]) << ' ' << format_double(u[1]) << ' '
        << format_double(u[2]) << '\n';
  };
  for (std::size_t i = 0; i < visual.rows; ++i) emit(visual_labels[i], 'v', visual.row(i));
  for (std::size_t i = 0; i < semantic.rows; ++i) emit(semantic_ids[i], 's', semantic.row(i));
  if (!out) raise(errc::io_failure, "write failed: " + path);
}

}  // namespace aurl
