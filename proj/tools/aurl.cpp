// aurl: experiment driver for alignment-uniformity representation learning on
// pre-extracted features. Subcommands cover the whole workflow: synthesize a
// benchmark, train the ablation modes, evaluate zero-shot accuracy, verify
// the math, and export diagnostics.

#include <CLI11.hpp>

#include "aurl/cli.hpp"

int main(int argc, char** argv) {
  CLI::App app{"alignment-uniformity representation learning experiments"};
  app.require_subcommand(1);

  // synth
  aurl::SynthOpts synth;
  auto* c_synth = app.add_subcommand("synth", "generate the synthetic benchmark files");
  c_synth->add_option("--out", synth.out_dir, "output directory")->required();
  c_synth->add_option("--d-raw", synth.cfg.d_raw, "raw feature dimension");
  c_synth->add_option("--seen", synth.cfg.n_seen_classes, "number of seen (train) classes");
  c_synth->add_option("--unseen", synth.cfg.n_unseen_classes, "number of unseen (test) classes");
  c_synth->add_option("--samples", synth.cfg.samples_per_class, "samples per class");
  c_synth->add_option("--spread", synth.cfg.cluster_spread, "cluster spread");
  c_synth->add_option("--word-dim", synth.cfg.word_dim, "word embedding dimension");
  c_synth->add_option("--seed", synth.cfg.seed, "random seed");

  // train
  aurl::TrainOpts train;
  std::string train_loss_mode, train_features, train_vocab_path;
  std::uint64_t train_seed = 0;
  long long train_iters = 0;
  auto* c_train = app.add_subcommand("train", "train a model; writes log.jsonl and checkpoint.txt");
  c_train->add_option("--config", train.config_path, "key=value configuration file");
  auto* o_set = c_train->add_option("--set", train.overrides, "override, repeatable: section.key=value");
  o_set->take_all();
  auto* o_mode = c_train->add_option("--loss-mode", train_loss_mode,
                                     "aurl | ls_only | ls_e2e | mse_baseline | aurl_no_cg");
  auto* o_seed = c_train->add_option("--seed", train_seed, "random seed");
  auto* o_iters = c_train->add_option("--iters", train_iters, "total iterations");
  auto* o_feat = c_train->add_option("--features", train_features, "training feature file (fvec)");
  auto* o_voc = c_train->add_option("--vocab", train_vocab_path, "training vocabulary file (cvoc)");
  c_train->add_option("--out", train.out_dir, "output directory")->required();
  c_train->add_flag("--quiet", train.quiet, "do not mirror the log to stdout");

  // eval
  aurl::EvalOpts eval;
  std::string eval_tau;
  auto* c_eval = app.add_subcommand("eval", "zero-shot evaluation of a checkpoint");
  c_eval->add_option("--checkpoint", eval.checkpoint, "checkpoint file")->required();
  c_eval->add_option("--features", eval.features, "evaluation feature file")->required();
  c_eval->add_option("--vocab", eval.vocab, "test vocabulary file")->required();
  c_eval->add_option("--clips", eval.clips, "clips per video (consecutive rows per group)");
  auto* o_tau = c_eval->add_option("--tau", eval_tau, "enforce train/test disjointness at this threshold");
  c_eval->add_option("--train-vocab", eval.train_vocab, "training vocabulary for the --tau check");
  c_eval->add_option("--splits", eval.splits, "number of seeded test splits");
  c_eval->add_option("--split-classes", eval.split_classes, "classes per split (0 = all)");
  c_eval->add_option("--split-seed", eval.split_seed, "seed for split subsampling");
  c_eval->add_option("--out", eval.out_path, "also write the JSON report here");

  // diagnose
  aurl::DiagnoseOpts diag;
  auto* c_diag = app.add_subcommand("diagnose", "closeness/dispersion of a checkpoint on a dataset");
  c_diag->add_option("--checkpoint", diag.checkpoint, "checkpoint file")->required();
  c_diag->add_option("--features", diag.features, "feature file")->required();
  c_diag->add_option("--vocab", diag.vocab, "vocabulary file")->required();

  // verify
  aurl::VerifyOpts verify;
  auto* c_verify = app.add_subcommand("verify", "bounds, decomposition and gradient checks");
  c_verify->add_option("--samples", verify.samples, "samples for the identity/bound sweeps");
  c_verify->add_option("--grad-instances", verify.grad_instances, "instances per per-loss gradient check");
  c_verify->add_option("--graph-instances", verify.graph_instances, "instances of the full-graph check");
  c_verify->add_option("--seed", verify.seed, "random seed");

  // gen-classes
  aurl::GenClassesOpts gen;
  auto* c_gen = app.add_subcommand("gen-classes", "dump a synthetic class bank from a checkpoint");
  c_gen->add_option("--checkpoint", gen.checkpoint, "checkpoint file")->required();
  c_gen->add_option("--vocab", gen.vocab, "training vocabulary file")->required();
  c_gen->add_option("--alpha", gen.alpha, "lower end of the U(alpha, 1) transform");
  c_gen->add_option("--ku", gen.k_u, "number of synthetic classes");
  c_gen->add_option("--seed", gen.seed, "random seed");
  c_gen->add_option("--out", gen.out_dir, "output directory")->required();

  // filter
  aurl::FilterOpts filter;
  auto* c_filter = app.add_subcommand("filter", "retained train classes under the disjointness criterion");
  c_filter->add_option("--train-vocab", filter.train_vocab, "training vocabulary file")->required();
  c_filter->add_option("--test-vocab", filter.test_vocab, "test vocabulary file")->required();
  c_filter->add_option("--tau", filter.tau, "distance threshold");

  // export-plot
  aurl::ExportPlotOpts plot;
  auto* c_plot = app.add_subcommand("export-plot", "export unit 3-D coordinates for plotting");
  c_plot->add_option("--checkpoint", plot.checkpoint, "checkpoint file (embed_dim must be 3)")->required();
  c_plot->add_option("--features", plot.features, "feature file")->required();
  c_plot->add_option("--vocab", plot.vocab, "vocabulary file")->required();
  c_plot->add_option("--out", plot.out_path, "output file")->required();

  CLI11_PARSE(app, argc, argv);

  if (c_synth->parsed()) return aurl::cmd_synth(synth);
  if (c_train->parsed()) {
    if (*o_mode) train.loss_mode = train_loss_mode;
    if (*o_seed) train.seed = train_seed;
    if (*o_iters) train.iters = train_iters;
    if (*o_feat) train.features = train_features;
    if (*o_voc) train.vocab = train_vocab_path;
    return aurl::cmd_train(train);
  }
  if (c_eval->parsed()) {
    if (*o_tau) {
      try {
        eval.tau = aurl::parse_double(eval_tau);
      } catch (const aurl::error& e) {
        std::cerr << "error: --tau: " << e.what() << '\n';
        return 1;
      }
    }
    return aurl::cmd_eval(eval);
  }
  if (c_diag->parsed()) return aurl::cmd_diagnose(diag);
  if (c_verify->parsed()) return aurl::cmd_verify(verify);
  if (c_gen->parsed()) return aurl::cmd_gen_classes(gen);
  if (c_filter->parsed()) return aurl::cmd_filter(filter);
  if (c_plot->parsed()) return aurl::cmd_export_plot(plot);
  return 1;
}
