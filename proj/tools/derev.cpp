#include <CLI11.hpp>
#include <iostream>

#include "derev/commands.h"
#include "derev/config.h"

namespace {

// precedence: explicit flag > config file > built-in default
void apply_config_sources(derev::io::CliConfig& cfg, const std::string& config_path,
                          const std::vector<std::pair<std::string, std::string>>& overrides) {
  if (!config_path.empty()) cfg.load_file(config_path);
  for (const auto& [k, v] : overrides) cfg.set_override(k, v);
}

std::string config_help() {
  std::string h = "Config file keys (plain 'key = value' lines):\n";
  for (const auto& k : derev::io::CliConfig::known_keys())
    h += "  " + k.key + " (default " + k.default_value + "): " + k.help + "\n";
  return h;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Sub-band envelope-carrier speech dereverberation toolkit"};
  app.footer(config_help());
  app.require_subcommand(1);

  std::string config_path;
  app.add_option("--config", config_path, "configuration file ('key = value' lines)");

  // rir-gen
  auto* rir = app.add_subcommand("rir-gen", "generate a synthetic room impulse response");
  derev::cli::RirGenArgs rir_args;
  rir->add_option("--t60", rir_args.t60, "reverberation time (s)")->capture_default_str();
  rir->add_option("--seed", rir_args.seed, "RNG seed")->capture_default_str();
  rir->add_option("--length", rir_args.length_s, "RIR length (s)")->capture_default_str();
  rir->add_option("--out", rir_args.out_wav, "output WAV path")->required();

  // corpus
  auto* corpus = app.add_subcommand("corpus", "build a paired clean/reverberant corpus");
  derev::cli::CorpusArgs corpus_args;
  corpus->add_option("--clean-dir", corpus_args.clean_dir, "directory of 16 kHz mono WAVs")
      ->required();
  corpus->add_option("--out-dir", corpus_args.out_dir, "output directory")->required();
  std::string corpus_t60s, corpus_snr, corpus_seed;
  corpus->add_option("--t60-set", corpus_t60s, "comma-separated T60 values");
  corpus->add_option("--snr", corpus_snr, "additive-noise SNR (dB)");
  corpus->add_option("--seed", corpus_seed, "base seed");

  // decompose
  auto* dec = app.add_subcommand("decompose", "dump sub-band envelopes and carriers");
  derev::cli::DecomposeArgs dec_args;
  dec->add_option("in", dec_args.in_wav, "input WAV")->required();
  dec->add_option("out", dec_args.out_dump, "output dump")->required();
  std::string dec_order;
  dec->add_option("--lp-order", dec_order, "AR model order");

  // synthesize
  auto* syn = app.add_subcommand("synthesize", "rebuild audio from a decomposition dump");
  derev::cli::SynthesizeArgs syn_args;
  syn->add_option("in", syn_args.in_dump, "input dump")->required();
  syn->add_option("out", syn_args.out_wav, "output WAV")->required();

  // train
  auto* train = app.add_subcommand("train", "train the dual-path dereverberation model");
  derev::cli::TrainArgs train_args;
  train->add_option("--manifest", train_args.manifest, "corpus manifest")->required();
  train->add_option("--out", train_args.out_checkpoint, "output checkpoint")->required();
  train->add_option("--history", train_args.out_history, "per-epoch loss file")->required();
  std::string tr_lambda, tr_lr, tr_epochs, tr_batch, tr_seed, tr_hidden, tr_order;
  train->add_option("--lambda", tr_lambda, "envelope-loss weight");
  train->add_option("--lr", tr_lr, "learning rate");
  train->add_option("--epochs", tr_epochs, "epochs");
  train->add_option("--batch-size", tr_batch, "minibatch size");
  train->add_option("--seed", tr_seed, "training seed");
  train->add_option("--hidden", tr_hidden, "LSTM hidden size");
  train->add_option("--lp-order", tr_order, "AR model order");

  // dereverb
  auto* der = app.add_subcommand("dereverb", "enhance a reverberant WAV");
  derev::cli::DereverbArgs der_args;
  der->add_option("in", der_args.in_wav, "input WAV")->required();
  der->add_option("checkpoint", der_args.checkpoint, "model checkpoint")->required();
  der->add_option("out", der_args.out_wav, "output WAV")->required();
  der->add_flag("--pcm16", der_args.pcm16, "write 16-bit PCM (dithered) instead of float");

  // eval
  auto* ev = app.add_subcommand("eval", "score audio with the objective metrics");
  derev::cli::EvalArgs ev_args;
  std::string ev_manifest, ev_ref, ev_test, ev_summary;
  ev->add_option("--manifest", ev_manifest, "corpus manifest to score");
  ev->add_option("--ref", ev_ref, "reference WAV");
  ev->add_option("--test", ev_test, "test WAV");
  ev->add_option("--summary", ev_summary, "write key=value summary file");
  bool no_srmr = false, no_segsnr = false, no_lsd = false;
  ev->add_flag("--no-srmr", no_srmr, "skip SRMR");
  ev->add_flag("--no-segsnr", no_segsnr, "skip segmental SNR");
  ev->add_flag("--no-lsd", no_lsd, "skip log-envelope distance");

  // gradcheck
  app.add_subcommand("gradcheck", "finite-difference check of the model gradients");

  CLI11_PARSE(app, argc, argv);

  try {
    derev::io::CliConfig cfg;
    std::vector<std::pair<std::string, std::string>> overrides;

    if (app.got_subcommand("rir-gen")) {
      derev::cli::cmd_rir_gen(rir_args);
    } else if (app.got_subcommand("corpus")) {
      if (!corpus_t60s.empty()) overrides.emplace_back("roomsim.t60_set", corpus_t60s);
      if (!corpus_snr.empty()) overrides.emplace_back("roomsim.snr_db", corpus_snr);
      if (!corpus_seed.empty()) overrides.emplace_back("roomsim.seed", corpus_seed);
      apply_config_sources(cfg, config_path, overrides);
      corpus_args.config = cfg;
      derev::cli::cmd_corpus(corpus_args);
    } else if (app.got_subcommand("decompose")) {
      if (!dec_order.empty()) overrides.emplace_back("fdlp.lp_order", dec_order);
      apply_config_sources(cfg, config_path, overrides);
      dec_args.lp_order = cfg.get_int("fdlp.lp_order");
      derev::cli::cmd_decompose(dec_args);
    } else if (app.got_subcommand("synthesize")) {
      derev::cli::cmd_synthesize(syn_args);
    } else if (app.got_subcommand("train")) {
      if (!tr_lambda.empty()) overrides.emplace_back("train.lambda", tr_lambda);
      if (!tr_lr.empty()) overrides.emplace_back("train.learning_rate", tr_lr);
      if (!tr_epochs.empty()) overrides.emplace_back("train.epochs", tr_epochs);
      if (!tr_batch.empty()) overrides.emplace_back("train.batch_size", tr_batch);
      if (!tr_seed.empty()) overrides.emplace_back("train.seed", tr_seed);
      if (!tr_hidden.empty()) overrides.emplace_back("dplstm.hidden_size", tr_hidden);
      if (!tr_order.empty()) overrides.emplace_back("fdlp.lp_order", tr_order);
      apply_config_sources(cfg, config_path, overrides);
      train_args.config = cfg;
      derev::cli::cmd_train(train_args);
    } else if (app.got_subcommand("dereverb")) {
      derev::cli::cmd_dereverb(der_args);
    } else if (app.got_subcommand("eval")) {
      if (!ev_manifest.empty()) ev_args.manifest = ev_manifest;
      if (!ev_ref.empty()) ev_args.ref_wav = ev_ref;
      if (!ev_test.empty()) ev_args.test_wav = ev_test;
      if (!ev_summary.empty()) ev_args.summary_path = ev_summary;
      ev_args.with_srmr = !no_srmr;
      ev_args.with_segsnr = !no_segsnr;
      ev_args.with_lsd = !no_lsd;
      derev::cli::cmd_eval(ev_args);
    } else if (app.got_subcommand("gradcheck")) {
      if (!derev::cli::cmd_gradcheck()) return 1;
    }
  } catch (const std::exception& ex) {
    std::cerr << "error: " << ex.what() << "\n";
    return 1;
  }
  return 0;
}
