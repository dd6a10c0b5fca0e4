#pragma once

#include <optional>
#include <string>
#include <vector>

#include "derev/config.h"

// Implementations behind the CLI subcommands. Each throws on failure; the
// CLI entry point turns exceptions into one-line machine-parsable errors and
// a non-zero exit code.

namespace derev::cli {

struct RirGenArgs {
  double t60 = 0.5;
  uint64_t seed = 1;
  double length_s = 1.0;
  std::string out_wav;
};
void cmd_rir_gen(const RirGenArgs& args);

struct CorpusArgs {
  std::string clean_dir;
  std::string out_dir;
  io::CliConfig config;
};
void cmd_corpus(const CorpusArgs& args);

struct DecomposeArgs {
  std::string in_wav;
  std::string out_dump;
  int lp_order = 30;
};
void cmd_decompose(const DecomposeArgs& args);

struct SynthesizeArgs {
  std::string in_dump;
  std::string out_wav;
};
void cmd_synthesize(const SynthesizeArgs& args);

struct TrainArgs {
  std::string manifest;
  std::string out_checkpoint;
  std::string out_history;
  io::CliConfig config;
};
void cmd_train(const TrainArgs& args);

struct DereverbArgs {
  std::string in_wav;
  std::string checkpoint;
  std::string out_wav;
  bool pcm16 = false;
};
void cmd_dereverb(const DereverbArgs& args);

struct EvalArgs {
  std::optional<std::string> manifest;
  std::optional<std::string> ref_wav;
  std::optional<std::string> test_wav;
  bool with_srmr = true;
  bool with_segsnr = true;
  bool with_lsd = true;
  std::optional<std::string> summary_path;
};
void cmd_eval(const EvalArgs& args);

// returns true when every parameter group passes
bool cmd_gradcheck();

}  // namespace derev::cli
