#include "derev/commands.h"

#include <cstdio>
#include <fstream>
#include <iostream>

#include "derev/container.h"
#include "derev/dplstm.h"
#include "derev/fdlp.h"
#include "derev/metrics.h"
#include "derev/roomsim.h"
#include "derev/sigproc.h"
#include "derev/wav.h"

namespace derev::cli {

void cmd_rir_gen(const RirGenArgs& args) {
  roomsim::ReverbSpec spec;
  spec.t60 = args.t60;
  spec.seed = args.seed;
  spec.rir_length_s = args.length_s;
  spec.snr_db = std::nullopt;
  const auto rir = roomsim::rir_generate(spec);

  AudioSignal sig{rir.samples, rir.sample_rate};
  io::write_wav(args.out_wav, sig, io::WavFormat::kFloat32);

  std::ofstream meta(args.out_wav + ".meta", std::ios::trunc);
  meta << "t60 = " << rir.t60 << "\n"
       << "seed = " << args.seed << "\n"
       << "sample_rate = " << rir.sample_rate << "\n"
       << "early_late_boundary = " << rir.early_late_boundary << "\n";
}

void cmd_corpus(const CorpusArgs& args) {
  const auto t60s = args.config.get_double_list("roomsim.t60_set");
  const double snr = args.config.get_double("roomsim.snr_db");
  const double rir_len = args.config.get_double("roomsim.rir_length");
  const uint64_t seed = args.config.get_u64("roomsim.seed");

  std::vector<roomsim::ReverbSpec> specs;
  for (double t60 : t60s) {
    roomsim::ReverbSpec s;
    s.t60 = t60;
    s.snr_db = snr;
    s.seed = seed;
    s.rir_length_s = rir_len;
    specs.push_back(s);
  }
  const auto entries = roomsim::build_corpus(args.clean_dir, specs, args.out_dir);
  std::cout << "corpus: " << entries.size() << " pairs, manifest at " << args.out_dir
            << "/manifest.tsv\n";
}

void cmd_decompose(const DecomposeArgs& args) {
  const AudioSignal sig = io::read_wav(args.in_wav);
  const auto proto = qmf::design_prototype();
  fdlp::FdlpConfig cfg;
  cfg.lp_order = args.lp_order;

  sigproc::SegmentGrid grid;
  const auto segments = sigproc::segment(sig, grid);
  const int bands = qmf::kNumBands;
  const int steps = grid.segment_len / bands;
  const int count = static_cast<int>(segments.size());

  io::NamedTensor log_env{"log_env", {bands, steps, count}, {}};
  io::NamedTensor carr{"carrier", {bands, steps, count}, {}};
  log_env.data.resize(log_env.element_count());
  carr.data.resize(carr.element_count());

  for (int s = 0; s < count; ++s) {
    const auto ec = fdlp::decompose(segments[static_cast<size_t>(s)], proto, cfg);
    for (int q = 0; q < bands; ++q)
      for (int t = 0; t < steps; ++t) {
        const size_t idx =
            (static_cast<size_t>(q) * steps + static_cast<size_t>(t)) * count + s;
        log_env.data[idx] = static_cast<float>(ec.log_env.at(q, t));
        carr.data[idx] = static_cast<float>(ec.carrier.at(q, t));
      }
  }

  io::TensorContainer c;
  c.meta.emplace_back("kind", "envelope-carrier-dump");
  c.meta.emplace_back("original_length", std::to_string(sig.samples.size()));
  c.meta.emplace_back("sample_rate", std::to_string(sig.sample_rate));
  c.meta.emplace_back("lp_order", std::to_string(args.lp_order));
  c.tensors.push_back(std::move(log_env));
  c.tensors.push_back(std::move(carr));
  io::write_container(args.out_dump, c);
}

void cmd_synthesize(const SynthesizeArgs& args) {
  const io::TensorContainer c = io::read_container(args.in_dump);
  const std::string* kind = c.find_meta("kind");
  if (!kind || *kind != "envelope-carrier-dump")
    throw std::runtime_error("bad-format: not an envelope-carrier dump: " + args.in_dump);
  const io::NamedTensor* le = c.find_tensor("log_env");
  const io::NamedTensor* ca = c.find_tensor("carrier");
  if (!le || !ca || le->dims.size() != 3 || le->dims != ca->dims)
    throw std::runtime_error("shape-mismatch: dump tensors in " + args.in_dump);
  const std::string* olen = c.find_meta("original_length");
  const std::string* srate = c.find_meta("sample_rate");
  if (!olen || !srate)
    throw std::runtime_error("bad-format: dump missing metadata in " + args.in_dump);

  const int bands = le->dims[0];
  const int steps = le->dims[1];
  const int count = le->dims[2];
  const auto proto = qmf::design_prototype();

  std::vector<std::vector<double>> segments(static_cast<size_t>(count));
  for (int s = 0; s < count; ++s) {
    fdlp::EnvelopeCarrier ec;
    ec.log_env = Matrix<double>(bands, steps);
    ec.carrier = Matrix<double>(bands, steps);
    for (int q = 0; q < bands; ++q)
      for (int t = 0; t < steps; ++t) {
        const size_t idx =
            (static_cast<size_t>(q) * steps + static_cast<size_t>(t)) * count + s;
        ec.log_env.at(q, t) = le->data[idx];
        ec.carrier.at(q, t) = ca->data[idx];
      }
    segments[static_cast<size_t>(s)] = fdlp::reconstruct(ec, proto);
  }

  AudioSignal out;
  out.sample_rate = std::stoi(*srate);
  out.samples = sigproc::desegment(segments, std::stoull(*olen));
  io::write_wav(args.out_wav, out, io::WavFormat::kFloat32);
}

void cmd_train(const TrainArgs& args) {
  dplstm::TrainConfig cfg;
  cfg.lambda = args.config.get_double("train.lambda");
  cfg.learning_rate = args.config.get_double("train.learning_rate");
  cfg.epochs = args.config.get_int("train.epochs");
  cfg.batch_size = args.config.get_int("train.batch_size");
  cfg.seed = args.config.get_u64("train.seed");
  cfg.lp_order = args.config.get_int("fdlp.lp_order");
  cfg.arch.hidden = args.config.get_int("dplstm.hidden_size");
  cfg.arch.fusion_layers = args.config.get_int("dplstm.fusion_layers");

  const auto result = dplstm::train(cfg, args.manifest, args.out_checkpoint, args.out_history);
  std::cout << "train: " << result.epoch_loss.size() << " epochs, final loss "
            << result.epoch_loss.back() << ", checkpoint at " << args.out_checkpoint << "\n";
}

void cmd_dereverb(const DereverbArgs& args) {
  const auto params = dplstm::load_checkpoint(args.checkpoint);
  const AudioSignal in = io::read_wav(args.in_wav);
  const AudioSignal out = dplstm::enhance(params, in);
  io::write_wav(args.out_wav, out,
                args.pcm16 ? io::WavFormat::kPcm16 : io::WavFormat::kFloat32);
}

void cmd_eval(const EvalArgs& args) {
  const auto proto = qmf::design_prototype();
  const metrics::SrmrConfig scfg;
  const fdlp::FdlpConfig fcfg;

  struct Pair {
    std::string name;
    std::string ref, test;
  };
  std::vector<Pair> pairs;
  if (args.manifest) {
    for (const auto& e : roomsim::read_manifest(*args.manifest))
      pairs.push_back({e.reverb_path, e.clean_path, e.reverb_path});
  } else if (args.ref_wav && args.test_wav) {
    pairs.push_back({*args.test_wav, *args.ref_wav, *args.test_wav});
  } else {
    throw std::invalid_argument("invalid-argument: eval needs a manifest or a wav pair");
  }

  metrics::MetricReport report;
  for (const auto& p : pairs) {
    const AudioSignal ref = io::read_wav(p.ref);
    const AudioSignal test = io::read_wav(p.test);
    report.files.push_back(p.name);
    if (args.with_srmr) {
      report.per_file["srmr_ref"].push_back(metrics::srmr(ref, scfg, proto));
      report.per_file["srmr_test"].push_back(metrics::srmr(test, scfg, proto));
    }
    if (args.with_segsnr && ref.samples.size() == test.samples.size())
      report.per_file["segsnr_db"].push_back(metrics::segmental_snr(ref.samples, test.samples));
    if (args.with_lsd) {
      // mean log-envelope distance over aligned full segments
      const size_t seg = 16000;
      const size_t n = std::min(ref.samples.size(), test.samples.size()) / seg;
      double acc = 0.0;
      size_t cnt = 0;
      for (size_t s = 0; s < n; ++s) {
        const std::span<const double> rs(ref.samples.data() + s * seg, seg);
        const std::span<const double> ts(test.samples.data() + s * seg, seg);
        const auto er = fdlp::decompose(rs, proto, fcfg);
        const auto et = fdlp::decompose(ts, proto, fcfg);
        Matrix<double> ea(er.log_env.rows(), er.log_env.cols());
        Matrix<double> eb(et.log_env.rows(), et.log_env.cols());
        for (int q = 0; q < ea.rows(); ++q)
          for (int t = 0; t < ea.cols(); ++t) {
            ea.at(q, t) = std::exp(er.log_env.at(q, t));
            eb.at(q, t) = std::exp(et.log_env.at(q, t));
          }
        acc += metrics::log_spectral_distance(ea, eb);
        ++cnt;
      }
      if (cnt > 0) report.per_file["lsd"].push_back(acc / static_cast<double>(cnt));
    }
  }

  std::cout << report.to_text();
  if (args.summary_path) report.write_summary(*args.summary_path);
}

bool cmd_gradcheck() {
  const auto report = dplstm::gradient_check();
  for (const auto& g : report.groups)
    std::printf("%-12s max rel err %.3e  %s\n", g.name.c_str(), g.max_rel_err,
                g.max_rel_err <= report.tolerance ? "[PASS]" : "[FAIL]");
  std::printf("gradcheck: %s (tolerance %.1e)\n", report.pass ? "PASS" : "FAIL",
              report.tolerance);
  return report.pass;
}

}  // namespace derev::cli
