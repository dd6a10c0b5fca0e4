#include "derev/roomsim.h"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <limits>
#include <random>
#include <sstream>

#include "derev/sigproc.h"
#include "derev/wav.h"

namespace fs = std::filesystem;

namespace derev::roomsim {

RoomImpulseResponse rir_generate(const ReverbSpec& spec, int sample_rate) {
  if (spec.t60 <= 0.0) throw std::invalid_argument("invalid-argument: t60 must be positive");
  if (spec.rir_length_s < spec.t60 / 2.0)
    throw std::invalid_argument("invalid-argument: rir_length must be >= t60/2");

  const size_t n = static_cast<size_t>(spec.rir_length_s * sample_rate);
  RoomImpulseResponse rir;
  rir.sample_rate = sample_rate;
  rir.t60 = spec.t60;
  rir.early_late_boundary = static_cast<size_t>(0.050 * sample_rate);
  rir.samples.resize(n);

  std::mt19937_64 rng(spec.seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  const double decay = -3.0 / (spec.t60 * sample_rate);
  rir.samples[0] = 1.0;
  for (size_t i = 1; i < n; ++i)
    rir.samples[i] = gauss(rng) * std::pow(10.0, decay * static_cast<double>(i));
  return rir;
}

std::pair<RoomImpulseResponse, RoomImpulseResponse> split_early_late(
    const RoomImpulseResponse& rir, double boundary_ms) {
  const size_t b = static_cast<size_t>(boundary_ms * rir.sample_rate / 1000.0);
  if (b > rir.samples.size())
    throw std::invalid_argument("invalid-argument: early/late boundary beyond RIR length");
  RoomImpulseResponse early = rir;
  RoomImpulseResponse late = rir;
  early.early_late_boundary = b;
  late.early_late_boundary = b;
  std::fill(early.samples.begin() + static_cast<ptrdiff_t>(b), early.samples.end(), 0.0);
  std::fill(late.samples.begin(), late.samples.begin() + static_cast<ptrdiff_t>(b), 0.0);
  return {std::move(early), std::move(late)};
}

ReverbResult apply_reverb(const AudioSignal& clean, const RoomImpulseResponse& rir,
                          std::optional<double> snr_db, uint64_t noise_seed) {
  if (clean.sample_rate != rir.sample_rate)
    throw std::invalid_argument("invalid-argument: sample-rate mismatch between clean and RIR");
  if (clean.samples.empty())
    throw std::invalid_argument("invalid-argument: empty clean signal");

  std::vector<double> y = sigproc::convolve(clean.samples, rir.samples);
  y.resize(clean.samples.size());

  if (snr_db) {
    double sig_power = 0.0;
    for (double v : y) sig_power += v * v;
    sig_power /= static_cast<double>(y.size());
    if (sig_power > 0.0) {
      std::mt19937_64 rng(noise_seed);
      std::normal_distribution<double> gauss(0.0, 1.0);
      std::vector<double> noise(y.size());
      double noise_power = 0.0;
      for (auto& v : noise) {
        v = gauss(rng);
        noise_power += v * v;
      }
      noise_power /= static_cast<double>(noise.size());
      // scale the drawn vector so the measured SNR is exact
      const double target = sig_power / std::pow(10.0, *snr_db / 10.0);
      const double g = std::sqrt(target / noise_power);
      for (size_t i = 0; i < y.size(); ++i) y[i] += g * noise[i];
    }
  }

  double peak = 0.0;
  for (double v : y) peak = std::max(peak, std::abs(v));
  double scale = 1.0;
  if (peak > 1.0) {
    scale = 1.0 / peak;
    for (auto& v : y) v *= scale;
  }
  return ReverbResult{AudioSignal{std::move(y), clean.sample_rate}, scale};
}

double envelope_model_error(const AudioSignal& clean_1s, const RoomImpulseResponse& rir,
                            int band_index, const qmf::QmfPrototype& proto) {
  if (clean_1s.sample_rate != 16000)
    throw std::invalid_argument("invalid-argument: probe expects 16 kHz input");
  if (clean_1s.samples.size() != 16000)
    throw std::invalid_argument("invalid-argument: probe expects a 1-second segment");
  if (band_index < 0 || band_index >= qmf::kNumBands)
    throw std::invalid_argument("invalid-argument: band index out of range");

  const ReverbResult rev = apply_reverb(clean_1s, rir, std::nullopt, 0);

  const auto clean_frame = qmf::analyze(clean_1s.samples, proto);
  const auto reverb_frame = qmf::analyze(rev.signal.samples, proto);
  const std::vector<double> e_x = sigproc::hilbert_envelope(clean_frame.bands.row(band_index));
  const std::vector<double> e_y = sigproc::hilbert_envelope(reverb_frame.bands.row(band_index));

  // RIR energy profile at the band rate (64-sample bins)
  const size_t hop = qmf::kNumBands;
  const size_t bins = (rir.samples.size() + hop - 1) / hop;
  std::vector<double> e_r(bins, 0.0);
  for (size_t i = 0; i < rir.samples.size(); ++i)
    e_r[i / hop] += rir.samples[i] * rir.samples[i];

  std::vector<double> e_hat = sigproc::convolve(e_x, e_r);
  e_hat.resize(e_y.size());
  for (auto& v : e_hat) v *= 0.5;

  auto norm = [](const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x * x;
    return std::sqrt(s);
  };
  const double ny = norm(e_y);
  const double nh = norm(e_hat);
  if (ny == 0.0 || nh == 0.0) throw DegenerateInput("silent band in envelope_model_error");

  double err = 0.0;
  for (size_t i = 0; i < e_y.size(); ++i) {
    const double d = e_y[i] / ny - e_hat[i] / nh;
    err += d * d;
  }
  return std::sqrt(err);
}

void write_manifest(const std::string& path, const std::vector<CorpusEntry>& entries) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("missing-file: cannot create manifest " + path);
  for (const auto& e : entries)
    out << e.clean_path << "\t" << e.reverb_path << "\t" << e.t60 << "\t" << e.snr_db << "\t"
        << e.seed << "\n";
  if (!out) throw std::runtime_error("io-error: short write to " + path);
}

std::vector<CorpusEntry> read_manifest(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("missing-file: cannot open manifest " + path);
  std::vector<CorpusEntry> entries;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::istringstream ls(line);
    CorpusEntry e;
    std::string t60s, snrs, seeds;
    if (!std::getline(ls, e.clean_path, '\t') || !std::getline(ls, e.reverb_path, '\t') ||
        !std::getline(ls, t60s, '\t') || !std::getline(ls, snrs, '\t') ||
        !std::getline(ls, seeds))
      throw std::runtime_error("bad-format: manifest " + path + ":" + std::to_string(lineno));
    e.t60 = std::stod(t60s);
    e.snr_db = std::stod(snrs);
    e.seed = std::stoull(seeds);
    entries.push_back(std::move(e));
  }
  return entries;
}

std::vector<CorpusEntry> build_corpus(const std::string& clean_dir,
                                      const std::vector<ReverbSpec>& specs,
                                      const std::string& out_dir) {
  if (specs.empty()) throw std::invalid_argument("invalid-argument: empty spec list");
  std::vector<fs::path> wavs;
  for (const auto& entry : fs::directory_iterator(clean_dir))
    if (entry.is_regular_file() && entry.path().extension() == ".wav")
      wavs.push_back(entry.path());
  std::sort(wavs.begin(), wavs.end());
  if (wavs.empty())
    throw std::runtime_error("missing-file: no .wav files in " + clean_dir);

  fs::create_directories(out_dir);
  std::vector<CorpusEntry> entries;

  for (size_t fi = 0; fi < wavs.size(); ++fi) {
    AudioSignal clean;
    try {
      clean = io::read_wav(wavs[fi].string());
    } catch (const std::exception& ex) {
      std::cerr << "corpus: skipping " << wavs[fi].string() << ": " << ex.what() << "\n";
      continue;
    }

    const std::string stem = wavs[fi].stem().string();
    const std::string clean_out = (fs::path(out_dir) / (stem + "_clean.wav")).string();
    io::write_wav(clean_out, clean, io::WavFormat::kFloat32);

    for (size_t si = 0; si < specs.size(); ++si) {
      ReverbSpec spec = specs[si];
      // one deterministic stream per (file, spec) pair
      spec.seed = spec.seed * 1000003ULL + fi * 7919ULL + si;
      const RoomImpulseResponse rir = rir_generate(spec, clean.sample_rate);
      const ReverbResult rev = apply_reverb(clean, rir, spec.snr_db, spec.seed ^ 0x9e3779b9ULL);

      std::ostringstream name;
      name << stem << "_t60_" << spec.t60 << "_s" << si << ".wav";
      const std::string reverb_out = (fs::path(out_dir) / name.str()).string();
      io::write_wav(reverb_out, rev.signal, io::WavFormat::kFloat32);

      CorpusEntry e;
      e.clean_path = clean_out;
      e.reverb_path = reverb_out;
      e.t60 = spec.t60;
      e.snr_db = spec.snr_db.value_or(std::numeric_limits<double>::quiet_NaN());
      e.seed = spec.seed;
      entries.push_back(std::move(e));
    }
  }

  write_manifest((fs::path(out_dir) / "manifest.tsv").string(), entries);
  return entries;
}

}  // namespace derev::roomsim
