#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "derev/common.h"
#include "derev/qmf.h"

namespace derev::roomsim {

// Stochastic exponential-decay room impulse response. samples[0] is the
// direct path; the early/late boundary defaults to 50 ms.
struct RoomImpulseResponse {
  std::vector<double> samples;
  int sample_rate = 16000;
  double t60 = 0.0;
  size_t early_late_boundary = 800;
};

struct ReverbSpec {
  double t60 = 0.5;
  std::optional<double> snr_db = 20.0;
  uint64_t seed = 1;
  double rir_length_s = 1.0;
};

RoomImpulseResponse rir_generate(const ReverbSpec& spec, int sample_rate = 16000);

// Sample-wise partition at the boundary: early and late are full-length
// masked copies, early + late == rir exactly.
std::pair<RoomImpulseResponse, RoomImpulseResponse> split_early_late(
    const RoomImpulseResponse& rir, double boundary_ms = 50.0);

struct ReverbResult {
  AudioSignal signal;
  double scale = 1.0;  // peak-normalization factor actually applied
};

// Convolve and truncate to the clean length; optional seeded noise scaled so
// the measured SNR hits snr_db exactly. Peak-normalizes only when |y| > 1.
ReverbResult apply_reverb(const AudioSignal& clean, const RoomImpulseResponse& rir,
                          std::optional<double> snr_db, uint64_t noise_seed);

// Numeric probe of the sub-band envelope convolution model: compares the
// Hilbert envelope of the reverberant band against 0.5 * (clean band envelope
// (*) RIR energy profile at the band rate), both unit-normalized. Exact for a
// delta RIR by construction. Not part of the processing path.
double envelope_model_error(const AudioSignal& clean_1s, const RoomImpulseResponse& rir,
                            int band_index, const qmf::QmfPrototype& proto);

struct CorpusEntry {
  std::string clean_path;
  std::string reverb_path;
  double t60 = 0.0;
  double snr_db = 0.0;  // NaN when no noise was added
  uint64_t seed = 0;
};

// Builds clean/reverberant pairs for every (clean wav, spec) combination and
// writes a manifest. Deterministic given the spec seeds; re-runs are
// byte-identical. Inputs that are not 16 kHz mono are skipped with a logged
// reason.
std::vector<CorpusEntry> build_corpus(const std::string& clean_dir,
                                      const std::vector<ReverbSpec>& specs,
                                      const std::string& out_dir);

void write_manifest(const std::string& path, const std::vector<CorpusEntry>& entries);
std::vector<CorpusEntry> read_manifest(const std::string& path);

}  // namespace derev::roomsim
