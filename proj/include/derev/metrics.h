#pragma once

#include <array>
#include <map>
#include <string>
#include <vector>

#include "derev/common.h"
#include "derev/qmf.h"

namespace derev::metrics {

// Simplified speech-to-reverberation modulation energy ratio built on the
// repo's 64-band QMF envelopes with an 8-band modulation filter bank.
// Absolute values are not comparable to published SRMR numbers; only
// directions and orderings are contractual.
struct SrmrConfig {
  std::array<double, 8> modulation_band_centers;  // Hz, log-spaced in [4, 128]
  int low_band_count = 4;

  SrmrConfig();
};

// Ratio of low- to high-modulation-band envelope energy; higher is cleaner.
double srmr(const AudioSignal& signal, const SrmrConfig& cfg, const qmf::QmfPrototype& proto);

// Mean over 32 ms frames of 10*log10(ref/error power), each frame clamped to
// [-10, 35] dB; zero-reference frames are skipped.
double segmental_snr(std::span<const double> ref, std::span<const double> test,
                     double frame_ms = 32.0, int sample_rate = 16000);

// RMS log-envelope difference.
double log_spectral_distance(const Matrix<double>& env_a, const Matrix<double>& env_b);

struct MetricReport {
  std::vector<std::string> files;
  std::map<std::string, std::vector<double>> per_file;  // metric name -> scores

  std::map<std::string, double> means() const;
  std::string to_text() const;
  void write_summary(const std::string& path) const;
};

}  // namespace derev::metrics
