#include "derev/metrics.h"

#include <cmath>
#include <complex>
#include <fstream>
#include <sstream>

#include "derev/sigproc.h"

namespace derev::metrics {

SrmrConfig::SrmrConfig() {
  // 8 log-spaced centers spanning [4, 128] Hz
  for (int i = 0; i < 8; ++i)
    modulation_band_centers[static_cast<size_t>(i)] =
        4.0 * std::pow(32.0, static_cast<double>(i) / 7.0);
}

namespace {

// log-triangular weight of modulation filter i at frequency f
double mod_filter_weight(const SrmrConfig& cfg, int i, double f, double f_nyq) {
  if (f <= 0.0) return 0.0;
  const auto& c = cfg.modulation_band_centers;
  const double center = c[static_cast<size_t>(i)];
  const double lo = (i > 0) ? c[static_cast<size_t>(i - 1)] : center / 1.6;
  const double hi = (i < 7) ? c[static_cast<size_t>(i + 1)] : std::min(center * 1.6, f_nyq);
  if (f <= lo || f >= hi) return 0.0;
  if (f < center) return (std::log(f) - std::log(lo)) / (std::log(center) - std::log(lo));
  return (std::log(hi) - std::log(f)) / (std::log(hi) - std::log(center));
}

}  // namespace

double srmr(const AudioSignal& signal, const SrmrConfig& cfg, const qmf::QmfPrototype& proto) {
  if (signal.sample_rate != 16000)
    throw std::invalid_argument("invalid-argument: srmr expects 16 kHz input");
  if (signal.samples.size() < 16000)
    throw std::invalid_argument("invalid-argument: srmr needs at least 1 s of audio");
  if (cfg.low_band_count <= 0 || cfg.low_band_count >= 8)
    throw std::invalid_argument("invalid-argument: low_band_count must be in (0, 8)");

  const size_t usable = signal.samples.size() / qmf::kNumBands * qmf::kNumBands;
  const auto frame = qmf::analyze(
      std::span<const double>(signal.samples.data(), usable), proto);

  const double fs_env =
      static_cast<double>(signal.sample_rate) / static_cast<double>(qmf::kNumBands);
  const size_t env_len = static_cast<size_t>(frame.bands.cols());

  double low_energy = 0.0, high_energy = 0.0;
  std::vector<std::complex<double>> spec(env_len);
  for (int q = 0; q < frame.bands.rows(); ++q) {
    std::vector<double> env = sigproc::hilbert_envelope(frame.bands.row(q));
    double mean = 0.0;
    for (double v : env) mean += v;
    mean /= static_cast<double>(env.size());
    for (size_t i = 0; i < env_len; ++i) spec[i] = env[i] - mean;
    sigproc::fft(spec, false);

    const size_t half = env_len / 2;
    for (size_t k = 1; k <= half; ++k) {
      const double f = fs_env * static_cast<double>(k) / static_cast<double>(env_len);
      const double e = std::norm(spec[k]);
      for (int i = 0; i < 8; ++i) {
        const double w = mod_filter_weight(cfg, i, f, fs_env / 2.0);
        if (w == 0.0) continue;
        if (i < cfg.low_band_count)
          low_energy += w * e;
        else
          high_energy += w * e;
      }
    }
  }

  if (high_energy <= 0.0 || low_energy <= 0.0)
    throw DegenerateInput("srmr on (near-)silent input");
  return low_energy / high_energy;
}

double segmental_snr(std::span<const double> ref, std::span<const double> test,
                     double frame_ms, int sample_rate) {
  if (ref.size() != test.size())
    throw std::invalid_argument("invalid-argument: segmental_snr length mismatch");
  const size_t frame = static_cast<size_t>(frame_ms * sample_rate / 1000.0);
  if (frame == 0 || ref.empty())
    throw std::invalid_argument("invalid-argument: segmental_snr empty input");

  double sum = 0.0;
  size_t count = 0;
  for (size_t begin = 0; begin + frame <= ref.size(); begin += frame) {
    double pr = 0.0, pe = 0.0;
    for (size_t i = begin; i < begin + frame; ++i) {
      pr += ref[i] * ref[i];
      const double d = ref[i] - test[i];
      pe += d * d;
    }
    if (pr == 0.0) continue;  // silent reference frame
    double snr = (pe == 0.0) ? 35.0 : 10.0 * std::log10(pr / pe);
    snr = std::clamp(snr, -10.0, 35.0);
    sum += snr;
    ++count;
  }
  if (count == 0) throw DegenerateInput("segmental_snr: all reference frames silent");
  return sum / static_cast<double>(count);
}

double log_spectral_distance(const Matrix<double>& env_a, const Matrix<double>& env_b) {
  if (!env_a.same_shape(env_b))
    throw std::invalid_argument("invalid-argument: log_spectral_distance shape mismatch");
  double acc = 0.0;
  const auto& a = env_a.data();
  const auto& b = env_b.data();
  for (size_t i = 0; i < a.size(); ++i) {
    if (!(a[i] > 0.0) || !(b[i] > 0.0))
      throw std::invalid_argument("invalid-argument: log_spectral_distance needs positive entries");
    const double d = std::log(a[i]) - std::log(b[i]);
    acc += d * d;
  }
  return std::sqrt(acc / static_cast<double>(a.size()));
}

std::map<std::string, double> MetricReport::means() const {
  std::map<std::string, double> out;
  for (const auto& [name, scores] : per_file) {
    double s = 0.0;
    for (double v : scores) s += v;
    out[name] = scores.empty() ? 0.0 : s / static_cast<double>(scores.size());
  }
  return out;
}

std::string MetricReport::to_text() const {
  std::ostringstream out;
  for (size_t i = 0; i < files.size(); ++i) {
    out << files[i];
    for (const auto& [name, scores] : per_file)
      if (i < scores.size()) out << "\t" << name << "=" << scores[i];
    out << "\n";
  }
  for (const auto& [name, mean] : means()) out << "mean." << name << "\t" << mean << "\n";
  return out.str();
}

void MetricReport::write_summary(const std::string& path) const {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("missing-file: cannot create " + path);
  for (const auto& [name, mean] : means()) out << "mean." << name << " = " << mean << "\n";
  out << "files = " << files.size() << "\n";
}

}  // namespace derev::metrics
