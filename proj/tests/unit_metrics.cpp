#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <fstream>

#include "derev/metrics.h"
#include "derev/roomsim.h"
#include "testutil.h"

using namespace derev;
using namespace derev::metrics;

TEST_CASE("srmr config centers are log-spaced in [4,128]") {
  SrmrConfig cfg;
  CHECK(cfg.modulation_band_centers.front() == doctest::Approx(4.0));
  CHECK(cfg.modulation_band_centers.back() == doctest::Approx(128.0));
  for (size_t i = 1; i < cfg.modulation_band_centers.size(); ++i)
    CHECK(cfg.modulation_band_centers[i] > cfg.modulation_band_centers[i - 1]);
}

TEST_CASE("srmr input validation") {
  const auto proto = qmf::design_prototype();
  SrmrConfig cfg;
  AudioSignal completely_silent{std::vector<double>(16000, 0.0), 16000};
  CHECK_THROWS_AS(srmr(completely_silent, cfg, proto), DegenerateInput);
  AudioSignal short_sig{std::vector<double>(8000, 0.1), 16000};
  CHECK_THROWS_AS(srmr(short_sig, cfg, proto), std::invalid_argument);
  AudioSignal wrong_rate{std::vector<double>(16000, 0.1), 8000};
  CHECK_THROWS_AS(srmr(wrong_rate, cfg, proto), std::invalid_argument);
}

TEST_CASE("srmr is positive, finite and scale invariant") {
  const auto proto = qmf::design_prototype();
  SrmrConfig cfg;
  const auto sig = testutil::speech_like(10, 2.0);
  const double s1 = srmr(sig, cfg, proto);
  CHECK(s1 > 0.0);
  CHECK(std::isfinite(s1));

  AudioSignal scaled{std::vector<double>(sig.samples.size()), 16000};
  for (size_t i = 0; i < sig.samples.size(); ++i) scaled.samples[i] = 7.5 * sig.samples[i];
  const double s2 = srmr(scaled, cfg, proto);
  CHECK(std::abs(s2 - s1) / s1 < 1e-6);
}

TEST_CASE("srmr drops when reverberation is added") {
  const auto proto = qmf::design_prototype();
  SrmrConfig cfg;
  int wins = 0;
  for (uint64_t seed = 0; seed < 20; ++seed) {
    const auto clean = testutil::speech_like(seed, 2.0);
    roomsim::ReverbSpec spec;
    spec.t60 = 0.6;
    spec.seed = 900 + seed;
    const auto rir = roomsim::rir_generate(spec);
    const auto reverb = roomsim::apply_reverb(clean, rir, std::nullopt, 0);
    if (srmr(clean, cfg, proto) > srmr(reverb.signal, cfg, proto)) ++wins;
  }
  CHECK(wins >= 18);
}

TEST_CASE("mean srmr decreases monotonically with T60") {
  const auto proto = qmf::design_prototype();
  SrmrConfig cfg;
  std::vector<double> means;
  for (double t60 : {0.2, 0.4, 0.6, 0.8}) {
    double acc = 0.0;
    for (uint64_t seed = 0; seed < 20; ++seed) {
      const auto clean = testutil::speech_like(seed, 2.0);
      roomsim::ReverbSpec spec;
      spec.t60 = t60;
      spec.seed = 1234 + seed;
      const auto rir = roomsim::rir_generate(spec);
      const auto reverb = roomsim::apply_reverb(clean, rir, std::nullopt, 0);
      acc += srmr(reverb.signal, cfg, proto);
    }
    means.push_back(acc / 20.0);
  }
  for (size_t i = 1; i < means.size(); ++i) CHECK(means[i] < means[i - 1]);
}

TEST_CASE("segmental snr basics") {
  const auto ref = testutil::speech_like(3, 1.0);
  CHECK(segmental_snr(ref.samples, ref.samples) == doctest::Approx(35.0));

  // ref + noise at an exact per-frame power ratio of 10 dB
  std::vector<double> noisy(ref.samples);
  const auto noise = testutil::gaussian_vector(noisy.size(), 5);
  const size_t frame = 512;
  for (size_t begin = 0; begin + frame <= noisy.size(); begin += frame) {
    double pr = 0.0, pn = 0.0;
    for (size_t i = begin; i < begin + frame; ++i) {
      pr += ref.samples[i] * ref.samples[i];
      pn += noise[i] * noise[i];
    }
    if (pr == 0.0) continue;
    const double g = std::sqrt(pr / (pn * 10.0));
    for (size_t i = begin; i < begin + frame; ++i) noisy[i] += g * noise[i];
  }
  CHECK(segmental_snr(ref.samples, noisy) == doctest::Approx(10.0).epsilon(0.1));

  CHECK_THROWS_AS(segmental_snr(ref.samples, std::vector<double>(10, 0.0)),
                  std::invalid_argument);
}

TEST_CASE("segmental snr skips silent reference frames") {
  std::vector<double> ref(2048, 0.0);
  std::vector<double> test(2048, 0.0);
  // only the second frame carries signal
  for (size_t i = 512; i < 1024; ++i) {
    ref[i] = 0.5;
    test[i] = 0.45;
  }
  const double snr = segmental_snr(ref, test);
  CHECK(snr == doctest::Approx(10.0 * std::log10(0.25 / 0.0025)).epsilon(1e-6));

  CHECK_THROWS_AS(segmental_snr(std::vector<double>(1024, 0.0), std::vector<double>(1024, 1.0)),
                  DegenerateInput);
}

TEST_CASE("log spectral distance") {
  Matrix<double> a(4, 5, 2.0);
  CHECK(log_spectral_distance(a, a) == 0.0);

  Matrix<double> b(4, 5, 8.0);
  CHECK(log_spectral_distance(a, b) == doctest::Approx(std::log(4.0)).epsilon(1e-12));

  // direct-sum oracle on random positive matrices
  Matrix<double> r1(3, 7), r2(3, 7);
  const auto v1 = testutil::random_vector(21, 8, 0.1, 4.0);
  const auto v2 = testutil::random_vector(21, 9, 0.1, 4.0);
  double acc = 0.0;
  for (size_t i = 0; i < 21; ++i) {
    r1.data()[i] = v1[i];
    r2.data()[i] = v2[i];
    const double d = std::log(v1[i]) - std::log(v2[i]);
    acc += d * d;
  }
  CHECK(log_spectral_distance(r1, r2) == doctest::Approx(std::sqrt(acc / 21.0)).epsilon(1e-12));

  Matrix<double> bad(4, 5, 1.0);
  bad.at(1, 1) = 0.0;
  CHECK_THROWS_AS(log_spectral_distance(a, bad), std::invalid_argument);
  Matrix<double> wrong(5, 4, 1.0);
  CHECK_THROWS_AS(log_spectral_distance(a, wrong), std::invalid_argument);
}

TEST_CASE("metric report means and summary") {
  MetricReport r;
  r.files = {"a.wav", "b.wav"};
  r.per_file["srmr_test"] = {1.0, 3.0};
  const auto m = r.means();
  CHECK(m.at("srmr_test") == doctest::Approx(2.0));
  testutil::TempDir tmp("report");
  r.write_summary(tmp.path() + "/summary.txt");
  std::ifstream in(tmp.path() + "/summary.txt");
  std::string text((std::istreambuf_iterator<char>(in)), {});
  CHECK(text.find("mean.srmr_test = 2") != std::string::npos);
}
