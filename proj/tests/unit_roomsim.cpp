#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <fstream>

#include "derev/roomsim.h"
#include "derev/sigproc.h"
#include "derev/wav.h"
#include "testutil.h"

using namespace derev;
using namespace derev::roomsim;

namespace {

// Schroeder backward-integration oracle: T60 from the energy-decay slope
double schroeder_t60(const RoomImpulseResponse& rir) {
  const size_t n = rir.samples.size();
  std::vector<double> edc(n);
  double acc = 0.0;
  for (size_t i = n; i-- > 0;) {
    acc += rir.samples[i] * rir.samples[i];
    edc[i] = acc;
  }
  const double e0 = edc[0];
  // fit the -5..-25 dB region of 10*log10(EDC)
  std::vector<double> xs, ys;
  for (size_t i = 0; i < n; ++i) {
    const double db = 10.0 * std::log10(edc[i] / e0 + 1e-300);
    if (db <= -5.0 && db >= -25.0) {
      xs.push_back(static_cast<double>(i) / rir.sample_rate);
      ys.push_back(db);
    }
  }
  REQUIRE(xs.size() > 10);
  double mx = 0, my = 0;
  for (size_t i = 0; i < xs.size(); ++i) {
    mx += xs[i];
    my += ys[i];
  }
  mx /= static_cast<double>(xs.size());
  my /= static_cast<double>(xs.size());
  double sxy = 0, sxx = 0;
  for (size_t i = 0; i < xs.size(); ++i) {
    sxy += (xs[i] - mx) * (ys[i] - my);
    sxx += (xs[i] - mx) * (xs[i] - mx);
  }
  const double slope = sxy / sxx;  // dB per second
  return -60.0 / slope;
}

RoomImpulseResponse delta_rir() {
  RoomImpulseResponse r;
  r.samples.assign(16000, 0.0);
  r.samples[0] = 1.0;
  r.sample_rate = 16000;
  r.t60 = 0.001;
  return r;
}

}  // namespace

TEST_CASE("rir decay matches the target T60 within 10 percent") {
  for (double t60 : {0.2, 0.4, 0.5, 0.6, 0.8}) {
    ReverbSpec spec;
    spec.t60 = t60;
    spec.seed = 11;
    spec.rir_length_s = std::max(1.0, 1.5 * t60);
    const auto rir = rir_generate(spec);
    const double est = schroeder_t60(rir);
    CHECK(std::abs(est - t60) / t60 <= 0.10);
  }
}

TEST_CASE("a very short T60 concentrates energy at the head") {
  ReverbSpec spec;
  spec.t60 = 0.01;
  spec.seed = 3;
  spec.rir_length_s = 1.0;
  const auto rir = rir_generate(spec);
  double head = 0.0, total = 0.0;
  for (size_t i = 0; i < rir.samples.size(); ++i) {
    const double e = rir.samples[i] * rir.samples[i];
    total += e;
    if (i < 160) head += e;  // first 10 ms
  }
  CHECK(head / total >= 0.99);
}

TEST_CASE("rir generation is deterministic in the seed") {
  ReverbSpec spec;
  spec.t60 = 0.5;
  spec.seed = 77;
  const auto a = rir_generate(spec);
  const auto b = rir_generate(spec);
  CHECK(a.samples == b.samples);
  spec.seed = 78;
  CHECK(rir_generate(spec).samples != a.samples);
}

TEST_CASE("rir_generate validates the spec") {
  ReverbSpec spec;
  spec.t60 = -1.0;
  CHECK_THROWS_AS(rir_generate(spec), std::invalid_argument);
  spec.t60 = 0.8;
  spec.rir_length_s = 0.2;
  CHECK_THROWS_AS(rir_generate(spec), std::invalid_argument);
}

TEST_CASE("split_early_late partitions exactly") {
  ReverbSpec spec;
  spec.t60 = 0.4;
  spec.seed = 5;
  const auto rir = rir_generate(spec);

  const auto [early, late] = split_early_late(rir, 50.0);
  CHECK(early.early_late_boundary == 800);  // 50 ms at 16 kHz
  REQUIRE(early.samples.size() == rir.samples.size());
  for (size_t i = 0; i < rir.samples.size(); ++i)
    CHECK(early.samples[i] + late.samples[i] == rir.samples[i]);

  const auto [e0, l0] = split_early_late(rir, 0.0);
  for (double v : e0.samples) CHECK(v == 0.0);
  CHECK(l0.samples == rir.samples);

  CHECK_THROWS_AS(split_early_late(rir, 1e6), std::invalid_argument);
}

TEST_CASE("apply_reverb with a delta is the identity") {
  const auto sig = testutil::speech_like(1, 1.0);
  const auto out = apply_reverb(sig, delta_rir(), std::nullopt, 0);
  REQUIRE(out.signal.samples.size() == sig.samples.size());
  for (size_t i = 0; i < sig.samples.size(); ++i)
    CHECK(out.signal.samples[i] == doctest::Approx(sig.samples[i]).epsilon(1e-12));
  CHECK(out.scale == 1.0);
}

TEST_CASE("apply_reverb with a delayed delta shifts the signal") {
  const auto sig = testutil::speech_like(2, 1.0);
  RoomImpulseResponse r = delta_rir();
  r.samples[0] = 0.0;
  r.samples[100] = 1.0;
  const auto out = apply_reverb(sig, r, std::nullopt, 0);
  for (size_t i = 100; i < sig.samples.size(); ++i)
    CHECK(out.signal.samples[i] == doctest::Approx(sig.samples[i - 100]).epsilon(1e-12));
}

TEST_CASE("apply_reverb hits the requested SNR exactly") {
  const auto sig = testutil::speech_like(3, 1.0);
  ReverbSpec spec;
  spec.t60 = 0.4;
  spec.seed = 9;
  const auto rir = rir_generate(spec);
  const auto noisy = apply_reverb(sig, rir, 20.0, 4242);
  const auto clean = apply_reverb(sig, rir, std::nullopt, 0);
  REQUIRE(noisy.signal.samples.size() == clean.signal.samples.size());
  double ps = 0.0, pn = 0.0;
  for (size_t i = 0; i < clean.signal.samples.size(); ++i) {
    const double c = clean.signal.samples[i] * clean.scale / noisy.scale;
    ps += c * c;
    const double d = noisy.signal.samples[i] - c;
    pn += d * d;
  }
  CHECK(10.0 * std::log10(ps / pn) == doctest::Approx(20.0).epsilon(0.005));
}

TEST_CASE("apply_reverb is linear in the clean signal") {
  ReverbSpec spec;
  spec.t60 = 0.3;
  spec.seed = 21;
  const auto rir = rir_generate(spec);
  const auto a = testutil::speech_like(4, 1.0);
  const auto b = testutil::speech_like(5, 1.0);
  AudioSignal mix{std::vector<double>(a.samples.size()), 16000};
  for (size_t i = 0; i < mix.samples.size(); ++i)
    mix.samples[i] = 0.3 * a.samples[i] + 0.6 * b.samples[i];
  const auto ra = apply_reverb(a, rir, std::nullopt, 0);
  const auto rb = apply_reverb(b, rir, std::nullopt, 0);
  const auto rm = apply_reverb(mix, rir, std::nullopt, 0);
  REQUIRE(ra.scale == 1.0);
  REQUIRE(rb.scale == 1.0);
  REQUIRE(rm.scale == 1.0);
  for (size_t i = 0; i < mix.samples.size(); ++i)
    CHECK(rm.signal.samples[i] ==
          doctest::Approx(0.3 * ra.signal.samples[i] + 0.6 * rb.signal.samples[i])
              .epsilon(1e-9));
}

TEST_CASE("apply_reverb rejects sample-rate mismatches") {
  AudioSignal sig{std::vector<double>(100, 0.1), 8000};
  CHECK_THROWS_AS(apply_reverb(sig, delta_rir(), std::nullopt, 0), std::invalid_argument);
}

TEST_CASE("envelope model probe is exact for a delta RIR") {
  const auto proto = qmf::design_prototype();
  std::vector<double> s(16000);
  for (size_t i = 0; i < s.size(); ++i) {
    const double t = static_cast<double>(i) / 16000.0;
    s[i] = (1.0 + 0.5 * std::cos(2.0 * kPi * 3.0 * t)) * std::cos(2.0 * kPi * 1187.5 * t);
  }
  AudioSignal sig{s, 16000};
  CHECK(envelope_model_error(sig, delta_rir(), 9, proto) <= 1e-6);
}

TEST_CASE("envelope model degrades from narrowband to broadband") {
  const auto proto = qmf::design_prototype();
  const int band = 9;
  const double fc = (band + 0.5) / 64.0 * 8000.0;

  double nb_sum = 0.0, bb_sum = 0.0;
  const int trials = 8;
  for (int i = 0; i < trials; ++i) {
    ReverbSpec spec;
    spec.t60 = 0.3;
    spec.seed = 600 + static_cast<uint64_t>(i);
    const auto rir = rir_generate(spec);

    std::vector<double> nb(16000);
    std::mt19937_64 rng(static_cast<uint64_t>(i));
    std::uniform_real_distribution<double> uni(2.0, 6.0);
    const double fm = uni(rng);
    for (size_t j = 0; j < nb.size(); ++j) {
      const double t = static_cast<double>(j) / 16000.0;
      nb[j] = (1.0 + 0.7 * std::cos(2.0 * kPi * fm * t)) * std::cos(2.0 * kPi * fc * t);
    }
    nb_sum += envelope_model_error(AudioSignal{nb, 16000}, rir, band, proto);

    auto wide = testutil::gaussian_vector(16000, 800 + static_cast<uint64_t>(i));
    for (size_t j = 0; j < wide.size(); ++j) {
      const double t = static_cast<double>(j) / 16000.0;
      wide[j] *= (1.0 + 0.7 * std::cos(2.0 * kPi * 3.0 * t));
    }
    bb_sum += envelope_model_error(AudioSignal{wide, 16000}, rir, band, proto);
  }
  CHECK(bb_sum / trials > nb_sum / trials);
}

TEST_CASE("early plus late envelopes approximate the full-reverb envelope") {
  // additivity trend: the split-RIR envelope error stays near the full-RIR
  // error, far below a shuffled-baseline mismatch
  const auto proto = qmf::design_prototype();
  const int band = 9;
  const double fc = (band + 0.5) / 64.0 * 8000.0;
  std::vector<double> s(16000);
  for (size_t j = 0; j < s.size(); ++j) {
    const double t = static_cast<double>(j) / 16000.0;
    s[j] = (1.0 + 0.6 * std::cos(2.0 * kPi * 4.0 * t)) * std::cos(2.0 * kPi * fc * t);
  }
  AudioSignal sig{s, 16000};

  ReverbSpec spec;
  spec.t60 = 0.4;
  spec.seed = 31;
  const auto rir = rir_generate(spec);
  const auto [early, late] = split_early_late(rir, 50.0);

  const auto full = apply_reverb(sig, rir, std::nullopt, 0);
  const auto r_e = apply_reverb(sig, early, std::nullopt, 0);
  const auto r_l = apply_reverb(sig, late, std::nullopt, 0);

  const auto f_full = qmf::analyze(full.signal.samples, proto);
  const auto f_e = qmf::analyze(r_e.signal.samples, proto);
  const auto f_l = qmf::analyze(r_l.signal.samples, proto);
  const auto env_full = sigproc::hilbert_envelope(f_full.bands.row(band));
  const auto env_e = sigproc::hilbert_envelope(f_e.bands.row(band));
  const auto env_l = sigproc::hilbert_envelope(f_l.bands.row(band));

  double num = 0.0, den = 0.0;
  for (size_t i = 0; i < env_full.size(); ++i) {
    const double d = env_full[i] - (env_e[i] + env_l[i]);
    num += d * d;
    den += env_full[i] * env_full[i];
  }
  CHECK(std::sqrt(num / den) < 0.5);
}

TEST_CASE("corpus builder writes deterministic pairs and a manifest") {
  testutil::TempDir tmp("corpus");
  const std::string clean_dir = tmp.path() + "/clean";
  std::filesystem::create_directories(clean_dir);
  for (int i = 0; i < 4; ++i) {
    const auto sig = testutil::speech_like(static_cast<uint64_t>(i), 1.0);
    io::write_wav(clean_dir + "/utt" + std::to_string(i) + ".wav", sig);
  }

  std::vector<ReverbSpec> specs;
  for (double t60 : {0.2, 0.5, 0.8}) {
    ReverbSpec s;
    s.t60 = t60;
    s.snr_db = 20.0;
    s.seed = 1;
    specs.push_back(s);
  }

  const std::string out1 = tmp.path() + "/out1";
  const std::string out2 = tmp.path() + "/out2";
  const auto entries1 = build_corpus(clean_dir, specs, out1);
  const auto entries2 = build_corpus(clean_dir, specs, out2);
  CHECK(entries1.size() == 12);  // 4 files x 3 specs

  const auto manifest = read_manifest(out1 + "/manifest.tsv");
  REQUIRE(manifest.size() == 12);
  for (const auto& e : manifest) {
    CHECK((e.t60 == 0.2 || e.t60 == 0.5 || e.t60 == 0.8));
    CHECK(e.snr_db == 20.0);
  }

  // reruns with the same seeds produce byte-identical reverberant files
  for (size_t i = 0; i < entries1.size(); ++i) {
    std::ifstream f1(entries1[i].reverb_path, std::ios::binary);
    std::ifstream f2(entries2[i].reverb_path, std::ios::binary);
    const std::string b1((std::istreambuf_iterator<char>(f1)), {});
    const std::string b2((std::istreambuf_iterator<char>(f2)), {});
    CHECK(b1 == b2);
    CHECK(!b1.empty());
  }
}
