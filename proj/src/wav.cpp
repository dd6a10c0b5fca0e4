#include "derev/wav.h"

#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <random>

static_assert(std::endian::native == std::endian::little,
              "WAV I/O assumes a little-endian host");

namespace derev::io {

namespace {

struct ChunkHeader {
  char id[4];
  uint32_t size;
};

uint32_t rd_u32(std::istream& in) {
  uint32_t v = 0;
  in.read(reinterpret_cast<char*>(&v), 4);
  return v;
}

uint16_t rd_u16(std::istream& in) {
  uint16_t v = 0;
  in.read(reinterpret_cast<char*>(&v), 2);
  return v;
}

void wr(std::ostream& out, const void* p, size_t n) {
  out.write(reinterpret_cast<const char*>(p), static_cast<std::streamsize>(n));
}

void wr_u32(std::ostream& out, uint32_t v) { wr(out, &v, 4); }
void wr_u16(std::ostream& out, uint16_t v) { wr(out, &v, 2); }

}  // namespace

AudioSignal read_wav(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("missing-file: cannot open " + path);

  char riff[4], wave[4];
  in.read(riff, 4);
  const uint32_t riff_size = rd_u32(in);
  (void)riff_size;
  in.read(wave, 4);
  if (!in || std::memcmp(riff, "RIFF", 4) != 0 || std::memcmp(wave, "WAVE", 4) != 0)
    throw std::runtime_error("bad-format: not a RIFF/WAVE file: " + path);

  uint16_t audio_format = 0, channels = 0, bits = 0;
  uint32_t sample_rate = 0;
  std::vector<char> data;
  bool have_fmt = false, have_data = false;

  while (in && !(have_fmt && have_data)) {
    char id[4];
    in.read(id, 4);
    const uint32_t size = rd_u32(in);
    if (!in) break;
    if (std::memcmp(id, "fmt ", 4) == 0) {
      audio_format = rd_u16(in);
      channels = rd_u16(in);
      sample_rate = rd_u32(in);
      rd_u32(in);  // byte rate
      rd_u16(in);  // block align
      bits = rd_u16(in);
      if (size > 16) in.seekg(size - 16, std::ios::cur);
      have_fmt = true;
    } else if (std::memcmp(id, "data", 4) == 0) {
      data.resize(size);
      in.read(data.data(), size);
      have_data = true;
    } else {
      in.seekg(size + (size % 2), std::ios::cur);
    }
  }
  if (!have_fmt || !have_data)
    throw std::runtime_error("bad-format: missing fmt/data chunk: " + path);
  if (channels != 1)
    throw std::runtime_error("unsupported-format: expected mono, got " +
                             std::to_string(channels) + " channels: " + path);
  if (sample_rate != 16000)
    throw std::runtime_error("unsupported-format: expected 16000 Hz, got " +
                             std::to_string(sample_rate) + " Hz: " + path);

  AudioSignal sig;
  sig.sample_rate = static_cast<int>(sample_rate);
  if (audio_format == 1 && bits == 16) {
    const size_t n = data.size() / 2;
    sig.samples.resize(n);
    const int16_t* p = reinterpret_cast<const int16_t*>(data.data());
    for (size_t i = 0; i < n; ++i) sig.samples[i] = static_cast<double>(p[i]) / 32768.0;
  } else if (audio_format == 3 && bits == 32) {
    const size_t n = data.size() / 4;
    sig.samples.resize(n);
    const float* p = reinterpret_cast<const float*>(data.data());
    for (size_t i = 0; i < n; ++i) sig.samples[i] = static_cast<double>(p[i]);
  } else {
    throw std::runtime_error("unsupported-format: only PCM16 or float32 WAV accepted: " + path);
  }
  for (double v : sig.samples)
    if (!std::isfinite(v)) throw std::runtime_error("bad-format: non-finite sample in " + path);
  return sig;
}

void write_wav(const std::string& path, const AudioSignal& signal, WavFormat format) {
  if (signal.sample_rate <= 0)
    throw std::invalid_argument("invalid-argument: sample_rate must be positive");
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("missing-file: cannot create " + path);

  const uint32_t n = static_cast<uint32_t>(signal.samples.size());
  const bool f32 = format == WavFormat::kFloat32;
  const uint16_t bits = f32 ? 32 : 16;
  const uint32_t bytes = n * (bits / 8);
  const uint32_t fact = f32 ? 12 : 0;

  wr(out, "RIFF", 4);
  wr_u32(out, 4 + 24 + fact + 8 + bytes);
  wr(out, "WAVE", 4);
  wr(out, "fmt ", 4);
  wr_u32(out, 16);
  wr_u16(out, f32 ? 3 : 1);
  wr_u16(out, 1);
  wr_u32(out, static_cast<uint32_t>(signal.sample_rate));
  wr_u32(out, static_cast<uint32_t>(signal.sample_rate) * (bits / 8));
  wr_u16(out, bits / 8);
  wr_u16(out, bits);
  if (f32) {
    wr(out, "fact", 4);
    wr_u32(out, 4);
    wr_u32(out, n);
  }
  wr(out, "data", 4);
  wr_u32(out, bytes);

  if (f32) {
    std::vector<float> buf(signal.samples.begin(), signal.samples.end());
    wr(out, buf.data(), buf.size() * 4);
  } else {
    // TPDF dither of one LSB before rounding, fixed seed for reproducibility;
    // samples already on a quantization level pass through untouched so that
    // PCM16 -> PCM16 round trips are bit-preserving
    std::mt19937 rng(0x5eed);
    std::uniform_real_distribution<double> uni(-0.5, 0.5);
    std::vector<int16_t> buf(n);
    for (uint32_t i = 0; i < n; ++i) {
      double v = signal.samples[i] * 32768.0;
      if (v != std::round(v)) v += uni(rng) + uni(rng);
      v = std::clamp(std::round(v), -32768.0, 32767.0);
      buf[i] = static_cast<int16_t>(v);
    }
    wr(out, buf.data(), buf.size() * 2);
  }
  if (!out) throw std::runtime_error("io-error: short write to " + path);
}

}  // namespace derev::io
