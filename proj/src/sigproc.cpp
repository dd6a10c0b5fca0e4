#include "derev/sigproc.h"

#include <algorithm>
#include <cmath>

namespace derev::sigproc {

namespace {

bool is_pow2(size_t n) { return n != 0 && (n & (n - 1)) == 0; }

size_t next_pow2(size_t n) {
  size_t p = 1;
  while (p < n) p <<= 1;
  return p;
}

// Iterative radix-2 Cooley-Tukey, in place.
void fft_pow2(std::vector<std::complex<double>>& a, bool inverse) {
  const size_t n = a.size();
  for (size_t i = 1, j = 0; i < n; ++i) {
    size_t bit = n >> 1;
    for (; j & bit; bit >>= 1) j ^= bit;
    j ^= bit;
    if (i < j) std::swap(a[i], a[j]);
  }
  for (size_t len = 2; len <= n; len <<= 1) {
    const double ang = 2.0 * kPi / static_cast<double>(len) * (inverse ? 1.0 : -1.0);
    const std::complex<double> wstep(std::cos(ang), std::sin(ang));
    for (size_t i = 0; i < n; i += len) {
      std::complex<double> w(1.0, 0.0);
      for (size_t k = 0; k < len / 2; ++k) {
        const auto u = a[i + k];
        const auto v = a[i + k + len / 2] * w;
        a[i + k] = u + v;
        a[i + k + len / 2] = u - v;
        w *= wstep;
      }
    }
  }
  if (inverse) {
    const double inv = 1.0 / static_cast<double>(n);
    for (auto& x : a) x *= inv;
  }
}

// Bluestein chirp-z transform: arbitrary-length DFT via a power-of-two FFT.
void fft_bluestein(std::vector<std::complex<double>>& a, bool inverse) {
  const size_t n = a.size();
  const size_t m = next_pow2(2 * n - 1);
  const double sign = inverse ? 1.0 : -1.0;

  std::vector<std::complex<double>> chirp(n);
  for (size_t k = 0; k < n; ++k) {
    // k^2 mod 2n keeps the phase argument small for large n
    const double ang = kPi * static_cast<double>((k * k) % (2 * n)) / static_cast<double>(n);
    chirp[k] = std::complex<double>(std::cos(ang), sign * std::sin(ang));
  }

  std::vector<std::complex<double>> x(m, {0.0, 0.0});
  std::vector<std::complex<double>> y(m, {0.0, 0.0});
  for (size_t k = 0; k < n; ++k) x[k] = a[k] * chirp[k];
  for (size_t k = 0; k < n; ++k) y[k] = std::conj(chirp[k]);
  for (size_t k = 1; k < n; ++k) y[m - k] = std::conj(chirp[k]);

  fft_pow2(x, false);
  fft_pow2(y, false);
  for (size_t k = 0; k < m; ++k) x[k] *= y[k];
  fft_pow2(x, true);

  for (size_t k = 0; k < n; ++k) a[k] = x[k] * chirp[k];
  if (inverse) {
    const double invn = 1.0 / static_cast<double>(n);
    for (auto& v : a) v *= invn;
  }
}

}  // namespace

void fft(std::vector<std::complex<double>>& a, bool inverse) {
  if (a.empty()) throw std::invalid_argument("invalid-argument: fft of empty vector");
  if (a.size() == 1) return;
  if (is_pow2(a.size()))
    fft_pow2(a, inverse);
  else
    fft_bluestein(a, inverse);
}

// DCT-II via a single length-N FFT on the even/odd permuted sequence
// (Makhoul's decimation). Orthonormal scaling.
std::vector<double> dct_ii(std::span<const double> x) {
  const size_t n = x.size();
  if (n == 0) throw std::invalid_argument("invalid-argument: dct_ii of empty vector");
  if (n == 1) return {x[0]};

  std::vector<std::complex<double>> v(n);
  for (size_t i = 0; i < (n + 1) / 2; ++i) v[i] = x[2 * i];
  for (size_t i = 0; i < n / 2; ++i) v[n - 1 - i] = x[2 * i + 1];
  fft(v, false);

  std::vector<double> out(n);
  const double s0 = std::sqrt(1.0 / static_cast<double>(n));
  const double s = std::sqrt(2.0 / static_cast<double>(n));
  for (size_t k = 0; k < n; ++k) {
    const double ang = -kPi * static_cast<double>(k) / (2.0 * static_cast<double>(n));
    const std::complex<double> w(std::cos(ang), std::sin(ang));
    const double ck = (w * v[k]).real();
    out[k] = ck * (k == 0 ? s0 : s);
  }
  return out;
}

std::vector<double> idct_ii(std::span<const double> c) {
  const size_t n = c.size();
  if (n == 0) throw std::invalid_argument("invalid-argument: idct_ii of empty vector");
  if (n == 1) return {c[0]};

  // invert the orthonormal scaling, then the phase twist, then the FFT and
  // the even/odd permutation
  const double s0 = std::sqrt(1.0 / static_cast<double>(n));
  const double s = std::sqrt(2.0 / static_cast<double>(n));
  std::vector<std::complex<double>> v(n);
  for (size_t k = 0; k < n; ++k) {
    const double ck = c[k] / (k == 0 ? s0 : s);
    const double cnk = (k == 0) ? 0.0 : c[n - k] / s;
    const double ang = kPi * static_cast<double>(k) / (2.0 * static_cast<double>(n));
    const std::complex<double> w(std::cos(ang), std::sin(ang));
    v[k] = w * std::complex<double>(ck, -cnk);
  }
  fft(v, true);

  std::vector<double> out(n);
  for (size_t i = 0; i < (n + 1) / 2; ++i) out[2 * i] = v[i].real();
  for (size_t i = 0; i < n / 2; ++i) out[2 * i + 1] = v[n - 1 - i].real();
  return out;
}

std::vector<double> convolve(std::span<const double> a, std::span<const double> b) {
  if (a.empty() || b.empty())
    throw std::invalid_argument("invalid-argument: convolve with empty operand");
  const size_t out_len = a.size() + b.size() - 1;

  // direct sum for small products, FFT overlap otherwise
  if (a.size() * b.size() <= 1u << 16) {
    std::vector<double> out(out_len, 0.0);
    for (size_t i = 0; i < a.size(); ++i) {
      const double ai = a[i];
      for (size_t j = 0; j < b.size(); ++j) out[i + j] += ai * b[j];
    }
    return out;
  }

  const size_t m = next_pow2(out_len);
  std::vector<std::complex<double>> fa(m, {0.0, 0.0});
  std::vector<std::complex<double>> fb(m, {0.0, 0.0});
  for (size_t i = 0; i < a.size(); ++i) fa[i] = a[i];
  for (size_t i = 0; i < b.size(); ++i) fb[i] = b[i];
  fft(fa, false);
  fft(fb, false);
  for (size_t i = 0; i < m; ++i) fa[i] *= fb[i];
  fft(fa, true);

  std::vector<double> out(out_len);
  for (size_t i = 0; i < out_len; ++i) out[i] = fa[i].real();
  return out;
}

std::vector<double> hilbert_envelope(std::span<const double> x) {
  const size_t n = x.size();
  if (n < 2) throw std::invalid_argument("invalid-argument: hilbert_envelope needs length >= 2");

  std::vector<std::complex<double>> z(n);
  for (size_t i = 0; i < n; ++i) z[i] = x[i];
  fft(z, false);

  // one-sided spectrum: keep DC (and Nyquist for even n), double positives,
  // zero negatives
  const size_t half = n / 2;
  for (size_t k = 1; k < (n + 1) / 2; ++k) z[k] *= 2.0;
  if (n % 2 == 0) {
    // Nyquist bin kept as is
  }
  for (size_t k = half + 1; k < n; ++k) z[k] = {0.0, 0.0};
  fft(z, true);

  std::vector<double> env(n);
  for (size_t i = 0; i < n; ++i) env[i] = std::norm(z[i]);
  return env;
}

std::vector<std::vector<double>> segment(const AudioSignal& signal, const SegmentGrid& grid) {
  if (signal.samples.empty())
    throw std::invalid_argument("invalid-argument: segment of empty signal");
  if (grid.segment_len <= 0)
    throw std::invalid_argument("invalid-argument: segment_len must be positive");

  const size_t len = static_cast<size_t>(grid.segment_len);
  const size_t count = (signal.samples.size() + len - 1) / len;
  std::vector<std::vector<double>> out(count);
  for (size_t s = 0; s < count; ++s) {
    out[s].assign(len, 0.0);
    const size_t begin = s * len;
    const size_t take = std::min(len, signal.samples.size() - begin);
    std::copy_n(signal.samples.begin() + static_cast<ptrdiff_t>(begin), take, out[s].begin());
  }
  return out;
}

std::vector<double> desegment(const std::vector<std::vector<double>>& segments,
                              size_t original_len) {
  std::vector<double> out;
  for (const auto& s : segments) out.insert(out.end(), s.begin(), s.end());
  if (original_len > out.size())
    throw std::invalid_argument("invalid-argument: original_len exceeds concatenated length");
  out.resize(original_len);
  return out;
}

}  // namespace derev::sigproc
