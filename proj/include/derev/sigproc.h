#pragma once

#include <complex>
#include <span>
#include <vector>

#include "derev/common.h"

namespace derev::sigproc {

inline constexpr int kDefaultSampleRate = 16000;

// Non-overlapping fixed-length segmentation; the final partial segment is
// zero-padded.
struct SegmentGrid {
  int segment_len = 16000;
};

// In-place complex FFT for arbitrary length (radix-2 for powers of two,
// Bluestein otherwise).
void fft(std::vector<std::complex<double>>& a, bool inverse);

// Orthonormal DCT-II and its inverse. Round trip is an identity and the
// transform preserves the l2 norm.
std::vector<double> dct_ii(std::span<const double> x);
std::vector<double> idct_ii(std::span<const double> c);

// Full linear convolution, length |a|+|b|-1.
std::vector<double> convolve(std::span<const double> a, std::span<const double> b);

// Squared magnitude of the analytic signal (one-sided spectrum over the whole
// vector). Same length as the input, non-negative.
std::vector<double> hilbert_envelope(std::span<const double> x);

std::vector<std::vector<double>> segment(const AudioSignal& signal, const SegmentGrid& grid);

// Inverse of segment(): concatenates and trims the zero padding.
std::vector<double> desegment(const std::vector<std::vector<double>>& segments,
                              size_t original_len);

}  // namespace derev::sigproc
