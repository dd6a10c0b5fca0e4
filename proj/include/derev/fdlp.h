#pragma once

#include <span>
#include <vector>

#include "derev/common.h"
#include "derev/qmf.h"

namespace derev::fdlp {

struct FdlpConfig {
  // autoregressive model order per band per 1-second segment
  int lp_order = 30;
  // envelope floor, relative to the segment mean power
  double floor_rel = 1e-12;
};

// Per-segment envelope/carrier stack. log_env holds the natural-log envelope;
// exp(log_env) .* carrier^2 reproduces the sub-band signal power exactly.
struct EnvelopeCarrier {
  Matrix<double> log_env;
  Matrix<double> carrier;
  std::vector<bool> degenerate;  // per band
};

struct BurgResult {
  std::vector<double> coeffs;      // b_0 .. b_m, b_0 = 1
  double gain = 0.0;               // final forward/backward prediction-error power
  std::vector<double> reflection;  // k_1 .. k_m, each in (-1, 1)
};

// Burg's method: minimizes combined forward/backward prediction error via
// reflection coefficients, so the AR model is always stable.
BurgResult burg_lp(std::span<const double> x, int order);

// AR temporal envelope of a sub-band segment: Burg fit to the orthonormal
// DCT of the segment, evaluated on the half circle, energy-matched to the
// Hilbert envelope. Strictly positive. Returns the degenerate flag.
std::vector<double> fdlp_envelope(std::span<const double> band_segment, const FdlpConfig& cfg,
                                  bool* degenerate = nullptr);

// c[n] = x[n] / sqrt(e[n]); exact inverse of remodulate.
std::vector<double> carrier(std::span<const double> band_segment,
                            std::span<const double> envelope);

// x[n] = sqrt(e[n]) * c[n]
std::vector<double> remodulate(std::span<const double> envelope,
                               std::span<const double> carrier);

// analyze -> per-band envelope/carrier for one fixed-length segment
EnvelopeCarrier decompose(std::span<const double> segment, const qmf::QmfPrototype& proto,
                          const FdlpConfig& cfg);

// remodulate all bands -> synthesize the segment back
std::vector<double> reconstruct(const EnvelopeCarrier& ec, const qmf::QmfPrototype& proto);

}  // namespace derev::fdlp
