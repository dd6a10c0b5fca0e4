#pragma once

#include <array>
#include <span>
#include <vector>

#include "derev/common.h"

namespace derev::qmf {

inline constexpr int kNumBands = 64;
inline constexpr int kTreeDepth = 6;
inline constexpr int kPrototypeTaps = 32;

// Analysis/synthesis group delay of the full tree at the input rate:
// (taps - 1) * (2^depth - 1) samples.
inline constexpr int kTreeDelay = (kPrototypeTaps - 1) * ((1 << kTreeDepth) - 1);

// Alias-cancelling filter pair: h1 mirrors h0 at quadrature. Analysis and
// synthesis both run the pair with a sqrt(2) stage gain, so every tree level
// preserves energy, aliasing cancels, and the residual distortion is the
// power-complementarity ripple of h0.
struct QmfPrototype {
  std::array<double, kPrototypeTaps> h0;
  std::array<double, kPrototypeTaps> h1;
  std::array<double, kPrototypeTaps> f0;
  std::array<double, kPrototypeTaps> f1;
};

// Critically sampled sub-band matrix: row q holds band q, ascending in center
// frequency; rows * cols equals the analyzed segment length.
struct SubbandFrame {
  Matrix<double> bands;
  int sample_rate_subband = 250;
};

QmfPrototype design_prototype();

// 6-level binary split (filter, decimate by 2) with per-segment periodic
// extension; leaf order is unscrambled to ascending frequency.
SubbandFrame analyze(std::span<const double> segment, const QmfPrototype& proto);

// Upsample-filter-sum tree mirroring analyze(); compensates the known tree
// delay so the output is aligned with the analyzed segment.
std::vector<double> synthesize(const SubbandFrame& frame, const QmfPrototype& proto);

}  // namespace derev::qmf
