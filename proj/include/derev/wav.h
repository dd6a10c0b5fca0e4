#pragma once

#include <string>

#include "derev/common.h"

namespace derev::io {

enum class WavFormat { kPcm16, kFloat32 };

// Reads a mono RIFF WAV (16-bit PCM or 32-bit float). Anything else raises a
// runtime_error with an "unsupported-format:" or "bad-format:" prefix.
AudioSignal read_wav(const std::string& path);

// Float output preserves sample values exactly; PCM16 uses TPDF-dithered
// rounding (deterministic).
void write_wav(const std::string& path, const AudioSignal& signal,
               WavFormat format = WavFormat::kFloat32);

}  // namespace derev::io
