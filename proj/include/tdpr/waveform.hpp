#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "tdpr/error.hpp"

namespace tdpr {

/// Mono sample buffer. Amplitudes are nominally in [-1, 1].
struct Waveform {
  std::vector<double> samples;
  int sample_rate_hz = 0;

  std::size_t size() const { return samples.size(); }
  bool empty() const { return samples.empty(); }
  double duration_s() const {
    return sample_rate_hz > 0 ? static_cast<double>(samples.size()) / sample_rate_hz : 0.0;
  }
};

inline bool all_finite(std::span<const double> x) {
  return std::all_of(x.begin(), x.end(), [](double v) { return std::isfinite(v); });
}

inline void validate(const Waveform& w, std::string_view what = "waveform") {
  if (w.sample_rate_hz <= 0) {
    throw Error(std::string(what) + ": sample rate must be positive");
  }
  if (!all_finite(w.samples)) {
    throw Error(std::string(what) + ": contains non-finite samples");
  }
}

inline double peak_abs(std::span<const double> x) {
  double peak = 0.0;
  for (double v : x) peak = std::max(peak, std::abs(v));
  return peak;
}

/// Scales the waveform so its peak absolute sample sits at `target_dbfs`.
/// Silent input is returned unchanged with a warning.
inline Waveform peak_normalize(const Waveform& w, double target_dbfs = -1.0) {
  if (!(target_dbfs <= 0.0)) throw Error("peak_normalize: target must be <= 0 dBFS");
  Waveform out = w;
  const double peak = peak_abs(w.samples);
  if (peak == 0.0) {
    warn("peak_normalize: all-zero input left unchanged");
    return out;
  }
  const double gain = std::pow(10.0, target_dbfs / 20.0) / peak;
  for (double& v : out.samples) v *= gain;
  return out;
}

/// Copies `[offset_s, offset_s + duration_s)` out of `w`, truncated at the end.
inline Waveform slice(const Waveform& w, double offset_s, double duration_s) {
  if (offset_s < 0.0 || duration_s <= 0.0) throw Error("slice: invalid range");
  const auto begin = std::min(w.samples.size(),
                              static_cast<std::size_t>(std::llround(offset_s * w.sample_rate_hz)));
  const auto len = static_cast<std::size_t>(std::llround(duration_s * w.sample_rate_hz));
  const auto end = std::min(w.samples.size(), begin + len);
  return Waveform{{w.samples.begin() + begin, w.samples.begin() + end}, w.sample_rate_hz};
}

}  // namespace tdpr
