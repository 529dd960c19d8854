#pragma once

#include <cmath>
#include <cstddef>
#include <numbers>
#include <numeric>
#include <vector>

#include "tdpr/error.hpp"
#include "tdpr/waveform.hpp"

namespace tdpr {

namespace detail {

// Kaiser-windowed sinc: 64 taps per polyphase branch, beta for ~65 dB stopband.
constexpr int kResampleZeroCrossings = 32;
constexpr double kResampleStopbandDb = 65.0;

inline double kaiser_beta(double atten_db) {
  if (atten_db > 50.0) return 0.1102 * (atten_db - 8.7);
  if (atten_db >= 21.0) return 0.5842 * std::pow(atten_db - 21.0, 0.4) + 0.07886 * (atten_db - 21.0);
  return 0.0;
}

/// One polyphase branch: y = sum_k taps[k] * x[q - first_j - k].
struct PolyphaseBranch {
  long first_j = 0;
  std::vector<double> taps;
};

inline std::vector<PolyphaseBranch> design_polyphase(long up, long down) {
  const long ratio = std::max(up, down);
  const double half = static_cast<double>(kResampleZeroCrossings) * ratio;
  const double beta = kaiser_beta(kResampleStopbandDb);
  const double i0_beta = std::cyl_bessel_i(0.0, beta);
  // Put the stopband edge at the lower Nyquist rate rather than centering the
  // transition on it, so nothing above Nyquist folds back at -6 dB.
  const double transition = 2.0 * (kResampleStopbandDb - 7.95) / (14.36 * 2.0 * kResampleZeroCrossings);
  const double cutoff = 0.5 / ratio * (1.0 - transition / 2.0);  // cycles per high-rate sample

  auto kernel = [&](double t) {
    const double x = t / half;
    if (std::abs(x) > 1.0) return 0.0;
    const double arg = 2.0 * cutoff * t;
    const double sinc = arg == 0.0 ? 1.0 : std::sin(std::numbers::pi * arg) / (std::numbers::pi * arg);
    const double win = std::cyl_bessel_i(0.0, beta * std::sqrt(std::max(0.0, 1.0 - x * x))) / i0_beta;
    return sinc * win;
  };

  std::vector<PolyphaseBranch> branches(static_cast<std::size_t>(up));
  for (long phase = 0; phase < up; ++phase) {
    auto& br = branches[static_cast<std::size_t>(phase)];
    // taps h(phase + j * up) for |phase + j * up| <= half
    const long j_lo = static_cast<long>(std::ceil((-half - phase) / static_cast<double>(up)));
    const long j_hi = static_cast<long>(std::floor((half - phase) / static_cast<double>(up)));
    br.first_j = j_lo;
    double sum = 0.0;
    for (long j = j_lo; j <= j_hi; ++j) {
      br.taps.push_back(kernel(static_cast<double>(phase + j * up)));
      sum += br.taps.back();
    }
    // unit DC gain per branch keeps constant signals exactly constant
    for (double& t : br.taps) t /= sum;
  }
  return branches;
}

}  // namespace detail

/// Rational-ratio polyphase resampling by up/down. Output length is
/// ceil(len * up / down); the kernel is zero-phase so samples stay aligned.
inline std::vector<double> resample_poly(std::span<const double> x, long up, long down) {
  if (up <= 0 || down <= 0) throw Error("resample_poly: factors must be positive");
  const long g = std::gcd(up, down);
  up /= g;
  down /= g;
  if (up == 1 && down == 1) return {x.begin(), x.end()};
  const auto n_in = static_cast<long>(x.size());
  const long n_out = (n_in * up + down - 1) / down;
  const auto branches = detail::design_polyphase(up, down);
  std::vector<double> y(static_cast<std::size_t>(n_out), 0.0);
  for (long n = 0; n < n_out; ++n) {
    const long t0 = n * down;
    const long q = t0 / up;
    const auto& br = branches[static_cast<std::size_t>(t0 % up)];
    double acc = 0.0;
    const auto ntaps = static_cast<long>(br.taps.size());
    for (long k = 0; k < ntaps; ++k) {
      const long i = q - (br.first_j + k);
      if (i >= 0 && i < n_in) acc += br.taps[static_cast<std::size_t>(k)] * x[static_cast<std::size_t>(i)];
    }
    y[static_cast<std::size_t>(n)] = acc;
  }
  return y;
}

/// Resamples to `target_rate_hz`. Equal rates return the input unchanged.
inline Waveform resample(const Waveform& w, int target_rate_hz) {
  if (target_rate_hz <= 0) throw Error("resample: target rate must be positive");
  if (w.sample_rate_hz <= 0) throw Error("resample: source rate must be positive");
  if (target_rate_hz == w.sample_rate_hz) return w;
  return Waveform{resample_poly(w.samples, target_rate_hz, w.sample_rate_hz), target_rate_hz};
}

}  // namespace tdpr
