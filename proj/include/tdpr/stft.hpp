#pragma once

#include <cmath>
#include <complex>
#include <cstddef>
#include <numbers>
#include <string>
#include <vector>

#include "tdpr/error.hpp"
#include "tdpr/fft.hpp"
#include "tdpr/matrix.hpp"
#include "tdpr/waveform.hpp"

namespace tdpr {

using Complex = std::complex<double>;
using RealMatrix = Matrix<double>;
using ComplexMatrix = Matrix<Complex>;

/// STFT analysis settings. Defaults are the phase-repair settings at 16 kHz.
struct StftParams {
  std::size_t fft_size = 1024;
  std::size_t hop = 256;
  std::size_t win_length = 1024;

  std::size_t bins() const { return fft_size / 2 + 1; }
  std::size_t frames_for(std::size_t signal_length) const { return signal_length / hop + 1; }
  friend bool operator==(const StftParams&, const StftParams&) = default;
};

inline std::string to_string(const StftParams& p) {
  return std::to_string(p.fft_size) + "/" + std::to_string(p.hop) + "/" + std::to_string(p.win_length);
}

inline void validate(const StftParams& p) {
  if (p.hop == 0 || p.win_length == 0 || p.fft_size == 0) {
    throw Error("StftParams: sizes must be positive (" + to_string(p) + ")");
  }
  if (!(p.hop <= p.win_length && p.win_length <= p.fft_size)) {
    throw Error("StftParams: need hop <= win_length <= fft_size (" + to_string(p) + ")");
  }
}

/// Periodic (DFT-even) Hann window of `win_length`, zero-padded and centered
/// to `fft_size`.
inline std::vector<double> analysis_window(const StftParams& p) {
  std::vector<double> w(p.fft_size, 0.0);
  const std::size_t offset = (p.fft_size - p.win_length) / 2;
  for (std::size_t n = 0; n < p.win_length; ++n) {
    const double s = std::sin(std::numbers::pi * static_cast<double>(n) / static_cast<double>(p.win_length));
    w[offset + n] = s * s;
  }
  return w;
}

/// Frames x bins one-sided STFT plus the settings that produced it.
struct ComplexSpectrogram {
  ComplexMatrix data;
  StftParams params;
  int sample_rate_hz = 0;

  std::size_t frames() const { return data.rows(); }
  std::size_t bins() const { return data.cols(); }
};

namespace detail {

// numpy-style "reflect" (edge sample not repeated), folded as often as needed.
inline std::size_t reflect_index(long i, std::size_t len) {
  if (len == 1) return 0;
  const long n = static_cast<long>(len);
  const long period = 2 * (n - 1);
  i %= period;
  if (i < 0) i += period;
  return static_cast<std::size_t>(i < n ? i : period - i);
}

}  // namespace detail

/// Centered STFT: the signal is reflection-padded by fft_size/2 on both sides
/// so frame l is centered on sample l * hop. Frame count is len / hop + 1.
inline ComplexSpectrogram stft(const Waveform& w, const StftParams& p = {}) {
  validate(p);
  if (w.empty()) throw Error("stft: empty waveform");
  const std::size_t len = w.size();
  const std::size_t frames = p.frames_for(len);
  const auto window = analysis_window(p);
  const long pad = static_cast<long>(p.fft_size / 2);

  ComplexSpectrogram out{ComplexMatrix(frames, p.bins()), p, w.sample_rate_hz};
  auto& fft = real_fft_for(p.fft_size);
  std::vector<double> frame(p.fft_size);
  for (std::size_t l = 0; l < frames; ++l) {
    const long start = static_cast<long>(l * p.hop) - pad;
    for (std::size_t n = 0; n < p.fft_size; ++n) {
      const double x = w.samples[detail::reflect_index(start + static_cast<long>(n), len)];
      frame[n] = x * window[n];
    }
    fft.forward(frame, out.data.row(l));
  }
  return out;
}

/// Least-squares inverse of `stft` for a signal of `length` samples:
/// windowed overlap-add normalized by the summed squared window. Padded
/// regions are folded back onto the samples they were reflected from, so
/// this is the exact projection onto consistent spectrograms.
inline Waveform istft(const ComplexSpectrogram& s, std::size_t length) {
  const auto& p = s.params;
  validate(p);
  if (length == 0) throw Error("istft: length must be positive");
  if (s.data.cols() != p.bins()) throw Error("istft: bin count does not match fft_size");
  const std::size_t frames = s.frames();
  if (frames == 0) throw Error("istft: no frames");
  if (length > frames * p.hop) throw Error("istft: length exceeds frames * hop");
  if (!all_finite({reinterpret_cast<const double*>(s.data.flat().data()), 2 * s.data.size()})) {
    throw Error("istft: non-finite spectrogram");
  }

  const auto window = analysis_window(p);
  const long pad = static_cast<long>(p.fft_size / 2);
  // Samples past `length` are reflections only when `length` is consistent
  // with the frame count; otherwise they belong to a longer signal and are dropped.
  const bool fold_right = p.frames_for(length) == frames;

  std::vector<double> num(length, 0.0), den(length, 0.0);
  auto& fft = real_fft_for(p.fft_size);
  std::vector<double> frame(p.fft_size);
  for (std::size_t l = 0; l < frames; ++l) {
    fft.inverse(s.data.row(l), frame);
    const long start = static_cast<long>(l * p.hop) - pad;
    for (std::size_t n = 0; n < p.fft_size; ++n) {
      const double wv = window[n];
      if (wv == 0.0) continue;
      const long i = start + static_cast<long>(n);
      std::size_t target;
      if (i >= 0 && i < static_cast<long>(length)) {
        target = static_cast<std::size_t>(i);
      } else if (i < 0 || fold_right) {
        target = detail::reflect_index(i, length);
      } else {
        continue;
      }
      num[target] += wv * frame[n];
      den[target] += wv * wv;
    }
  }
  Waveform out{std::vector<double>(length), s.sample_rate_hz};
  for (std::size_t i = 0; i < length; ++i) {
    if (den[i] < 1e-12) {
      throw Error("istft: squared-window overlap-add vanishes at sample " + std::to_string(i) +
                  " for " + to_string(p));
    }
    out.samples[i] = num[i] / den[i];
  }
  return out;
}

inline RealMatrix magnitude(const ComplexSpectrogram& s) {
  RealMatrix m(s.frames(), s.bins());
  auto src = s.data.flat();
  auto dst = m.flat();
  for (std::size_t i = 0; i < src.size(); ++i) dst[i] = std::abs(src[i]);
  return m;
}

/// Phase in (-pi, pi].
inline RealMatrix phase(const ComplexSpectrogram& s) {
  RealMatrix m(s.frames(), s.bins());
  auto src = s.data.flat();
  auto dst = m.flat();
  for (std::size_t i = 0; i < src.size(); ++i) {
    const double a = std::arg(src[i]);
    dst[i] = a == -std::numbers::pi ? std::numbers::pi : a;
  }
  return m;
}

inline ComplexSpectrogram polar_combine(const RealMatrix& mag, const RealMatrix& ph,
                                        const StftParams& p, int sample_rate_hz) {
  if (!mag.same_shape(ph)) throw Error("polar_combine: magnitude and phase shapes differ");
  if (mag.cols() != p.bins()) throw Error("polar_combine: bin count does not match fft_size");
  ComplexSpectrogram out{ComplexMatrix(mag.rows(), mag.cols()), p, sample_rate_hz};
  auto m = mag.flat();
  auto a = ph.flat();
  auto dst = out.data.flat();
  for (std::size_t i = 0; i < m.size(); ++i) {
    if (!(m[i] >= 0.0)) throw Error("polar_combine: negative or NaN magnitude");
    dst[i] = std::polar(m[i], a[i]);
  }
  return out;
}

}  // namespace tdpr
