#pragma once

// Straight-line reference implementations used only as test oracles. They
// share no code with the library: framing, padding, window and DFT are all
// written out directly.

#include <cmath>
#include <complex>
#include <cstddef>
#include <numbers>
#include <vector>

namespace tdpr::oracle {

using Spectrum = std::vector<std::vector<std::complex<double>>>;  // [frame][bin]

inline Spectrum naive_stft(const std::vector<double>& x, std::size_t n_fft, std::size_t hop) {
  const long len = static_cast<long>(x.size());
  const long pad = static_cast<long>(n_fft / 2);
  const std::size_t frames = x.size() / hop + 1;
  std::vector<double> cos_t(n_fft), sin_t(n_fft), win(n_fft);
  for (std::size_t n = 0; n < n_fft; ++n) {
    cos_t[n] = std::cos(2.0 * std::numbers::pi * n / n_fft);
    sin_t[n] = std::sin(2.0 * std::numbers::pi * n / n_fft);
    win[n] = 0.5 - 0.5 * cos_t[n];
  }
  auto sample = [&](long i) {
    // reflect without repeating the edge; assumes len > pad
    if (i < 0) i = -i;
    if (i >= len) i = 2 * (len - 1) - i;
    return x[static_cast<std::size_t>(i)];
  };
  Spectrum out(frames, std::vector<std::complex<double>>(n_fft / 2 + 1));
  std::vector<double> frame(n_fft);
  for (std::size_t l = 0; l < frames; ++l) {
    for (std::size_t n = 0; n < n_fft; ++n) frame[n] = win[n] * sample(static_cast<long>(l * hop + n) - pad);
    for (std::size_t k = 0; k <= n_fft / 2; ++k) {
      double re = 0.0, im = 0.0;
      for (std::size_t n = 0; n < n_fft; ++n) {
        const std::size_t idx = (k * n) % n_fft;
        re += frame[n] * cos_t[idx];
        im -= frame[n] * sin_t[idx];
      }
      out[l][k] = {re, im};
    }
  }
  return out;
}

inline double lsd(const Spectrum& a, const Spectrum& b) {
  double total = 0.0;
  for (std::size_t l = 0; l < a.size(); ++l) {
    double acc = 0.0;
    for (std::size_t k = 0; k < a[l].size(); ++k) {
      const double pa = std::max(std::norm(a[l][k]), 1e-10);
      const double pb = std::max(std::norm(b[l][k]), 1e-10);
      acc += std::pow(std::log10(pa) - std::log10(pb), 2);
    }
    total += std::sqrt(acc / static_cast<double>(a[l].size()));
  }
  return total / static_cast<double>(a.size());
}

// Spectral convergence plus mean |log|Y| - log|Y^||, magnitudes floored at 1e-7.
inline double stft_loss(const Spectrum& y, const Spectrum& y_hat) {
  double num = 0.0, den = 0.0, log_sum = 0.0;
  std::size_t count = 0;
  for (std::size_t l = 0; l < y.size(); ++l) {
    for (std::size_t k = 0; k < y[l].size(); ++k) {
      const double a = std::abs(y[l][k]);
      const double b = std::abs(y_hat[l][k]);
      num += (a - b) * (a - b);
      den += a * a;
      log_sum += std::abs(std::log(std::max(a, 1e-7)) - std::log(std::max(b, 1e-7)));
      ++count;
    }
  }
  return std::sqrt(num) / std::sqrt(den) + log_sum / static_cast<double>(count);
}

inline double l1_mean(const std::vector<double>& a, const std::vector<double>& b) {
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) acc += std::abs(a[i] - b[i]);
  return acc / static_cast<double>(a.size());
}

// Decimation by an integer factor with the Kaiser-windowed sinc the library
// is specified to use (32 zero crossings per side, 65 dB), evaluated directly
// as a convolution at every kept sample.
inline std::vector<double> decimate(const std::vector<double>& x, int factor) {
  if (factor == 1) return x;
  const double atten = 65.0;
  const double beta = 0.1102 * (atten - 8.7);
  const double half = 32.0 * factor;
  const double transition = 2.0 * (atten - 7.95) / (14.36 * 64.0);
  const double fc = 0.5 / factor * (1.0 - transition / 2.0);
  const long reach = static_cast<long>(half);
  std::vector<double> h;
  double h_sum = 0.0;
  for (long j = -reach; j <= reach; ++j) {
    const double t = static_cast<double>(j);
    const double arg = 2.0 * fc * t;
    const double sinc = j == 0 ? 1.0 : std::sin(std::numbers::pi * arg) / (std::numbers::pi * arg);
    const double r = t / half;
    const double v = sinc * std::cyl_bessel_i(0.0, beta * std::sqrt(1.0 - r * r)) / std::cyl_bessel_i(0.0, beta);
    h.push_back(v);
    h_sum += v;
  }
  const long n = static_cast<long>(x.size());
  std::vector<double> y((x.size() + factor - 1) / factor, 0.0);
  for (std::size_t m = 0; m < y.size(); ++m) {
    double acc = 0.0;
    for (long j = -reach; j <= reach; ++j) {
      const long i = static_cast<long>(m) * factor - j;
      if (i >= 0 && i < n) acc += h[static_cast<std::size_t>(j + reach)] / h_sum * x[static_cast<std::size_t>(i)];
    }
    y[m] = acc;
  }
  return y;
}

}  // namespace tdpr::oracle
