#pragma once

#include <fftw3.h>

#include <algorithm>
#include <complex>
#include <cstddef>
#include <map>
#include <memory>
#include <mutex>
#include <span>

#include "tdpr/error.hpp"

namespace tdpr {

namespace detail {

// FFTW planning and plan destruction are not thread-safe; execution is.
inline std::mutex& fftw_planner_mutex() {
  static std::mutex m;
  return m;
}

}  // namespace detail

/// Real-input FFT of a fixed size backed by FFTW. Owns its buffers, so one
/// instance must not be shared between threads; see `real_fft_for`.
class RealFft {
 public:
  explicit RealFft(std::size_t n) : n_(n) {
    if (n == 0) throw Error("RealFft: size must be positive");
    real_ = static_cast<double*>(fftw_malloc(sizeof(double) * n));
    spec_ = static_cast<fftw_complex*>(fftw_malloc(sizeof(fftw_complex) * bins()));
    if (real_ == nullptr || spec_ == nullptr) {
      release_buffers();
      throw Error("RealFft: allocation failed");
    }
    std::lock_guard lock(detail::fftw_planner_mutex());
    // ESTIMATE keeps plan selection independent of timing, so results are
    // reproducible run to run.
    forward_ = fftw_plan_dft_r2c_1d(static_cast<int>(n), real_, spec_, FFTW_ESTIMATE);
    inverse_ = fftw_plan_dft_c2r_1d(static_cast<int>(n), spec_, real_, FFTW_ESTIMATE);
  }

  RealFft(const RealFft&) = delete;
  RealFft& operator=(const RealFft&) = delete;

  ~RealFft() {
    {
      std::lock_guard lock(detail::fftw_planner_mutex());
      if (forward_ != nullptr) fftw_destroy_plan(forward_);
      if (inverse_ != nullptr) fftw_destroy_plan(inverse_);
    }
    release_buffers();
  }

  std::size_t size() const { return n_; }
  std::size_t bins() const { return n_ / 2 + 1; }

  /// out[k] = sum_n in[n] exp(-2 pi i k n / N), k < N/2 + 1.
  void forward(std::span<const double> in, std::span<std::complex<double>> out) {
    std::copy(in.begin(), in.end(), real_);
    fftw_execute(forward_);
    for (std::size_t k = 0; k < bins(); ++k) out[k] = {spec_[k][0], spec_[k][1]};
  }

  /// Inverse of `forward`, normalized by 1/N. Treats the input as the
  /// non-negative half of a Hermitian spectrum.
  void inverse(std::span<const std::complex<double>> in, std::span<double> out) {
    for (std::size_t k = 0; k < bins(); ++k) {
      spec_[k][0] = in[k].real();
      spec_[k][1] = in[k].imag();
    }
    fftw_execute(inverse_);
    const double scale = 1.0 / static_cast<double>(n_);
    for (std::size_t i = 0; i < n_; ++i) out[i] = real_[i] * scale;
  }

 private:
  void release_buffers() {
    if (real_ != nullptr) fftw_free(real_);
    if (spec_ != nullptr) fftw_free(spec_);
    real_ = nullptr;
    spec_ = nullptr;
  }

  std::size_t n_;
  double* real_ = nullptr;
  fftw_complex* spec_ = nullptr;
  fftw_plan forward_ = nullptr;
  fftw_plan inverse_ = nullptr;
};

/// Per-thread plan cache.
inline RealFft& real_fft_for(std::size_t n) {
  thread_local std::map<std::size_t, std::unique_ptr<RealFft>> cache;
  auto& slot = cache[n];
  if (!slot) slot = std::make_unique<RealFft>(n);
  return *slot;
}

}  // namespace tdpr
