#pragma once

#include <cmath>
#include <cstddef>
#include <limits>
#include <string>
#include <vector>

#include "tdpr/error.hpp"
#include "tdpr/resample.hpp"
#include "tdpr/stft.hpp"
#include "tdpr/waveform.hpp"

namespace tdpr {

struct LossConfig {
  std::vector<StftParams> stft_resolutions{{512, 256, 512}, {1024, 512, 1024}, {2048, 1024, 2048}};
  std::vector<int> wave_scales{1, 2, 4};
  double lambda = 1000.0;
};

inline void validate(const LossConfig& cfg) {
  if (cfg.stft_resolutions.empty()) throw Error("LossConfig: need at least one STFT resolution");
  if (cfg.wave_scales.empty()) throw Error("LossConfig: need at least one wave scale");
  if (!(cfg.lambda > 0.0)) throw Error("LossConfig: lambda must be positive");
  for (const auto& p : cfg.stft_resolutions) validate(p);
  for (int s : cfg.wave_scales) {
    if (s < 1) throw Error("LossConfig: wave scales must be >= 1");
  }
}

inline constexpr double kLsdPowerFloor = 1e-10;
inline constexpr double kLossMagnitudeFloor = 1e-7;

namespace detail {

inline void require_pair(const Waveform& a, const Waveform& b, const char* what) {
  if (a.size() != b.size()) {
    throw Error(std::string(what) + ": length mismatch (" + std::to_string(a.size()) + " vs " +
                std::to_string(b.size()) + ")");
  }
  if (a.sample_rate_hz != b.sample_rate_hz) throw Error(std::string(what) + ": sample rate mismatch");
  if (a.empty()) throw Error(std::string(what) + ": empty signals");
}

}  // namespace detail

/// Log-spectral distance: frame mean of the RMS (over bins) difference of
/// base-10 log power spectra, power floored at 1e-10.
inline double lsd(const Waveform& reference, const Waveform& estimate, const StftParams& p = {}) {
  detail::require_pair(reference, estimate, "lsd");
  const auto ref = stft(reference, p);
  const auto est = stft(estimate, p);
  double total = 0.0;
  for (std::size_t l = 0; l < ref.frames(); ++l) {
    auto r = ref.data.row(l);
    auto e = est.data.row(l);
    double acc = 0.0;
    for (std::size_t f = 0; f < r.size(); ++f) {
      const double d = std::log10(std::max(std::norm(r[f]), kLsdPowerFloor)) -
                       std::log10(std::max(std::norm(e[f]), kLsdPowerFloor));
      acc += d * d;
    }
    total += std::sqrt(acc / static_cast<double>(r.size()));
  }
  return total / static_cast<double>(ref.frames());
}

struct StftLossTerms {
  double spectral_convergence = 0.0;
  double log_magnitude = 0.0;
  double total() const { return spectral_convergence + log_magnitude; }
};

/// Spectral convergence ||(|Y| - |Y^|)||_F / ||Y||_F plus the mean absolute
/// natural-log magnitude difference (magnitudes floored at 1e-7). The
/// convergence term is normalized by the reference only; a silent reference
/// with a non-silent estimate gives +inf.
inline StftLossTerms stft_loss_terms(const Waveform& y, const Waveform& y_hat, const StftParams& p) {
  detail::require_pair(y, y_hat, "stft_loss");
  const auto a = stft(y, p);
  const auto b = stft(y_hat, p);
  auto ra = a.data.flat();
  auto rb = b.data.flat();
  double diff2 = 0.0, ref2 = 0.0, log_l1 = 0.0;
  for (std::size_t i = 0; i < ra.size(); ++i) {
    const double ma = std::abs(ra[i]);
    const double mb = std::abs(rb[i]);
    diff2 += (ma - mb) * (ma - mb);
    ref2 += ma * ma;
    log_l1 += std::abs(std::log(std::max(ma, kLossMagnitudeFloor)) - std::log(std::max(mb, kLossMagnitudeFloor)));
  }
  StftLossTerms t;
  if (ref2 > 0.0) {
    t.spectral_convergence = std::sqrt(diff2) / std::sqrt(ref2);
  } else {
    t.spectral_convergence = diff2 > 0.0 ? std::numeric_limits<double>::infinity() : 0.0;
  }
  t.log_magnitude = log_l1 / static_cast<double>(ra.size());
  return t;
}

inline double stft_loss(const Waveform& y, const Waveform& y_hat, const StftParams& p) {
  return stft_loss_terms(y, y_hat, p).total();
}

inline double mrstft_loss(const Waveform& y, const Waveform& y_hat, const LossConfig& cfg = {}) {
  validate(cfg);
  double sum = 0.0;
  for (const auto& p : cfg.stft_resolutions) sum += stft_loss(y, y_hat, p);
  return sum / static_cast<double>(cfg.stft_resolutions.size());
}

/// Mean absolute sample difference.
inline double wave_loss(const Waveform& y, const Waveform& y_hat) {
  detail::require_pair(y, y_hat, "wave_loss");
  double acc = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) acc += std::abs(y.samples[i] - y_hat.samples[i]);
  return acc / static_cast<double>(y.size());
}

/// Mean of wave_loss over the configured decimation factors; both signals go
/// through the anti-aliased polyphase resampler.
inline double mrwave_loss(const Waveform& y, const Waveform& y_hat, const LossConfig& cfg = {}) {
  validate(cfg);
  detail::require_pair(y, y_hat, "mrwave_loss");
  double sum = 0.0;
  for (int s : cfg.wave_scales) {
    if (s == 1) {
      sum += wave_loss(y, y_hat);
      continue;
    }
    const Waveform a{resample_poly(y.samples, 1, s), y.sample_rate_hz / s};
    const Waveform b{resample_poly(y_hat.samples, 1, s), y.sample_rate_hz / s};
    sum += wave_loss(a, b);
  }
  return sum / static_cast<double>(cfg.wave_scales.size());
}

struct LossReport {
  double mrstft = 0.0;
  double mrwave = 0.0;
  double total = 0.0;
};

inline LossReport loss_report(const Waveform& y, const Waveform& y_hat, const LossConfig& cfg = {}) {
  LossReport r;
  r.mrstft = mrstft_loss(y, y_hat, cfg);
  r.mrwave = mrwave_loss(y, y_hat, cfg);
  r.total = r.mrstft + cfg.lambda * r.mrwave;
  return r;
}

inline double total_loss(const Waveform& y, const Waveform& y_hat, const LossConfig& cfg = {}) {
  return loss_report(y, y_hat, cfg).total;
}

}  // namespace tdpr
