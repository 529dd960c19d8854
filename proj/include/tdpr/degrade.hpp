#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "tdpr/error.hpp"
#include "tdpr/iir.hpp"
#include "tdpr/resample.hpp"
#include "tdpr/rng.hpp"
#include "tdpr/stft.hpp"
#include "tdpr/waveform.hpp"

namespace tdpr {

enum class FilterFamily {
  kButterworth,
  kChebyshev1,
  kChebyshev2,
  kElliptic,
  kBessel,
  kSubsampling,
  kStftZeroing,
};

inline constexpr std::array<FilterFamily, 7> kAllFilterFamilies = {
    FilterFamily::kButterworth, FilterFamily::kChebyshev1, FilterFamily::kChebyshev2,
    FilterFamily::kElliptic,    FilterFamily::kBessel,     FilterFamily::kSubsampling,
    FilterFamily::kStftZeroing,
};

inline std::string_view to_string(FilterFamily f) {
  switch (f) {
    case FilterFamily::kButterworth: return "butterworth";
    case FilterFamily::kChebyshev1: return "chebyshev1";
    case FilterFamily::kChebyshev2: return "chebyshev2";
    case FilterFamily::kElliptic: return "elliptic";
    case FilterFamily::kBessel: return "bessel";
    case FilterFamily::kSubsampling: return "subsampling";
    case FilterFamily::kStftZeroing: return "stft_zeroing";
  }
  return "?";
}

inline FilterFamily parse_filter_family(std::string_view name) {
  for (auto f : kAllFilterFamilies) {
    if (to_string(f) == name) return f;
  }
  throw Error("unknown filter family '" + std::string(name) + "'");
}

inline bool is_iir(FilterFamily f) {
  return f != FilterFamily::kSubsampling && f != FilterFamily::kStftZeroing;
}

inline IirFamily to_iir_family(FilterFamily f) {
  switch (f) {
    case FilterFamily::kButterworth: return IirFamily::kButterworth;
    case FilterFamily::kChebyshev1: return IirFamily::kChebyshev1;
    case FilterFamily::kChebyshev2: return IirFamily::kChebyshev2;
    case FilterFamily::kElliptic: return IirFamily::kElliptic;
    case FilterFamily::kBessel: return IirFamily::kBessel;
    default: throw Error("family '" + std::string(to_string(f)) + "' is not an IIR design");
  }
}

inline constexpr int kMinOrder = 6;
inline constexpr int kMaxOrder = 10;
inline constexpr double kDefaultRippleDb = 1.0;
inline constexpr double kDefaultAttenuationDb = 40.0;

/// One concrete degradation.
struct FilterSpec {
  FilterFamily family = FilterFamily::kButterworth;
  int order = kMinOrder;  // ignored by subsampling and STFT zeroing
  double cutoff_hz = 3000.0;
  double passband_ripple_db = kDefaultRippleDb;
  double stopband_atten_db = kDefaultAttenuationDb;

  LowpassDesign lowpass() const {
    return {to_iir_family(family), order, cutoff_hz, passband_ripple_db, stopband_atten_db};
  }
};

struct DegradeConfig {
  double bandwidth_lo_hz = 2500.0;
  double bandwidth_hi_hz = 4000.0;
  std::vector<FilterFamily> families{kAllFilterFamilies.begin(), kAllFilterFamilies.end()};
  int order_lo = kMinOrder;
  int order_hi = kMaxOrder;
  std::uint64_t seed = 0;
};

inline void validate(const DegradeConfig& cfg) {
  if (!(cfg.bandwidth_lo_hz > 0.0) || cfg.bandwidth_lo_hz > cfg.bandwidth_hi_hz) {
    throw Error("DegradeConfig: need 0 < bw_lo <= bw_hi");
  }
  if (cfg.families.empty()) throw Error("DegradeConfig: no filter families");
  if (cfg.order_lo < kMinOrder || cfg.order_hi > kMaxOrder || cfg.order_lo > cfg.order_hi) {
    throw Error("DegradeConfig: order range must lie within [6, 10]");
  }
}

/// Draw `draw_index` of the seeded sampler. Counter slots: 0 family,
/// 1 cutoff, 2 order (drawn for every family so stream positions stay fixed).
inline FilterSpec sample_spec(const DegradeConfig& cfg, std::uint64_t draw_index) {
  validate(cfg);
  const CounterRng rng(cfg.seed, draw_index);
  FilterSpec spec;
  const auto n_fam = static_cast<std::int64_t>(cfg.families.size());
  spec.family = cfg.families[static_cast<std::size_t>(rng.uniform_int(0, 0, n_fam - 1))];
  spec.cutoff_hz = cfg.bandwidth_lo_hz + rng.uniform(1) * (cfg.bandwidth_hi_hz - cfg.bandwidth_lo_hz);
  spec.order = static_cast<int>(rng.uniform_int(2, cfg.order_lo, cfg.order_hi));
  return spec;
}

inline void validate(const FilterSpec& spec, int sample_rate_hz) {
  if (!(spec.cutoff_hz > 0.0)) throw Error("FilterSpec: cutoff must be positive");
  if (is_iir(spec.family)) {
    if (spec.order < kMinOrder || spec.order > kMaxOrder) throw Error("FilterSpec: order must be in [6, 10]");
    if (spec.cutoff_hz >= sample_rate_hz / 2.0) throw Error("FilterSpec: cutoff must be below Nyquist");
  }
}

/// Zeroes every bin whose center frequency exceeds the cutoff.
inline Waveform stft_zeroing_lowpass(const Waveform& w, double cutoff_hz, const StftParams& p = {}) {
  auto s = stft(w, p);
  const double bin_hz = static_cast<double>(w.sample_rate_hz) / static_cast<double>(p.fft_size);
  for (std::size_t k = 0; k < s.bins(); ++k) {
    if (static_cast<double>(k) * bin_hz <= cutoff_hz) continue;
    for (std::size_t l = 0; l < s.frames(); ++l) s.data(l, k) = 0.0;
  }
  return istft(s, w.size());
}

/// Down-resamples to twice the cutoff (rounded to an integer rate) and back,
/// preserving length.
inline Waveform subsampling_lowpass(const Waveform& w, double cutoff_hz) {
  const auto low_rate = static_cast<int>(std::lround(2.0 * cutoff_hz));
  if (low_rate >= w.sample_rate_hz) return w;
  if (low_rate <= 0) throw Error("subsampling_lowpass: cutoff too low");
  auto out = resample(resample(w, low_rate), w.sample_rate_hz);
  out.samples.resize(w.size(), 0.0);
  return out;
}

inline Waveform degrade(const Waveform& w, const FilterSpec& spec) {
  validate(w);
  validate(spec, w.sample_rate_hz);
  switch (spec.family) {
    case FilterFamily::kSubsampling: return subsampling_lowpass(w, spec.cutoff_hz);
    case FilterFamily::kStftZeroing: return stft_zeroing_lowpass(w, spec.cutoff_hz);
    default: return apply_iir(w, design_iir(spec.lowpass(), w.sample_rate_hz));
  }
}

/// Provenance record written next to each degraded file.
inline nlohmann::ordered_json to_json(const FilterSpec& spec, std::uint64_t seed, std::uint64_t draw_index) {
  return nlohmann::ordered_json{
      {"family", std::string(to_string(spec.family))},
      {"order", spec.order},
      {"cutoff_hz", spec.cutoff_hz},
      {"ripple_db", spec.passband_ripple_db},
      {"atten_db", spec.stopband_atten_db},
      {"seed", seed},
      {"draw_index", draw_index},
  };
}

inline FilterSpec filter_spec_from_json(const nlohmann::json& j) {
  FilterSpec spec;
  spec.family = parse_filter_family(j.at("family").get<std::string>());
  spec.order = j.at("order").get<int>();
  spec.cutoff_hz = j.at("cutoff_hz").get<double>();
  spec.passband_ripple_db = j.value("ripple_db", kDefaultRippleDb);
  spec.stopband_atten_db = j.value("atten_db", kDefaultAttenuationDb);
  return spec;
}

}  // namespace tdpr
