#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <string>
#include <variant>
#include <vector>

#include "tdpr/error.hpp"
#include "tdpr/rng.hpp"
#include "tdpr/stft.hpp"
#include "tdpr/waveform.hpp"

namespace tdpr {

/// Phase taken from an externally produced waveform (e.g. a vocoder resynthesis).
struct ExternalPhase {
  Waveform waveform;
};

/// Phase taken from the high-resolution reference. Only available offline.
struct GroundTruthPhase {
  Waveform waveform;
};

struct ZeroPhaseInit {};
struct RandomPhaseInit {
  std::uint64_t seed = 0;
};
using GriffinLimInit = std::variant<ZeroPhaseInit, RandomPhaseInit>;

struct GriffinLimPhase {
  int iterations = 64;
  GriffinLimInit init = ZeroPhaseInit{};
};

using PhaseSource = std::variant<ExternalPhase, GroundTruthPhase, GriffinLimPhase>;

/// Magnitude of `mag_donor` with the phase of `phase_donor`.
inline ComplexSpectrogram replace_phase(const ComplexSpectrogram& mag_donor,
                                        const ComplexSpectrogram& phase_donor) {
  if (!(mag_donor.params == phase_donor.params)) throw Error("replace_phase: STFT parameters differ");
  if (!mag_donor.data.same_shape(phase_donor.data)) {
    throw Error("replace_phase: shape mismatch (" + std::to_string(mag_donor.frames()) + "x" +
                std::to_string(mag_donor.bins()) + " vs " + std::to_string(phase_donor.frames()) + "x" +
                std::to_string(phase_donor.bins()) + ")");
  }
  ComplexSpectrogram out{ComplexMatrix(mag_donor.frames(), mag_donor.bins()), mag_donor.params,
                         mag_donor.sample_rate_hz};
  auto a = mag_donor.data.flat();
  auto b = phase_donor.data.flat();
  auto dst = out.data.flat();
  for (std::size_t i = 0; i < dst.size(); ++i) dst[i] = std::polar(std::abs(a[i]), std::arg(b[i]));
  return out;
}

struct GriffinLimOptions {
  int iterations = 64;
  GriffinLimInit init = ZeroPhaseInit{};
  int sample_rate_hz = 16000;
  std::size_t length = 0;  // 0: (frames - 1) * hop
  /// When set, receives ||(|stft(x_k)| - mag)||_F / ||mag||_F for k = 1..iterations.
  std::vector<double>* consistency = nullptr;
};

/// Classic alternating projection: x_k = istft(mag * exp(i angle(X_{k-1}))),
/// X_k = stft(x_k). Returns x_K.
inline Waveform griffin_lim(const RealMatrix& mag, const StftParams& p, const GriffinLimOptions& opt = {}) {
  validate(p);
  if (opt.iterations < 1) throw Error("griffin_lim: iterations must be >= 1");
  if (mag.cols() != p.bins() || mag.rows() == 0) throw Error("griffin_lim: magnitude shape does not match params");
  for (double m : mag.flat()) {
    if (!(m >= 0.0) || !std::isfinite(m)) throw Error("griffin_lim: magnitude must be finite and >= 0");
  }
  const std::size_t length = opt.length > 0 ? opt.length : (mag.rows() - 1) * p.hop;
  if (p.frames_for(length) != mag.rows()) throw Error("griffin_lim: length inconsistent with frame count");

  RealMatrix ph(mag.rows(), mag.cols(), 0.0);
  if (const auto* r = std::get_if<RandomPhaseInit>(&opt.init)) {
    const CounterRng rng(r->seed, 0);
    auto flat = ph.flat();
    for (std::size_t i = 0; i < flat.size(); ++i) flat[i] = (2.0 * rng.uniform(i) - 1.0) * std::numbers::pi;
  }

  double mag_norm = 0.0;
  for (double m : mag.flat()) mag_norm += m * m;
  mag_norm = std::sqrt(mag_norm);

  if (opt.consistency != nullptr) opt.consistency->clear();
  auto target = polar_combine(mag, ph, p, opt.sample_rate_hz);
  Waveform x;
  for (int k = 1; k <= opt.iterations; ++k) {
    x = istft(target, length);
    const auto s = stft(x, p);
    auto src = s.data.flat();
    auto m = mag.flat();
    auto dst = target.data.flat();
    double err = 0.0;
    for (std::size_t i = 0; i < dst.size(); ++i) {
      const double d = std::abs(src[i]) - m[i];
      err += d * d;
      dst[i] = std::polar(m[i], std::arg(src[i]));
    }
    if (opt.consistency != nullptr) {
      opt.consistency->push_back(mag_norm > 0.0 ? std::sqrt(err) / mag_norm : 0.0);
    }
  }
  return x;
}

namespace detail {

// Brings the phase donor to the magnitude donor's length. Skews larger than
// two hops mean the signals are not the same clip.
inline Waveform reconcile_length(const Waveform& phase_donor, std::size_t length, const StftParams& p) {
  const auto a = static_cast<long>(phase_donor.size());
  const auto b = static_cast<long>(length);
  if (std::abs(a - b) > static_cast<long>(2 * p.hop)) {
    throw Error("repair: phase source length " + std::to_string(a) + " differs from donor length " +
                std::to_string(b) + " by more than two hops");
  }
  Waveform out = phase_donor;
  out.samples.resize(length, 0.0);
  return out;
}

}  // namespace detail

/// Replaces the phase of `donor` with phase from `source` and resynthesizes
/// at the donor's length. No gain matching is applied to the phase source.
inline Waveform repair(const Waveform& donor, const PhaseSource& source, const StftParams& p = {}) {
  validate(donor, "repair donor");
  validate(p);
  if (donor.empty()) throw Error("repair: empty donor");
  const auto donor_spec = stft(donor, p);

  if (const auto* gl = std::get_if<GriffinLimPhase>(&source)) {
    GriffinLimOptions opt;
    opt.iterations = gl->iterations;
    opt.init = gl->init;
    opt.sample_rate_hz = donor.sample_rate_hz;
    opt.length = donor.size();
    const auto estimate = griffin_lim(magnitude(donor_spec), p, opt);
    return istft(replace_phase(donor_spec, stft(estimate, p)), donor.size());
  }

  const Waveform& phase_wave = std::holds_alternative<ExternalPhase>(source)
                                   ? std::get<ExternalPhase>(source).waveform
                                   : std::get<GroundTruthPhase>(source).waveform;
  validate(phase_wave, "phase source");
  if (phase_wave.sample_rate_hz != donor.sample_rate_hz) {
    throw Error("repair: phase source sample rate " + std::to_string(phase_wave.sample_rate_hz) +
                " != donor rate " + std::to_string(donor.sample_rate_hz));
  }
  const auto phase_spec = stft(detail::reconcile_length(phase_wave, donor.size(), p), p);
  return istft(replace_phase(donor_spec, phase_spec), donor.size());
}

}  // namespace tdpr
