#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <numbers>
#include <span>
#include <string>
#include <vector>

#include "tdpr/detail/elliptic.hpp"
#include "tdpr/error.hpp"
#include "tdpr/waveform.hpp"

namespace tdpr {

/// Normalized biquad, a0 == 1. First-order sections have b2 == a2 == 0.
struct Biquad {
  double b0 = 1.0, b1 = 0.0, b2 = 0.0;
  double a1 = 0.0, a2 = 0.0;

  std::complex<double> response(double omega) const {
    const std::complex<double> z1 = std::polar(1.0, -omega);
    const std::complex<double> z2 = z1 * z1;
    return (b0 + b1 * z1 + b2 * z2) / (1.0 + a1 * z1 + a2 * z2);
  }
  double dc_gain() const { return (b0 + b1 + b2) / (1.0 + a1 + a2); }
};

using SosCascade = std::vector<Biquad>;

enum class IirFamily { kButterworth, kChebyshev1, kChebyshev2, kElliptic, kBessel };

inline std::string to_string(IirFamily f) {
  switch (f) {
    case IirFamily::kButterworth: return "butterworth";
    case IirFamily::kChebyshev1: return "chebyshev1";
    case IirFamily::kChebyshev2: return "chebyshev2";
    case IirFamily::kElliptic: return "elliptic";
    case IirFamily::kBessel: return "bessel";
  }
  return "?";
}

/// Analog zeros/poles/gain.
struct Zpk {
  std::vector<std::complex<double>> zeros;
  std::vector<std::complex<double>> poles;
  double dc_gain = 1.0;  // |H(0)|
};

struct LowpassDesign {
  IirFamily family = IirFamily::kButterworth;
  int order = 6;
  double cutoff_hz = 3000.0;
  double passband_ripple_db = 1.0;   // Chebyshev1, Elliptic
  double stopband_atten_db = 40.0;   // Chebyshev2, Elliptic
};

namespace detail {

constexpr int kMaxIirOrder = 10;

inline Zpk butterworth_prototype(int n) {
  Zpk z;
  for (int k = 1; k <= n; ++k) {
    z.poles.push_back(std::polar(1.0, std::numbers::pi * (2.0 * k + n - 1) / (2.0 * n)));
  }
  return z;
}

// Passband edge (end of the equiripple band) at 1 rad/s.
inline Zpk chebyshev1_prototype(int n, double ripple_db) {
  const double eps = std::sqrt(std::pow(10.0, ripple_db / 10.0) - 1.0);
  const double mu = std::asinh(1.0 / eps) / n;
  Zpk z;
  for (int k = 1; k <= n; ++k) {
    const double theta = std::numbers::pi * (2.0 * k - 1) / (2.0 * n);
    z.poles.emplace_back(-std::sinh(mu) * std::sin(theta), std::cosh(mu) * std::cos(theta));
  }
  z.dc_gain = n % 2 == 0 ? 1.0 / std::sqrt(1.0 + eps * eps) : 1.0;
  return z;
}

// Half-power point at 1 rad/s; the stopband (atten_db) starts just above it.
inline Zpk chebyshev2_prototype(int n, double atten_db) {
  const double de = 1.0 / std::sqrt(std::pow(10.0, atten_db / 10.0) - 1.0);
  const double mu = std::asinh(1.0 / de) / n;
  const double half_power = 1.0 / std::cosh(std::acosh(1.0 / de) / n);
  Zpk z;
  for (int k = 1; k <= n; ++k) {
    const double theta = std::numbers::pi * (2.0 * k - 1) / (2.0 * n);
    const double c = std::cos(theta);
    if (std::abs(c) > 1e-12) z.zeros.emplace_back(0.0, 1.0 / c / half_power);
    const std::complex<double> p(-std::sinh(mu) * std::sin(theta), std::cosh(mu) * std::cos(theta));
    z.poles.push_back(1.0 / p / half_power);
  }
  return z;
}

// Passband edge at 1 rad/s, Landen-transform construction.
inline Zpk elliptic_prototype(int n, double ripple_db, double atten_db) {
  using C = std::complex<double>;
  const double ep = std::sqrt(std::pow(10.0, ripple_db / 10.0) - 1.0);
  const double es = std::sqrt(std::pow(10.0, atten_db / 10.0) - 1.0);
  const double k1 = ep / es;
  const double k = ellipdeg(n, k1);
  const double v0 = asne(C(0.0, 1.0 / ep), k1).imag() / n;
  const C j(0.0, 1.0);

  Zpk z;
  for (int i = 1; i <= n / 2; ++i) {
    const double u = static_cast<double>(2 * i - 1) / n;
    const C zeta = cde(u, k);
    const C zero = j / (k * zeta);
    C pole = j * cde(C(u, -v0), k);
    if (pole.real() > 0.0) pole = -std::conj(pole);
    z.zeros.push_back(zero);
    z.zeros.push_back(std::conj(zero));
    z.poles.push_back(pole);
    z.poles.push_back(std::conj(pole));
  }
  if (n % 2 == 1) {
    const C p0 = j * sne(C(0.0, v0), k);
    z.poles.emplace_back(-std::abs(p0.real()), 0.0);
  }
  z.dc_gain = n % 2 == 0 ? 1.0 / std::sqrt(1.0 + ep * ep) : 1.0;
  return z;
}

// Coefficients of the reverse Bessel polynomial theta_n(s), lowest power first:
// a_k = (2n - k)! / (2^(n - k) k! (n - k)!).
inline std::vector<long double> bessel_polynomial(int n) {
  std::vector<long double> a(static_cast<std::size_t>(n) + 1);
  for (int k = 0; k <= n; ++k) {
    long double v = 1.0L;
    for (int m = n - k + 1; m <= 2 * n - k; ++m) v *= m;  // (2n-k)! / (n-k)!
    for (int m = 2; m <= k; ++m) v /= m;
    v /= std::pow(2.0L, n - k);
    a[static_cast<std::size_t>(k)] = v;
  }
  return a;
}

template <typename T>
std::complex<T> eval_poly(const std::vector<T>& a, std::complex<T> s) {
  std::complex<T> acc = 0;
  for (auto it = a.rbegin(); it != a.rend(); ++it) acc = acc * s + *it;
  return acc;
}

/// Roots of a real polynomial (lowest power first) via Aberth iteration
/// followed by Newton polishing.
inline std::vector<std::complex<double>> poly_roots(const std::vector<long double>& a) {
  using CL = std::complex<long double>;
  const int n = static_cast<int>(a.size()) - 1;
  std::vector<long double> da(static_cast<std::size_t>(n));
  for (int k = 1; k <= n; ++k) da[static_cast<std::size_t>(k - 1)] = a[static_cast<std::size_t>(k)] * k;
  // Cauchy bound radius, spread starting points off the real axis.
  long double radius = 0;
  for (int k = 0; k < n; ++k) radius = std::max(radius, std::abs(a[static_cast<std::size_t>(k)] / a.back()));
  radius = 1 + radius;
  const long double r0 = std::pow(std::abs(a.front() / a.back()), 1.0L / n);
  std::vector<CL> z(static_cast<std::size_t>(n));
  for (int k = 0; k < n; ++k) {
    z[static_cast<std::size_t>(k)] = std::polar(std::min(r0, radius), 2.0L * std::numbers::pi_v<long double> * k / n + 0.4L);
  }
  for (int iter = 0; iter < 500; ++iter) {
    long double max_step = 0;
    for (int i = 0; i < n; ++i) {
      auto& zi = z[static_cast<std::size_t>(i)];
      const CL ratio = eval_poly(a, zi) / eval_poly(da, zi);
      CL repulse = 0;
      for (int m = 0; m < n; ++m) {
        if (m != i) repulse += 1.0L / (zi - z[static_cast<std::size_t>(m)]);
      }
      const CL step = ratio / (1.0L - ratio * repulse);
      zi -= step;
      max_step = std::max(max_step, std::abs(step) / std::max(1.0L, std::abs(zi)));
    }
    if (max_step < 1e-18L) break;
  }
  std::vector<std::complex<double>> out;
  for (auto zi : z) {
    for (int i = 0; i < 3; ++i) zi -= eval_poly(a, zi) / eval_poly(da, zi);
    out.emplace_back(static_cast<double>(zi.real()), static_cast<double>(zi.imag()));
  }
  return out;
}

// -3 dB point at 1 rad/s.
inline Zpk bessel_prototype(int n) {
  const auto a = bessel_polynomial(n);
  // |H(j w)|^2 = a0^2 / |theta(j w)|^2 decreases monotonically; bisect for 1/2.
  auto power = [&](long double w) {
    const auto v = eval_poly(a, std::complex<long double>(0.0L, w));
    return a.front() * a.front() / std::norm(v);
  };
  long double lo = 0.0L, hi = 1.0L;
  while (power(hi) > 0.5L) hi *= 2.0L;
  for (int i = 0; i < 200; ++i) {
    const long double mid = 0.5L * (lo + hi);
    (power(mid) > 0.5L ? lo : hi) = mid;
  }
  const double w3 = static_cast<double>(0.5L * (lo + hi));
  Zpk z;
  for (const auto& p : poly_roots(a)) z.poles.push_back(p / w3);
  return z;
}

inline Zpk analog_prototype(const LowpassDesign& d) {
  switch (d.family) {
    case IirFamily::kButterworth: return butterworth_prototype(d.order);
    case IirFamily::kChebyshev1: return chebyshev1_prototype(d.order, d.passband_ripple_db);
    case IirFamily::kChebyshev2: return chebyshev2_prototype(d.order, d.stopband_atten_db);
    case IirFamily::kElliptic:
      return elliptic_prototype(d.order, d.passband_ripple_db, d.stopband_atten_db);
    case IirFamily::kBessel: return bessel_prototype(d.order);
  }
  throw Error("unknown IIR family");
}

/// Pairs conjugate poles with their nearest zeros into biquads. Each section
/// is scaled to unit DC gain; the overall DC gain is applied to the first.
inline SosCascade zpk_to_sos(std::vector<std::complex<double>> zeros,
                             std::vector<std::complex<double>> poles, double dc_gain) {
  using C = std::complex<double>;
  constexpr double kTol = 1e-10;
  auto split = [&](const std::vector<C>& v, std::vector<C>& upper, std::vector<double>& real) {
    for (const C& x : v) {
      if (std::abs(x.imag()) <= kTol * std::max(1.0, std::abs(x))) {
        real.push_back(x.real());
      } else if (x.imag() > 0) {
        upper.push_back(x);
      }
    }
  };
  std::vector<C> zc, pc;
  std::vector<double> zr, pr;
  split(zeros, zc, zr);
  split(poles, pc, pr);
  if (2 * pc.size() + pr.size() != poles.size() || 2 * zc.size() + zr.size() != zeros.size()) {
    throw Error("zpk_to_sos: roots are not in conjugate pairs");
  }
  // Furthest-from-unit-circle poles first.
  std::sort(pc.begin(), pc.end(), [](C a, C b) { return std::abs(a) < std::abs(b); });

  SosCascade sos;
  auto take_real_zero = [&]() {
    if (zr.empty()) throw Error("zpk_to_sos: zero/pole count mismatch");
    const double z = zr.back();
    zr.pop_back();
    return z;
  };
  for (const C& p : pc) {
    Biquad s;
    s.a1 = -2.0 * p.real();
    s.a2 = std::norm(p);
    if (!zc.empty()) {
      auto it = std::min_element(zc.begin(), zc.end(),
                                 [&](C a, C b) { return std::abs(a - p) < std::abs(b - p); });
      s.b1 = -2.0 * it->real();
      s.b2 = std::norm(*it);
      zc.erase(it);
    } else {
      const double z1 = take_real_zero();
      const double z2 = take_real_zero();
      s.b1 = -(z1 + z2);
      s.b2 = z1 * z2;
    }
    sos.push_back(s);
  }
  for (double p : pr) {
    Biquad s;
    s.a1 = -p;
    s.b1 = -take_real_zero();
    sos.push_back(s);
  }
  for (auto& s : sos) {
    const double g = 1.0 / s.dc_gain();
    s.b0 *= g;
    s.b1 *= g;
    s.b2 *= g;
  }
  if (!sos.empty()) {
    sos.front().b0 *= dc_gain;
    sos.front().b1 *= dc_gain;
    sos.front().b2 *= dc_gain;
  }
  return sos;
}

}  // namespace detail

inline void validate(const LowpassDesign& d, int sample_rate_hz) {
  if (d.order < 1 || d.order > detail::kMaxIirOrder) {
    throw Error("design_iir: order must be in [1, " + std::to_string(detail::kMaxIirOrder) + "]");
  }
  if (sample_rate_hz <= 0) throw Error("design_iir: sample rate must be positive");
  if (!(d.cutoff_hz > 0.0)) throw Error("design_iir: cutoff must be positive");
  if (d.cutoff_hz >= sample_rate_hz / 2.0) throw Error("design_iir: cutoff must be below Nyquist");
  if (!(d.passband_ripple_db > 0.0) || !(d.stopband_atten_db > 0.0)) {
    throw Error("design_iir: ripple and attenuation must be positive");
  }
}

/// Digital low-pass as a cascade of second-order sections: analog prototype,
/// bilinear transform pre-warped so the prototype's 1 rad/s edge lands on
/// the cutoff. Butterworth, Chebyshev2 and Bessel are -3 dB at the cutoff;
/// Chebyshev1 and Elliptic end their ripple band there.
inline SosCascade design_iir(const LowpassDesign& d, int sample_rate_hz) {
  validate(d, sample_rate_hz);
  const Zpk proto = detail::analog_prototype(d);
  const double fs2 = 2.0 * sample_rate_hz;
  const double warped = fs2 * std::tan(std::numbers::pi * d.cutoff_hz / sample_rate_hz);
  auto bilinear = [&](std::complex<double> s) { return (fs2 + s) / (fs2 - s); };

  std::vector<std::complex<double>> zeros, poles;
  for (const auto& z : proto.zeros) zeros.push_back(bilinear(z * warped));
  for (const auto& p : proto.poles) poles.push_back(bilinear(p * warped));
  while (zeros.size() < poles.size()) zeros.emplace_back(-1.0, 0.0);
  return detail::zpk_to_sos(std::move(zeros), std::move(poles), proto.dc_gain);
}

inline std::complex<double> frequency_response(const SosCascade& sos, double freq_hz, int sample_rate_hz) {
  const double omega = 2.0 * std::numbers::pi * freq_hz / sample_rate_hz;
  std::complex<double> h = 1.0;
  for (const auto& s : sos) h *= s.response(omega);
  return h;
}

inline double magnitude_db(const SosCascade& sos, double freq_hz, int sample_rate_hz) {
  return 20.0 * std::log10(std::abs(frequency_response(sos, freq_hz, sample_rate_hz)));
}

/// Largest pole radius over all sections.
inline double max_pole_radius(const SosCascade& sos) {
  double r = 0.0;
  for (const auto& s : sos) {
    const std::complex<double> disc = std::sqrt(std::complex<double>(s.a1 * s.a1 - 4.0 * s.a2));
    r = std::max({r, std::abs((-s.a1 + disc) / 2.0), std::abs((-s.a1 - disc) / 2.0)});
  }
  return r;
}

inline bool is_stable(const SosCascade& sos) { return max_pole_radius(sos) < 1.0; }

/// Transposed direct-form II state for one section.
struct BiquadState {
  double z1 = 0.0, z2 = 0.0;
};

/// Steady-state section states for a unit step input.
inline std::vector<BiquadState> step_initial_state(const SosCascade& sos) {
  std::vector<BiquadState> zi(sos.size());
  double scale = 1.0;
  for (std::size_t i = 0; i < sos.size(); ++i) {
    const auto& s = sos[i];
    const double g = s.dc_gain();
    zi[i].z2 = scale * (s.b2 - s.a2 * g);
    zi[i].z1 = scale * (s.b1 - s.a1 * g) + zi[i].z2;
    scale *= g;
  }
  return zi;
}

inline void sos_filter_inplace(const SosCascade& sos, std::span<double> x, std::vector<BiquadState> state) {
  for (std::size_t k = 0; k < sos.size(); ++k) {
    const auto& s = sos[k];
    auto& st = state[k];
    for (double& v : x) {
      const double in = v;
      const double out = s.b0 * in + st.z1;
      st.z1 = s.b1 * in - s.a1 * out + st.z2;
      st.z2 = s.b2 * in - s.a2 * out;
      v = out;
    }
  }
}

/// Zero-phase forward-backward filtering with odd-extension padding and
/// steady-state initial conditions. Effective magnitude response is |H|^2.
inline Waveform apply_iir(const Waveform& w, const SosCascade& sos) {
  if (sos.empty() || w.empty()) return w;
  if (!is_stable(sos)) throw Error("apply_iir: unstable sections");
  const std::size_t n = w.size();
  std::size_t ntaps = 2 * sos.size() + 1;
  const auto b2_zero = std::count_if(sos.begin(), sos.end(), [](const Biquad& s) { return s.b2 == 0.0; });
  const auto a2_zero = std::count_if(sos.begin(), sos.end(), [](const Biquad& s) { return s.a2 == 0.0; });
  ntaps -= static_cast<std::size_t>(std::min(b2_zero, a2_zero));
  const std::size_t padlen = std::min(3 * ntaps, n - 1);

  std::vector<double> ext;
  ext.reserve(n + 2 * padlen);
  for (std::size_t i = padlen; i >= 1; --i) ext.push_back(2.0 * w.samples[0] - w.samples[i]);
  ext.insert(ext.end(), w.samples.begin(), w.samples.end());
  for (std::size_t i = 1; i <= padlen; ++i) ext.push_back(2.0 * w.samples[n - 1] - w.samples[n - 1 - i]);

  const auto zi = step_initial_state(sos);
  auto scaled = [&](double x0) {
    auto st = zi;
    for (auto& s : st) {
      s.z1 *= x0;
      s.z2 *= x0;
    }
    return st;
  };
  sos_filter_inplace(sos, ext, scaled(ext.front()));
  std::reverse(ext.begin(), ext.end());
  sos_filter_inplace(sos, ext, scaled(ext.front()));
  std::reverse(ext.begin(), ext.end());
  return Waveform{{ext.begin() + static_cast<long>(padlen), ext.begin() + static_cast<long>(padlen + n)},
                  w.sample_rate_hz};
}

}  // namespace tdpr
