#pragma once

// Jacobi elliptic functions evaluated through descending Landen
// transformations. Arguments are normalized by the complete integral K(k),
// i.e. sne(u, k) = sn(u K(k), k).

#include <cmath>
#include <complex>
#include <numbers>
#include <vector>

namespace tdpr::detail {

/// Descending Landen moduli k_1, k_2, ... until they underflow to ~0.
inline std::vector<double> landen_sequence(double k) {
  std::vector<double> v;
  for (int i = 0; i < 32 && k > 1e-16; ++i) {
    k = k / (1.0 + std::sqrt((1.0 - k) * (1.0 + k)));
    k *= k;
    v.push_back(k);
  }
  return v;
}

inline std::complex<double> landen_ascend(std::complex<double> w, const std::vector<double>& v) {
  for (auto it = v.rbegin(); it != v.rend(); ++it) {
    w = (1.0 + *it) * w / (1.0 + *it * w * w);
  }
  return w;
}

inline std::complex<double> cde(std::complex<double> u, double k) {
  return landen_ascend(std::cos(u * (std::numbers::pi / 2.0)), landen_sequence(k));
}

inline std::complex<double> sne(std::complex<double> u, double k) {
  return landen_ascend(std::sin(u * (std::numbers::pi / 2.0)), landen_sequence(k));
}

/// Inverse of sne: returns u with sne(u, k) = w.
inline std::complex<double> asne(std::complex<double> w, double k) {
  const auto v = landen_sequence(k);
  double prev = k;
  for (double vn : v) {
    w = w / (1.0 + std::sqrt(1.0 - w * w * prev * prev)) * (2.0 / (1.0 + vn));
    prev = vn;
  }
  return std::asin(w) * (2.0 / std::numbers::pi);
}

/// Solves the degree equation N K'(k1)/K(k1) = K'(k)/K(k) for the
/// selectivity modulus k given the discrimination modulus k1.
inline double ellipdeg(int order, double k1) {
  const double kc1 = std::sqrt((1.0 - k1) * (1.0 + k1));
  double prod = 1.0;
  for (int i = 1; i <= order / 2; ++i) {
    prod *= sne(static_cast<double>(2 * i - 1) / order, kc1).real();
  }
  const double kp = std::pow(kc1, order) * std::pow(prod, 4);
  return std::sqrt((1.0 - kp) * (1.0 + kp));
}

}  // namespace tdpr::detail
