#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <limits>
#include <random>

#include "support/oracle.hpp"
#include "support/signals.hpp"
#include "tdpr/degrade.hpp"
#include "tdpr/metrics.hpp"

using namespace tdpr;
using Catch::Approx;

namespace {

constexpr int kRate = 16000;

Waveform scaled(const Waveform& w, double g) {
  Waveform out = w;
  for (double& v : out.samples) v *= g;
  return out;
}

Waveform offset(const Waveform& w, double c) {
  Waveform out = w;
  for (double& v : out.samples) v += c;
  return out;
}

double oracle_mrstft(const Waveform& y, const Waveform& y_hat) {
  double sum = 0.0;
  for (std::size_t n_fft : {512u, 1024u, 2048u}) {
    sum += oracle::stft_loss(oracle::naive_stft(y.samples, n_fft, n_fft / 2),
                             oracle::naive_stft(y_hat.samples, n_fft, n_fft / 2));
  }
  return sum / 3.0;
}

double oracle_mrwave(const Waveform& y, const Waveform& y_hat) {
  double sum = 0.0;
  for (int s : {1, 2, 4}) sum += oracle::l1_mean(oracle::decimate(y.samples, s), oracle::decimate(y_hat.samples, s));
  return sum / 3.0;
}

}  // namespace

TEST_CASE("lsd of a signal against itself is zero", "[metrics][lsd]") {
  const auto y = testing::noise(8000, 1);
  REQUIRE(lsd(y, y) == 0.0);
  const auto p = testing::piano_clip(2, 1.0);
  REQUIRE(lsd(p, p) == 0.0);
}

TEST_CASE("lsd against a 20 dB louder copy is 2", "[metrics][lsd]") {
  const auto y = testing::noise(8000, 2);
  REQUIRE(lsd(y, scaled(y, 10.0)) == Approx(2.0).margin(1e-6));
  REQUIRE(oracle::lsd(oracle::naive_stft(y.samples, 1024, 256), oracle::naive_stft(scaled(y, 10.0).samples, 1024, 256)) ==
          Approx(2.0).margin(1e-6));
}

TEST_CASE("lsd matches the brute-force oracle", "[metrics][lsd]") {
  std::mt19937_64 gen(3);
  for (int trial = 0; trial < 5; ++trial) {
    const auto a = testing::noise(4096, gen());
    const auto b = testing::add(a, testing::noise(4096, gen(), kRate, 0.1));
    const double want = oracle::lsd(oracle::naive_stft(a.samples, 1024, 256), oracle::naive_stft(b.samples, 1024, 256));
    REQUIRE(lsd(a, b) == Approx(want).epsilon(1e-9));
  }
}

TEST_CASE("lsd is symmetric and non-negative", "[metrics][lsd][property]") {
  std::mt19937_64 gen(4);
  for (int trial = 0; trial < 20; ++trial) {
    const auto a = testing::noise(3000, gen());
    const auto b = testing::noise(3000, gen(), kRate, 0.05);
    const double ab = lsd(a, b);
    REQUIRE(ab >= 0.0);
    REQUIRE(ab == Approx(lsd(b, a)).epsilon(1e-12));
  }
}

TEST_CASE("lsd grows as bandwidth shrinks", "[metrics][lsd]") {
  const auto gt = testing::piano_clip(5, 3.0);
  double prev = std::numeric_limits<double>::infinity();
  for (double fc : {2500.0, 3000.0, 3500.0, 4000.0}) {
    const double v = lsd(gt, degrade(gt, {FilterFamily::kButterworth, 8, fc}));
    REQUIRE(v < prev);
    prev = v;
  }
}

TEST_CASE("metrics reject mismatched pairs", "[metrics]") {
  const auto a = testing::noise(4000, 5);
  const auto b = testing::noise(4001, 6);
  REQUIRE_THROWS_AS(lsd(a, b), Error);
  REQUIRE_THROWS_AS(stft_loss(a, b, {}), Error);
  REQUIRE_THROWS_AS(wave_loss(a, b), Error);
  REQUIRE_THROWS_AS(total_loss(a, b), Error);
  REQUIRE_THROWS_AS(lsd(a, testing::noise(4000, 6, 22050)), Error);
  LossConfig bad;
  bad.lambda = 0.0;
  REQUIRE_THROWS_AS(total_loss(a, a, bad), Error);
}

TEST_CASE("stft_loss basics", "[metrics][stft_loss]") {
  const auto y = testing::noise(6000, 7);
  const StftParams p{512, 256, 512};
  REQUIRE(stft_loss(y, y, p) == 0.0);
  const Waveform zero{std::vector<double>(y.size(), 0.0), kRate};
  REQUIRE(stft_loss_terms(y, zero, p).spectral_convergence == 1.0);
  REQUIRE(stft_loss_terms(zero, zero, p).total() == 0.0);
  REQUIRE(std::isinf(stft_loss_terms(zero, y, p).spectral_convergence));
}

TEST_CASE("stft_loss matches the brute-force oracle", "[metrics][stft_loss]") {
  std::mt19937_64 gen(8);
  for (int trial = 0; trial < 5; ++trial) {
    const auto a = testing::noise(4096, gen());
    const auto b = testing::noise(4096, gen(), kRate, 0.2);
    for (std::size_t n_fft : {512u, 1024u}) {
      const double want =
          oracle::stft_loss(oracle::naive_stft(a.samples, n_fft, n_fft / 2), oracle::naive_stft(b.samples, n_fft, n_fft / 2));
      REQUIRE(stft_loss(a, b, {n_fft, n_fft / 2, n_fft}) == Approx(want).epsilon(1e-9));
    }
  }
}

TEST_CASE("wave_loss of a constant offset", "[metrics][wave_loss]") {
  const auto y = testing::noise(5000, 9);
  REQUIRE(wave_loss(y, offset(y, 0.01)) == Approx(0.01).epsilon(1e-12));
  REQUIRE(wave_loss(y, y) == 0.0);
}

TEST_CASE("wave_loss obeys the triangle inequality", "[metrics][wave_loss][property]") {
  std::mt19937_64 gen(10);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t n = 100 + gen() % 900;
    const auto x = testing::noise(n, gen()), y = testing::noise(n, gen()), z = testing::noise(n, gen());
    REQUIRE(wave_loss(x, z) <= wave_loss(x, y) + wave_loss(y, z) + 1e-12);
  }
}

TEST_CASE("mrwave and mrstft match brute-force recomputation", "[metrics][multires]") {
  std::mt19937_64 gen(11);
  for (int trial = 0; trial < 3; ++trial) {
    const auto a = testing::noise(4096, gen());
    const auto b = testing::add(a, testing::noise(4096, gen(), kRate, 0.05));
    REQUIRE(mrwave_loss(a, b) == Approx(oracle_mrwave(a, b)).epsilon(1e-9));
    REQUIRE(mrstft_loss(a, b) == Approx(oracle_mrstft(a, b)).epsilon(1e-9));
    const auto r = loss_report(a, b);
    REQUIRE(r.total == Approx(r.mrstft + 1000.0 * r.mrwave).epsilon(1e-15));
  }
}

TEST_CASE("total_loss properties", "[metrics][total][property]") {
  const auto y = testing::piano_clip(6, 1.0);
  REQUIRE(total_loss(y, y) == 0.0);
  const auto y_hat = degrade(y, {FilterFamily::kChebyshev1, 7, 3000.0});
  REQUIRE(mrwave_loss(y, y_hat) > 0.0);
  double prev = -1.0;
  for (double lambda : {0.1, 1.0, 10.0, 100.0, 1000.0, 1e4}) {
    LossConfig cfg;
    cfg.lambda = lambda;
    const double t = total_loss(y, y_hat, cfg);
    REQUIRE(t > prev);
    REQUIRE(t >= 0.0);
    prev = t;
  }
}
