#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <filesystem>
#include <random>

#include "support/signals.hpp"
#include "tdpr/resample.hpp"
#include "tdpr/wav.hpp"
#include "tdpr/waveform.hpp"

using namespace tdpr;
using Catch::Approx;

namespace {

std::filesystem::path temp_path(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / "tdpr_test_audio_io";
  std::filesystem::create_directories(dir);
  return dir / name;
}

// Hand-assembled 16-bit PCM image with `channels` interleaved channels.
std::vector<unsigned char> pcm16_image(const std::vector<std::int16_t>& interleaved, int channels, int rate) {
  std::vector<unsigned char> b;
  auto u32 = [&](std::uint32_t v) { for (int i = 0; i < 4; ++i) b.push_back(static_cast<unsigned char>(v >> (8 * i))); };
  auto u16 = [&](std::uint16_t v) { b.push_back(static_cast<unsigned char>(v)); b.push_back(static_cast<unsigned char>(v >> 8)); };
  const auto data_len = static_cast<std::uint32_t>(interleaved.size() * 2);
  b.insert(b.end(), {'R', 'I', 'F', 'F'});
  u32(36 + data_len);
  b.insert(b.end(), {'W', 'A', 'V', 'E', 'f', 'm', 't', ' '});
  u32(16);
  u16(1);
  u16(static_cast<std::uint16_t>(channels));
  u32(static_cast<std::uint32_t>(rate));
  u32(static_cast<std::uint32_t>(rate * channels * 2));
  u16(static_cast<std::uint16_t>(channels * 2));
  u16(16);
  b.insert(b.end(), {'d', 'a', 't', 'a'});
  u32(data_len);
  for (auto s : interleaved) u16(static_cast<std::uint16_t>(s));
  return b;
}

}  // namespace

TEST_CASE("read_wav scales 16-bit PCM by 1/32768", "[audio-io][wav]") {
  const auto w = decode_wav(pcm16_image({16384}, 1, 22050));
  REQUIRE(w.sample_rate_hz == 22050);
  REQUIRE(w.samples == std::vector<double>{0.5});
}

TEST_CASE("read_wav averages channels to mono", "[audio-io][wav]") {
  const auto w = decode_wav(pcm16_image({32767, 0, -32768, -32768}, 2, 16000));
  REQUIRE(w.size() == 2);
  REQUIRE(w.samples[0] == Approx(32767.0 / 65536.0));
  REQUIRE(w.samples[1] == -1.0);
}

TEST_CASE("read_wav of a 3 s 16 kHz file yields 48000 samples", "[audio-io][wav]") {
  const auto path = temp_path("three_seconds.wav");
  write_wav(path, testing::sine(440.0, 3.0), SampleFormat::kInt16);
  REQUIRE(read_wav(path).size() == 48000);
}

TEST_CASE("read_wav errors", "[audio-io][wav]") {
  REQUIRE_THROWS_AS(read_wav(temp_path("does_not_exist.wav")), Error);
  REQUIRE_THROWS_AS(decode_wav({'n', 'o', 'p', 'e'}), Error);
  REQUIRE_THROWS_AS(decode_wav(pcm16_image({}, 1, 16000)), Error);

  auto image = pcm16_image({1, 2}, 1, 16000);
  image[20] = 2;  // format tag: ADPCM
  REQUIRE_THROWS_WITH(decode_wav(image), Catch::Matchers::ContainsSubstring("unsupported codec"));
}

TEST_CASE("write_wav float32 is lossless for float values", "[audio-io][wav]") {
  const Waveform w{{0.25}, 16000};
  const auto path = temp_path("quarter.wav");
  write_wav(path, w, SampleFormat::kFloat32);
  REQUIRE(read_wav(path).samples == std::vector<double>{0.25});
}

TEST_CASE("write_wav int16 clips out-of-range samples and reports them", "[audio-io][wav]") {
  std::vector<std::string> warnings;
  auto saved = warning_handler();
  warning_handler() = [&](std::string_view m) { warnings.emplace_back(m); };
  WriteReport report;
  const auto bytes = encode_wav(Waveform{{1.5, -2.0, 0.5}, 16000}, SampleFormat::kInt16, &report);
  warning_handler() = saved;

  REQUIRE(report.clipped == 2);
  REQUIRE(warnings.size() == 1);
  const auto back = decode_wav(bytes);
  REQUIRE(back.samples[0] == Approx(1.0).margin(std::ldexp(1.0, -15)));
  REQUIRE(back.samples[1] == -1.0);
  REQUIRE(std::abs(back.samples[2] - 0.5) <= std::ldexp(1.0, -15));
}

TEST_CASE("write/read round trip bounds hold on random buffers", "[audio-io][wav][property]") {
  std::mt19937_64 gen(7);
  std::uniform_real_distribution<double> amp(-1.0, 1.0);
  std::uniform_int_distribution<int> len(1, 4000);
  for (int trial = 0; trial < 50; ++trial) {
    Waveform w{std::vector<double>(static_cast<std::size_t>(len(gen))), 16000};
    for (auto& v : w.samples) v = static_cast<float>(amp(gen));  // float-representable
    const auto f32 = decode_wav(encode_wav(w, SampleFormat::kFloat32));
    REQUIRE(f32.samples == w.samples);
    const auto i16 = decode_wav(encode_wav(w, SampleFormat::kInt16));
    REQUIRE(testing::max_abs_diff(i16.samples, w.samples) <= std::ldexp(1.0, -15));
  }
}

TEST_CASE("resample to the source rate is the identity", "[audio-io][resample]") {
  const auto w = testing::noise(1234, 3);
  REQUIRE(resample(w, 16000).samples == w.samples);
}

TEST_CASE("resample output length is ceil(len * target / source)", "[audio-io][resample]") {
  const auto w = testing::noise(1001, 4);
  REQUIRE(resample(w, 8000).size() == 501);
  REQUIRE(resample(w, 6000).size() == 376);  // ceil(1001 * 3 / 8)
  REQUIRE(resample(w, 44100).size() == 2760);  // ceil(441441 / 160)
  REQUIRE(resample(w, 6000).sample_rate_hz == 6000);
}

TEST_CASE("1 kHz sine survives 16k -> 8k -> 16k", "[audio-io][resample]") {
  const auto x = testing::sine(1000.0, 1.0);
  const auto y = resample(resample(x, 8000), 16000);
  REQUIRE(y.size() == x.size());
  const std::size_t margin = 64 * 2;  // one kernel length at the high rate
  REQUIRE(testing::correlation(x.samples, y.samples, margin, x.size() - margin) > 0.999);
}

TEST_CASE("white noise 16k -> 6k -> 16k is band-limited to 3 kHz", "[audio-io][resample]") {
  const auto x = testing::noise(16000, 11);
  const auto y = resample(resample(x, 6000), 16000);
  const std::size_t margin = 512;
  REQUIRE(testing::band_energy_ratio_db(y.samples, 16000, 3000.0, margin, y.size() - margin) <= -40.0);
}

TEST_CASE("resample preserves a constant level in the interior", "[audio-io][resample][property]") {
  for (int target : {4000, 6000, 8000, 11025, 22050, 48000}) {
    const Waveform dc{std::vector<double>(8000, 0.37), 16000};
    const auto y = resample(dc, target);
    const std::size_t margin = y.size() / 8;
    for (std::size_t i = margin; i < y.size() - margin; ++i) REQUIRE(y.samples[i] == Approx(0.37).margin(1e-3));
  }
}

TEST_CASE("peak_normalize", "[audio-io][normalize]") {
  SECTION("peak 0.5 to -1 dBFS") {
    const auto y = peak_normalize(Waveform{{0.1, -0.5, 0.25}, 16000}, -1.0);
    REQUIRE(peak_abs(y.samples) == Approx(0.8913).margin(1e-4));
    REQUIRE(std::abs(peak_abs(y.samples) - std::pow(10.0, -1.0 / 20.0)) < 1e-6);
  }
  SECTION("already at target is unchanged") {
    const double target = std::pow(10.0, -3.0 / 20.0);
    const Waveform w{{target, -0.2, 0.1}, 16000};
    const auto y = peak_normalize(w, -3.0);
    REQUIRE(testing::max_abs_diff(y.samples, w.samples) < 1e-9);
  }
  SECTION("all-zero input is returned unchanged with a warning") {
    int warnings = 0;
    auto saved = warning_handler();
    warning_handler() = [&](std::string_view) { ++warnings; };
    const Waveform w{{0.0, 0.0}, 16000};
    const auto y = peak_normalize(w);
    warning_handler() = saved;
    REQUIRE(y.samples == w.samples);
    REQUIRE(warnings == 1);
  }
  SECTION("idempotent") {
    const auto w = testing::noise(500, 5, 16000, 0.7);
    const auto once = peak_normalize(w, -6.0);
    const auto twice = peak_normalize(once, -6.0);
    REQUIRE(testing::max_abs_diff(once.samples, twice.samples) < 1e-9);
  }
  SECTION("positive target rejected") {
    REQUIRE_THROWS_AS(peak_normalize(Waveform{{0.1}, 16000}, 1.0), Error);
  }
}

TEST_CASE("slice cuts clips by seconds", "[audio-io]") {
  const auto w = testing::noise(16000 * 12, 1);
  REQUIRE(slice(w, 0.0, 5.0).size() == 80000);
  REQUIRE(slice(w, 10.0, 5.0).size() == 32000);
  REQUIRE(slice(w, 5.0, 5.0).samples.front() == w.samples[80000]);
}
