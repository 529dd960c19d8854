#pragma once

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <string>
#include <vector>

#include "tdpr/error.hpp"
#include "tdpr/waveform.hpp"

namespace tdpr {

enum class SampleFormat { kInt16, kFloat32 };

struct WriteReport {
  std::size_t clipped = 0;  // samples outside [-1, 1] that were hard-clipped
};

namespace detail {

inline std::uint32_t read_u32le(const unsigned char* p) {
  return std::uint32_t{p[0]} | std::uint32_t{p[1]} << 8 | std::uint32_t{p[2]} << 16 |
         std::uint32_t{p[3]} << 24;
}
inline std::uint16_t read_u16le(const unsigned char* p) {
  return static_cast<std::uint16_t>(p[0] | p[1] << 8);
}
inline void put_u32le(std::vector<unsigned char>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<unsigned char>(v >> (8 * i)));
}
inline void put_u16le(std::vector<unsigned char>& out, std::uint16_t v) {
  out.push_back(static_cast<unsigned char>(v));
  out.push_back(static_cast<unsigned char>(v >> 8));
}

constexpr std::uint16_t kFormatPcm = 1;
constexpr std::uint16_t kFormatFloat = 3;
constexpr std::uint16_t kFormatExtensible = 0xFFFE;

}  // namespace detail

/// Decodes an in-memory RIFF/WAVE image to mono. Channels are averaged.
inline Waveform decode_wav(const std::vector<unsigned char>& bytes, const std::string& name = "<memory>") {
  using namespace detail;
  auto fail = [&](const std::string& why) { return Error(name + ": " + why); };
  if (bytes.size() < 12 || std::memcmp(bytes.data(), "RIFF", 4) != 0 ||
      std::memcmp(bytes.data() + 8, "WAVE", 4) != 0) {
    throw fail("not a RIFF/WAVE file");
  }
  std::uint16_t format = 0, channels = 0, bits = 0;
  std::uint32_t rate = 0;
  const unsigned char* data = nullptr;
  std::size_t data_len = 0;
  bool have_fmt = false;

  std::size_t pos = 12;
  while (pos + 8 <= bytes.size()) {
    const unsigned char* chunk = bytes.data() + pos;
    const std::uint32_t len = read_u32le(chunk + 4);
    const std::size_t body = pos + 8;
    const std::size_t avail = std::min<std::size_t>(len, bytes.size() - body);
    if (std::memcmp(chunk, "fmt ", 4) == 0) {
      if (avail < 16) throw fail("truncated fmt chunk");
      format = read_u16le(chunk + 8);
      channels = read_u16le(chunk + 10);
      rate = read_u32le(chunk + 12);
      bits = read_u16le(chunk + 22);
      if (format == kFormatExtensible && avail >= 26) format = read_u16le(chunk + 32);
      have_fmt = true;
    } else if (std::memcmp(chunk, "data", 4) == 0) {
      data = chunk + 8;
      data_len = avail;
    }
    pos = body + len + (len & 1u);
  }
  if (!have_fmt) throw fail("missing fmt chunk");
  if (data == nullptr) throw fail("missing data chunk");
  if (channels == 0 || rate == 0) throw fail("invalid channel count or sample rate");
  const bool is_i16 = format == kFormatPcm && bits == 16;
  const bool is_f32 = format == kFormatFloat && bits == 32;
  if (!is_i16 && !is_f32) {
    throw fail("unsupported codec (format " + std::to_string(format) + ", " +
               std::to_string(bits) + " bits)");
  }
  const std::size_t frame_bytes = std::size_t{channels} * (bits / 8);
  const std::size_t frames = data_len / frame_bytes;
  if (frames == 0) throw fail("zero-length audio");

  Waveform w{std::vector<double>(frames, 0.0), static_cast<int>(rate)};
  for (std::size_t i = 0; i < frames; ++i) {
    double acc = 0.0;
    for (std::size_t c = 0; c < channels; ++c) {
      const unsigned char* p = data + i * frame_bytes + c * (bits / 8);
      if (is_i16) {
        acc += static_cast<std::int16_t>(read_u16le(p)) / 32768.0;
      } else {
        acc += static_cast<double>(std::bit_cast<float>(read_u32le(p)));
      }
    }
    w.samples[i] = acc / channels;
  }
  if (!all_finite(w.samples)) throw fail("non-finite samples");
  return w;
}

inline Waveform read_wav(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(path.string() + ": cannot open for reading");
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return decode_wav(bytes, path.string());
}

/// Encodes a mono RIFF/WAVE image. Out-of-range samples are clipped and counted.
inline std::vector<unsigned char> encode_wav(const Waveform& w, SampleFormat format,
                                             WriteReport* report = nullptr) {
  using namespace detail;
  validate(w);
  const std::uint16_t bits = format == SampleFormat::kInt16 ? 16 : 32;
  const std::uint16_t tag = format == SampleFormat::kInt16 ? kFormatPcm : kFormatFloat;
  const std::uint32_t data_len = static_cast<std::uint32_t>(w.size() * (bits / 8));
  const auto rate = static_cast<std::uint32_t>(w.sample_rate_hz);

  std::vector<unsigned char> out;
  out.reserve(44 + data_len);
  out.insert(out.end(), {'R', 'I', 'F', 'F'});
  put_u32le(out, 36 + data_len);
  out.insert(out.end(), {'W', 'A', 'V', 'E', 'f', 'm', 't', ' '});
  put_u32le(out, 16);
  put_u16le(out, tag);
  put_u16le(out, 1);
  put_u32le(out, rate);
  put_u32le(out, rate * (bits / 8));
  put_u16le(out, bits / 8);
  put_u16le(out, bits);
  out.insert(out.end(), {'d', 'a', 't', 'a'});
  put_u32le(out, data_len);

  std::size_t clipped = 0;
  for (double v : w.samples) {
    if (v > 1.0 || v < -1.0) {
      ++clipped;
      v = std::clamp(v, -1.0, 1.0);
    }
    if (format == SampleFormat::kInt16) {
      const double scaled = std::clamp(std::nearbyint(v * 32768.0), -32768.0, 32767.0);
      put_u16le(out, static_cast<std::uint16_t>(static_cast<std::int16_t>(scaled)));
    } else {
      put_u32le(out, std::bit_cast<std::uint32_t>(static_cast<float>(v)));
    }
  }
  if (clipped > 0) warn(std::to_string(clipped) + " sample(s) clipped on write");
  if (report != nullptr) report->clipped = clipped;
  return out;
}

inline WriteReport write_wav(const std::filesystem::path& path, const Waveform& w,
                             SampleFormat format = SampleFormat::kFloat32) {
  WriteReport report;
  const auto bytes = encode_wav(w, format, &report);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(path.string() + ": cannot open for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error(path.string() + ": write failed");
  return report;
}

}  // namespace tdpr
