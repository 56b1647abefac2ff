#pragma once

// Mono RIFF/WAVE reader for source signals: 16-bit integer PCM or 32-bit
// IEEE float, plain or WAVE_FORMAT_EXTENSIBLE.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <string>
#include <vector>

#include "sfr/error.hpp"
#include "sfr/field_io.hpp"

namespace sfr {

struct WavInfo {
  std::uint16_t format = 0;  // 1 = PCM, 3 = float
  std::uint16_t channels = 0;
  std::uint32_t sample_rate = 0;
  std::uint16_t bits = 0;
};

struct WavAudio {
  WavInfo info;
  std::vector<double> samples;  // PCM scaled to [-1, 1)
};

namespace detail {

inline std::uint32_t le32(const std::string& b, std::size_t pos) {
  std::uint32_t v = 0;
  for (int i = 3; i >= 0; --i) v = (v << 8) | static_cast<unsigned char>(b[pos + static_cast<std::size_t>(i)]);
  return v;
}

inline std::uint16_t le16(const std::string& b, std::size_t pos) {
  return static_cast<std::uint16_t>(static_cast<unsigned char>(b[pos]) |
                                    (static_cast<unsigned char>(b[pos + 1]) << 8));
}

}  // namespace detail

inline WavAudio decode_wav(const std::string& bytes) {
  if (bytes.size() < 12 || bytes.compare(0, 4, "RIFF") != 0 || bytes.compare(8, 4, "WAVE") != 0)
    throw ParseError("riff", "not a RIFF/WAVE file");
  WavAudio out;
  bool have_fmt = false;
  std::size_t pos = 12;
  while (pos + 8 <= bytes.size()) {
    const std::string id = bytes.substr(pos, 4);
    const std::uint32_t size = detail::le32(bytes, pos + 4);
    const std::size_t body = pos + 8;
    if (body + size > bytes.size()) throw ParseError(id, "chunk runs past the end of the file");
    if (id == "fmt ") {
      if (size < 16) throw ParseError("fmt", "chunk too short");
      out.info.format = detail::le16(bytes, body);
      out.info.channels = detail::le16(bytes, body + 2);
      out.info.sample_rate = detail::le32(bytes, body + 4);
      out.info.bits = detail::le16(bytes, body + 14);
      if (out.info.format == 0xFFFE) {
        if (size < 40) throw ParseError("fmt", "extensible format chunk too short");
        out.info.format = detail::le16(bytes, body + 24);  // first two bytes of the subformat GUID
      }
      have_fmt = true;
    } else if (id == "data") {
      if (!have_fmt) throw ParseError("data", "data chunk precedes fmt chunk");
      if (out.info.channels != 1) throw ParseError("channels", std::to_string(out.info.channels) + " channels, expected mono");
      if (out.info.format == 1 && out.info.bits == 16) {
        out.samples.resize(size / 2);
        for (std::size_t i = 0; i < out.samples.size(); ++i)
          out.samples[i] = static_cast<std::int16_t>(detail::le16(bytes, body + 2 * i)) / 32768.0;
      } else if (out.info.format == 3 && out.info.bits == 32) {
        out.samples.resize(size / 4);
        for (std::size_t i = 0; i < out.samples.size(); ++i) {
          const std::uint32_t u = detail::le32(bytes, body + 4 * i);
          float f;
          std::memcpy(&f, &u, sizeof f);
          out.samples[i] = f;
        }
      } else {
        throw ParseError("format", "unsupported encoding (format " + std::to_string(out.info.format) + ", " +
                                       std::to_string(out.info.bits) + " bits); need 16-bit PCM or 32-bit float");
      }
      return out;
    }
    pos = body + size + (size & 1u);
  }
  throw ParseError("data", "no data chunk");
}

/// Reads a mono WAV and checks its sample rate.
inline WavAudio read_wav(const std::filesystem::path& path, double expected_rate = 16000.0) {
  auto wav = decode_wav(detail::read_file(path));
  if (expected_rate > 0.0 && static_cast<double>(wav.info.sample_rate) != expected_rate)
    throw ParseError("sample_rate", path.string() + " is sampled at " + std::to_string(wav.info.sample_rate) +
                                        " Hz, expected " + std::to_string(static_cast<long>(expected_rate)) + " Hz");
  return wav;
}

/// 16-bit PCM mono encoding (used for fixtures and demos).
inline std::string encode_wav_pcm16(const std::vector<double>& x, std::uint32_t rate) {
  std::string b;
  auto put32 = [&](std::uint32_t v) {
    for (int i = 0; i < 4; ++i) b.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
  };
  auto put16 = [&](std::uint16_t v) {
    b.push_back(static_cast<char>(v & 0xFF));
    b.push_back(static_cast<char>(v >> 8));
  };
  const auto data = static_cast<std::uint32_t>(2 * x.size());
  b += "RIFF";
  put32(36 + data);
  b += "WAVEfmt ";
  put32(16);
  put16(1);
  put16(1);
  put32(rate);
  put32(rate * 2);
  put16(2);
  put16(16);
  b += "data";
  put32(data);
  for (double v : x) {
    const double s = std::clamp(v, -1.0, 32767.0 / 32768.0) * 32768.0;
    put16(static_cast<std::uint16_t>(static_cast<std::int16_t>(std::lround(s))));
  }
  return b;
}

}  // namespace sfr
