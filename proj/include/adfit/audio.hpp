#ifndef ADFIT_AUDIO_HPP
#define ADFIT_AUDIO_HPP

// PCM clips and WAV files.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iterator>
#include <string>
#include <vector>

#include "adfit/timeline.hpp"

namespace adfit {

/// Interleaved float samples in [-1, 1].
struct AudioClip {
  std::vector<float> samples;
  int sample_rate = 44100;
  int channels = 1;

  std::size_t frames() const { return channels ? samples.size() / channels : 0; }
  double seconds() const { return static_cast<double>(frames()) / sample_rate; }
  float at(std::size_t frame, int ch) const { return samples[frame * channels + ch]; }
  float& at(std::size_t frame, int ch) { return samples[frame * channels + ch]; }

  static AudioClip silence(std::size_t frames, int rate, int channels) {
    AudioClip c;
    c.sample_rate = rate;
    c.channels = channels;
    c.samples.assign(frames * channels, 0.0f);
    return c;
  }

  /// Frames [a, b), clamped to the clip.
  AudioClip slice(std::size_t a, std::size_t b) const {
    b = std::min(b, frames());
    a = std::min(a, b);
    AudioClip c;
    c.sample_rate = sample_rate;
    c.channels = channels;
    c.samples.assign(samples.begin() + a * channels, samples.begin() + b * channels);
    return c;
  }

  void append(const AudioClip& o) { samples.insert(samples.end(), o.samples.begin(), o.samples.end()); }

  bool operator==(const AudioClip&) const = default;
};

/// Frame index of time `t` at `rate`, rounded to nearest.
inline std::size_t frame_of(Millis t, int rate) {
  return static_cast<std::size_t>(std::llround(static_cast<double>(t.count()) * rate / 1000.0));
}

inline std::size_t frames_of_seconds(double s, int rate) {
  return static_cast<std::size_t>(std::llround(s * rate));
}

inline std::vector<float> mono_mix(const AudioClip& c) {
  std::vector<float> out(c.frames());
  for (std::size_t i = 0; i < out.size(); ++i) {
    float s = 0;
    for (int ch = 0; ch < c.channels; ++ch) s += c.at(i, ch);
    out[i] = s / static_cast<float>(c.channels);
  }
  return out;
}

/// Linear-interpolation resampling and channel up/down mixing.
inline AudioClip conform(const AudioClip& in, int rate, int channels) {
  AudioClip mixed;
  mixed.sample_rate = in.sample_rate;
  mixed.channels = channels;
  if (in.channels == channels) {
    mixed = in;
  } else {
    auto mono = mono_mix(in);
    mixed.samples.resize(mono.size() * channels);
    for (std::size_t i = 0; i < mono.size(); ++i)
      for (int ch = 0; ch < channels; ++ch) mixed.samples[i * channels + ch] = mono[i];
  }
  if (in.sample_rate == rate) return mixed;
  const std::size_t n = mixed.frames();
  const auto out_frames = static_cast<std::size_t>(
      std::llround(static_cast<double>(n) * rate / in.sample_rate));
  AudioClip out = AudioClip::silence(out_frames, rate, channels);
  const double step = static_cast<double>(in.sample_rate) / rate;
  for (std::size_t i = 0; i < out_frames; ++i) {
    const double pos = static_cast<double>(i) * step;
    const auto i0 = static_cast<std::size_t>(pos);
    const double f = pos - static_cast<double>(i0);
    for (int ch = 0; ch < channels; ++ch) {
      const float a = i0 < n ? mixed.at(i0, ch) : 0.0f;
      const float b = i0 + 1 < n ? mixed.at(i0 + 1, ch) : a;
      out.at(i, ch) = static_cast<float>(a + (b - a) * f);
    }
  }
  return out;
}

namespace detail {

inline std::uint32_t le32(const unsigned char* p) {
  return p[0] | (p[1] << 8) | (p[2] << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}
inline std::uint16_t le16(const unsigned char* p) { return static_cast<std::uint16_t>(p[0] | (p[1] << 8)); }

inline void put32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}
inline void put16(std::string& out, std::uint16_t v) {
  out.push_back(static_cast<char>(v & 0xff));
  out.push_back(static_cast<char>(v >> 8));
}

}  // namespace detail

/// Parses a RIFF/WAVE image: 16-bit integer or 32-bit float PCM, any
/// channel count (extensible headers included).
inline AudioClip parse_wav(const std::string& bytes, const std::string& name = "<memory>") {
  auto fail = [&](const std::string& why) { return Error("audio", name + ": " + why); };
  const auto* p = reinterpret_cast<const unsigned char*>(bytes.data());
  if (bytes.size() < 12 || std::memcmp(p, "RIFF", 4) != 0 || std::memcmp(p + 8, "WAVE", 4) != 0)
    throw fail("not a RIFF/WAVE file");
  std::size_t pos = 12;
  int format = -1, channels = 0, bits = 0;
  std::uint32_t rate = 0;
  const unsigned char* data = nullptr;
  std::size_t data_len = 0;
  while (pos + 8 <= bytes.size()) {
    const std::uint32_t len = detail::le32(p + pos + 4);
    const unsigned char* body = p + pos + 8;
    const std::size_t avail = bytes.size() - pos - 8;
    if (std::memcmp(p + pos, "fmt ", 4) == 0) {
      if (len < 16 || avail < 16) throw fail("truncated fmt chunk");
      format = detail::le16(body);
      channels = detail::le16(body + 2);
      rate = detail::le32(body + 4);
      bits = detail::le16(body + 14);
      if (format == 0xFFFE && len >= 26) format = detail::le16(body + 24);
    } else if (std::memcmp(p + pos, "data", 4) == 0) {
      data = body;
      data_len = std::min<std::size_t>(len, avail);
    }
    pos += 8 + len + (len & 1);
  }
  if (format < 0) throw fail("missing fmt chunk");
  if (!data) throw fail("missing data chunk");
  if (channels < 1 || rate == 0) throw fail("bad channel count or sample rate");
  AudioClip clip;
  clip.sample_rate = static_cast<int>(rate);
  clip.channels = channels;
  if (format == 1 && bits == 16) {
    const std::size_t n = data_len / 2 / channels * channels;
    clip.samples.resize(n);
    for (std::size_t i = 0; i < n; ++i)
      clip.samples[i] = static_cast<float>(static_cast<std::int16_t>(detail::le16(data + 2 * i))) / 32768.0f;
  } else if (format == 3 && bits == 32) {
    const std::size_t n = data_len / 4 / channels * channels;
    clip.samples.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
      const std::uint32_t u = detail::le32(data + 4 * i);
      float f;
      std::memcpy(&f, &u, 4);
      clip.samples[i] = f;
    }
  } else {
    throw fail("unsupported encoding (format " + std::to_string(format) + ", " + std::to_string(bits) +
               " bits); expected 16-bit PCM or 32-bit float");
  }
  return clip;
}

inline AudioClip read_wav(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("io", "cannot open audio file '" + path + "'");
  std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return parse_wav(bytes, path);
}

enum class WavEncoding { kFloat32, kPcm16 };

inline std::string encode_wav(const AudioClip& clip, WavEncoding enc = WavEncoding::kFloat32) {
  const std::uint16_t bits = enc == WavEncoding::kFloat32 ? 32 : 16;
  const std::uint32_t block = clip.channels * bits / 8;
  const auto data_len = static_cast<std::uint32_t>(clip.samples.size() * (bits / 8));
  std::string out;
  out.reserve(44 + data_len);
  out += "RIFF";
  detail::put32(out, 36 + data_len);
  out += "WAVEfmt ";
  detail::put32(out, 16);
  detail::put16(out, enc == WavEncoding::kFloat32 ? 3 : 1);
  detail::put16(out, static_cast<std::uint16_t>(clip.channels));
  detail::put32(out, static_cast<std::uint32_t>(clip.sample_rate));
  detail::put32(out, static_cast<std::uint32_t>(clip.sample_rate) * block);
  detail::put16(out, static_cast<std::uint16_t>(block));
  detail::put16(out, bits);
  out += "data";
  detail::put32(out, data_len);
  for (float s : clip.samples) {
    if (enc == WavEncoding::kFloat32) {
      std::uint32_t u;
      std::memcpy(&u, &s, 4);
      detail::put32(out, u);
    } else {
      const float c = std::clamp(s, -1.0f, 1.0f);
      detail::put16(out, static_cast<std::uint16_t>(static_cast<std::int16_t>(std::lrint(c * 32767.0f))));
    }
  }
  return out;
}

inline void write_wav(const std::string& path, const AudioClip& clip, WavEncoding enc = WavEncoding::kFloat32) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("io", "cannot write audio file '" + path + "'");
  const auto bytes = encode_wav(clip, enc);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error("io", "short write to '" + path + "'");
}

inline double rms(const float* x, std::size_t n) {
  if (n == 0) return 0;
  double s = 0;
  for (std::size_t i = 0; i < n; ++i) s += static_cast<double>(x[i]) * x[i];
  return std::sqrt(s / static_cast<double>(n));
}

}  // namespace adfit

#endif  // ADFIT_AUDIO_HPP
