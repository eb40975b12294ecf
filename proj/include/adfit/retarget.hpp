#ifndef ADFIT_RETARGET_HPP
#define ADFIT_RETARGET_HPP

// Crossfaded splicing, music looping and ambient extension.
//
// Every edit is expressed as a splice list: source ranges concatenated with
// an overlap (and fade shape) at each join. Executing the list is exact and
// cheap, so manifests store the list itself and replay never searches.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <string>
#include <vector>

#include "adfit/audio.hpp"
#include "adfit/dsp.hpp"

namespace adfit {

enum class FadeShape { kEqualPower, kLinear };

inline std::string_view to_string(FadeShape f) { return f == FadeShape::kLinear ? "linear" : "equal_power"; }
inline FadeShape parse_fade_shape(std::string_view s) {
  if (s == "linear") return FadeShape::kLinear;
  if (s == "equal_power") return FadeShape::kEqualPower;
  throw Error("validation", "unknown fade shape '" + std::string(s) + "'");
}

/// Source frames [begin, end), overlapping the previous part by `overlap`
/// frames.
struct SplicePart {
  std::int64_t begin = 0;
  std::int64_t end = 0;
  std::int64_t overlap = 0;
  FadeShape fade = FadeShape::kEqualPower;

  std::int64_t length() const { return end - begin; }
  bool operator==(const SplicePart&) const = default;
};

inline std::int64_t spliced_length(const std::vector<SplicePart>& parts) {
  std::int64_t n = 0;
  for (const auto& p : parts) n += p.length() - p.overlap;
  return n;
}

inline AudioClip splice(const AudioClip& src, const std::vector<SplicePart>& parts) {
  const auto n = static_cast<std::int64_t>(src.frames());
  const int ch = src.channels;
  std::int64_t pos = 0;
  for (std::size_t k = 0; k < parts.size(); ++k) {
    const auto& p = parts[k];
    if (p.begin < 0 || p.end > n || p.begin > p.end)
      throw Error("audio", "splice part " + std::to_string(k) + " [" + std::to_string(p.begin) + ", " +
                               std::to_string(p.end) + ") outside source of " + std::to_string(n) + " frames");
    if (p.overlap < 0 || p.overlap > p.length() || p.overlap > pos)
      throw Error("audio", "splice part " + std::to_string(k) + " has an impossible overlap");
    pos += p.length() - p.overlap;
  }
  AudioClip out = AudioClip::silence(static_cast<std::size_t>(pos), src.sample_rate, ch);
  pos = 0;
  for (const auto& p : parts) {
    const std::int64_t start = pos - p.overlap;
    for (std::int64_t i = 0; i < p.length(); ++i) {
      const std::int64_t o = start + i;
      if (i < p.overlap) {
        const double t = (static_cast<double>(i) + 0.5) / static_cast<double>(p.overlap);
        double g_in, g_out;
        if (p.fade == FadeShape::kLinear) {
          g_in = t;
          g_out = 1.0 - t;
        } else {
          g_in = std::sin(0.5 * std::numbers::pi * t);
          g_out = std::cos(0.5 * std::numbers::pi * t);
        }
        for (int c = 0; c < ch; ++c)
          out.samples[o * ch + c] = static_cast<float>(g_out * out.samples[o * ch + c] +
                                                       g_in * src.samples[(p.begin + i) * ch + c]);
      } else {
        for (int c = 0; c < ch; ++c) out.samples[o * ch + c] = src.samples[(p.begin + i) * ch + c];
      }
    }
    pos = start + p.length();
  }
  return out;
}

/// Normalized cross-correlation of mono x[a, a+len) and x[b, b+len).
inline double ncc(const std::vector<float>& x, std::int64_t a, std::int64_t b, std::int64_t len) {
  double xy = 0, xx = 0, yy = 0;
  for (std::int64_t i = 0; i < len; ++i) {
    const double u = x[a + i], v = x[b + i];
    xy += u * v;
    xx += u * u;
    yy += v * v;
  }
  if (xx <= 1e-18 || yy <= 1e-18) return xx <= 1e-18 && yy <= 1e-18 ? 1.0 : 0.0;
  return xy / std::sqrt(xx * yy);
}

/// Per-frame RMS and spectral centroid, each z-normalized over the clip.
struct FrameFeatures {
  std::int64_t frame = 0;  // samples per frame
  std::vector<double> rms;
  std::vector<double> centroid;
};

inline FrameFeatures frame_features(const std::vector<float>& mono, int rate, double frame_seconds = 0.05) {
  FrameFeatures f;
  f.frame = std::max<std::int64_t>(1, std::llround(frame_seconds * rate));
  const auto n = static_cast<std::int64_t>(mono.size());
  Spectrum spec(next_pow2(static_cast<std::size_t>(f.frame)));
  for (std::int64_t pos = 0; pos + f.frame <= n; pos += f.frame) {
    f.rms.push_back(rms(mono.data() + pos, static_cast<std::size_t>(f.frame)));
    const auto& m = spec.magnitudes(mono.data() + pos, static_cast<std::size_t>(f.frame));
    double num = 0, den = 0;
    for (std::size_t k = 0; k < m.size(); ++k) {
      num += static_cast<double>(k) * m[k];
      den += m[k];
    }
    f.centroid.push_back(den > 0 ? num / den * rate / static_cast<double>(spec.size()) : 0.0);
  }
  for (auto* v : {&f.rms, &f.centroid}) {
    if (v->empty()) continue;
    double mean = 0, var = 0;
    for (double x : *v) mean += x;
    mean /= static_cast<double>(v->size());
    for (double x : *v) var += (x - mean) * (x - mean);
    const double sd = std::sqrt(var / static_cast<double>(v->size()));
    for (double& x : *v) x = sd > 1e-12 ? (x - mean) / sd : 0.0;
  }
  return f;
}

struct ExtendOptions {
  double crossfade_seconds = 0.05;   // loop seams
  double min_loop_seconds = 2.0;
  int max_loop_count = 16;
  double context_seconds = 0.25;     // feature comparison window on each side of a seam
  double max_loop_distance = 1.5;    // feature distance + (1 - NCC) accepted for a seam
  double ambient_tail_seconds = 0.2; // original ending kept after ambient fill
};

struct Extension {
  std::vector<SplicePart> parts;
  std::string method;           // identity | loop | ambient
  std::int64_t loop_lag = 0;    // frames jumped back per loop
  int loops = 0;
  double seam_score = 0;
  std::vector<Diagnostic> diagnostics;
};

namespace detail {

inline void check_target(std::int64_t n, std::int64_t target, const char* what) {
  if (target < n)
    throw Error("extend", std::string(what) + " target " + std::to_string(target) +
                              " frames is shorter than the clip (" + std::to_string(n) + ")");
  if (target > 2 * n)
    throw Error("extend", std::string(what) + " target " + std::to_string(target) +
                              " frames exceeds twice the clip length (" + std::to_string(n) + ")");
}

}  // namespace detail

/// Random 0.2-1.0 s excerpts appended with 0-0.2 s equal-power overlaps,
/// ending on the clip's own last `ambient_tail_seconds`.
inline Extension plan_ambient_extension(const AudioClip& clip, std::int64_t target, std::uint64_t seed,
                                        const ExtendOptions& opt = {}) {
  const auto n = static_cast<std::int64_t>(clip.frames());
  detail::check_target(n, target, "ambient extension");
  Extension ext;
  if (target == n) {
    ext.method = "identity";
    ext.parts = {{0, n, 0, FadeShape::kEqualPower}};
    return ext;
  }
  ext.method = "ambient";
  const int rate = clip.sample_rate;
  std::mt19937_64 rng(seed);
  // Not std::uniform_real_distribution: its output differs between standard libraries.
  auto unit = [](std::mt19937_64& g) { return static_cast<double>(g() >> 11) * 0x1.0p-53; };
  const std::int64_t tail = std::min<std::int64_t>(frames_of_seconds(opt.ambient_tail_seconds, rate), n / 4);
  ext.parts.push_back({0, n - tail, 0, FadeShape::kEqualPower});
  std::int64_t cur = n - tail;
  const std::int64_t body = target - tail;
  while (cur < body) {
    std::int64_t len = std::min<std::int64_t>(n, frames_of_seconds(0.2 + 0.8 * unit(rng), rate));
    len = std::max<std::int64_t>(len, 1);
    std::int64_t overlap = frames_of_seconds(0.2 * unit(rng), rate);
    overlap = std::min({overlap, len / 2, ext.parts.back().length() / 2});
    const auto start = static_cast<std::int64_t>(std::floor(unit(rng) * static_cast<double>(n - len + 1)));
    SplicePart p{start, start + len, overlap, FadeShape::kEqualPower};
    const std::int64_t grown = cur + len - overlap;
    if (grown > body) p.end -= grown - body;  // trim the overshoot
    ext.parts.push_back(p);
    cur += p.length() - p.overlap;
  }
  // Back onto the original ending.
  const auto& last = ext.parts.back();
  std::int64_t overlap = frames_of_seconds(0.2 * unit(rng), rate);
  overlap = std::min({overlap, last.length() - last.overlap, n - tail});
  ext.parts.push_back({n - tail - overlap, n, overlap, FadeShape::kEqualPower});
  return ext;
}

/// Loops the clip back on itself at its most self-similar point so that
/// the extended clip keeps its original start and ending. The extension is
/// split into k equal jumps of at least `min_loop_seconds` (or one jump when
/// it is shorter); each k is scored by feature distance plus waveform
/// dissimilarity at the best seam, and the best k wins. Falls back to the
/// ambient method when no seam scores under `max_loop_distance`.
inline Extension plan_music_extension(const AudioClip& clip, std::int64_t target, std::uint64_t seed,
                                      const ExtendOptions& opt = {}) {
  const auto n = static_cast<std::int64_t>(clip.frames());
  detail::check_target(n, target, "music extension");
  Extension ext;
  if (target == n) {
    ext.method = "identity";
    ext.parts = {{0, n, 0, FadeShape::kEqualPower}};
    return ext;
  }
  const int rate = clip.sample_rate;
  const auto mono = mono_mix(clip);
  const auto feats = frame_features(mono, rate);
  const std::int64_t delta = target - n;
  const std::int64_t h = std::max<std::int64_t>(1, frames_of_seconds(opt.crossfade_seconds, rate) / 2);
  const std::int64_t min_loop = frames_of_seconds(opt.min_loop_seconds, rate);
  const std::int64_t ctx = std::max<std::int64_t>(1, std::llround(opt.context_seconds / 0.05));
  const auto nf = static_cast<std::int64_t>(feats.rms.size());

  struct Seam {
    double score = 1e300;
    int k = 0;
    std::int64_t b = 0;
    double corr = 0;
  } best;
  const int max_k = delta < min_loop ? 1 : static_cast<int>(std::min<std::int64_t>(opt.max_loop_count, delta / min_loop));
  for (int k = 1; k <= max_k; ++k) {
    const std::int64_t lag = delta / k;          // remainder spread over the first jumps
    const std::int64_t lag_hi = lag + (delta % k ? 1 : 0);
    std::vector<std::pair<double, std::int64_t>> ranked;
    for (std::int64_t m = 0; m < nf; ++m) {
      const std::int64_t b = m * feats.frame;
      if (b - lag_hi - h < 0 || b + h > n) continue;
      const std::int64_t ma = static_cast<std::int64_t>(std::llround(static_cast<double>(b - lag) / feats.frame));
      double d = 0;
      int cnt = 0;
      for (std::int64_t j = -ctx; j < ctx; ++j) {
        const std::int64_t x = m + j, y = ma + j;
        if (x < 0 || y < 0 || x >= nf || y >= nf) continue;
        d += std::hypot(feats.rms[x] - feats.rms[y], feats.centroid[x] - feats.centroid[y]);
        ++cnt;
      }
      ranked.push_back({cnt ? d / cnt : 1e9, b});
    }
    std::stable_sort(ranked.begin(), ranked.end(),
                     [](const auto& a, const auto& b) { return a.first < b.first; });
    if (ranked.size() > 8) ranked.resize(8);
    for (auto [d, b] : ranked) {
      const double c = ncc(mono, b - h, b - lag - h, 2 * h);
      const double score = d + (1.0 - c);
      if (score < best.score - 1e-12) best = {score, k, b, c};
    }
  }
  if (best.k == 0 || best.score > opt.max_loop_distance) {
    auto fallback = plan_ambient_extension(clip, target, seed, opt);
    fallback.diagnostics.push_back({Diagnostic::Severity::kWarning, "no_loop_point", "music",
                                    "no seam scored under " + std::to_string(opt.max_loop_distance) +
                                        "; extended as ambient"});
    return fallback;
  }
  ext.method = "loop";
  ext.loops = best.k;
  ext.loop_lag = delta / best.k;
  ext.seam_score = best.score;
  const FadeShape fade = best.corr >= 0.5 ? FadeShape::kLinear : FadeShape::kEqualPower;
  const std::int64_t b = best.b;
  std::int64_t rem = delta % best.k;
  ext.parts.push_back({0, b + h, 0, fade});
  for (int i = 0; i < best.k; ++i) {
    const std::int64_t lag = ext.loop_lag + (rem-- > 0 ? 1 : 0);
    const std::int64_t a = b - lag;
    const bool last = i + 1 == best.k;
    ext.parts.push_back({a - h, last ? n : b + h, 2 * h, fade});
  }
  return ext;
}

inline AudioClip extend_music(const AudioClip& clip, std::int64_t target, std::uint64_t seed,
                              std::vector<Diagnostic>* diags = nullptr, const ExtendOptions& opt = {}) {
  auto plan = plan_music_extension(clip, target, seed, opt);
  if (diags) diags->insert(diags->end(), plan.diagnostics.begin(), plan.diagnostics.end());
  return splice(clip, plan.parts);
}

inline AudioClip extend_ambient(const AudioClip& clip, std::int64_t target, std::uint64_t seed,
                                const ExtendOptions& opt = {}) {
  return splice(clip, plan_ambient_extension(clip, target, seed, opt).parts);
}

}  // namespace adfit

#endif  // ADFIT_RETARGET_HPP
