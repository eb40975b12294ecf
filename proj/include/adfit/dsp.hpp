#ifndef ADFIT_DSP_HPP
#define ADFIT_DSP_HPP

// Short-time spectra, onset envelopes and tempo estimation.

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <mutex>
#include <numbers>
#include <numeric>
#include <optional>
#include <vector>

#include "adfit/audio.hpp"

namespace adfit {

namespace detail {
// FFTW planning is not thread-safe; execution on distinct plans is.
inline std::mutex& fftw_planner_mutex() {
  static std::mutex m;
  return m;
}
}  // namespace detail

inline std::size_t next_pow2(std::size_t n) {
  std::size_t p = 1;
  while (p < n) p <<= 1;
  return p;
}

/// Hann-windowed magnitude spectrum of size n/2+1.
class Spectrum {
 public:
  explicit Spectrum(std::size_t n) : n_(n), window_(n), mag_(n / 2 + 1) {
    std::lock_guard<std::mutex> lock(detail::fftw_planner_mutex());
    in_ = static_cast<double*>(fftw_malloc(sizeof(double) * n));
    out_ = static_cast<fftw_complex*>(fftw_malloc(sizeof(fftw_complex) * (n / 2 + 1)));
    plan_ = fftw_plan_dft_r2c_1d(static_cast<int>(n), in_, out_, FFTW_ESTIMATE);
    for (std::size_t i = 0; i < n; ++i)
      window_[i] = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * static_cast<double>(i) / static_cast<double>(n));
  }
  ~Spectrum() {
    std::lock_guard<std::mutex> lock(detail::fftw_planner_mutex());
    fftw_destroy_plan(plan_);
    fftw_free(in_);
    fftw_free(out_);
  }
  Spectrum(const Spectrum&) = delete;
  Spectrum& operator=(const Spectrum&) = delete;

  std::size_t size() const { return n_; }

  /// Magnitudes of x[0, len), zero-padded to the transform size.
  const std::vector<double>& magnitudes(const float* x, std::size_t len) {
    for (std::size_t i = 0; i < n_; ++i) in_[i] = i < len ? x[i] * window_[i] : 0.0;
    fftw_execute(plan_);
    for (std::size_t k = 0; k < mag_.size(); ++k) mag_[k] = std::hypot(out_[k][0], out_[k][1]);
    return mag_;
  }

 private:
  std::size_t n_;
  std::vector<double> window_;
  std::vector<double> mag_;
  double* in_ = nullptr;
  fftw_complex* out_ = nullptr;
  fftw_plan plan_ = nullptr;
};

/// Frequency (Hz) of the largest spectral peak in x, with parabolic
/// interpolation between bins.
inline double dominant_frequency(const float* x, std::size_t len, int rate) {
  Spectrum spec(next_pow2(std::max<std::size_t>(len, 2)));
  const auto& m = spec.magnitudes(x, len);
  std::size_t k = 1;
  for (std::size_t i = 1; i + 1 < m.size(); ++i)
    if (m[i] > m[k]) k = i;
  double offset = 0;
  if (k > 0 && k + 1 < m.size()) {
    const double a = m[k - 1], b = m[k], c = m[k + 1];
    const double den = a - 2 * b + c;
    if (den != 0) offset = 0.5 * (a - c) / den;
  }
  return (static_cast<double>(k) + offset) * rate / static_cast<double>(spec.size());
}

/// Spectral flatness (geometric over arithmetic mean of power), averaged
/// over frames of `n` samples.
inline double spectral_flatness(const std::vector<float>& x, std::size_t n = 2048) {
  Spectrum spec(n);
  double total = 0;
  int frames = 0;
  for (std::size_t pos = 0; pos + n <= x.size(); pos += n) {
    const auto& m = spec.magnitudes(x.data() + pos, n);
    double log_sum = 0, sum = 0;
    for (std::size_t k = 1; k + 1 < m.size(); ++k) {
      const double p = m[k] * m[k] + 1e-20;
      log_sum += std::log(p);
      sum += p;
    }
    const double bins = static_cast<double>(m.size() - 2);
    total += std::exp(log_sum / bins) / (sum / bins);
    ++frames;
  }
  return frames ? total / frames : 0.0;
}

struct OnsetEnvelope {
  std::vector<double> values;
  double hop_seconds = 0;
};

/// Half-wave-rectified spectral flux of log-compressed magnitudes over
/// 50%-overlapped frames of the next power of two above 10 ms.
inline OnsetEnvelope onset_envelope(const std::vector<float>& mono, int rate) {
  const std::size_t n = next_pow2(static_cast<std::size_t>(std::ceil(0.010 * rate)));
  const std::size_t hop = n / 2;
  OnsetEnvelope env;
  env.hop_seconds = static_cast<double>(hop) / rate;
  if (mono.size() < n) return env;
  Spectrum spec(n);
  std::vector<double> prev(n / 2 + 1, 0.0);
  bool first = true;
  for (std::size_t pos = 0; pos + n <= mono.size(); pos += hop) {
    const auto& m = spec.magnitudes(mono.data() + pos, n);
    double flux = 0;
    for (std::size_t k = 0; k < m.size(); ++k) {
      const double v = std::log1p(100.0 * m[k]);
      if (!first) flux += std::max(0.0, v - prev[k]);
      prev[k] = v;
    }
    env.values.push_back(first ? 0.0 : flux);
    first = false;
  }
  return env;
}

struct TempoOptions {
  double min_bpm = 30;
  double max_bpm = 240;
  double min_clip_seconds = 5;
  double min_peak_ratio = 0.1;       // autocorrelation peak over lag-0 energy
  double min_prominence = 0.05;      // peak over the mean across the lag range, same scale
};

/// Dominant beat rate of `clip` from the autocorrelation of its onset
/// envelope, or nothing for aperiodic or too-short input.
inline std::optional<double> estimate_tempo(const AudioClip& clip, std::vector<Diagnostic>* diags = nullptr,
                                            const TempoOptions& opt = {}) {
  auto none = [&](const char* code, const std::string& why) -> std::optional<double> {
    if (diags) diags->push_back({Diagnostic::Severity::kWarning, code, "tempo", why});
    return std::nullopt;
  };
  if (clip.seconds() < opt.min_clip_seconds)
    return none("clip_too_short", "need at least " + std::to_string(opt.min_clip_seconds) + " s of audio");
  auto env = onset_envelope(mono_mix(clip), clip.sample_rate);
  auto& e = env.values;
  if (e.size() < 4) return none("clip_too_short", "onset envelope too short");
  const double mean = std::accumulate(e.begin(), e.end(), 0.0) / static_cast<double>(e.size());
  for (auto& v : e) v -= mean;
  const double energy = std::inner_product(e.begin(), e.end(), e.begin(), 0.0);
  if (energy <= 1e-12) return none("aperiodic", "no onsets");

  const auto lag_min = static_cast<std::size_t>(std::floor(60.0 / opt.max_bpm / env.hop_seconds));
  const auto lag_max = std::min(e.size() - 2, static_cast<std::size_t>(std::ceil(60.0 / opt.min_bpm / env.hop_seconds)));
  if (lag_min < 1 || lag_max <= lag_min + 1) return none("clip_too_short", "lag range empty");
  std::vector<double> r(lag_max + 2, 0.0);
  for (std::size_t lag = lag_min - 1; lag <= lag_max + 1 && lag < e.size(); ++lag) {
    double s = 0;
    for (std::size_t t = 0; t + lag < e.size(); ++t) s += e[t] * e[t + lag];
    r[lag] = s / energy;  // biased: longer lags see fewer terms, favouring the fundamental
  }
  std::size_t best = 0;
  for (std::size_t lag = lag_min; lag <= lag_max; ++lag)
    if (r[lag] >= r[lag - 1] && r[lag] >= r[lag + 1] && (best == 0 || r[lag] > r[best])) best = lag;
  if (best == 0) return none("aperiodic", "no autocorrelation peak in range");
  // A beat period that falls between hops smears its own peak and can lose
  // to a multiple of the period. Move to the shortest sub-multiple (1/2 to
  // 1/4) that still peaks at half the strength.
  for (bool moved = true; moved;) {
    moved = false;
    for (std::size_t m = 4; m >= 2 && !moved; --m) {
      const std::size_t c = (best + m / 2) / m;
      if (c < lag_min + 1) continue;
      std::size_t sub = 0;
      for (std::size_t lag = c - 1; lag <= c + 1 && lag <= lag_max; ++lag)
        if (r[lag] >= r[lag - 1] && r[lag] >= r[lag + 1] && (sub == 0 || r[lag] > r[sub])) sub = lag;
      if (sub != 0 && r[sub] >= 0.5 * r[best]) {
        best = sub;
        moved = true;
      }
    }
  }
  double avg = 0;
  for (std::size_t lag = lag_min; lag <= lag_max; ++lag) avg += r[lag];
  avg /= static_cast<double>(lag_max - lag_min + 1);
  if (r[best] < opt.min_peak_ratio || r[best] - avg < opt.min_prominence)
    return none("aperiodic", "autocorrelation peak not prominent");
  double offset = 0;
  const double den = r[best - 1] - 2 * r[best] + r[best + 1];
  if (den != 0) offset = std::clamp(0.5 * (r[best - 1] - r[best + 1]) / den, -0.5, 0.5);
  return 60.0 / ((static_cast<double>(best) + offset) * env.hop_seconds);
}

}  // namespace adfit

#endif  // ADFIT_DSP_HPP
