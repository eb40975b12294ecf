#ifndef ADFIT_RENDER_HPP
#define ADFIT_RENDER_HPP

// Narration cutting, plan rendering and the replayable render manifest.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <numbers>
#include <string>
#include <vector>

#include <json.hpp>

#include "adfit/audio.hpp"
#include "adfit/candidates.hpp"
#include "adfit/optimizer.hpp"
#include "adfit/retarget.hpp"

namespace adfit {

struct NarrationClip {
  AudioClip audio;
  std::string source;  // recording | placeholder
  int joins = 0;       // crossfaded word joins
};

/// Kept words of a recorded take, joined run by run with a 5 ms
/// equal-power overlap. Output length is the sum of run lengths minus one
/// overlap per join; dropped end words are replaced by room tone.
inline NarrationClip cut_words(const AudioClip& recording, const DraftDescription& d, const std::vector<int>& kept) {
  if (!d.recording) throw Error("audio", "description '" + d.id + "' has no recording");
  for (int k : kept)
    if (k < 0 || static_cast<std::size_t>(k) >= d.recording->alignment.size())
      throw Error("audio", "kept word " + std::to_string(k) + " of '" + d.id + "' is outside the alignment");
  const int rate = recording.sample_rate;
  const auto n = static_cast<std::int64_t>(recording.frames());
  const auto runs = recorded_runs(d, kept);
  std::vector<SplicePart> parts;
  for (std::size_t i = 0; i < runs.size(); ++i) {
    const auto [a, b] = runs[i];
    const auto s = std::min<std::int64_t>(static_cast<std::int64_t>(frame_of(a, rate)), n);
    const auto e = std::min<std::int64_t>(static_cast<std::int64_t>(frame_of(b, rate)), n);
    SplicePart p{s, e, 0, FadeShape::kEqualPower};
    if (i > 0) {
      const Millis ov = join_overlap(runs[i - 1].second - runs[i - 1].first, b - a);
      p.overlap = std::min({static_cast<std::int64_t>(frame_of(ov, rate)), p.length(), parts.back().length()});
    }
    parts.push_back(p);
  }
  NarrationClip out;
  out.source = "recording";
  out.joins = parts.empty() ? 0 : static_cast<int>(parts.size()) - 1;
  out.audio = splice(recording, parts);
  return out;
}

/// Pitch of the placeholder tone for word `i`.
inline double placeholder_frequency(int i) { return 220.0 + 55.0 * (i % 48); }

/// One 0.3 s tone per kept spoken word, pitched by the word's position in
/// the draft, with 5 ms fades.
inline NarrationClip placeholder_narration(const DraftDescription& d, const std::vector<int>& kept, int rate,
                                           int channels) {
  std::vector<int> spoken;
  for (int k : kept)
    if (detail::has_alnum(d.words.at(k).text)) spoken.push_back(k);
  const std::size_t total = frames_of_seconds(0.3 * static_cast<double>(spoken.size()), rate);
  NarrationClip out;
  out.source = "placeholder";
  out.audio = AudioClip::silence(total, rate, channels);
  const auto fade = frames_of_seconds(0.005, rate);
  for (std::size_t w = 0; w < spoken.size(); ++w) {
    const std::size_t a = frames_of_seconds(0.3 * static_cast<double>(w), rate);
    const std::size_t b = frames_of_seconds(0.3 * static_cast<double>(w + 1), rate);
    const double f = placeholder_frequency(spoken[w]);
    for (std::size_t i = a; i < b; ++i) {
      const std::size_t k = i - a;
      double g = 0.3;
      if (k < fade) g *= static_cast<double>(k) / fade;
      if (b - i <= fade) g *= static_cast<double>(b - i - 1) / fade;
      const auto v = static_cast<float>(g * std::sin(2.0 * std::numbers::pi * f * static_cast<double>(k) / rate));
      for (int c = 0; c < channels; ++c) out.audio.at(i, c) = v;
    }
  }
  return out;
}

/// One contiguous stretch of the output bed.
struct BedDecision {
  enum class Kind { kCopy, kLoopMusic, kAmbientExtend, kPause };
  Kind kind = Kind::kCopy;
  std::int64_t out_start = 0;
  std::int64_t out_end = 0;
  std::int64_t src_start = 0;  // source range read (gap for extensions)
  std::int64_t src_end = 0;
  std::vector<SplicePart> parts;  // extensions, relative to src_start
  std::string description_id;
  std::int64_t loop_lag = 0;
  int loops = 0;

  std::int64_t length() const { return out_end - out_start; }
};

inline std::string_view to_string(BedDecision::Kind k) {
  switch (k) {
    case BedDecision::Kind::kCopy: return "copy";
    case BedDecision::Kind::kLoopMusic: return "loop_music";
    case BedDecision::Kind::kAmbientExtend: return "ambient_extend";
    case BedDecision::Kind::kPause: return "pause";
  }
  return "copy";
}

inline BedDecision::Kind parse_bed_kind(std::string_view s) {
  if (s == "copy") return BedDecision::Kind::kCopy;
  if (s == "loop_music") return BedDecision::Kind::kLoopMusic;
  if (s == "ambient_extend") return BedDecision::Kind::kAmbientExtend;
  if (s == "pause") return BedDecision::Kind::kPause;
  throw Error("validation", "unknown manifest decision '" + std::string(s) + "'");
}

/// Narration mixed over the bed.
struct NarrationDecision {
  std::string description_id;
  std::vector<int> kept_indices;
  std::string source;
  std::int64_t out_start = 0;
  std::int64_t frames = 0;
  int joins = 0;
  double gain_db = 0;
};

struct RenderOptions {
  double duck_db = -9.0;         // bed attenuation under narration; 0 disables
  double duck_ramp_seconds = 0.05;
  double narration_gain_db = 0.0;
  double limiter_threshold = 0.9;
  ExtendOptions extend;
};

struct RenderManifest {
  RenderMode mode = RenderMode::kInline;
  std::uint64_t seed = 0;
  int sample_rate = 0;
  int channels = 1;
  std::int64_t source_frames = 0;
  std::int64_t output_frames = 0;
  double duck_db = -9.0;
  double duck_ramp_seconds = 0.05;
  double limiter_threshold = 0.9;
  std::vector<BedDecision> bed;
  std::vector<NarrationDecision> narrations;
  bool limiter_engaged = false;
  std::int64_t limited_samples = 0;
  double peak_before_limiter = 0;
  std::vector<Diagnostic> diagnostics;
};

/// Applies a soft knee above `threshold` when any sample exceeds full scale.
/// Returns the number of samples changed.
inline std::int64_t soft_limit(std::vector<float>& x, double threshold, double* peak = nullptr) {
  double p = 0;
  for (float v : x) p = std::max(p, static_cast<double>(std::abs(v)));
  if (peak) *peak = p;
  if (p <= 1.0) return 0;
  std::int64_t changed = 0;
  const double knee = 1.0 - threshold;
  for (float& v : x) {
    const double a = std::abs(v);
    if (a <= threshold) continue;
    const double y = threshold + knee * std::tanh((a - threshold) / knee);
    v = static_cast<float>(v < 0 ? -y : y);
    ++changed;
  }
  return changed;
}

/// Builds the output from a manifest. `narration` holds one clip per
/// manifest narration entry, in order. Fills the limiter fields.
inline AudioClip execute_manifest(RenderManifest& m, const AudioClip& source, const std::vector<AudioClip>& narration) {
  if (source.sample_rate != m.sample_rate || source.channels != m.channels ||
      static_cast<std::int64_t>(source.frames()) != m.source_frames)
    throw Error("render", "source audio does not match the manifest (rate, channels or length)");
  if (narration.size() != m.narrations.size())
    throw Error("render", "manifest lists " + std::to_string(m.narrations.size()) + " narrations, got " +
                              std::to_string(narration.size()));
  const int ch = m.channels;
  AudioClip out = AudioClip::silence(static_cast<std::size_t>(m.output_frames), m.sample_rate, ch);
  std::int64_t cursor = 0;
  for (const auto& d : m.bed) {
    if (d.out_start != cursor) throw Error("render", "manifest bed is not contiguous at frame " + std::to_string(cursor));
    if (d.out_end > m.output_frames) throw Error("render", "manifest bed runs past the output");
    switch (d.kind) {
      case BedDecision::Kind::kCopy:
        if (d.src_end - d.src_start != d.length() || d.src_start < 0 || d.src_end > m.source_frames)
          throw Error("render", "copy decision has mismatched ranges");
        std::copy(source.samples.begin() + d.src_start * ch, source.samples.begin() + d.src_end * ch,
                  out.samples.begin() + d.out_start * ch);
        break;
      case BedDecision::Kind::kPause:
        break;
      case BedDecision::Kind::kLoopMusic:
      case BedDecision::Kind::kAmbientExtend: {
        const AudioClip gap = source.slice(static_cast<std::size_t>(d.src_start), static_cast<std::size_t>(d.src_end));
        const AudioClip piece = splice(gap, d.parts);
        if (static_cast<std::int64_t>(piece.frames()) != d.length())
          throw Error("render", "extension decision produces " + std::to_string(piece.frames()) + " frames, expected " +
                                    std::to_string(d.length()));
        std::copy(piece.samples.begin(), piece.samples.end(), out.samples.begin() + d.out_start * ch);
        break;
      }
    }
    cursor = d.out_end;
  }
  if (cursor != m.output_frames) throw Error("render", "manifest bed ends before the output does");

  // Duck the bed under narration with linear ramps.
  if (m.duck_db != 0.0 && !m.narrations.empty()) {
    const double floor_gain = std::pow(10.0, m.duck_db / 20.0);
    const auto ramp = static_cast<std::int64_t>(frames_of_seconds(m.duck_ramp_seconds, m.sample_rate));
    std::vector<float> env(static_cast<std::size_t>(m.output_frames), 1.0f);
    for (const auto& nd : m.narrations) {
      const std::int64_t s = nd.out_start, e = nd.out_start + nd.frames;
      const std::int64_t lo = std::max<std::int64_t>(0, s - ramp), hi = std::min(m.output_frames, e + ramp);
      for (std::int64_t i = lo; i < hi; ++i) {
        double g = floor_gain;
        if (i < s && ramp > 0) g = 1.0 + (floor_gain - 1.0) * static_cast<double>(i - (s - ramp)) / ramp;
        if (i >= e && ramp > 0) g = floor_gain + (1.0 - floor_gain) * static_cast<double>(i - e + 1) / ramp;
        env[i] = std::min(env[i], static_cast<float>(g));
      }
    }
    for (std::int64_t i = 0; i < m.output_frames; ++i)
      for (int c = 0; c < ch; ++c) out.samples[i * ch + c] *= env[i];
  }

  for (std::size_t k = 0; k < m.narrations.size(); ++k) {
    const auto& nd = m.narrations[k];
    const auto& clip = narration[k];
    if (clip.sample_rate != m.sample_rate || clip.channels != ch ||
        static_cast<std::int64_t>(clip.frames()) != nd.frames)
      throw Error("render", "narration clip for '" + nd.description_id + "' does not match the manifest");
    if (nd.out_start < 0 || nd.out_start + nd.frames > m.output_frames)
      throw Error("render", "narration for '" + nd.description_id + "' runs past the output");
    const auto g = static_cast<float>(std::pow(10.0, nd.gain_db / 20.0));
    for (std::int64_t i = 0; i < nd.frames; ++i)
      for (int c = 0; c < ch; ++c) out.samples[(nd.out_start + i) * ch + c] += g * clip.samples[i * ch + c];
  }

  m.limited_samples = soft_limit(out.samples, m.limiter_threshold, &m.peak_before_limiter);
  m.limiter_engaged = m.limited_samples > 0;
  return out;
}

/// Narration audio for a placed candidate, already at the output format.
using NarrationSource = std::function<NarrationClip(const DraftDescription&, const std::vector<int>& kept)>;

/// Recorded takes where available (cut to the kept words), placeholder
/// tones otherwise.
inline NarrationSource default_narration(const std::map<std::string, AudioClip>& recordings, int rate, int channels) {
  return [&recordings, rate, channels](const DraftDescription& d, const std::vector<int>& kept) {
    auto it = recordings.find(d.id);
    if (d.recording && it != recordings.end()) return cut_words(conform(it->second, rate, channels), d, kept);
    return placeholder_narration(d, kept, rate, channels);
  };
}

inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t salt) {
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ull * (salt + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

struct RenderResult {
  AudioClip audio;
  RenderManifest manifest;
};

/// Renders `plan` over `source`. Inline keeps the source length; extended
/// pauses the source at each anchor for the narration; extended-inline
/// lengthens the gaps the plan extends, by looping music or re-sampling
/// ambience.
inline RenderResult render(const Project& project, const CompositionPlan& plan, const std::vector<GapSegment>& gaps,
                           const AudioClip& source, const NarrationSource& narrate, std::uint64_t seed,
                           const RenderOptions& opt = {}) {
  const int rate = source.sample_rate;
  const int ch = source.channels;
  const auto n = static_cast<std::int64_t>(source.frames());
  RenderManifest m;
  m.mode = plan.mode;
  m.seed = seed;
  m.sample_rate = rate;
  m.channels = ch;
  m.source_frames = n;
  m.duck_db = opt.duck_db;
  m.duck_ramp_seconds = opt.duck_ramp_seconds;
  m.limiter_threshold = opt.limiter_threshold;

  std::vector<const PlacedDescription*> placed;
  for (const auto& p : plan.placed) placed.push_back(&p);
  std::stable_sort(placed.begin(), placed.end(), [](auto* a, auto* b) { return a->start < b->start; });

  std::vector<AudioClip> clips;
  auto add_narration = [&](const PlacedDescription& p, std::int64_t at) {
    const auto* d = project.find_description(p.description_id);
    if (!d) throw Error("render", "plan places unknown description '" + p.description_id + "'");
    auto nc = narrate(*d, p.candidate.kept_indices);
    if (nc.audio.sample_rate != rate || nc.audio.channels != ch) nc.audio = conform(nc.audio, rate, ch);
    NarrationDecision nd{d->id, p.candidate.kept_indices, nc.source, at,
                         static_cast<std::int64_t>(nc.audio.frames()), nc.joins, opt.narration_gain_db};
    m.narrations.push_back(nd);
    clips.push_back(std::move(nc.audio));
    return nd.frames;
  };
  auto copy = [&](std::int64_t out, std::int64_t a, std::int64_t b) {
    if (b > a) m.bed.push_back({BedDecision::Kind::kCopy, out, out + (b - a), a, b, {}, {}, 0, 0});
    return out + std::max<std::int64_t>(0, b - a);
  };
  // Tolerance for narration overrunning its slot through ms/frame rounding.
  const auto slack = static_cast<std::int64_t>(frames_of_seconds(0.002, rate));
  auto overrun = [&](const PlacedDescription& p, std::int64_t end, std::int64_t limit) {
    if (end > limit + slack)
      throw Error("render", "narration for '" + p.description_id + "' at " + detail::fmt_time(p.start) + " needs " +
                                std::to_string(end - limit) + " more frames than its slot allows");
  };
  auto gap_of = [&](Millis t) -> const GapSegment* {
    for (const auto& g : gaps)
      if (g.start <= t && t < g.end) return &g;
    return nullptr;
  };

  std::int64_t out = 0;
  switch (plan.mode) {
    case RenderMode::kInline: {
      out = copy(0, 0, n);
      for (const auto* p : placed) {
        const auto at = static_cast<std::int64_t>(frame_of(p->start, rate));
        const auto len = add_narration(*p, at);
        const auto* g = gap_of(p->start);
        if (!g) throw Error("render", "narration for '" + p->description_id + "' starts outside every gap");
        overrun(*p, at + len, std::min<std::int64_t>(n, static_cast<std::int64_t>(frame_of(g->end, rate))));
      }
      break;
    }
    case RenderMode::kExtended: {
      std::int64_t src = 0;
      for (const auto* p : placed) {
        const auto at = std::min<std::int64_t>(n, static_cast<std::int64_t>(frame_of(p->start, rate)));
        out = copy(out, src, at);
        src = std::max(src, at);
        const auto len = add_narration(*p, out);
        m.bed.push_back({BedDecision::Kind::kPause, out, out + len, src, src, {}, p->description_id, 0, 0});
        out += len;
      }
      out = copy(out, src, n);
      break;
    }
    case RenderMode::kExtendedInline: {
      std::int64_t src = 0;
      std::int64_t shift = 0;
      for (const auto* p : placed) {
        const auto* g = gap_of(p->start);
        if (!g) throw Error("render", "narration for '" + p->description_id + "' starts outside every gap");
        const auto gs = static_cast<std::int64_t>(frame_of(g->start, rate));
        const auto ge = std::min<std::int64_t>(n, static_cast<std::int64_t>(frame_of(g->end, rate)));
        const auto ext = static_cast<std::int64_t>(frame_of(p->extension, rate));
        const auto at = static_cast<std::int64_t>(frame_of(p->start, rate)) + shift;
        if (p->extension > Millis{0}) {
          if (!g->extendable) throw Error("render", "plan extends non-extendable gap at " + detail::fmt_time(g->start));
          out = copy(out, src, gs);
          const AudioClip gap_audio = source.slice(static_cast<std::size_t>(gs), static_cast<std::size_t>(ge));
          const auto gseed = mix_seed(seed, static_cast<std::uint64_t>(gs));
          Extension e = g->label == AudioLabel::kMusic
                            ? plan_music_extension(gap_audio, (ge - gs) + ext, gseed, opt.extend)
                            : plan_ambient_extension(gap_audio, (ge - gs) + ext, gseed, opt.extend);
          for (auto& dg : e.diagnostics) {
            dg.location = "gap " + detail::fmt_time(g->start) + "-" + detail::fmt_time(g->end);
            m.diagnostics.push_back(dg);
          }
          BedDecision bd{e.method == "loop" ? BedDecision::Kind::kLoopMusic : BedDecision::Kind::kAmbientExtend,
                         out, out + spliced_length(e.parts), gs, ge, e.parts, p->description_id, e.loop_lag, e.loops};
          m.bed.push_back(bd);
          out = bd.out_end;
          src = ge;
          const auto len = add_narration(*p, at);
          overrun(*p, at + len, out);
          shift += ext;
        } else {
          const auto len = add_narration(*p, at);
          overrun(*p, at + len, ge + shift);
        }
      }
      out = copy(out, src, n);
      break;
    }
  }
  m.output_frames = out;
  RenderResult r;
  r.audio = execute_manifest(m, source, clips);
  r.manifest = std::move(m);
  return r;
}

/// Re-executes a manifest, regenerating narration through `narrate`.
inline AudioClip replay(RenderManifest& m, const Project& project, const AudioClip& source,
                        const NarrationSource& narrate) {
  std::vector<AudioClip> clips;
  for (const auto& nd : m.narrations) {
    const auto* d = project.find_description(nd.description_id);
    if (!d) throw Error("render", "manifest narrates unknown description '" + nd.description_id + "'");
    auto nc = narrate(*d, nd.kept_indices);
    if (nc.audio.sample_rate != m.sample_rate || nc.audio.channels != m.channels)
      nc.audio = conform(nc.audio, m.sample_rate, m.channels);
    clips.push_back(std::move(nc.audio));
  }
  return execute_manifest(m, source, clips);
}

// JSON form of the manifest. Frame indices are exact; seconds are derived.

inline void to_json(nlohmann::json& j, const SplicePart& p) {
  j = {{"begin", p.begin}, {"end", p.end}, {"overlap", p.overlap}, {"fade", to_string(p.fade)}};
}
inline void from_json(const nlohmann::json& j, SplicePart& p) {
  p.begin = j.at("begin").get<std::int64_t>();
  p.end = j.at("end").get<std::int64_t>();
  p.overlap = j.value("overlap", std::int64_t{0});
  p.fade = parse_fade_shape(j.value("fade", std::string("equal_power")));
}

inline nlohmann::json manifest_to_json(const RenderManifest& m) {
  using nlohmann::json;
  json bed = json::array();
  for (const auto& d : m.bed) {
    json e = {{"kind", to_string(d.kind)}, {"out_start", d.out_start}, {"out_end", d.out_end},
              {"src_start", d.src_start}, {"src_end", d.src_end}};
    if (!d.description_id.empty()) e["description_id"] = d.description_id;
    if (!d.parts.empty()) e["parts"] = d.parts;
    if (d.kind == BedDecision::Kind::kLoopMusic) {
      e["loop_lag"] = d.loop_lag;
      e["loops"] = d.loops;
    }
    bed.push_back(std::move(e));
  }
  json narr = json::array();
  for (const auto& nd : m.narrations)
    narr.push_back({{"description_id", nd.description_id}, {"kept_indices", nd.kept_indices},
                    {"source", nd.source}, {"out_start", nd.out_start}, {"frames", nd.frames},
                    {"joins", nd.joins}, {"gain_db", nd.gain_db}});
  json diags = json::array();
  for (const auto& d : m.diagnostics) diags.push_back(to_string(d));
  return {{"mode", to_string(m.mode)},
          {"seed", m.seed},
          {"sample_rate", m.sample_rate},
          {"channels", m.channels},
          {"source_frames", m.source_frames},
          {"output_frames", m.output_frames},
          {"output_seconds", static_cast<double>(m.output_frames) / m.sample_rate},
          {"duck_db", m.duck_db},
          {"duck_ramp_seconds", m.duck_ramp_seconds},
          {"limiter", {{"threshold", m.limiter_threshold}, {"engaged", m.limiter_engaged},
                       {"limited_samples", m.limited_samples}, {"peak_before", m.peak_before_limiter}}},
          {"bed", bed},
          {"narrations", narr},
          {"diagnostics", diags}};
}

inline RenderManifest manifest_from_json(const nlohmann::json& j) {
  RenderManifest m;
  try {
    m.mode = parse_render_mode(j.at("mode").get<std::string>());
    m.seed = j.at("seed").get<std::uint64_t>();
    m.sample_rate = j.at("sample_rate").get<int>();
    m.channels = j.at("channels").get<int>();
    m.source_frames = j.at("source_frames").get<std::int64_t>();
    m.output_frames = j.at("output_frames").get<std::int64_t>();
    m.duck_db = j.value("duck_db", -9.0);
    m.duck_ramp_seconds = j.value("duck_ramp_seconds", 0.05);
    if (j.contains("limiter")) m.limiter_threshold = j["limiter"].value("threshold", 0.9);
    for (const auto& e : j.at("bed")) {
      BedDecision d;
      d.kind = parse_bed_kind(e.at("kind").get<std::string>());
      d.out_start = e.at("out_start").get<std::int64_t>();
      d.out_end = e.at("out_end").get<std::int64_t>();
      d.src_start = e.value("src_start", std::int64_t{0});
      d.src_end = e.value("src_end", std::int64_t{0});
      d.description_id = e.value("description_id", std::string());
      if (e.contains("parts")) d.parts = e["parts"].get<std::vector<SplicePart>>();
      d.loop_lag = e.value("loop_lag", std::int64_t{0});
      d.loops = e.value("loops", 0);
      m.bed.push_back(std::move(d));
    }
    for (const auto& e : j.at("narrations")) {
      NarrationDecision nd;
      nd.description_id = e.at("description_id").get<std::string>();
      nd.kept_indices = e.at("kept_indices").get<std::vector<int>>();
      nd.source = e.value("source", std::string());
      nd.out_start = e.at("out_start").get<std::int64_t>();
      nd.frames = e.at("frames").get<std::int64_t>();
      nd.joins = e.value("joins", 0);
      nd.gain_db = e.value("gain_db", 0.0);
      m.narrations.push_back(std::move(nd));
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error("validation", std::string("manifest: ") + e.what());
  }
  return m;
}

}  // namespace adfit

#endif  // ADFIT_RENDER_HPP
