#ifndef ADFIT_TESTS_FIXTURES_HPP
#define ADFIT_TESTS_FIXTURES_HPP

// Hand-annotated descriptions and project builders shared by the suites.

#include <cmath>
#include <numbers>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "adfit/audio.hpp"
#include "adfit/candidates.hpp"
#include "adfit/language_model.hpp"
#include "adfit/optimizer.hpp"
#include "adfit/scorer.hpp"
#include "adfit/text.hpp"
#include "adfit/timeline.hpp"

namespace adfit::testing {

struct Tok {
  std::string text;
  std::string pos;
  int head;
  std::string label;
};

inline DraftDescription make_description(std::string id, double anchor_s, const std::vector<Tok>& toks) {
  DraftDescription d;
  d.id = std::move(id);
  d.anchor_time = from_seconds(anchor_s);
  for (const auto& t : toks) {
    TimedWord w;
    w.text = t.text;
    w.pos = t.pos;
    w.dep_head = t.head;
    w.dep_label = t.label;
    d.words.push_back(w);
  }
  return d;
}

// People walking along a beach with an overcast sky above and white sand
// below turquoise water .
inline DraftDescription beach_description(double anchor_s = 10.0) {
  return make_description("beach", anchor_s,
                          {{"People", "NOUN", 0, "root"},
                           {"walking", "VERB", 0, "acl"},
                           {"along", "ADP", 4, "case"},
                           {"a", "DET", 4, "det"},
                           {"beach", "NOUN", 1, "obl"},
                           {"with", "ADP", 8, "case"},
                           {"an", "DET", 8, "det"},
                           {"overcast", "ADJ", 8, "amod"},
                           {"sky", "NOUN", 1, "obl"},
                           {"above", "ADP", 8, "advmod"},
                           {"and", "CCONJ", 12, "cc"},
                           {"white", "ADJ", 12, "amod"},
                           {"sand", "NOUN", 8, "conj"},
                           {"below", "ADP", 15, "case"},
                           {"turquoise", "ADJ", 15, "amod"},
                           {"water", "NOUN", 12, "nmod"},
                           {".", "PUNCT", 0, "punct"}});
}

inline DraftDescription bench_description(double anchor_s = 5.0) {
  return make_description("bench", anchor_s,
                          {{"A", "DET", 2, "det"},
                           {"long", "ADJ", 2, "amod"},
                           {"bench", "NOUN", 2, "root"},
                           {"with", "ADP", 5, "case"},
                           {"blue", "ADJ", 5, "amod"},
                           {"birds", "NOUN", 2, "nmod"}});
}

inline DraftDescription dog_description(double anchor_s = 1.0) {
  return make_description("dog", anchor_s,
                          {{"A", "DET", 1, "det"}, {"dog", "NOUN", 2, "nsubj"}, {"runs", "VERB", 2, "root"}});
}

// Close up of bar food including bibimbap and tater tots
inline DraftDescription bar_food_description(double anchor_s = 20.0) {
  return make_description("food", anchor_s,
                          {{"Close", "ADJ", 0, "root"},
                           {"up", "ADP", 0, "compound:prt"},
                           {"of", "ADP", 4, "case"},
                           {"bar", "NOUN", 4, "compound"},
                           {"food", "NOUN", 0, "obl"},
                           {"including", "ADP", 6, "case"},
                           {"bibimbap", "NOUN", 4, "nmod"},
                           {"and", "CCONJ", 9, "cc"},
                           {"tater", "NOUN", 9, "compound"},
                           {"tots", "NOUN", 6, "conj"}});
}

// The camera zooms ... "zoom in on the dog"
inline DraftDescription zoom_description(double anchor_s = 30.0) {
  return make_description("zoom", anchor_s,
                          {{"Slow", "ADJ", 1, "amod"},
                           {"zoom", "NOUN", 1, "root"},
                           {"in", "ADP", 1, "compound:prt"},
                           {"on", "ADP", 5, "case"},
                           {"the", "DET", 5, "det"},
                           {"dog", "NOUN", 1, "nmod"}});
}

// Text on screen : " Welcome back "
inline DraftDescription onscreen_description(double anchor_s = 40.0) {
  return make_description("sign", anchor_s,
                          {{"Text", "NOUN", 0, "root"},
                           {"on", "ADP", 2, "case"},
                           {"screen", "NOUN", 0, "nmod"},
                           {":", "PUNCT", 0, "punct"},
                           {"\"Welcome", "ADJ", 5, "amod"},
                           {"back\"", "NOUN", 0, "appos"}});
}

// A red ball rolls across the old wooden floor
inline DraftDescription ball_description(double anchor_s = 50.0) {
  return make_description("ball", anchor_s,
                          {{"A", "DET", 2, "det"},
                           {"red", "ADJ", 2, "amod"},
                           {"ball", "NOUN", 3, "nsubj"},
                           {"rolls", "VERB", 3, "root"},
                           {"across", "ADP", 8, "case"},
                           {"the", "DET", 8, "det"},
                           {"old", "ADJ", 8, "amod"},
                           {"wooden", "ADJ", 8, "amod"},
                           {"floor", "NOUN", 3, "obl"}});
}

// A man and a tall woman walk past shops and cafes .
inline DraftDescription couple_description(double anchor_s = 60.0) {
  return make_description("couple", anchor_s,
                          {{"A", "DET", 1, "det"},
                           {"man", "NOUN", 6, "nsubj"},
                           {"and", "CCONJ", 5, "cc"},
                           {"a", "DET", 5, "det"},
                           {"tall", "ADJ", 5, "amod"},
                           {"woman", "NOUN", 1, "conj"},
                           {"walk", "VERB", 6, "root"},
                           {"past", "ADP", 8, "case"},
                           {"shops", "NOUN", 6, "obl"},
                           {"and", "CCONJ", 10, "cc"},
                           {"cafes", "NOUN", 8, "conj"},
                           {".", "PUNCT", 6, "punct"}});
}

inline std::vector<DraftDescription> fixture_corpus() {
  return {dog_description(1.0),       bench_description(5.0), beach_description(10.0),
          bar_food_description(20.0), zoom_description(30.0), onscreen_description(40.0),
          ball_description(50.0),     couple_description(60.0)};
}

inline std::vector<TimedWord> words_at(const std::string& text, double start_s, double per_word_s) {
  std::vector<TimedWord> out;
  double t = start_s;
  for (const auto& tok : split_ws(text)) {
    TimedWord w;
    w.text = tok;
    w.start = from_seconds(t);
    w.end = from_seconds(t + per_word_s * 0.9);
    out.push_back(w);
    t += per_word_s;
  }
  return out;
}

inline GapSegment gap(double a, double b, AudioLabel l = AudioLabel::kMusic) {
  return GapSegment{from_seconds(a), from_seconds(b), l, false, Millis{0}};
}

/// Project whose labels are exactly `gaps` as non-speech and speech elsewhere.
inline Project project_with_gaps(double duration_s, const std::vector<GapSegment>& gaps) {
  Project p;
  p.source_duration = from_seconds(duration_s);
  Millis cursor{0};
  for (const auto& g : gaps) {
    if (g.start > cursor) p.labels.push_back({cursor, g.start, AudioLabel::kSpeech});
    p.labels.push_back({g.start, g.end, g.label});
    cursor = g.end;
  }
  if (cursor < p.source_duration) p.labels.push_back({cursor, p.source_duration, AudioLabel::kSpeech});
  return p;
}

/// Candidate with fixed duration and weighted cost, for optimizer tests.
inline ScoredCandidate synthetic_candidate(const std::string& id, double duration_s, double cost,
                                           bool original = false, std::size_t words = 3) {
  ScoredCandidate sc;
  sc.candidate.description_id = id;
  std::size_t kept = original ? words : words - 1;
  for (std::size_t i = 0; i < kept; ++i) sc.candidate.kept_indices.push_back(static_cast<int>(i));
  sc.candidate.text = id + "@" + std::to_string(duration_s);
  sc.candidate.duration = from_seconds(duration_s);
  sc.cost.weighted_total = cost;
  sc.cost.coherence = cost;
  return sc;
}

/// Placeholder description with `words` tokens, for optimizer-only projects.
inline DraftDescription plain_description(const std::string& id, double anchor_s, std::size_t words = 3) {
  DraftDescription d;
  d.id = id;
  d.anchor_time = from_seconds(anchor_s);
  for (std::size_t i = 0; i < words; ++i) {
    TimedWord w;
    w.text = "w" + std::to_string(i);
    w.pos = "NOUN";
    w.dep_head = 0;
    w.dep_label = i == 0 ? "root" : "dep";
    d.words.push_back(w);
  }
  return d;
}

struct RandomInstance {
  Project project;
  std::vector<GapSegment> gaps;
  CandidateTable table;
  OptimizerConfig config;
};

/// Random instance sized for brute force: <= 4 descriptions, <= 300 slots,
/// <= 6 candidates each.
inline RandomInstance random_instance(std::mt19937_64& rng, RenderMode mode) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  auto uni_int = [&](int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); };
  RandomInstance inst;
  auto& cfg = inst.config;
  cfg.mode = mode;
  const int slots = uni_int(40, 300);
  const double duration = slots * 0.1;
  // Grid-aligned and off-grid gap edges, with speech in between.
  std::vector<GapSegment> gaps;
  double t = unit(rng) < 0.3 ? 0.0 : 0.2 + unit(rng) * 2.0;
  while (t < duration - 0.5) {
    double len = 0.4 + unit(rng) * 6.0;
    double end = std::min(duration, t + len);
    if (unit(rng) < 0.5) end = std::round(end * 10.0) / 10.0;
    if (end - t < 0.2) break;
    const double r = unit(rng);
    AudioLabel label = r < 0.45 ? AudioLabel::kMusic : (r < 0.8 ? AudioLabel::kSilence : AudioLabel::kAmbient);
    gaps.push_back(gap(t, std::min(end, duration), label));
    t = end + 0.15 + unit(rng) * 2.5;
  }
  inst.project = project_with_gaps(duration, gaps);
  for (auto g : gaps) {
    std::optional<double> tempo;
    if (unit(rng) < 0.7) tempo = 40.0 + unit(rng) * 100.0;
    // Music gaps here are short, so lower the length gate to exercise both branches.
    OptimizerConfig gate = cfg;
    gate.min_extendable_music = from_seconds(2.0);
    inst.gaps.push_back(classify_extendable(g, tempo, gate));
  }
  const int n = uni_int(0, 4);
  std::vector<double> anchors;
  for (int i = 0; i < n; ++i) anchors.push_back(std::round(unit(rng) * duration * 10.0) / 10.0);
  std::sort(anchors.begin(), anchors.end());
  for (int i = 0; i < n; ++i) {
    auto d = plain_description("d" + std::to_string(i), anchors[i], 4);
    d.lock_time = unit(rng) < 0.15;
    d.lock_presence = unit(rng) < 0.15;
    inst.project.descriptions.push_back(d);
    std::vector<ScoredCandidate> row;
    const int m = uni_int(1, 6);
    for (int j = 0; j < m; ++j) {
      const double dur = 0.3 + std::round(unit(rng) * 40.0) / 10.0;
      const double cost = std::round(unit(rng) * 400.0 * 1000.0) / 1000.0;
      row.push_back(synthetic_candidate(d.id, dur + 0.001 * uni_int(0, 90), cost, j == m - 1, 4));
    }
    inst.table.push_back(row);
  }
  cfg.placement_window = from_seconds(2.0 + unit(rng) * 20.0);
  const int shots = uni_int(0, 4);
  for (int k = 0; k < shots; ++k) inst.project.shots.push_back(from_seconds(std::round(unit(rng) * duration * 10) / 10));
  std::sort(inst.project.shots.begin(), inst.project.shots.end());
  inst.project.shots.erase(std::unique(inst.project.shots.begin(), inst.project.shots.end()), inst.project.shots.end());
  cfg.max_shot_crossings = uni_int(0, 2);
  return inst;
}

// Every subset of dropped words that is exactly a union of allowed units
// and spares all protected words. Units come from droppable_units() without
// protection; protection is applied here, on the word subsets.
inline std::set<std::string> oracle_texts(const DraftDescription& d, const ProtectedPhraseSet& prot) {
  const auto raw = droppable_units(d, ProtectedPhraseSet{});
  const auto spans = prot.all_spans();
  std::vector<std::uint32_t> allowed;
  for (const auto& u : raw) {
    bool blocked = std::any_of(spans.begin(), spans.end(), [&](const Span& p) { return p.intersects(u.span); });
    if (blocked) continue;
    std::uint32_t m = 0;
    for (int i = u.span.begin; i < u.span.end; ++i) m |= 1u << i;
    allowed.push_back(m);
  }
  const int n = static_cast<int>(d.words.size());
  std::set<std::string> out;
  for (std::uint32_t dropped = 0; dropped < (1u << n); ++dropped) {
    std::uint32_t covered = 0;
    for (auto m : allowed)
      if ((m & dropped) == m) covered |= m;
    if (covered != dropped) continue;
    std::string text;
    bool spoken = false;
    for (int i = 0; i < n; ++i) {
      if (dropped >> i & 1) continue;
      text += (text.empty() ? "" : " ") + d.words[i].text;
      spoken |= detail::has_alnum(d.words[i].text);
    }
    if (spoken) out.insert(text);
  }
  return out;
}

// Source audio matching the project labels: tones for music, noise for
// speech and ambience, zeros for silence.
inline AudioClip source_for(const Project& p, int rate, std::uint64_t seed) {
  AudioClip c = AudioClip::silence(frame_of(p.source_duration, rate), rate, 1);
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<float> u(-1.0f, 1.0f);
  for (const auto& l : p.labels) {
    const auto a = frame_of(l.start, rate), b = std::min(frame_of(l.end, rate), c.frames());
    for (auto i = a; i < b; ++i) {
      const double t = static_cast<double>(i) / rate;
      switch (l.label) {
        case AudioLabel::kMusic:
          c.samples[i] = static_cast<float>(0.3 * std::sin(2 * std::numbers::pi * 220 * t) *
                                            (0.6 + 0.4 * std::sin(2 * std::numbers::pi * 2 * t)));
          break;
        case AudioLabel::kSilence: break;
        default: c.samples[i] = 0.2f * u(rng);
      }
    }
  }
  return c;
}

// Replaces the synthetic candidate rows with word prefixes so that the
// placeholder narration matches each candidate's duration.
inline void use_prefix_candidates(RandomInstance& inst, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  inst.table.clear();
  for (const auto& d : inst.project.descriptions) {
    std::vector<ScoredCandidate> row;
    for (std::size_t k = 1; k <= d.words.size(); ++k) {
      std::vector<int> kept;
      for (std::size_t i = 0; i < k; ++i) kept.push_back(static_cast<int>(i));
      ScoredCandidate sc;
      sc.candidate = make_candidate(d, kept);
      sc.cost.weighted_total = std::round(unit(rng) * 400.0);
      row.push_back(sc);
    }
    inst.table.push_back(row);
  }
}

/// Noise bursts with fast decay, one per beat.
inline AudioClip click_track(double bpm, double seconds, int rate = 22050) {
  AudioClip c = AudioClip::silence(frames_of_seconds(seconds, rate), rate, 1);
  const double period = 60.0 / bpm;
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<float> u(-1.0f, 1.0f);
  for (double t = 0.05; t < seconds; t += period) {
    const auto at = frames_of_seconds(t, rate);
    const auto len = frames_of_seconds(0.02, rate);
    for (std::size_t i = 0; i < len && at + i < c.frames(); ++i)
      c.samples[at + i] = 0.8f * u(rng) * static_cast<float>(std::exp(-static_cast<double>(i) / (0.004 * rate)));
  }
  return c;
}

}  // namespace adfit::testing

#endif  // ADFIT_TESTS_FIXTURES_HPP
