#ifndef ADFIT_SYNTHETIC_HPP
#define ADFIT_SYNTHETIC_HPP

// Synthetic audio and a small demo project, for tests and first runs.

#include <cmath>
#include <filesystem>
#include <numbers>
#include <random>
#include <string>
#include <vector>

#include "adfit/audio.hpp"
#include "adfit/project_io.hpp"
#include "adfit/text.hpp"

namespace adfit {

/// Kick on every beat over a soft chord that changes every bar.
inline AudioClip synthetic_music(double seconds, double bpm, int rate = 22050, std::uint64_t seed = 1) {
  AudioClip c = AudioClip::silence(frames_of_seconds(seconds, rate), rate, 1);
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<float> u(-1.0f, 1.0f);
  const double chords[4][3] = {{220.0, 261.6, 329.6}, {174.6, 220.0, 261.6}, {196.0, 246.9, 293.7}, {164.8, 207.7, 246.9}};
  const double beat = 60.0 / bpm;
  for (std::size_t i = 0; i < c.frames(); ++i) {
    const double t = static_cast<double>(i) / rate;
    const auto bar = static_cast<std::size_t>(t / (4 * beat)) % 4;
    double v = 0;
    for (double f : chords[bar]) v += 0.05 * std::sin(2 * std::numbers::pi * f * t);
    c.samples[i] = static_cast<float>(v);
  }
  const auto kick = frames_of_seconds(0.12, rate);
  for (double t = 0; t < seconds; t += beat) {
    const auto at = frames_of_seconds(t, rate);
    for (std::size_t i = 0; i < kick && at + i < c.frames(); ++i) {
      const double s = static_cast<double>(i) / rate;
      const double env = std::exp(-s / 0.03);
      c.samples[at + i] += static_cast<float>(env * (0.5 * std::sin(2 * std::numbers::pi * 60.0 * s) +
                                                     (i < kick / 10 ? 0.3 * u(rng) : 0.0)));
    }
  }
  return c;
}

/// Noise shaped into irregular syllable-like bursts.
inline AudioClip synthetic_speech(double seconds, int rate = 22050, std::uint64_t seed = 2) {
  AudioClip c = AudioClip::silence(frames_of_seconds(seconds, rate), rate, 1);
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::uniform_real_distribution<float> u(-1.0f, 1.0f);
  double t = 0;
  while (t < seconds) {
    const double len = 0.08 + 0.2 * unit(rng);
    const auto a = frames_of_seconds(t, rate), b = std::min(c.frames(), frames_of_seconds(t + len, rate));
    for (auto i = a; i < b; ++i) {
      const double x = static_cast<double>(i - a) / static_cast<double>(b - a);
      c.samples[i] = static_cast<float>(0.25 * std::sin(std::numbers::pi * x)) * u(rng);
    }
    t += len + 0.03 + 0.15 * unit(rng);
  }
  return c;
}

/// Low-level noise bed.
inline AudioClip synthetic_ambience(double seconds, int rate = 22050, std::uint64_t seed = 3) {
  AudioClip c = AudioClip::silence(frames_of_seconds(seconds, rate), rate, 1);
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<float> u(-1.0f, 1.0f);
  float prev = 0;
  for (auto& s : c.samples) s = prev = 0.9f * prev + 0.02f * u(rng);
  return c;
}

namespace detail {

struct DemoToken {
  const char* text;
  const char* pos;
  int head;
  const char* deprel;
};

inline DraftDescription demo_description(const char* id, double anchor, std::initializer_list<DemoToken> toks) {
  DraftDescription d;
  d.id = id;
  d.anchor_time = from_seconds(anchor);
  for (const auto& t : toks) {
    TimedWord w;
    w.text = t.text;
    w.pos = t.pos;
    w.dep_head = t.head;
    w.dep_label = t.deprel;
    d.words.push_back(w);
  }
  return d;
}

inline void demo_transcript(Project& p, const std::string& text, double start, double end) {
  const auto toks = split_ws(text);
  const double step = (end - start) / static_cast<double>(toks.size());
  for (std::size_t i = 0; i < toks.size(); ++i) {
    TimedWord w;
    w.text = toks[i];
    w.start = from_seconds(start + step * static_cast<double>(i));
    w.end = from_seconds(start + step * (static_cast<double>(i) + 0.85));
    p.transcript.push_back(w);
  }
}

}  // namespace detail

struct DemoProject {
  ProjectDocument doc;
  AudioClip source;
};

/// One minute: speech, a 36 s music bed at 96 bpm, speech, silence, speech,
/// ambience; six annotated descriptions, two of them anchored in speech.
inline DemoProject make_demo_project(int rate = 22050, std::uint64_t seed = 1) {
  DemoProject demo;
  Project& p = demo.doc.project;
  p.source_duration = Millis{60000};
  p.source_audio = "source.wav";
  struct Region {
    double a, b;
    AudioLabel label;
  };
  const Region regions[] = {{0, 6, AudioLabel::kSpeech},     {6, 42, AudioLabel::kMusic},
                            {42, 48, AudioLabel::kSpeech},   {48, 51.5, AudioLabel::kSilence},
                            {51.5, 56, AudioLabel::kSpeech}, {56, 60, AudioLabel::kAmbient}};
  demo.source = AudioClip::silence(frames_of_seconds(60.0, rate), rate, 1);
  std::uint64_t k = 0;
  for (const auto& r : regions) {
    p.labels.push_back({from_seconds(r.a), from_seconds(r.b), r.label});
    AudioClip part;
    switch (r.label) {
      case AudioLabel::kSpeech: part = synthetic_speech(r.b - r.a, rate, seed + k); break;
      case AudioLabel::kMusic: part = synthetic_music(r.b - r.a, 96.0, rate, seed + k); break;
      case AudioLabel::kAmbient: part = synthetic_ambience(r.b - r.a, rate, seed + k); break;
      case AudioLabel::kSilence: part = AudioClip::silence(frames_of_seconds(r.b - r.a, rate), rate, 1); break;
    }
    ++k;
    std::copy(part.samples.begin(), part.samples.end(), demo.source.samples.begin() + frames_of_seconds(r.a, rate));
  }
  detail::demo_transcript(p, "a man and a woman walk along the beach .", 0.2, 5.8);
  detail::demo_transcript(p, "the shops and cafes are closed today . we should come back .", 42.2, 47.8);
  detail::demo_transcript(p, "welcome back to the show .", 51.7, 55.8);
  for (double s : {6.0, 20.0, 30.0, 42.0, 48.0, 56.0}) p.shots.push_back(from_seconds(s));

  using detail::demo_description;
  p.descriptions.push_back(demo_description("beach", 6.5,
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
                                             {".", "PUNCT", 0, "punct"}}));
  p.descriptions.push_back(demo_description("couple", 20.0,
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
                                             {".", "PUNCT", 6, "punct"}}));
  p.descriptions.push_back(demo_description("zoom", 30.0,
                                            {{"Slow", "ADJ", 1, "amod"},
                                             {"zoom", "NOUN", 1, "root"},
                                             {"in", "ADP", 1, "compound:prt"},
                                             {"on", "ADP", 5, "case"},
                                             {"the", "DET", 5, "det"},
                                             {"sign", "NOUN", 1, "nmod"}}));
  p.descriptions.push_back(demo_description("bench", 44.0,
                                            {{"A", "DET", 2, "det"},
                                             {"long", "ADJ", 2, "amod"},
                                             {"bench", "NOUN", 2, "root"},
                                             {"with", "ADP", 5, "case"},
                                             {"blue", "ADJ", 5, "amod"},
                                             {"birds", "NOUN", 2, "nmod"}}));
  p.descriptions.push_back(demo_description("food", 52.0,
                                            {{"Close", "ADJ", 0, "root"},
                                             {"up", "ADP", 0, "compound:prt"},
                                             {"of", "ADP", 4, "case"},
                                             {"bar", "NOUN", 4, "compound"},
                                             {"food", "NOUN", 0, "obl"},
                                             {"including", "ADP", 6, "case"},
                                             {"bibimbap", "NOUN", 4, "nmod"},
                                             {"and", "CCONJ", 9, "cc"},
                                             {"tater", "NOUN", 9, "compound"},
                                             {"tots", "NOUN", 6, "conj"}}));
  p.descriptions.push_back(demo_description("ball", 57.0,
                                            {{"A", "DET", 2, "det"},
                                             {"red", "ADJ", 2, "amod"},
                                             {"ball", "NOUN", 3, "nsubj"},
                                             {"rolls", "VERB", 3, "root"},
                                             {"across", "ADP", 8, "case"},
                                             {"the", "DET", 8, "det"},
                                             {"old", "ADJ", 8, "amod"},
                                             {"wooden", "ADJ", 8, "amod"},
                                             {"floor", "NOUN", 3, "obl"}}));
  return demo;
}

/// Writes project.json and source.wav into `dir`; returns the project path.
inline std::string write_demo_project(const std::string& dir, int rate = 22050, std::uint64_t seed = 1) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  auto demo = make_demo_project(rate, seed);
  write_file_atomic((fs::path(dir) / "source.wav").string(), encode_wav(demo.source, WavEncoding::kPcm16));
  const auto path = (fs::path(dir) / "project.json").string();
  write_file_atomic(path, document_to_json(demo.doc).dump(2) + "\n");
  return path;
}

}  // namespace adfit

#endif  // ADFIT_SYNTHETIC_HPP
