#ifndef ADFIT_TIMELINE_HPP
#define ADFIT_TIMELINE_HPP

// Project data model: transcript, audio labels, gaps, shots and draft
// descriptions. All times live on a 1 ms grid (std::chrono::milliseconds).

#include <algorithm>
#include <cctype>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace adfit {

using Millis = std::chrono::milliseconds;

inline Millis from_seconds(double s) {
  return Millis(static_cast<std::int64_t>(std::llround(s * 1000.0)));
}
inline double to_seconds(Millis t) { return static_cast<double>(t.count()) / 1000.0; }

/// Base exception for every error the library raises. `code` is a short
/// machine-readable tag (e.g. "validation", "infeasible", "not_found").
class Error : public std::runtime_error {
 public:
  Error(std::string code, const std::string& what)
      : std::runtime_error(what), code_(std::move(code)) {}
  const std::string& code() const noexcept { return code_; }

 private:
  std::string code_;
};

struct Diagnostic {
  enum class Severity { kError, kWarning };
  Severity severity = Severity::kError;
  std::string code;      // e.g. "out_of_range", "duplicate_id"
  std::string location;  // e.g. "descriptions[3].anchor_time"
  std::string message;

  bool is_error() const { return severity == Severity::kError; }
};

inline std::string to_string(const Diagnostic& d) {
  return std::string(d.is_error() ? "error" : "warning") + " [" + d.code + "] " +
         d.location + ": " + d.message;
}

struct TimedWord {
  std::string text;
  Millis start{0};
  Millis end{0};
  std::string pos;        // Universal Dependencies UPOS tag
  int dep_head = -1;      // index within the owning sentence; self for root
  std::string dep_label;  // Universal Dependencies relation
};

enum class AudioLabel { kSpeech, kMusic, kSilence, kAmbient };

inline std::string_view to_string(AudioLabel l) {
  switch (l) {
    case AudioLabel::kSpeech: return "speech";
    case AudioLabel::kMusic: return "music";
    case AudioLabel::kSilence: return "silence";
    case AudioLabel::kAmbient: return "ambient";
  }
  return "unknown";
}

inline AudioLabel parse_audio_label(std::string_view s) {
  if (s == "speech") return AudioLabel::kSpeech;
  if (s == "music") return AudioLabel::kMusic;
  if (s == "silence") return AudioLabel::kSilence;
  if (s == "ambient") return AudioLabel::kAmbient;
  throw Error("validation", "unknown audio label '" + std::string(s) + "'");
}

struct AudioLabelSegment {
  Millis start{0};
  Millis end{0};
  AudioLabel label = AudioLabel::kSilence;
};

struct GapSegment {
  Millis start{0};
  Millis end{0};
  AudioLabel label = AudioLabel::kSilence;
  bool extendable = false;
  Millis max_extension{0};

  Millis length() const { return end - start; }
  bool operator==(const GapSegment&) const = default;
};

struct WordSpan {
  Millis start{0};
  Millis end{0};
};

/// A narrated take of a description plus its word-level alignment.
struct Recording {
  std::string path;  // relative to the project file
  Millis duration{0};
  std::vector<WordSpan> alignment;  // one span per description word, in order
};

struct DraftDescription {
  std::string id;
  Millis anchor_time{0};
  std::vector<TimedWord> words;
  bool lock_text = false;
  bool lock_time = false;
  bool lock_presence = false;
  std::optional<Recording> recording;

  std::string text() const {
    std::string out;
    for (const auto& w : words) {
      if (!out.empty()) out += ' ';
      out += w.text;
    }
    return out;
  }
};

struct Project {
  Millis source_duration{0};
  std::vector<TimedWord> transcript;
  std::vector<AudioLabelSegment> labels;
  std::vector<Millis> shots;
  std::vector<DraftDescription> descriptions;
  std::string source_audio;

  const DraftDescription* find_description(std::string_view id) const {
    for (const auto& d : descriptions)
      if (d.id == id) return &d;
    return nullptr;
  }
  DraftDescription* find_description(std::string_view id) {
    for (auto& d : descriptions)
      if (d.id == id) return &d;
    return nullptr;
  }
};

namespace detail {

struct Interval {
  Millis start;
  Millis end;
};

inline bool has_alnum(std::string_view s) {
  return std::any_of(s.begin(), s.end(),
                     [](unsigned char c) { return std::isalnum(c) != 0; });
}

// Subtracts `cuts` (sorted, may overlap) from `[start, end)`.
inline std::vector<Interval> subtract(Interval span, const std::vector<Interval>& cuts) {
  std::vector<Interval> out;
  Millis cursor = span.start;
  for (const auto& c : cuts) {
    if (c.end <= cursor) continue;
    if (c.start >= span.end) break;
    if (c.start > cursor) out.push_back({cursor, c.start});
    cursor = std::max(cursor, c.end);
    if (cursor >= span.end) break;
  }
  if (cursor < span.end) out.push_back({cursor, span.end});
  return out;
}

}  // namespace detail

/// Throws Error("validation") naming the first overlapping pair.
inline void check_label_overlap(const std::vector<AudioLabelSegment>& labels) {
  std::vector<std::size_t> order(labels.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return labels[a].start < labels[b].start;
  });
  for (std::size_t k = 1; k < order.size(); ++k) {
    const auto& prev = labels[order[k - 1]];
    const auto& cur = labels[order[k]];
    if (cur.start < prev.end) {
      std::ostringstream msg;
      msg << "label segments overlap: labels[" << order[k - 1] << "] ("
          << to_string(prev.label) << " " << to_seconds(prev.start) << "-"
          << to_seconds(prev.end) << ") and labels[" << order[k] << "] ("
          << to_string(cur.label) << " " << to_seconds(cur.start) << "-"
          << to_seconds(cur.end) << ")";
      throw Error("validation", msg.str());
    }
  }
}

/// Maximal non-speech intervals. Time covered by transcript words counts as
/// speech whatever the label says. Touching non-speech pieces are merged and
/// the merged gap takes the label holding the most time inside it.
inline std::vector<GapSegment> compute_gaps(const std::vector<AudioLabelSegment>& labels,
                                            const std::vector<TimedWord>& transcript) {
  check_label_overlap(labels);

  std::vector<AudioLabelSegment> sorted = labels;
  std::sort(sorted.begin(), sorted.end(),
            [](const auto& a, const auto& b) { return a.start < b.start; });

  std::vector<detail::Interval> words;
  words.reserve(transcript.size());
  for (const auto& w : transcript)
    if (w.end > w.start) words.push_back({w.start, w.end});
  std::sort(words.begin(), words.end(),
            [](const auto& a, const auto& b) { return a.start < b.start; });

  struct Piece {
    detail::Interval span;
    AudioLabel label;
  };
  std::vector<Piece> pieces;
  for (const auto& seg : sorted) {
    if (seg.label == AudioLabel::kSpeech || seg.end <= seg.start) continue;
    for (const auto& iv : detail::subtract({seg.start, seg.end}, words))
      pieces.push_back({iv, seg.label});
  }

  std::vector<GapSegment> gaps;
  std::size_t i = 0;
  while (i < pieces.size()) {
    std::size_t j = i + 1;
    while (j < pieces.size() && pieces[j].span.start == pieces[j - 1].span.end) ++j;
    std::map<AudioLabel, Millis> share;
    for (std::size_t k = i; k < j; ++k)
      share[pieces[k].label] += pieces[k].span.end - pieces[k].span.start;
    // Ties resolve in enum order: music, silence, ambient.
    AudioLabel best = share.begin()->first;
    for (const auto& [label, t] : share)
      if (t > share[best]) best = label;
    gaps.push_back({pieces[i].span.start, pieces[j - 1].span.end, best, false, Millis{0}});
    i = j;
  }
  return gaps;
}

/// Spoken-length estimate for text with no recording: 0.3 s per word.
/// Tokens without any letter or digit (punctuation) are not words.
inline Millis estimate_description_duration(std::string_view text) {
  std::istringstream in{std::string(text)};
  std::string tok;
  std::int64_t n = 0;
  while (in >> tok)
    if (detail::has_alnum(tok)) ++n;
  return Millis(300 * n);
}

inline Millis estimate_word_count_duration(std::size_t words) {
  return Millis(300 * static_cast<std::int64_t>(words));
}

namespace detail {

inline std::string fmt_time(Millis t) {
  std::ostringstream o;
  o << to_seconds(t) << "s";
  return o.str();
}

inline void check_words(const std::vector<TimedWord>& words, const std::string& where,
                        Millis duration, bool timed, bool annotated,
                        std::vector<Diagnostic>& out) {
  for (std::size_t i = 0; i < words.size(); ++i) {
    const auto& w = words[i];
    const std::string loc = where + "[" + std::to_string(i) + "]";
    if (timed) {
      if (!(w.start < w.end))
        out.push_back({Diagnostic::Severity::kError, "bad_interval", loc,
                       "word start must be before end"});
      if (w.start < Millis{0} || w.end > duration)
        out.push_back({Diagnostic::Severity::kError, "out_of_range", loc,
                       "word outside [0, source_duration]"});
      if (i > 0 && w.start < words[i - 1].end)
        out.push_back({Diagnostic::Severity::kError, "unsorted", loc,
                       "words overlap or are out of order"});
    }
    if (annotated) {
      if (w.pos.empty() || w.dep_label.empty())
        out.push_back({Diagnostic::Severity::kError, "missing_annotation", loc,
                       "word '" + w.text + "' lacks POS/dependency annotation"});
      if (w.dep_head < 0 || w.dep_head >= static_cast<int>(words.size()))
        out.push_back({Diagnostic::Severity::kError, "bad_head", loc,
                       "dependency head index out of range"});
    }
  }
}

}  // namespace detail

/// One diagnostic per violated invariant; empty for a well-formed project.
inline std::vector<Diagnostic> validate_project(const Project& p) {
  using Sev = Diagnostic::Severity;
  std::vector<Diagnostic> out;
  const Millis dur = p.source_duration;
  if (dur <= Millis{0})
    out.push_back({Sev::kError, "bad_duration", "source_duration", "must be positive"});

  detail::check_words(p.transcript, "transcript", dur, true, false, out);

  std::vector<std::size_t> order(p.labels.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) {
    return p.labels[a].start < p.labels[b].start;
  });
  Millis cursor{0};
  for (std::size_t k = 0; k < order.size(); ++k) {
    const auto& seg = p.labels[order[k]];
    const std::string loc = "labels[" + std::to_string(order[k]) + "]";
    if (!(seg.start < seg.end))
      out.push_back({Sev::kError, "bad_interval", loc, "label start must be before end"});
    if (seg.start < Millis{0} || seg.end > dur)
      out.push_back({Sev::kError, "out_of_range", loc, "label outside [0, source_duration]"});
    if (k > 0 && seg.start < p.labels[order[k - 1]].end) {
      out.push_back({Sev::kError, "label_overlap", loc,
                     "overlaps labels[" + std::to_string(order[k - 1]) + "]"});
    } else if (seg.start > cursor) {
      out.push_back({Sev::kError, "label_hole", loc,
                     "labels leave " + detail::fmt_time(cursor) + "-" +
                         detail::fmt_time(seg.start) + " uncovered"});
    }
    cursor = std::max(cursor, seg.end);
  }
  if (!p.labels.empty() && cursor < dur)
    out.push_back({Sev::kError, "label_hole", "labels",
                   "labels end at " + detail::fmt_time(cursor) + " before source end"});

  for (std::size_t i = 0; i < p.transcript.size(); ++i) {
    const auto& w = p.transcript[i];
    for (std::size_t k = 0; k < p.labels.size(); ++k) {
      const auto& seg = p.labels[k];
      if (seg.label != AudioLabel::kSpeech && seg.start < w.end && w.start < seg.end) {
        out.push_back({Sev::kWarning, "word_not_speech",
                       "transcript[" + std::to_string(i) + "]",
                       "aligned word '" + w.text + "' overlaps non-speech labels[" +
                           std::to_string(k) + "]; treated as speech"});
        break;
      }
    }
  }

  for (std::size_t i = 0; i < p.shots.size(); ++i) {
    const std::string loc = "shots[" + std::to_string(i) + "]";
    if (p.shots[i] < Millis{0} || p.shots[i] > dur)
      out.push_back({Sev::kError, "out_of_range", loc, "shot outside [0, source_duration]"});
    if (i > 0 && p.shots[i] <= p.shots[i - 1])
      out.push_back({Sev::kError, "unsorted", loc, "shot boundaries must strictly increase"});
  }

  std::set<std::string> ids;
  for (std::size_t i = 0; i < p.descriptions.size(); ++i) {
    const auto& d = p.descriptions[i];
    const std::string loc = "descriptions[" + std::to_string(i) + "]";
    if (d.id.empty()) out.push_back({Sev::kError, "missing_id", loc, "description id is empty"});
    if (!ids.insert(d.id).second)
      out.push_back({Sev::kError, "duplicate_id", loc, "id '" + d.id + "' used twice"});
    if (d.anchor_time < Millis{0} || d.anchor_time > dur)
      out.push_back({Sev::kError, "out_of_range", loc + ".anchor_time",
                     detail::fmt_time(d.anchor_time) + " outside [0, source_duration]"});
    if (i > 0 && d.anchor_time < p.descriptions[i - 1].anchor_time)
      out.push_back({Sev::kError, "unsorted", loc, "descriptions must be sorted by anchor_time"});
    if (d.words.empty())
      out.push_back({Sev::kError, "empty_description", loc, "description has no words"});
    detail::check_words(d.words, loc + ".words", dur, false, true, out);
    if (d.words.size() > 64)
      out.push_back({Sev::kError, "too_long", loc, "descriptions are limited to 64 tokens"});
    if (d.recording) {
      const auto& r = *d.recording;
      if (r.alignment.size() != d.words.size()) {
        out.push_back({Sev::kError, "bad_alignment", loc + ".recording",
                       "alignment has " + std::to_string(r.alignment.size()) + " spans for " +
                           std::to_string(d.words.size()) + " words"});
      } else {
        for (std::size_t k = 0; k < r.alignment.size(); ++k) {
          const auto& s = r.alignment[k];
          // Punctuation tokens may carry zero-length spans.
          const bool spoken = detail::has_alnum(d.words[k].text);
          bool bad = (spoken ? !(s.start < s.end) : s.end < s.start) || s.start < Millis{0} ||
                     s.end > r.duration ||
                     (k > 0 && s.start < r.alignment[k - 1].end);
          if (bad) {
            out.push_back({Sev::kError, "bad_alignment",
                           loc + ".recording.alignment[" + std::to_string(k) + "]",
                           "spans must be ordered, non-overlapping and inside the recording"});
            break;
          }
        }
      }
    }
  }
  return out;
}

inline bool has_errors(const std::vector<Diagnostic>& diags) {
  return std::any_of(diags.begin(), diags.end(), [](const auto& d) { return d.is_error(); });
}

}  // namespace adfit

#endif  // ADFIT_TIMELINE_HPP
