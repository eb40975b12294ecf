#ifndef ADFIT_CANDIDATES_HPP
#define ADFIT_CANDIDATES_HPP

// Shortened description candidates by deletion of parse-tree units
// (adjectives, prepositional phrases, coordinated conjuncts), constrained so
// that protected phrases are kept whole or not at all.

#include <algorithm>
#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <unordered_set>
#include <vector>

#include "adfit/text.hpp"
#include "adfit/timeline.hpp"

namespace adfit {

/// Half-open token index range [begin, end).
struct Span {
  int begin = 0;
  int end = 0;

  int size() const { return end - begin; }
  bool contains(int i) const { return i >= begin && i < end; }
  bool intersects(const Span& o) const { return begin < o.end && o.begin < end; }
  auto operator<=>(const Span&) const = default;
};

struct DropUnit {
  enum class Kind { kAdjective, kPrepositionalPhrase, kCompound };
  Span span;
  Kind kind = Kind::kAdjective;
};

inline std::string_view to_string(DropUnit::Kind k) {
  switch (k) {
    case DropUnit::Kind::kAdjective: return "adjective";
    case DropUnit::Kind::kPrepositionalPhrase: return "prepositional_phrase";
    case DropUnit::Kind::kCompound: return "compound";
  }
  return "unknown";
}

struct ProtectedSpan {
  Span span;
  std::string phrase;
};

struct ProtectedPhraseSet {
  std::vector<ProtectedSpan> film_phrases;
  std::vector<ProtectedSpan> video_phrases;
  std::vector<ProtectedSpan> quoted_spans;
  std::vector<ProtectedSpan> onscreen_spans;
  std::vector<Diagnostic> diagnostics;

  std::vector<Span> all_spans() const {
    std::vector<Span> out;
    for (const auto* group : {&film_phrases, &video_phrases, &quoted_spans, &onscreen_spans})
      for (const auto& p : *group) out.push_back(p.span);
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
  }

  /// The protected span cutting `kept` partially, if any.
  const ProtectedSpan* violated_by(const std::vector<int>& kept) const {
    for (const auto* group : {&film_phrases, &video_phrases, &quoted_spans, &onscreen_spans}) {
      for (const auto& p : *group) {
        int inside = 0;
        for (int k : kept) inside += p.span.contains(k) ? 1 : 0;
        if (inside != 0 && inside != p.span.size()) return &p;
      }
    }
    return nullptr;
  }
};

struct Candidate {
  std::string description_id;
  std::vector<int> kept_indices;
  std::string text;
  Millis duration{0};
  int cut_count = 0;
  bool drops_last_word = false;

  bool is_original(std::size_t word_count) const { return kept_indices.size() == word_count; }
};

/// Counts of normalized 2-, 3- and 4-grams over transcript and descriptions.
/// Punctuation breaks n-grams.
class NgramCounter {
 public:
  NgramCounter() = default;
  explicit NgramCounter(const Project& p) {
    std::vector<std::string> run;
    auto flush = [&] {
      for (std::size_t n = 2; n <= 4; ++n)
        for (std::size_t i = 0; i + n <= run.size(); ++i)
          ++counts_[std::vector<std::string>(run.begin() + i, run.begin() + i + n)];
      run.clear();
    };
    auto feed = [&](const std::string& raw) {
      auto tok = normalize_token(raw);
      if (tok.empty()) return flush();
      run.push_back(tok);
      // A token ending in sentence punctuation closes the run after itself.
      char last = raw.back();
      if (last == '.' || last == ',' || last == '!' || last == '?' || last == ';' || last == ':')
        flush();
    };
    for (const auto& w : p.transcript) feed(w.text);
    flush();
    for (const auto& d : p.descriptions) {
      for (const auto& w : d.words) feed(w.text);
      flush();
    }
  }
  int count(const std::vector<std::string>& ngram) const {
    auto it = counts_.find(ngram);
    return it == counts_.end() ? 0 : it->second;
  }

 private:
  std::map<std::vector<std::string>, int> counts_;
};

namespace detail {

inline bool is_quote_char_at(std::string_view tok, std::size_t pos, std::size_t& len) {
  if (pos < tok.size() && tok[pos] == '"') return len = 1, true;
  // UTF-8 curly quotes U+201C / U+201D.
  if (pos + 3 <= tok.size() && static_cast<unsigned char>(tok[pos]) == 0xE2 &&
      static_cast<unsigned char>(tok[pos + 1]) == 0x80 &&
      (static_cast<unsigned char>(tok[pos + 2]) == 0x9C ||
       static_cast<unsigned char>(tok[pos + 2]) == 0x9D))
    return len = 3, true;
  return false;
}
inline bool starts_with_quote(std::string_view tok) {
  std::size_t len = 0;
  return is_quote_char_at(tok, 0, len);
}
inline bool ends_with_quote(std::string_view tok) {
  std::size_t len = 0;
  if (!tok.empty() && tok.back() == '"') return true;
  return tok.size() >= 3 && is_quote_char_at(tok, tok.size() - 3, len);
}
inline bool is_sentence_end(std::string_view tok) {
  return tok == "." || tok == "!" || tok == "?";
}
inline bool is_noun_or_verb(std::string_view pos) {
  return pos == "NOUN" || pos == "PROPN" || pos == "VERB";
}

}  // namespace detail

/// Phrases a candidate may not split: glossary terms (plus trailing
/// prepositions), recurring content n-grams, quoted text and on-screen text.
inline ProtectedPhraseSet collect_protected_phrases(const DraftDescription& d,
                                                    const NgramCounter& ngrams,
                                                    const Glossary& glossary,
                                                    const WordSet& stopwords) {
  ProtectedPhraseSet out;
  const int n = static_cast<int>(d.words.size());
  std::vector<std::string> norm(n);
  for (int i = 0; i < n; ++i) norm[i] = normalize_token(d.words[i].text);

  auto phrase_of = [&](Span s) {
    std::string t;
    for (int i = s.begin; i < s.end; ++i) t += (t.empty() ? "" : " ") + d.words[i].text;
    return t;
  };

  const int max_term = static_cast<int>(glossary.max_length());
  for (int i = 0; i < n; ++i) {
    for (int len = 1; len <= max_term && i + len <= n; ++len) {
      std::vector<std::string> gram(norm.begin() + i, norm.begin() + i + len);
      if (!glossary.terms.count(gram)) continue;
      int end = i + len;
      while (end < n && d.words[end].pos == "ADP") ++end;
      out.film_phrases.push_back({{i, end}, phrase_of({i, end})});
    }
  }

  for (int len = 2; len <= 4; ++len) {
    for (int i = 0; i + len <= n; ++i) {
      std::vector<std::string> gram(norm.begin() + i, norm.begin() + i + len);
      bool ok = std::none_of(gram.begin(), gram.end(), [&](const std::string& t) {
        return t.empty() || stopwords.count(t) > 0;
      });
      if (!ok) continue;
      bool content = false;
      for (int k = i; k < i + len; ++k) content |= detail::is_noun_or_verb(d.words[k].pos);
      if (!content || ngrams.count(gram) < 3) continue;
      out.video_phrases.push_back({{i, i + len}, phrase_of({i, i + len})});
    }
  }

  int open = -1;
  for (int i = 0; i < n; ++i) {
    const auto& t = d.words[i].text;
    const bool bare = t == "\"" || t == "\xE2\x80\x9C" || t == "\xE2\x80\x9D";
    if (open < 0) {
      if (bare || detail::starts_with_quote(t)) {
        open = i;
        if (!bare && t.size() > 1 && detail::ends_with_quote(t)) {
          out.quoted_spans.push_back({{i, i + 1}, phrase_of({i, i + 1})});
          open = -1;
        }
      }
    } else if (bare || detail::ends_with_quote(t)) {
      out.quoted_spans.push_back({{open, i + 1}, phrase_of({open, i + 1})});
      open = -1;
    }
  }
  if (open >= 0)
    out.diagnostics.push_back({Diagnostic::Severity::kWarning, "unbalanced_quote",
                               "descriptions[" + d.id + "].words[" + std::to_string(open) + "]",
                               "quotation mark is never closed; text after it is not protected"});

  for (int i = 0; i < n; ++i) {
    const auto low = lowercase(d.words[i].text);
    if (low.find("text") == std::string::npos && low.find("title") == std::string::npos &&
        low.find("credit") == std::string::npos)
      continue;
    int end = i + 1;
    while (end < n && !detail::is_sentence_end(d.words[end].text)) ++end;
    if (end > i + 1) out.onscreen_spans.push_back({{i + 1, end}, phrase_of({i + 1, end})});
  }
  return out;
}

inline ProtectedPhraseSet collect_protected_phrases(const DraftDescription& d,
                                                    const Project& project,
                                                    const Glossary& glossary,
                                                    const WordSet& stopwords) {
  return collect_protected_phrases(d, NgramCounter(project), glossary, stopwords);
}

namespace detail {

struct DepTree {
  std::vector<std::vector<int>> children;
  int root = -1;

  explicit DepTree(const DraftDescription& d) : children(d.words.size()) {
    for (int i = 0; i < static_cast<int>(d.words.size()); ++i) {
      const auto& w = d.words[i];
      if (w.pos.empty() || w.dep_label.empty() || w.dep_head < 0 ||
          w.dep_head >= static_cast<int>(d.words.size()))
        throw Error("annotation", "description '" + d.id + "' word " + std::to_string(i) +
                                      " ('" + w.text + "') lacks a POS/dependency annotation");
      if (w.dep_head == i) {
        if (root < 0) root = i;
      } else {
        children[w.dep_head].push_back(i);
      }
    }
  }

  void collect(int node, std::vector<int>& out) const {
    out.push_back(node);
    for (int c : children[node]) collect(c, out);
  }
  std::vector<int> subtree(int node) const {
    std::vector<int> out;
    collect(node, out);
    std::sort(out.begin(), out.end());
    return out;
  }
};

inline bool label_is(const std::string& label, std::string_view base) {
  return label == base || (label.size() > base.size() && label.compare(0, base.size(), base) == 0 &&
                           label[base.size()] == ':');
}

inline std::optional<Span> contiguous(const std::vector<int>& sorted) {
  if (sorted.empty()) return std::nullopt;
  if (sorted.back() - sorted.front() + 1 != static_cast<int>(sorted.size())) return std::nullopt;
  return Span{sorted.front(), sorted.back() + 1};
}

}  // namespace detail

/// Tokens that can be dropped together: each adjective (with its dependents),
/// each prepositional phrase, and each conjunct of a coordination together
/// with its coordinator. Units touching a protected span are left out.
/// Units may nest; a first conjunct and the following conjunct share the
/// coordinator token.
inline std::vector<DropUnit> droppable_units(const DraftDescription& d,
                                             const ProtectedPhraseSet& protected_set) {
  detail::DepTree tree(d);
  const int n = static_cast<int>(d.words.size());
  std::vector<DropUnit> units;
  auto add = [&](const std::vector<int>& idx, DropUnit::Kind kind) {
    auto span = detail::contiguous(idx);
    if (!span || span->size() >= n) return;
    units.push_back({*span, kind});
  };

  for (int i = 0; i < n; ++i) {
    const auto& w = d.words[i];
    if (i == tree.root || w.dep_head == i) continue;
    if (w.pos == "ADJ") add(tree.subtree(i), DropUnit::Kind::kAdjective);

    if (w.pos == "ADP") {
      if (detail::label_is(w.dep_label, "case")) {
        if (w.dep_head != tree.root) add(tree.subtree(w.dep_head), DropUnit::Kind::kPrepositionalPhrase);
      } else if (!detail::label_is(w.dep_label, "mark") && !detail::label_is(w.dep_label, "fixed") &&
                 !detail::label_is(w.dep_label, "compound") && !detail::label_is(w.dep_label, "flat")) {
        add(tree.subtree(i), DropUnit::Kind::kPrepositionalPhrase);
      }
    }

    if (detail::label_is(w.dep_label, "conj")) {
      const int head = w.dep_head;
      add(tree.subtree(i), DropUnit::Kind::kCompound);
      // The first conjunct goes together with the coordinator of the
      // conjunct that follows it. Never applied to the root clause.
      int first_conj = n;
      for (int c : tree.children[head])
        if (detail::label_is(d.words[c].dep_label, "conj")) first_conj = std::min(first_conj, c);
      if (i != first_conj || head == tree.root) continue;
      std::set<int> part;
      part.insert(head);
      for (int c : tree.children[head]) {
        const auto& lbl = d.words[c].dep_label;
        if (detail::label_is(lbl, "conj") || detail::label_is(lbl, "case") ||
            detail::label_is(lbl, "mark"))
          continue;
        for (int k : tree.subtree(c)) part.insert(k);
      }
      bool has_cc = false;
      for (int c : tree.children[i]) {
        if (detail::label_is(d.words[c].dep_label, "cc")) {
          for (int k : tree.subtree(c)) part.insert(k);
          has_cc = true;
        }
      }
      if (has_cc) add(std::vector<int>(part.begin(), part.end()), DropUnit::Kind::kCompound);
    }
  }

  const auto prot = protected_set.all_spans();
  std::vector<DropUnit> out;
  std::set<Span> seen;
  for (const auto& u : units) {
    bool blocked = std::any_of(prot.begin(), prot.end(),
                               [&](const Span& p) { return p.intersects(u.span); });
    if (blocked || !seen.insert(u.span).second) continue;
    out.push_back(u);
  }
  std::sort(out.begin(), out.end(),
            [](const DropUnit& a, const DropUnit& b) { return a.span < b.span; });
  return out;
}

/// Kept/dropped transitions between neighbouring original positions.
inline int count_cuts(const std::vector<int>& kept, int word_count) {
  std::vector<bool> keep(word_count, false);
  for (int k : kept) keep[k] = true;
  int cuts = 0;
  for (int i = 1; i < word_count; ++i) cuts += keep[i] != keep[i - 1] ? 1 : 0;
  return cuts;
}

inline int last_spoken_index(const DraftDescription& d) {
  for (int i = static_cast<int>(d.words.size()) - 1; i >= 0; --i)
    if (detail::has_alnum(d.words[i].text)) return i;
  return -1;
}

/// Crossfade overlap applied where two non-adjacent recorded words are joined.
inline constexpr Millis kWordCrossfade{5};

/// Maximal runs of consecutive kept spoken words, as indices into the
/// description's spoken-word sequence (punctuation ignored).
inline std::vector<std::pair<int, int>> spoken_runs(const DraftDescription& d,
                                                    const std::vector<int>& kept) {
  std::vector<int> spoken_pos(d.words.size(), -1);
  int s = 0;
  for (std::size_t i = 0; i < d.words.size(); ++i)
    if (detail::has_alnum(d.words[i].text)) spoken_pos[i] = s++;
  std::vector<std::pair<int, int>> runs;
  for (int k : kept) {
    int p = spoken_pos[k];
    if (p < 0) continue;
    if (!runs.empty() && runs.back().second + 1 == p)
      runs.back().second = p;
    else
      runs.push_back({p, p});
  }
  return runs;
}

/// Recording time ranges realizing `kept`, one per run of consecutive
/// spoken words. A run holding the first word starts at 0 and one holding
/// the last word ends at the recording's end. When an end word is dropped,
/// the recording's own leading or trailing room tone stands in for it, so
/// every cut at an end is also a crossfade.
inline std::vector<std::pair<Millis, Millis>> recorded_runs(const DraftDescription& d,
                                                            const std::vector<int>& kept) {
  if (!d.recording) throw Error("validation", "description '" + d.id + "' has no recording");
  const auto& rec = *d.recording;
  std::vector<WordSpan> spoken;
  for (std::size_t i = 0; i < d.words.size(); ++i)
    if (detail::has_alnum(d.words[i].text)) spoken.push_back(rec.alignment.at(i));
  const auto runs = spoken_runs(d, kept);
  std::vector<std::pair<Millis, Millis>> out;
  if (runs.empty()) return out;
  if (runs.front().first > 0 && spoken.front().start > Millis{0}) out.push_back({Millis{0}, spoken.front().start});
  for (auto [a, b] : runs) {
    Millis start = a == 0 ? Millis{0} : spoken[a].start;
    Millis end = b + 1 == static_cast<int>(spoken.size()) ? rec.duration : spoken[b].end;
    out.push_back({start, end});
  }
  if (runs.back().second + 1 < static_cast<int>(spoken.size()) && spoken.back().end < rec.duration)
    out.push_back({spoken.back().end, rec.duration});
  return out;
}

/// Overlap of the crossfade joining a range of length `len` onto one of
/// length `prev`: kWordCrossfade, shortened for very short ranges.
inline Millis join_overlap(Millis prev, Millis len) { return std::min({kWordCrossfade, len, prev / 2}); }

/// Spoken length of the kept words: from the recording when there is one,
/// else 0.3 s per kept word.
inline Millis candidate_duration(const DraftDescription& d, const std::vector<int>& kept) {
  if (!d.recording) {
    std::size_t words = 0;
    for (int k : kept) words += detail::has_alnum(d.words[k].text) ? 1 : 0;
    return estimate_word_count_duration(words);
  }
  const auto runs = recorded_runs(d, kept);
  Millis total{0};
  for (std::size_t i = 0; i < runs.size(); ++i) {
    const Millis len = runs[i].second - runs[i].first;
    total += len;
    if (i > 0) total -= join_overlap(runs[i - 1].second - runs[i - 1].first, len);
  }
  return total;
}

inline Candidate make_candidate(const DraftDescription& d, std::vector<int> kept) {
  Candidate c;
  c.description_id = d.id;
  for (int k : kept) c.text += (c.text.empty() ? "" : " ") + d.words[k].text;
  c.duration = candidate_duration(d, kept);
  c.cut_count = count_cuts(kept, static_cast<int>(d.words.size()));
  const int last = last_spoken_index(d);
  c.drops_last_word = last >= 0 && !std::binary_search(kept.begin(), kept.end(), last);
  c.kept_indices = std::move(kept);
  return c;
}

inline constexpr std::size_t kDefaultCandidateCap = 256;

/// All distinct word-subsequences reachable by dropping unions of `units`,
/// sorted by duration (shortest first). The full original is always present.
/// Beyond `cap`, only the `cap` shortest are kept, plus the original.
inline std::vector<Candidate> generate_candidates(const DraftDescription& d,
                                                  const std::vector<DropUnit>& units,
                                                  std::size_t cap = kDefaultCandidateCap) {
  const int n = static_cast<int>(d.words.size());
  if (n > 64) throw Error("validation", "description '" + d.id + "' exceeds 64 tokens");
  std::vector<int> all(n);
  for (int i = 0; i < n; ++i) all[i] = i;
  Candidate original = make_candidate(d, all);
  if (d.lock_text) return {original};

  auto mask_of = [](Span s) {
    std::uint64_t m = 0;
    for (int i = s.begin; i < s.end; ++i) m |= std::uint64_t{1} << i;
    return m;
  };
  std::unordered_set<std::uint64_t> unions{0};
  for (const auto& u : units) {
    const auto m = mask_of(u.span);
    std::vector<std::uint64_t> grown;
    for (auto existing : unions)
      if ((existing | m) != existing) grown.push_back(existing | m);
    unions.insert(grown.begin(), grown.end());
  }

  // Same text from different drop sets: keep the variant with fewer cuts.
  std::map<std::string, Candidate> by_text;
  for (auto dropped : unions) {
    std::vector<int> kept;
    for (int i = 0; i < n; ++i)
      if (!(dropped >> i & 1)) kept.push_back(i);
    bool spoken = std::any_of(kept.begin(), kept.end(),
                              [&](int k) { return detail::has_alnum(d.words[k].text); });
    if (!spoken) continue;
    Candidate c = make_candidate(d, std::move(kept));
    auto it = by_text.find(c.text);
    if (it == by_text.end()) {
      by_text.emplace(c.text, std::move(c));
    } else if (std::tie(c.cut_count, c.kept_indices) <
               std::tie(it->second.cut_count, it->second.kept_indices)) {
      it->second = std::move(c);
    }
  }

  std::vector<Candidate> out;
  out.reserve(by_text.size());
  for (auto& [text, c] : by_text) out.push_back(std::move(c));
  auto shorter = [](const Candidate& a, const Candidate& b) {
    return std::tie(a.duration, a.cut_count, a.kept_indices) <
           std::tie(b.duration, b.cut_count, b.kept_indices);
  };
  std::sort(out.begin(), out.end(), shorter);
  if (out.size() > cap) {
    out.resize(cap);
    bool has_original = std::any_of(out.begin(), out.end(),
                                    [&](const Candidate& c) { return c.text == original.text; });
    if (!has_original) out.push_back(original);
  }
  return out;
}

/// Full pipeline for one description: protected phrases, drop units,
/// candidate enumeration.
struct CandidateSet {
  ProtectedPhraseSet protected_set;
  std::vector<DropUnit> units;
  std::vector<Candidate> candidates;
};

inline CandidateSet build_candidate_set(const DraftDescription& d, const NgramCounter& ngrams,
                                        const Glossary& glossary, const WordSet& stopwords,
                                        std::size_t cap = kDefaultCandidateCap) {
  CandidateSet s;
  s.protected_set = collect_protected_phrases(d, ngrams, glossary, stopwords);
  s.units = droppable_units(d, s.protected_set);
  s.candidates = generate_candidates(d, s.units, cap);
  return s;
}

}  // namespace adfit

#endif  // ADFIT_CANDIDATES_HPP
