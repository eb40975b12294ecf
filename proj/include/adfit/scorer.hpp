#ifndef ADFIT_SCORER_HPP
#define ADFIT_SCORER_HPP

// Candidate cost: weighted coherence, informativeness and edit quality.

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <unordered_map>
#include <utility>

#include "adfit/candidates.hpp"
#include "adfit/config.hpp"
#include "adfit/language_model.hpp"
#include "adfit/text.hpp"

namespace adfit {

struct CostBreakdown {
  double coherence = 0;
  double informativeness = 0;
  double edit = 0;
  double weighted_total = 0;
};

/// word -> natural-log probability in a general corpus.
class CorpusFrequencyTable {
 public:
  static constexpr const char* kUnknownKey = "<unk>";

  CorpusFrequencyTable() = default;

  void set(const std::string& word, double log_prob) {
    if (log_prob > 0) throw Error("validation", "log probability of '" + word + "' is positive");
    table_[word] = log_prob;
    min_ = std::min(min_, log_prob);
  }
  /// Defaults to ten times rarer than the rarest stored word.
  void set_oov(double log_prob) { oov_ = log_prob; }

  double oov() const { return oov_ ? *oov_ : (table_.empty() ? std::log(1e-8) : min_ - std::log(10.0)); }

  double log_prob(const std::string& word) const {
    auto it = table_.find(word);
    return it == table_.end() ? oov() : it->second;
  }
  double surprisal(const std::string& word) const { return -log_prob(word); }
  std::size_t size() const { return table_.size(); }

  /// TSV `word<TAB>log_probability`; a `<unk>` row sets the OOV default.
  static CorpusFrequencyTable load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("io", "cannot open frequency table '" + path + "'");
    CorpusFrequencyTable t;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      if (line.empty() || line[0] == '#') continue;
      auto tab = line.find('\t');
      if (tab == std::string::npos)
        throw Error("validation", path + ":" + std::to_string(lineno) + ": expected word<TAB>logprob");
      const std::string word = lowercase(line.substr(0, tab));
      const double lp = std::stod(line.substr(tab + 1));
      if (word == kUnknownKey)
        t.set_oov(lp);
      else
        t.set(word, lp);
    }
    if (t.oov_ && !t.table_.empty() && *t.oov_ > t.min_)
      throw Error("validation", path + ": <unk> log probability exceeds the rarest word");
    return t;
  }

 private:
  std::unordered_map<std::string, double> table_;
  double min_ = 0;
  std::optional<double> oov_;
};

/// Normalized word counts over the transcript and all draft descriptions.
class OccurrenceTable {
 public:
  OccurrenceTable() = default;
  explicit OccurrenceTable(const Project& p) {
    for (const auto& w : p.transcript) add(w.text);
    for (const auto& d : p.descriptions)
      for (const auto& w : d.words) add(w.text);
  }
  void add(std::string_view raw) {
    auto t = normalize_token(raw);
    if (!t.empty()) ++counts_[t];
  }
  int count(const std::string& normalized) const {
    auto it = counts_.find(normalized);
    return it == counts_.end() ? 0 : it->second;
  }

 private:
  std::unordered_map<std::string, int> counts_;
};

/// Coherence scores supplied from outside (e.g. a large language model run
/// offline), keyed by description id and candidate text.
using CoherenceOverrides = std::map<std::pair<std::string, std::string>, double>;

inline double coherence_cost(const Candidate& c, const LanguageModelScorer& lm) {
  auto toks = lm_tokens(c.text);
  if (toks.empty())
    throw Error("empty_candidate", "candidate of '" + c.description_id + "' has no tokens");
  return lm.score(toks);
}

inline bool is_noun_like(std::string_view pos) {
  return pos == "NOUN" || pos == "PROPN" || pos == "PRON";
}

/// Reciprocal of the mean importance of kept nouns and pronouns, where
/// importance = in-project occurrences x corpus surprisal. Film-glossary
/// unigrams carry no importance. Returns `ceiling` when nothing scores.
inline double informativeness_cost(const Candidate& c, const DraftDescription& d,
                                   const OccurrenceTable& occurrences,
                                   const CorpusFrequencyTable& freq, const Glossary& glossary,
                                   double ceiling = 2.0) {
  double sum = 0;
  int words = 0;
  for (int k : c.kept_indices) {
    const auto& w = d.words[k];
    const auto norm = normalize_token(w.text);
    if (norm.empty()) continue;
    ++words;
    if (!is_noun_like(w.pos) || glossary.contains_unigram(norm)) continue;
    sum += occurrences.count(norm) * freq.surprisal(norm);
  }
  if (words == 0 || sum <= 0) return ceiling;
  const double score = sum / words;
  return 1.0 / score;
}

/// Cut count, plus a surcharge when the final word goes.
inline double edit_cost(const Candidate& c, double last_word_penalty = 20.0) {
  return c.cut_count + (c.drops_last_word ? last_word_penalty : 0.0);
}

/// Everything candidate_cost needs besides the candidate itself.
struct ScoringContext {
  const Project* project = nullptr;
  const LanguageModelScorer* lm = nullptr;
  const CorpusFrequencyTable* freq = nullptr;
  const OccurrenceTable* occurrences = nullptr;
  const Glossary* glossary = nullptr;
  const CoherenceOverrides* overrides = nullptr;
};

inline CostBreakdown weigh(const OptimizerConfig& cfg, double coherence, double informativeness,
                           double edit) {
  CostBreakdown b{coherence, informativeness, edit, 0};
  b.weighted_total = cfg.w_coh * coherence + cfg.w_info * informativeness + cfg.w_edit * edit;
  return b;
}

inline CostBreakdown candidate_cost(const Candidate& c, const OptimizerConfig& cfg,
                                    const ScoringContext& ctx) {
  const DraftDescription* d = ctx.project->find_description(c.description_id);
  if (!d) throw Error("not_found", "unknown description '" + c.description_id + "'");
  double coh;
  std::optional<double> pinned;
  if (ctx.overrides) {
    auto it = ctx.overrides->find({c.description_id, c.text});
    if (it != ctx.overrides->end()) pinned = it->second;
  }
  coh = pinned ? *pinned : coherence_cost(c, *ctx.lm);
  const double info = informativeness_cost(c, *d, *ctx.occurrences, *ctx.freq, *ctx.glossary,
                                           cfg.info_ceiling);
  return weigh(cfg, coh, info, edit_cost(c, cfg.last_word_penalty));
}

}  // namespace adfit

#endif  // ADFIT_SCORER_HPP
