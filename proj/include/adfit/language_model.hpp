#ifndef ADFIT_LANGUAGE_MODEL_HPP
#define ADFIT_LANGUAGE_MODEL_HPP

#include <cmath>
#include <fstream>
#include <string>
#include <unordered_map>
#include <vector>

#include "adfit/text.hpp"
#include "adfit/timeline.hpp"

namespace adfit {

/// Fluency of a token sequence as an average negative log-likelihood
/// (lower is more coherent). Implementations must be deterministic.
class LanguageModelScorer {
 public:
  virtual ~LanguageModelScorer() = default;
  virtual double score(const std::vector<std::string>& tokens) const = 0;
};

/// Word bigram model interpolated with a unigram model, both add-k smoothed.
///
///   P(w | v) = lambda * (c(v,w) + k) / (c(v,*) + k V) + (1 - lambda) * (c(w) + k) / (N + k V)
///
/// V counts the training types plus one unknown-word type; N is the number
/// of predicted training tokens (including the end marker). score() averages
/// -log2 P over the given tokens, each conditioned on its predecessor, the
/// first on the sentence-start marker.
class BigramLanguageModel final : public LanguageModelScorer {
 public:
  static constexpr const char* kStart = "<s>";
  static constexpr const char* kEnd = "</s>";

  explicit BigramLanguageModel(double k = 0.1, double lambda = 0.8) : k_(k), lambda_(lambda) {}

  void add_sentence(const std::vector<std::string>& tokens) {
    if (tokens.empty()) return;
    std::string prev = kStart;
    for (const auto& t : tokens) {
      observe(prev, t);
      prev = t;
    }
    observe(prev, kEnd);
  }

  void add_text(std::string_view text) { add_sentence(lm_tokens(text)); }

  double prob(const std::string& prev, const std::string& word) const {
    const double vocab = static_cast<double>(unigram_.size() + 1);
    const double uni = (count(unigram_, word) + k_) / (static_cast<double>(total_) + k_ * vocab);
    const double ctx = count(context_, prev);
    auto it = bigram_.find(prev);
    double pair = 0;
    if (it != bigram_.end()) pair = count(it->second, word);
    const double bi = (pair + k_) / (ctx + k_ * vocab);
    return lambda_ * bi + (1.0 - lambda_) * uni;
  }

  double score(const std::vector<std::string>& tokens) const override {
    if (tokens.empty()) throw Error("empty_candidate", "cannot score an empty token sequence");
    double total = 0;
    std::string prev = kStart;
    for (const auto& t : tokens) {
      total += -std::log2(prob(prev, t));
      prev = t;
    }
    return total / static_cast<double>(tokens.size());
  }

  std::size_t vocabulary_size() const { return unigram_.size(); }
  std::size_t token_count() const { return total_; }

 private:
  using Counts = std::unordered_map<std::string, std::size_t>;

  static double count(const Counts& c, const std::string& w) {
    auto it = c.find(w);
    return it == c.end() ? 0.0 : static_cast<double>(it->second);
  }

  void observe(const std::string& prev, const std::string& word) {
    ++unigram_[word];
    ++context_[prev];
    ++bigram_[prev][word];
    ++total_;
  }

  double k_;
  double lambda_;
  Counts unigram_;
  Counts context_;
  std::unordered_map<std::string, Counts> bigram_;
  std::size_t total_ = 0;
};

/// Splits transcript words into sentences at sentence-final punctuation.
inline std::vector<std::string> transcript_sentences(const std::vector<TimedWord>& words) {
  std::vector<std::string> out;
  std::string cur;
  for (const auto& w : words) {
    cur += (cur.empty() ? "" : " ") + w.text;
    const char last = w.text.empty() ? ' ' : w.text.back();
    if (last == '.' || last == '!' || last == '?') out.push_back(std::move(cur)), cur.clear();
  }
  if (!cur.empty()) out.push_back(std::move(cur));
  return out;
}

/// Fallback model trained on the project transcript, every draft description
/// and a general-English corpus file (one sentence per line; optional).
inline BigramLanguageModel train_project_model(const Project& p,
                                               const std::string& general_corpus_path) {
  BigramLanguageModel lm;
  for (const auto& s : transcript_sentences(p.transcript)) lm.add_text(s);
  for (const auto& d : p.descriptions) lm.add_text(d.text());
  if (!general_corpus_path.empty()) {
    std::ifstream in(general_corpus_path);
    if (!in) throw Error("io", "cannot open corpus '" + general_corpus_path + "'");
    std::string line;
    while (std::getline(in, line)) lm.add_text(line);
  }
  return lm;
}

}  // namespace adfit

#endif  // ADFIT_LANGUAGE_MODEL_HPP
