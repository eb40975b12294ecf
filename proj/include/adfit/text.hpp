#ifndef ADFIT_TEXT_HPP
#define ADFIT_TEXT_HPP

// Small text utilities shared by candidate generation and scoring: token
// normalization, word lists and the film glossary.

#include <algorithm>
#include <cctype>
#include <fstream>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "adfit/timeline.hpp"

namespace adfit {

inline std::string lowercase(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

inline bool is_punct_token(std::string_view tok) { return !detail::has_alnum(tok); }

/// Lowercases and strips leading/trailing non-alphanumeric bytes, so
/// transcript tokens like `dog,` and `"Welcome` compare equal to `dog` and
/// `welcome`. Pure punctuation normalizes to the empty string.
inline std::string normalize_token(std::string_view tok) {
  std::size_t b = 0, e = tok.size();
  auto alnum = [](char c) { return std::isalnum(static_cast<unsigned char>(c)) != 0; };
  while (b < e && !alnum(tok[b])) ++b;
  while (e > b && !alnum(tok[e - 1])) --e;
  return lowercase(tok.substr(b, e - b));
}

inline std::vector<std::string> split_ws(std::string_view text) {
  std::vector<std::string> out;
  std::size_t i = 0;
  while (i < text.size()) {
    while (i < text.size() && std::isspace(static_cast<unsigned char>(text[i]))) ++i;
    std::size_t j = i;
    while (j < text.size() && !std::isspace(static_cast<unsigned char>(text[j]))) ++j;
    if (j > i) out.emplace_back(text.substr(i, j - i));
    i = j;
  }
  return out;
}

/// Tokens as the language model sees them: lowercase, with punctuation
/// split off into tokens of its own.
inline std::vector<std::string> lm_tokens(std::string_view text) {
  std::vector<std::string> out;
  for (const auto& raw : split_ws(text)) {
    std::string word;
    for (char c : raw) {
      unsigned char u = static_cast<unsigned char>(c);
      if (std::isalnum(u) || c == '\'' || c == '-' || u >= 0x80) {
        word += static_cast<char>(std::tolower(u));
      } else {
        if (!word.empty()) out.push_back(std::move(word)), word.clear();
        out.emplace_back(1, c);
      }
    }
    if (!word.empty()) out.push_back(std::move(word));
  }
  return out;
}

using WordSet = std::set<std::string>;

/// One entry per line; blank lines and `#` comments skipped; lowercased.
inline std::vector<std::string> read_lines(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("io", "cannot open word list '" + path + "'");
  std::vector<std::string> out;
  std::string line;
  while (std::getline(in, line)) {
    auto b = line.find_first_not_of(" \t\r");
    if (b == std::string::npos || line[b] == '#') continue;
    auto e = line.find_last_not_of(" \t\r");
    out.push_back(lowercase(line.substr(b, e - b + 1)));
  }
  return out;
}

inline WordSet load_word_set(const std::string& path) {
  auto lines = read_lines(path);
  return WordSet(lines.begin(), lines.end());
}

/// Film-language terms. Multi-word terms are stored as token sequences.
struct Glossary {
  std::set<std::vector<std::string>> terms;

  void add(std::string_view term) {
    std::vector<std::string> toks;
    for (const auto& t : split_ws(term)) {
      auto n = normalize_token(t);
      if (!n.empty()) toks.push_back(n);
    }
    if (!toks.empty()) terms.insert(std::move(toks));
  }
  bool contains_unigram(std::string_view word) const {
    return terms.count(std::vector<std::string>{std::string(word)}) > 0;
  }
  std::size_t max_length() const {
    std::size_t m = 0;
    for (const auto& t : terms) m = std::max(m, t.size());
    return m;
  }

  static Glossary load(const std::string& path) {
    Glossary g;
    for (const auto& line : read_lines(path)) g.add(line);
    return g;
  }
};

inline std::string default_data_path(std::string_view file) {
#ifdef ADFIT_DATA_DIR
  return std::string(ADFIT_DATA_DIR) + "/" + std::string(file);
#else
  return "data/" + std::string(file);
#endif
}

}  // namespace adfit

#endif  // ADFIT_TEXT_HPP
