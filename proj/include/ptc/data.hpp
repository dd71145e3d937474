#pragma once

#include <cctype>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "ptc/error.hpp"
#include "ptc/log.hpp"

namespace ptc {

struct ScoredSentencePair {
  std::string a;
  std::string b;
  double gold = 0.0;  // 0..5 similarity scale

  bool operator==(const ScoredSentencePair&) const = default;
};

// Structural UTF-8 validation: correct continuation bytes, no overlongs, no
// surrogates, nothing above U+10FFFF.
inline bool utf8_valid(std::string_view s) {
  std::size_t i = 0;
  while (i < s.size()) {
    const unsigned char c = s[i];
    std::size_t len;
    std::uint32_t cp;
    if (c < 0x80) {
      ++i;
      continue;
    } else if ((c & 0xe0) == 0xc0) {
      len = 2;
      cp = c & 0x1f;
    } else if ((c & 0xf0) == 0xe0) {
      len = 3;
      cp = c & 0x0f;
    } else if ((c & 0xf8) == 0xf0) {
      len = 4;
      cp = c & 0x07;
    } else {
      return false;
    }
    if (i + len > s.size()) return false;
    for (std::size_t k = 1; k < len; ++k) {
      const unsigned char cc = s[i + k];
      if ((cc & 0xc0) != 0x80) return false;
      cp = (cp << 6) | (cc & 0x3f);
    }
    if (len == 2 && cp < 0x80) return false;
    if (len == 3 && cp < 0x800) return false;
    if (len == 4 && cp < 0x10000) return false;
    if (cp >= 0xd800 && cp <= 0xdfff) return false;
    if (cp > 0x10ffff) return false;
    i += len;
  }
  return true;
}

inline bool is_blank(std::string_view s) {
  for (unsigned char c : s)
    if (!std::isspace(c)) return false;
  return true;
}

// One sentence per line; blank lines skipped, order preserved.
inline std::vector<std::string> load_corpus(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("load_corpus: cannot read " + path);
  std::vector<std::string> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (!utf8_valid(line))
      throw InputError("load_corpus: invalid UTF-8 at " + path + ":" +
                       std::to_string(line_no));
    if (is_blank(line)) continue;
    out.push_back(line);
  }
  if (out.empty()) log_warn("load_corpus: " + path + " holds no sentences");
  log_info("load_corpus: " + std::to_string(out.size()) + " sentences from " +
           path);
  return out;
}

inline void save_corpus(const std::string& path,
                        const std::vector<std::string>& sentences) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("save_corpus: cannot write " + path);
  for (const auto& s : sentences) out << s << '\n';
}

namespace detail {

inline double parse_gold(const std::string& field, const std::string& path,
                         std::size_t line_no) {
  std::size_t used = 0;
  double gold;
  try {
    gold = std::stod(field, &used);
  } catch (const std::exception&) {
    throw InputError("load_scored_pairs: bad score '" + field + "' at " +
                     path + ":" + std::to_string(line_no));
  }
  if (used != field.size())
    throw InputError("load_scored_pairs: bad score '" + field + "' at " +
                     path + ":" + std::to_string(line_no));
  if (gold < 0.0 || gold > 5.0)
    throw InputError("load_scored_pairs: score " + field +
                     " outside [0,5] at " + path + ":" +
                     std::to_string(line_no));
  return gold;
}

}  // namespace detail

// Tab-delimited: sentence_a <TAB> sentence_b <TAB> gold.
inline std::vector<ScoredSentencePair> load_scored_pairs(
    const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("load_scored_pairs: cannot read " + path);
  std::vector<ScoredSentencePair> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (!utf8_valid(line))
      throw InputError("load_scored_pairs: invalid UTF-8 at " + path + ":" +
                       std::to_string(line_no));
    const auto t1 = line.find('\t');
    const auto t2 = t1 == std::string::npos ? std::string::npos
                                            : line.find('\t', t1 + 1);
    if (t1 == std::string::npos || t2 == std::string::npos)
      throw InputError("load_scored_pairs: expected 3 tab-separated columns "
                       "at " + path + ":" + std::to_string(line_no));
    ScoredSentencePair p;
    p.a = line.substr(0, t1);
    p.b = line.substr(t1 + 1, t2 - t1 - 1);
    p.gold = detail::parse_gold(line.substr(t2 + 1), path, line_no);
    if (is_blank(p.a) || is_blank(p.b))
      throw InputError("load_scored_pairs: empty sentence at " + path + ":" +
                       std::to_string(line_no));
    out.push_back(std::move(p));
  }
  return out;
}

inline void save_scored_pairs(const std::string& path,
                              const std::vector<ScoredSentencePair>& pairs);

// Length notion used by the miner: whitespace-delimited words of the raw
// sentence (not encoder tokens).
inline std::size_t whitespace_word_count(std::string_view s) {
  std::size_t n = 0;
  bool in_word = false;
  for (unsigned char c : s) {
    const bool space = std::isspace(c);
    if (!space && !in_word) ++n;
    in_word = !space;
  }
  return n;
}

struct HardPairCriteria {
  double positive_min_gold = 4.0;
  double negative_max_gold = 2.0;
  std::size_t positive_min_len_diff = 6;  // "more than five words"
  std::size_t negative_max_len_diff = 1;  // "less than two words"

  void validate() const {
    if (!(positive_min_gold > negative_max_gold))
      throw ParameterError(
          "hard pairs: positive_min_gold must exceed negative_max_gold");
  }
};

struct MiningSummary {
  std::size_t input_count = 0;
  std::size_t hard_positive = 0;
  std::size_t hard_negative = 0;
};

// Keeps positives whose lengths diverge and negatives whose lengths nearly
// agree; everything else is filtered out.
inline std::pair<std::vector<ScoredSentencePair>, MiningSummary>
mine_hard_pairs(const std::vector<ScoredSentencePair>& pairs,
                const HardPairCriteria& criteria) {
  criteria.validate();
  if (pairs.empty()) throw InputError("mine_hard_pairs: no pairs");
  std::vector<ScoredSentencePair> kept;
  MiningSummary summary;
  summary.input_count = pairs.size();
  for (const auto& p : pairs) {
    const std::size_t la = whitespace_word_count(p.a);
    const std::size_t lb = whitespace_word_count(p.b);
    const std::size_t diff = la > lb ? la - lb : lb - la;
    const bool hard_pos = p.gold >= criteria.positive_min_gold &&
                          diff >= criteria.positive_min_len_diff;
    const bool hard_neg = p.gold <= criteria.negative_max_gold &&
                          diff <= criteria.negative_max_len_diff;
    if (hard_pos) ++summary.hard_positive;
    if (hard_neg) ++summary.hard_negative;
    if (hard_pos || hard_neg) kept.push_back(p);
  }
  return {std::move(kept), summary};
}

// %.17g keeps doubles round-trippable and stable across runs.
inline std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

inline void save_scored_pairs(const std::string& path,
                              const std::vector<ScoredSentencePair>& pairs) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("save_scored_pairs: cannot write " + path);
  for (const auto& p : pairs)
    out << p.a << '\t' << p.b << '\t' << format_double(p.gold) << '\n';
}

}  // namespace ptc
