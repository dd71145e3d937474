#pragma once

#include <algorithm>
#include <cstdint>
#include <map>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "ptc/error.hpp"
#include "ptc/rng.hpp"
#include "ptc/vocab.hpp"

namespace ptc {

enum class AugmentKind { reorder, deletion, duplication };

inline std::string to_string(AugmentKind k) {
  switch (k) {
    case AugmentKind::reorder: return "reorder";
    case AugmentKind::deletion: return "deletion";
    case AugmentKind::duplication: return "duplication";
  }
  throw ParameterError("unknown augmentation kind");
}

inline AugmentKind parse_augment_kind(const std::string& s) {
  if (s == "reorder") return AugmentKind::reorder;
  if (s == "deletion") return AugmentKind::deletion;
  if (s == "duplication") return AugmentKind::duplication;
  throw ParameterError("unknown augmentation '" + s +
                       "' (expected reorder, deletion or duplication)");
}

namespace detail {

inline std::vector<std::string> split_words(const std::string& text) {
  std::vector<std::string> words;
  std::istringstream in(text);
  std::string w;
  while (in >> w) words.push_back(std::move(w));
  return words;
}

inline std::string join_words(const std::vector<std::string>& words) {
  std::string out;
  for (std::size_t i = 0; i < words.size(); ++i) {
    if (i) out.push_back(' ');
    out += words[i];
  }
  return out;
}

}  // namespace detail

// Whitespace-word-level augmentation, deterministic per (sentence, kind,
// rate, seed). Deletion never empties the sentence; reorder swaps
// ceil(rate*n) uniformly chosen pairs; duplication doubles each word with
// probability rate, preserving order.
inline std::string discrete_augment(const std::string& sentence,
                                    AugmentKind kind, double rate,
                                    std::uint64_t seed) {
  if (rate <= 0.0)
    throw ParameterError("discrete_augment: rate must be > 0, got " +
                         std::to_string(rate));
  if (kind != AugmentKind::reorder && rate >= 1.0)
    throw ParameterError("discrete_augment: " + to_string(kind) +
                         " rate must satisfy 0 < rate < 1, got " +
                         std::to_string(rate));
  auto words = detail::split_words(sentence);
  if (words.empty())
    throw InputError("discrete_augment: sentence has no words");
  auto rng = make_rng(
      mix_seed(hash_str(sentence), to_string(kind), hash_str(std::to_string(rate)), seed));

  switch (kind) {
    case AugmentKind::reorder: {
      if (words.size() < 2) return detail::join_words(words);
      const std::size_t swaps = static_cast<std::size_t>(
          std::ceil(rate * static_cast<double>(words.size())));
      std::uniform_int_distribution<std::size_t> pick(0, words.size() - 1);
      for (std::size_t s = 0; s < swaps; ++s) {
        const std::size_t i = pick(rng);
        const std::size_t j = pick(rng);
        std::swap(words[i], words[j]);
      }
      return detail::join_words(words);
    }
    case AugmentKind::deletion: {
      std::uniform_real_distribution<double> coin(0.0, 1.0);
      std::vector<std::string> kept;
      for (auto& w : words)
        if (coin(rng) >= rate) kept.push_back(std::move(w));
      if (kept.empty()) {
        std::uniform_int_distribution<std::size_t> pick(0, words.size() - 1);
        auto again = detail::split_words(sentence);
        kept.push_back(again[pick(rng)]);
      }
      return detail::join_words(kept);
    }
    case AugmentKind::duplication: {
      std::uniform_real_distribution<double> coin(0.0, 1.0);
      std::vector<std::string> out;
      out.reserve(words.size() * 2);
      for (auto& w : words) {
        const bool twice = coin(rng) < rate;
        out.push_back(w);
        if (twice) out.push_back(w);
      }
      return detail::join_words(out);
    }
  }
  throw ParameterError("unknown augmentation kind");
}

// A predicate with its labeled argument spans; span = [start, stop) over the
// sentence's token list.
struct SrlFrame {
  std::size_t predicate = 0;
  std::map<std::string, std::pair<std::size_t, std::size_t>> spans;
};

struct SrlAnnotatedSentence {
  std::vector<std::string> tokens;
  std::vector<SrlFrame> frames;  // ordered by predicate index
};

// Per frame, emit the present spans in the fixed label order and glue the
// frames together; an unannotated sentence passes through verbatim.
inline std::string srl_concat(const SrlAnnotatedSentence& annotated) {
  static const std::vector<std::string> kOrder = {"ARG0", "PRED", "ARGM-NEG",
                                                  "ARG1"};
  if (annotated.tokens.empty())
    throw InputError("srl_concat: no tokens");
  if (annotated.frames.empty()) {
    std::string out;
    for (std::size_t i = 0; i < annotated.tokens.size(); ++i) {
      if (i) out.push_back(' ');
      out += annotated.tokens[i];
    }
    return out;
  }

  for (std::size_t f = 1; f < annotated.frames.size(); ++f)
    if (annotated.frames[f].predicate < annotated.frames[f - 1].predicate)
      throw InputError("srl_concat: frames out of predicate order");

  std::vector<std::string> out;
  for (const auto& frame : annotated.frames) {
    // bounds and intra-frame overlap checks
    std::vector<std::pair<std::size_t, std::size_t>> ranges;
    for (const auto& [label, span] : frame.spans) {
      if (std::find(kOrder.begin(), kOrder.end(), label) == kOrder.end())
        throw InputError("srl_concat: unknown label '" + label + "'");
      if (span.first >= span.second || span.second > annotated.tokens.size())
        throw InputError("srl_concat: span [" + std::to_string(span.first) +
                         "," + std::to_string(span.second) +
                         ") out of bounds");
      ranges.push_back(span);
    }
    std::sort(ranges.begin(), ranges.end());
    for (std::size_t i = 1; i < ranges.size(); ++i)
      if (ranges[i].first < ranges[i - 1].second)
        throw InputError("srl_concat: overlapping spans within a frame");

    for (const auto& label : kOrder) {
      auto it = frame.spans.find(label);
      if (it == frame.spans.end()) continue;
      for (std::size_t t = it->second.first; t < it->second.second; ++t)
        out.push_back(annotated.tokens[t]);
    }
  }
  return detail::join_words(out);
}

}  // namespace ptc
