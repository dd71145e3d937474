#pragma once

#include <algorithm>
#include <cstdint>
#include <numeric>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "ptc/data.hpp"
#include "ptc/error.hpp"
#include "ptc/rng.hpp"

namespace ptc {

// Synthetic length-confounded corpus. A "meaning" is a multiset of content
// symbols; a realization permutes them and sprinkles in filler symbols. Same
// meaning = gold 5, different = gold 0. The hard split pairs same-meaning
// sentences of very different lengths and different-meaning sentences of
// near-equal lengths, so surface length anti-correlates with the gold signal.
struct SynthConfig {
  std::size_t n_meanings = 200;
  std::size_t realizations = 5;  // train sentences per meaning
  std::size_t content_vocab = 40;
  std::size_t filler_vocab = 30;
  std::size_t content_min = 3;
  std::size_t content_max = 6;
  std::size_t filler_min = 0;
  std::size_t filler_max = 10;
  std::uint64_t seed = 0;

  // the long eval realization adds this many fillers beyond filler_min,
  // giving the hard positives their length gap
  static constexpr std::size_t kHardGap = 8;

  void validate() const {
    if (n_meanings < 2) throw ParameterError("synth: n_meanings must be >= 2");
    if (realizations < 2)
      throw ParameterError("synth: realizations must be >= 2");
    if (content_min < 1 || content_max < content_min)
      throw ParameterError("synth: need 1 <= content_min <= content_max");
    if (content_vocab < content_max)
      throw ParameterError("synth: content_vocab smaller than content_max");
    if (filler_vocab < 1) throw ParameterError("synth: empty filler vocab");
    if (filler_max < filler_min)
      throw ParameterError("synth: filler_max < filler_min");
    if (filler_max < filler_min + kHardGap)
      throw ParameterError(
          "synth: filler range cannot satisfy the hard-split length "
          "constraints (need filler_max >= filler_min + " +
          std::to_string(kHardGap) + ")");
  }
};

struct SynthCorpus {
  std::vector<std::string> train;
  std::vector<ScoredSentencePair> eval_hard;
  std::vector<ScoredSentencePair> eval_easy;

  std::vector<ScoredSentencePair> eval_all() const {
    std::vector<ScoredSentencePair> out = eval_hard;
    out.insert(out.end(), eval_easy.begin(), eval_easy.end());
    return out;
  }
};

namespace detail {

inline std::string synth_symbol(char prefix, std::size_t i) {
  return prefix + std::to_string(i);
}

inline std::string realize(const std::vector<std::string>& content,
                           std::size_t filler_count, std::size_t filler_vocab,
                           std::uint64_t seed) {
  auto rng = make_rng(seed);
  std::vector<std::string> words = content;
  std::shuffle(words.begin(), words.end(), rng);
  for (std::size_t k = 0; k < filler_count; ++k) {
    std::uniform_int_distribution<std::size_t> pos(0, words.size());
    std::uniform_int_distribution<std::size_t> sym(0, filler_vocab - 1);
    words.insert(words.begin() + pos(rng), synth_symbol('f', sym(rng)));
  }
  std::string out;
  for (std::size_t i = 0; i < words.size(); ++i) {
    if (i) out.push_back(' ');
    out += words[i];
  }
  return out;
}

}  // namespace detail

inline SynthCorpus generate_synthetic_corpus(const SynthConfig& cfg) {
  cfg.validate();
  const std::size_t len_span = cfg.content_max - cfg.content_min + 1;

  // Content multisets. Meanings 2k and 2k+1 share a content length so their
  // short realizations tie exactly (the hard negatives). Multisets must be
  // pairwise distinct as multisets.
  std::vector<std::vector<std::string>> meanings(cfg.n_meanings);
  std::set<std::vector<std::string>> seen;
  for (std::size_t i = 0; i < cfg.n_meanings; ++i) {
    const std::size_t len = cfg.content_min + (i / 2) % len_span;
    for (std::size_t attempt = 0;; ++attempt) {
      if (attempt >= 1000)
        throw ParameterError(
            "synth: content vocabulary too small for distinct meanings");
      auto rng = make_rng(mix_seed(cfg.seed, "content", i, attempt));
      std::vector<std::size_t> ids(cfg.content_vocab);
      std::iota(ids.begin(), ids.end(), std::size_t{0});
      std::shuffle(ids.begin(), ids.end(), rng);
      std::vector<std::string> symbols;
      for (std::size_t k = 0; k < len; ++k)
        symbols.push_back(detail::synth_symbol('c', ids[k]));
      auto key = symbols;
      std::sort(key.begin(), key.end());
      if (seen.insert(key).second) {
        meanings[i] = std::move(symbols);
        break;
      }
    }
  }

  SynthCorpus out;
  for (std::size_t i = 0; i < cfg.n_meanings; ++i) {
    for (std::size_t r = 0; r < cfg.realizations; ++r) {
      auto rng = make_rng(mix_seed(cfg.seed, "train-fill", i, r));
      std::uniform_int_distribution<std::size_t> fill(cfg.filler_min,
                                                      cfg.filler_max);
      out.train.push_back(detail::realize(meanings[i], fill(rng),
                                          cfg.filler_vocab,
                                          mix_seed(cfg.seed, "train", i, r)));
    }
  }

  // Dedicated eval realizations per meaning: short, mid (one filler more)
  // and long (kHardGap fillers more).
  std::vector<std::string> shorts(cfg.n_meanings), mids(cfg.n_meanings),
      longs(cfg.n_meanings);
  for (std::size_t i = 0; i < cfg.n_meanings; ++i) {
    shorts[i] = detail::realize(meanings[i], cfg.filler_min, cfg.filler_vocab,
                                mix_seed(cfg.seed, "eval-short", i));
    mids[i] = detail::realize(meanings[i], cfg.filler_min + 1,
                              cfg.filler_vocab,
                              mix_seed(cfg.seed, "eval-mid", i));
    longs[i] = detail::realize(meanings[i], cfg.filler_min + SynthConfig::kHardGap,
                               cfg.filler_vocab,
                               mix_seed(cfg.seed, "eval-long", i));
  }

  for (std::size_t i = 0; i < cfg.n_meanings; ++i) {
    out.eval_hard.push_back({shorts[i], longs[i], 5.0});
    out.eval_easy.push_back({shorts[i], mids[i], 5.0});
  }
  for (std::size_t i = 0; i + 1 < cfg.n_meanings; i += 2) {
    out.eval_hard.push_back({shorts[i], shorts[i + 1], 0.0});
    out.eval_easy.push_back({shorts[i], longs[i + 1], 0.0});
  }
  return out;
}

}  // namespace ptc
