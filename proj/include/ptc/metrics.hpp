#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>
#include <unordered_map>
#include <vector>

#include "ptc/data.hpp"
#include "ptc/error.hpp"
#include "ptc/model.hpp"
#include "ptc/tokenizer.hpp"
#include "ptc/vocab.hpp"

namespace ptc {

namespace detail {

template <typename T>
void require_unit(const std::vector<T>& v, const char* who) {
  T sq = T(0);
  for (T x : v) sq += x * x;
  if (std::abs(std::sqrt(sq) - T(1)) > T(1e-6))
    throw ContractError(std::string(who) +
                        ": embeddings must be L2-normalized (norm " +
                        std::to_string(static_cast<double>(std::sqrt(sq))) +
                        ")");
}

template <typename T>
T sq_dist(const std::vector<T>& a, const std::vector<T>& b) {
  T s = T(0);
  for (std::size_t i = 0; i < a.size(); ++i) {
    const T d = a[i] - b[i];
    s += d * d;
  }
  return s;
}

}  // namespace detail

// Mean squared distance between normalized positive pairs. Lower is better.
template <typename T>
T alignment_loss(const std::vector<std::pair<std::vector<T>, std::vector<T>>>&
                     pairs) {
  if (pairs.empty()) throw InputError("alignment_loss: no pairs");
  T sum = T(0);
  for (const auto& [a, b] : pairs) {
    if (a.size() != b.size())
      throw ShapeError("alignment_loss: dimension mismatch within a pair");
    detail::require_unit(a, "alignment_loss");
    detail::require_unit(b, "alignment_loss");
    sum += detail::sq_dist(a, b);
  }
  return sum / T(pairs.size());
}

// Log-mean over all unordered distinct pairs of exp(-2 * squared distance),
// stabilized with log-sum-exp. Always <= 0 for unit vectors.
template <typename T>
T uniformity_loss(const std::vector<std::vector<T>>& embeddings) {
  if (embeddings.size() < 2)
    throw InputError("uniformity_loss: need at least 2 embeddings");
  for (const auto& e : embeddings) {
    if (e.size() != embeddings.front().size())
      throw ShapeError("uniformity_loss: dimension mismatch");
    detail::require_unit(e, "uniformity_loss");
  }
  const std::size_t n = embeddings.size();
  // find the max exponent first, then accumulate shifted terms
  T mx = -std::numeric_limits<T>::infinity();
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j)
      mx = std::max(mx, T(-2) * detail::sq_dist(embeddings[i], embeddings[j]));
  T sum = T(0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j)
      sum += std::exp(T(-2) * detail::sq_dist(embeddings[i], embeddings[j]) -
                      mx);
  const T pair_count = T(n) * T(n - 1) / T(2);
  return mx + std::log(sum / pair_count);
}

// Fractional (mid) ranks: ties get the mean of the rank positions they span.
template <typename T>
std::vector<T> fractional_ranks(const std::vector<T>& v) {
  const std::size_t n = v.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
  std::vector<T> ranks(n);
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i;
    while (j + 1 < n && v[order[j + 1]] == v[order[i]]) ++j;
    const T avg = (T(i + 1) + T(j + 1)) / T(2);
    for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = avg;
    i = j + 1;
  }
  return ranks;
}

// Spearman rank correlation: Pearson correlation of fractional ranks.
template <typename T>
T spearman(const std::vector<T>& pred, const std::vector<T>& gold) {
  if (pred.size() != gold.size())
    throw InputError("spearman: length mismatch: " +
                     std::to_string(pred.size()) + " vs " +
                     std::to_string(gold.size()));
  if (pred.size() < 2) throw InputError("spearman: need at least 2 points");
  const auto rp = fractional_ranks(pred);
  const auto rg = fractional_ranks(gold);
  const std::size_t n = rp.size();
  T mp = T(0), mg = T(0);
  for (std::size_t i = 0; i < n; ++i) {
    mp += rp[i];
    mg += rg[i];
  }
  mp /= T(n);
  mg /= T(n);
  T cov = T(0), vp = T(0), vg = T(0);
  for (std::size_t i = 0; i < n; ++i) {
    const T dp = rp[i] - mp, dg = rg[i] - mg;
    cov += dp * dg;
    vp += dp * dp;
    vg += dg * dg;
  }
  if (vp == T(0) || vg == T(0))
    throw DegenerateInputError("spearman: zero rank variance");
  return cov / std::sqrt(vp * vg);
}

enum class EmbeddingSource { backbone, pseudo_mapped };

inline std::string to_string(EmbeddingSource s) {
  return s == EmbeddingSource::backbone ? "backbone" : "pseudo-mapped";
}

struct EvaluationReport {
  double spearman = 0.0;
  double alignment = 0.0;   // NaN when no pair clears the positive threshold
  double uniformity = 0.0;
  std::string source;
  std::string checkpoint;
  std::size_t pair_count = 0;
  std::size_t positive_count = 0;  // pairs entering the alignment mean
};

// Embeds each distinct sentence once (inference mode, fixed chunking for
// bit-stable results), scores pairs by cosine, and reports Spearman against
// gold plus alignment over the high-similarity band and uniformity over all
// distinct embeddings.
template <typename T>
EvaluationReport evaluate_sts(const std::vector<ScoredSentencePair>& pairs,
                              const PtModel<T>& model, const Vocabulary& vocab,
                              EmbeddingSource source,
                              double positive_threshold = 4.0,
                              const std::string& checkpoint_id = "") {
  if (pairs.empty()) throw InputError("evaluate_sts: no pairs");
  const bool use_pseudo = source == EmbeddingSource::pseudo_mapped;

  std::vector<std::string> sentences;
  std::unordered_map<std::string, std::size_t> index;
  for (const auto& p : pairs)
    for (const auto* s : {&p.a, &p.b})
      if (index.emplace(*s, sentences.size()).second) sentences.push_back(*s);

  const std::size_t chunk = 64;
  std::vector<std::vector<T>> embedded(sentences.size());
  for (std::size_t start = 0; start < sentences.size(); start += chunk) {
    const std::size_t stop = std::min(start + chunk, sentences.size());
    std::vector<std::string> slice(sentences.begin() + start,
                                   sentences.begin() + stop);
    auto batch = tokenize_batch(slice, vocab, model.enc_cfg.max_len);
    Tensor<T> h = embed_batch(batch, model.encoder, model.enc_cfg,
                              model.pseudo, model.shared, use_pseudo,
                              EncodeMode::infer());
    const std::size_t d = model.enc_cfg.d_model;
    for (std::size_t r = 0; r < slice.size(); ++r)
      embedded[start + r].assign(h.data().begin() + r * d,
                                 h.data().begin() + (r + 1) * d);
  }

  std::vector<std::vector<T>> normalized(embedded.size());
  for (std::size_t i = 0; i < embedded.size(); ++i) {
    T sq = T(0);
    for (T x : embedded[i]) sq += x * x;
    const T norm = std::sqrt(sq);
    if (norm == T(0))
      throw DegenerateInputError("evaluate_sts: zero-norm embedding");
    normalized[i] = embedded[i];
    for (T& x : normalized[i]) x /= norm;
  }

  std::vector<T> cosines, golds;
  std::vector<std::pair<std::vector<T>, std::vector<T>>> positives;
  cosines.reserve(pairs.size());
  golds.reserve(pairs.size());
  for (const auto& p : pairs) {
    const auto& ea = normalized[index.at(p.a)];
    const auto& eb = normalized[index.at(p.b)];
    T dot = T(0);
    for (std::size_t i = 0; i < ea.size(); ++i) dot += ea[i] * eb[i];
    cosines.push_back(dot);
    golds.push_back(T(p.gold));
    if (p.gold >= positive_threshold) positives.emplace_back(ea, eb);
  }

  EvaluationReport report;
  report.source = to_string(source);
  report.checkpoint = checkpoint_id;
  report.pair_count = pairs.size();
  report.positive_count = positives.size();
  report.spearman = static_cast<double>(spearman(cosines, golds));
  report.alignment =
      positives.empty()
          ? std::numeric_limits<double>::quiet_NaN()
          : static_cast<double>(alignment_loss(positives));
  report.uniformity = static_cast<double>(uniformity_loss(normalized));
  return report;
}

}  // namespace ptc
