#pragma once

#include <algorithm>
#include <cstdint>
#include <string>
#include <vector>

#include "ptc/error.hpp"
#include "ptc/tensor.hpp"
#include "ptc/vocab.hpp"

namespace ptc {

// A padded id matrix plus the mask separating real tokens from padding.
struct TokenizedBatch {
  std::size_t batch = 0;
  std::size_t seq = 0;
  std::vector<std::int32_t> ids;     // batch * seq, row-major
  BoolMask mask{0, 0};               // batch x seq, prefix-shaped
  std::vector<std::size_t> lengths;  // pre-padding, post-truncation

  std::int32_t id_at(std::size_t b, std::size_t t) const {
    return ids[b * seq + t];
  }
};

// Tokenizes, truncates to max_len, and pads to the longest sentence in the
// batch. A sentence with no tokens at all is rejected by (0-based) index.
inline TokenizedBatch tokenize_batch(const std::vector<std::string>& sentences,
                                     const Vocabulary& vocab,
                                     std::size_t max_len) {
  if (sentences.empty()) throw InputError("tokenize_batch: empty batch");
  if (max_len == 0) throw ParameterError("tokenize_batch: max_len must be > 0");

  std::vector<std::vector<std::int32_t>> rows;
  rows.reserve(sentences.size());
  std::size_t longest = 0;
  for (std::size_t i = 0; i < sentences.size(); ++i) {
    auto words = tokenize_words(sentences[i]);
    if (words.empty())
      throw InputError("tokenize_batch: sentence " + std::to_string(i) +
                       " has no tokens");
    if (words.size() > max_len) words.resize(max_len);
    std::vector<std::int32_t> row;
    row.reserve(words.size());
    for (auto& w : words) row.push_back(vocab.id(w));
    longest = std::max(longest, row.size());
    rows.push_back(std::move(row));
  }

  TokenizedBatch out;
  out.batch = sentences.size();
  out.seq = longest;
  out.ids.assign(out.batch * out.seq, Vocabulary::kPad);
  out.mask = BoolMask(out.batch, out.seq);
  std::fill(out.mask.v.begin(), out.mask.v.end(), std::uint8_t{0});
  out.lengths.resize(out.batch);
  for (std::size_t b = 0; b < rows.size(); ++b) {
    out.lengths[b] = rows[b].size();
    for (std::size_t t = 0; t < rows[b].size(); ++t) {
      out.ids[b * out.seq + t] = rows[b][t];
      out.mask.at(b, t) = 1;
    }
  }
  return out;
}

}  // namespace ptc
