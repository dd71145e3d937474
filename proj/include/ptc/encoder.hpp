#pragma once

#include <cstdint>
#include <numeric>
#include <string>
#include <vector>

#include "ptc/error.hpp"
#include "ptc/params.hpp"
#include "ptc/rng.hpp"
#include "ptc/tensor.hpp"
#include "ptc/tokenizer.hpp"

namespace ptc {

inline constexpr double kLayerNormEps = 1e-5;
inline constexpr double kInitStddev = 0.02;

struct EncoderConfig {
  std::size_t layers = 2;
  std::size_t heads = 4;
  std::size_t d_model = 64;
  std::size_t d_ff = 256;
  std::size_t max_len = 64;
  double dropout = 0.1;
  std::size_t vocab_size = 0;

  void validate() const {
    if (layers == 0) throw ParameterError("encoder: layers must be > 0");
    if (heads == 0 || d_model % heads != 0)
      throw ParameterError("encoder: d_model " + std::to_string(d_model) +
                           " not divisible by heads " + std::to_string(heads));
    if (d_ff == 0) throw ParameterError("encoder: d_ff must be > 0");
    if (max_len == 0) throw ParameterError("encoder: max_len must be > 0");
    if (dropout < 0.0 || dropout >= 1.0)
      throw ParameterError("encoder: dropout must satisfy 0 <= p < 1");
    if (vocab_size < 2)
      throw ParameterError("encoder: vocab_size must cover pad and unk");
  }
};

// Whether stochastic layers are active, and the seed that makes them
// reproducible when they are.
struct EncodeMode {
  bool training = false;
  std::uint64_t seed = 0;

  static EncodeMode infer() { return {false, 0}; }
  static EncodeMode train(std::uint64_t seed) { return {true, seed}; }
};

template <typename T = double>
struct EncoderLayerParams {
  Tensor<T> wq, bq, wk, bk, wv, bv, wo, bo;
  Tensor<T> attn_gain, attn_bias;
  Tensor<T> w1, b1, w2, b2;
  Tensor<T> ff_gain, ff_bias;
};

template <typename T = double>
struct EncoderParams {
  Tensor<T> tok_embed;   // vocab_size x d_model
  Tensor<T> pos_embed;   // max_len x d_model
  Tensor<T> embed_gain, embed_bias;
  std::vector<EncoderLayerParams<T>> layers;

  static EncoderParams init(const EncoderConfig& cfg, std::uint64_t seed) {
    cfg.validate();
    const std::size_t d = cfg.d_model;
    auto w = [&](Shape shape, const std::string& name) {
      return Tensor<T>::randn(std::move(shape), mix_seed(seed, name),
                              T(kInitStddev));
    };
    EncoderParams p;
    p.tok_embed = w({cfg.vocab_size, d}, "tok");
    p.pos_embed = w({cfg.max_len, d}, "pos");
    p.embed_gain = Tensor<T>::full({d}, T(1));
    p.embed_bias = Tensor<T>::zeros({d});
    for (std::size_t l = 0; l < cfg.layers; ++l) {
      const std::string pre = "layer" + std::to_string(l) + ".";
      EncoderLayerParams<T> lp;
      lp.wq = w({d, d}, pre + "wq");
      lp.bq = Tensor<T>::zeros({d});
      lp.wk = w({d, d}, pre + "wk");
      lp.bk = Tensor<T>::zeros({d});
      lp.wv = w({d, d}, pre + "wv");
      lp.bv = Tensor<T>::zeros({d});
      lp.wo = w({d, d}, pre + "wo");
      lp.bo = Tensor<T>::zeros({d});
      lp.attn_gain = Tensor<T>::full({d}, T(1));
      lp.attn_bias = Tensor<T>::zeros({d});
      lp.w1 = w({d, cfg.d_ff}, pre + "w1");
      lp.b1 = Tensor<T>::zeros({cfg.d_ff});
      lp.w2 = w({cfg.d_ff, d}, pre + "w2");
      lp.b2 = Tensor<T>::zeros({d});
      lp.ff_gain = Tensor<T>::full({d}, T(1));
      lp.ff_bias = Tensor<T>::zeros({d});
      p.layers.push_back(std::move(lp));
    }
    return p;
  }

  // Stable enumeration used by the optimizer, momentum twin and checkpoints.
  ParamList<T> named() const {
    ParamList<T> out;
    out.push_back({"encoder.tok_embed", tok_embed});
    out.push_back({"encoder.pos_embed", pos_embed});
    out.push_back({"encoder.embed_norm.gain", embed_gain});
    out.push_back({"encoder.embed_norm.bias", embed_bias});
    for (std::size_t l = 0; l < layers.size(); ++l) {
      const std::string pre = "encoder.layer" + std::to_string(l) + ".";
      const auto& lp = layers[l];
      out.push_back({pre + "attn.wq", lp.wq});
      out.push_back({pre + "attn.bq", lp.bq});
      out.push_back({pre + "attn.wk", lp.wk});
      out.push_back({pre + "attn.bk", lp.bk});
      out.push_back({pre + "attn.wv", lp.wv});
      out.push_back({pre + "attn.bv", lp.bv});
      out.push_back({pre + "attn.wo", lp.wo});
      out.push_back({pre + "attn.bo", lp.bo});
      out.push_back({pre + "attn_norm.gain", lp.attn_gain});
      out.push_back({pre + "attn_norm.bias", lp.attn_bias});
      out.push_back({pre + "ff.w1", lp.w1});
      out.push_back({pre + "ff.b1", lp.b1});
      out.push_back({pre + "ff.w2", lp.w2});
      out.push_back({pre + "ff.b2", lp.b2});
      out.push_back({pre + "ff_norm.gain", lp.ff_gain});
      out.push_back({pre + "ff_norm.bias", lp.ff_bias});
    }
    return out;
  }

  void set_requires_grad(bool v) const {
    for (auto& p : named()) {
      auto t = p.tensor;
      t.set_requires_grad(v);
    }
  }

  // Deep copy with gradients disabled (momentum twin).
  EncoderParams clone_detached() const {
    EncoderParams c;
    c.tok_embed = tok_embed.clone();
    c.pos_embed = pos_embed.clone();
    c.embed_gain = embed_gain.clone();
    c.embed_bias = embed_bias.clone();
    for (const auto& lp : layers) {
      EncoderLayerParams<T> cl;
      cl.wq = lp.wq.clone();
      cl.bq = lp.bq.clone();
      cl.wk = lp.wk.clone();
      cl.bk = lp.bk.clone();
      cl.wv = lp.wv.clone();
      cl.bv = lp.bv.clone();
      cl.wo = lp.wo.clone();
      cl.bo = lp.bo.clone();
      cl.attn_gain = lp.attn_gain.clone();
      cl.attn_bias = lp.attn_bias.clone();
      cl.w1 = lp.w1.clone();
      cl.b1 = lp.b1.clone();
      cl.w2 = lp.w2.clone();
      cl.b2 = lp.b2.clone();
      cl.ff_gain = lp.ff_gain.clone();
      cl.ff_bias = lp.ff_bias.clone();
      c.layers.push_back(std::move(cl));
    }
    return c;
  }
};

template <typename T = double>
struct Encoded {
  Tensor<T> hidden;  // batch x seq x d_model
  Tensor<T> pooled;  // batch x d_model, masked mean over real tokens
};

// Post-norm transformer encoder over a padded batch. Padding never influences
// real positions: key masking zeroes its attention weight exactly and pooling
// averages over real tokens only.
template <typename T>
Encoded<T> encode(const TokenizedBatch& batch, const EncoderParams<T>& params,
                  const EncoderConfig& cfg, const EncodeMode& mode,
                  Tape<T>* tape = nullptr) {
  cfg.validate();
  if (batch.seq > cfg.max_len)
    throw InputError("encode: sequence length " + std::to_string(batch.seq) +
                     " exceeds max_len " + std::to_string(cfg.max_len));
  const std::size_t d = cfg.d_model;
  const T p = static_cast<T>(cfg.dropout);
  std::uint64_t site = 0;
  auto drop = [&](const Tensor<T>& x) {
    return dropout(x, p, mix_seed(mode.seed, "drop", site++), mode.training,
                   tape);
  };

  Tensor<T> x = embedding(params.tok_embed, batch.ids, batch.batch, batch.seq,
                          tape);
  std::vector<std::int32_t> pos_ids(batch.seq);
  std::iota(pos_ids.begin(), pos_ids.end(), 0);
  Tensor<T> pos = reshape(embedding(params.pos_embed, pos_ids, 1, batch.seq,
                                    tape),
                          {batch.seq, d}, tape);
  x = add_rowmat(x, pos, tape);
  x = layer_norm(x, params.embed_gain, params.embed_bias, T(kLayerNormEps),
                 tape);
  x = drop(x);

  const T inv_sqrt_hd = T(1) / std::sqrt(T(d / cfg.heads));
  for (const auto& lp : params.layers) {
    Tensor<T> q = add_bias(matmul(x, lp.wq, tape), lp.bq, tape);
    Tensor<T> k = add_bias(matmul(x, lp.wk, tape), lp.bk, tape);
    Tensor<T> v = add_bias(matmul(x, lp.wv, tape), lp.bv, tape);
    Tensor<T> qh = split_heads(q, cfg.heads, tape);
    Tensor<T> kh = split_heads(k, cfg.heads, tape);
    Tensor<T> vh = split_heads(v, cfg.heads, tape);
    Tensor<T> scores = scale(matmul_nt(qh, kh, tape), inv_sqrt_hd, tape);
    scores = apply_key_mask(scores, batch.mask, tape);
    Tensor<T> probs = drop(softmax_lastdim(scores, tape));
    Tensor<T> ctx = merge_heads(matmul(probs, vh, tape), tape);
    Tensor<T> attn_out = drop(add_bias(matmul(ctx, lp.wo, tape), lp.bo, tape));
    x = layer_norm(add(x, attn_out, tape), lp.attn_gain, lp.attn_bias,
                   T(kLayerNormEps), tape);

    Tensor<T> f = gelu(add_bias(matmul(x, lp.w1, tape), lp.b1, tape), tape);
    Tensor<T> ff_out = drop(add_bias(matmul(f, lp.w2, tape), lp.b2, tape));
    x = layer_norm(add(x, ff_out, tape), lp.ff_gain, lp.ff_bias,
                   T(kLayerNormEps), tape);
  }

  Encoded<T> out;
  out.hidden = x;
  out.pooled = masked_mean_rows(x, batch.mask, tape);
  return out;
}

}  // namespace ptc
