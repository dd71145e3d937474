#pragma once

#include <cstdint>

#include "ptc/encoder.hpp"
#include "ptc/pseudo.hpp"

namespace ptc {

// The gradient-side half of the system: encoder plus the pseudo mapping's
// parameter stores. The momentum half mirrors the encoder (and optionally the
// rest, see MomentumState).
template <typename T = double>
struct PtModel {
  EncoderConfig enc_cfg;
  EncoderParams<T> encoder;
  PseudoTokenTable<T> pseudo;
  SharedAttentionParams<T> shared;

  static PtModel init(const EncoderConfig& cfg, std::size_t pseudo_len,
                      std::uint64_t seed) {
    cfg.validate();
    PtModel m;
    m.enc_cfg = cfg;
    m.encoder = EncoderParams<T>::init(cfg, mix_seed(seed, "encoder"));
    m.pseudo = PseudoTokenTable<T>::init(pseudo_len, cfg.d_model,
                                         mix_seed(seed, "pseudo"));
    m.shared = SharedAttentionParams<T>::init(cfg.d_model,
                                              mix_seed(seed, "shared"));
    return m;
  }

  ParamList<T> named() const {
    ParamList<T> out = encoder.named();
    for (auto& p : pseudo.named()) out.push_back(p);
    for (auto& p : shared.named()) out.push_back(p);
    return out;
  }

  void set_requires_grad(bool v) const {
    for (auto& p : named()) {
      auto t = p.tensor;
      t.set_requires_grad(v);
    }
  }
};

// One full embedding pass: encode, optionally run the pseudo round trip, then
// pool over real tokens. Returns unnormalized (B, d) sentence vectors.
template <typename T>
Tensor<T> embed_batch(const TokenizedBatch& batch,
                      const EncoderParams<T>& enc_params,
                      const EncoderConfig& cfg,
                      const PseudoTokenTable<T>& pseudo,
                      const SharedAttentionParams<T>& shared, bool use_pseudo,
                      const EncodeMode& mode, Tape<T>* tape = nullptr) {
  Encoded<T> enc = encode(batch, enc_params, cfg, mode, tape);
  if (!use_pseudo) return enc.pooled;
  PseudoProjection<T> proj =
      pseudo_project(enc.hidden, pseudo, shared, &batch.mask, tape);
  Tensor<T> h = back_project(enc.hidden, proj, shared, tape);
  return masked_mean_rows(h, batch.mask, tape);
}

}  // namespace ptc
