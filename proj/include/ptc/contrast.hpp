#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <string>

#include "ptc/error.hpp"
#include "ptc/model.hpp"
#include "ptc/optimizer.hpp"
#include "ptc/queue.hpp"
#include "ptc/rng.hpp"

namespace ptc {

enum class TrainMode { pt, dropout_only, moco_no_pseudo };

inline std::string to_string(TrainMode m) {
  switch (m) {
    case TrainMode::pt: return "pt";
    case TrainMode::dropout_only: return "dropout-only";
    case TrainMode::moco_no_pseudo: return "moco-no-pseudo";
  }
  throw ParameterError("unknown train mode");
}

inline TrainMode parse_train_mode(const std::string& s) {
  if (s == "pt") return TrainMode::pt;
  if (s == "dropout-only") return TrainMode::dropout_only;
  if (s == "moco-no-pseudo") return TrainMode::moco_no_pseudo;
  throw ParameterError("unknown train mode '" + s +
                       "' (expected pt, dropout-only or moco-no-pseudo)");
}

struct TrainConfig {
  double tau = 0.05;
  double momentum = 0.885;
  double lr = 1e-3;
  std::size_t batch_size = 64;
  std::size_t queue_capacity = 256;
  std::size_t pseudo_len = 128;
  std::size_t epochs = 1;
  std::size_t eval_every = 125;
  std::uint64_t seed = 0;
  TrainMode mode = TrainMode::pt;
  // when set, the momentum branch gets its own decayed copies of the pseudo
  // table and shared attention instead of reading the live values
  bool mirror_shared = false;

  void validate() const {
    if (tau <= 0) throw ParameterError("train: tau must be > 0");
    if (momentum < 0 || momentum > 1)
      throw ParameterError("train: momentum must lie in [0, 1]");
    if (lr <= 0) throw ParameterError("train: lr must be > 0");
    if (batch_size == 0) throw ParameterError("train: batch_size must be > 0");
    if (queue_capacity == 0)
      throw ParameterError("train: queue_capacity must be > 0");
    if (pseudo_len == 0) throw ParameterError("train: pseudo_len must be > 0");
    if (epochs == 0) throw ParameterError("train: epochs must be > 0");
  }
};

// Decayed mirror of the gradient-side parameters. The encoder is always
// mirrored; the pseudo table and shared attention are mirrored only when
// requested (by default the momentum branch reads their live values).
template <typename T = double>
struct MomentumState {
  EncoderParams<T> encoder;
  std::optional<PseudoTokenTable<T>> pseudo;
  std::optional<SharedAttentionParams<T>> shared;

  static MomentumState from(const PtModel<T>& model, bool mirror_shared) {
    MomentumState s;
    s.encoder = model.encoder.clone_detached();
    if (mirror_shared) {
      s.pseudo = model.pseudo.clone_detached();
      s.shared = model.shared.clone_detached();
    }
    return s;
  }

  bool mirrors_shared() const { return pseudo.has_value(); }

  ParamList<T> named() const {
    ParamList<T> out = encoder.named();
    if (pseudo)
      for (auto& p : pseudo->named()) out.push_back(p);
    if (shared)
      for (auto& p : shared->named()) out.push_back(p);
    return out;
  }

  // The congruent gradient-side list this state decays toward.
  ParamList<T> source_list(const PtModel<T>& model) const {
    ParamList<T> out = model.encoder.named();
    if (pseudo)
      for (auto& p : model.pseudo.named()) out.push_back(p);
    if (shared)
      for (auto& p : model.shared.named()) out.push_back(p);
    return out;
  }
};

// target <- lambda * target + (1 - lambda) * source, elementwise, no tape.
template <typename T>
void momentum_update(const ParamList<T>& target, const ParamList<T>& source,
                     T lambda) {
  if (lambda < T(0) || lambda > T(1))
    throw ParameterError("momentum_update: lambda must lie in [0, 1]");
  if (target.size() != source.size())
    throw ContractError("momentum_update: list sizes differ: " +
                        std::to_string(target.size()) + " vs " +
                        std::to_string(source.size()));
  for (std::size_t i = 0; i < target.size(); ++i) {
    if (target[i].name != source[i].name)
      throw ContractError("momentum_update: name mismatch at index " +
                          std::to_string(i) + ": '" + target[i].name +
                          "' vs '" + source[i].name + "'");
    if (target[i].tensor.shape() != source[i].tensor.shape())
      throw ContractError("momentum_update: shape mismatch for '" +
                          target[i].name + "'");
    auto dst = const_cast<Tensor<T>&>(target[i].tensor).data();
    auto src = source[i].tensor.data();
    for (std::size_t j = 0; j < dst.size(); ++j)
      dst[j] = lambda * dst[j] + (T(1) - lambda) * src[j];
  }
}

// InfoNCE over {positive} ∪ queue. h is the differentiable branch; h_pos is
// treated as constant. Cosine similarities throughout. With an empty queue
// the per-row loss is -log(1) = 0 exactly.
template <typename T>
Tensor<T> info_nce_loss(const Tensor<T>& h, const Tensor<T>& h_pos,
                        const EmbeddingQueue<T>& queue, T tau,
                        Tape<T>* tape = nullptr) {
  if (tau <= T(0)) throw ParameterError("info_nce: tau must be > 0");
  if (h.ndim() != 2 || h.shape() != h_pos.shape())
    throw ShapeError("info_nce: h " + shape_str(h.shape()) + " vs h_pos " +
                     shape_str(h_pos.shape()));
  if (!queue.empty() && queue.dim() != h.dim(1))
    throw ShapeError("info_nce: queue dim " + std::to_string(queue.dim()) +
                     " vs embedding dim " + std::to_string(h.dim(1)));
  const std::size_t b = h.dim(0);

  Tensor<T> hn = l2_normalize(h, tape);
  Tensor<T> pn = l2_normalize(h_pos);  // detached by construction
  Tensor<T> pos = rowwise_dot(hn, pn, tape);  // (B)
  Tensor<T> pos_scaled = scale(pos, T(1) / tau, tape);

  Tensor<T> logits = reshape(pos_scaled, {b, 1}, tape);
  if (!queue.empty()) {
    Tensor<T> negs = matmul_nt(hn, queue.as_tensor(), tape);  // (B, fill)
    logits = concat_lastdim(logits, scale(negs, T(1) / tau, tape), tape);
  }
  Tensor<T> lse = logsumexp_lastdim(logits, tape);  // (B)
  return mean_all(sub(lse, pos_scaled, tape), tape);
}

// SimCSE-style in-batch objective: both views differentiable, negatives are
// the other rows of the batch.
template <typename T>
Tensor<T> in_batch_info_nce(const Tensor<T>& h1, const Tensor<T>& h2, T tau,
                            Tape<T>* tape = nullptr) {
  if (tau <= T(0)) throw ParameterError("info_nce: tau must be > 0");
  if (h1.ndim() != 2 || h1.shape() != h2.shape())
    throw ShapeError("info_nce: h1 " + shape_str(h1.shape()) + " vs h2 " +
                     shape_str(h2.shape()));
  Tensor<T> a = l2_normalize(h1, tape);
  Tensor<T> b = l2_normalize(h2, tape);
  Tensor<T> logits = scale(matmul_nt(a, b, tape), T(1) / tau, tape);
  Tensor<T> pos = scale(rowwise_dot(a, b, tape), T(1) / tau, tape);
  return mean_all(sub(logsumexp_lastdim(logits, tape), pos, tape), tape);
}

template <typename T = double>
struct StepReport {
  T loss = T(0);
  T grad_norm = T(0);
  std::size_t queue_fill = 0;
};

namespace detail {

template <typename T>
void check_finite_loss(T loss, const Tensor<T>& hn, const Tensor<T>& pn) {
  if (std::isfinite(static_cast<double>(loss))) return;
  T lo = T(1), hi = T(-1);
  auto a = hn.data();
  auto p = pn.data();
  const std::size_t b = hn.dim(0), d = hn.dim(1);
  for (std::size_t r = 0; r < b; ++r) {
    T dot = T(0);
    for (std::size_t j = 0; j < d; ++j) dot += a[r * d + j] * p[r * d + j];
    lo = std::min(lo, dot);
    hi = std::max(hi, dot);
  }
  throw Error("training_step: non-finite loss " +
              std::to_string(static_cast<double>(loss)) +
              "; positive similarities in [" +
              std::to_string(static_cast<double>(lo)) + ", " +
              std::to_string(static_cast<double>(hi)) + "]");
}

}  // namespace detail

// One optimization step. Fixed order: loss backward, optimizer step, momentum
// decay, enqueue of the momentum branch's embeddings.
template <typename T>
StepReport<T> training_step(const TokenizedBatch& batch, PtModel<T>& model,
                            MomentumState<T>& momentum,
                            EmbeddingQueue<T>& queue, Adam<T>& opt,
                            const TrainConfig& cfg, std::uint64_t step_index) {
  cfg.validate();
  const bool use_pseudo = cfg.mode == TrainMode::pt;
  const std::uint64_t seed_q = mix_seed(cfg.seed, "step-q", step_index);
  const std::uint64_t seed_k = mix_seed(cfg.seed, "step-k", step_index);
  const T tau = T(cfg.tau);

  ParamList<T> params = model.named();
  zero_all_grads(params);
  Tape<T> tape;
  StepReport<T> report;

  Tensor<T> h = embed_batch(batch, model.encoder, model.enc_cfg, model.pseudo,
                            model.shared, use_pseudo,
                            EncodeMode::train(seed_q), &tape);

  if (cfg.mode == TrainMode::dropout_only) {
    Tensor<T> h2 = embed_batch(batch, model.encoder, model.enc_cfg,
                               model.pseudo, model.shared, use_pseudo,
                               EncodeMode::train(seed_k), &tape);
    Tensor<T> loss = in_batch_info_nce(h, h2, tau, &tape);
    report.loss = loss.item();
    detail::check_finite_loss(report.loss, l2_normalize(h), l2_normalize(h2));
    tape.backward(loss);
    report.grad_norm = global_grad_norm(params);
    opt.step();
    report.queue_fill = 0;
    return report;
  }

  const PseudoTokenTable<T>& k_pseudo =
      momentum.pseudo ? *momentum.pseudo : model.pseudo;
  const SharedAttentionParams<T>& k_shared =
      momentum.shared ? *momentum.shared : model.shared;
  Tensor<T> h_pos = embed_batch(batch, momentum.encoder, model.enc_cfg,
                                k_pseudo, k_shared, use_pseudo,
                                EncodeMode::train(seed_k));
  Tensor<T> loss = info_nce_loss(h, h_pos, queue, tau, &tape);
  report.loss = loss.item();
  detail::check_finite_loss(report.loss, l2_normalize(h), l2_normalize(h_pos));

  tape.backward(loss);
  report.grad_norm = global_grad_norm(params);
  opt.step();
  momentum_update(momentum.named(), momentum.source_list(model),
                  T(cfg.momentum));
  enqueue_batch(queue, l2_normalize(h_pos));
  report.queue_fill = queue.size();
  return report;
}

}  // namespace ptc
