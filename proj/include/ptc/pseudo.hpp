#pragma once

#include <cmath>
#include <cstdint>
#include <string>

#include "ptc/encoder.hpp"
#include "ptc/error.hpp"
#include "ptc/params.hpp"
#include "ptc/rng.hpp"
#include "ptc/tensor.hpp"

namespace ptc {

// Scaled dot-product attention. q is (a, d) or (B, a, d); k and v are
// (b, d) or (B, b, d) and must agree with each other. When a key mask is
// given, masked keys receive exactly zero weight.
template <typename T>
Tensor<T> attention(const Tensor<T>& q, const Tensor<T>& k, const Tensor<T>& v,
                    const BoolMask* key_mask = nullptr,
                    Tape<T>* tape = nullptr) {
  if (q.ndim() < 2 || q.ndim() > 3 || k.ndim() < 2 || k.ndim() > 3 ||
      v.ndim() < 2 || v.ndim() > 3)
    throw ShapeError("attention: operands must be 2-D or 3-D");
  const std::size_t d = q.dim(q.ndim() - 1);
  if (k.dim(k.ndim() - 1) != d || v.dim(v.ndim() - 1) != d)
    throw ShapeError("attention: width mismatch: q " + shape_str(q.shape()) +
                     ", k " + shape_str(k.shape()) + ", v " +
                     shape_str(v.shape()));
  if (k.shape() != v.shape())
    throw ShapeError("attention: k " + shape_str(k.shape()) + " vs v " +
                     shape_str(v.shape()));

  const bool flat = q.ndim() == 2 && k.ndim() == 2;
  Tensor<T> q3 = q.ndim() == 2 ? reshape(q, {1, q.dim(0), d}, tape) : q;
  Tensor<T> k3 = k.ndim() == 2 ? reshape(k, {1, k.dim(0), d}, tape) : k;
  Tensor<T> v3 = v.ndim() == 2 ? reshape(v, {1, v.dim(0), d}, tape) : v;

  Tensor<T> scores =
      scale(matmul_nt(q3, k3, tape), T(1) / std::sqrt(T(d)), tape);
  if (key_mask) scores = apply_key_mask(scores, *key_mask, tape);
  Tensor<T> out = matmul(softmax_lastdim(scores, tape), v3, tape);
  if (flat) out = reshape(out, {out.dim(1), d}, tape);
  return out;
}

// The m learned pseudo-token query seeds.
template <typename T = double>
struct PseudoTokenTable {
  Tensor<T> table;  // m x d_model

  static PseudoTokenTable init(std::size_t m, std::size_t d,
                               std::uint64_t seed) {
    if (m == 0) throw ParameterError("pseudo table: m must be > 0");
    PseudoTokenTable p;
    p.table = Tensor<T>::randn({m, d}, mix_seed(seed, "pseudo"),
                               T(kInitStddev));
    return p;
  }

  ParamList<T> named() const { return {{"pseudo.table", table}}; }

  PseudoTokenTable clone_detached() const {
    PseudoTokenTable c;
    c.table = table.clone();
    return c;
  }
};

// One set of query/key/value projections reused by both the forward
// projection and the back projection.
template <typename T = double>
struct SharedAttentionParams {
  Tensor<T> wq, wk, wv;  // each d_model x d_model

  static SharedAttentionParams init(std::size_t d, std::uint64_t seed) {
    SharedAttentionParams p;
    p.wq = Tensor<T>::randn({d, d}, mix_seed(seed, "proj.wq"), T(kInitStddev));
    p.wk = Tensor<T>::randn({d, d}, mix_seed(seed, "proj.wk"), T(kInitStddev));
    p.wv = Tensor<T>::randn({d, d}, mix_seed(seed, "proj.wv"), T(kInitStddev));
    return p;
  }

  ParamList<T> named() const {
    return {{"proj.wq", wq}, {"proj.wk", wk}, {"proj.wv", wv}};
  }

  SharedAttentionParams clone_detached() const {
    SharedAttentionParams c;
    c.wq = wq.clone();
    c.wk = wk.clone();
    c.wv = wv.clone();
    return c;
  }
};

// A projected pseudo-token sequence. Remembers which projection parameters
// produced it so the back projection can insist on the same set.
template <typename T = double>
struct PseudoProjection {
  Tensor<T> z;  // (B, m, d) or (m, d)
  const SharedAttentionParams<T>* origin = nullptr;
};

// Compresses encoder output Y into m pseudo-token states: pseudo queries
// attend over the (masked) real tokens.
template <typename T>
PseudoProjection<T> pseudo_project(const Tensor<T>& y,
                                   const PseudoTokenTable<T>& pseudo,
                                   const SharedAttentionParams<T>& w,
                                   const BoolMask* key_mask = nullptr,
                                   Tape<T>* tape = nullptr) {
  if (y.ndim() < 2 || y.ndim() > 3)
    throw ShapeError("pseudo_project: y must be 2-D or 3-D, got " +
                     shape_str(y.shape()));
  const std::size_t d = y.dim(y.ndim() - 1);
  if (pseudo.table.ndim() != 2 || pseudo.table.dim(1) != d)
    throw ShapeError("pseudo_project: table " + shape_str(pseudo.table.shape()) +
                     " vs y " + shape_str(y.shape()));
  Tensor<T> q = matmul(pseudo.table, w.wq, tape);
  Tensor<T> k = matmul(y, w.wk, tape);
  Tensor<T> v = matmul(y, w.wv, tape);
  PseudoProjection<T> out;
  out.z = attention(q, k, v, key_mask, tape);
  out.origin = &w;
  return out;
}

// Reconstructs token-aligned states from the pseudo sequence: real-token
// queries attend over the m pseudo states. Requires the same shared
// projection parameters that built `proj`.
template <typename T>
Tensor<T> back_project(const Tensor<T>& y, const PseudoProjection<T>& proj,
                       const SharedAttentionParams<T>& w,
                       Tape<T>* tape = nullptr) {
  if (proj.origin != &w)
    throw ContractError(
        "back_project: projection was built with a different shared "
        "parameter set");
  Tensor<T> q = matmul(y, w.wq, tape);
  Tensor<T> k = matmul(proj.z, w.wk, tape);
  Tensor<T> v = matmul(proj.z, w.wv, tape);
  return attention(q, k, v, nullptr, tape);
}

// Masked mean over the token axis; accepts (B, T, d) with a (B, T) mask or a
// single (T, d) sequence with a (1, T) mask.
template <typename T>
Tensor<T> sentence_embedding(const Tensor<T>& h, const BoolMask& mask,
                             Tape<T>* tape = nullptr) {
  if (h.ndim() == 2) {
    Tensor<T> h3 = reshape(h, {1, h.dim(0), h.dim(1)}, tape);
    Tensor<T> pooled = masked_mean_rows(h3, mask, tape);
    return reshape(pooled, {h.dim(1)}, tape);
  }
  return masked_mean_rows(h, mask, tape);
}

}  // namespace ptc
