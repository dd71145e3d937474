#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <numeric>
#include <optional>
#include <random>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "ptc/error.hpp"
#include "ptc/rng.hpp"

namespace ptc {

using Shape = std::vector<std::size_t>;

inline std::size_t shape_numel(const Shape& s) {
  std::size_t n = 1;
  for (std::size_t d : s) n *= d;
  return n;
}

inline std::string shape_str(const Shape& s) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (i) os << 'x';
    os << s[i];
  }
  os << ']';
  return os.str();
}

// Row-major boolean matrix; marks which entries of a padded batch are real.
struct BoolMask {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<std::uint8_t> v;  // rows*cols, 1 = keep

  BoolMask() = default;
  BoolMask(std::size_t r, std::size_t c) : rows(r), cols(c), v(r * c, 1) {}

  std::uint8_t at(std::size_t r, std::size_t c) const { return v[r * cols + c]; }
  std::uint8_t& at(std::size_t r, std::size_t c) { return v[r * cols + c]; }
  std::size_t row_count(std::size_t r) const {
    std::size_t n = 0;
    for (std::size_t c = 0; c < cols; ++c) n += v[r * cols + c];
    return n;
  }
};

template <typename T>
class Tape;

// Dense row-major tensor with optional gradient buffer. Copies are shallow
// (shared storage); clone() makes a deep, detached copy. A tensor produced by
// a recorded op remembers the id of the tape that created it.
template <typename T = double>
class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(Shape shape) {
    Tensor t;
    t.impl_ = std::make_shared<Impl>();
    t.impl_->shape = std::move(shape);
    t.validate_shape();
    t.impl_->data.assign(shape_numel(t.impl_->shape), T(0));
    return t;
  }

  static Tensor full(Shape shape, T value) {
    Tensor t = zeros(std::move(shape));
    std::fill(t.impl_->data.begin(), t.impl_->data.end(), value);
    return t;
  }

  static Tensor from(Shape shape, std::vector<T> values) {
    Tensor t;
    t.impl_ = std::make_shared<Impl>();
    t.impl_->shape = std::move(shape);
    t.validate_shape();
    if (values.size() != shape_numel(t.impl_->shape))
      throw ShapeError("tensor data length " + std::to_string(values.size()) +
                       " does not match shape " + shape_str(t.impl_->shape));
    t.impl_->data = std::move(values);
    return t;
  }

  static Tensor scalar(T value) { return from({1}, {value}); }

  static Tensor randn(Shape shape, std::uint64_t seed, T stddev = T(1),
                      T mean = T(0)) {
    Tensor t = zeros(std::move(shape));
    auto rng = make_rng(seed);
    std::normal_distribution<T> dist(mean, stddev);
    for (T& x : t.impl_->data) x = dist(rng);
    return t;
  }

  bool defined() const { return impl_ != nullptr; }
  const Shape& shape() const { return impl_->shape; }
  std::size_t ndim() const { return impl_->shape.size(); }
  std::size_t dim(std::size_t i) const { return impl_->shape[i]; }
  std::size_t numel() const { return impl_->data.size(); }

  std::span<T> data() { return {impl_->data.data(), impl_->data.size()}; }
  std::span<const T> data() const {
    return {impl_->data.data(), impl_->data.size()};
  }

  T item() const {
    if (numel() != 1)
      throw ContractError("item() requires a scalar tensor, got shape " +
                          shape_str(shape()));
    return impl_->data[0];
  }

  bool requires_grad() const { return impl_ && impl_->requires_grad; }
  Tensor& set_requires_grad(bool v) {
    impl_->requires_grad = v;
    return *this;
  }

  bool has_grad() const { return impl_ && impl_->grad.has_value(); }
  std::span<const T> grad() const {
    if (!has_grad()) throw ContractError("tensor has no gradient");
    return {impl_->grad->data(), impl_->grad->size()};
  }
  void zero_grad() const { impl_->grad.reset(); }

  // Adds scale*g into the gradient buffer, allocating it on first use.
  void accumulate_grad(std::span<const T> g, T scale = T(1)) const {
    if (g.size() != impl_->data.size())
      throw ShapeError("gradient length " + std::to_string(g.size()) +
                       " does not match tensor shape " + shape_str(shape()));
    if (!impl_->grad) impl_->grad.emplace(impl_->data.size(), T(0));
    T* dst = impl_->grad->data();
    const T* src = g.data();
    for (std::size_t i = 0; i < g.size(); ++i) dst[i] += scale * src[i];
  }

  // Gradient buffer for in-place accumulation by op backwards.
  std::span<T> grad_buffer() const {
    if (!impl_->grad) impl_->grad.emplace(impl_->data.size(), T(0));
    return {impl_->grad->data(), impl_->grad->size()};
  }

  std::uint64_t produced_by() const { return impl_ ? impl_->produced_by : 0; }

  // Marks this tensor as a recorded output of `tape`. Op-author API.
  void mark_output(const Tape<T>& tape) const;

  Tensor clone() const {
    Tensor t;
    t.impl_ = std::make_shared<Impl>();
    t.impl_->shape = impl_->shape;
    t.impl_->data = impl_->data;
    return t;
  }

  bool same_storage(const Tensor& other) const { return impl_ == other.impl_; }

 private:
  struct Impl {
    Shape shape;
    std::vector<T> data;
    bool requires_grad = false;
    mutable std::optional<std::vector<T>> grad;
    std::uint64_t produced_by = 0;
  };

  void validate_shape() const {
    for (std::size_t d : impl_->shape)
      if (d == 0)
        throw ShapeError("dimension sizes must be positive, got " +
                         shape_str(impl_->shape));
  }

  friend class Tape<T>;
  std::shared_ptr<Impl> impl_;
};

// Reverse-mode tape: an ordered list of backward closures pushed in forward
// execution order and replayed in reverse. One tape per forward pass; clear()
// drops all saved intermediates.
template <typename T = double>
class Tape {
 public:
  Tape() : id_(next_id()) {}
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  std::uint64_t id() const { return id_; }
  std::size_t size() const { return records_.size(); }
  bool consumed() const { return consumed_; }

  void record(std::function<void()> backward_fn) {
    if (consumed_)
      throw ContractError(
          "tape already consumed by backward(); clear() and re-run forward");
    records_.push_back(std::move(backward_fn));
  }

  void backward(const Tensor<T>& loss) {
    if (consumed_)
      throw ContractError(
          "second backward() without re-running forward; clear() first");
    if (loss.numel() != 1)
      throw ContractError("backward() requires a scalar loss, got shape " +
                          shape_str(loss.shape()));
    if (loss.produced_by() != id_)
      throw ContractError("loss was not produced on the active tape");
    loss.grad_buffer()[0] += T(1);
    for (auto it = records_.rbegin(); it != records_.rend(); ++it) (*it)();
    consumed_ = true;
  }

  void clear() {
    records_.clear();
    consumed_ = false;
  }

 private:
  static std::uint64_t next_id() {
    static std::atomic<std::uint64_t> counter{0};
    return ++counter;
  }

  std::vector<std::function<void()>> records_;
  bool consumed_ = false;
  std::uint64_t id_;
};

template <typename T>
void Tensor<T>::mark_output(const Tape<T>& tape) const {
  impl_->requires_grad = true;
  impl_->produced_by = tape.id();
}

namespace detail {

// C(p x r) += A(p x q) * B(q x r)
template <typename T>
void mm_nn(const T* a, const T* b, T* c, std::size_t p, std::size_t q,
           std::size_t r) {
  for (std::size_t i = 0; i < p; ++i) {
    const T* ai = a + i * q;
    T* ci = c + i * r;
    for (std::size_t k = 0; k < q; ++k) {
      const T av = ai[k];
      const T* bk = b + k * r;
      for (std::size_t j = 0; j < r; ++j) ci[j] += av * bk[j];
    }
  }
}

// C(p x r) += A(p x q) * B(r x q)^T
template <typename T>
void mm_nt(const T* a, const T* b, T* c, std::size_t p, std::size_t q,
           std::size_t r) {
  for (std::size_t i = 0; i < p; ++i) {
    const T* ai = a + i * q;
    T* ci = c + i * r;
    for (std::size_t j = 0; j < r; ++j) {
      const T* bj = b + j * q;
      T acc = T(0);
      for (std::size_t k = 0; k < q; ++k) acc += ai[k] * bj[k];
      ci[j] += acc;
    }
  }
}

// C(q x r) += A(p x q)^T * B(p x r)
template <typename T>
void mm_tn(const T* a, const T* b, T* c, std::size_t p, std::size_t q,
           std::size_t r) {
  for (std::size_t i = 0; i < p; ++i) {
    const T* ai = a + i * q;
    const T* bi = b + i * r;
    for (std::size_t k = 0; k < q; ++k) {
      const T av = ai[k];
      T* ck = c + k * r;
      for (std::size_t j = 0; j < r; ++j) ck[j] += av * bi[j];
    }
  }
}

// Broadcast plan over the leading (batch) dimensions of a binary matrix op.
struct BatchPlan {
  Shape out_batch;                  // broadcast batch shape
  std::size_t count = 1;            // product of out_batch
  std::vector<std::size_t> stride_a;  // per out_batch axis, in matrices
  std::vector<std::size_t> stride_b;
};

inline BatchPlan make_batch_plan(const Shape& a, const Shape& b,
                                 const std::string& op, const std::string& sa,
                                 const std::string& sb) {
  const std::size_t na = a.size() - 2, nb = b.size() - 2;
  const std::size_t n = std::max(na, nb);
  BatchPlan plan;
  plan.out_batch.resize(n);
  std::vector<std::size_t> da(n, 1), db(n, 1);
  for (std::size_t i = 0; i < na; ++i) da[n - na + i] = a[i];
  for (std::size_t i = 0; i < nb; ++i) db[n - nb + i] = b[i];
  for (std::size_t i = 0; i < n; ++i) {
    if (da[i] != db[i] && da[i] != 1 && db[i] != 1)
      throw ShapeError(op + ": batch dimensions do not broadcast: " + sa +
                       " vs " + sb);
    plan.out_batch[i] = std::max(da[i], db[i]);
    plan.count *= plan.out_batch[i];
  }
  plan.stride_a.assign(n, 0);
  plan.stride_b.assign(n, 0);
  std::size_t run_a = 1, run_b = 1;
  for (std::size_t i = n; i-- > 0;) {
    plan.stride_a[i] = (da[i] == 1) ? 0 : run_a;
    plan.stride_b[i] = (db[i] == 1) ? 0 : run_b;
    run_a *= da[i];
    run_b *= db[i];
  }
  return plan;
}

inline void batch_offsets(const BatchPlan& plan, std::size_t flat,
                          std::size_t& off_a, std::size_t& off_b) {
  off_a = 0;
  off_b = 0;
  for (std::size_t i = plan.out_batch.size(); i-- > 0;) {
    const std::size_t coord = flat % plan.out_batch[i];
    flat /= plan.out_batch[i];
    off_a += coord * plan.stride_a[i];
    off_b += coord * plan.stride_b[i];
  }
}

template <typename T>
bool want_grad(Tape<T>* tape, const Tensor<T>& a) {
  return tape != nullptr && a.requires_grad();
}

template <typename T>
bool want_grad(Tape<T>* tape, const Tensor<T>& a, const Tensor<T>& b) {
  return tape != nullptr && (a.requires_grad() || b.requires_grad());
}

template <typename T>
bool want_grad(Tape<T>* tape, const Tensor<T>& a, const Tensor<T>& b,
               const Tensor<T>& c) {
  return tape != nullptr &&
         (a.requires_grad() || b.requires_grad() || c.requires_grad());
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Elementwise and broadcast arithmetic
// ---------------------------------------------------------------------------

template <typename T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b, Tape<T>* tape = nullptr) {
  if (a.shape() != b.shape())
    throw ShapeError("add: shapes differ: " + shape_str(a.shape()) + " vs " +
                     shape_str(b.shape()));
  Tensor<T> out = Tensor<T>::zeros(a.shape());
  const T* pa = a.data().data();
  const T* pb = b.data().data();
  T* po = out.data().data();
  for (std::size_t i = 0; i < out.numel(); ++i) po[i] = pa[i] + pb[i];
  if (detail::want_grad(tape, a, b)) {
    out.mark_output(*tape);
    tape->record([a, b, out]() {
      if (!out.has_grad()) return;
      auto g = out.grad();
      if (a.requires_grad()) a.accumulate_grad(g);
      if (b.requires_grad()) b.accumulate_grad(g);
    });
  }
  return out;
}

template <typename T>
Tensor<T> sub(const Tensor<T>& a, const Tensor<T>& b, Tape<T>* tape = nullptr) {
  if (a.shape() != b.shape())
    throw ShapeError("sub: shapes differ: " + shape_str(a.shape()) + " vs " +
                     shape_str(b.shape()));
  Tensor<T> out = Tensor<T>::zeros(a.shape());
  const T* pa = a.data().data();
  const T* pb = b.data().data();
  T* po = out.data().data();
  for (std::size_t i = 0; i < out.numel(); ++i) po[i] = pa[i] - pb[i];
  if (detail::want_grad(tape, a, b)) {
    out.mark_output(*tape);
    tape->record([a, b, out]() {
      if (!out.has_grad()) return;
      auto g = out.grad();
      if (a.requires_grad()) a.accumulate_grad(g);
      if (b.requires_grad()) b.accumulate_grad(g, T(-1));
    });
  }
  return out;
}

template <typename T>
Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b, Tape<T>* tape = nullptr) {
  if (a.shape() != b.shape())
    throw ShapeError("mul: shapes differ: " + shape_str(a.shape()) + " vs " +
                     shape_str(b.shape()));
  Tensor<T> out = Tensor<T>::zeros(a.shape());
  const T* pa = a.data().data();
  const T* pb = b.data().data();
  T* po = out.data().data();
  for (std::size_t i = 0; i < out.numel(); ++i) po[i] = pa[i] * pb[i];
  if (detail::want_grad(tape, a, b)) {
    out.mark_output(*tape);
    tape->record([a, b, out]() {
      if (!out.has_grad()) return;
      auto g = out.grad();
      if (a.requires_grad()) {
        auto buf = a.grad_buffer();
        const T* pb2 = b.data().data();
        for (std::size_t i = 0; i < g.size(); ++i) buf[i] += g[i] * pb2[i];
      }
      if (b.requires_grad()) {
        auto buf = b.grad_buffer();
        const T* pa2 = a.data().data();
        for (std::size_t i = 0; i < g.size(); ++i) buf[i] += g[i] * pa2[i];
      }
    });
  }
  return out;
}

template <typename T>
Tensor<T> scale(const Tensor<T>& x, T c, Tape<T>* tape = nullptr) {
  Tensor<T> out = Tensor<T>::zeros(x.shape());
  const T* px = x.data().data();
  T* po = out.data().data();
  for (std::size_t i = 0; i < out.numel(); ++i) po[i] = c * px[i];
  if (detail::want_grad(tape, x)) {
    out.mark_output(*tape);
    tape->record([x, out, c]() {
      if (!out.has_grad()) return;
      x.accumulate_grad(out.grad(), c);
    });
  }
  return out;
}

// x(..., d) + bias(d), broadcast over all leading dims.
template <typename T>
Tensor<T> add_bias(const Tensor<T>& x, const Tensor<T>& bias,
                   Tape<T>* tape = nullptr) {
  const std::size_t d = x.dim(x.ndim() - 1);
  if (bias.ndim() != 1 || bias.dim(0) != d)
    throw ShapeError("add_bias: bias " + shape_str(bias.shape()) +
                     " does not match last dim of " + shape_str(x.shape()));
  Tensor<T> out = Tensor<T>::zeros(x.shape());
  const std::size_t rows = x.numel() / d;
  const T* px = x.data().data();
  const T* pb = bias.data().data();
  T* po = out.data().data();
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t j = 0; j < d; ++j) po[r * d + j] = px[r * d + j] + pb[j];
  if (detail::want_grad(tape, x, bias)) {
    out.mark_output(*tape);
    tape->record([x, bias, out, rows, d]() {
      if (!out.has_grad()) return;
      auto g = out.grad();
      if (x.requires_grad()) x.accumulate_grad(g);
      if (bias.requires_grad()) {
        auto buf = bias.grad_buffer();
        for (std::size_t r = 0; r < rows; ++r)
          for (std::size_t j = 0; j < d; ++j) buf[j] += g[r * d + j];
      }
    });
  }
  return out;
}

// x(B, T, d) + m(T, d), broadcast over the batch dim (position tables).
template <typename T>
Tensor<T> add_rowmat(const Tensor<T>& x, const Tensor<T>& m,
                     Tape<T>* tape = nullptr) {
  if (x.ndim() != 3 || m.ndim() != 2 || x.dim(1) != m.dim(0) ||
      x.dim(2) != m.dim(1))
    throw ShapeError("add_rowmat: " + shape_str(x.shape()) + " vs " +
                     shape_str(m.shape()));
  Tensor<T> out = Tensor<T>::zeros(x.shape());
  const std::size_t b = x.dim(0), n = m.numel();
  const T* px = x.data().data();
  const T* pm = m.data().data();
  T* po = out.data().data();
  for (std::size_t i = 0; i < b; ++i)
    for (std::size_t j = 0; j < n; ++j) po[i * n + j] = px[i * n + j] + pm[j];
  if (detail::want_grad(tape, x, m)) {
    out.mark_output(*tape);
    tape->record([x, m, out, b, n]() {
      if (!out.has_grad()) return;
      auto g = out.grad();
      if (x.requires_grad()) x.accumulate_grad(g);
      if (m.requires_grad()) {
        auto buf = m.grad_buffer();
        for (std::size_t i = 0; i < b; ++i)
          for (std::size_t j = 0; j < n; ++j) buf[j] += g[i * n + j];
      }
    });
  }
  return out;
}

// ---------------------------------------------------------------------------
// Matrix products
// ---------------------------------------------------------------------------

// a(.. x p x q) * b(.. x q x r) -> (.. x p x r); leading dims broadcast from 1.
template <typename T>
Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b,
                 Tape<T>* tape = nullptr) {
  if (a.ndim() < 2 || b.ndim() < 2)
    throw ShapeError("matmul: operands must have >= 2 dims: " +
                     shape_str(a.shape()) + " vs " + shape_str(b.shape()));
  const std::size_t p = a.dim(a.ndim() - 2), q = a.dim(a.ndim() - 1);
  const std::size_t q2 = b.dim(b.ndim() - 2), r = b.dim(b.ndim() - 1);
  if (q != q2)
    throw ShapeError("matmul: inner dimensions disagree: " +
                     shape_str(a.shape()) + " vs " + shape_str(b.shape()));
  auto plan = detail::make_batch_plan(a.shape(), b.shape(), "matmul",
                                      shape_str(a.shape()),
                                      shape_str(b.shape()));
  Shape out_shape = plan.out_batch;
  out_shape.push_back(p);
  out_shape.push_back(r);
  Tensor<T> out = Tensor<T>::zeros(out_shape);
  const T* pa = a.data().data();
  const T* pb = b.data().data();
  T* po = out.data().data();
  for (std::size_t u = 0; u < plan.count; ++u) {
    std::size_t oa, ob;
    detail::batch_offsets(plan, u, oa, ob);
    detail::mm_nn(pa + oa * p * q, pb + ob * q * r, po + u * p * r, p, q, r);
  }
  if (detail::want_grad(tape, a, b)) {
    out.mark_output(*tape);
    tape->record([a, b, out, plan, p, q, r]() {
      if (!out.has_grad()) return;
      const T* g = out.grad().data();
      if (a.requires_grad()) {
        T* ga = a.grad_buffer().data();
        const T* pb2 = b.data().data();
        for (std::size_t u = 0; u < plan.count; ++u) {
          std::size_t oa, ob;
          detail::batch_offsets(plan, u, oa, ob);
          detail::mm_nt(g + u * p * r, pb2 + ob * q * r, ga + oa * p * q, p, r,
                        q);
        }
      }
      if (b.requires_grad()) {
        T* gb = b.grad_buffer().data();
        const T* pa2 = a.data().data();
        for (std::size_t u = 0; u < plan.count; ++u) {
          std::size_t oa, ob;
          detail::batch_offsets(plan, u, oa, ob);
          detail::mm_tn(pa2 + oa * p * q, g + u * p * r, gb + ob * q * r, p, q,
                        r);
        }
      }
    });
  }
  return out;
}

// a(.. x p x q) * b(.. x r x q)^T -> (.. x p x r)
template <typename T>
Tensor<T> matmul_nt(const Tensor<T>& a, const Tensor<T>& b,
                    Tape<T>* tape = nullptr) {
  if (a.ndim() < 2 || b.ndim() < 2)
    throw ShapeError("matmul_nt: operands must have >= 2 dims: " +
                     shape_str(a.shape()) + " vs " + shape_str(b.shape()));
  const std::size_t p = a.dim(a.ndim() - 2), q = a.dim(a.ndim() - 1);
  const std::size_t r = b.dim(b.ndim() - 2), q2 = b.dim(b.ndim() - 1);
  if (q != q2)
    throw ShapeError("matmul_nt: inner dimensions disagree: " +
                     shape_str(a.shape()) + " vs " + shape_str(b.shape()));
  auto plan = detail::make_batch_plan(a.shape(), b.shape(), "matmul_nt",
                                      shape_str(a.shape()),
                                      shape_str(b.shape()));
  Shape out_shape = plan.out_batch;
  out_shape.push_back(p);
  out_shape.push_back(r);
  Tensor<T> out = Tensor<T>::zeros(out_shape);
  const T* pa = a.data().data();
  const T* pb = b.data().data();
  T* po = out.data().data();
  for (std::size_t u = 0; u < plan.count; ++u) {
    std::size_t oa, ob;
    detail::batch_offsets(plan, u, oa, ob);
    detail::mm_nt(pa + oa * p * q, pb + ob * r * q, po + u * p * r, p, q, r);
  }
  if (detail::want_grad(tape, a, b)) {
    out.mark_output(*tape);
    tape->record([a, b, out, plan, p, q, r]() {
      if (!out.has_grad()) return;
      const T* g = out.grad().data();
      if (a.requires_grad()) {
        T* ga = a.grad_buffer().data();
        const T* pb2 = b.data().data();
        for (std::size_t u = 0; u < plan.count; ++u) {
          std::size_t oa, ob;
          detail::batch_offsets(plan, u, oa, ob);
          detail::mm_nn(g + u * p * r, pb2 + ob * r * q, ga + oa * p * q, p, r,
                        q);
        }
      }
      if (b.requires_grad()) {
        T* gb = b.grad_buffer().data();
        const T* pa2 = a.data().data();
        for (std::size_t u = 0; u < plan.count; ++u) {
          std::size_t oa, ob;
          detail::batch_offsets(plan, u, oa, ob);
          // dB(r x q) += dC(p x r)^T * A(p x q)
          detail::mm_tn(g + u * p * r, pa2 + oa * p * q, gb + ob * r * q, p, r,
                        q);
        }
      }
    });
  }
  return out;
}

// ---------------------------------------------------------------------------
// Nonlinearities and normalization
// ---------------------------------------------------------------------------

template <typename T>
Tensor<T> softmax_lastdim(const Tensor<T>& x, Tape<T>* tape = nullptr) {
  if (!x.defined() || x.numel() == 0 || x.ndim() == 0)
    throw ShapeError("softmax_lastdim: empty tensor");
  const std::size_t d = x.dim(x.ndim() - 1);
  const std::size_t rows = x.numel() / d;
  Tensor<T> out = Tensor<T>::zeros(x.shape());
  const T* px = x.data().data();
  T* po = out.data().data();
  for (std::size_t r = 0; r < rows; ++r) {
    const T* xr = px + r * d;
    T* yr = po + r * d;
    T mx = xr[0];
    for (std::size_t j = 1; j < d; ++j) mx = std::max(mx, xr[j]);
    T sum = T(0);
    for (std::size_t j = 0; j < d; ++j) {
      yr[j] = std::exp(xr[j] - mx);
      sum += yr[j];
    }
    const T inv = T(1) / sum;
    for (std::size_t j = 0; j < d; ++j) yr[j] *= inv;
  }
  if (detail::want_grad(tape, x)) {
    out.mark_output(*tape);
    tape->record([x, out, rows, d]() {
      if (!out.has_grad()) return;
      auto g = out.grad();
      const T* y = out.data().data();
      T* gx = x.grad_buffer().data();
      for (std::size_t r = 0; r < rows; ++r) {
        const T* yr = y + r * d;
        const T* gr = g.data() + r * d;
        T dot = T(0);
        for (std::size_t j = 0; j < d; ++j) dot += gr[j] * yr[j];
        T* gxr = gx + r * d;
        for (std::size_t j = 0; j < d; ++j) gxr[j] += yr[j] * (gr[j] - dot);
      }
    });
  }
  return out;
}

template <typename T>
Tensor<T> layer_norm(const Tensor<T>& x, const Tensor<T>& gain,
                     const Tensor<T>& bias, T eps, Tape<T>* tape = nullptr) {
  if (eps <= T(0)) throw ParameterError("layer_norm: eps must be > 0");
  const std::size_t d = x.dim(x.ndim() - 1);
  if (gain.ndim() != 1 || gain.dim(0) != d || bias.ndim() != 1 ||
      bias.dim(0) != d)
    throw ShapeError("layer_norm: gain/bias must match last dim of " +
                     shape_str(x.shape()));
  const std::size_t rows = x.numel() / d;
  Tensor<T> out = Tensor<T>::zeros(x.shape());
  // Saved for backward: per-row inverse stddev and the normalized rows.
  auto inv_std = std::make_shared<std::vector<T>>(rows);
  auto xhat = std::make_shared<std::vector<T>>(x.numel());
  const T* px = x.data().data();
  const T* pg = gain.data().data();
  const T* pb = bias.data().data();
  T* po = out.data().data();
  for (std::size_t r = 0; r < rows; ++r) {
    const T* xr = px + r * d;
    T mean = T(0);
    for (std::size_t j = 0; j < d; ++j) mean += xr[j];
    mean /= T(d);
    T var = T(0);
    for (std::size_t j = 0; j < d; ++j) {
      const T c = xr[j] - mean;
      var += c * c;
    }
    var /= T(d);
    const T istd = T(1) / std::sqrt(var + eps);
    (*inv_std)[r] = istd;
    T* hr = xhat->data() + r * d;
    T* yr = po + r * d;
    for (std::size_t j = 0; j < d; ++j) {
      hr[j] = (xr[j] - mean) * istd;
      yr[j] = pg[j] * hr[j] + pb[j];
    }
  }
  if (detail::want_grad(tape, x, gain, bias)) {
    out.mark_output(*tape);
    tape->record([x, gain, bias, out, inv_std, xhat, rows, d]() {
      if (!out.has_grad()) return;
      auto g = out.grad();
      const T* pg = gain.data().data();
      if (gain.requires_grad()) {
        auto buf = gain.grad_buffer();
        for (std::size_t r = 0; r < rows; ++r)
          for (std::size_t j = 0; j < d; ++j)
            buf[j] += g[r * d + j] * (*xhat)[r * d + j];
      }
      if (bias.requires_grad()) {
        auto buf = bias.grad_buffer();
        for (std::size_t r = 0; r < rows; ++r)
          for (std::size_t j = 0; j < d; ++j) buf[j] += g[r * d + j];
      }
      if (x.requires_grad()) {
        T* gx = x.grad_buffer().data();
        for (std::size_t r = 0; r < rows; ++r) {
          const T* gr = g.data() + r * d;
          const T* hr = xhat->data() + r * d;
          T sum_gy = T(0), sum_gyh = T(0);
          for (std::size_t j = 0; j < d; ++j) {
            const T gy = gr[j] * pg[j];
            sum_gy += gy;
            sum_gyh += gy * hr[j];
          }
          const T istd = (*inv_std)[r];
          const T inv_d = T(1) / T(d);
          T* gxr = gx + r * d;
          for (std::size_t j = 0; j < d; ++j) {
            const T gy = gr[j] * pg[j];
            gxr[j] += istd * (gy - inv_d * sum_gy - hr[j] * inv_d * sum_gyh);
          }
        }
      }
    });
  }
  return out;
}

// Inverted dropout: survivors scaled by 1/(1-p) at train time, identity at
// inference. The mask is a pure function of (numel, p, seed).
template <typename T>
Tensor<T> dropout(const Tensor<T>& x, T p, std::uint64_t seed, bool training,
                  Tape<T>* tape = nullptr) {
  if (p < T(0) || p >= T(1))
    throw ParameterError("dropout: rate must satisfy 0 <= p < 1, got " +
                         std::to_string(static_cast<double>(p)));
  if (!training || p == T(0)) return x;
  Tensor<T> out = Tensor<T>::zeros(x.shape());
  auto keep = std::make_shared<std::vector<T>>(x.numel());
  auto rng = make_rng(seed);
  std::uniform_real_distribution<T> unif(T(0), T(1));
  const T inv_keep = T(1) / (T(1) - p);
  const T* px = x.data().data();
  T* po = out.data().data();
  for (std::size_t i = 0; i < x.numel(); ++i) {
    const T m = unif(rng) < p ? T(0) : inv_keep;
    (*keep)[i] = m;
    po[i] = px[i] * m;
  }
  if (detail::want_grad(tape, x)) {
    out.mark_output(*tape);
    tape->record([x, out, keep]() {
      if (!out.has_grad()) return;
      auto g = out.grad();
      auto buf = x.grad_buffer();
      for (std::size_t i = 0; i < g.size(); ++i) buf[i] += g[i] * (*keep)[i];
    });
  }
  return out;
}

template <typename T>
Tensor<T> gelu(const Tensor<T>& x, Tape<T>* tape = nullptr) {
  Tensor<T> out = Tensor<T>::zeros(x.shape());
  const T* px = x.data().data();
  T* po = out.data().data();
  const T inv_sqrt2 = T(1) / std::sqrt(T(2));
  for (std::size_t i = 0; i < x.numel(); ++i) {
    const T cdf = T(0.5) * (T(1) + std::erf(px[i] * inv_sqrt2));
    po[i] = px[i] * cdf;
  }
  if (detail::want_grad(tape, x)) {
    out.mark_output(*tape);
    tape->record([x, out, inv_sqrt2]() {
      if (!out.has_grad()) return;
      auto g = out.grad();
      auto buf = x.grad_buffer();
      const T* px2 = x.data().data();
      const T inv_sqrt2pi = T(1) / std::sqrt(T(2) * T(M_PI));
      for (std::size_t i = 0; i < g.size(); ++i) {
        const T xi = px2[i];
        const T cdf = T(0.5) * (T(1) + std::erf(xi * inv_sqrt2));
        const T pdf = std::exp(T(-0.5) * xi * xi) * inv_sqrt2pi;
        buf[i] += g[i] * (cdf + xi * pdf);
      }
    });
  }
  return out;
}

// Unit-normalizes each slice along the last dimension.
template <typename T>
Tensor<T> l2_normalize(const Tensor<T>& x, Tape<T>* tape = nullptr) {
  const std::size_t d = x.dim(x.ndim() - 1);
  const std::size_t rows = x.numel() / d;
  Tensor<T> out = Tensor<T>::zeros(x.shape());
  auto inv_norm = std::make_shared<std::vector<T>>(rows);
  const T* px = x.data().data();
  T* po = out.data().data();
  for (std::size_t r = 0; r < rows; ++r) {
    const T* xr = px + r * d;
    T sq = T(0);
    for (std::size_t j = 0; j < d; ++j) sq += xr[j] * xr[j];
    const T n = std::sqrt(sq);
    if (n == T(0))
      throw DegenerateInputError("l2_normalize: zero-norm row " +
                                 std::to_string(r));
    const T inv = T(1) / n;
    (*inv_norm)[r] = inv;
    for (std::size_t j = 0; j < d; ++j) po[r * d + j] = xr[j] * inv;
  }
  if (detail::want_grad(tape, x)) {
    out.mark_output(*tape);
    tape->record([x, out, inv_norm, rows, d]() {
      if (!out.has_grad()) return;
      auto g = out.grad();
      const T* y = out.data().data();
      T* gx = x.grad_buffer().data();
      for (std::size_t r = 0; r < rows; ++r) {
        const T* yr = y + r * d;
        const T* gr = g.data() + r * d;
        T dot = T(0);
        for (std::size_t j = 0; j < d; ++j) dot += gr[j] * yr[j];
        const T inv = (*inv_norm)[r];
        T* gxr = gx + r * d;
        for (std::size_t j = 0; j < d; ++j)
          gxr[j] += inv * (gr[j] - yr[j] * dot);
      }
    });
  }
  return out;
}

// ---------------------------------------------------------------------------
// Masking, pooling, lookup
// ---------------------------------------------------------------------------

// Adds a large negative bias to score columns whose key is masked out.
// scores(B, ..., Tk), mask(B, Tk). Rows with no unmasked key are rejected.
template <typename T>
Tensor<T> apply_key_mask(const Tensor<T>& scores, const BoolMask& mask,
                         Tape<T>* tape = nullptr) {
  const std::size_t tk = scores.dim(scores.ndim() - 1);
  if (mask.cols != tk || scores.ndim() < 2 || scores.dim(0) != mask.rows)
    throw ShapeError("apply_key_mask: scores " + shape_str(scores.shape()) +
                     " vs mask [" + std::to_string(mask.rows) + "x" +
                     std::to_string(mask.cols) + "]");
  for (std::size_t b = 0; b < mask.rows; ++b)
    if (mask.row_count(b) == 0)
      throw DegenerateInputError("apply_key_mask: all keys masked in row " +
                                 std::to_string(b));
  const std::size_t rows = scores.numel() / tk;
  const std::size_t group = rows / mask.rows;  // score rows per batch entry
  Tensor<T> out = Tensor<T>::zeros(scores.shape());
  const T neg = T(-1e30);
  const T* ps = scores.data().data();
  T* po = out.data().data();
  for (std::size_t r = 0; r < rows; ++r) {
    const std::size_t b = r / group;
    for (std::size_t j = 0; j < tk; ++j)
      po[r * tk + j] = mask.at(b, j) ? ps[r * tk + j] : ps[r * tk + j] + neg;
  }
  if (detail::want_grad(tape, scores)) {
    out.mark_output(*tape);
    tape->record([scores, out]() {
      if (!out.has_grad()) return;
      scores.accumulate_grad(out.grad());
    });
  }
  return out;
}

// Mean of unmasked rows: x(B, T, d), mask(B, T) -> (B, d).
template <typename T>
Tensor<T> masked_mean_rows(const Tensor<T>& x, const BoolMask& mask,
                           Tape<T>* tape = nullptr) {
  if (x.ndim() != 3 || x.dim(0) != mask.rows || x.dim(1) != mask.cols)
    throw ShapeError("masked_mean_rows: " + shape_str(x.shape()) + " vs mask [" +
                     std::to_string(mask.rows) + "x" +
                     std::to_string(mask.cols) + "]");
  const std::size_t b = x.dim(0), t = x.dim(1), d = x.dim(2);
  for (std::size_t i = 0; i < b; ++i)
    if (mask.row_count(i) == 0)
      throw DegenerateInputError("masked_mean_rows: empty mask in row " +
                                 std::to_string(i));
  Tensor<T> out = Tensor<T>::zeros({b, d});
  const T* px = x.data().data();
  T* po = out.data().data();
  for (std::size_t i = 0; i < b; ++i) {
    const T inv = T(1) / T(mask.row_count(i));
    for (std::size_t j = 0; j < t; ++j) {
      if (!mask.at(i, j)) continue;
      const T* xr = px + (i * t + j) * d;
      T* yr = po + i * d;
      for (std::size_t k = 0; k < d; ++k) yr[k] += xr[k] * inv;
    }
  }
  if (detail::want_grad(tape, x)) {
    out.mark_output(*tape);
    tape->record([x, out, mask, b, t, d]() {
      if (!out.has_grad()) return;
      auto g = out.grad();
      T* gx = x.grad_buffer().data();
      for (std::size_t i = 0; i < b; ++i) {
        const T inv = T(1) / T(mask.row_count(i));
        for (std::size_t j = 0; j < t; ++j) {
          if (!mask.at(i, j)) continue;
          T* gr = gx + (i * t + j) * d;
          const T* go = g.data() + i * d;
          for (std::size_t k = 0; k < d; ++k) gr[k] += go[k] * inv;
        }
      }
    });
  }
  return out;
}

// table(V, d) gathered by ids(B*T) -> (B, T, d).
template <typename T>
Tensor<T> embedding(const Tensor<T>& table, const std::vector<std::int32_t>& ids,
                    std::size_t batch, std::size_t seq,
                    Tape<T>* tape = nullptr) {
  if (table.ndim() != 2)
    throw ShapeError("embedding: table must be 2-D, got " +
                     shape_str(table.shape()));
  if (ids.size() != batch * seq)
    throw ShapeError("embedding: id count does not match batch*seq");
  const std::size_t v = table.dim(0), d = table.dim(1);
  for (std::size_t i = 0; i < ids.size(); ++i)
    if (ids[i] < 0 || static_cast<std::size_t>(ids[i]) >= v)
      throw InputError("embedding: token id " + std::to_string(ids[i]) +
                       " out of range [0, " + std::to_string(v) + ")");
  Tensor<T> out = Tensor<T>::zeros({batch, seq, d});
  const T* pt = table.data().data();
  T* po = out.data().data();
  for (std::size_t i = 0; i < ids.size(); ++i)
    std::copy_n(pt + static_cast<std::size_t>(ids[i]) * d, d, po + i * d);
  if (detail::want_grad(tape, table)) {
    out.mark_output(*tape);
    auto ids_copy = std::make_shared<std::vector<std::int32_t>>(ids);
    tape->record([table, out, ids_copy, d]() {
      if (!out.has_grad()) return;
      auto g = out.grad();
      T* gt = table.grad_buffer().data();
      for (std::size_t i = 0; i < ids_copy->size(); ++i) {
        const T* gr = g.data() + i * d;
        T* tr = gt + static_cast<std::size_t>((*ids_copy)[i]) * d;
        for (std::size_t k = 0; k < d; ++k) tr[k] += gr[k];
      }
    });
  }
  return out;
}

// ---------------------------------------------------------------------------
// Shape moves
// ---------------------------------------------------------------------------

template <typename T>
Tensor<T> reshape(const Tensor<T>& x, Shape new_shape, Tape<T>* tape = nullptr) {
  if (shape_numel(new_shape) != x.numel())
    throw ShapeError("reshape: cannot view " + shape_str(x.shape()) + " as " +
                     shape_str(new_shape));
  Tensor<T> out = Tensor<T>::from(std::move(new_shape),
                                  std::vector<T>(x.data().begin(),
                                                 x.data().end()));
  if (detail::want_grad(tape, x)) {
    out.mark_output(*tape);
    tape->record([x, out]() {
      if (!out.has_grad()) return;
      x.accumulate_grad(out.grad());
    });
  }
  return out;
}

// x(B, T, H*hd) -> (B, H, T, hd)
template <typename T>
Tensor<T> split_heads(const Tensor<T>& x, std::size_t heads,
                      Tape<T>* tape = nullptr) {
  if (x.ndim() != 3 || x.dim(2) % heads != 0)
    throw ShapeError("split_heads: " + shape_str(x.shape()) + " with " +
                     std::to_string(heads) + " heads");
  const std::size_t b = x.dim(0), t = x.dim(1), d = x.dim(2), hd = d / heads;
  Tensor<T> out = Tensor<T>::zeros({b, heads, t, hd});
  const T* px = x.data().data();
  T* po = out.data().data();
  for (std::size_t i = 0; i < b; ++i)
    for (std::size_t j = 0; j < t; ++j)
      for (std::size_t h = 0; h < heads; ++h)
        std::copy_n(px + (i * t + j) * d + h * hd, hd,
                    po + ((i * heads + h) * t + j) * hd);
  if (detail::want_grad(tape, x)) {
    out.mark_output(*tape);
    tape->record([x, out, b, t, d, hd, heads]() {
      if (!out.has_grad()) return;
      auto g = out.grad();
      T* gx = x.grad_buffer().data();
      for (std::size_t i = 0; i < b; ++i)
        for (std::size_t j = 0; j < t; ++j)
          for (std::size_t h = 0; h < heads; ++h) {
            const T* gr = g.data() + ((i * heads + h) * t + j) * hd;
            T* xr = gx + (i * t + j) * d + h * hd;
            for (std::size_t k = 0; k < hd; ++k) xr[k] += gr[k];
          }
    });
  }
  return out;
}

// x(B, H, T, hd) -> (B, T, H*hd)
template <typename T>
Tensor<T> merge_heads(const Tensor<T>& x, Tape<T>* tape = nullptr) {
  if (x.ndim() != 4)
    throw ShapeError("merge_heads: expected 4-D input, got " +
                     shape_str(x.shape()));
  const std::size_t b = x.dim(0), heads = x.dim(1), t = x.dim(2),
                    hd = x.dim(3);
  const std::size_t d = heads * hd;
  Tensor<T> out = Tensor<T>::zeros({b, t, d});
  const T* px = x.data().data();
  T* po = out.data().data();
  for (std::size_t i = 0; i < b; ++i)
    for (std::size_t h = 0; h < heads; ++h)
      for (std::size_t j = 0; j < t; ++j)
        std::copy_n(px + ((i * heads + h) * t + j) * hd, hd,
                    po + (i * t + j) * d + h * hd);
  if (detail::want_grad(tape, x)) {
    out.mark_output(*tape);
    tape->record([x, out, b, t, d, hd, heads]() {
      if (!out.has_grad()) return;
      auto g = out.grad();
      T* gx = x.grad_buffer().data();
      for (std::size_t i = 0; i < b; ++i)
        for (std::size_t h = 0; h < heads; ++h)
          for (std::size_t j = 0; j < t; ++j) {
            const T* gr = g.data() + (i * t + j) * d + h * hd;
            T* xr = gx + ((i * heads + h) * t + j) * hd;
            for (std::size_t k = 0; k < hd; ++k) xr[k] += gr[k];
          }
    });
  }
  return out;
}

// Concatenates along the last dimension; leading dims must match.
template <typename T>
Tensor<T> concat_lastdim(const Tensor<T>& a, const Tensor<T>& b,
                         Tape<T>* tape = nullptr) {
  if (a.ndim() != b.ndim() || a.ndim() < 1)
    throw ShapeError("concat_lastdim: rank mismatch: " + shape_str(a.shape()) +
                     " vs " + shape_str(b.shape()));
  for (std::size_t i = 0; i + 1 < a.ndim(); ++i)
    if (a.dim(i) != b.dim(i))
      throw ShapeError("concat_lastdim: leading dims differ: " +
                       shape_str(a.shape()) + " vs " + shape_str(b.shape()));
  const std::size_t da = a.dim(a.ndim() - 1), db = b.dim(b.ndim() - 1);
  const std::size_t rows = a.numel() / da;
  Shape out_shape = a.shape();
  out_shape.back() = da + db;
  Tensor<T> out = Tensor<T>::zeros(out_shape);
  const T* pa = a.data().data();
  const T* pb = b.data().data();
  T* po = out.data().data();
  for (std::size_t r = 0; r < rows; ++r) {
    std::copy_n(pa + r * da, da, po + r * (da + db));
    std::copy_n(pb + r * db, db, po + r * (da + db) + da);
  }
  if (detail::want_grad(tape, a, b)) {
    out.mark_output(*tape);
    tape->record([a, b, out, rows, da, db]() {
      if (!out.has_grad()) return;
      auto g = out.grad();
      if (a.requires_grad()) {
        T* ga = a.grad_buffer().data();
        for (std::size_t r = 0; r < rows; ++r)
          for (std::size_t j = 0; j < da; ++j)
            ga[r * da + j] += g[r * (da + db) + j];
      }
      if (b.requires_grad()) {
        T* gb = b.grad_buffer().data();
        for (std::size_t r = 0; r < rows; ++r)
          for (std::size_t j = 0; j < db; ++j)
            gb[r * db + j] += g[r * (da + db) + da + j];
      }
    });
  }
  return out;
}

// ---------------------------------------------------------------------------
// Reductions
// ---------------------------------------------------------------------------

// log(sum(exp(x))) along the last dim, max-stabilized; (..., n) -> (...).
template <typename T>
Tensor<T> logsumexp_lastdim(const Tensor<T>& x, Tape<T>* tape = nullptr) {
  if (x.ndim() < 1) throw ShapeError("logsumexp_lastdim: empty shape");
  const std::size_t d = x.dim(x.ndim() - 1);
  const std::size_t rows = x.numel() / d;
  Shape out_shape(x.shape().begin(), x.shape().end() - 1);
  if (out_shape.empty()) out_shape = {1};
  Tensor<T> out = Tensor<T>::zeros(out_shape);
  auto probs = std::make_shared<std::vector<T>>(x.numel());
  const T* px = x.data().data();
  T* po = out.data().data();
  for (std::size_t r = 0; r < rows; ++r) {
    const T* xr = px + r * d;
    T mx = xr[0];
    for (std::size_t j = 1; j < d; ++j) mx = std::max(mx, xr[j]);
    T sum = T(0);
    for (std::size_t j = 0; j < d; ++j) {
      const T e = std::exp(xr[j] - mx);
      (*probs)[r * d + j] = e;
      sum += e;
    }
    po[r] = mx + std::log(sum);
    const T inv = T(1) / sum;
    for (std::size_t j = 0; j < d; ++j) (*probs)[r * d + j] *= inv;
  }
  if (detail::want_grad(tape, x)) {
    out.mark_output(*tape);
    tape->record([x, out, probs, rows, d]() {
      if (!out.has_grad()) return;
      auto g = out.grad();
      T* gx = x.grad_buffer().data();
      for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t j = 0; j < d; ++j)
          gx[r * d + j] += g[r] * (*probs)[r * d + j];
    });
  }
  return out;
}

// Per-row dot product: a(B, d), b(B, d) -> (B).
template <typename T>
Tensor<T> rowwise_dot(const Tensor<T>& a, const Tensor<T>& b,
                      Tape<T>* tape = nullptr) {
  if (a.shape() != b.shape() || a.ndim() != 2)
    throw ShapeError("rowwise_dot: need matching 2-D shapes: " +
                     shape_str(a.shape()) + " vs " + shape_str(b.shape()));
  const std::size_t rows = a.dim(0), d = a.dim(1);
  Tensor<T> out = Tensor<T>::zeros({rows});
  const T* pa = a.data().data();
  const T* pb = b.data().data();
  T* po = out.data().data();
  for (std::size_t r = 0; r < rows; ++r) {
    T acc = T(0);
    for (std::size_t j = 0; j < d; ++j) acc += pa[r * d + j] * pb[r * d + j];
    po[r] = acc;
  }
  if (detail::want_grad(tape, a, b)) {
    out.mark_output(*tape);
    tape->record([a, b, out, rows, d]() {
      if (!out.has_grad()) return;
      auto g = out.grad();
      if (a.requires_grad()) {
        T* ga = a.grad_buffer().data();
        const T* pb2 = b.data().data();
        for (std::size_t r = 0; r < rows; ++r)
          for (std::size_t j = 0; j < d; ++j)
            ga[r * d + j] += g[r] * pb2[r * d + j];
      }
      if (b.requires_grad()) {
        T* gb = b.grad_buffer().data();
        const T* pa2 = a.data().data();
        for (std::size_t r = 0; r < rows; ++r)
          for (std::size_t j = 0; j < d; ++j)
            gb[r * d + j] += g[r] * pa2[r * d + j];
      }
    });
  }
  return out;
}

template <typename T>
Tensor<T> sum_all(const Tensor<T>& x, Tape<T>* tape = nullptr) {
  Tensor<T> out = Tensor<T>::zeros({1});
  const T* px = x.data().data();
  T acc = T(0);
  for (std::size_t i = 0; i < x.numel(); ++i) acc += px[i];
  out.data()[0] = acc;
  if (detail::want_grad(tape, x)) {
    out.mark_output(*tape);
    tape->record([x, out]() {
      if (!out.has_grad()) return;
      const T g = out.grad()[0];
      auto buf = x.grad_buffer();
      for (std::size_t i = 0; i < buf.size(); ++i) buf[i] += g;
    });
  }
  return out;
}

template <typename T>
Tensor<T> mean_all(const Tensor<T>& x, Tape<T>* tape = nullptr) {
  return scale(sum_all(x, tape), T(1) / T(x.numel()), tape);
}

// ---------------------------------------------------------------------------
// Non-differentiable vector utilities
// ---------------------------------------------------------------------------

template <typename T>
T l2_norm(std::span<const T> v) {
  T sq = T(0);
  for (T x : v) sq += x * x;
  return std::sqrt(sq);
}

// a.b / (|a||b|); symmetric and invariant to positive rescaling.
template <typename T>
T cosine_similarity(std::span<const T> a, std::span<const T> b) {
  if (a.size() != b.size())
    throw ShapeError("cosine_similarity: dimension mismatch: " +
                     std::to_string(a.size()) + " vs " +
                     std::to_string(b.size()));
  T dot = T(0), na = T(0), nb = T(0);
  for (std::size_t i = 0; i < a.size(); ++i) {
    dot += a[i] * b[i];
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  if (na == T(0) || nb == T(0))
    throw DegenerateInputError("cosine_similarity: zero vector");
  return dot / (std::sqrt(na) * std::sqrt(nb));
}

template <typename T>
bool all_finite(const Tensor<T>& x) {
  for (T v : x.data())
    if (!std::isfinite(v)) return false;
  return true;
}

}  // namespace ptc
