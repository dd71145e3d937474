#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "ptc/error.hpp"
#include "ptc/tensor.hpp"

namespace ptc {

// Fixed-capacity FIFO of L2-normalized embedding vectors. Once full, each
// insertion evicts exactly the oldest entry. Stored values are plain numbers;
// nothing here ever participates in a tape.
template <typename T = double>
class EmbeddingQueue {
 public:
  EmbeddingQueue(std::size_t capacity, std::size_t dim)
      : capacity_(capacity), dim_(dim), data_(capacity * dim, T(0)) {
    if (capacity == 0) throw ParameterError("queue: capacity must be > 0");
    if (dim == 0) throw ParameterError("queue: dim must be > 0");
  }

  std::size_t capacity() const { return capacity_; }
  std::size_t dim() const { return dim_; }
  std::size_t size() const { return count_; }
  bool empty() const { return count_ == 0; }

  void push(std::span<const T> v) {
    if (v.size() != dim_)
      throw ShapeError("queue: vector length " + std::to_string(v.size()) +
                       " does not match dim " + std::to_string(dim_));
    T sq = T(0);
    for (T x : v) sq += x * x;
    if (std::abs(std::sqrt(sq) - T(1)) > T(1e-6))
      throw ContractError("queue: vector norm " +
                          std::to_string(static_cast<double>(std::sqrt(sq))) +
                          " is not unit");
    std::copy(v.begin(), v.end(), data_.begin() + head_ * dim_);
    head_ = (head_ + 1) % capacity_;
    if (count_ < capacity_) ++count_;
  }

  // Oldest-first snapshot as a size x dim tensor.
  Tensor<T> as_tensor() const {
    if (count_ == 0) throw ContractError("queue: snapshot of empty queue");
    Tensor<T> out = Tensor<T>::zeros({count_, dim_});
    T* po = out.data().data();
    for (std::size_t i = 0; i < count_; ++i) {
      const std::size_t slot = slot_of(i);
      std::copy(data_.begin() + slot * dim_, data_.begin() + (slot + 1) * dim_,
                po + i * dim_);
    }
    return out;
  }

  std::vector<std::vector<T>> contents() const {
    std::vector<std::vector<T>> out;
    out.reserve(count_);
    for (std::size_t i = 0; i < count_; ++i) {
      const std::size_t slot = slot_of(i);
      out.emplace_back(data_.begin() + slot * dim_,
                       data_.begin() + (slot + 1) * dim_);
    }
    return out;
  }

 private:
  // slot of the i-th oldest entry
  std::size_t slot_of(std::size_t i) const {
    const std::size_t oldest = count_ < capacity_ ? 0 : head_;
    return (oldest + i) % capacity_;
  }

  std::size_t capacity_;
  std::size_t dim_;
  std::vector<T> data_;
  std::size_t head_ = 0;
  std::size_t count_ = 0;
};

// Inserts the rows of a B x d matrix in batch order.
template <typename T>
void enqueue_batch(EmbeddingQueue<T>& queue, const Tensor<T>& embeddings) {
  if (embeddings.ndim() != 2 || embeddings.dim(1) != queue.dim())
    throw ShapeError("enqueue_batch: embeddings " +
                     shape_str(embeddings.shape()) + " vs queue dim " +
                     std::to_string(queue.dim()));
  const std::size_t b = embeddings.dim(0), d = queue.dim();
  auto data = embeddings.data();
  for (std::size_t r = 0; r < b; ++r) queue.push(data.subspan(r * d, d));
}

}  // namespace ptc
