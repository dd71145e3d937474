#pragma once

#include <cmath>
#include <string>
#include <utility>
#include <vector>

#include "ptc/tensor.hpp"

namespace ptc {

// A learnable tensor with a stable name. Parameter groups are flat ordered
// lists of these so momentum mirroring, optimization and checkpointing all
// walk the same enumeration.
template <typename T = double>
struct NamedTensor {
  std::string name;
  Tensor<T> tensor;
};

template <typename T = double>
using ParamList = std::vector<NamedTensor<T>>;

template <typename T>
void zero_all_grads(const ParamList<T>& params) {
  for (const auto& p : params) p.tensor.zero_grad();
}

template <typename T>
T global_grad_norm(const ParamList<T>& params) {
  T sq = T(0);
  for (const auto& p : params) {
    if (!p.tensor.has_grad()) continue;
    for (T g : p.tensor.grad()) sq += g * g;
  }
  return std::sqrt(sq);
}

template <typename T>
bool any_has_grad(const ParamList<T>& params) {
  for (const auto& p : params)
    if (p.tensor.has_grad()) return true;
  return false;
}

}  // namespace ptc
