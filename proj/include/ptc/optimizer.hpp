#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "ptc/error.hpp"
#include "ptc/params.hpp"

namespace ptc {

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;

  void validate() const {
    if (lr <= 0) throw ParameterError("adam: lr must be > 0");
    if (beta1 < 0 || beta1 >= 1 || beta2 < 0 || beta2 >= 1)
      throw ParameterError("adam: betas must lie in [0, 1)");
    if (eps <= 0) throw ParameterError("adam: eps must be > 0");
  }
};

// Adam with bias correction. Parameters without a gradient this step are
// treated as having zero gradient (their moments still decay).
template <typename T = double>
class Adam {
 public:
  Adam(ParamList<T> params, AdamConfig cfg)
      : params_(std::move(params)), cfg_(cfg) {
    cfg_.validate();
    if (params_.empty()) throw ParameterError("adam: empty parameter list");
    m_.reserve(params_.size());
    v_.reserve(params_.size());
    for (const auto& p : params_) {
      m_.emplace_back(p.tensor.numel(), T(0));
      v_.emplace_back(p.tensor.numel(), T(0));
    }
  }

  std::size_t steps_taken() const { return t_; }
  const AdamConfig& config() const { return cfg_; }

  void step() {
    ++t_;
    const T b1 = T(cfg_.beta1), b2 = T(cfg_.beta2);
    const T corr1 = T(1) - std::pow(b1, T(t_));
    const T corr2 = T(1) - std::pow(b2, T(t_));
    const T lr = T(cfg_.lr), eps = T(cfg_.eps);
    for (std::size_t pi = 0; pi < params_.size(); ++pi) {
      auto& tensor = params_[pi].tensor;
      auto data = const_cast<Tensor<T>&>(tensor).data();
      const bool has = tensor.has_grad();
      std::span<const T> g;
      if (has) g = tensor.grad();
      T* m = m_[pi].data();
      T* v = v_[pi].data();
      for (std::size_t i = 0; i < data.size(); ++i) {
        const T gi = has ? g[i] : T(0);
        m[i] = b1 * m[i] + (T(1) - b1) * gi;
        v[i] = b2 * v[i] + (T(1) - b2) * gi * gi;
        const T mhat = m[i] / corr1;
        const T vhat = v[i] / corr2;
        data[i] -= lr * mhat / (std::sqrt(vhat) + eps);
      }
    }
  }

 private:
  ParamList<T> params_;
  AdamConfig cfg_;
  std::vector<std::vector<T>> m_, v_;
  std::size_t t_ = 0;
};

}  // namespace ptc
