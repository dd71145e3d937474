#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include "ptc/error.hpp"
#include "ptc/params.hpp"
#include "ptc/rng.hpp"
#include "ptc/tensor.hpp"

namespace ptc {

template <typename T = double>
struct GradCheckReport {
  bool pass = false;
  T max_rel_error = T(0);
  std::string worst_param;
  std::size_t worst_index = 0;
  T analytic_at_worst = T(0);
  T numeric_at_worst = T(0);
  std::size_t entries_checked = 0;
};

// Compares analytic gradients against central differences.
//
// `forward` must rebuild the scalar loss from the current parameter values on
// every call; with a null tape it runs detached (used for the finite-difference
// probes). Per tensor, all entries are checked when the tensor is small,
// otherwise a uniform random subsample of `subsample` entries.
//
// Relative error uses max(|analytic|, |numeric|, denom_floor) as denominator;
// entries smaller than the floor are in effect compared absolutely at
// tol*denom_floor, which keeps finite-difference roundoff (about 1e-11 for
// unit-scale losses at h=1e-5) from flagging near-zero gradients.
template <typename T = double>
GradCheckReport<T> grad_check(const std::function<Tensor<T>(Tape<T>*)>& forward,
                              const ParamList<T>& params, T h, T tol,
                              std::size_t subsample = 200,
                              std::uint64_t seed = 0,
                              T denom_floor = T(1e-5)) {
  if (h <= T(0)) throw ParameterError("grad_check: step h must be > 0");
  if (params.empty()) throw ParameterError("grad_check: empty parameter list");

  // Determinism gate: two detached evaluations must agree bit for bit.
  const T base1 = forward(nullptr).item();
  const T base2 = forward(nullptr).item();
  if (base1 != base2)
    throw ContractError("grad_check: forward closure is not deterministic");

  zero_all_grads(params);
  Tape<T> tape;
  Tensor<T> loss = forward(&tape);
  tape.backward(loss);

  std::vector<std::vector<T>> analytic(params.size());
  for (std::size_t pi = 0; pi < params.size(); ++pi) {
    const auto& t = params[pi].tensor;
    analytic[pi].assign(t.numel(), T(0));
    if (t.has_grad()) {
      auto g = t.grad();
      std::copy(g.begin(), g.end(), analytic[pi].begin());
    }
  }

  GradCheckReport<T> report;
  for (std::size_t pi = 0; pi < params.size(); ++pi) {
    auto& tensor = params[pi].tensor;
    const std::size_t n = tensor.numel();
    std::vector<std::size_t> indices;
    if (n <= subsample) {
      indices.resize(n);
      std::iota(indices.begin(), indices.end(), std::size_t{0});
    } else {
      std::vector<std::size_t> all(n);
      std::iota(all.begin(), all.end(), std::size_t{0});
      auto rng = make_rng(mix_seed(seed, "grad_check", pi));
      std::sample(all.begin(), all.end(), std::back_inserter(indices),
                  subsample, rng);
    }
    auto data = const_cast<Tensor<T>&>(tensor).data();
    for (std::size_t idx : indices) {
      const T original = data[idx];
      data[idx] = original + h;
      const T f_plus = forward(nullptr).item();
      data[idx] = original - h;
      const T f_minus = forward(nullptr).item();
      data[idx] = original;
      const T numeric = (f_plus - f_minus) / (T(2) * h);
      const T a = analytic[pi][idx];
      const T denom = std::max({std::abs(a), std::abs(numeric), denom_floor});
      const T rel = std::abs(a - numeric) / denom;
      ++report.entries_checked;
      if (rel > report.max_rel_error) {
        report.max_rel_error = rel;
        report.worst_param = params[pi].name;
        report.worst_index = idx;
        report.analytic_at_worst = a;
        report.numeric_at_worst = numeric;
      }
    }
  }
  report.pass = report.max_rel_error <= tol;
  return report;
}

}  // namespace ptc
