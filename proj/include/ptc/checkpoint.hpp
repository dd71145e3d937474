#pragma once

#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include "ptc/error.hpp"
#include "ptc/params.hpp"
#include "ptc/tensor.hpp"

namespace ptc {

// Self-describing container of named tensors. Layout, little on-disk ceremony:
//   magic "PTCK", u32 version, u64 tensor count, then per tensor:
//   u32 name length, name bytes, u32 dim count, u64 dims, raw f64 values.
// Values are written as the raw 8-byte patterns of the doubles, so a round
// trip is bit-exact.
inline constexpr std::uint32_t kCheckpointVersion = 1;
inline constexpr char kCheckpointMagic[4] = {'P', 'T', 'C', 'K'};

namespace detail {

template <class V>
void write_pod(std::ofstream& out, const V& v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(V));
}

template <class V>
V read_pod(std::ifstream& in, const std::string& path) {
  V v{};
  in.read(reinterpret_cast<char*>(&v), sizeof(V));
  if (!in) throw InputError("checkpoint truncated: " + path);
  return v;
}

}  // namespace detail

template <class T = double>
void save_checkpoint(const std::string& path, const ParamList<T>& params) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw InputError("cannot write checkpoint: " + path);
  out.write(kCheckpointMagic, 4);
  detail::write_pod(out, kCheckpointVersion);
  detail::write_pod(out, static_cast<std::uint64_t>(params.size()));
  for (const auto& p : params) {
    detail::write_pod(out, static_cast<std::uint32_t>(p.name.size()));
    out.write(p.name.data(), static_cast<std::streamsize>(p.name.size()));
    const auto& shape = p.tensor.shape();
    detail::write_pod(out, static_cast<std::uint32_t>(shape.size()));
    for (std::size_t d : shape)
      detail::write_pod(out, static_cast<std::uint64_t>(d));
    std::vector<double> vals(p.tensor.data().begin(), p.tensor.data().end());
    out.write(reinterpret_cast<const char*>(vals.data()),
              static_cast<std::streamsize>(vals.size() * sizeof(double)));
  }
  if (!out) throw InputError("failed while writing checkpoint: " + path);
}

template <class T = double>
std::vector<NamedTensor<T>> load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot read checkpoint: " + path);
  char magic[4] = {};
  in.read(magic, 4);
  if (!in || std::memcmp(magic, kCheckpointMagic, 4) != 0)
    throw InputError("not a checkpoint file: " + path);
  const auto version = detail::read_pod<std::uint32_t>(in, path);
  if (version != kCheckpointVersion)
    throw InputError("unsupported checkpoint version " +
                     std::to_string(version) + ": " + path);
  const auto count = detail::read_pod<std::uint64_t>(in, path);
  std::vector<NamedTensor<T>> out;
  out.reserve(count);
  for (std::uint64_t i = 0; i < count; ++i) {
    const auto name_len = detail::read_pod<std::uint32_t>(in, path);
    std::string name(name_len, '\0');
    in.read(name.data(), name_len);
    if (!in) throw InputError("checkpoint truncated: " + path);
    const auto ndim = detail::read_pod<std::uint32_t>(in, path);
    Shape shape(ndim);
    std::size_t numel = 1;
    for (std::uint32_t d = 0; d < ndim; ++d) {
      shape[d] = static_cast<std::size_t>(
          detail::read_pod<std::uint64_t>(in, path));
      numel *= shape[d];
    }
    std::vector<double> raw(numel);
    in.read(reinterpret_cast<char*>(raw.data()),
            static_cast<std::streamsize>(numel * sizeof(double)));
    if (!in) throw InputError("checkpoint truncated: " + path);
    std::vector<T> vals(raw.begin(), raw.end());
    out.push_back({std::move(name),
                   Tensor<T>::from(std::move(shape), std::move(vals))});
  }
  return out;
}

// Copies stored values into an existing congruent parameter list.
template <class T = double>
void load_checkpoint_into(const std::string& path, const ParamList<T>& params) {
  auto stored = load_checkpoint<T>(path);
  if (stored.size() != params.size())
    throw ContractError("checkpoint holds " + std::to_string(stored.size()) +
                        " tensors, model expects " +
                        std::to_string(params.size()));
  for (std::size_t i = 0; i < stored.size(); ++i) {
    if (stored[i].name != params[i].name)
      throw ContractError("checkpoint tensor " + std::to_string(i) + " is '" +
                          stored[i].name + "', model expects '" +
                          params[i].name + "'");
    if (stored[i].tensor.shape() != params[i].tensor.shape())
      throw ContractError("shape mismatch for '" + stored[i].name + "'");
    Tensor<T> dst = params[i].tensor;  // shares storage
    auto src = stored[i].tensor.data();
    std::copy(src.begin(), src.end(), dst.data().begin());
  }
}

}  // namespace ptc
