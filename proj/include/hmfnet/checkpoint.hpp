#pragma once

// Flat binary checkpoint: magic "HMFN1", then one record per parameter in
// name order: u32 name length, name bytes, u32 shape rank, u64 dims,
// little-endian float64 payload. A JSON sidecar written next to the binary
// carries the model configuration and vocabularies.

#include <cstdint>
#include <cstring>
#include <fstream>
#include <stdexcept>
#include <string>

#include "hmfnet/params.hpp"

namespace hmfnet {

struct CheckpointError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

inline constexpr char kCheckpointMagic[5] = {'H', 'M', 'F', 'N', '1'};

namespace ckpt_detail {

template <typename T>
void write_raw(std::ostream &out, T value) {
  out.write(reinterpret_cast<const char *>(&value), sizeof(T));
}

template <typename T>
T read_raw(std::istream &in) {
  T value{};
  in.read(reinterpret_cast<char *>(&value), sizeof(T));
  if (!in)
    throw CheckpointError("truncated checkpoint");
  return value;
}

} // namespace ckpt_detail

inline void save_checkpoint(const ParamStore &store, std::ostream &out) {
  out.write(kCheckpointMagic, sizeof(kCheckpointMagic));
  for (const auto &[name, tensor] : store) {
    ckpt_detail::write_raw<std::uint32_t>(
        out, static_cast<std::uint32_t>(name.size()));
    out.write(name.data(), static_cast<std::streamsize>(name.size()));
    ckpt_detail::write_raw<std::uint32_t>(
        out, static_cast<std::uint32_t>(tensor.shape.size()));
    for (std::size_t d : tensor.shape)
      ckpt_detail::write_raw<std::uint64_t>(out,
                                            static_cast<std::uint64_t>(d));
    for (double v : tensor.data)
      ckpt_detail::write_raw<double>(out, v);
  }
}

inline void save_checkpoint(const ParamStore &store, const std::string &path) {
  std::ofstream out(path, std::ios::binary);
  if (!out)
    throw CheckpointError("cannot write " + path);
  save_checkpoint(store, out);
}

inline ParamStore load_checkpoint(std::istream &in) {
  char magic[5];
  in.read(magic, 5);
  if (!in || std::memcmp(magic, kCheckpointMagic, 5) != 0)
    throw CheckpointError("bad checkpoint magic");
  ParamStore store;
  while (true) {
    std::uint32_t name_len;
    in.read(reinterpret_cast<char *>(&name_len), sizeof(name_len));
    if (in.eof())
      break;
    if (!in)
      throw CheckpointError("truncated checkpoint");
    std::string name(name_len, '\0');
    in.read(name.data(), name_len);
    std::uint32_t rank = ckpt_detail::read_raw<std::uint32_t>(in);
    std::vector<std::size_t> shape(rank);
    for (auto &d : shape)
      d = static_cast<std::size_t>(ckpt_detail::read_raw<std::uint64_t>(in));
    Tensor t(shape);
    for (double &v : t.data)
      v = ckpt_detail::read_raw<double>(in);
    store.put(name, std::move(t));
  }
  return store;
}

inline ParamStore load_checkpoint(const std::string &path) {
  std::ifstream in(path, std::ios::binary);
  if (!in)
    throw CheckpointError("cannot open " + path);
  return load_checkpoint(in);
}

} // namespace hmfnet
