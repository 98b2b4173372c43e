#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include "g2s/common.hpp"
#include "g2s/init.hpp"
#include "g2s/schedule.hpp"
#include "g2s/tensor.hpp"
#include "g2s/version.hpp"

namespace g2s {

static_assert(std::endian::native == std::endian::little,
              "checkpoint values are stored little-endian");

struct CheckpointMeta {
  int format_version = kCheckpointFormatVersion;
  std::string config_text;  // resolved model + training configuration
  std::int64_t epoch = 0;   // completed epochs
  LrScheduleState schedule;
  std::string rng_state;
};

namespace detail {

inline constexpr char kCheckpointMagic[8] = {'G', '2', 'S', 'C', 'K', 'P', 'T', '\n'};

template <typename V>
void write_pod(std::ostream& out, const V& v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(V));
}

template <typename V>
V read_pod(std::istream& in, const char* what) {
  V v{};
  in.read(reinterpret_cast<char*>(&v), sizeof(V));
  if (!in) throw FormatError(std::string("checkpoint: truncated while reading ") + what);
  return v;
}

inline void write_string(std::ostream& out, const std::string& s) {
  write_pod<std::uint64_t>(out, s.size());
  out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

inline std::string read_string(std::istream& in, const char* what) {
  const auto len = read_pod<std::uint64_t>(in, what);
  std::string s(len, '\0');
  in.read(s.data(), static_cast<std::streamsize>(len));
  if (!in) throw FormatError(std::string("checkpoint: truncated while reading ") + what);
  return s;
}

template <typename T>
constexpr std::uint8_t dtype_tag() {
  if constexpr (std::is_same_v<T, float>) {
    return 1;
  } else {
    static_assert(std::is_same_v<T, double>, "unsupported scalar type");
    return 2;
  }
}

}  // namespace detail

template <typename T>
void save_checkpoint(const std::string& path, const CheckpointMeta& meta,
                     const ad::ParamMap<T>& tensors) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write checkpoint " + path);
  out.write(detail::kCheckpointMagic, sizeof(detail::kCheckpointMagic));
  detail::write_pod<std::uint32_t>(out, static_cast<std::uint32_t>(meta.format_version));
  detail::write_string(out, meta.config_text);
  detail::write_pod<std::int64_t>(out, meta.epoch);
  detail::write_pod<double>(out, meta.schedule.best_f1);
  detail::write_pod<std::int32_t>(out, meta.schedule.since_improvement);
  detail::write_pod<double>(out, meta.schedule.lr);
  detail::write_string(out, meta.rng_state);
  detail::write_pod<std::uint64_t>(out, tensors.size());
  for (const auto& [name, tensor] : tensors) {
    detail::write_string(out, name);
    detail::write_pod<std::uint8_t>(out, detail::dtype_tag<T>());
    detail::write_pod<std::uint32_t>(out, static_cast<std::uint32_t>(tensor.rank()));
    for (const auto dim : tensor.shape()) {
      detail::write_pod<std::uint64_t>(out, static_cast<std::uint64_t>(dim));
    }
    out.write(reinterpret_cast<const char*>(tensor.values().data()),
              static_cast<std::streamsize>(tensor.size() * sizeof(T)));
  }
  if (!out) throw IoError("write failed for checkpoint " + path);
}

template <typename T>
struct LoadedCheckpoint {
  CheckpointMeta meta;
  ad::ParamMap<T> tensors;
};

template <typename T>
LoadedCheckpoint<T> load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read checkpoint " + path);
  char magic[8];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, detail::kCheckpointMagic, sizeof(magic)) != 0) {
    throw FormatError("checkpoint " + path + ": bad magic");
  }
  LoadedCheckpoint<T> loaded;
  loaded.meta.format_version =
      static_cast<int>(detail::read_pod<std::uint32_t>(in, "version"));
  if (loaded.meta.format_version != kCheckpointFormatVersion) {
    throw FormatError("checkpoint " + path + ": format version " +
                      std::to_string(loaded.meta.format_version) +
                      " is not supported (expected " +
                      std::to_string(kCheckpointFormatVersion) + ")");
  }
  loaded.meta.config_text = detail::read_string(in, "config");
  loaded.meta.epoch = detail::read_pod<std::int64_t>(in, "epoch");
  loaded.meta.schedule.best_f1 = detail::read_pod<double>(in, "schedule");
  loaded.meta.schedule.since_improvement = detail::read_pod<std::int32_t>(in, "schedule");
  loaded.meta.schedule.lr = detail::read_pod<double>(in, "schedule");
  loaded.meta.rng_state = detail::read_string(in, "rng state");
  const auto count = detail::read_pod<std::uint64_t>(in, "tensor count");
  loaded.tensors.reserve(count);
  for (std::uint64_t i = 0; i < count; ++i) {
    const std::string name = detail::read_string(in, "tensor name");
    const auto tag = detail::read_pod<std::uint8_t>(in, "dtype");
    if (tag != detail::dtype_tag<T>()) {
      throw FormatError("checkpoint " + path + ": tensor '" + name +
                        "' has an incompatible scalar type");
    }
    const auto rank = detail::read_pod<std::uint32_t>(in, "rank");
    ad::Shape shape;
    for (std::uint32_t r = 0; r < rank; ++r) {
      shape.push_back(static_cast<std::size_t>(detail::read_pod<std::uint64_t>(in, "dim")));
    }
    ad::Tensor<T> tensor = ad::Tensor<T>::zeros(shape);
    in.read(reinterpret_cast<char*>(tensor.values().data()),
            static_cast<std::streamsize>(tensor.size() * sizeof(T)));
    if (!in) throw FormatError("checkpoint " + path + ": truncated tensor payload");
    loaded.tensors.emplace_back(name, std::move(tensor));
  }
  return loaded;
}

// Copies stored values into the model's named parameters; names and shapes
// must match exactly.
template <typename T>
void restore_params(const ad::ParamMap<T>& stored, const ad::ParamMap<T>& live) {
  if (stored.size() != live.size()) {
    throw FormatError("checkpoint: expected " + std::to_string(live.size()) +
                      " tensors, found " + std::to_string(stored.size()));
  }
  for (std::size_t i = 0; i < live.size(); ++i) {
    if (stored[i].first != live[i].first) {
      throw FormatError("checkpoint: tensor '" + stored[i].first +
                        "' does not match expected '" + live[i].first + "'");
    }
    if (stored[i].second.shape() != live[i].second.shape()) {
      throw FormatError("checkpoint: tensor '" + stored[i].first + "' has shape " +
                        ad::shape_str(stored[i].second.shape()) + ", expected " +
                        ad::shape_str(live[i].second.shape()));
    }
    ad::Tensor<T> dst = live[i].second;
    std::copy(stored[i].second.values().begin(), stored[i].second.values().end(),
              dst.values().begin());
  }
}

}  // namespace g2s
