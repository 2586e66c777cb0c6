#pragma once

#include <cstdint>
#include <cstring>
#include <fstream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "sharpose/config.hpp"
#include "sharpose/image.hpp"
#include "sharpose/tensor.hpp"

namespace sharpose {

class CheckpointError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Little-endian container: "SHRP" magic, u32 format version, config snapshot
// (flat key=value text), RNG state, epoch counter, then named tensor records
// (name, dtype tag, shape, payload). f64 round-trips bit-exactly.
struct CheckpointContainer {
  static constexpr std::uint32_t kVersion = 1;
  static constexpr std::uint8_t kDtypeF64 = 1;
  static constexpr std::uint8_t kDtypeF32 = 2;

  std::string config_text;
  std::uint64_t rng_state = 0;
  std::uint32_t epoch = 0;

  struct Record {
    std::string name;
    std::uint8_t dtype = kDtypeF64;
    std::vector<int> shape;
    std::vector<double> values;  // f32 payloads are widened on load
  };
  std::vector<Record> records;

  void add_f64(const std::string& name, const Tensor& t) {
    records.push_back({name, kDtypeF64, t.shape, *t.data});
  }

  const Record* find(const std::string& name) const {
    for (const Record& r : records) {
      if (r.name == name) return &r;
    }
    return nullptr;
  }

  Tensor tensor(const std::string& name, bool requires_grad = false) const {
    const Record* r = find(name);
    if (!r) throw CheckpointError("checkpoint: missing tensor '" + name + "'");
    return Tensor::from(r->shape, r->values, requires_grad);
  }
};

namespace detail {

template <typename T>
void write_pod(std::ostream& out, T v) {
  static_assert(std::is_trivially_copyable_v<T>);
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T read_pod(std::istream& in) {
  T v{};
  in.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!in) throw CheckpointError("checkpoint: truncated file");
  return v;
}

inline void write_string(std::ostream& out, const std::string& s) {
  write_pod<std::uint64_t>(out, s.size());
  out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

inline std::string read_string(std::istream& in) {
  const auto n = read_pod<std::uint64_t>(in);
  std::string s(n, '\0');
  in.read(s.data(), static_cast<std::streamsize>(n));
  if (!in) throw CheckpointError("checkpoint: truncated string");
  return s;
}

}  // namespace detail

inline void save_checkpoint(const std::string& path, const CheckpointContainer& c) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("checkpoint: cannot open " + path + " for writing");
  out.write("SHRP", 4);
  detail::write_pod<std::uint32_t>(out, CheckpointContainer::kVersion);
  detail::write_string(out, c.config_text);
  detail::write_pod<std::uint64_t>(out, c.rng_state);
  detail::write_pod<std::uint32_t>(out, c.epoch);
  detail::write_pod<std::uint64_t>(out, c.records.size());
  for (const auto& r : c.records) {
    detail::write_string(out, r.name);
    detail::write_pod<std::uint8_t>(out, r.dtype);
    detail::write_pod<std::uint32_t>(out, static_cast<std::uint32_t>(r.shape.size()));
    for (int d : r.shape) detail::write_pod<std::int64_t>(out, d);
    if (r.dtype == CheckpointContainer::kDtypeF64) {
      out.write(reinterpret_cast<const char*>(r.values.data()),
                static_cast<std::streamsize>(r.values.size() * sizeof(double)));
    } else if (r.dtype == CheckpointContainer::kDtypeF32) {
      std::vector<float> f(r.values.begin(), r.values.end());
      out.write(reinterpret_cast<const char*>(f.data()), static_cast<std::streamsize>(f.size() * sizeof(float)));
    } else {
      throw CheckpointError("checkpoint: unknown dtype tag on save");
    }
  }
  if (!out) throw IoError("checkpoint: write failed for " + path);
}

inline CheckpointContainer load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("checkpoint: cannot open " + path);
  char magic[4];
  in.read(magic, 4);
  if (!in || std::memcmp(magic, "SHRP", 4) != 0) throw CheckpointError("checkpoint: bad magic in " + path);
  const auto version = detail::read_pod<std::uint32_t>(in);
  if (version != CheckpointContainer::kVersion) {
    throw CheckpointError("checkpoint: unsupported format version " + std::to_string(version));
  }
  CheckpointContainer c;
  c.config_text = detail::read_string(in);
  c.rng_state = detail::read_pod<std::uint64_t>(in);
  c.epoch = detail::read_pod<std::uint32_t>(in);
  const auto n_records = detail::read_pod<std::uint64_t>(in);
  c.records.resize(n_records);
  for (auto& r : c.records) {
    r.name = detail::read_string(in);
    r.dtype = detail::read_pod<std::uint8_t>(in);
    const auto ndim = detail::read_pod<std::uint32_t>(in);
    r.shape.resize(ndim);
    std::size_t count = 1;
    for (auto& d : r.shape) {
      const auto v = detail::read_pod<std::int64_t>(in);
      if (v < 0) throw CheckpointError("checkpoint: negative dimension");
      d = static_cast<int>(v);
      count *= static_cast<std::size_t>(v);
    }
    r.values.resize(count);
    if (r.dtype == CheckpointContainer::kDtypeF64) {
      in.read(reinterpret_cast<char*>(r.values.data()), static_cast<std::streamsize>(count * sizeof(double)));
      if (!in) throw CheckpointError("checkpoint: truncated tensor payload");
    } else if (r.dtype == CheckpointContainer::kDtypeF32) {
      std::vector<float> f(count);
      in.read(reinterpret_cast<char*>(f.data()), static_cast<std::streamsize>(count * sizeof(float)));
      if (!in) throw CheckpointError("checkpoint: truncated tensor payload");
      for (std::size_t i = 0; i < count; ++i) r.values[i] = f[i];
    } else {
      throw CheckpointError("checkpoint: unknown dtype tag " + std::to_string(r.dtype));
    }
  }
  return c;
}

// Reads an image either from a PNM file or from a container holding an
// "image" tensor of shape [H, W, C].
inline ImageTensor read_image_any(const std::string& path) {
  std::ifstream probe(path, std::ios::binary);
  if (!probe) throw IoError("image: cannot open " + path);
  char magic[4] = {0, 0, 0, 0};
  probe.read(magic, 4);
  probe.close();
  if (std::memcmp(magic, "SHRP", 4) == 0) {
    const CheckpointContainer c = load_checkpoint(path);
    const auto* rec = c.find("image");
    if (!rec || rec->shape.size() != 3) throw CheckpointError("image: container lacks an [H,W,C] 'image' tensor");
    ImageTensor img = ImageTensor::zeros(rec->shape[0], rec->shape[1], rec->shape[2]);
    img.data = rec->values;
    return img;
  }
  return read_pnm(path);
}

}  // namespace sharpose
