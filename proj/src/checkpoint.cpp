// SPDX-License-Identifier: Apache-2.0
#include "antlab/checkpoint.hpp"

#include <bit>
#include <cstdio>
#include <cstring>
#include <stdexcept>

#include "antlab/denoiser.hpp"
#include "antlab/io.hpp"

namespace antlab {

namespace {
constexpr char kMagic[8] = {'A', 'N', 'T', 'L', 'A', 'B', 'C', 'K'};

void put_u64(std::string& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}
void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

class Reader {
 public:
  explicit Reader(const std::string& bytes) : b_(bytes) {}
  std::uint64_t u64() { return take(8); }
  std::uint32_t u32() { return static_cast<std::uint32_t>(take(4)); }
  std::string str(std::size_t n) {
    need(n);
    std::string s = b_.substr(pos_, n);
    pos_ += n;
    return s;
  }
  bool done() const { return pos_ == b_.size(); }

 private:
  void need(std::size_t n) const {
    if (b_.size() - pos_ < n) throw std::runtime_error("checkpoint is truncated");
  }
  std::uint64_t take(int n) {
    need(static_cast<std::size_t>(n));
    std::uint64_t v = 0;
    for (int i = 0; i < n; ++i) v |= static_cast<std::uint64_t>(static_cast<unsigned char>(b_[pos_ + i])) << (8 * i);
    pos_ += static_cast<std::size_t>(n);
    return v;
  }
  const std::string& b_;
  std::size_t pos_ = 0;
};

std::uint64_t fnv_mix(std::uint64_t h, std::string_view s) {
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001B3ULL;
  }
  return h;
}
}  // namespace

std::string serialize_checkpoint(const Checkpoint& ckpt) {
  std::string out(kMagic, sizeof kMagic);
  put_u32(out, kCheckpointVersion);
  put_u64(out, ckpt.manifest_json.size());
  out += ckpt.manifest_json;
  put_u64(out, ckpt.tensors.size());
  for (const auto& [name, t] : ckpt.tensors) {
    put_u32(out, static_cast<std::uint32_t>(name.size()));
    out += name;
    put_u32(out, static_cast<std::uint32_t>(t.rank()));
    for (auto d : t.shape()) put_u64(out, d);
    for (double v : t.data()) put_u64(out, std::bit_cast<std::uint64_t>(v));
  }
  return out;
}

Checkpoint deserialize_checkpoint(const std::string& bytes) {
  Reader r(bytes);
  if (r.str(sizeof kMagic) != std::string(kMagic, sizeof kMagic)) throw std::runtime_error("not a checkpoint file");
  const auto version = r.u32();
  if (version != kCheckpointVersion)
    throw std::runtime_error("unsupported checkpoint version " + std::to_string(version));
  Checkpoint ckpt;
  ckpt.manifest_json = r.str(r.u64());
  const auto entries = r.u64();
  for (std::uint64_t e = 0; e < entries; ++e) {
    std::string name = r.str(r.u32());
    const auto rank = r.u32();
    Shape shape(rank);
    for (auto& d : shape) d = r.u64();
    const std::size_t n = shape_numel(shape);
    if (n > bytes.size() / 8) throw std::runtime_error("checkpoint entry '" + name + "' is truncated");
    std::vector<double> data(n);
    for (auto& v : data) v = std::bit_cast<double>(r.u64());
    ckpt.tensors.emplace(std::move(name), Tensor(std::move(shape), std::move(data)));
  }
  if (!r.done()) throw std::runtime_error("checkpoint has trailing bytes");
  return ckpt;
}

void save_checkpoint(const std::string& path, const Checkpoint& ckpt) { write_file_atomic(path, serialize_checkpoint(ckpt)); }

Checkpoint load_checkpoint(const std::string& path) {
  try {
    return deserialize_checkpoint(read_file(path));
  } catch (const std::exception& e) {
    throw std::runtime_error("checkpoint '" + path + "': " + e.what());
  }
}

std::uint64_t architecture_hash(Model& model) {
  std::uint64_t h = 0xCBF29CE484222325ULL;
  const auto& o = model.options;
  h = fnv_mix(h, "kind=" + std::to_string(static_cast<int>(o.conditioner.kind)) +
                     ";sigma=" + std::to_string(static_cast<int>(o.conditioner.sigma_mode)) +
                     ";T=" + std::to_string(o.T) + ";frames=" + std::to_string(o.frames) + ";");
  model.visit([&h](const std::string& name, Tensor& p) { h = fnv_mix(h, name + shape_str(p.shape()) + ";"); });
  return h;
}

std::string hash_hex(std::uint64_t h) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

void store_model(Model& model, Checkpoint& ckpt) {
  model.visit([&ckpt](const std::string& name, Tensor& p) { ckpt.tensors.insert_or_assign(name, p.detached()); });
}

void restore_model(Model& model, const Checkpoint& ckpt) {
  model.visit([&ckpt](const std::string& name, Tensor& p) {
    const auto it = ckpt.tensors.find(name);
    if (it == ckpt.tensors.end()) throw std::runtime_error("checkpoint lacks parameter '" + name + "'");
    if (it->second.shape() != p.shape())
      throw std::runtime_error("parameter '" + name + "' has shape " + shape_str(it->second.shape()) +
                               " in the checkpoint, model expects " + shape_str(p.shape()));
    std::copy(it->second.data().begin(), it->second.data().end(), p.data().begin());
  });
}

}  // namespace antlab
