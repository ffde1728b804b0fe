// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <map>
#include <string>

#include "antlab/tensor.hpp"

namespace antlab {

struct Model;

/// Flat name -> tensor map plus a JSON manifest. On disk:
///   "ANTLABCK" | u32 version | u64 manifest bytes | manifest | u64 entries |
///   per entry: u32 name bytes | name | u32 rank | u64 dims... | f64 payload
/// with every integer and real little-endian.
struct Checkpoint {
  std::string manifest_json = "{}";
  std::map<std::string, Tensor> tensors;
};

inline constexpr std::uint32_t kCheckpointVersion = 1;

std::string serialize_checkpoint(const Checkpoint& ckpt);
/// Throws std::runtime_error on a bad magic, unknown version or truncation.
Checkpoint deserialize_checkpoint(const std::string& bytes);
void save_checkpoint(const std::string& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::string& path);

/// Hash over the model's options and every parameter's name and shape.
std::uint64_t architecture_hash(Model& model);
std::string hash_hex(std::uint64_t h);

/// Copies the model's parameters into `ckpt` under their visit names.
void store_model(Model& model, Checkpoint& ckpt);
/// Loads parameters by name; throws std::runtime_error on a missing name or
/// shape mismatch.
void restore_model(Model& model, const Checkpoint& ckpt);

}  // namespace antlab
