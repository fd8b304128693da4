#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "deepnotch/nn/autograd.hpp"
#include "deepnotch/nn/tensor.hpp"

namespace deepnotch::io {

// "NFCK" layout, all integers little-endian, no padding:
//   magic "NFCK" | u16 version | u16 kind
//   u32 metadata count | { u16 key length | key bytes | i64 value }*
//   u32 tensor count   | { u16 name length | name bytes | u8 rank | u32 dims[rank] | f32 data[prod(dims)] }*
inline constexpr std::uint16_t kCheckpointVersion = 1;

enum class ModelKind : std::uint16_t { kKpn = 1, kDetector = 2 };

const char* model_kind_name(ModelKind kind);

struct NamedTensor {
  std::string name;
  nn::Tensor value;
};

struct Checkpoint {
  ModelKind kind = ModelKind::kKpn;
  std::vector<std::pair<std::string, std::int64_t>> metadata;  // architecture hyperparameters
  std::vector<NamedTensor> tensors;

  // Throws ConfigError when the key is absent.
  std::int64_t meta(const std::string& key) const;
};

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path);

// Throws IoError for unreadable files and CheckpointError for bad magic,
// unsupported version, unknown kind or truncated payload.
Checkpoint load_checkpoint(const std::filesystem::path& path);

// Copies checkpoint tensors into `params` in order, checking names and shapes
// (CheckpointError kShapeMismatch on any disagreement) and the kind.
void assign_parameters(const Checkpoint& ckpt, ModelKind expected,
                       std::vector<std::pair<std::string, nn::Var>>& params);

}  // namespace deepnotch::io
