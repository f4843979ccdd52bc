#pragma once

// Single-file checkpoint container. Byte layout (all integers little-endian):
//
//   magic      8 bytes  "SCAMCKPT"
//   version    u32      currently 1
//   manifest   u64 length + UTF-8 text, sorted "key=value\n" lines
//   count      u64      number of tensor blobs
//   blob*      u32 name length, name bytes,
//              u8 dtype (0 f32, 1 f64, 2 i64, 3 u8),
//              u8 rank, rank x i64 dims,
//              u64 payload length, payload (row-major, native little-endian)
//   checksum   u64      FNV-1a over every preceding byte
//
// docs/checkpoint_format.md describes the same layout with the key names the
// trainer writes.

#include <torch/torch.h>

#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

namespace scam {

inline constexpr uint32_t kCheckpointVersion = 1;

struct CheckpointFile {
  uint32_t version = kCheckpointVersion;
  std::map<std::string, std::string> manifest;
  std::vector<std::pair<std::string, torch::Tensor>> blobs;

  const torch::Tensor& blob(const std::string& name) const;
  bool has_blob(const std::string& name) const;
};

std::string encode_checkpoint(const CheckpointFile& file);
CheckpointFile decode_checkpoint(const std::string& bytes);

void write_checkpoint(const CheckpointFile& file, const std::string& path);
CheckpointFile read_checkpoint(const std::string& path);

}  // namespace scam
