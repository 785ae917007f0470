#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "cpgan/tensor.hpp"
#include "json.hpp"

// Versioned checkpoint container: a magic tag, a JSON metadata header
// (config echo, counters, rng state, tensor directory) and a blob of named
// little-endian float32 tensors. Writes are atomic (temp file + rename).

namespace cpgan {

struct CheckpointMeta {
  std::string kind;  // "cpgan" | "cpcnn" | "adda"
  std::int64_t epoch = 0;
  std::int64_t step = 0;
  std::string rng_state;
  nlohmann::json config;  // effective run configuration
  nlohmann::json extra;   // optimizer counters, freeze checksums, ...
  std::string version;    // build version string
};

using NamedTensors = std::vector<std::pair<std::string, const Tensor<float>*>>;

void save_checkpoint(const std::string& path, const CheckpointMeta& meta, const NamedTensors& tensors);

struct LoadedCheckpoint {
  CheckpointMeta meta;
  std::map<std::string, Tensor<float>> tensors;

  const Tensor<float>& require(const std::string& name) const;
};

LoadedCheckpoint load_checkpoint(const std::string& path);

/// FNV-1a over the raw bytes of the listed tensors, for freeze-integrity
/// assertions.
std::uint64_t tensor_checksum(const NamedTensors& tensors);

}  // namespace cpgan
