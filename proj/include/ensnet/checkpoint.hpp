#pragma once

// Checkpoint container, all integers little-endian:
//
//   "ENSNETCK"            8-byte magic
//   u32 version           kCheckpointVersion
//   u64 meta_length       followed by meta_length bytes of UTF-8 JSON:
//                         model config, train plan, next epoch, RNG state,
//                         optimizer step counts, metrics log, run config
//   u32 tensor_count      followed by tensor_count records:
//     u32 name_length, name bytes,
//     u32 rank, rank x u64 extents,
//     float32 data (row-major)
//
// Tensor names: model parameters ("trunk.conv0.weight", "subnet3.fc2.bias"),
// batchnorm running statistics ("trunk.bn0.running_mean") and Adam moments
// ("opt.<group>.m.<parameter>", "opt.<group>.v.<parameter>").
//
// Every stochastic stream is derived from (seed, purpose, epoch, ...), so the
// RNG state is fully described by the seed and the next epoch index.

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "ensnet/training.hpp"
#include "json.hpp"

namespace ensnet {

inline constexpr std::uint32_t kCheckpointVersion = 1;

struct Checkpoint {
  TrainingState state;
  TrainPlan plan;
  nlohmann::json run;  // resolved run configuration, null when absent
};

// Written to a temporary file and renamed into place, so an interrupted write
// leaves the previous checkpoint intact.
void save_checkpoint(const std::filesystem::path& path, const TrainingState& state, const TrainPlan& plan,
                     const nlohmann::json& run = nullptr);

// Throws CheckpointVersionError for other format versions and CheckpointError
// (with the byte offset) for anything malformed or truncated.
Checkpoint load_checkpoint(const std::filesystem::path& path);

struct CheckpointSummary {
  std::uint32_t version = 0;
  nlohmann::json meta;
  std::vector<std::pair<std::string, Shape>> tensors;
  std::uint64_t file_size = 0;
};

// Validates the whole container without materializing tensor data.
CheckpointSummary inspect_checkpoint(const std::filesystem::path& path);

}  // namespace ensnet
