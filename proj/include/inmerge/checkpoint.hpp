#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <vector>

#include "inmerge/model.hpp"
#include "inmerge/train.hpp"

namespace inmerge {

// File layout (all integers little-endian):
//
//   "IMRG1"                 5 magic bytes
//   u64 header_length
//   header                  UTF-8 JSON, header_length bytes
//   payload                 concatenated f32 little-endian tensors
//
// The header lists every tensor as {name, dtype, shape, offset, length}
// with offsets relative to the payload start, ascending and covering the
// payload exactly. It also echoes the architecture, training and merge
// configuration, the training log and the next epoch index (all random
// streams are re-derived from the seeds at epoch boundaries).
//
// Tensor names: model parameters as-is, momentum buffers under
// "velocity/", the best-validation model under "best/".

inline constexpr char kCheckpointMagic[5] = {'I', 'M', 'R', 'G', '1'};

struct CheckpointState {
  std::optional<OptimizerState> optimizer;
  std::optional<Model> best_model;
  std::optional<TrainConfig> train;
  std::size_t next_epoch = 0;
  TrainLog log;
};

struct Checkpoint {
  Model model;
  CheckpointState state;
};

std::vector<std::uint8_t> encode_checkpoint(const Model& model,
                                            const CheckpointState& state);
Checkpoint decode_checkpoint(std::span<const std::uint8_t> bytes);

// Atomic (temp file + rename).
void save_checkpoint(const std::filesystem::path& path, const Model& model,
                     const CheckpointState& state = {});
Checkpoint load_checkpoint(const std::filesystem::path& path);

void save_protocol_state(const std::filesystem::path& path,
                         const ProtocolState& state, const TrainConfig& cfg);
// Throws CheckpointError if the file lacks optimizer or best-model state.
ProtocolState protocol_state_from(Checkpoint ckpt);

}  // namespace inmerge
