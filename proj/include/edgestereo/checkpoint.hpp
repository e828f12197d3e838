#pragma once

#include <string>
#include <utility>
#include <vector>

#include "edgestereo/model.hpp"
#include "edgestereo/optimizer.hpp"

namespace edgestereo {

// Versioned binary container: magic "ESCP", u32 version, u64 JSON-manifest
// length, manifest (names, shapes, counters, embedded model config), then the
// tensor payloads as little-endian 32-bit floats in manifest order.
struct CheckpointData {
  std::uint32_t version = 1;
  std::string model_config_json;
  int phase_index = -1;        // index of the phase the state belongs to
  std::int64_t iteration = 0;  // iterations completed inside that phase
  std::int64_t adam_step = 0;
  std::vector<std::pair<std::string, Tensor>> params;
  std::vector<std::pair<std::string, Tensor>> moments;  // names prefixed "m:" / "v:"
};

void checkpoint_write(const std::string& path, const CheckpointData& data);
CheckpointData checkpoint_read(const std::string& path);

CheckpointData snapshot_training_state(const EdgeStereoModel& model, const Adam* optimizer,
                                       int phase_index, std::int64_t iteration);

// Restores parameters into the model; every checkpoint name and shape must
// match the model manifest exactly.
void restore_model(const CheckpointData& data, EdgeStereoModel& model);

// Restores first/second moments and the step count into a freshly built
// optimizer whose slots match the checkpoint.
void restore_optimizer(const CheckpointData& data, Adam& optimizer);

}  // namespace edgestereo
