#pragma once

#include <memory>
#include <string>
#include <vector>

#include "edgestereo/checkpoint.hpp"
#include "edgestereo/data_gen.hpp"
#include "edgestereo/losses.hpp"

namespace edgestereo {

enum class DatasetRole { Edge, Stereo };

struct LrSchedule {
  double initial = 1e-4;
  std::vector<std::int64_t> decay_steps;  // iteration indices inside the phase
  double decay_factor = 0.5;

  double at(std::int64_t iteration) const {
    double lr = initial;
    for (auto s : decay_steps)
      if (iteration >= s) lr *= decay_factor;
    return lr;
  }
};

struct PhaseSpec {
  int id = 2;  // 1: edge pretraining, 2: disparity with smoothness, 3: joint
  DatasetRole role = DatasetRole::Stereo;
  std::vector<std::string> trainable_groups;
  std::vector<std::string> frozen_groups;
  bool use_smoothness = false;
  std::int64_t iterations = 0;
  LrSchedule lr;
  double lambda_ds = 0.1;
};

// Fills the group/loss contract for a phase id: phase 1 trains the edge
// sub-network under the class-balanced BCE, phase 2 trains the disparity
// branch with regression + weighted smoothness while the edge weights stay
// fixed, phase 3 trains everything but the shared backbone with regression
// only. The shared backbone is frozen in every phase. A model without an
// edge branch only admits stereo phases, with the smoothness term dropped.
PhaseSpec make_phase_spec(int id, std::int64_t iterations, LrSchedule lr, double lambda_ds,
                          bool model_has_edge);

struct Batch {
  Tensor left, right;       // [B,3,H,W]
  Tensor gt, valid, edges;  // [B,1,H,W]
};

Batch make_batch(const DataSource& data, const std::vector<std::int64_t>& indices, DType dt);

struct IterationRecord {
  int phase_id = 0;
  std::int64_t iteration = 0;  // inside the phase
  double loss = 0.0;
  double lr = 0.0;
};

struct TrainOptions {
  int batch_size = 2;
  std::string out_dir;                 // empty: keep checkpoints in memory only
  std::int64_t checkpoint_every = 0;   // 0: checkpoint at phase boundaries only
};

// Drives the multi-phase schedule. Data order is a pure function of
// (seed, phase id, epoch), so a run resumed from a checkpoint reproduces the
// unresumed loss trace bitwise.
class Trainer {
 public:
  Trainer(EdgeStereoModel& model, std::vector<PhaseSpec> plan, const DataSource& data,
          std::uint64_t seed, TrainOptions opts = {});

  std::vector<IterationRecord> run(int start_phase = 0, std::int64_t start_iteration = 0,
                                   const CheckpointData* resume = nullptr);

  const std::vector<std::string>& checkpoint_paths() const { return checkpoint_paths_; }

 private:
  void apply_freeze(const PhaseSpec& spec);
  std::vector<std::int64_t> batch_indices(const PhaseSpec& spec, std::int64_t iteration) const;
  NodePtr phase_loss(const PhaseSpec& spec, const Batch& batch) const;
  void write_checkpoint(const std::string& name, const Adam* opt, int phase_index,
                        std::int64_t iteration);

  EdgeStereoModel& model_;
  std::vector<PhaseSpec> plan_;
  const DataSource& data_;
  std::uint64_t seed_;
  TrainOptions opts_;
  std::vector<std::string> checkpoint_paths_;
};

}  // namespace edgestereo
