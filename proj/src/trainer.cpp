#include "edgestereo/trainer.hpp"

#include <algorithm>
#include <filesystem>

namespace edgestereo {

PhaseSpec make_phase_spec(int id, std::int64_t iterations, LrSchedule lr, double lambda_ds,
                          bool model_has_edge) {
  check(id >= 1 && id <= 3, "phase plan: phase id must be 1, 2 or 3");
  check(iterations >= 0, "phase plan: negative iteration count");
  PhaseSpec spec;
  spec.id = id;
  spec.iterations = iterations;
  spec.lr = std::move(lr);
  spec.lambda_ds = lambda_ds;
  switch (id) {
    case 1:
      check(model_has_edge, "phase plan: phase 1 needs the edge sub-network");
      spec.role = DatasetRole::Edge;
      spec.trainable_groups = {"edge-subnet"};
      spec.frozen_groups = {"backbone-shared", "disparity-branch"};
      break;
    case 2:
      spec.role = DatasetRole::Stereo;
      spec.trainable_groups = {"disparity-branch"};
      spec.frozen_groups = {"backbone-shared"};
      if (model_has_edge) spec.frozen_groups.push_back("edge-subnet");
      spec.use_smoothness = model_has_edge;
      break;
    case 3:
      spec.role = DatasetRole::Stereo;
      spec.trainable_groups = {"disparity-branch"};
      if (model_has_edge) spec.trainable_groups.push_back("edge-subnet");
      spec.frozen_groups = {"backbone-shared"};
      break;
  }
  return spec;
}

Batch make_batch(const DataSource& data, const std::vector<std::int64_t>& indices, DType dt) {
  check(!indices.empty(), "make_batch: empty index set");
  const int B = static_cast<int>(indices.size());
  StereoSample first = data.sample(indices[0]);
  const int H = first.left.dim(1), W = first.left.dim(2);
  Batch b{Tensor({B, 3, H, W}, dt), Tensor({B, 3, H, W}, dt), Tensor({B, 1, H, W}, dt),
          Tensor({B, 1, H, W}, dt), Tensor({B, 1, H, W}, dt)};
  const auto put = [&](Tensor& dst, const Tensor& src, int bi) {
    const std::int64_t n = src.numel();
    for (std::int64_t i = 0; i < n; ++i) dst.set(static_cast<std::int64_t>(bi) * n + i, src.get(i));
  };
  for (int bi = 0; bi < B; ++bi) {
    StereoSample s = bi == 0 ? std::move(first) : data.sample(indices[static_cast<std::size_t>(bi)]);
    check(s.left.dim(1) == H && s.left.dim(2) == W, "make_batch: sample extents differ");
    put(b.left, s.left, bi);
    put(b.right, s.right, bi);
    put(b.gt, s.gt_disparity, bi);
    put(b.valid, s.valid_mask, bi);
    put(b.edges, s.gt_edges, bi);
  }
  return b;
}

Trainer::Trainer(EdgeStereoModel& model, std::vector<PhaseSpec> plan, const DataSource& data,
                 std::uint64_t seed, TrainOptions opts)
    : model_(model), plan_(std::move(plan)), data_(data), seed_(seed), opts_(std::move(opts)) {
  check(!plan_.empty(), "trainer: empty phase plan");
  check(opts_.batch_size >= 1, "trainer: batch size must be >= 1");
  check(data_.size() >= opts_.batch_size,
        "trainer: dataset smaller than one batch (" + std::to_string(data_.size()) + " < " +
            std::to_string(opts_.batch_size) + ")");
  for (const auto& spec : plan_) {
    for (const auto& g : spec.trainable_groups) (void)model_.group(g);
    for (const auto& g : spec.frozen_groups) (void)model_.group(g);
  }
}

void Trainer::apply_freeze(const PhaseSpec& spec) {
  for (auto& g : model_.groups()) g.set_trainable(false);
  for (const auto& name : spec.trainable_groups) model_.group(name).set_trainable(true);
}

std::vector<std::int64_t> Trainer::batch_indices(const PhaseSpec& spec,
                                                 std::int64_t iteration) const {
  const std::int64_t n = data_.size();
  std::vector<std::int64_t> out(static_cast<std::size_t>(opts_.batch_size));
  for (int b = 0; b < opts_.batch_size; ++b) {
    const std::int64_t pos = iteration * opts_.batch_size + b;
    const std::int64_t epoch = pos / n;
    const std::int64_t within = pos % n;
    // per-epoch permutation drawn from (seed, phase, epoch)
    Rng rng(mix_seed(mix_seed(seed_, static_cast<std::uint64_t>(spec.id) * 0x10001ull),
                     static_cast<std::uint64_t>(epoch)));
    std::vector<std::int64_t> perm(static_cast<std::size_t>(n));
    for (std::int64_t i = 0; i < n; ++i) perm[static_cast<std::size_t>(i)] = i;
    for (std::int64_t i = n; i > 1; --i)
      std::swap(perm[static_cast<std::size_t>(i - 1)],
                perm[static_cast<std::size_t>(rng.uniform_int(0, static_cast<int>(i) - 1))]);
    out[static_cast<std::size_t>(b)] = perm[static_cast<std::size_t>(within)];
  }
  return out;
}

NodePtr Trainer::phase_loss(const PhaseSpec& spec, const Batch& batch) const {
  if (spec.role == DatasetRole::Edge) {
    auto left = Node::leaf(batch.left, false);
    EdgeOutput out = model_.edge_forward(left);
    // deep side supervision plus the fused map, HED style
    NodePtr loss = class_balanced_bce(out.edge_map, batch.edges);
    for (const auto& sm : out.side_maps)
      loss = ops::add(loss, class_balanced_bce(sm, batch.edges));
    return loss;
  }
  auto left = Node::leaf(batch.left, false);
  auto right = Node::leaf(batch.right, false);
  auto out = model_.forward(left, right);
  Tensor edge_value;
  if (spec.use_smoothness) {
    check(out.edge.edge_map != nullptr, "phase loss: smoothness requires an edge map");
    edge_value = out.edge.edge_map->value;
  }
  const int effective_phase = spec.use_smoothness ? 2 : 3;
  LossBreakdown bd = deep_supervision(out.maps, batch.gt, batch.valid, edge_value, spec.lambda_ds,
                                      effective_phase);
  return bd.total;
}

void Trainer::write_checkpoint(const std::string& name, const Adam* opt, int phase_index,
                               std::int64_t iteration) {
  if (opts_.out_dir.empty()) return;
  std::filesystem::create_directories(opts_.out_dir);
  const std::string path = opts_.out_dir + "/" + name;
  checkpoint_write(path, snapshot_training_state(model_, opt, phase_index, iteration));
  checkpoint_paths_.push_back(path);
}

std::vector<IterationRecord> Trainer::run(int start_phase, std::int64_t start_iteration,
                                          const CheckpointData* resume) {
  check(start_phase >= 0 && start_phase < static_cast<int>(plan_.size()),
        "trainer: start phase out of range");
  std::vector<IterationRecord> trace;
  for (int p = start_phase; p < static_cast<int>(plan_.size()); ++p) {
    const PhaseSpec& spec = plan_[static_cast<std::size_t>(p)];
    apply_freeze(spec);

    std::vector<NamedParam> trainable;
    for (const auto& gname : spec.trainable_groups)
      for (const auto& np : model_.group_named_params(gname)) trainable.push_back(np);
    Adam opt(trainable);

    const std::int64_t first_it = p == start_phase ? start_iteration : 0;
    if (p == start_phase && resume && first_it > 0) restore_optimizer(*resume, opt);

    for (std::int64_t it = first_it; it < spec.iterations; ++it) {
      const double lr = spec.lr.at(it);
      Batch batch = make_batch(data_, batch_indices(spec, it), model_.dtype());
      opt.zero_grads();
      NodePtr loss;
      try {
        loss = phase_loss(spec, batch);
        backward(loss);
        opt.step(lr);
      } catch (const Error& e) {
        throw Error("training aborted at phase " + std::to_string(spec.id) + " iteration " +
                    std::to_string(it) + ": " + e.what());
      }
      trace.push_back({spec.id, it, loss->value.get(0), lr});
      if (opts_.checkpoint_every > 0 && (it + 1) % opts_.checkpoint_every == 0 &&
          it + 1 < spec.iterations)
        write_checkpoint("step_p" + std::to_string(p) + "_" + std::to_string(it + 1) + ".ckpt",
                         &opt, p, it + 1);
    }
    write_checkpoint("phase" + std::to_string(spec.id) + ".ckpt", &opt, p, spec.iterations);
  }
  write_checkpoint("final.ckpt", nullptr, static_cast<int>(plan_.size()), 0);
  return trace;
}

}  // namespace edgestereo
