#include "edgestereo/model.hpp"

#include <json.hpp>

namespace edgestereo {

using nlohmann::json;

std::string ModelConfig::to_json() const {
  json j;
  j["backbone_widths"] = backbone_widths;
  j["shared_stages"] = shared_stages;
  j["image_channels"] = image_channels;
  j["side_channels"] = side_channels;
  j["fm_channels"] = fm_channels;
  j["context_pyramid"] = context_pyramid;
  j["branch_channels"] = branch_channels;
  j["scales"] = scales;
  j["max_disp"] = max_disp;
  j["est_hidden"] = est_hidden;
  j["encoder_base"] = encoder_base;
  j["encoder_max"] = encoder_max;
  j["reduce_channels"] = reduce_channels;
  j["use_edge_cues"] = use_edge_cues;
  return j.dump();
}

ModelConfig ModelConfig::from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw Error(std::string("model config: bad JSON: ") + e.what());
  }
  ModelConfig c;
  c.backbone_widths = j.value("backbone_widths", c.backbone_widths);
  c.shared_stages = j.value("shared_stages", c.shared_stages);
  c.image_channels = j.value("image_channels", c.image_channels);
  c.side_channels = j.value("side_channels", c.side_channels);
  c.fm_channels = j.value("fm_channels", c.fm_channels);
  c.context_pyramid = j.value("context_pyramid", c.context_pyramid);
  c.branch_channels = j.value("branch_channels", c.branch_channels);
  c.scales = j.value("scales", c.scales);
  c.max_disp = j.value("max_disp", c.max_disp);
  c.est_hidden = j.value("est_hidden", c.est_hidden);
  c.encoder_base = j.value("encoder_base", c.encoder_base);
  c.encoder_max = j.value("encoder_max", c.encoder_max);
  c.reduce_channels = j.value("reduce_channels", c.reduce_channels);
  c.use_edge_cues = j.value("use_edge_cues", c.use_edge_cues);
  c.validate();
  return c;
}

void ModelConfig::validate() const {
  check(shared_stages >= 1 && shared_stages <= 5, "model config: shared_stages must be in [1,5]");
  if (use_edge_cues)
    check(backbone_widths.size() == EdgeSubnet::kSideBranches,
          "model config: edge branch needs exactly 5 backbone stages");
  else
    check(static_cast<int>(backbone_widths.size()) >= shared_stages,
          "model config: backbone_widths shorter than shared_stages");
  for (int w : backbone_widths) check(w >= 1, "model config: backbone widths must be >= 1");
  check(scales >= 2, "model config: scales must be >= 2");
  check(scales >= shared_stages,
        "model config: scales must be >= shared_stages so the prior fits the pyramid");
  check(max_disp >= 0, "model config: max_disp must be >= 0");
  check(image_channels >= 1 && side_channels >= 1 && fm_channels >= 1 && est_hidden >= 1 &&
            encoder_base >= 1 && encoder_max >= encoder_base,
        "model config: channel widths must be >= 1");
  (void)ContextPyramidConfig::parse(context_pyramid, branch_channels);
}

EdgeStereoModel::EdgeStereoModel(ModelConfig cfg, std::uint64_t seed, DType dt)
    : cfg_(std::move(cfg)), dtype_(dt) {
  cfg_.validate();
  Rng rng(seed);

  const int n_stages = cfg_.use_edge_cues ? static_cast<int>(cfg_.backbone_widths.size())
                                          : cfg_.shared_stages;
  int in_ch = cfg_.image_channels;
  for (int s = 0; s < n_stages; ++s) {
    ParamStore& store = s < cfg_.shared_stages ? shared_store_ : edge_store_;
    const int w = cfg_.backbone_widths[static_cast<std::size_t>(s)];
    const std::string base = "backbone.stage" + std::to_string(s);
    Stage st;
    st.conv0 = Conv2dLayer(store, base + ".conv0", in_ch, w, 3, 1, 1, 1, dt, rng);
    st.conv1 = Conv2dLayer(store, base + ".conv1", w, w, 3, 1, 1, 1, dt, rng);
    stages_.push_back(std::move(st));
    in_ch = w;
  }

  if (cfg_.use_edge_cues) {
    std::vector<int> taps(cfg_.backbone_widths.begin(), cfg_.backbone_widths.end());
    edge_subnet_ = EdgeSubnet(edge_store_, "edge", taps, cfg_.side_channels, dt, rng);
  }

  const int shared_ch = cfg_.backbone_widths[static_cast<std::size_t>(cfg_.shared_stages - 1)];
  const int reduce_ch = cfg_.reduce_channels > 0 ? cfg_.reduce_channels : shared_ch;
  reduce_ = Conv2dLayer(disp_store_, "mixed.reduce", shared_ch, reduce_ch, 3, 1, 1, 1, dt, rng);
  const int fuse_in = reduce_ch + (cfg_.max_disp + 1) +
                      (cfg_.use_edge_cues ? edge_subnet_.feature_channels() : 0);
  fuse_ = Conv2dLayer(disp_store_, "mixed.fuse", fuse_in, cfg_.fm_channels, 1, 1, 0, 1, dt, rng);

  pyramid_ = ContextPyramid(disp_store_, "pyramid",
                            ContextPyramidConfig::parse(cfg_.context_pyramid, cfg_.branch_channels),
                            cfg_.fm_channels, dt, rng);

  ResidualPyramidConfig rp;
  rp.scales = cfg_.scales;
  rp.prior_scale = cfg_.shared_stages - 1;
  rp.prior_channels = pyramid_.out_channels();
  rp.skip_channels.assign(cfg_.backbone_widths.begin(),
                          cfg_.backbone_widths.begin() + (cfg_.shared_stages - 1));
  rp.edge_channels = cfg_.use_edge_cues ? edge_subnet_.feature_channels() : 0;
  rp.image_channels = cfg_.image_channels;
  rp.encoder_base = cfg_.encoder_base;
  rp.encoder_max = cfg_.encoder_max;
  rp.est_hidden = cfg_.est_hidden;
  residual_ = ResidualPyramid(disp_store_, "residual", rp, dt, rng);

  auto group_of = [](const std::string& name, const ParamStore& store) {
    ParamGroup g;
    g.name = name;
    for (const auto& p : store.params()) g.params.push_back(p.node);
    return g;
  };
  groups_.push_back(group_of("backbone-shared", shared_store_));
  if (cfg_.use_edge_cues) groups_.push_back(group_of("edge-subnet", edge_store_));
  groups_.push_back(group_of("disparity-branch", disp_store_));
}

ParamGroup& EdgeStereoModel::group(const std::string& name) {
  for (auto& g : groups_)
    if (g.name == name) return g;
  throw Error("model: no parameter group named '" + name + "'");
}

const ParamGroup* EdgeStereoModel::find_group(const std::string& name) const {
  for (const auto& g : groups_)
    if (g.name == name) return &g;
  return nullptr;
}

std::vector<NamedParam> EdgeStereoModel::named_params() const {
  std::vector<NamedParam> out;
  for (const auto* store : {&shared_store_, &edge_store_, &disp_store_})
    for (const auto& p : store->params()) out.push_back(p);
  return out;
}

std::vector<NamedParam> EdgeStereoModel::group_named_params(const std::string& group_name) const {
  const ParamStore* store = nullptr;
  if (group_name == "backbone-shared")
    store = &shared_store_;
  else if (group_name == "edge-subnet")
    store = &edge_store_;
  else if (group_name == "disparity-branch")
    store = &disp_store_;
  check(store != nullptr, "model: no parameter group named '" + group_name + "'");
  return store->params();
}

double EdgeStereoModel::param_checksum(const std::string& group_name) const {
  const ParamGroup* g = find_group(group_name);
  check(g != nullptr, "model: no parameter group named '" + group_name + "'");
  double acc = 0.0;
  for (const auto& p : g->params)
    for (std::int64_t i = 0; i < p->value.numel(); ++i) acc += std::fabs(p->value.get(i));
  return acc;
}

std::vector<NodePtr> EdgeStereoModel::run_backbone(const NodePtr& image, int count) const {
  check(image->value.rank() == 4 && image->value.dim(1) == cfg_.image_channels,
        "backbone: expected [B," + std::to_string(cfg_.image_channels) + ",H,W], got " +
            image->value.shape_str());
  check(count <= static_cast<int>(stages_.size()), "backbone: stage count out of range");
  std::vector<NodePtr> outputs;
  NodePtr x = image;
  for (int s = 0; s < count; ++s) {
    if (s > 0) {
      check(x->value.dim(2) % 2 == 0 && x->value.dim(3) % 2 == 0,
            "backbone: input extents must be divisible by the total stride (2^" +
                std::to_string(count - 1) + ")");
      x = ops::avg_pool(x, 2, 2);
    }
    const auto& st = stages_[static_cast<std::size_t>(s)];
    x = ops::relu(st.conv1.forward(ops::relu(st.conv0.forward(x))));
    outputs.push_back(x);
  }
  return outputs;
}

EdgeOutput EdgeStereoModel::edge_forward(const NodePtr& left) const {
  check(cfg_.use_edge_cues, "model: edge branch disabled in this configuration");
  auto taps = run_backbone(left, static_cast<int>(stages_.size()));
  return edge_subnet_.forward(taps, left->value.dim(2), left->value.dim(3));
}

EdgeStereoModel::Output EdgeStereoModel::forward(const NodePtr& left, const NodePtr& right) const {
  check(left->value.same_shape(right->value), "model: left/right shape mismatch");
  const int H = left->value.dim(2), W = left->value.dim(3);

  Output out;
  auto l_stages = run_backbone(left, cfg_.use_edge_cues ? static_cast<int>(stages_.size())
                                                        : cfg_.shared_stages);
  auto r_stages = run_backbone(right, cfg_.shared_stages);
  const NodePtr& fl = l_stages[static_cast<std::size_t>(cfg_.shared_stages - 1)];
  const NodePtr& fr = r_stages[static_cast<std::size_t>(cfg_.shared_stages - 1)];

  if (cfg_.use_edge_cues) out.edge = edge_subnet_.forward(l_stages, H, W);

  auto cost = ops::correlation1d(fl, fr, cfg_.max_disp);
  auto reduced = ops::relu(reduce_.forward(fl));
  std::vector<NodePtr> mix{reduced, cost.scores};
  if (cfg_.use_edge_cues)
    mix.push_back(ops::bilinear_resize(out.edge.edge_feature, fl->value.dim(2), fl->value.dim(3)));
  auto fm = ops::relu(fuse_.forward(ops::concat_channels(mix)));

  auto prior = pyramid_.scene_prior(fm);

  std::vector<NodePtr> skips(l_stages.begin(), l_stages.begin() + (cfg_.shared_stages - 1));
  auto dec = residual_.decode(prior, skips, cfg_.use_edge_cues ? out.edge.edge_feature : nullptr,
                              cfg_.use_edge_cues ? out.edge.edge_map : nullptr, left, right);
  out.maps = std::move(dec.maps);
  out.records = std::move(dec.records);
  return out;
}

}  // namespace edgestereo
