#include "edgestereo/context_pyramid.hpp"

#include <algorithm>

namespace edgestereo {

ContextPyramidConfig ContextPyramidConfig::parse(const std::string& notation, int branch_channels) {
  check(notation.size() >= 3 && notation[1] == '-',
        "context pyramid: bad notation '" + notation + "', expected e.g. P-1_2_4_8");
  ContextPyramidConfig cfg;
  switch (notation[0]) {
    case 'C': cfg.kind = PyramidKind::Convolution; break;
    case 'P': cfg.kind = PyramidKind::Pooling; break;
    case 'D': cfg.kind = PyramidKind::Dilation; break;
    default: throw Error("context pyramid: unknown kind '" + notation.substr(0, 1) + "'");
  }
  std::array<int, 4> params{};
  std::size_t pos = 2, idx = 0;
  while (idx < 4) {
    check(pos < notation.size(),
          "context pyramid: expected 4 branch parameters in '" + notation + "'");
    std::size_t next = notation.find('_', pos);
    if (next == std::string::npos) next = notation.size();
    const std::string tok = notation.substr(pos, next - pos);
    check(!tok.empty() && tok.find_first_not_of("0123456789") == std::string::npos,
          "context pyramid: bad parameter '" + tok + "' in '" + notation + "'");
    params[idx++] = std::stoi(tok);
    pos = next + 1;
  }
  check(pos >= notation.size() + 1, "context pyramid: too many parameters in '" + notation + "'");
  cfg.branch_params = params;
  cfg.branch_channels = branch_channels;

  // Largest context scale first: biggest kernel (C), smallest pooled size (P),
  // biggest dilation rate (D).
  for (int i = 0; i < 3; ++i) {
    const bool ordered = cfg.kind == PyramidKind::Pooling ? params[i] < params[i + 1]
                                                          : params[i] > params[i + 1];
    check(ordered, "context pyramid: branch parameters of '" + notation + "' must be strictly " +
                       (cfg.kind == PyramidKind::Pooling ? "increasing" : "decreasing"));
  }
  for (int p : params) check(p >= 1, "context pyramid: parameters must be >= 1");
  if (cfg.kind == PyramidKind::Convolution)
    for (int p : params) check(p % 2 == 1, "context pyramid: convolution kernels must be odd");
  return cfg;
}

std::string ContextPyramidConfig::notation() const {
  std::string s;
  s += kind == PyramidKind::Convolution ? 'C' : (kind == PyramidKind::Pooling ? 'P' : 'D');
  s += '-';
  for (int i = 0; i < 4; ++i) {
    if (i) s += '_';
    s += std::to_string(branch_params[static_cast<std::size_t>(i)]);
  }
  return s;
}

ContextPyramid::ContextPyramid(ParamStore& store, const std::string& name,
                               const ContextPyramidConfig& cfg, int in_channels, DType dt, Rng& rng)
    : cfg_(cfg), in_channels_(in_channels) {
  branch_channels_ = cfg.branch_channels > 0 ? cfg.branch_channels : std::max(1, in_channels / 4);
  for (int i = 0; i < 4; ++i) {
    auto& br = branches_[static_cast<std::size_t>(i)];
    br.param = cfg.branch_params[static_cast<std::size_t>(i)];
    const std::string base = name + ".branch" + std::to_string(i);
    switch (cfg.kind) {
      case PyramidKind::Convolution: {
        const int k = br.param;
        br.conv_a = Conv2dLayer(store, base + ".conv0", in_channels, branch_channels_, k, 1,
                                (k - 1) / 2, 1, dt, rng);
        br.conv_b = Conv2dLayer(store, base + ".conv1", branch_channels_, branch_channels_, k, 1,
                                (k - 1) / 2, 1, dt, rng);
        break;
      }
      case PyramidKind::Pooling:
        br.conv_a =
            Conv2dLayer(store, base + ".conv0", in_channels, branch_channels_, 1, 1, 0, 1, dt, rng);
        break;
      case PyramidKind::Dilation: {
        const int rate = br.param;
        br.conv_a = Conv2dLayer(store, base + ".conv0", in_channels, branch_channels_, 3, 1, rate,
                                rate, dt, rng);
        br.conv_b = Conv2dLayer(store, base + ".conv1", branch_channels_, branch_channels_, 1, 1, 0,
                                1, dt, rng);
        break;
      }
    }
  }
}

NodePtr ContextPyramid::branch_forward(int index, const NodePtr& fm) const {
  check(index >= 0 && index < 4, "context pyramid: branch index out of range");
  const auto& br = branches_[static_cast<std::size_t>(index)];
  const int h = fm->value.dim(2), w = fm->value.dim(3);
  switch (cfg_.kind) {
    case PyramidKind::Convolution:
      return ops::relu(br.conv_b.forward(ops::relu(br.conv_a.forward(fm))));
    case PyramidKind::Pooling: {
      auto pooled = ops::adaptive_avg_pool(fm, std::min(br.param, h), std::min(br.param, w));
      return ops::bilinear_resize(ops::relu(br.conv_a.forward(pooled)), h, w);
    }
    case PyramidKind::Dilation:
      return ops::relu(br.conv_b.forward(ops::relu(br.conv_a.forward(fm))));
  }
  throw Error("context pyramid: unreachable");
}

NodePtr ContextPyramid::scene_prior(const NodePtr& fm) const {
  check(fm->value.rank() == 4 && fm->value.dim(1) == in_channels_,
        "context pyramid: input channels " + fm->value.shape_str() + " do not match configured " +
            std::to_string(in_channels_));
  std::vector<NodePtr> parts{fm};
  for (int i = 0; i < 4; ++i) parts.push_back(branch_forward(i, fm));
  return ops::concat_channels(parts);
}

}  // namespace edgestereo
