#include "edgestereo/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>

#include <json.hpp>

namespace edgestereo {

using nlohmann::json;

namespace {
constexpr char kMagic[4] = {'E', 'S', 'C', 'P'};
constexpr std::uint32_t kVersion = 1;

static_assert(std::endian::native == std::endian::little,
              "checkpoint payload is little-endian; add byte swapping for this platform");

void write_tensor(std::ofstream& out, const Tensor& t) {
  check(t.dtype() == DType::F32, "checkpoint: tensors must be f32");
  auto s = t.data<float>();
  out.write(reinterpret_cast<const char*>(s.data()),
            static_cast<std::streamsize>(s.size() * sizeof(float)));
}

Tensor read_tensor(std::ifstream& in, const std::vector<int>& shape) {
  Tensor t(shape, DType::F32);
  auto s = t.data<float>();
  in.read(reinterpret_cast<char*>(s.data()), static_cast<std::streamsize>(s.size() * sizeof(float)));
  check(static_cast<std::size_t>(in.gcount()) == s.size() * sizeof(float),
        "checkpoint: truncated payload");
  return t;
}

json manifest_entry(const std::pair<std::string, Tensor>& t) {
  return json{{"name", t.first}, {"shape", t.second.shape()}};
}
}  // namespace

void checkpoint_write(const std::string& path, const CheckpointData& data) {
  std::ofstream out(path, std::ios::binary);
  check(out.good(), "checkpoint: cannot open '" + path + "' for writing");

  json meta;
  meta["model_config"] = json::parse(data.model_config_json.empty() ? "{}" : data.model_config_json);
  meta["phase_index"] = data.phase_index;
  meta["iteration"] = data.iteration;
  meta["adam_step"] = data.adam_step;
  json params = json::array(), moments = json::array();
  for (const auto& t : data.params) params.push_back(manifest_entry(t));
  for (const auto& t : data.moments) moments.push_back(manifest_entry(t));
  meta["params"] = std::move(params);
  meta["moments"] = std::move(moments);
  const std::string meta_str = meta.dump();

  out.write(kMagic, 4);
  const std::uint32_t version = kVersion;
  out.write(reinterpret_cast<const char*>(&version), sizeof(version));
  const std::uint64_t len = meta_str.size();
  out.write(reinterpret_cast<const char*>(&len), sizeof(len));
  out.write(meta_str.data(), static_cast<std::streamsize>(meta_str.size()));
  for (const auto& t : data.params) write_tensor(out, t.second);
  for (const auto& t : data.moments) write_tensor(out, t.second);
  check(out.good(), "checkpoint: write failed for '" + path + "'");
}

CheckpointData checkpoint_read(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  check(in.good(), "checkpoint: cannot open '" + path + "'");
  char magic[4];
  in.read(magic, 4);
  check(in.gcount() == 4 && std::memcmp(magic, kMagic, 4) == 0,
        "checkpoint: bad magic in '" + path + "'");
  std::uint32_t version = 0;
  in.read(reinterpret_cast<char*>(&version), sizeof(version));
  check(version == kVersion, "checkpoint: unsupported version " + std::to_string(version));
  std::uint64_t len = 0;
  in.read(reinterpret_cast<char*>(&len), sizeof(len));
  std::string meta_str(len, '\0');
  in.read(meta_str.data(), static_cast<std::streamsize>(len));
  check(static_cast<std::uint64_t>(in.gcount()) == len, "checkpoint: truncated manifest");

  json meta;
  try {
    meta = json::parse(meta_str);
  } catch (const json::exception& e) {
    throw Error(std::string("checkpoint: bad manifest: ") + e.what());
  }

  CheckpointData data;
  data.version = version;
  data.model_config_json = meta.at("model_config").dump();
  data.phase_index = meta.value("phase_index", -1);
  data.iteration = meta.value("iteration", std::int64_t{0});
  data.adam_step = meta.value("adam_step", std::int64_t{0});
  for (const char* section : {"params", "moments"}) {
    auto& dst = std::string(section) == "params" ? data.params : data.moments;
    for (const auto& e : meta.at(section)) {
      const std::string name = e.at("name");
      const std::vector<int> shape = e.at("shape");
      dst.emplace_back(name, Tensor());
      dst.back().second = read_tensor(in, shape);
    }
  }
  return data;
}

CheckpointData snapshot_training_state(const EdgeStereoModel& model, const Adam* optimizer,
                                       int phase_index, std::int64_t iteration) {
  CheckpointData data;
  data.model_config_json = model.config().to_json();
  data.phase_index = phase_index;
  data.iteration = iteration;
  for (const auto& p : model.named_params()) data.params.emplace_back(p.name, p.node->value);
  if (optimizer) {
    data.adam_step = optimizer->step_count();
    for (const auto& s : const_cast<Adam*>(optimizer)->slots()) {
      data.moments.emplace_back("m:" + s.name, s.m);
      data.moments.emplace_back("v:" + s.name, s.v);
    }
  }
  return data;
}

void restore_model(const CheckpointData& data, EdgeStereoModel& model) {
  auto params = model.named_params();
  check(params.size() == data.params.size(),
        "checkpoint: parameter count mismatch (model has " + std::to_string(params.size()) +
            ", checkpoint has " + std::to_string(data.params.size()) + ")");
  for (std::size_t i = 0; i < params.size(); ++i) {
    const auto& [name, tensor] = data.params[i];
    check(params[i].name == name, "checkpoint: manifest mismatch at entry " + std::to_string(i) +
                                      ": model '" + params[i].name + "' vs checkpoint '" + name + "'");
    check(params[i].node->value.shape() == tensor.shape(),
          "checkpoint: shape mismatch for '" + name + "': model " +
              params[i].node->value.shape_str() + " vs checkpoint " + tensor.shape_str());
    check(params[i].node->value.dtype() == tensor.dtype(),
          "checkpoint: dtype mismatch for '" + name + "'");
    params[i].node->value = tensor;
  }
}

void restore_optimizer(const CheckpointData& data, Adam& optimizer) {
  auto& slots = optimizer.slots();
  check(data.moments.size() == 2 * slots.size(),
        "checkpoint: moment count does not match the optimizer's trainable set");
  for (std::size_t i = 0; i < slots.size(); ++i) {
    const auto& m = data.moments[2 * i];
    const auto& v = data.moments[2 * i + 1];
    check(m.first == "m:" + slots[i].name && v.first == "v:" + slots[i].name,
          "checkpoint: moment manifest mismatch for '" + slots[i].name + "'");
    check(m.second.same_shape(slots[i].m) && v.second.same_shape(slots[i].v),
          "checkpoint: moment shape mismatch for '" + slots[i].name + "'");
    slots[i].m = m.second;
    slots[i].v = v.second;
  }
  optimizer.set_step_count(data.adam_step);
}

}  // namespace edgestereo
