#include "trimetric/serialize.hpp"

#include <algorithm>

#include "trimetric/error.hpp"

namespace trimetric {

using nlohmann::json;

namespace {

json conv_to_json(const ConvSpec& c) {
  return json{{"kernels", c.kernels}, {"kernel_size", c.kernel_size}, {"stride", c.stride}};
}

ConvSpec conv_from_json(const json& j, const std::string& context) {
  require_known_keys(j, context, {"kernels", "kernel_size", "stride"});
  ConvSpec c;
  c.kernels = j.at("kernels").get<int>();
  c.kernel_size = j.at("kernel_size").get<int>();
  c.stride = j.at("stride").get<int>();
  return c;
}

}  // namespace

json arch_to_json(const ArchitectureConfig& cfg) {
  return json{{"input", {cfg.in_channels, cfg.in_height, cfg.in_width}},
              {"conv1", conv_to_json(cfg.conv1)},
              {"conv2", conv_to_json(cfg.conv2)},
              {"pool", {{"window", cfg.pool_window}, {"stride", cfg.pool_stride}}},
              {"embedding_dim", cfg.embedding_dim},
              {"norm_epsilon", cfg.norm_epsilon},
              {"conv_init_std", cfg.conv_init_std},
              {"fc_init_std", cfg.fc_init_std}};
}

ArchitectureConfig arch_from_json(const json& j) {
  require_known_keys(j, "arch",
                     {"preset", "input", "conv1", "conv2", "pool", "embedding_dim", "norm_epsilon",
                      "conv_init_std", "fc_init_std"});
  ArchitectureConfig cfg;
  if (j.contains("preset")) {
    const std::string preset = j.at("preset").get<std::string>();
    if (preset == "paper") cfg = ArchitectureConfig::paper();
    else if (preset == "desk") cfg = ArchitectureConfig::desk();
    else throw ConfigError("arch: unknown preset '" + preset + "' (expected paper or desk)");
  }
  if (j.contains("input")) {
    const auto in = j.at("input");
    if (!in.is_array() || in.size() != 3) throw ConfigError("arch: input must be [C, H, W]");
    cfg.in_channels = in[0].get<int>();
    cfg.in_height = in[1].get<int>();
    cfg.in_width = in[2].get<int>();
  }
  if (j.contains("conv1")) cfg.conv1 = conv_from_json(j.at("conv1"), "arch.conv1");
  if (j.contains("conv2")) cfg.conv2 = conv_from_json(j.at("conv2"), "arch.conv2");
  if (j.contains("pool")) {
    const auto& pool = j.at("pool");
    require_known_keys(pool, "arch.pool", {"window", "stride"});
    if (pool.contains("window")) cfg.pool_window = pool.at("window").get<int>();
    if (pool.contains("stride")) cfg.pool_stride = pool.at("stride").get<int>();
  }
  if (j.contains("embedding_dim")) cfg.embedding_dim = j.at("embedding_dim").get<int>();
  if (j.contains("norm_epsilon")) cfg.norm_epsilon = j.at("norm_epsilon").get<double>();
  if (j.contains("conv_init_std")) cfg.conv_init_std = j.at("conv_init_std").get<double>();
  if (j.contains("fc_init_std")) cfg.fc_init_std = j.at("fc_init_std").get<double>();
  cfg.validate();
  return cfg;
}

void require_known_keys(const json& obj, const std::string& context,
                        const std::vector<std::string>& allowed) {
  if (!obj.is_object()) throw ConfigError(context + " must be a JSON object");
  for (const auto& item : obj.items()) {
    if (std::find(allowed.begin(), allowed.end(), item.key()) == allowed.end()) {
      throw ConfigError(context + ": unknown key '" + item.key() + "'");
    }
  }
}

}  // namespace trimetric
