#include "trimetric/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <vector>

#include <json.hpp>

#include "trimetric/error.hpp"
#include "trimetric/serialize.hpp"

namespace trimetric {

using nlohmann::json;

namespace {

template <typename Ptr>
struct ParamView {
  const char* name;
  Ptr data;
  std::int64_t count;
};

std::vector<ParamView<const double*>> param_views(const NetworkParams& p) {
  return {
      {"conv1_weights", p.conv1_w.data(), p.conv1_w.numel()},
      {"conv1_bias", p.conv1_b.data(), static_cast<std::int64_t>(p.conv1_b.size())},
      {"conv2_weights", p.conv2_w.data(), p.conv2_w.numel()},
      {"conv2_bias", p.conv2_b.data(), static_cast<std::int64_t>(p.conv2_b.size())},
      {"fc_weights", p.fc_w.data(), p.fc_w.numel()},
      {"fc_bias", p.fc_b.data(), static_cast<std::int64_t>(p.fc_b.size())},
  };
}

std::vector<ParamView<double*>> param_views(NetworkParams& p) {
  return {
      {"conv1_weights", p.conv1_w.data(), p.conv1_w.numel()},
      {"conv1_bias", p.conv1_b.data(), static_cast<std::int64_t>(p.conv1_b.size())},
      {"conv2_weights", p.conv2_w.data(), p.conv2_w.numel()},
      {"conv2_bias", p.conv2_b.data(), static_cast<std::int64_t>(p.conv2_b.size())},
      {"fc_weights", p.fc_w.data(), p.fc_w.numel()},
      {"fc_bias", p.fc_b.data(), static_cast<std::int64_t>(p.fc_b.size())},
  };
}

void write_le(std::ostream& out, const double* data, std::int64_t count) {
  if constexpr (std::endian::native == std::endian::little) {
    out.write(reinterpret_cast<const char*>(data), count * 8);
  } else {
    for (std::int64_t i = 0; i < count; ++i) {
      std::uint64_t bits;
      std::memcpy(&bits, &data[i], 8);
      char bytes[8];
      for (int b = 0; b < 8; ++b) bytes[b] = static_cast<char>(bits >> (8 * b));
      out.write(bytes, 8);
    }
  }
}

void read_le(std::istream& in, double* data, std::int64_t count) {
  if constexpr (std::endian::native == std::endian::little) {
    in.read(reinterpret_cast<char*>(data), count * 8);
  } else {
    for (std::int64_t i = 0; i < count; ++i) {
      unsigned char bytes[8];
      in.read(reinterpret_cast<char*>(bytes), 8);
      std::uint64_t bits = 0;
      for (int b = 0; b < 8; ++b) bits |= static_cast<std::uint64_t>(bytes[b]) << (8 * b);
      std::memcpy(&data[i], &bits, 8);
    }
  }
}

}  // namespace

void save_checkpoint(const std::string& path, const Network& net) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot write checkpoint: " + path);

  const NetworkParams& params = net.params;
  json header{{"arch", arch_to_json(net.arch)}, {"tensors", json::array()}};
  header["tensors"].push_back({{"name", "conv1_weights"}, {"shape", params.conv1_w.shape()}});
  header["tensors"].push_back({{"name", "conv1_bias"}, {"shape", {static_cast<int>(params.conv1_b.size())}}});
  header["tensors"].push_back({{"name", "conv2_weights"}, {"shape", params.conv2_w.shape()}});
  header["tensors"].push_back({{"name", "conv2_bias"}, {"shape", {static_cast<int>(params.conv2_b.size())}}});
  header["tensors"].push_back({{"name", "fc_weights"}, {"shape", params.fc_w.shape()}});
  header["tensors"].push_back({{"name", "fc_bias"}, {"shape", {static_cast<int>(params.fc_b.size())}}});

  out << kCheckpointFormatTag << '\n' << header.dump() << '\n';
  for (const auto& view : param_views(params)) {
    write_le(out, view.data, view.count);
  }
  if (!out) throw ConfigError("checkpoint write failed: " + path);
}

Network load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open checkpoint: " + path);

  std::string tag, header_line;
  if (!std::getline(in, tag) || tag != kCheckpointFormatTag) {
    throw ConfigError("checkpoint " + path + ": missing format tag '" +
                      std::string(kCheckpointFormatTag) + "'");
  }
  if (!std::getline(in, header_line)) throw ConfigError("checkpoint " + path + ": missing header");

  Network net;
  try {
    const json header = json::parse(header_line);
    net.arch = arch_from_json(header.at("arch"));
    net.params = NetworkParams::zeros(net.arch);

    const auto& tensors = header.at("tensors");
    auto views = param_views(net.params);
    if (!tensors.is_array() || tensors.size() != views.size()) {
      throw ConfigError("unexpected tensor list");
    }
    for (std::size_t i = 0; i < views.size(); ++i) {
      const std::string name = tensors[i].at("name").get<std::string>();
      const auto shape = tensors[i].at("shape").get<std::vector<int>>();
      if (name != views[i].name) {
        throw ConfigError("tensor '" + name + "' where '" + std::string(views[i].name) +
                          "' was expected");
      }
      if (shape_numel(shape) != views[i].count) {
        throw ConfigError("tensor '" + name + "' shape disagrees with the architecture");
      }
      read_le(in, views[i].data, views[i].count);
    }
  } catch (const json::exception& e) {
    throw ConfigError("checkpoint " + path + ": bad header: " + e.what());
  } catch (const ConfigError& e) {
    throw ConfigError("checkpoint " + path + ": " + e.what());
  }
  if (!in) throw ConfigError("checkpoint " + path + ": truncated parameter data");
  if (!net.params.all_finite()) throw NumericError("checkpoint " + path + ": non-finite parameters");
  return net;
}

}  // namespace trimetric
