#ifndef TRIMETRIC_RUN_CONFIG_HPP_
#define TRIMETRIC_RUN_CONFIG_HPP_

#include <optional>
#include <string>

#include "trimetric/data.hpp"
#include "trimetric/network.hpp"
#include "trimetric/trainer.hpp"

namespace trimetric {

struct SyntheticSpec {
  int classes = 10;
  int images_per_class = 6;
  double noise = 0.1;
  int height = 20;
  int width = 12;
  std::uint64_t seed = 0;
};

struct DataConfig {
  std::string root;                       // directory of identity subdirectories
  std::optional<SyntheticSpec> synthetic; // generated in-memory instead
  // Loaded images are resized to these extents; 0 means the network input
  // size. Set them larger than the input when crop augmentation is on.
  int resize_height = 0;
  int resize_width = 0;
  double train_fraction = 1.0;            // by-person split; 1.0 trains on everything
  std::uint64_t split_seed = 0;
};

struct EvalConfig {
  int trials = 10;
  int max_rank = 30;
};

struct AugmentToggle {
  bool enabled = false;
  AugmentConfig crop;
};

struct OutputConfig {
  std::string checkpoint = "model.trimetric";
  std::string log = "train.jsonl";
  std::string cmc_csv = "cmc.csv";
  std::string cmc_json = "cmc.json";
};

// Everything one run needs, parsed from one strict JSON document (unknown
// keys are rejected). Command-line flags override individual fields.
struct RunConfig {
  ArchitectureConfig arch = ArchitectureConfig::desk();
  bool arch_specified = false;  // whether the document carried an "arch" block
  TrainConfig train;
  AugmentToggle augment;
  EvalConfig eval;
  DataConfig data;
  OutputConfig out;

  static RunConfig from_json_file(const std::string& path);
  static RunConfig from_json_text(const std::string& text);
  void validate() const;  // throws ConfigError
};

}  // namespace trimetric

#endif  // TRIMETRIC_RUN_CONFIG_HPP_
