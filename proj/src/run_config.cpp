#include "trimetric/run_config.hpp"

#include <fstream>
#include <sstream>

#include <json.hpp>

#include "trimetric/error.hpp"
#include "trimetric/serialize.hpp"

namespace trimetric {

using nlohmann::json;

namespace {

SyntheticSpec synthetic_from_json(const json& j) {
  require_known_keys(j, "data.synthetic",
                     {"classes", "images_per_class", "noise", "height", "width", "seed"});
  SyntheticSpec s;
  if (j.contains("classes")) s.classes = j.at("classes").get<int>();
  if (j.contains("images_per_class")) s.images_per_class = j.at("images_per_class").get<int>();
  if (j.contains("noise")) s.noise = j.at("noise").get<double>();
  if (j.contains("height")) s.height = j.at("height").get<int>();
  if (j.contains("width")) s.width = j.at("width").get<int>();
  if (j.contains("seed")) s.seed = j.at("seed").get<std::uint64_t>();
  return s;
}

TrainConfig train_from_json(const json& j) {
  require_known_keys(j, "train",
                     {"max_iterations", "learning_rate", "classes_per_iteration",
                      "triplets_per_person", "convergence_threshold", "margin", "seed"});
  TrainConfig t;
  if (j.contains("max_iterations")) t.max_iterations = j.at("max_iterations").get<int>();
  if (j.contains("learning_rate")) {
    const auto& lr = j.at("learning_rate");
    require_known_keys(lr, "train.learning_rate", {"base", "decay"});
    if (lr.contains("base")) t.learning_rate.base = lr.at("base").get<double>();
    if (lr.contains("decay")) t.learning_rate.decay = lr.at("decay").get<double>();
  }
  if (j.contains("classes_per_iteration"))
    t.classes_per_iteration = j.at("classes_per_iteration").get<int>();
  if (j.contains("triplets_per_person"))
    t.triplets_per_person = j.at("triplets_per_person").get<int>();
  if (j.contains("convergence_threshold"))
    t.convergence_threshold = j.at("convergence_threshold").get<int>();
  if (j.contains("margin")) t.loss.margin = j.at("margin").get<double>();
  if (j.contains("seed")) t.seed = j.at("seed").get<std::uint64_t>();
  return t;
}

AugmentToggle augment_from_json(const json& j) {
  require_known_keys(j, "augment", {"enabled", "crop_height", "crop_width", "perturbation"});
  AugmentToggle a;
  if (j.contains("enabled")) a.enabled = j.at("enabled").get<bool>();
  if (j.contains("crop_height")) a.crop.crop_height = j.at("crop_height").get<int>();
  if (j.contains("crop_width")) a.crop.crop_width = j.at("crop_width").get<int>();
  if (j.contains("perturbation")) a.crop.perturbation = j.at("perturbation").get<int>();
  return a;
}

EvalConfig eval_from_json(const json& j) {
  require_known_keys(j, "eval", {"trials", "max_rank"});
  EvalConfig e;
  if (j.contains("trials")) e.trials = j.at("trials").get<int>();
  if (j.contains("max_rank")) e.max_rank = j.at("max_rank").get<int>();
  return e;
}

DataConfig data_from_json(const json& j) {
  require_known_keys(j, "data",
                     {"root", "synthetic", "resize_height", "resize_width", "train_fraction",
                      "split_seed"});
  DataConfig d;
  if (j.contains("root")) d.root = j.at("root").get<std::string>();
  if (j.contains("synthetic")) d.synthetic = synthetic_from_json(j.at("synthetic"));
  if (j.contains("resize_height")) d.resize_height = j.at("resize_height").get<int>();
  if (j.contains("resize_width")) d.resize_width = j.at("resize_width").get<int>();
  if (j.contains("train_fraction")) d.train_fraction = j.at("train_fraction").get<double>();
  if (j.contains("split_seed")) d.split_seed = j.at("split_seed").get<std::uint64_t>();
  return d;
}

OutputConfig out_from_json(const json& j) {
  require_known_keys(j, "out", {"checkpoint", "log", "cmc_csv", "cmc_json"});
  OutputConfig o;
  if (j.contains("checkpoint")) o.checkpoint = j.at("checkpoint").get<std::string>();
  if (j.contains("log")) o.log = j.at("log").get<std::string>();
  if (j.contains("cmc_csv")) o.cmc_csv = j.at("cmc_csv").get<std::string>();
  if (j.contains("cmc_json")) o.cmc_json = j.at("cmc_json").get<std::string>();
  return o;
}

}  // namespace

RunConfig RunConfig::from_json_text(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  require_known_keys(j, "config", {"arch", "train", "augment", "eval", "data", "out"});

  RunConfig cfg;
  if (j.contains("arch")) {
    cfg.arch = arch_from_json(j.at("arch"));
    cfg.arch_specified = true;
  }
  if (j.contains("train")) cfg.train = train_from_json(j.at("train"));
  if (j.contains("augment")) cfg.augment = augment_from_json(j.at("augment"));
  if (j.contains("eval")) cfg.eval = eval_from_json(j.at("eval"));
  if (j.contains("data")) cfg.data = data_from_json(j.at("data"));
  if (j.contains("out")) cfg.out = out_from_json(j.at("out"));
  cfg.validate();
  return cfg;
}

RunConfig RunConfig::from_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path);
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return from_json_text(buffer.str());
}

void RunConfig::validate() const {
  arch.validate();
  train.validate();
  if (eval.trials < 1) throw ConfigError("eval.trials must be >= 1");
  if (eval.max_rank < 1) throw ConfigError("eval.max_rank must be >= 1");
  if (!(data.train_fraction >= 0.0 && data.train_fraction <= 1.0)) {
    throw ConfigError("data.train_fraction must lie in [0, 1]");
  }
  if ((data.resize_height == 0) != (data.resize_width == 0)) {
    throw ConfigError("data.resize_height and data.resize_width must be set together");
  }
  if (augment.enabled) {
    if (augment.crop.crop_height != arch.in_height || augment.crop.crop_width != arch.in_width) {
      throw ConfigError("augment crop " + std::to_string(augment.crop.crop_height) + "x" +
                        std::to_string(augment.crop.crop_width) +
                        " must equal the network input " + std::to_string(arch.in_height) + "x" +
                        std::to_string(arch.in_width));
    }
    const int src_h = data.synthetic ? data.synthetic->height : data.resize_height;
    const int src_w = data.synthetic ? data.synthetic->width : data.resize_width;
    if (src_h == 0) {
      throw ConfigError("augmentation needs data.resize_height/resize_width larger than the crop");
    }
    augment.crop.validate_for(src_h, src_w);
  }
  if (data.synthetic) {
    const SyntheticSpec& s = *data.synthetic;
    if (s.classes < 2) throw ConfigError("data.synthetic.classes must be >= 2");
    if (s.images_per_class < 1) throw ConfigError("data.synthetic.images_per_class must be >= 1");
    if (s.noise < 0.0) throw ConfigError("data.synthetic.noise must be >= 0");
    if (s.height < 1 || s.width < 1) throw ConfigError("data.synthetic extents must be positive");
  }
}

}  // namespace trimetric
