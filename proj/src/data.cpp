#include "trimetric/data.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <map>
#include <numeric>

#include "trimetric/error.hpp"
#include "trimetric/image_io.hpp"
#include "trimetric/log.hpp"

namespace fs = std::filesystem;

namespace trimetric {

std::vector<int> Dataset::labels_by_image() const {
  std::vector<int> labels(images.size());
  for (std::size_t i = 0; i < images.size(); ++i) labels[i] = images[i].person_id;
  return labels;
}

void Dataset::rebuild_index() {
  images_by_class.assign(class_names.size(), {});
  for (std::size_t i = 0; i < images.size(); ++i) {
    const int pid = images[i].person_id;
    if (pid < 0 || pid >= static_cast<int>(class_names.size())) {
      throw ContractViolation("dataset: image " + std::to_string(i) + " has out-of-range person id");
    }
    images_by_class[static_cast<std::size_t>(pid)].push_back(static_cast<int>(i));
  }
}

void AugmentConfig::validate_for(int src_h, int src_w) const {
  if (crop_height < 1 || crop_width < 1) throw ConfigError("augment: crop extents must be positive");
  if (perturbation < 0) throw ConfigError("augment: perturbation must be >= 0");
  if (crop_height > src_h || crop_width > src_w) {
    throw ConfigError("augment: crop " + std::to_string(crop_height) + "x" +
                      std::to_string(crop_width) + " does not fit in " + std::to_string(src_h) +
                      "x" + std::to_string(src_w));
  }
  const int top = (src_h - crop_height) / 2;
  const int left = (src_w - crop_width) / 2;
  const int bottom = src_h - crop_height - top;
  const int right = src_w - crop_width - left;
  if (perturbation > std::min({top, bottom, left, right})) {
    throw ConfigError("augment: perturbation " + std::to_string(perturbation) +
                      " can push the crop out of bounds");
  }
}

Dataset load_dataset(const std::string& root, int target_height, int target_width) {
  if (!fs::is_directory(root)) throw ConfigError("dataset root is not a directory: " + root);

  std::vector<fs::path> class_dirs;
  for (const auto& entry : fs::directory_iterator(root)) {
    if (entry.is_directory()) class_dirs.push_back(entry.path());
  }
  std::sort(class_dirs.begin(), class_dirs.end());
  if (class_dirs.empty()) throw ConfigError("dataset root holds no identity directories: " + root);

  Dataset data;
  for (const auto& dir : class_dirs) {
    std::vector<fs::path> files;
    for (const auto& entry : fs::directory_iterator(dir)) {
      if (entry.is_regular_file()) files.push_back(entry.path());
    }
    std::sort(files.begin(), files.end());

    std::vector<LabeledImage> decoded;
    for (const auto& file : files) {
      try {
        Tensor img = read_image(file.string());
        if (img.dim(1) != target_height || img.dim(2) != target_width) {
          img = resize_bilinear(img, target_height, target_width);
        }
        decoded.push_back({std::move(img), -1, file.string()});
      } catch (const std::exception& e) {
        warn(std::string("skipping unreadable image: ") + e.what());
      }
    }
    if (decoded.empty()) {
      warn("identity directory " + dir.string() + " holds no readable images, omitted");
      continue;
    }
    const int pid = static_cast<int>(data.class_names.size());
    data.class_names.push_back(dir.filename().string());
    for (auto& img : decoded) {
      img.person_id = pid;
      data.images.push_back(std::move(img));
    }
  }
  if (data.images.empty()) throw ConfigError("no readable images under dataset root: " + root);
  data.rebuild_index();
  return data;
}

Tensor resize_bilinear(const Tensor& image, int out_h, int out_w) {
  if (image.rank() != 3) throw ShapeError("resize: image must be (C,H,W)");
  if (out_h < 1 || out_w < 1) throw ConfigError("resize: target extents must be positive");
  const int channels = image.dim(0), in_h = image.dim(1), in_w = image.dim(2);
  if (in_h == out_h && in_w == out_w) return image;

  Tensor out({channels, out_h, out_w});
  const double scale_h = static_cast<double>(in_h) / out_h;
  const double scale_w = static_cast<double>(in_w) / out_w;
  for (int y = 0; y < out_h; ++y) {
    // pixel centers, clamped into the source grid
    const double sy = std::clamp((y + 0.5) * scale_h - 0.5, 0.0, static_cast<double>(in_h - 1));
    const int y0 = static_cast<int>(sy);
    const int y1 = std::min(y0 + 1, in_h - 1);
    const double fy = sy - y0;
    for (int x = 0; x < out_w; ++x) {
      const double sx = std::clamp((x + 0.5) * scale_w - 0.5, 0.0, static_cast<double>(in_w - 1));
      const int x0 = static_cast<int>(sx);
      const int x1 = std::min(x0 + 1, in_w - 1);
      const double fx = sx - x0;
      for (int c = 0; c < channels; ++c) {
        const double top = image.at(c, y0, x0) * (1.0 - fx) + image.at(c, y0, x1) * fx;
        const double bot = image.at(c, y1, x0) * (1.0 - fx) + image.at(c, y1, x1) * fx;
        out.at(c, y, x) = top * (1.0 - fy) + bot * fy;
      }
    }
  }
  return out;
}

namespace {

Tensor crop_at(const Tensor& image, int top, int left, int crop_h, int crop_w) {
  const int channels = image.dim(0);
  Tensor out({channels, crop_h, crop_w});
  for (int c = 0; c < channels; ++c) {
    for (int y = 0; y < crop_h; ++y) {
      for (int x = 0; x < crop_w; ++x) {
        out.at(c, y, x) = image.at(c, top + y, left + x);
      }
    }
  }
  return out;
}

}  // namespace

Tensor augment_crop(const Tensor& image, const AugmentConfig& cfg, Rng& rng) {
  if (image.rank() != 3) throw ShapeError("augment_crop: image must be (C,H,W)");
  cfg.validate_for(image.dim(1), image.dim(2));
  const int top = (image.dim(1) - cfg.crop_height) / 2 + uniform_offset(rng, cfg.perturbation);
  const int left = (image.dim(2) - cfg.crop_width) / 2 + uniform_offset(rng, cfg.perturbation);
  return crop_at(image, top, left, cfg.crop_height, cfg.crop_width);
}

Tensor center_crop(const Tensor& image, int crop_h, int crop_w) {
  if (image.rank() != 3) throw ShapeError("center_crop: image must be (C,H,W)");
  if (crop_h > image.dim(1) || crop_w > image.dim(2)) {
    throw ShapeError("center_crop: crop exceeds image " + image.shape_str());
  }
  return crop_at(image, (image.dim(1) - crop_h) / 2, (image.dim(2) - crop_w) / 2, crop_h, crop_w);
}

namespace {

Dataset subset_by_classes(const Dataset& data, const std::vector<int>& class_ids) {
  Dataset out;
  for (int cid : class_ids) {
    const int new_pid = static_cast<int>(out.class_names.size());
    out.class_names.push_back(data.class_names[static_cast<std::size_t>(cid)]);
    for (int idx : data.images_by_class[static_cast<std::size_t>(cid)]) {
      LabeledImage img = data.images[static_cast<std::size_t>(idx)];
      img.person_id = new_pid;
      out.images.push_back(std::move(img));
    }
  }
  out.rebuild_index();
  return out;
}

}  // namespace

std::pair<Dataset, Dataset> split_train_test(const Dataset& data, double train_fraction, Rng& rng) {
  const int k = data.num_classes();
  if (k < 2) throw ConfigError("split: dataset needs at least 2 classes");
  if (!(train_fraction >= 0.0 && train_fraction <= 1.0)) {
    throw ConfigError("split: train_fraction must lie in [0, 1]");
  }

  std::vector<int> order(static_cast<std::size_t>(k));
  std::iota(order.begin(), order.end(), 0);
  for (int i = k - 1; i > 0; --i) {
    const int j = static_cast<int>(uniform_index(rng, static_cast<std::uint64_t>(i) + 1));
    std::swap(order[static_cast<std::size_t>(i)], order[static_cast<std::size_t>(j)]);
  }

  const int n_train = static_cast<int>(std::floor(train_fraction * k));
  std::vector<int> train_ids(order.begin(), order.begin() + n_train);
  std::vector<int> test_ids(order.begin() + n_train, order.end());
  std::sort(train_ids.begin(), train_ids.end());
  std::sort(test_ids.begin(), test_ids.end());
  return {subset_by_classes(data, train_ids), subset_by_classes(data, test_ids)};
}

namespace {

constexpr int kBands = 4;
const double kLevels[] = {0.15, 0.5, 0.85};

// Per-class template: kBands horizontal bands, each band a color with
// channels drawn from kLevels. Quantized levels keep distinct templates
// far apart in pixel space.
std::vector<double> draw_template_code(Rng& rng) {
  std::vector<double> code(kBands * 3);
  for (double& v : code) v = kLevels[uniform_index(rng, 3)];
  return code;
}

Tensor render_template(const std::vector<double>& code, int height, int width) {
  Tensor img({3, height, width});
  for (int y = 0; y < height; ++y) {
    const int band = std::min(y * kBands / height, kBands - 1);
    for (int x = 0; x < width; ++x) {
      for (int c = 0; c < 3; ++c) img.at(c, y, x) = code[static_cast<std::size_t>(band * 3 + c)];
    }
  }
  return img;
}

}  // namespace

Dataset synth_dataset(int num_classes, int images_per_class, double noise_level, Rng& rng,
                      int height, int width) {
  if (num_classes < 2) throw ConfigError("synth: need at least 2 classes");
  if (images_per_class < 1) throw ConfigError("synth: need at least 1 image per class");
  if (noise_level < 0.0) throw ConfigError("synth: noise_level must be >= 0");

  std::vector<std::vector<double>> codes;
  codes.reserve(static_cast<std::size_t>(num_classes));
  while (static_cast<int>(codes.size()) < num_classes) {
    std::vector<double> code = draw_template_code(rng);
    if (std::find(codes.begin(), codes.end(), code) == codes.end()) codes.push_back(std::move(code));
  }

  Dataset data;
  for (int cls = 0; cls < num_classes; ++cls) {
    char name[16];
    std::snprintf(name, sizeof name, "p%03d", cls);
    data.class_names.emplace_back(name);
    const Tensor tmpl = render_template(codes[static_cast<std::size_t>(cls)], height, width);
    for (int i = 0; i < images_per_class; ++i) {
      Tensor img = tmpl;
      const double brightness = uniform_in(rng, -noise_level, noise_level);
      const std::int64_t n = img.numel();
      for (std::int64_t j = 0; j < n; ++j) {
        const double noisy = img[j] + uniform_in(rng, -noise_level, noise_level) + brightness;
        img[j] = std::clamp(noisy, 0.0, 1.0);
      }
      data.images.push_back({std::move(img), cls, "synthetic"});
    }
  }
  data.rebuild_index();
  return data;
}

void write_dataset(const Dataset& data, const std::string& root) {
  std::error_code ec;
  fs::create_directories(root, ec);
  if (ec || !fs::is_directory(root)) throw ConfigError("cannot create output directory: " + root);
  for (int cls = 0; cls < data.num_classes(); ++cls) {
    const fs::path dir = fs::path(root) / data.class_names[static_cast<std::size_t>(cls)];
    fs::create_directories(dir, ec);
    if (ec) throw ConfigError("cannot create class directory: " + dir.string());
    int seq = 0;
    for (int idx : data.images_by_class[static_cast<std::size_t>(cls)]) {
      char name[24];
      std::snprintf(name, sizeof name, "img%03d.ppm", seq++);
      write_ppm((dir / name).string(), data.images[static_cast<std::size_t>(idx)].pixels);
    }
  }
}

}  // namespace trimetric
