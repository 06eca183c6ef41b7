#ifndef TRIMETRIC_DATA_HPP_
#define TRIMETRIC_DATA_HPP_

#include <string>
#include <utility>
#include <vector>

#include "trimetric/rng.hpp"
#include "trimetric/tensor.hpp"

namespace trimetric {

struct LabeledImage {
  Tensor pixels;  // (3, H, W), values in [0, 1]
  int person_id = -1;
  std::string source;  // file path or "synthetic"
};

struct Dataset {
  std::vector<LabeledImage> images;
  std::vector<std::string> class_names;            // person_id -> directory name
  std::vector<std::vector<int>> images_by_class;   // person_id -> image indices

  int size() const { return static_cast<int>(images.size()); }
  int num_classes() const { return static_cast<int>(images_by_class.size()); }
  std::vector<int> labels_by_image() const;
  void rebuild_index();
};

struct AugmentConfig {
  int crop_height = 230;
  int crop_width = 80;
  int perturbation = 5;  // max |offset| in pixels, each axis

  // Crop plus perturbation must stay inside an (src_h, src_w) image.
  void validate_for(int src_h, int src_w) const;  // throws ConfigError
};

// One subdirectory per identity under root, images resized to the target
// extents. Ordering is lexicographic by path; unreadable files are skipped
// with a warning.
Dataset load_dataset(const std::string& root, int target_height, int target_width);

// Bilinear resize; a same-size target reproduces the input.
Tensor resize_bilinear(const Tensor& image, int out_h, int out_w);

// Center crop displaced by an integer offset uniform in [-r, r]^2. The
// result is an exact subtensor of the source.
Tensor augment_crop(const Tensor& image, const AugmentConfig& cfg, Rng& rng);

// Deterministic center crop (what evaluation consumes).
Tensor center_crop(const Tensor& image, int crop_h, int crop_w);

// Split by person: no identity appears on both sides. Train side gets
// floor(train_fraction * num_classes) classes.
std::pair<Dataset, Dataset> split_train_test(const Dataset& data, double train_fraction, Rng& rng);

// Identity-labeled images built from per-class color-band templates plus
// uniform pixel noise and a global brightness shift, both of amplitude
// noise_level. Classes stay linearly separable for noise_level <= 0.1.
Dataset synth_dataset(int num_classes, int images_per_class, double noise_level, Rng& rng,
                      int height = 20, int width = 12);

// Materialize a dataset as root/<person_id>/<image>.ppm.
void write_dataset(const Dataset& data, const std::string& root);

}  // namespace trimetric

#endif  // TRIMETRIC_DATA_HPP_
