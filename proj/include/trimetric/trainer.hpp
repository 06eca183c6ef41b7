#ifndef TRIMETRIC_TRAINER_HPP_
#define TRIMETRIC_TRAINER_HPP_

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "trimetric/data.hpp"
#include "trimetric/network.hpp"
#include "trimetric/triplet_loss.hpp"

namespace trimetric {

struct LearningRateSchedule {
  double base = 0.01;
  double decay = 1.0;  // multiplicative per iteration; 1.0 = constant

  double at(int iteration) const;
  void validate() const;  // throws ConfigError
};

struct TrainConfig {
  int max_iterations = 1000;  // T
  LearningRateSchedule learning_rate;
  int classes_per_iteration = 40;
  int triplets_per_person = 80;
  int convergence_threshold = 10;  // stop below this many violated triplets
  std::uint64_t seed = 0;
  LossConfig loss;

  void validate() const;  // throws ConfigError
};

struct PropagationCounter {
  std::int64_t forward_count = 0;
  std::int64_t backward_count = 0;
  void reset() { forward_count = backward_count = 0; }
};

struct IterationReport {
  int iteration = 0;
  double objective = 0.0;
  int violated = 0;  // triplets with distance_diff > 0
  int distinct_images = 0;
  int triplet_count = 0;
  std::int64_t forward_count = 0;
  std::int64_t backward_count = 0;
  double wall_ms = 0.0;
};

std::string to_json_line(const IterationReport& report);

struct TrainResult {
  NetworkParams params;
  std::vector<IterationReport> reports;
  bool converged = false;
};

// Resolves an image id from a triplet set to its pixels for the current
// iteration. The reference must stay valid for the duration of the call.
using ImageLookup = std::function<const Tensor&(int)>;

// One-iteration objective gradient plus its instrumentation.
struct GradientOutcome {
  NetworkParams grad;
  double objective = 0.0;
  int violated = 0;
  int distinct_images = 0;
  int triplet_count = 0;
  PropagationCounter counts;
};

// Naive route: three forward and three backward passes per triplet,
// regardless of image sharing.
GradientOutcome triplet_based_gradient(std::span<const Triplet> triplets,
                                       const ImageLookup& images, const NetworkParams& params,
                                       const ArchitectureConfig& arch, const LossConfig& loss);

// Shared route: one forward and one backward pass per distinct image, with
// the per-embedding loss gradients aggregated analytically first.
GradientOutcome image_based_gradient(std::span<const Triplet> triplets,
                                     const ImageLookup& images, const NetworkParams& params,
                                     const ArchitectureConfig& arch, const LossConfig& loss);

// W -= learning_rate * grad. Throws NumericError on a non-finite gradient.
void sgd_update(NetworkParams& params, const NetworkParams& grad, double learning_rate);

// Triplets whose matched pair sits strictly farther than the mismatched
// pair. An exact tie counts as satisfied.
int count_violations(const ImageTable& table, std::span<const Triplet> triplets);

// Per selected class, per_person triplets: queries cycle over the class's
// images, the matched reference is uniform over the rest of the class and
// the mismatched reference uniform over the other selected classes' images.
// Classes with fewer than two images are skipped with a warning.
std::vector<Triplet> generate_triplets(const Dataset& data, std::span<const int> selected_classes,
                                       int per_person, Rng& rng);

// Fixed-set drivers: run exactly cfg.max_iterations over the given
// triplets. Exist for verification and benchmarking.
TrainResult train_triplet_based(std::span<const Triplet> triplets, const ImageLookup& images,
                                Network net, const TrainConfig& cfg,
                                std::ostream* log_stream = nullptr);
TrainResult train_image_based(std::span<const Triplet> triplets, const ImageLookup& images,
                              Network net, const TrainConfig& cfg,
                              std::ostream* log_stream = nullptr);

// Batch mode: each iteration samples classes without replacement,
// regenerates triplets, optionally re-crops every distinct image, then
// takes one image-based step. Stops once the violated-triplet count of an
// iteration falls below cfg.convergence_threshold, or at max_iterations.
TrainResult train_batch_mode(const Dataset& data, Network net, const TrainConfig& cfg,
                             const AugmentConfig* augment = nullptr,
                             std::ostream* log_stream = nullptr);

}  // namespace trimetric

#endif  // TRIMETRIC_TRAINER_HPP_
