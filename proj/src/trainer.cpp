#include "trimetric/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>
#include <ostream>
#include <unordered_map>

#include <json.hpp>

#include "trimetric/error.hpp"
#include "trimetric/log.hpp"
#include "trimetric/parallel.hpp"

namespace trimetric {

double LearningRateSchedule::at(int iteration) const {
  return base * std::pow(decay, iteration);
}

void LearningRateSchedule::validate() const {
  if (!(base > 0.0)) throw ConfigError("learning rate base must be positive");
  if (!(decay > 0.0 && decay <= 1.0)) throw ConfigError("learning rate decay must lie in (0, 1]");
}

void TrainConfig::validate() const {
  if (max_iterations < 0) throw ConfigError("max_iterations must be >= 0");
  learning_rate.validate();
  if (classes_per_iteration < 2) throw ConfigError("classes_per_iteration must be >= 2");
  if (triplets_per_person < 1) throw ConfigError("triplets_per_person must be >= 1");
  if (convergence_threshold < 0) throw ConfigError("convergence_threshold must be >= 0");
  loss.validate();
}

std::string to_json_line(const IterationReport& r) {
  nlohmann::json j{{"iteration", r.iteration},
                   {"objective", r.objective},
                   {"violated", r.violated},
                   {"distinct_images", r.distinct_images},
                   {"triplets", r.triplet_count},
                   {"forward_count", r.forward_count},
                   {"backward_count", r.backward_count},
                   {"wall_ms", r.wall_ms}};
  return j.dump();
}

int count_violations(const ImageTable& table, std::span<const Triplet> triplets) {
  int violated = 0;
  for (const Triplet& t : triplets) {
    const double d = distance_diff(table.embedding_of(t.query), table.embedding_of(t.matched),
                                   table.embedding_of(t.mismatched));
    if (d > 0.0) ++violated;  // an exact tie is satisfied
  }
  return violated;
}

GradientOutcome triplet_based_gradient(std::span<const Triplet> triplets,
                                       const ImageLookup& images, const NetworkParams& params,
                                       const ArchitectureConfig& arch, const LossConfig& loss) {
  GradientOutcome out;
  out.grad = NetworkParams::zeros(arch);
  out.triplet_count = static_cast<int>(triplets.size());
  out.distinct_images = ImageTable::from_triplets(triplets).size();

  const Embedding zero_grad(static_cast<std::size_t>(arch.embedding_dim), 0.0);
  for (const Triplet& t : triplets) {
    ForwardCache cache_q, cache_m, cache_n;
    const Embedding e1 = network_forward(images(t.query), params, arch, &cache_q);
    const Embedding e2 = network_forward(images(t.matched), params, arch, &cache_m);
    const Embedding e3 = network_forward(images(t.mismatched), params, arch, &cache_n);
    out.counts.forward_count += 3;

    const double d = distance_diff(e1, e2, e3);
    out.objective += std::max(d, loss.margin);
    if (d > 0.0) ++out.violated;

    // inactive triplets still run their backward passes, with zero output
    // gradients, so the cost model stays three of each per triplet
    const bool active = d > loss.margin;
    TripletOutputGrads g;
    if (active) g = triplet_output_grads(e1, e2, e3);
    out.grad.add_scaled(
        network_backward(cache_q, active ? g.query : zero_grad, params, arch), 1.0);
    out.grad.add_scaled(
        network_backward(cache_m, active ? g.matched : zero_grad, params, arch), 1.0);
    out.grad.add_scaled(
        network_backward(cache_n, active ? g.mismatched : zero_grad, params, arch), 1.0);
    out.counts.backward_count += 3;
  }
  return out;
}

GradientOutcome image_based_gradient(std::span<const Triplet> triplets,
                                     const ImageLookup& images, const NetworkParams& params,
                                     const ArchitectureConfig& arch, const LossConfig& loss) {
  GradientOutcome out;
  out.grad = NetworkParams::zeros(arch);
  out.triplet_count = static_cast<int>(triplets.size());

  ImageTable table = ImageTable::from_triplets(triplets);
  out.distinct_images = table.size();

  std::vector<ForwardCache> caches(static_cast<std::size_t>(table.size()));
  // forwards are independent per image; each worker fills its own slot
  parallel_for(table.size(), [&](std::int64_t slot) {
    table.set_embedding(static_cast<int>(slot),
                        network_forward(images(table.id_at(static_cast<int>(slot))), params, arch,
                                        &caches[static_cast<std::size_t>(slot)]));
  });
  out.counts.forward_count += table.size();

  out.objective = objective(table, triplets, loss);
  out.violated = count_violations(table, triplets);

  const std::vector<Embedding> out_grads = output_gradients(table, triplets, loss);
  for (int slot = 0; slot < table.size(); ++slot) {
    out.grad.add_scaled(network_backward(caches[static_cast<std::size_t>(slot)],
                                         out_grads[static_cast<std::size_t>(slot)], params, arch),
                        1.0);
    ++out.counts.backward_count;
  }
  return out;
}

void sgd_update(NetworkParams& params, const NetworkParams& grad, double learning_rate) {
  if (!params.same_shapes(grad)) throw ShapeError("sgd_update: gradient shape mismatch");
  if (!grad.all_finite()) throw NumericError("sgd_update: non-finite gradient");
  params.add_scaled(grad, -learning_rate);
}

std::vector<Triplet> generate_triplets(const Dataset& data, std::span<const int> selected_classes,
                                       int per_person, Rng& rng) {
  if (per_person < 1) throw ConfigError("generate_triplets: per_person must be >= 1");

  std::vector<int> usable;
  for (int cls : selected_classes) {
    if (cls < 0 || cls >= data.num_classes()) {
      throw ContractViolation("generate_triplets: class id " + std::to_string(cls) +
                              " out of range");
    }
    if (data.images_by_class[static_cast<std::size_t>(cls)].size() < 2) {
      warn("class " + data.class_names[static_cast<std::size_t>(cls)] +
           " has fewer than 2 images, skipped for triplet generation");
      continue;
    }
    usable.push_back(cls);
  }
  if (usable.size() < 2) {
    throw ConfigError("generate_triplets: need at least 2 selected classes with >= 2 images");
  }

  std::vector<Triplet> triplets;
  triplets.reserve(usable.size() * static_cast<std::size_t>(per_person));
  for (std::size_t ci = 0; ci < usable.size(); ++ci) {
    const auto& own = data.images_by_class[static_cast<std::size_t>(usable[ci])];
    std::vector<int> others;
    for (std::size_t cj = 0; cj < usable.size(); ++cj) {
      if (cj == ci) continue;
      const auto& imgs = data.images_by_class[static_cast<std::size_t>(usable[cj])];
      others.insert(others.end(), imgs.begin(), imgs.end());
    }
    for (int j = 0; j < per_person; ++j) {
      const std::size_t query_pos = static_cast<std::size_t>(j) % own.size();
      std::size_t matched_pos = uniform_index(rng, own.size() - 1);
      if (matched_pos >= query_pos) ++matched_pos;
      const std::size_t mismatched_pos = uniform_index(rng, others.size());
      triplets.push_back({own[query_pos], own[matched_pos], others[mismatched_pos]});
    }
  }
  return triplets;
}

namespace {

using Clock = std::chrono::steady_clock;

double elapsed_ms(Clock::time_point start) {
  return std::chrono::duration<double, std::milli>(Clock::now() - start).count();
}

IterationReport make_report(int iteration, const GradientOutcome& outcome, double wall_ms) {
  IterationReport r;
  r.iteration = iteration;
  r.objective = outcome.objective;
  r.violated = outcome.violated;
  r.distinct_images = outcome.distinct_images;
  r.triplet_count = outcome.triplet_count;
  r.forward_count = outcome.counts.forward_count;
  r.backward_count = outcome.counts.backward_count;
  r.wall_ms = wall_ms;
  return r;
}

void emit(std::ostream* log_stream, const IterationReport& r) {
  if (log_stream) *log_stream << to_json_line(r) << '\n';
}

using GradientFn = GradientOutcome (*)(std::span<const Triplet>, const ImageLookup&,
                                       const NetworkParams&, const ArchitectureConfig&,
                                       const LossConfig&);

TrainResult run_fixed_set(GradientFn gradient_fn, std::span<const Triplet> triplets,
                          const ImageLookup& images, Network net, const TrainConfig& cfg,
                          std::ostream* log_stream) {
  cfg.validate();
  net.arch.validate();
  if (triplets.empty()) throw ConfigError("training requires at least one triplet");

  TrainResult result;
  for (int t = 0; t < cfg.max_iterations; ++t) {
    const auto start = Clock::now();
    GradientOutcome outcome = gradient_fn(triplets, images, net.params, net.arch, cfg.loss);
    sgd_update(net.params, outcome.grad, cfg.learning_rate.at(t));
    result.reports.push_back(make_report(t, outcome, elapsed_ms(start)));
    emit(log_stream, result.reports.back());
  }
  result.params = std::move(net.params);
  return result;
}

}  // namespace

TrainResult train_triplet_based(std::span<const Triplet> triplets, const ImageLookup& images,
                                Network net, const TrainConfig& cfg, std::ostream* log_stream) {
  return run_fixed_set(&triplet_based_gradient, triplets, images, std::move(net), cfg, log_stream);
}

TrainResult train_image_based(std::span<const Triplet> triplets, const ImageLookup& images,
                              Network net, const TrainConfig& cfg, std::ostream* log_stream) {
  return run_fixed_set(&image_based_gradient, triplets, images, std::move(net), cfg, log_stream);
}

TrainResult train_batch_mode(const Dataset& data, Network net, const TrainConfig& cfg,
                             const AugmentConfig* augment, std::ostream* log_stream) {
  cfg.validate();
  net.arch.validate();
  if (data.num_classes() < 2) throw ConfigError("batch training requires at least 2 classes");
  int classes_with_pairs = 0;
  for (const auto& imgs : data.images_by_class) classes_with_pairs += imgs.size() >= 2;
  if (classes_with_pairs < 2) {
    throw ConfigError("batch training requires at least 2 classes with >= 2 images");
  }

  int classes_per_iteration = cfg.classes_per_iteration;
  if (classes_per_iteration > data.num_classes()) {
    warn("classes_per_iteration " + std::to_string(classes_per_iteration) +
         " exceeds the dataset's " + std::to_string(data.num_classes()) + " classes; using all");
    classes_per_iteration = data.num_classes();
  }

  Rng rng(cfg.seed);
  std::vector<int> class_ids(static_cast<std::size_t>(data.num_classes()));
  std::iota(class_ids.begin(), class_ids.end(), 0);

  TrainResult result;
  for (int t = 0; t < cfg.max_iterations; ++t) {
    const auto start = Clock::now();

    // sample classes without replacement; reshuffled every iteration
    for (int i = 0; i < classes_per_iteration; ++i) {
      const std::size_t j =
          static_cast<std::size_t>(i) +
          uniform_index(rng, class_ids.size() - static_cast<std::size_t>(i));
      std::swap(class_ids[static_cast<std::size_t>(i)], class_ids[j]);
    }
    std::span<const int> selected(class_ids.data(), static_cast<std::size_t>(classes_per_iteration));
    const std::vector<Triplet> triplets = generate_triplets(data, selected, cfg.triplets_per_person, rng);

    std::unordered_map<int, Tensor> crops;
    if (augment) {
      const ImageTable table = ImageTable::from_triplets(triplets);
      for (int slot = 0; slot < table.size(); ++slot) {
        const int id = table.id_at(slot);
        crops.emplace(id, augment_crop(data.images[static_cast<std::size_t>(id)].pixels, *augment, rng));
      }
    }
    const ImageLookup lookup = [&](int id) -> const Tensor& {
      if (augment) return crops.at(id);
      return data.images[static_cast<std::size_t>(id)].pixels;
    };

    GradientOutcome outcome = image_based_gradient(triplets, lookup, net.params, net.arch, cfg.loss);
    sgd_update(net.params, outcome.grad, cfg.learning_rate.at(t));
    result.reports.push_back(make_report(t, outcome, elapsed_ms(start)));
    emit(log_stream, result.reports.back());

    if (outcome.violated < cfg.convergence_threshold) {
      result.converged = true;
      break;
    }
  }
  result.params = std::move(net.params);
  return result;
}

}  // namespace trimetric
