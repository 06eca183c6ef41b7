#include "trimetric/eval.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include <json.hpp>

#include "trimetric/error.hpp"
#include "trimetric/log.hpp"
#include "trimetric/parallel.hpp"

namespace trimetric {

bool CmcCurve::nondecreasing() const {
  for (std::size_t i = 1; i < rates_.size(); ++i) {
    if (rates_[i] < rates_[i - 1]) return false;
  }
  return true;
}

std::unordered_map<int, Embedding> extract_embeddings(const Network& net, const Dataset& data) {
  std::vector<Embedding> by_index(data.images.size());
  parallel_for(static_cast<std::int64_t>(data.images.size()), [&](std::int64_t i) {
    const Tensor& pixels = data.images[static_cast<std::size_t>(i)].pixels;
    const bool exact = pixels.dim(1) == net.arch.in_height && pixels.dim(2) == net.arch.in_width;
    const Tensor view = exact ? pixels : center_crop(pixels, net.arch.in_height, net.arch.in_width);
    by_index[static_cast<std::size_t>(i)] = network_forward(view, net.params, net.arch);
  });
  std::unordered_map<int, Embedding> embeddings;
  embeddings.reserve(data.images.size());
  for (std::size_t i = 0; i < data.images.size(); ++i) {
    embeddings.emplace(static_cast<int>(i), std::move(by_index[i]));
  }
  return embeddings;
}

GalleryProbeSplit make_split(const Dataset& test_data, Rng& rng) {
  if (test_data.num_classes() < 1) throw ConfigError("gallery split: empty test set");
  GalleryProbeSplit split;
  for (int cls = 0; cls < test_data.num_classes(); ++cls) {
    const auto& imgs = test_data.images_by_class[static_cast<std::size_t>(cls)];
    if (imgs.empty()) continue;
    if (imgs.size() == 1) {
      warn("person " + test_data.class_names[static_cast<std::size_t>(cls)] +
           " has a single image; gallery only");
      split.gallery.push_back({imgs[0], cls});
      continue;
    }
    const std::size_t pick = uniform_index(rng, imgs.size());
    for (std::size_t i = 0; i < imgs.size(); ++i) {
      if (i == pick) split.gallery.push_back({imgs[i], cls});
      else split.probe.push_back({imgs[i], cls});
    }
  }
  return split;
}

CmcCurve cmc(const std::unordered_map<int, Embedding>& embeddings,
             const GalleryProbeSplit& split, int max_rank) {
  if (max_rank < 1) throw ConfigError("cmc: max_rank must be >= 1");
  if (split.gallery.empty() || split.probe.empty()) {
    throw ConfigError("cmc: split needs a nonempty gallery and probe set");
  }
  auto embedding_of = [&embeddings](int id) -> const Embedding& {
    auto it = embeddings.find(id);
    if (it == embeddings.end()) {
      throw ContractViolation("cmc: missing embedding for image " + std::to_string(id));
    }
    return it->second;
  };
  auto sq_dist = [](const Embedding& a, const Embedding& b) {
    if (a.size() != b.size()) throw ShapeError("cmc: embedding length mismatch");
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
      const double d = a[i] - b[i];
      s += d * d;
    }
    return s;
  };

  std::vector<int> hits(static_cast<std::size_t>(max_rank), 0);
  for (const auto& probe : split.probe) {
    const Embedding& pe = embedding_of(probe.image_id);
    double own_dist = 0.0;
    std::size_t own_pos = split.gallery.size();
    std::vector<double> dists(split.gallery.size());
    for (std::size_t g = 0; g < split.gallery.size(); ++g) {
      dists[g] = sq_dist(pe, embedding_of(split.gallery[g].image_id));
      if (split.gallery[g].person_id == probe.person_id) {
        own_dist = dists[g];
        own_pos = g;
      }
    }
    if (own_pos == split.gallery.size()) {
      throw ContractViolation("cmc: probe person missing from gallery");
    }
    // rank of the correct gallery image under stable ordering by distance
    int rank = 1;
    for (std::size_t g = 0; g < split.gallery.size(); ++g) {
      if (g == own_pos) continue;
      if (dists[g] < own_dist || (dists[g] == own_dist && g < own_pos)) ++rank;
    }
    if (rank <= max_rank) ++hits[static_cast<std::size_t>(rank - 1)];
  }

  std::vector<double> rates(static_cast<std::size_t>(max_rank));
  double cum = 0.0;
  for (int r = 0; r < max_rank; ++r) {
    cum += hits[static_cast<std::size_t>(r)];
    rates[static_cast<std::size_t>(r)] = cum / static_cast<double>(split.probe.size());
  }
  return CmcCurve(std::move(rates));
}

CmcCurve average_trials(const Network& net, const Dataset& test_data, int trials, Rng& rng,
                        int max_rank) {
  if (trials < 1) throw ConfigError("average_trials: trials must be >= 1");
  const auto embeddings = extract_embeddings(net, test_data);

  std::vector<double> mean(static_cast<std::size_t>(max_rank), 0.0);
  for (int t = 0; t < trials; ++t) {
    Rng trial_rng(rng());  // per-trial stream derived from the master
    const GalleryProbeSplit split = make_split(test_data, trial_rng);
    const CmcCurve curve = cmc(embeddings, split, max_rank);
    for (int r = 0; r < max_rank; ++r) {
      mean[static_cast<std::size_t>(r)] += curve.rates()[static_cast<std::size_t>(r)];
    }
  }
  for (double& v : mean) v /= trials;
  return CmcCurve(std::move(mean));
}

void write_cmc_csv(const std::string& path, const CmcCurve& curve) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write CMC csv: " + path);
  out << "rank,rate\n";
  for (int r = 1; r <= curve.max_rank(); ++r) {
    out << r << ',' << curve.at_rank(r) << '\n';
  }
}

std::string cmc_summary_json(const CmcCurve& curve) {
  auto rate_or_last = [&curve](int r) {
    return curve.at_rank(std::min(r, curve.max_rank()));
  };
  nlohmann::json j{{"top1", rate_or_last(1)},   {"top5", rate_or_last(5)},
                   {"top10", rate_or_last(10)}, {"top15", rate_or_last(15)},
                   {"top20", rate_or_last(20)}, {"top30", rate_or_last(30)}};
  return j.dump();
}

}  // namespace trimetric
