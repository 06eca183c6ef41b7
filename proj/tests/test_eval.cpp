#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <set>

#include "oracles.hpp"
#include "trimetric/data.hpp"
#include "trimetric/error.hpp"
#include "trimetric/eval.hpp"
#include "trimetric/rng.hpp"

using namespace trimetric;

namespace {

// Brute-force reference: per probe, fully sort the gallery by distance with
// a stable sort and find the position of the matching person.
CmcCurve brute_force_cmc(const std::unordered_map<int, Embedding>& embeddings,
                         const GalleryProbeSplit& split, int max_rank) {
  std::vector<double> rates(static_cast<std::size_t>(max_rank), 0.0);
  for (const auto& probe : split.probe) {
    const Embedding& pe = embeddings.at(probe.image_id);
    std::vector<std::pair<double, std::size_t>> order;
    for (std::size_t g = 0; g < split.gallery.size(); ++g) {
      const Embedding& ge = embeddings.at(split.gallery[g].image_id);
      double dist = 0.0;
      for (std::size_t i = 0; i < pe.size(); ++i) dist += (pe[i] - ge[i]) * (pe[i] - ge[i]);
      order.emplace_back(dist, g);
    }
    std::stable_sort(order.begin(), order.end(),
                     [](const auto& a, const auto& b) { return a.first < b.first; });
    for (std::size_t pos = 0; pos < order.size(); ++pos) {
      if (split.gallery[order[pos].second].person_id == probe.person_id) {
        for (int r = static_cast<int>(pos); r < max_rank; ++r) {
          rates[static_cast<std::size_t>(r)] += 1.0;
        }
        break;
      }
    }
  }
  for (double& v : rates) v /= static_cast<double>(split.probe.size());
  return CmcCurve(std::move(rates));
}

std::unordered_map<int, Embedding> random_embeddings(int count, int dim, Rng& rng) {
  std::unordered_map<int, Embedding> embeddings;
  for (int i = 0; i < count; ++i) {
    Embedding e(static_cast<std::size_t>(dim));
    double n = 0.0;
    for (double& v : e) {
      v = uniform_in(rng, -1.0, 1.0);
      n += v * v;
    }
    n = std::sqrt(n);
    for (double& v : e) v /= n;
    embeddings.emplace(i, std::move(e));
  }
  return embeddings;
}

Dataset dataset_of(int classes, int per_class) {
  Dataset d;
  for (int c = 0; c < classes; ++c) {
    d.class_names.push_back("p" + std::to_string(c));
    for (int k = 0; k < per_class; ++k) {
      d.images.push_back({Tensor({3, 2, 2}), c, "synthetic"});
    }
  }
  d.rebuild_index();
  return d;
}

}  // namespace

TEST_CASE("make_split: sizes and invariants") {
  SUBCASE("50 persons x 4 images") {
    Dataset d = dataset_of(50, 4);
    Rng rng(1);
    GalleryProbeSplit split = make_split(d, rng);
    CHECK(split.gallery.size() == 50);
    CHECK(split.probe.size() == 150);
  }

  SUBCASE("2 persons x 2 images") {
    Dataset d = dataset_of(2, 2);
    Rng rng(2);
    GalleryProbeSplit split = make_split(d, rng);
    CHECK(split.gallery.size() == 2);
    CHECK(split.probe.size() == 2);
  }

  SUBCASE("disjointness and coverage hold for any seed") {
    Dataset d = dataset_of(7, 3);
    for (std::uint64_t seed : {0ULL, 5ULL, 123ULL}) {
      Rng rng(seed);
      GalleryProbeSplit split = make_split(d, rng);
      std::set<int> gallery_ids, probe_ids, gallery_persons;
      for (const auto& e : split.gallery) {
        gallery_ids.insert(e.image_id);
        gallery_persons.insert(e.person_id);
      }
      for (const auto& e : split.probe) probe_ids.insert(e.image_id);
      CHECK(gallery_persons.size() == 7);  // one per person
      for (int id : probe_ids) CHECK(gallery_ids.count(id) == 0);
      CHECK(gallery_ids.size() + probe_ids.size() == 21);
    }
  }

  SUBCASE("single-image person contributes gallery only") {
    Dataset d = dataset_of(3, 2);
    d.images.push_back({Tensor({3, 2, 2}), 3, "synthetic"});
    d.class_names.push_back("loner");
    d.rebuild_index();
    Rng rng(3);
    GalleryProbeSplit split = make_split(d, rng);
    CHECK(split.gallery.size() == 4);
    for (const auto& e : split.probe) CHECK(e.person_id != 3);
  }
}

TEST_CASE("cmc: identical probe ranks first") {
  std::unordered_map<int, Embedding> embeddings;
  embeddings[0] = {1.0, 0.0};  // gallery person 0
  embeddings[1] = {0.0, 1.0};  // gallery person 1
  embeddings[2] = {1.0, 0.0};  // probe of person 0, identical to its match
  GalleryProbeSplit split;
  split.gallery = {{0, 0}, {1, 1}};
  split.probe = {{2, 0}};
  CmcCurve curve = cmc(embeddings, split, 2);
  CHECK(curve.at_rank(1) == 1.0);
  CHECK(curve.at_rank(2) == 1.0);
}

TEST_CASE("cmc: curve reaches 1 at the gallery size") {
  Rng rng(4);
  auto embeddings = random_embeddings(30, 6, rng);
  GalleryProbeSplit split;
  for (int i = 0; i < 10; ++i) split.gallery.push_back({i, i});
  for (int i = 10; i < 30; ++i) split.probe.push_back({i, (i - 10) % 10});
  CmcCurve curve = cmc(embeddings, split, 10);
  CHECK(curve.at_rank(10) == 1.0);
  CHECK(curve.nondecreasing());
}

TEST_CASE("cmc: hand-built three-gallery instance") {
  // probe at the origin; distances 0.2 (wrong), 0.5 (correct), 0.9 (wrong)
  std::unordered_map<int, Embedding> embeddings;
  embeddings[0] = {std::sqrt(0.2), 0.0};
  embeddings[1] = {std::sqrt(0.5), 0.0};
  embeddings[2] = {std::sqrt(0.9), 0.0};
  embeddings[3] = {0.0, 0.0};
  GalleryProbeSplit split;
  split.gallery = {{0, 10}, {1, 20}, {2, 30}};
  split.probe = {{3, 20}};
  CmcCurve curve = cmc(embeddings, split, 3);
  CHECK(curve.at_rank(1) == 0.0);
  CHECK(curve.at_rank(2) == 1.0);
  CHECK(curve.at_rank(3) == 1.0);
}

TEST_CASE("cmc: matches the brute-force oracle exactly on random instances") {
  Rng rng(5);
  for (int round = 0; round < 10; ++round) {
    const int gallery_n = 2 + static_cast<int>(uniform_index(rng, 19));
    const int probe_n = 1 + static_cast<int>(uniform_index(rng, 60));
    auto embeddings = random_embeddings(gallery_n + probe_n, 8, rng);
    GalleryProbeSplit split;
    for (int g = 0; g < gallery_n; ++g) split.gallery.push_back({g, g});
    for (int p = 0; p < probe_n; ++p) {
      split.probe.push_back({gallery_n + p, static_cast<int>(uniform_index(rng, gallery_n))});
    }
    const int max_rank = gallery_n;
    const CmcCurve fast = cmc(embeddings, split, max_rank);
    const CmcCurve slow = brute_force_cmc(embeddings, split, max_rank);
    REQUIRE(fast.max_rank() == slow.max_rank());
    for (int r = 1; r <= max_rank; ++r) CHECK(fast.at_rank(r) == slow.at_rank(r));
  }
}

TEST_CASE("cmc: gallery permutation leaves tie-free curves unchanged") {
  Rng rng(6);
  auto embeddings = random_embeddings(24, 8, rng);
  GalleryProbeSplit split;
  for (int g = 0; g < 8; ++g) split.gallery.push_back({g, g});
  for (int p = 8; p < 24; ++p) split.probe.push_back({p, (p - 8) % 8});
  const CmcCurve base = cmc(embeddings, split, 8);

  GalleryProbeSplit shuffled = split;
  std::reverse(shuffled.gallery.begin(), shuffled.gallery.end());
  const CmcCurve permuted = cmc(embeddings, shuffled, 8);
  for (int r = 1; r <= 8; ++r) CHECK(base.at_rank(r) == permuted.at_rank(r));
}

TEST_CASE("cmc: missing embedding is a contract violation") {
  std::unordered_map<int, Embedding> embeddings;
  embeddings[0] = {1.0, 0.0};
  embeddings[1] = {0.0, 1.0};
  GalleryProbeSplit split;
  split.gallery = {{0, 0}, {1, 1}};
  split.probe = {{2, 0}};
  CHECK_THROWS_AS(cmc(embeddings, split, 2), ContractViolation);
}

TEST_CASE("extract_embeddings: unit norm, determinism, center-crop sizing") {
  Rng data_rng(7);
  Dataset d = synth_dataset(4, 3, 0.1, data_rng, 24, 16);  // larger than the input
  Network net{ArchitectureConfig::desk(), init_params(ArchitectureConfig::desk(), 8)};
  auto a = extract_embeddings(net, d);
  auto b = extract_embeddings(net, d);
  CHECK(a.size() == d.images.size());
  for (const auto& [id, e] : a) {
    CHECK(static_cast<int>(e.size()) == net.arch.embedding_dim);
    double n = 0.0;
    for (double v : e) n += v * v;
    CHECK(std::fabs(std::sqrt(n) - 1.0) < 1e-9);
    CHECK(b.at(id) == e);
  }
}

TEST_CASE("average_trials: single trial equals one cmc call and means stay monotone") {
  Rng data_rng(9);
  Dataset d = synth_dataset(5, 4, 0.1, data_rng);
  Network net{ArchitectureConfig::desk(), init_params(ArchitectureConfig::desk(), 10)};

  Rng rng_a(11);
  const CmcCurve single = average_trials(net, d, 1, rng_a, 5);
  Rng rng_b(11);
  Rng trial_rng(Rng(11)());
  const auto embeddings = extract_embeddings(net, d);
  const GalleryProbeSplit split = make_split(d, trial_rng);
  const CmcCurve direct = cmc(embeddings, split, 5);
  for (int r = 1; r <= 5; ++r) CHECK(single.at_rank(r) == direct.at_rank(r));

  Rng rng_c(12);
  const CmcCurve avg = average_trials(net, d, 10, rng_c, 5);
  CHECK(avg.nondecreasing());
  CHECK(avg.at_rank(5) == 1.0);
  for (int r = 1; r <= 5; ++r) {
    CHECK(avg.at_rank(r) >= 0.0);
    CHECK(avg.at_rank(r) <= 1.0);
  }
}

TEST_CASE("cmc csv and summary outputs") {
  CmcCurve curve({0.5, 0.75, 1.0});
  const std::string summary = cmc_summary_json(curve);
  CHECK(summary.find("\"top1\":0.5") != std::string::npos);
  CHECK(summary.find("\"top5\":1.0") != std::string::npos);
  CHECK(summary.find("\"top30\":1.0") != std::string::npos);
}
