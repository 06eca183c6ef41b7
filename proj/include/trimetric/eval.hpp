#ifndef TRIMETRIC_EVAL_HPP_
#define TRIMETRIC_EVAL_HPP_

#include <string>
#include <unordered_map>
#include <vector>

#include "trimetric/data.hpp"
#include "trimetric/network.hpp"

namespace trimetric {

// One gallery image per test person, everything else probes.
struct GalleryProbeSplit {
  struct Entry {
    int image_id = -1;
    int person_id = -1;
  };
  std::vector<Entry> gallery;
  std::vector<Entry> probe;
};

// Cumulative match rates indexed by rank 1..max_rank. Ranks past the
// gallery size saturate at 1.
class CmcCurve {
 public:
  CmcCurve() = default;
  explicit CmcCurve(std::vector<double> rates) : rates_(std::move(rates)) {}

  int max_rank() const { return static_cast<int>(rates_.size()); }
  double at_rank(int rank) const { return rates_[static_cast<std::size_t>(rank - 1)]; }
  const std::vector<double>& rates() const { return rates_; }
  bool nondecreasing() const;

 private:
  std::vector<double> rates_;
};

// One unit-norm embedding per image, keyed by image id. Images larger than
// the network input are center-cropped first (the deterministic evaluation
// counterpart of training-time augmentation).
std::unordered_map<int, Embedding> extract_embeddings(const Network& net, const Dataset& data);

// Uniformly chosen gallery image per person; persons with a single image
// contribute gallery only, with a warning.
GalleryProbeSplit make_split(const Dataset& test_data, Rng& rng);

// Rank gallery images per probe by ascending L2 distance (ties broken by
// gallery order); curve[r] is the fraction of probes whose own person
// appears within the top r.
CmcCurve cmc(const std::unordered_map<int, Embedding>& embeddings,
             const GalleryProbeSplit& split, int max_rank);

// Mean curve over independent gallery/probe splits.
CmcCurve average_trials(const Network& net, const Dataset& test_data, int trials, Rng& rng,
                        int max_rank = 30);

void write_cmc_csv(const std::string& path, const CmcCurve& curve);

// {"top1": ..., "top5": ..., "top10": ..., "top15": ..., "top20": ..., "top30": ...}
std::string cmc_summary_json(const CmcCurve& curve);

}  // namespace trimetric

#endif  // TRIMETRIC_EVAL_HPP_
