#ifndef TRIMETRIC_TRIPLET_LOSS_HPP_
#define TRIMETRIC_TRIPLET_LOSS_HPP_

#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "trimetric/network.hpp"

namespace trimetric {

// Ordered triple of image ids: a query, a same-person reference and a
// different-person reference.
struct Triplet {
  int query = -1;
  int matched = -1;
  int mismatched = -1;
  bool operator==(const Triplet&) const = default;
};

struct LossConfig {
  // Hinge floor: a triplet whose distance difference is at or below the
  // margin stops contributing gradient. Must be negative, otherwise the
  // all-equal embedding satisfies every triplet.
  double margin = -1.0;
  void validate() const;  // throws ConfigError
};

// Distinct images referenced by a triplet set, in first-appearance order
// (query, matched, mismatched per triplet), with their embeddings during a
// pass. The fixed order makes gradient accumulation reproducible.
class ImageTable {
 public:
  static ImageTable from_triplets(std::span<const Triplet> triplets);

  int size() const { return static_cast<int>(ids_.size()); }
  const std::vector<int>& ids() const { return ids_; }
  int id_at(int slot) const { return ids_[static_cast<std::size_t>(slot)]; }

  // Slot of an image id; throws ContractViolation for unknown ids.
  int slot_of(int id) const;

  void set_embedding(int slot, Embedding e) { embeddings_[static_cast<std::size_t>(slot)] = std::move(e); }
  const Embedding& embedding_of(int id) const;
  const Embedding& embedding_at(int slot) const { return embeddings_[static_cast<std::size_t>(slot)]; }
  bool embeddings_ready() const;

 private:
  std::vector<int> ids_;
  std::vector<Embedding> embeddings_;
  std::unordered_map<int, int> slot_by_id_;
};

// ||e1 - e2||^2 - ||e1 - e3||^2; negative when the matched pair is closer.
double distance_diff(std::span<const double> e1, std::span<const double> e2,
                     std::span<const double> e3);

// Sum over triplets of max{distance_diff, margin}.
double objective(const ImageTable& table, std::span<const Triplet> triplets,
                 const LossConfig& cfg);

// Gradient of distance_diff w.r.t. each slot of one (active) triplet.
struct TripletOutputGrads {
  Embedding query;
  Embedding matched;
  Embedding mismatched;
};
TripletOutputGrads triplet_output_grads(std::span<const double> e1, std::span<const double> e2,
                                        std::span<const double> e3);

// Gradient of the objective w.r.t. every distinct image's embedding, one
// dense vector per table slot. Triplets at or below the margin contribute
// nothing; images shared across active triplets accumulate.
std::vector<Embedding> output_gradients(const ImageTable& table,
                                        std::span<const Triplet> triplets, const LossConfig& cfg);

// Triplet list file: one "query matched mismatched" line per triplet,
// '#' starts a comment.
std::vector<Triplet> load_triplets(const std::string& path);
void save_triplets(const std::string& path, std::span<const Triplet> triplets);

}  // namespace trimetric

#endif  // TRIMETRIC_TRIPLET_LOSS_HPP_
