#include "trimetric/triplet_loss.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include "trimetric/error.hpp"

namespace trimetric {

void LossConfig::validate() const {
  if (!(margin < 0.0)) {
    throw ConfigError("loss: margin must be negative, got " + std::to_string(margin));
  }
}

ImageTable ImageTable::from_triplets(std::span<const Triplet> triplets) {
  ImageTable table;
  auto add = [&table](int id) {
    if (table.slot_by_id_.emplace(id, static_cast<int>(table.ids_.size())).second) {
      table.ids_.push_back(id);
    }
  };
  for (const Triplet& t : triplets) {
    add(t.query);
    add(t.matched);
    add(t.mismatched);
  }
  table.embeddings_.resize(table.ids_.size());
  return table;
}

int ImageTable::slot_of(int id) const {
  auto it = slot_by_id_.find(id);
  if (it == slot_by_id_.end()) {
    throw ContractViolation("image table: unresolved image id " + std::to_string(id));
  }
  return it->second;
}

const Embedding& ImageTable::embedding_of(int id) const {
  return embeddings_[static_cast<std::size_t>(slot_of(id))];
}

bool ImageTable::embeddings_ready() const {
  return std::all_of(embeddings_.begin(), embeddings_.end(),
                     [](const Embedding& e) { return !e.empty(); });
}

double distance_diff(std::span<const double> e1, std::span<const double> e2,
                     std::span<const double> e3) {
  if (e1.size() != e2.size() || e1.size() != e3.size()) {
    throw ShapeError("distance_diff: embedding length mismatch");
  }
  double matched_sq = 0.0, mismatched_sq = 0.0;
  for (std::size_t i = 0; i < e1.size(); ++i) {
    const double dm = e1[i] - e2[i];
    const double dn = e1[i] - e3[i];
    matched_sq += dm * dm;
    mismatched_sq += dn * dn;
  }
  return matched_sq - mismatched_sq;
}

double objective(const ImageTable& table, std::span<const Triplet> triplets,
                 const LossConfig& cfg) {
  double total = 0.0;
  for (const Triplet& t : triplets) {
    const double d = distance_diff(table.embedding_of(t.query), table.embedding_of(t.matched),
                                   table.embedding_of(t.mismatched));
    total += std::max(d, cfg.margin);
  }
  return total;
}

TripletOutputGrads triplet_output_grads(std::span<const double> e1, std::span<const double> e2,
                                        std::span<const double> e3) {
  TripletOutputGrads g;
  g.query.resize(e1.size());
  g.matched.resize(e1.size());
  g.mismatched.resize(e1.size());
  for (std::size_t i = 0; i < e1.size(); ++i) {
    g.query[i] = 2.0 * (e3[i] - e2[i]);
    g.matched[i] = -2.0 * (e1[i] - e2[i]);
    g.mismatched[i] = 2.0 * (e1[i] - e3[i]);
  }
  return g;
}

std::vector<Embedding> output_gradients(const ImageTable& table,
                                        std::span<const Triplet> triplets, const LossConfig& cfg) {
  if (table.size() == 0) return {};
  const std::size_t dim = table.embedding_at(0).size();
  std::vector<Embedding> grads(static_cast<std::size_t>(table.size()),
                               Embedding(dim, 0.0));
  for (const Triplet& t : triplets) {
    const Embedding& e1 = table.embedding_of(t.query);
    const Embedding& e2 = table.embedding_of(t.matched);
    const Embedding& e3 = table.embedding_of(t.mismatched);
    const double d = distance_diff(e1, e2, e3);
    if (!(d > cfg.margin)) continue;  // hinge inactive, strict comparison
    Embedding& gq = grads[static_cast<std::size_t>(table.slot_of(t.query))];
    Embedding& gm = grads[static_cast<std::size_t>(table.slot_of(t.matched))];
    Embedding& gn = grads[static_cast<std::size_t>(table.slot_of(t.mismatched))];
    for (std::size_t i = 0; i < dim; ++i) {
      gq[i] += 2.0 * (e3[i] - e2[i]);
      gm[i] += -2.0 * (e1[i] - e2[i]);
      gn[i] += 2.0 * (e1[i] - e3[i]);
    }
  }
  return grads;
}

std::vector<Triplet> load_triplets(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open triplet file: " + path);
  std::vector<Triplet> triplets;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    std::istringstream is(line);
    Triplet t;
    if (!(is >> t.query)) continue;  // blank or comment-only line
    if (!(is >> t.matched >> t.mismatched)) {
      throw ConfigError("triplet file " + path + ": line " + std::to_string(line_no) +
                        " does not hold three ids");
    }
    int extra;
    if (is >> extra) {
      throw ConfigError("triplet file " + path + ": line " + std::to_string(line_no) +
                        " holds more than three ids");
    }
    triplets.push_back(t);
  }
  return triplets;
}

void save_triplets(const std::string& path, std::span<const Triplet> triplets) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write triplet file: " + path);
  out << "# query matched mismatched\n";
  for (const Triplet& t : triplets) {
    out << t.query << ' ' << t.matched << ' ' << t.mismatched << '\n';
  }
}

}  // namespace trimetric
