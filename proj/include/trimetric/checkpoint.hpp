#ifndef TRIMETRIC_CHECKPOINT_HPP_
#define TRIMETRIC_CHECKPOINT_HPP_

#include <string>

#include "trimetric/network.hpp"

namespace trimetric {

inline constexpr const char* kCheckpointFormatTag = "trimetric-v1";

// Checkpoint file: a "trimetric-v1" tag line, a JSON header line describing
// the architecture and the parameter tensors in order, then the raw
// little-endian 64-bit float data of each tensor.
void save_checkpoint(const std::string& path, const Network& net);
Network load_checkpoint(const std::string& path);

}  // namespace trimetric

#endif  // TRIMETRIC_CHECKPOINT_HPP_
