#ifndef TRIMETRIC_SERIALIZE_HPP_
#define TRIMETRIC_SERIALIZE_HPP_

#include <string>
#include <vector>

#include <json.hpp>

#include "trimetric/network.hpp"

namespace trimetric {

nlohmann::json arch_to_json(const ArchitectureConfig& cfg);
ArchitectureConfig arch_from_json(const nlohmann::json& j);

// Strict object check: every key must be in `allowed`; context names the
// object in error messages.
void require_known_keys(const nlohmann::json& obj, const std::string& context,
                        const std::vector<std::string>& allowed);

}  // namespace trimetric

#endif  // TRIMETRIC_SERIALIZE_HPP_
