#ifndef TRIMETRIC_VERIFY_HPP_
#define TRIMETRIC_VERIFY_HPP_

#include <cstdint>
#include <string>
#include <vector>

namespace trimetric {

struct VerifyCheck {
  std::string name;
  double max_error = 0.0;
  double tolerance = 0.0;
  bool pass = false;
};

struct VerifyReport {
  std::vector<VerifyCheck> checks;
  bool all_pass() const;
  std::string first_failure() const;  // empty when all pass
};

// Self-contained correctness battery on built-in small configurations:
// finite-difference checks of every layer backward and of the whole
// network, gradient agreement between the triplet-based and image-based
// routes on five random instances, and the propagation-count model.
// inject_fault corrupts the named layer's analytic backward result so the
// failure path can be exercised ("conv2d", "maxpool", "relu", "fc",
// "l2norm").
VerifyReport run_verification(std::uint64_t seed, const std::string& inject_fault = "");

}  // namespace trimetric

#endif  // TRIMETRIC_VERIFY_HPP_
