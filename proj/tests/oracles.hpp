// Test-side oracles, independent of the library's own verification code.
#ifndef TRIMETRIC_TESTS_ORACLES_HPP_
#define TRIMETRIC_TESTS_ORACLES_HPP_

#include <algorithm>
#include <cmath>
#include <functional>
#include <span>
#include <vector>

#include "trimetric/network.hpp"
#include "trimetric/rng.hpp"
#include "trimetric/tensor.hpp"

namespace oracles {

inline double rel_error(double a, double b, double floor = 1e-8) {
  return std::fabs(a - b) / std::max({std::fabs(a), std::fabs(b), floor});
}

// Central finite differences of `loss` over `values`, compared entrywise
// against `analytic`; returns the worst relative error.
inline double fd_max_rel_error(std::span<double> values, std::span<const double> analytic,
                               const std::function<double()>& loss, double step) {
  double worst = 0.0;
  for (std::size_t i = 0; i < values.size(); ++i) {
    const double saved = values[i];
    values[i] = saved + step;
    const double up = loss();
    values[i] = saved - step;
    const double down = loss();
    values[i] = saved;
    worst = std::max(worst, rel_error(analytic[i], (up - down) / (2.0 * step)));
  }
  return worst;
}

inline trimetric::Tensor random_tensor(const std::vector<int>& shape, trimetric::Rng& rng,
                                       double lo = -1.0, double hi = 1.0) {
  trimetric::Tensor t(shape);
  for (std::int64_t i = 0; i < t.numel(); ++i) t[i] = trimetric::uniform_in(rng, lo, hi);
  return t;
}

inline std::vector<double> random_vector(std::size_t n, trimetric::Rng& rng, double lo = -1.0,
                                         double hi = 1.0) {
  std::vector<double> v(n);
  for (double& x : v) x = trimetric::uniform_in(rng, lo, hi);
  return v;
}

// Fan-in scaled uniform parameters: a well-conditioned point for gradient
// checks (the production init starts the pre-normalization output near 0,
// where finite differences of the normalization are invalid).
inline trimetric::NetworkParams conditioned_params(const trimetric::ArchitectureConfig& arch,
                                                   trimetric::Rng& rng) {
  using trimetric::Tensor;
  trimetric::NetworkParams p = trimetric::NetworkParams::zeros(arch);
  auto fill = [&rng](Tensor& t, double scale) {
    for (std::int64_t i = 0; i < t.numel(); ++i) t[i] = trimetric::uniform_in(rng, -scale, scale);
  };
  fill(p.conv1_w, 1.0 / std::sqrt(static_cast<double>(arch.in_channels) * arch.conv1.kernel_size *
                                  arch.conv1.kernel_size));
  fill(p.conv2_w, 1.0 / std::sqrt(static_cast<double>(arch.conv1.kernels) * arch.conv2.kernel_size *
                                  arch.conv2.kernel_size));
  fill(p.fc_w, 1.0 / std::sqrt(static_cast<double>(arch.flattened_size())));
  for (double& b : p.conv1_b) b = trimetric::uniform_in(rng, -0.1, 0.1);
  for (double& b : p.conv2_b) b = trimetric::uniform_in(rng, -0.1, 0.1);
  for (double& b : p.fc_b) b = trimetric::uniform_in(rng, -0.1, 0.1);
  return p;
}

// Upper critical value of the chi-squared distribution via the
// Wilson-Hilferty cube approximation.
inline double chi2_critical(int df, double z_alpha = 2.3263478740408408 /* alpha = 0.01 */) {
  const double d = static_cast<double>(df);
  const double t = 1.0 - 2.0 / (9.0 * d) + z_alpha * std::sqrt(2.0 / (9.0 * d));
  return d * t * t * t;
}

// Pearson statistic for observed counts against a uniform expectation.
inline double chi2_uniform_stat(std::span<const std::int64_t> counts) {
  std::int64_t total = 0;
  for (auto c : counts) total += c;
  const double expected = static_cast<double>(total) / static_cast<double>(counts.size());
  double stat = 0.0;
  for (auto c : counts) {
    const double d = static_cast<double>(c) - expected;
    stat += d * d / expected;
  }
  return stat;
}

inline double frobenius_rel_diff(const trimetric::NetworkParams& a,
                                 const trimetric::NetworkParams& b) {
  trimetric::NetworkParams diff = a;
  diff.add_scaled(b, -1.0);
  return diff.frobenius_norm() / std::max(a.frobenius_norm(), 1e-300);
}

inline bool bitwise_equal(const trimetric::NetworkParams& a, const trimetric::NetworkParams& b) {
  auto eq_t = [](const trimetric::Tensor& x, const trimetric::Tensor& y) {
    if (!x.same_shape(y)) return false;
    for (std::int64_t i = 0; i < x.numel(); ++i) {
      if (x[i] != y[i]) return false;
    }
    return true;
  };
  auto eq_v = [](const std::vector<double>& x, const std::vector<double>& y) {
    return x == y;
  };
  return eq_t(a.conv1_w, b.conv1_w) && eq_v(a.conv1_b, b.conv1_b) && eq_t(a.conv2_w, b.conv2_w) &&
         eq_v(a.conv2_b, b.conv2_b) && eq_t(a.fc_w, b.fc_w) && eq_v(a.fc_b, b.fc_b);
}

}  // namespace oracles

#endif  // TRIMETRIC_TESTS_ORACLES_HPP_
