#ifndef TRIMETRIC_NETWORK_HPP_
#define TRIMETRIC_NETWORK_HPP_

#include <cstdint>
#include <span>
#include <vector>

#include "trimetric/layers.hpp"
#include "trimetric/tensor.hpp"

namespace trimetric {

using Embedding = std::vector<double>;

struct ConvSpec {
  int kernels = 32;
  int kernel_size = 5;
  int stride = 1;
  bool operator==(const ConvSpec&) const = default;
};

// Five-layer stack: conv1 -> relu -> pool -> conv2 -> relu -> pool -> fc ->
// l2 normalize. All shapes derive from this config.
struct ArchitectureConfig {
  int in_channels = 3;
  int in_height = 250;
  int in_width = 100;
  ConvSpec conv1{32, 5, 2};
  ConvSpec conv2{32, 5, 1};
  int pool_window = 2;  // z
  int pool_stride = 1;  // s
  int embedding_dim = 400;
  double norm_epsilon = 1e-12;
  // Weight init scales. The defaults suit the full-size preset; shrunken
  // configs need larger ones, otherwise the pre-normalization output starts
  // so close to zero that the normalization Jacobian blows up the first
  // gradient steps.
  double conv_init_std = 0.01;
  double fc_init_std = 0.001;

  // Full-size preset: 3x250x100 input, 32 5x5 kernels per conv layer,
  // 400-dim embedding.
  static ArchitectureConfig paper();
  // Small preset for tests and fast experiments: 3x20x12 input, 8 3x3
  // kernels per conv layer, 16-dim embedding.
  static ArchitectureConfig desk();

  void validate() const;  // throws ConfigError

  std::vector<int> input_shape() const { return {in_channels, in_height, in_width}; }
  std::vector<int> conv1_out_shape() const;
  std::vector<int> pool1_out_shape() const;
  std::vector<int> conv2_out_shape() const;
  std::vector<int> pool2_out_shape() const;
  std::int64_t flattened_size() const;

  bool operator==(const ArchitectureConfig&) const = default;
};

struct NetworkParams {
  Tensor conv1_w;  // (k1, C, ks1, ks1)
  std::vector<double> conv1_b;
  Tensor conv2_w;  // (k2, k1, ks2, ks2)
  std::vector<double> conv2_b;
  Tensor fc_w;  // (embedding_dim, flattened pool2 size)
  std::vector<double> fc_b;

  static NetworkParams zeros(const ArchitectureConfig& cfg);

  bool same_shapes(const NetworkParams& other) const;
  bool all_finite() const;
  std::int64_t count() const;

  // this += scale * other, elementwise over every parameter group.
  void add_scaled(const NetworkParams& other, double scale);
  double frobenius_norm() const;

  // Cheap identity token used to detect stale forward caches.
  std::uint64_t fingerprint() const;
};

// Gaussian-initialized weights (conv std 0.01, fc std 0.001), zero biases.
// Deterministic for a fixed seed.
NetworkParams init_params(const ArchitectureConfig& cfg, std::uint64_t seed);

struct Network {
  ArchitectureConfig arch;
  NetworkParams params;
};

// Activations retained by a forward pass for the matching backward pass.
struct ForwardCache {
  Tensor input;
  Tensor conv1_out;  // pre-activation
  Tensor relu1_out;
  PoolResult pool1;
  Tensor conv2_out;
  Tensor relu2_out;
  PoolResult pool2;
  std::vector<double> fc_out;  // pre-normalization
  std::uint64_t params_fingerprint = 0;
};

// Unit-norm embedding of one image. Fills *cache when given.
Embedding network_forward(const Tensor& image, const NetworkParams& params,
                          const ArchitectureConfig& cfg, ForwardCache* cache = nullptr);

// Parameter gradient of a scalar loss given its gradient w.r.t. the
// embedding. Linear in output_grad. Throws ContractViolation if the cache
// was produced under different parameters.
NetworkParams network_backward(const ForwardCache& cache, std::span<const double> output_grad,
                               const NetworkParams& params, const ArchitectureConfig& cfg);

}  // namespace trimetric

#endif  // TRIMETRIC_NETWORK_HPP_
