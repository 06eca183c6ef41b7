#include "trimetric/network.hpp"

#include <cmath>
#include <cstring>
#include <string>

#include "trimetric/error.hpp"
#include "trimetric/rng.hpp"

namespace trimetric {

ArchitectureConfig ArchitectureConfig::paper() { return ArchitectureConfig{}; }

ArchitectureConfig ArchitectureConfig::desk() {
  ArchitectureConfig cfg;
  cfg.in_channels = 3;
  cfg.in_height = 20;
  cfg.in_width = 12;
  cfg.conv1 = {8, 3, 2};
  cfg.conv2 = {8, 3, 1};
  cfg.embedding_dim = 16;
  // fan-in scaled so activations stay O(1) at this size
  cfg.conv_init_std = 0.2;
  cfg.fc_init_std = 0.16;
  return cfg;
}

void ArchitectureConfig::validate() const {
  auto fail = [](const std::string& msg) { throw ConfigError("architecture: " + msg); };
  if (in_channels < 1 || in_height < 1 || in_width < 1) fail("input extents must be positive");
  if (conv1.stride < 1 || conv2.stride < 1 || pool_stride < 1) fail("strides must be >= 1");
  if (conv1.kernels < 1 || conv2.kernels < 1) fail("kernel counts must be >= 1");
  if (conv1.kernel_size < 1 || conv2.kernel_size < 1 || pool_window < 1)
    fail("window sizes must be >= 1");
  if (embedding_dim < 1) fail("embedding_dim must be >= 1");
  if (norm_epsilon <= 0.0) fail("norm_epsilon must be positive");
  if (conv_init_std <= 0.0 || fc_init_std <= 0.0) fail("init stddevs must be positive");

  if (conv1.kernel_size > in_height || conv1.kernel_size > in_width)
    fail("conv1 kernel does not fit inside the input");
  auto s1 = conv1_out_shape();
  if (pool_window > s1[1] || pool_window > s1[2]) fail("pool window does not fit after conv1");
  auto p1 = pool1_out_shape();
  if (conv2.kernel_size > p1[1] || conv2.kernel_size > p1[2])
    fail("conv2 kernel does not fit after pool1");
  auto s2 = conv2_out_shape();
  if (pool_window > s2[1] || pool_window > s2[2]) fail("pool window does not fit after conv2");
}

std::vector<int> ArchitectureConfig::conv1_out_shape() const {
  return {conv1.kernels, conv_output_extent(in_height, conv1.kernel_size, conv1.stride),
          conv_output_extent(in_width, conv1.kernel_size, conv1.stride)};
}

std::vector<int> ArchitectureConfig::pool1_out_shape() const {
  auto s = conv1_out_shape();
  return {s[0], conv_output_extent(s[1], pool_window, pool_stride),
          conv_output_extent(s[2], pool_window, pool_stride)};
}

std::vector<int> ArchitectureConfig::conv2_out_shape() const {
  auto s = pool1_out_shape();
  return {conv2.kernels, conv_output_extent(s[1], conv2.kernel_size, conv2.stride),
          conv_output_extent(s[2], conv2.kernel_size, conv2.stride)};
}

std::vector<int> ArchitectureConfig::pool2_out_shape() const {
  auto s = conv2_out_shape();
  return {s[0], conv_output_extent(s[1], pool_window, pool_stride),
          conv_output_extent(s[2], pool_window, pool_stride)};
}

std::int64_t ArchitectureConfig::flattened_size() const { return shape_numel(pool2_out_shape()); }

NetworkParams NetworkParams::zeros(const ArchitectureConfig& cfg) {
  NetworkParams p;
  p.conv1_w = Tensor({cfg.conv1.kernels, cfg.in_channels, cfg.conv1.kernel_size, cfg.conv1.kernel_size});
  p.conv1_b.assign(static_cast<std::size_t>(cfg.conv1.kernels), 0.0);
  p.conv2_w = Tensor({cfg.conv2.kernels, cfg.conv1.kernels, cfg.conv2.kernel_size, cfg.conv2.kernel_size});
  p.conv2_b.assign(static_cast<std::size_t>(cfg.conv2.kernels), 0.0);
  p.fc_w = Tensor({cfg.embedding_dim, static_cast<int>(cfg.flattened_size())});
  p.fc_b.assign(static_cast<std::size_t>(cfg.embedding_dim), 0.0);
  return p;
}

bool NetworkParams::same_shapes(const NetworkParams& other) const {
  return conv1_w.same_shape(other.conv1_w) && conv1_b.size() == other.conv1_b.size() &&
         conv2_w.same_shape(other.conv2_w) && conv2_b.size() == other.conv2_b.size() &&
         fc_w.same_shape(other.fc_w) && fc_b.size() == other.fc_b.size();
}

bool NetworkParams::all_finite() const {
  auto vec_finite = [](const std::vector<double>& v) {
    for (double x : v)
      if (!std::isfinite(x)) return false;
    return true;
  };
  return conv1_w.all_finite() && vec_finite(conv1_b) && conv2_w.all_finite() &&
         vec_finite(conv2_b) && fc_w.all_finite() && vec_finite(fc_b);
}

std::int64_t NetworkParams::count() const {
  return conv1_w.numel() + static_cast<std::int64_t>(conv1_b.size()) + conv2_w.numel() +
         static_cast<std::int64_t>(conv2_b.size()) + fc_w.numel() +
         static_cast<std::int64_t>(fc_b.size());
}

void NetworkParams::add_scaled(const NetworkParams& other, double scale) {
  if (!same_shapes(other)) throw ShapeError("params: add_scaled shape mismatch");
  auto axpy_t = [scale](Tensor& dst, const Tensor& src) {
    const std::int64_t n = dst.numel();
    for (std::int64_t i = 0; i < n; ++i) dst[i] += scale * src[i];
  };
  auto axpy_v = [scale](std::vector<double>& dst, const std::vector<double>& src) {
    for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += scale * src[i];
  };
  axpy_t(conv1_w, other.conv1_w);
  axpy_v(conv1_b, other.conv1_b);
  axpy_t(conv2_w, other.conv2_w);
  axpy_v(conv2_b, other.conv2_b);
  axpy_t(fc_w, other.fc_w);
  axpy_v(fc_b, other.fc_b);
}

double NetworkParams::frobenius_norm() const {
  double sq = 0.0;
  auto acc_t = [&sq](const Tensor& t) {
    const std::int64_t n = t.numel();
    for (std::int64_t i = 0; i < n; ++i) sq += t[i] * t[i];
  };
  auto acc_v = [&sq](const std::vector<double>& v) {
    for (double x : v) sq += x * x;
  };
  acc_t(conv1_w);
  acc_v(conv1_b);
  acc_t(conv2_w);
  acc_v(conv2_b);
  acc_t(fc_w);
  acc_v(fc_b);
  return std::sqrt(sq);
}

namespace {

void fnv_mix(std::uint64_t& h, const void* bytes, std::size_t n) {
  const unsigned char* p = static_cast<const unsigned char*>(bytes);
  for (std::size_t i = 0; i < n; ++i) {
    h ^= p[i];
    h *= 0x100000001b3ULL;
  }
}

void fnv_mix_samples(std::uint64_t& h, const double* data, std::int64_t n) {
  fnv_mix(h, &n, sizeof n);
  if (n == 0) return;
  // first, middle and last element are enough to notice an update
  const double samples[3] = {data[0], data[n / 2], data[n - 1]};
  fnv_mix(h, samples, sizeof samples);
}

}  // namespace

std::uint64_t NetworkParams::fingerprint() const {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  fnv_mix_samples(h, conv1_w.data(), conv1_w.numel());
  fnv_mix_samples(h, conv1_b.data(), static_cast<std::int64_t>(conv1_b.size()));
  fnv_mix_samples(h, conv2_w.data(), conv2_w.numel());
  fnv_mix_samples(h, conv2_b.data(), static_cast<std::int64_t>(conv2_b.size()));
  fnv_mix_samples(h, fc_w.data(), fc_w.numel());
  fnv_mix_samples(h, fc_b.data(), static_cast<std::int64_t>(fc_b.size()));
  return h;
}

NetworkParams init_params(const ArchitectureConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  NetworkParams p = NetworkParams::zeros(cfg);
  Rng rng(seed);
  GaussianSampler gauss(rng);
  auto fill_gaussian = [&gauss](Tensor& t, double stddev) {
    const std::int64_t n = t.numel();
    for (std::int64_t i = 0; i < n; ++i) t[i] = stddev * gauss.next();
  };
  fill_gaussian(p.conv1_w, cfg.conv_init_std);
  fill_gaussian(p.conv2_w, cfg.conv_init_std);
  fill_gaussian(p.fc_w, cfg.fc_init_std);
  // biases stay 0
  return p;
}

Embedding network_forward(const Tensor& image, const NetworkParams& params,
                          const ArchitectureConfig& cfg, ForwardCache* cache) {
  if (image.shape() != cfg.input_shape()) {
    throw ShapeError("network_forward: image shape " + image.shape_str() +
                     " does not match configured input " + shape_to_string(cfg.input_shape()));
  }

  Tensor conv1_out = conv2d_forward(image, params.conv1_w, params.conv1_b, cfg.conv1.stride);
  Tensor relu1_out = relu(conv1_out);
  PoolResult pool1 = maxpool_forward(relu1_out, cfg.pool_window, cfg.pool_stride);
  Tensor conv2_out = conv2d_forward(pool1.output, params.conv2_w, params.conv2_b, cfg.conv2.stride);
  Tensor relu2_out = relu(conv2_out);
  PoolResult pool2 = maxpool_forward(relu2_out, cfg.pool_window, cfg.pool_stride);
  std::vector<double> fc_out = fc_forward(
      std::span<const double>(pool2.output.data(), static_cast<std::size_t>(pool2.output.numel())),
      params.fc_w, params.fc_b);
  Embedding emb = l2_normalize(fc_out, cfg.norm_epsilon);

  if (cache) {
    cache->input = image;
    cache->conv1_out = std::move(conv1_out);
    cache->relu1_out = std::move(relu1_out);
    cache->pool1 = std::move(pool1);
    cache->conv2_out = std::move(conv2_out);
    cache->relu2_out = std::move(relu2_out);
    cache->pool2 = std::move(pool2);
    cache->fc_out = std::move(fc_out);
    cache->params_fingerprint = params.fingerprint();
  }
  return emb;
}

NetworkParams network_backward(const ForwardCache& cache, std::span<const double> output_grad,
                               const NetworkParams& params, const ArchitectureConfig& cfg) {
  if (static_cast<int>(output_grad.size()) != cfg.embedding_dim)
    throw ShapeError("network_backward: output_grad length does not match embedding dim");
  if (cache.params_fingerprint != params.fingerprint())
    throw ContractViolation("network_backward: cache is stale (parameters changed since forward)");

  NetworkParams grad = NetworkParams::zeros(cfg);

  std::vector<double> fc_out_grad = l2_normalize_backward(cache.fc_out, output_grad, cfg.norm_epsilon);
  FcGrads fc_g = fc_backward(
      std::span<const double>(cache.pool2.output.data(),
                              static_cast<std::size_t>(cache.pool2.output.numel())),
      params.fc_w, fc_out_grad);
  grad.fc_w = std::move(fc_g.weight_grad);
  grad.fc_b = std::move(fc_g.bias_grad);

  Tensor pool2_grad(cache.pool2.output.shape(), std::move(fc_g.input_grad));
  Tensor relu2_grad = maxpool_backward(cache.relu2_out.shape(), cache.pool2.argmax, pool2_grad);
  Tensor conv2_grad = relu_backward(cache.conv2_out, relu2_grad);
  ConvGrads conv2_g = conv2d_backward(cache.pool1.output, params.conv2_w, cfg.conv2.stride, conv2_grad);
  grad.conv2_w = std::move(conv2_g.weight_grad);
  grad.conv2_b = std::move(conv2_g.bias_grad);

  Tensor relu1_grad = maxpool_backward(cache.relu1_out.shape(), cache.pool1.argmax, conv2_g.input_grad);
  Tensor conv1_grad = relu_backward(cache.conv1_out, relu1_grad);
  ConvGrads conv1_g = conv2d_backward(cache.input, params.conv1_w, cfg.conv1.stride, conv1_grad);
  grad.conv1_w = std::move(conv1_g.weight_grad);
  grad.conv1_b = std::move(conv1_g.bias_grad);

  return grad;
}

}  // namespace trimetric
