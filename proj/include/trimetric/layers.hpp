#ifndef TRIMETRIC_LAYERS_HPP_
#define TRIMETRIC_LAYERS_HPP_

#include <cstdint>
#include <span>
#include <vector>

#include "trimetric/tensor.hpp"

namespace trimetric {

// Spatial extent of a valid (unpadded) convolution or pooling output.
inline int conv_output_extent(int in, int window, int stride) {
  return (in - window) / stride + 1;
}

// Valid 2-d convolution. input (C, H, W), weights (K, C, kh, kw), one bias
// per output channel. Output (K, H', W') with H' = (H - kh) / stride + 1.
Tensor conv2d_forward(const Tensor& input, const Tensor& weights,
                      std::span<const double> bias, int stride);

struct ConvGrads {
  Tensor weight_grad;
  std::vector<double> bias_grad;
  Tensor input_grad;
};

ConvGrads conv2d_backward(const Tensor& input, const Tensor& weights, int stride,
                          const Tensor& out_grad);

// Overlapped max pooling over each channel. argmax holds, per output element,
// the flat index into the input of the first maximal element of its window.
struct PoolResult {
  Tensor output;
  std::vector<std::int64_t> argmax;
};

PoolResult maxpool_forward(const Tensor& input, int window, int stride);

// Routes each out_grad value to its recorded argmax position; overlapping
// windows accumulate.
Tensor maxpool_backward(const std::vector<int>& input_shape,
                        std::span<const std::int64_t> argmax, const Tensor& out_grad);

// Elementwise max(0, x). Subgradient at 0 is 0.
Tensor relu(const Tensor& input);
Tensor relu_backward(const Tensor& input, const Tensor& out_grad);

// y = Wx + b over the flattened input (channel-major, then row, then column).
std::vector<double> fc_forward(std::span<const double> input, const Tensor& weights,
                               std::span<const double> bias);

struct FcGrads {
  Tensor weight_grad;
  std::vector<double> bias_grad;
  std::vector<double> input_grad;
};

FcGrads fc_backward(std::span<const double> input, const Tensor& weights,
                    std::span<const double> out_grad);

// y = x / ||x||. Throws DegenerateInputError when ||x|| <= epsilon.
std::vector<double> l2_normalize(std::span<const double> x, double epsilon);

// d/dx of l2_normalize: (g - y (y . g)) / ||x||.
std::vector<double> l2_normalize_backward(std::span<const double> x,
                                          std::span<const double> out_grad,
                                          double epsilon);

}  // namespace trimetric

#endif  // TRIMETRIC_LAYERS_HPP_
