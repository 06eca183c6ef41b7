#include "trimetric/layers.hpp"

#include <cmath>
#include <limits>
#include <string>

#include "trimetric/error.hpp"

namespace trimetric {

namespace {

void require(bool ok, const std::string& msg) {
  if (!ok) throw ShapeError(msg);
}

}  // namespace

Tensor conv2d_forward(const Tensor& input, const Tensor& weights,
                      std::span<const double> bias, int stride) {
  require(input.rank() == 3, "conv2d: input must be (C,H,W), got " + input.shape_str());
  require(weights.rank() == 4, "conv2d: weights must be (K,C,kh,kw), got " + weights.shape_str());
  const int in_c = input.dim(0), in_h = input.dim(1), in_w = input.dim(2);
  const int k = weights.dim(0), w_c = weights.dim(1), kh = weights.dim(2), kw = weights.dim(3);
  require(stride >= 1, "conv2d: stride must be >= 1");
  require(w_c == in_c, "conv2d: kernel channels " + std::to_string(w_c) +
                           " do not match input channels " + std::to_string(in_c));
  require(kh <= in_h && kw <= in_w, "conv2d: kernel " + weights.shape_str() +
                                        " exceeds input " + input.shape_str());
  require(static_cast<int>(bias.size()) == k, "conv2d: bias size must equal kernel count");
  if (!input.all_finite()) throw NumericError("conv2d: non-finite input");

  const int out_h = conv_output_extent(in_h, kh, stride);
  const int out_w = conv_output_extent(in_w, kw, stride);
  Tensor out({k, out_h, out_w});
  for (int f = 0; f < k; ++f) {
    for (int oh = 0; oh < out_h; ++oh) {
      for (int ow = 0; ow < out_w; ++ow) {
        double acc = bias[static_cast<std::size_t>(f)];
        for (int c = 0; c < in_c; ++c) {
          for (int i = 0; i < kh; ++i) {
            const double* in_row = input.data() +
                (static_cast<std::int64_t>(c) * in_h + (oh * stride + i)) * in_w + ow * stride;
            const double* w_row = weights.data() +
                ((static_cast<std::int64_t>(f) * in_c + c) * kh + i) * kw;
            for (int j = 0; j < kw; ++j) acc += w_row[j] * in_row[j];
          }
        }
        out.at(f, oh, ow) = acc;
      }
    }
  }
  return out;
}

ConvGrads conv2d_backward(const Tensor& input, const Tensor& weights, int stride,
                          const Tensor& out_grad) {
  require(input.rank() == 3 && weights.rank() == 4 && out_grad.rank() == 3,
          "conv2d_backward: rank mismatch");
  const int in_c = input.dim(0), in_h = input.dim(1), in_w = input.dim(2);
  const int k = weights.dim(0), kh = weights.dim(2), kw = weights.dim(3);
  require(weights.dim(1) == in_c, "conv2d_backward: kernel/input channel mismatch");
  const int out_h = conv_output_extent(in_h, kh, stride);
  const int out_w = conv_output_extent(in_w, kw, stride);
  require(out_grad.dim(0) == k && out_grad.dim(1) == out_h && out_grad.dim(2) == out_w,
          "conv2d_backward: out_grad shape " + out_grad.shape_str() + " does not match forward output");

  ConvGrads g{Tensor(weights.shape()), std::vector<double>(static_cast<std::size_t>(k), 0.0),
              Tensor(input.shape())};
  for (int f = 0; f < k; ++f) {
    for (int oh = 0; oh < out_h; ++oh) {
      for (int ow = 0; ow < out_w; ++ow) {
        const double go = out_grad.at(f, oh, ow);
        g.bias_grad[static_cast<std::size_t>(f)] += go;
        for (int c = 0; c < in_c; ++c) {
          for (int i = 0; i < kh; ++i) {
            const std::int64_t in_off =
                (static_cast<std::int64_t>(c) * in_h + (oh * stride + i)) * in_w + ow * stride;
            const std::int64_t w_off = ((static_cast<std::int64_t>(f) * in_c + c) * kh + i) * kw;
            for (int j = 0; j < kw; ++j) {
              g.weight_grad[w_off + j] += go * input[in_off + j];
              g.input_grad[in_off + j] += go * weights[w_off + j];
            }
          }
        }
      }
    }
  }
  return g;
}

PoolResult maxpool_forward(const Tensor& input, int window, int stride) {
  require(input.rank() == 3, "maxpool: input must be (C,H,W)");
  require(window >= 1 && stride >= 1, "maxpool: window and stride must be >= 1");
  const int c_n = input.dim(0), in_h = input.dim(1), in_w = input.dim(2);
  require(window <= in_h && window <= in_w,
          "maxpool: window " + std::to_string(window) + " exceeds input " + input.shape_str());

  const int out_h = conv_output_extent(in_h, window, stride);
  const int out_w = conv_output_extent(in_w, window, stride);
  PoolResult r{Tensor({c_n, out_h, out_w}), {}};
  r.argmax.resize(static_cast<std::size_t>(r.output.numel()));
  std::size_t o = 0;
  for (int c = 0; c < c_n; ++c) {
    for (int oh = 0; oh < out_h; ++oh) {
      for (int ow = 0; ow < out_w; ++ow) {
        double best = -std::numeric_limits<double>::infinity();
        std::int64_t best_idx = -1;
        for (int i = 0; i < window; ++i) {
          for (int j = 0; j < window; ++j) {
            const std::int64_t idx =
                (static_cast<std::int64_t>(c) * in_h + (oh * stride + i)) * in_w + (ow * stride + j);
            const double v = input[idx];
            if (v > best) {  // strict: ties go to the first element in scan order
              best = v;
              best_idx = idx;
            }
          }
        }
        r.output[static_cast<std::int64_t>(o)] = best;
        r.argmax[o] = best_idx;
        ++o;
      }
    }
  }
  return r;
}

Tensor maxpool_backward(const std::vector<int>& input_shape,
                        std::span<const std::int64_t> argmax, const Tensor& out_grad) {
  require(argmax.size() == static_cast<std::size_t>(out_grad.numel()),
          "maxpool_backward: argmax length does not match out_grad");
  Tensor in_grad(input_shape);
  for (std::size_t o = 0; o < argmax.size(); ++o) {
    in_grad[argmax[o]] += out_grad[static_cast<std::int64_t>(o)];
  }
  return in_grad;
}

Tensor relu(const Tensor& input) {
  Tensor out(input.shape());
  const std::int64_t n = input.numel();
  for (std::int64_t i = 0; i < n; ++i) out[i] = input[i] > 0.0 ? input[i] : 0.0;
  return out;
}

Tensor relu_backward(const Tensor& input, const Tensor& out_grad) {
  require(input.same_shape(out_grad), "relu_backward: shape mismatch");
  Tensor in_grad(input.shape());
  const std::int64_t n = input.numel();
  for (std::int64_t i = 0; i < n; ++i) in_grad[i] = input[i] > 0.0 ? out_grad[i] : 0.0;
  return in_grad;
}

std::vector<double> fc_forward(std::span<const double> input, const Tensor& weights,
                               std::span<const double> bias) {
  require(weights.rank() == 2, "fc: weights must be (out, in)");
  const int out_n = weights.dim(0), in_n = weights.dim(1);
  require(static_cast<int>(input.size()) == in_n,
          "fc: input length " + std::to_string(input.size()) + " does not match weight columns " +
              std::to_string(in_n));
  require(static_cast<int>(bias.size()) == out_n, "fc: bias length does not match weight rows");

  std::vector<double> y(static_cast<std::size_t>(out_n));
  for (int r = 0; r < out_n; ++r) {
    const double* w_row = weights.data() + static_cast<std::int64_t>(r) * in_n;
    double acc = bias[static_cast<std::size_t>(r)];
    for (int c = 0; c < in_n; ++c) acc += w_row[c] * input[static_cast<std::size_t>(c)];
    y[static_cast<std::size_t>(r)] = acc;
  }
  return y;
}

FcGrads fc_backward(std::span<const double> input, const Tensor& weights,
                    std::span<const double> out_grad) {
  require(weights.rank() == 2, "fc_backward: weights must be (out, in)");
  const int out_n = weights.dim(0), in_n = weights.dim(1);
  require(static_cast<int>(input.size()) == in_n, "fc_backward: input length mismatch");
  require(static_cast<int>(out_grad.size()) == out_n, "fc_backward: out_grad length mismatch");

  FcGrads g{Tensor(weights.shape()), std::vector<double>(out_grad.begin(), out_grad.end()),
            std::vector<double>(static_cast<std::size_t>(in_n), 0.0)};
  for (int r = 0; r < out_n; ++r) {
    const double go = out_grad[static_cast<std::size_t>(r)];
    const double* w_row = weights.data() + static_cast<std::int64_t>(r) * in_n;
    double* wg_row = g.weight_grad.data() + static_cast<std::int64_t>(r) * in_n;
    for (int c = 0; c < in_n; ++c) {
      wg_row[c] = go * input[static_cast<std::size_t>(c)];
      g.input_grad[static_cast<std::size_t>(c)] += w_row[c] * go;
    }
  }
  return g;
}

namespace {

double l2_norm_checked(std::span<const double> x, double epsilon) {
  double sq = 0.0;
  for (double v : x) sq += v * v;
  const double norm = std::sqrt(sq);
  if (!(norm > epsilon)) {
    throw DegenerateInputError("l2_normalize: input norm " + std::to_string(norm) +
                               " is not above epsilon " + std::to_string(epsilon));
  }
  return norm;
}

}  // namespace

std::vector<double> l2_normalize(std::span<const double> x, double epsilon) {
  const double norm = l2_norm_checked(x, epsilon);
  std::vector<double> y(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) y[i] = x[i] / norm;
  return y;
}

std::vector<double> l2_normalize_backward(std::span<const double> x,
                                          std::span<const double> out_grad,
                                          double epsilon) {
  if (x.size() != out_grad.size()) throw ShapeError("l2_normalize_backward: length mismatch");
  const double norm = l2_norm_checked(x, epsilon);
  std::vector<double> y(x.size());
  double y_dot_g = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    y[i] = x[i] / norm;
    y_dot_g += y[i] * out_grad[i];
  }
  std::vector<double> in_grad(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    in_grad[i] = (out_grad[i] - y[i] * y_dot_g) / norm;
  }
  return in_grad;
}

}  // namespace trimetric
