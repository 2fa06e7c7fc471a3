#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "beacon/common.hpp"
#include "beacon/nn/tensor.hpp"

namespace beacon::nn {

/// y = W x + b with W stored out x in.
struct DenseLayer {
  Tensor weight;
  Tensor bias;

  static DenseLayer zeros(std::size_t out, std::size_t in);
  /// He-normal weights (std = sqrt(2 / in)), zero bias.
  static DenseLayer he_init(std::size_t out, std::size_t in, Rng& rng);

  std::size_t in_features() const { return weight.dim(1); }
  std::size_t out_features() const { return weight.dim(0); }
  std::size_t parameter_count() const { return weight.size() + bias.size(); }
  std::uint64_t macs() const { return weight.size(); }
};

std::vector<double> dense_forward(const DenseLayer& layer, std::span<const double> x);

/// Returns dL/dx and accumulates dL/dW, dL/db into `grad` (same shapes as layer).
std::vector<double> dense_backward(const DenseLayer& layer, std::span<const double> x,
                                   std::span<const double> grad_out, DenseLayer& grad);

/// Temporal convolution over a (channels x length) tensor. Kernel is
/// out x in x k; zero padding of `pad` on both ends.
struct ConvLayer {
  Tensor kernel;
  Tensor bias;
  std::size_t stride = 1;
  std::size_t pad = 0;

  static ConvLayer zeros(std::size_t out_ch, std::size_t in_ch, std::size_t k, std::size_t stride,
                         std::size_t pad);
  /// Same-padding layer (pad = k / 2); k must be odd.
  static ConvLayer same(std::size_t out_ch, std::size_t in_ch, std::size_t k, std::size_t stride);
  static ConvLayer he_init(std::size_t out_ch, std::size_t in_ch, std::size_t k, std::size_t stride,
                           std::size_t pad, Rng& rng);

  std::size_t out_channels() const { return kernel.dim(0); }
  std::size_t in_channels() const { return kernel.dim(1); }
  std::size_t kernel_size() const { return kernel.dim(2); }
  std::size_t parameter_count() const { return kernel.size() + bias.size(); }
  /// floor((L + 2 pad - k) / stride) + 1
  std::size_t output_length(std::size_t input_length) const;
  std::uint64_t macs(std::size_t input_length) const {
    return kernel.size() * output_length(input_length);
  }
};

Tensor conv1d_forward(const ConvLayer& layer, const Tensor& x);
/// Returns dL/dx and accumulates kernel/bias gradients into `grad`.
Tensor conv1d_backward(const ConvLayer& layer, const Tensor& x, const Tensor& grad_out,
                       ConvLayer& grad);

void relu_inplace(std::span<double> x);
/// grad *= (output > 0)
void relu_backward_inplace(std::span<const double> output, std::span<double> grad);

/// Max-subtracted softmax. Output is strictly positive and sums to 1.
std::vector<double> softmax(std::span<const double> logits);
ProbVector softmax_probs(std::span<const double> logits);
double sigmoid(double s);

inline constexpr double kProbEpsilon = 1e-7;

/// -log p[y] with p[y] clamped to [eps, 1 - eps].
double cross_entropy(std::span<const double> p, std::size_t y);
/// -I log s - (1 - I) log(1 - s) with s clamped to [eps, 1 - eps].
double bce(double s, int label);

/// Mean over time of a (channels x length) tensor.
std::vector<double> global_avg_pool(const Tensor& x);
/// Spreads dL/d(pooled) evenly back over time.
Tensor global_avg_pool_backward(std::span<const double> grad_pooled, std::size_t length);

/// Inverted dropout: mask entries are 0 or 1/(1-rate).
std::vector<double> dropout_mask(std::size_t n, double rate, Rng& rng);

}  // namespace beacon::nn
