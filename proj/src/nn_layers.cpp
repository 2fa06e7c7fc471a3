#include <algorithm>
#include <cmath>

#include "beacon/nn/layers.hpp"

namespace beacon::nn {
namespace {

void check_dense(const DenseLayer& layer, std::size_t in) {
  if (layer.weight.rank() != 2 || layer.bias.size() != layer.out_features())
    throw DimensionError("dense layer is malformed");
  if (in != layer.in_features())
    throw DimensionError("dense input has " + std::to_string(in) + " features, expected " +
                         std::to_string(layer.in_features()));
}

// Output positions l in [lo, hi) for which l*stride + tap - pad lies in [0, len).
std::pair<std::size_t, std::size_t> valid_range(std::size_t tap, std::size_t pad, std::size_t stride,
                                                std::size_t len, std::size_t out_len) {
  std::size_t lo = 0;
  if (pad > tap) lo = (pad - tap + stride - 1) / stride;
  // largest l with l*stride + tap - pad <= len - 1
  const std::ptrdiff_t top = static_cast<std::ptrdiff_t>(len) - 1 + static_cast<std::ptrdiff_t>(pad) -
                             static_cast<std::ptrdiff_t>(tap);
  if (top < 0) return {0, 0};
  const std::size_t hi = std::min(out_len, static_cast<std::size_t>(top) / stride + 1);
  return {lo, std::max(lo, hi)};
}

}  // namespace

DenseLayer DenseLayer::zeros(std::size_t out, std::size_t in) {
  return {Tensor({out, in}), Tensor({out})};
}

DenseLayer DenseLayer::he_init(std::size_t out, std::size_t in, Rng& rng) {
  auto layer = zeros(out, in);
  const double std = std::sqrt(2.0 / static_cast<double>(in));
  for (auto& w : layer.weight.data()) w = std * gaussian(rng);
  return layer;
}

std::vector<double> dense_forward(const DenseLayer& layer, std::span<const double> x) {
  check_dense(layer, x.size());
  const std::size_t out = layer.out_features();
  std::vector<double> y(out);
  for (std::size_t o = 0; o < out; ++o) {
    const auto w = layer.weight.row(o);
    double acc = layer.bias[o];
    for (std::size_t i = 0; i < x.size(); ++i) acc += w[i] * x[i];
    y[o] = acc;
  }
  return y;
}

std::vector<double> dense_backward(const DenseLayer& layer, std::span<const double> x,
                                   std::span<const double> grad_out, DenseLayer& grad) {
  check_dense(layer, x.size());
  if (grad_out.size() != layer.out_features() || !grad.weight.same_shape(layer.weight) ||
      !grad.bias.same_shape(layer.bias))
    throw DimensionError("dense backward shapes disagree");
  std::vector<double> gx(x.size(), 0.0);
  for (std::size_t o = 0; o < layer.out_features(); ++o) {
    const double g = grad_out[o];
    if (g == 0.0) continue;
    const auto w = layer.weight.row(o);
    auto gw = grad.weight.row(o);
    for (std::size_t i = 0; i < x.size(); ++i) {
      gw[i] += g * x[i];
      gx[i] += g * w[i];
    }
    grad.bias[o] += g;
  }
  return gx;
}

ConvLayer ConvLayer::zeros(std::size_t out_ch, std::size_t in_ch, std::size_t k, std::size_t stride,
                           std::size_t pad) {
  if (stride == 0) throw DimensionError("conv stride must be positive");
  ConvLayer c{Tensor({out_ch, in_ch, k}), Tensor({out_ch}), stride, pad};
  return c;
}

ConvLayer ConvLayer::same(std::size_t out_ch, std::size_t in_ch, std::size_t k, std::size_t stride) {
  if (k % 2 == 0) throw DimensionError("same-padding conv needs an odd kernel");
  return zeros(out_ch, in_ch, k, stride, k / 2);
}

ConvLayer ConvLayer::he_init(std::size_t out_ch, std::size_t in_ch, std::size_t k, std::size_t stride,
                             std::size_t pad, Rng& rng) {
  auto c = zeros(out_ch, in_ch, k, stride, pad);
  const double std = std::sqrt(2.0 / static_cast<double>(in_ch * k));
  for (auto& w : c.kernel.data()) w = std * gaussian(rng);
  return c;
}

std::size_t ConvLayer::output_length(std::size_t input_length) const {
  const std::size_t k = kernel_size();
  if (input_length + 2 * pad < k) throw DimensionError("conv input shorter than kernel");
  return (input_length + 2 * pad - k) / stride + 1;
}

Tensor conv1d_forward(const ConvLayer& layer, const Tensor& x) {
  if (x.rank() != 2 || x.dim(0) != layer.in_channels())
    throw DimensionError("conv input " + x.shape_string() + " does not match " +
                         std::to_string(layer.in_channels()) + " input channels");
  const std::size_t len = x.dim(1);
  if (len < layer.kernel_size() && layer.pad == 0) throw DimensionError("conv input shorter than kernel");
  const std::size_t out_len = layer.output_length(len);
  const std::size_t in_ch = layer.in_channels();
  const std::size_t k = layer.kernel_size();
  const std::size_t s = layer.stride;
  Tensor y({layer.out_channels(), out_len});
  for (std::size_t o = 0; o < layer.out_channels(); ++o) {
    double* yo = y.ptr() + o * out_len;
    std::fill(yo, yo + out_len, layer.bias[o]);
    for (std::size_t i = 0; i < in_ch; ++i) {
      const double* xi = x.ptr() + i * len;
      const double* w = layer.kernel.ptr() + (o * in_ch + i) * k;
      for (std::size_t t = 0; t < k; ++t) {
        const auto [lo, hi] = valid_range(t, layer.pad, s, len, out_len);
        if (hi == lo) continue;
        const double wt = w[t];
        const double* src = xi + (lo * s + t - layer.pad);
        double* dst = yo + lo;
        const std::size_t n = hi - lo;
        if (s == 1) {
          for (std::size_t j = 0; j < n; ++j) dst[j] += wt * src[j];
        } else {
          for (std::size_t j = 0; j < n; ++j) dst[j] += wt * src[j * s];
        }
      }
    }
  }
  return y;
}

Tensor conv1d_backward(const ConvLayer& layer, const Tensor& x, const Tensor& grad_out, ConvLayer& grad) {
  if (x.rank() != 2 || x.dim(0) != layer.in_channels()) throw DimensionError("conv backward input shape");
  const std::size_t len = x.dim(1);
  const std::size_t out_len = layer.output_length(len);
  if (grad_out.rank() != 2 || grad_out.dim(0) != layer.out_channels() || grad_out.dim(1) != out_len)
    throw DimensionError("conv backward gradient shape");
  if (!grad.kernel.same_shape(layer.kernel) || !grad.bias.same_shape(layer.bias))
    throw DimensionError("conv gradient accumulator shape");
  const std::size_t in_ch = layer.in_channels();
  const std::size_t k = layer.kernel_size();
  const std::size_t s = layer.stride;
  Tensor gx({in_ch, len});
  for (std::size_t o = 0; o < layer.out_channels(); ++o) {
    const double* go = grad_out.ptr() + o * out_len;
    double gb = 0.0;
    for (std::size_t l = 0; l < out_len; ++l) gb += go[l];
    grad.bias[o] += gb;
    for (std::size_t i = 0; i < in_ch; ++i) {
      const double* xi = x.ptr() + i * len;
      double* gxi = gx.ptr() + i * len;
      const double* w = layer.kernel.ptr() + (o * in_ch + i) * k;
      double* gw = grad.kernel.ptr() + (o * in_ch + i) * k;
      for (std::size_t t = 0; t < k; ++t) {
        const auto [lo, hi] = valid_range(t, layer.pad, s, len, out_len);
        if (hi == lo) continue;
        const double wt = w[t];
        const std::size_t off = lo * s + t - layer.pad;
        const double* src = xi + off;
        double* dst = gxi + off;
        const double* g = go + lo;
        const std::size_t n = hi - lo;
        double acc = 0.0;
        if (s == 1) {
          for (std::size_t j = 0; j < n; ++j) {
            acc += g[j] * src[j];
            dst[j] += wt * g[j];
          }
        } else {
          for (std::size_t j = 0; j < n; ++j) {
            acc += g[j] * src[j * s];
            dst[j * s] += wt * g[j];
          }
        }
        gw[t] += acc;
      }
    }
  }
  return gx;
}

void relu_inplace(std::span<double> x) {
  for (auto& v : x) v = v > 0.0 ? v : 0.0;
}

void relu_backward_inplace(std::span<const double> output, std::span<double> grad) {
  if (output.size() != grad.size()) throw DimensionError("relu backward size mismatch");
  for (std::size_t i = 0; i < grad.size(); ++i) {
    if (!(output[i] > 0.0)) grad[i] = 0.0;
  }
}

std::vector<double> softmax(std::span<const double> logits) {
  if (logits.empty()) throw DimensionError("softmax of empty vector");
  const double mx = *std::max_element(logits.begin(), logits.end());
  std::vector<double> p(logits.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    p[i] = std::exp(logits[i] - mx);
    sum += p[i];
  }
  for (auto& v : p) v /= sum;
  return p;
}

ProbVector softmax_probs(std::span<const double> logits) {
  if (logits.size() != kNumClasses) throw DimensionError("expected 10 logits");
  const auto p = softmax(logits);
  ProbVector out{};
  std::copy(p.begin(), p.end(), out.begin());
  return out;
}

double sigmoid(double s) {
  if (s >= 0.0) return 1.0 / (1.0 + std::exp(-s));
  const double e = std::exp(s);
  return e / (1.0 + e);
}

double cross_entropy(std::span<const double> p, std::size_t y) {
  if (y >= p.size()) throw DimensionError("class index out of range");
  return -std::log(std::clamp(p[y], kProbEpsilon, 1.0 - kProbEpsilon));
}

double bce(double s, int label) {
  const double c = std::clamp(s, kProbEpsilon, 1.0 - kProbEpsilon);
  return label ? -std::log(c) : -std::log(1.0 - c);
}

std::vector<double> global_avg_pool(const Tensor& x) {
  if (x.rank() != 2) throw DimensionError("pool expects channels x length");
  const std::size_t len = x.dim(1);
  std::vector<double> out(x.dim(0));
  for (std::size_t c = 0; c < out.size(); ++c) {
    const auto r = x.row(c);
    double acc = 0.0;
    for (double v : r) acc += v;
    out[c] = acc / static_cast<double>(len);
  }
  return out;
}

Tensor global_avg_pool_backward(std::span<const double> grad_pooled, std::size_t length) {
  Tensor g({grad_pooled.size(), length});
  for (std::size_t c = 0; c < grad_pooled.size(); ++c) {
    const double v = grad_pooled[c] / static_cast<double>(length);
    for (auto& e : g.row(c)) e = v;
  }
  return g;
}

std::vector<double> dropout_mask(std::size_t n, double rate, Rng& rng) {
  std::vector<double> mask(n, 1.0);
  if (rate <= 0.0) return mask;
  const double keep = 1.0 / (1.0 - rate);
  for (auto& m : mask) m = uniform(rng, 0.0, 1.0) < rate ? 0.0 : keep;
  return mask;
}

}  // namespace beacon::nn
