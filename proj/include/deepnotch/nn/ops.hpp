#pragma once

#include <span>

#include "deepnotch/nn/autograd.hpp"
#include "deepnotch/nn/tensor.hpp"

namespace deepnotch::nn {

// ---------------------------------------------------------------------------
// Tensor-level kernels (no tape). Layouts are NCHW; conv weights are OIkk.

// Cross-correlation. Output spatial size floor((H + 2p - k) / s) + 1.
Tensor conv2d_forward(const Tensor& input, const Tensor& weight, int stride, int padding);

// Adjoint of conv2d_forward with padding 0: weight is [A, B, k, k], input
// [N, A, h, w], output [N, B, (h-1)s + k, (w-1)s + k].
Tensor transposed_conv2d(const Tensor& input, const Tensor& weight, int stride);

// ---------------------------------------------------------------------------
// Differentiable operations.

Var conv2d(const Var& x, const Var& weight, const Var& bias, int stride, int padding);
Var conv2d(const Var& x, const Var& weight, int stride, int padding);
Var conv_transpose2d(const Var& x, const Var& weight, int stride);

// Non-overlapping k x k mean pooling; H and W must be divisible by k.
Var avg_pool2d(const Var& x, int k);
// Non-overlapping k x k max pooling; the gradient goes to the first maximum.
Var max_pool2d(const Var& x, int k);
Var global_avg_pool(const Var& x);  // [N,C,H,W] -> [N,C,1,1]
Var upsample_nearest2x(const Var& x);
// Bilinear 2x with half-pixel centers and edge clamping.
Var upsample_bilinear2x(const Var& x);

Var relu(const Var& x);
Var sigmoid(const Var& x);
// Softmax across the channel axis of an NCHW tensor.
Var softmax_channels(const Var& x);
Var concat_channels(const Var& a, const Var& b);

Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var mul(const Var& a, const Var& b);
Var scale(const Var& a, float s);
Var sum(const Var& a);

// Per-pixel filtering: out[n,c,y,x] = sum_t kernels[n,t,y,x] *
// in[n,c,clamp(y+dy_t),clamp(x+dx_t)] with t running row-major over the
// K x K window (replicate border). kernels is [N, K*K, H, W]; the same
// kernel applies to every channel. With clamp_output the result is clipped
// to [0, 1] and the gradient is masked where clipping was active.
Var pixelwise_filter(const Var& image, const Var& kernels, int kernel_size, bool clamp_output);

// Mean absolute difference.
Var l1_loss(const Var& prediction, const Var& target);
// Mean softmax cross-entropy. logits is [N, C] or [N, C, 1, 1].
Var cross_entropy(const Var& logits, std::span<const int> labels);

}  // namespace deepnotch::nn
