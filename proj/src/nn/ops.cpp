#include "deepnotch/nn/ops.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "deepnotch/errors.hpp"
#include "gemm.hpp"

namespace deepnotch::nn {

namespace {

using detail::gemm_nn;
using detail::gemm_nt;
using detail::gemm_tn;

struct ConvGeometry {
  int channels, height, width;  // input plane
  int kernel, stride, padding;
  int out_h, out_w;
};

int conv_out(int n, int k, int s, int p) { return (n + 2 * p - k) / s + 1; }

void require_rank4(const Tensor& t, const char* what) {
  if (t.rank() != 4) {
    throw ContractError(std::string(what) + ": expected NCHW tensor, got " + shape_str(t.shape()));
  }
}

void im2col(const float* x, const ConvGeometry& g, float* col) {
  const int plane = g.out_h * g.out_w;
  for (int c = 0; c < g.channels; ++c) {
    const float* xc = x + static_cast<long>(c) * g.height * g.width;
    for (int ki = 0; ki < g.kernel; ++ki) {
      for (int kj = 0; kj < g.kernel; ++kj) {
        float* row = col + static_cast<long>((c * g.kernel + ki) * g.kernel + kj) * plane;
        for (int oy = 0; oy < g.out_h; ++oy) {
          const int iy = oy * g.stride - g.padding + ki;
          float* dst = row + oy * g.out_w;
          if (iy < 0 || iy >= g.height) {
            std::fill(dst, dst + g.out_w, 0.0f);
            continue;
          }
          const float* src = xc + static_cast<long>(iy) * g.width;
          for (int ox = 0; ox < g.out_w; ++ox) {
            const int ix = ox * g.stride - g.padding + kj;
            dst[ox] = (ix >= 0 && ix < g.width) ? src[ix] : 0.0f;
          }
        }
      }
    }
  }
}

void col2im(const float* col, const ConvGeometry& g, float* x) {
  const int plane = g.out_h * g.out_w;
  for (int c = 0; c < g.channels; ++c) {
    float* xc = x + static_cast<long>(c) * g.height * g.width;
    for (int ki = 0; ki < g.kernel; ++ki) {
      for (int kj = 0; kj < g.kernel; ++kj) {
        const float* row = col + static_cast<long>((c * g.kernel + ki) * g.kernel + kj) * plane;
        for (int oy = 0; oy < g.out_h; ++oy) {
          const int iy = oy * g.stride - g.padding + ki;
          if (iy < 0 || iy >= g.height) continue;
          float* dst = xc + static_cast<long>(iy) * g.width;
          const float* src = row + oy * g.out_w;
          for (int ox = 0; ox < g.out_w; ++ox) {
            const int ix = ox * g.stride - g.padding + kj;
            if (ix >= 0 && ix < g.width) dst[ix] += src[ox];
          }
        }
      }
    }
  }
}

ConvGeometry conv_geometry(const Tensor& input, const Tensor& weight, int stride, int padding) {
  require_rank4(input, "conv2d input");
  require_rank4(weight, "conv2d weight");
  if (stride < 1) throw ContractError("conv2d: stride must be positive");
  if (padding < 0) throw ContractError("conv2d: padding must be non-negative");
  if (input.dim(1) != weight.dim(1) || weight.dim(2) != weight.dim(3)) {
    throw ContractError("conv2d: input " + shape_str(input.shape()) + " incompatible with weight " +
                        shape_str(weight.shape()));
  }
  ConvGeometry g{input.dim(1), input.dim(2), input.dim(3), weight.dim(2), stride, padding, 0, 0};
  if (input.dim(2) + 2 * padding < g.kernel || input.dim(3) + 2 * padding < g.kernel) {
    throw ContractError("conv2d: input " + shape_str(input.shape()) + " smaller than kernel of weight " +
                        shape_str(weight.shape()));
  }
  g.out_h = conv_out(g.height, g.kernel, stride, padding);
  g.out_w = conv_out(g.width, g.kernel, stride, padding);
  return g;
}

// Shared by conv2d backward-input and transposed conv forward:
// out[n] = col2im(W^T * in[n]) with W viewed as [A, B*k*k].
void conv_input_adjoint(const Tensor& in, const Tensor& weight, const ConvGeometry& g, Tensor& out) {
  const int batch = in.dim(0);
  const int a_ch = weight.dim(0);
  const int rows = g.channels * g.kernel * g.kernel;
  const int plane = g.out_h * g.out_w;
  std::vector<float> col(static_cast<std::size_t>(rows) * plane);
  for (int n = 0; n < batch; ++n) {
    const float* src = in.ptr() + static_cast<long>(n) * a_ch * plane;
    gemm_tn(rows, plane, a_ch, weight.ptr(), src, col.data(), false);
    col2im(col.data(), g, out.ptr() + static_cast<long>(n) * g.channels * g.height * g.width);
  }
}

// dW[A, B*k*k] += sum_n in[n] * im2col(out_grad[n])^T
void conv_weight_grad(const Tensor& x, const Tensor& dy, const ConvGeometry& g, Tensor& dw) {
  const int batch = x.dim(0);
  const int o_ch = dy.dim(1);
  const int rows = g.channels * g.kernel * g.kernel;
  const int plane = g.out_h * g.out_w;
  std::vector<float> col(static_cast<std::size_t>(rows) * plane);
  for (int n = 0; n < batch; ++n) {
    im2col(x.ptr() + static_cast<long>(n) * g.channels * g.height * g.width, g, col.data());
    gemm_nt(o_ch, rows, plane, dy.ptr() + static_cast<long>(n) * o_ch * plane, col.data(), dw.ptr(), true);
  }
}

}  // namespace

// ---------------------------------------------------------------------------

Tensor conv2d_forward(const Tensor& input, const Tensor& weight, int stride, int padding) {
  const ConvGeometry g = conv_geometry(input, weight, stride, padding);
  const int batch = input.dim(0);
  const int o_ch = weight.dim(0);
  const int rows = g.channels * g.kernel * g.kernel;
  const int plane = g.out_h * g.out_w;
  Tensor out({batch, o_ch, g.out_h, g.out_w});
  std::vector<float> col(static_cast<std::size_t>(rows) * plane);
  for (int n = 0; n < batch; ++n) {
    im2col(input.ptr() + static_cast<long>(n) * g.channels * g.height * g.width, g, col.data());
    gemm_nn(o_ch, plane, rows, weight.ptr(), col.data(), out.ptr() + static_cast<long>(n) * o_ch * plane,
            false);
  }
  return out;
}

Tensor transposed_conv2d(const Tensor& input, const Tensor& weight, int stride) {
  require_rank4(input, "transposed_conv2d input");
  require_rank4(weight, "transposed_conv2d weight");
  if (stride < 1) throw ContractError("transposed_conv2d: stride must be positive");
  if (input.dim(1) != weight.dim(0) || weight.dim(2) != weight.dim(3)) {
    throw ContractError("transposed_conv2d: input " + shape_str(input.shape()) +
                        " incompatible with weight " + shape_str(weight.shape()));
  }
  const int k = weight.dim(2);
  const int out_h = (input.dim(2) - 1) * stride + k;
  const int out_w = (input.dim(3) - 1) * stride + k;
  ConvGeometry g{weight.dim(1), out_h, out_w, k, stride, 0, input.dim(2), input.dim(3)};
  Tensor out({input.dim(0), weight.dim(1), out_h, out_w});
  conv_input_adjoint(input, weight, g, out);
  return out;
}

Var conv2d(const Var& x, const Var& weight, int stride, int padding) {
  return conv2d(x, weight, Var(), stride, padding);
}

Var conv2d(const Var& x, const Var& weight, const Var& bias, int stride, int padding) {
  Tensor out = conv2d_forward(x.value(), weight.value(), stride, padding);
  const int o_ch = out.dim(1);
  const int plane = out.dim(2) * out.dim(3);
  if (bias.defined()) {
    if (bias.value().numel() != static_cast<std::size_t>(o_ch)) {
      throw ContractError("conv2d: bias " + shape_str(bias.shape()) + " does not match " +
                          std::to_string(o_ch) + " output channels");
    }
    for (int n = 0; n < out.dim(0); ++n) {
      for (int o = 0; o < o_ch; ++o) {
        float* p = out.ptr() + (static_cast<long>(n) * o_ch + o) * plane;
        const float b = bias.value()[o];
        for (int i = 0; i < plane; ++i) p[i] += b;
      }
    }
  }
  std::vector<Var> parents{x, weight};
  if (bias.defined()) parents.push_back(bias);
  return make_op_result(std::move(out), "conv2d", parents, [stride, padding](Node& self) {
    Node& xn = *self.parents[0];
    Node& wn = *self.parents[1];
    const Tensor& dy = self.grad;
    const ConvGeometry g = conv_geometry(xn.value, wn.value, stride, padding);
    if (xn.requires_grad) conv_input_adjoint(dy, wn.value, g, xn.grad_buffer());
    if (wn.requires_grad) conv_weight_grad(xn.value, dy, g, wn.grad_buffer());
    if (self.parents.size() > 2 && self.parents[2]->requires_grad) {
      Tensor& db = self.parents[2]->grad_buffer();
      const int oc = dy.dim(1);
      const int pl = dy.dim(2) * dy.dim(3);
      for (int n = 0; n < dy.dim(0); ++n) {
        for (int o = 0; o < oc; ++o) {
          const float* p = dy.ptr() + (static_cast<long>(n) * oc + o) * pl;
          double s = 0;
          for (int i = 0; i < pl; ++i) s += p[i];
          db[o] += static_cast<float>(s);
        }
      }
    }
  });
}

Var conv_transpose2d(const Var& x, const Var& weight, int stride) {
  Tensor out = transposed_conv2d(x.value(), weight.value(), stride);
  return make_op_result(std::move(out), "conv_transpose2d", {x, weight}, [stride](Node& self) {
    Node& xn = *self.parents[0];
    Node& wn = *self.parents[1];
    const Tensor& dy = self.grad;
    if (xn.requires_grad) {
      Tensor dx = conv2d_forward(dy, wn.value, stride, 0);
      Tensor& gx = xn.grad_buffer();
      for (std::size_t i = 0; i < dx.numel(); ++i) gx[i] += dx[i];
    }
    if (wn.requires_grad) {
      // Geometry of the adjoint convolution that maps dy back onto x.
      ConvGeometry g{dy.dim(1), dy.dim(2), dy.dim(3), wn.value.dim(2), stride, 0, xn.value.dim(2),
                     xn.value.dim(3)};
      conv_weight_grad(dy, xn.value, g, wn.grad_buffer());
    }
  });
}

// ---------------------------------------------------------------------------

Var avg_pool2d(const Var& x, int k) {
  const Tensor& in = x.value();
  require_rank4(in, "avg_pool2d");
  if (k < 1 || in.dim(2) % k != 0 || in.dim(3) % k != 0) {
    throw DimensionError("avg_pool2d: " + shape_str(in.shape()) + " not divisible by " + std::to_string(k));
  }
  const int N = in.dim(0), C = in.dim(1), H = in.dim(2), W = in.dim(3);
  const int oh = H / k, ow = W / k;
  const float inv = 1.0f / static_cast<float>(k * k);
  Tensor out({N, C, oh, ow});
  for (int nc = 0; nc < N * C; ++nc) {
    const float* src = in.ptr() + static_cast<long>(nc) * H * W;
    float* dst = out.ptr() + static_cast<long>(nc) * oh * ow;
    for (int y = 0; y < oh; ++y) {
      for (int xx = 0; xx < ow; ++xx) {
        float s = 0;
        for (int i = 0; i < k; ++i) {
          for (int j = 0; j < k; ++j) s += src[(y * k + i) * W + xx * k + j];
        }
        dst[y * ow + xx] = s * inv;
      }
    }
  }
  return make_op_result(std::move(out), "avg_pool2d", {x}, [k, inv](Node& self) {
    Node& xn = *self.parents[0];
    Tensor& gx = xn.grad_buffer();
    const int H = xn.value.dim(2), W = xn.value.dim(3);
    const int oh = H / k, ow = W / k;
    const int NC = xn.value.dim(0) * xn.value.dim(1);
    for (int nc = 0; nc < NC; ++nc) {
      const float* g = self.grad.ptr() + static_cast<long>(nc) * oh * ow;
      float* dst = gx.ptr() + static_cast<long>(nc) * H * W;
      for (int y = 0; y < H; ++y) {
        for (int xx = 0; xx < W; ++xx) dst[y * W + xx] += g[(y / k) * ow + xx / k] * inv;
      }
    }
  });
}

Var max_pool2d(const Var& x, int k) {
  const Tensor& in = x.value();
  require_rank4(in, "max_pool2d");
  if (k < 1 || in.dim(2) % k != 0 || in.dim(3) % k != 0) {
    throw DimensionError("max_pool2d: " + shape_str(in.shape()) + " not divisible by " + std::to_string(k));
  }
  const int N = in.dim(0), C = in.dim(1), H = in.dim(2), W = in.dim(3);
  const int oh = H / k, ow = W / k;
  Tensor out({N, C, oh, ow});
  // Flat input index of each window's maximum (first on ties).
  std::vector<long> arg(out.numel());
  for (int nc = 0; nc < N * C; ++nc) {
    const long base = static_cast<long>(nc) * H * W;
    for (int y = 0; y < oh; ++y) {
      for (int xx = 0; xx < ow; ++xx) {
        long best = base + static_cast<long>(y * k) * W + xx * k;
        for (int i = 0; i < k; ++i) {
          for (int j = 0; j < k; ++j) {
            const long idx = base + static_cast<long>(y * k + i) * W + xx * k + j;
            if (in[idx] > in[best]) best = idx;
          }
        }
        const long o = (static_cast<long>(nc) * oh + y) * ow + xx;
        out[o] = in[best];
        arg[o] = best;
      }
    }
  }
  return make_op_result(std::move(out), "max_pool2d", {x}, [arg = std::move(arg)](Node& self) {
    Tensor& gx = self.parents[0]->grad_buffer();
    for (std::size_t o = 0; o < arg.size(); ++o) gx[arg[o]] += self.grad[o];
  });
}

Var global_avg_pool(const Var& x) {
  const Tensor& in = x.value();
  require_rank4(in, "global_avg_pool");
  const int N = in.dim(0), C = in.dim(1);
  const int plane = in.dim(2) * in.dim(3);
  Tensor out({N, C, 1, 1});
  for (int nc = 0; nc < N * C; ++nc) {
    const float* src = in.ptr() + static_cast<long>(nc) * plane;
    double s = 0;
    for (int i = 0; i < plane; ++i) s += src[i];
    out[nc] = static_cast<float>(s / plane);
  }
  return make_op_result(std::move(out), "global_avg_pool", {x}, [plane](Node& self) {
    Node& xn = *self.parents[0];
    Tensor& gx = xn.grad_buffer();
    const int NC = xn.value.dim(0) * xn.value.dim(1);
    const float inv = 1.0f / static_cast<float>(plane);
    for (int nc = 0; nc < NC; ++nc) {
      const float g = self.grad[nc] * inv;
      float* dst = gx.ptr() + static_cast<long>(nc) * plane;
      for (int i = 0; i < plane; ++i) dst[i] += g;
    }
  });
}

Var upsample_nearest2x(const Var& x) {
  const Tensor& in = x.value();
  require_rank4(in, "upsample_nearest2x");
  const int N = in.dim(0), C = in.dim(1), H = in.dim(2), W = in.dim(3);
  Tensor out({N, C, 2 * H, 2 * W});
  for (int nc = 0; nc < N * C; ++nc) {
    const float* src = in.ptr() + static_cast<long>(nc) * H * W;
    float* dst = out.ptr() + static_cast<long>(nc) * 4 * H * W;
    for (int y = 0; y < 2 * H; ++y) {
      for (int xx = 0; xx < 2 * W; ++xx) dst[y * 2 * W + xx] = src[(y / 2) * W + xx / 2];
    }
  }
  return make_op_result(std::move(out), "upsample_nearest2x", {x}, [](Node& self) {
    Node& xn = *self.parents[0];
    Tensor& gx = xn.grad_buffer();
    const int H = xn.value.dim(2), W = xn.value.dim(3);
    const int NC = xn.value.dim(0) * xn.value.dim(1);
    for (int nc = 0; nc < NC; ++nc) {
      const float* g = self.grad.ptr() + static_cast<long>(nc) * 4 * H * W;
      float* dst = gx.ptr() + static_cast<long>(nc) * H * W;
      for (int y = 0; y < 2 * H; ++y) {
        for (int xx = 0; xx < 2 * W; ++xx) dst[(y / 2) * W + xx / 2] += g[y * 2 * W + xx];
      }
    }
  });
}

namespace {

struct LerpTap {
  int i0, i1;
  float w0, w1;
};

std::vector<LerpTap> bilinear_taps(int in_size) {
  std::vector<LerpTap> taps(static_cast<std::size_t>(2 * in_size));
  for (int o = 0; o < 2 * in_size; ++o) {
    const float src = std::max((static_cast<float>(o) + 0.5f) * 0.5f - 0.5f, 0.0f);
    const int i0 = std::min(static_cast<int>(src), in_size - 1);
    const int i1 = std::min(i0 + 1, in_size - 1);
    const float f = src - static_cast<float>(i0);
    taps[o] = {i0, i1, 1.0f - f, f};
  }
  return taps;
}

}  // namespace

Var upsample_bilinear2x(const Var& x) {
  const Tensor& in = x.value();
  require_rank4(in, "upsample_bilinear2x");
  const int N = in.dim(0), C = in.dim(1), H = in.dim(2), W = in.dim(3);
  const auto ty = bilinear_taps(H);
  const auto tx = bilinear_taps(W);
  Tensor out({N, C, 2 * H, 2 * W});
  for (int nc = 0; nc < N * C; ++nc) {
    const float* src = in.ptr() + static_cast<long>(nc) * H * W;
    float* dst = out.ptr() + static_cast<long>(nc) * 4 * H * W;
    for (int y = 0; y < 2 * H; ++y) {
      const LerpTap& a = ty[y];
      const float* r0 = src + a.i0 * W;
      const float* r1 = src + a.i1 * W;
      for (int xx = 0; xx < 2 * W; ++xx) {
        const LerpTap& b = tx[xx];
        dst[y * 2 * W + xx] = a.w0 * (b.w0 * r0[b.i0] + b.w1 * r0[b.i1]) + a.w1 * (b.w0 * r1[b.i0] + b.w1 * r1[b.i1]);
      }
    }
  }
  return make_op_result(std::move(out), "upsample_bilinear2x", {x}, [ty, tx](Node& self) {
    Node& xn = *self.parents[0];
    Tensor& gx = xn.grad_buffer();
    const int H = xn.value.dim(2), W = xn.value.dim(3);
    const int NC = xn.value.dim(0) * xn.value.dim(1);
    for (int nc = 0; nc < NC; ++nc) {
      const float* g = self.grad.ptr() + static_cast<long>(nc) * 4 * H * W;
      float* dst = gx.ptr() + static_cast<long>(nc) * H * W;
      for (int y = 0; y < 2 * H; ++y) {
        const LerpTap& a = ty[y];
        for (int xx = 0; xx < 2 * W; ++xx) {
          const LerpTap& b = tx[xx];
          const float v = g[y * 2 * W + xx];
          dst[a.i0 * W + b.i0] += a.w0 * b.w0 * v;
          dst[a.i0 * W + b.i1] += a.w0 * b.w1 * v;
          dst[a.i1 * W + b.i0] += a.w1 * b.w0 * v;
          dst[a.i1 * W + b.i1] += a.w1 * b.w1 * v;
        }
      }
    }
  });
}

// ---------------------------------------------------------------------------

Var relu(const Var& x) {
  Tensor out = x.value();
  for (auto& v : out.data()) v = v > 0.0f ? v : 0.0f;
  return make_op_result(std::move(out), "relu", {x}, [](Node& self) {
    Node& xn = *self.parents[0];
    Tensor& gx = xn.grad_buffer();
    for (std::size_t i = 0; i < gx.numel(); ++i) {
      if (xn.value[i] > 0.0f) gx[i] += self.grad[i];
    }
  });
}

Var sigmoid(const Var& x) {
  Tensor out = x.value();
  for (auto& v : out.data()) v = 1.0f / (1.0f + std::exp(-v));
  return make_op_result(std::move(out), "sigmoid", {x}, [](Node& self) {
    Node& xn = *self.parents[0];
    Tensor& gx = xn.grad_buffer();
    for (std::size_t i = 0; i < gx.numel(); ++i) {
      const float y = self.value[i];
      gx[i] += self.grad[i] * y * (1.0f - y);
    }
  });
}

Var softmax_channels(const Var& x) {
  const Tensor& in = x.value();
  require_rank4(in, "softmax_channels");
  const int N = in.dim(0), C = in.dim(1);
  const int plane = in.dim(2) * in.dim(3);
  Tensor out(in.shape());
  for (int n = 0; n < N; ++n) {
    const float* src = in.ptr() + static_cast<long>(n) * C * plane;
    float* dst = out.ptr() + static_cast<long>(n) * C * plane;
    for (int p = 0; p < plane; ++p) {
      float mx = src[p];
      for (int c = 1; c < C; ++c) mx = std::max(mx, src[c * plane + p]);
      float s = 0;
      for (int c = 0; c < C; ++c) {
        const float e = std::exp(src[c * plane + p] - mx);
        dst[c * plane + p] = e;
        s += e;
      }
      const float inv = 1.0f / s;
      for (int c = 0; c < C; ++c) dst[c * plane + p] *= inv;
    }
  }
  return make_op_result(std::move(out), "softmax_channels", {x}, [N, C, plane](Node& self) {
    Node& xn = *self.parents[0];
    Tensor& gx = xn.grad_buffer();
    for (int n = 0; n < N; ++n) {
      const long base = static_cast<long>(n) * C * plane;
      const float* y = self.value.ptr() + base;
      const float* g = self.grad.ptr() + base;
      float* dst = gx.ptr() + base;
      for (int p = 0; p < plane; ++p) {
        float dot = 0;
        for (int c = 0; c < C; ++c) dot += y[c * plane + p] * g[c * plane + p];
        for (int c = 0; c < C; ++c) dst[c * plane + p] += y[c * plane + p] * (g[c * plane + p] - dot);
      }
    }
  });
}

Var concat_channels(const Var& a, const Var& b) {
  const Tensor& ta = a.value();
  const Tensor& tb = b.value();
  require_rank4(ta, "concat_channels");
  require_rank4(tb, "concat_channels");
  if (ta.dim(0) != tb.dim(0) || ta.dim(2) != tb.dim(2) || ta.dim(3) != tb.dim(3)) {
    throw ContractError("concat_channels: shape mismatch " + shape_str(ta.shape()) + " vs " +
                        shape_str(tb.shape()));
  }
  const int N = ta.dim(0), ca = ta.dim(1), cb = tb.dim(1);
  const long plane = static_cast<long>(ta.dim(2)) * ta.dim(3);
  Tensor out({N, ca + cb, ta.dim(2), ta.dim(3)});
  for (int n = 0; n < N; ++n) {
    std::copy_n(ta.ptr() + n * ca * plane, ca * plane, out.ptr() + n * (ca + cb) * plane);
    std::copy_n(tb.ptr() + n * cb * plane, cb * plane, out.ptr() + (n * (ca + cb) + ca) * plane);
  }
  return make_op_result(std::move(out), "concat_channels", {a, b}, [N, ca, cb, plane](Node& self) {
    Node& an = *self.parents[0];
    Node& bn = *self.parents[1];
    for (int n = 0; n < N; ++n) {
      const float* g = self.grad.ptr() + n * (ca + cb) * plane;
      if (an.requires_grad) {
        float* d = an.grad_buffer().ptr() + n * ca * plane;
        for (long i = 0; i < ca * plane; ++i) d[i] += g[i];
      }
      if (bn.requires_grad) {
        float* d = bn.grad_buffer().ptr() + n * cb * plane;
        for (long i = 0; i < cb * plane; ++i) d[i] += g[ca * plane + i];
      }
    }
  });
}

Var add(const Var& a, const Var& b) {
  require_same_shape(a.value(), b.value(), "add");
  Tensor out = a.value();
  for (std::size_t i = 0; i < out.numel(); ++i) out[i] += b.value()[i];
  return make_op_result(std::move(out), "add", {a, b}, [](Node& self) {
    for (auto& p : self.parents) {
      if (!p->requires_grad) continue;
      Tensor& g = p->grad_buffer();
      for (std::size_t i = 0; i < g.numel(); ++i) g[i] += self.grad[i];
    }
  });
}

Var sub(const Var& a, const Var& b) {
  require_same_shape(a.value(), b.value(), "sub");
  Tensor out = a.value();
  for (std::size_t i = 0; i < out.numel(); ++i) out[i] -= b.value()[i];
  return make_op_result(std::move(out), "sub", {a, b}, [](Node& self) {
    if (self.parents[0]->requires_grad) {
      Tensor& g = self.parents[0]->grad_buffer();
      for (std::size_t i = 0; i < g.numel(); ++i) g[i] += self.grad[i];
    }
    if (self.parents[1]->requires_grad) {
      Tensor& g = self.parents[1]->grad_buffer();
      for (std::size_t i = 0; i < g.numel(); ++i) g[i] -= self.grad[i];
    }
  });
}

Var mul(const Var& a, const Var& b) {
  require_same_shape(a.value(), b.value(), "mul");
  Tensor out = a.value();
  for (std::size_t i = 0; i < out.numel(); ++i) out[i] *= b.value()[i];
  return make_op_result(std::move(out), "mul", {a, b}, [](Node& self) {
    Node& an = *self.parents[0];
    Node& bn = *self.parents[1];
    if (an.requires_grad) {
      Tensor& g = an.grad_buffer();
      for (std::size_t i = 0; i < g.numel(); ++i) g[i] += self.grad[i] * bn.value[i];
    }
    if (bn.requires_grad) {
      Tensor& g = bn.grad_buffer();
      for (std::size_t i = 0; i < g.numel(); ++i) g[i] += self.grad[i] * an.value[i];
    }
  });
}

Var scale(const Var& a, float s) {
  Tensor out = a.value();
  for (auto& v : out.data()) v *= s;
  return make_op_result(std::move(out), "scale", {a}, [s](Node& self) {
    Tensor& g = self.parents[0]->grad_buffer();
    for (std::size_t i = 0; i < g.numel(); ++i) g[i] += s * self.grad[i];
  });
}

Var sum(const Var& a) {
  double s = 0;
  for (float v : a.value().data()) s += v;
  Tensor out({1}, static_cast<float>(s));
  return make_op_result(std::move(out), "sum", {a}, [](Node& self) {
    Tensor& g = self.parents[0]->grad_buffer();
    const float v = self.grad[0];
    for (std::size_t i = 0; i < g.numel(); ++i) g[i] += v;
  });
}

// ---------------------------------------------------------------------------

Var pixelwise_filter(const Var& image, const Var& kernels, int kernel_size, bool clamp_output) {
  const Tensor& x = image.value();
  const Tensor& k = kernels.value();
  require_rank4(x, "pixelwise_filter image");
  require_rank4(k, "pixelwise_filter kernels");
  const int K = kernel_size;
  if (K < 1 || K % 2 == 0) throw ContractError("pixelwise_filter: kernel size must be odd");
  if (k.dim(0) != x.dim(0) || k.dim(1) != K * K || k.dim(2) != x.dim(2) || k.dim(3) != x.dim(3)) {
    throw ContractError("pixelwise_filter: image " + shape_str(x.shape()) + " incompatible with kernels " +
                        shape_str(k.shape()));
  }
  const int N = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
  const int r = K / 2;
  const long plane = static_cast<long>(H) * W;

  // Clamped source row/column for every tap offset.
  auto clamp_idx = [](int v, int hi) { return v < 0 ? 0 : (v >= hi ? hi - 1 : v); };
  Tensor out(x.shape());
  for (int n = 0; n < N; ++n) {
    for (int c = 0; c < C; ++c) {
      const float* src = x.ptr() + (static_cast<long>(n) * C + c) * plane;
      float* dst = out.ptr() + (static_cast<long>(n) * C + c) * plane;
      for (int t = 0; t < K * K; ++t) {
        const int dy = t / K - r;
        const int dx = t % K - r;
        const float* kt = k.ptr() + (static_cast<long>(n) * K * K + t) * plane;
        for (int y = 0; y < H; ++y) {
          const float* row = src + static_cast<long>(clamp_idx(y + dy, H)) * W;
          const float* kw = kt + static_cast<long>(y) * W;
          float* o = dst + static_cast<long>(y) * W;
          for (int xx = 0; xx < W; ++xx) o[xx] += kw[xx] * row[clamp_idx(xx + dx, W)];
        }
      }
    }
  }
  Tensor mask;
  if (clamp_output) {
    mask = Tensor(out.shape(), 1.0f);
    for (std::size_t i = 0; i < out.numel(); ++i) {
      if (out[i] < 0.0f) {
        out[i] = 0.0f;
        mask[i] = 0.0f;
      } else if (out[i] > 1.0f) {
        out[i] = 1.0f;
        mask[i] = 0.0f;
      }
    }
  }
  return make_op_result(
      std::move(out), "pixelwise_filter", {image, kernels},
      [N, C, H, W, K, r, plane, clamp_idx, mask = std::move(mask)](Node& self) {
        Node& xn = *self.parents[0];
        Node& kn = *self.parents[1];
        Tensor dy_masked;
        const Tensor* dy = &self.grad;
        if (!mask.empty()) {
          dy_masked = self.grad;
          for (std::size_t i = 0; i < dy_masked.numel(); ++i) dy_masked[i] *= mask[i];
          dy = &dy_masked;
        }
        for (int n = 0; n < N; ++n) {
          for (int c = 0; c < C; ++c) {
            const long off = (static_cast<long>(n) * C + c) * plane;
            const float* src = xn.value.ptr() + off;
            const float* g = dy->ptr() + off;
            for (int t = 0; t < K * K; ++t) {
              const int ddy = t / K - r;
              const int ddx = t % K - r;
              const long koff = (static_cast<long>(n) * K * K + t) * plane;
              for (int y = 0; y < H; ++y) {
                const int sy = clamp_idx(y + ddy, H);
                const float* row = src + static_cast<long>(sy) * W;
                const float* grow = g + static_cast<long>(y) * W;
                if (kn.requires_grad) {
                  float* dk = kn.grad_buffer().ptr() + koff + static_cast<long>(y) * W;
                  for (int xx = 0; xx < W; ++xx) dk[xx] += grow[xx] * row[clamp_idx(xx + ddx, W)];
                }
                if (xn.requires_grad) {
                  const float* kw = kn.value.ptr() + koff + static_cast<long>(y) * W;
                  float* dx = xn.grad_buffer().ptr() + off + static_cast<long>(sy) * W;
                  for (int xx = 0; xx < W; ++xx) dx[clamp_idx(xx + ddx, W)] += kw[xx] * grow[xx];
                }
              }
            }
          }
        }
      });
}

// ---------------------------------------------------------------------------

Var l1_loss(const Var& prediction, const Var& target) {
  require_same_shape(prediction.value(), target.value(), "l1_loss");
  const Tensor& a = prediction.value();
  const Tensor& b = target.value();
  double s = 0;
  for (std::size_t i = 0; i < a.numel(); ++i) s += std::fabs(static_cast<double>(a[i]) - b[i]);
  const std::size_t count = a.numel();
  Tensor out({1}, static_cast<float>(s / static_cast<double>(count)));
  return make_op_result(std::move(out), "l1_loss", {prediction, target}, [count](Node& self) {
    Node& an = *self.parents[0];
    Node& bn = *self.parents[1];
    const float g = self.grad[0] / static_cast<float>(count);
    for (std::size_t i = 0; i < count; ++i) {
      const float d = an.value[i] - bn.value[i];
      const float sgn = d > 0.0f ? g : (d < 0.0f ? -g : 0.0f);
      if (an.requires_grad) an.grad_buffer()[i] += sgn;
      if (bn.requires_grad) bn.grad_buffer()[i] -= sgn;
    }
  });
}

Var cross_entropy(const Var& logits, std::span<const int> labels) {
  const Tensor& z = logits.value();
  if (z.rank() != 2 && !(z.rank() == 4 && z.dim(2) == 1 && z.dim(3) == 1)) {
    throw ContractError("cross_entropy: expected [N,C] or [N,C,1,1] logits, got " + shape_str(z.shape()));
  }
  const int N = z.dim(0), C = z.dim(1);
  if (labels.size() != static_cast<std::size_t>(N)) {
    throw ContractError("cross_entropy: " + std::to_string(labels.size()) + " labels for batch of " +
                        std::to_string(N));
  }
  Tensor probs({N, C});
  double loss = 0;
  for (int n = 0; n < N; ++n) {
    if (labels[n] < 0 || labels[n] >= C) throw ContractError("cross_entropy: label out of range");
    const float* zn = z.ptr() + static_cast<long>(n) * C;
    float mx = zn[0];
    for (int c = 1; c < C; ++c) mx = std::max(mx, zn[c]);
    double s = 0;
    for (int c = 0; c < C; ++c) s += std::exp(static_cast<double>(zn[c] - mx));
    for (int c = 0; c < C; ++c) probs[n * C + c] = static_cast<float>(std::exp(static_cast<double>(zn[c] - mx)) / s);
    loss += std::log(s) - static_cast<double>(zn[labels[n]] - mx);
  }
  std::vector<int> lab(labels.begin(), labels.end());
  Tensor out({1}, static_cast<float>(loss / N));
  return make_op_result(std::move(out), "cross_entropy", {logits},
                        [N, C, lab = std::move(lab), probs = std::move(probs)](Node& self) {
                          Tensor& g = self.parents[0]->grad_buffer();
                          const float s = self.grad[0] / static_cast<float>(N);
                          for (int n = 0; n < N; ++n) {
                            for (int c = 0; c < C; ++c) {
                              const float target = (c == lab[n]) ? 1.0f : 0.0f;
                              g[n * C + c] += s * (probs[n * C + c] - target);
                            }
                          }
                        });
}

}  // namespace deepnotch::nn
