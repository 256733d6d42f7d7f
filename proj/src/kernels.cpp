// Copyright 2026 The ConvForm Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "convform/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <numbers>

#include "convform/error.hpp"

namespace convform {

namespace {

thread_local KernelCounters* g_counters = nullptr;

void count_conv(std::uint64_t macs) {
  if (g_counters) g_counters->conv_macs += macs;
}

void count_matmul(std::uint64_t macs) {
  if (g_counters) g_counters->matmul_macs += macs;
}

void require_f32(const Tensor& t, const char* what) {
  if (t.dtype() != DType::F32) {
    throw DimError(std::string(what) + " must be f32, got " +
                   dtype_name(t.dtype()));
  }
}

}  // namespace

CounterScope::CounterScope(KernelCounters* counters) : prev_(g_counters) {
  g_counters = counters;
}

CounterScope::~CounterScope() { g_counters = prev_; }

KernelCounters* active_counters() { return g_counters; }

Tensor conv2d(const Tensor& x, const Tensor& w, const Tensor* bias,
              std::int64_t stride) {
  require_f32(x, "conv2d input");
  require_f32(w, "conv2d weight");
  if (x.rank() != 4) {
    throw DimError("conv2d input must be rank 4, got " + shape_str(x.shape()));
  }
  if (w.rank() != 4) {
    throw DimError("conv2d weight must be rank 4, got " +
                   shape_str(w.shape()));
  }
  const std::int64_t B = x.dim(0), Cin = x.dim(1), H = x.dim(2), W = x.dim(3);
  const std::int64_t Cout = w.dim(0), Kh = w.dim(2), Kw = w.dim(3);
  if (w.dim(1) != Cin) {
    throw DimError("conv2d weight expects " + std::to_string(w.dim(1)) +
                   " input channels, input has " + std::to_string(Cin));
  }
  if (stride < 1) throw GeometryError("conv2d stride must be >= 1");
  if (Kh > H || Kw > W) {
    throw GeometryError("conv2d kernel " + shape_str({Kh, Kw}) +
                        " larger than input " + shape_str({H, W}));
  }
  if ((H - Kh) % stride != 0 || (W - Kw) % stride != 0) {
    throw GeometryError("conv2d stride " + std::to_string(stride) +
                        " does not tile input " + shape_str({H, W}) +
                        " with kernel " + shape_str({Kh, Kw}));
  }
  if (bias) {
    require_f32(*bias, "conv2d bias");
    if (bias->rank() != 1 || bias->dim(0) != Cout) {
      throw DimError("conv2d bias must be (" + std::to_string(Cout) +
                     "), got " + shape_str(bias->shape()));
    }
  }
  const std::int64_t Ho = (H - Kh) / stride + 1;
  const std::int64_t Wo = (W - Kw) / stride + 1;

  const float* xp = x.f32().data();
  const float* wp = w.f32().data();
  const float* bp = bias ? bias->f32().data() : nullptr;
  std::vector<float> out(static_cast<std::size_t>(B * Cout * Ho * Wo), 0.0f);

  if (Kh == 1 && Kw == 1 && stride == 1) {
    const std::int64_t P = H * W;
    for (std::int64_t b = 0; b < B; ++b) {
      const float* xb = xp + b * Cin * P;
      for (std::int64_t co = 0; co < Cout; ++co) {
        float* orow = out.data() + (b * Cout + co) * P;
        const float* wrow = wp + co * Cin;
        for (std::int64_t ci = 0; ci < Cin; ++ci) {
          const float wv = wrow[ci];
          const float* xrow = xb + ci * P;
          for (std::int64_t p = 0; p < P; ++p) orow[p] += wv * xrow[p];
        }
        if (bp) {
          const float bv = bp[co];
          for (std::int64_t p = 0; p < P; ++p) orow[p] += bv;
        }
      }
    }
  } else {
    for (std::int64_t b = 0; b < B; ++b) {
      for (std::int64_t co = 0; co < Cout; ++co) {
        for (std::int64_t oh = 0; oh < Ho; ++oh) {
          for (std::int64_t ow = 0; ow < Wo; ++ow) {
            float acc = 0.0f;
            for (std::int64_t ci = 0; ci < Cin; ++ci) {
              const float* xplane = xp + ((b * Cin + ci) * H) * W;
              const float* wplane = wp + ((co * Cin + ci) * Kh) * Kw;
              for (std::int64_t kh = 0; kh < Kh; ++kh) {
                const std::int64_t ih = oh * stride + kh;
                for (std::int64_t kw = 0; kw < Kw; ++kw) {
                  acc += xplane[ih * W + ow * stride + kw] *
                         wplane[kh * Kw + kw];
                }
              }
            }
            if (bp) acc += bp[co];
            out[static_cast<std::size_t>(((b * Cout + co) * Ho + oh) * Wo +
                                         ow)] = acc;
          }
        }
      }
    }
  }
  count_conv(static_cast<std::uint64_t>(B * Cout * Ho * Wo * Cin * Kh * Kw));
  return Tensor::from_f32({B, Cout, Ho, Wo}, std::move(out));
}

Tensor matmul_batched(const Tensor& a, const Tensor& b) {
  require_f32(a, "matmul lhs");
  require_f32(b, "matmul rhs");
  if (a.rank() < 2 || b.rank() != a.rank()) {
    throw DimError("matmul operands must share rank >= 2, got " +
                   shape_str(a.shape()) + " and " + shape_str(b.shape()));
  }
  const std::int64_t r = a.rank();
  std::int64_t batch = 1;
  Shape out_shape;
  for (std::int64_t i = 0; i < r - 2; ++i) {
    if (a.dim(i) != b.dim(i)) {
      throw DimError("matmul batch dims differ: " + shape_str(a.shape()) +
                     " vs " + shape_str(b.shape()));
    }
    batch *= a.dim(i);
    out_shape.push_back(a.dim(i));
  }
  const std::int64_t M = a.dim(r - 2), K = a.dim(r - 1);
  const std::int64_t K2 = b.dim(r - 2), N = b.dim(r - 1);
  if (K != K2) {
    throw DimError("matmul inner dims differ: " + shape_str(a.shape()) +
                   " vs " + shape_str(b.shape()));
  }
  out_shape.push_back(M);
  out_shape.push_back(N);

  const float* ap = a.f32().data();
  const float* bp = b.f32().data();
  std::vector<float> out(static_cast<std::size_t>(batch * M * N), 0.0f);
  for (std::int64_t t = 0; t < batch; ++t) {
    const float* A = ap + t * M * K;
    const float* Bm = bp + t * K * N;
    float* C = out.data() + t * M * N;
    for (std::int64_t m = 0; m < M; ++m) {
      float* crow = C + m * N;
      for (std::int64_t k = 0; k < K; ++k) {
        const float av = A[m * K + k];
        const float* brow = Bm + k * N;
        for (std::int64_t n = 0; n < N; ++n) crow[n] += av * brow[n];
      }
    }
  }
  count_matmul(static_cast<std::uint64_t>(batch * M * N * K));
  return Tensor::from_f32(std::move(out_shape), std::move(out));
}

Tensor linear_lastdim(const Tensor& x, const Tensor& w, const Tensor* bias) {
  require_f32(x, "linear input");
  require_f32(w, "linear weight");
  if (w.rank() != 2) {
    throw DimError("linear weight must be (O, I), got " +
                   shape_str(w.shape()));
  }
  const std::int64_t O = w.dim(0), I = w.dim(1);
  if (x.rank() < 1 || x.dim(x.rank() - 1) != I) {
    throw DimError("linear input " + shape_str(x.shape()) +
                   " does not end in " + std::to_string(I));
  }
  if (bias) {
    require_f32(*bias, "linear bias");
    if (bias->rank() != 1 || bias->dim(0) != O) {
      throw DimError("linear bias must be (" + std::to_string(O) + "), got " +
                     shape_str(bias->shape()));
    }
  }
  const std::int64_t rows = x.numel() / I;
  Shape out_shape = x.shape();
  out_shape.back() = O;

  const float* xp = x.f32().data();
  const float* wp = w.f32().data();
  const float* bp = bias ? bias->f32().data() : nullptr;
  std::vector<float> out(static_cast<std::size_t>(rows * O), 0.0f);
  for (std::int64_t rix = 0; rix < rows; ++rix) {
    const float* xrow = xp + rix * I;
    float* orow = out.data() + rix * O;
    for (std::int64_t o = 0; o < O; ++o) {
      const float* wrow = wp + o * I;
      float acc = 0.0f;
      for (std::int64_t i = 0; i < I; ++i) acc += wrow[i] * xrow[i];
      if (bp) acc += bp[o];
      orow[o] = acc;
    }
  }
  count_matmul(static_cast<std::uint64_t>(rows * O * I));
  return Tensor::from_f32(std::move(out_shape), std::move(out));
}

Tensor softmax_lastdim(const Tensor& x) {
  require_f32(x, "softmax input");
  if (x.rank() < 1) throw DimError("softmax input must have rank >= 1");
  const std::int64_t N = x.dim(x.rank() - 1);
  const std::int64_t rows = x.numel() / N;
  const float* xp = x.f32().data();
  std::vector<float> out(static_cast<std::size_t>(x.numel()));
  for (std::int64_t rix = 0; rix < rows; ++rix) {
    const float* row = xp + rix * N;
    float* orow = out.data() + rix * N;
    float mx = row[0];
    for (std::int64_t i = 0; i < N; ++i) {
      if (!std::isfinite(row[i])) {
        throw NumericError("softmax input contains a non-finite value");
      }
      mx = std::max(mx, row[i]);
    }
    float sum = 0.0f;
    for (std::int64_t i = 0; i < N; ++i) {
      const float e = std::exp(row[i] - mx);
      orow[i] = e;
      sum += e;
    }
    for (std::int64_t i = 0; i < N; ++i) orow[i] /= sum;
  }
  return Tensor::from_f32(x.shape(), std::move(out));
}

Tensor gelu(const Tensor& x) {
  require_f32(x, "gelu input");
  const float* xp = x.f32().data();
  std::vector<float> out(static_cast<std::size_t>(x.numel()));
  for (std::int64_t i = 0; i < x.numel(); ++i) {
    const double v = static_cast<double>(xp[i]);
    out[static_cast<std::size_t>(i)] = static_cast<float>(
        0.5 * v * (1.0 + std::erf(v / std::numbers::sqrt2)));
  }
  return Tensor::from_f32(x.shape(), std::move(out));
}

Tensor layernorm_lastdim(const Tensor& x, const Tensor& gamma,
                         const Tensor& beta, float eps) {
  require_f32(x, "layernorm input");
  require_f32(gamma, "layernorm gamma");
  require_f32(beta, "layernorm beta");
  if (x.rank() < 1) throw DimError("layernorm input must have rank >= 1");
  const std::int64_t H = x.dim(x.rank() - 1);
  if (gamma.numel() != H || beta.numel() != H) {
    throw DimError("layernorm gamma/beta must have " + std::to_string(H) +
                   " elements");
  }
  const std::int64_t rows = x.numel() / H;
  const float* xp = x.f32().data();
  const float* gp = gamma.f32().data();
  const float* bp = beta.f32().data();
  std::vector<float> out(static_cast<std::size_t>(x.numel()));
  for (std::int64_t rix = 0; rix < rows; ++rix) {
    const float* row = xp + rix * H;
    float* orow = out.data() + rix * H;
    float sum = 0.0f;
    for (std::int64_t i = 0; i < H; ++i) sum += row[i];
    const float mean = sum / static_cast<float>(H);
    float var = 0.0f;
    for (std::int64_t i = 0; i < H; ++i) {
      const float d = row[i] - mean;
      var += d * d;
    }
    var /= static_cast<float>(H);
    const float inv = 1.0f / std::sqrt(var + eps);
    for (std::int64_t i = 0; i < H; ++i) {
      orow[i] = ((row[i] - mean) * inv) * gp[i] + bp[i];
    }
  }
  return Tensor::from_f32(x.shape(), std::move(out));
}

Tensor permute(const Tensor& x, const std::vector<std::int64_t>& perm) {
  if (x.empty()) throw DimError("permute of empty tensor");
  const std::int64_t r = x.rank();
  if (static_cast<std::int64_t>(perm.size()) != r) {
    throw DimError("permute order has " + std::to_string(perm.size()) +
                   " axes for rank " + std::to_string(r));
  }
  std::vector<bool> seen(static_cast<std::size_t>(r), false);
  for (std::int64_t p : perm) {
    if (p < 0 || p >= r || seen[static_cast<std::size_t>(p)]) {
      throw DimError("permute order is not a permutation of axes");
    }
    seen[static_cast<std::size_t>(p)] = true;
  }
  Shape out_shape(static_cast<std::size_t>(r));
  for (std::int64_t i = 0; i < r; ++i) {
    out_shape[static_cast<std::size_t>(i)] =
        x.dim(perm[static_cast<std::size_t>(i)]);
  }

  std::vector<std::int64_t> in_strides(static_cast<std::size_t>(r), 1);
  for (std::int64_t i = r - 2; i >= 0; --i) {
    in_strides[static_cast<std::size_t>(i)] =
        in_strides[static_cast<std::size_t>(i + 1)] * x.dim(i + 1);
  }
  // Stride of each output axis within the input buffer.
  std::vector<std::int64_t> src_strides(static_cast<std::size_t>(r));
  for (std::int64_t i = 0; i < r; ++i) {
    src_strides[static_cast<std::size_t>(i)] =
        in_strides[static_cast<std::size_t>(perm[static_cast<std::size_t>(i)])];
  }

  const std::size_t esz = dtype_size(x.dtype());
  const std::byte* src = x.bytes().data();
  std::vector<std::byte> out(static_cast<std::size_t>(x.numel()) * esz);
  std::vector<std::int64_t> idx(static_cast<std::size_t>(r), 0);
  std::int64_t src_off = 0;
  for (std::int64_t flat = 0; flat < x.numel(); ++flat) {
    std::memcpy(out.data() + static_cast<std::size_t>(flat) * esz,
                src + static_cast<std::size_t>(src_off) * esz, esz);
    for (std::int64_t ax = r - 1; ax >= 0; --ax) {
      const auto a = static_cast<std::size_t>(ax);
      src_off += src_strides[a];
      if (++idx[a] < out_shape[a]) break;
      src_off -= src_strides[a] * out_shape[a];
      idx[a] = 0;
    }
  }
  return Tensor::from_bytes(x.dtype(), std::move(out_shape), std::move(out));
}

Tensor reshape(const Tensor& x, const Shape& new_shape) {
  return x.reshaped(new_shape);
}

namespace {

// Elementwise shapes must match exactly, or both be rank 4 with every
// mismatched dim equal to 1 on one side (which then repeats along it).
Shape binary_out_shape(const Tensor& a, const Tensor& b) {
  if (a.shape() == b.shape()) return a.shape();
  if (a.rank() == 4 && b.rank() == 4) {
    Shape out(4);
    bool ok = true;
    for (int i = 0; i < 4; ++i) {
      if (a.dim(i) == b.dim(i) || a.dim(i) == 1 || b.dim(i) == 1) {
        out[static_cast<std::size_t>(i)] = std::max(a.dim(i), b.dim(i));
      } else {
        ok = false;
      }
    }
    if (ok) return out;
  }
  throw DimError("elementwise shapes do not match: " + shape_str(a.shape()) +
                 " vs " + shape_str(b.shape()));
}

template <typename F>
Tensor binary_op(const Tensor& a, const Tensor& b, F f) {
  require_f32(a, "elementwise lhs");
  require_f32(b, "elementwise rhs");
  const Shape out_shape = binary_out_shape(a, b);
  const float* ap = a.f32().data();
  const float* bp = b.f32().data();
  std::vector<float> out(static_cast<std::size_t>(shape_numel(out_shape)));
  if (a.shape() == b.shape()) {
    for (std::size_t i = 0; i < out.size(); ++i) {
      out[i] = f(ap[i], bp[i]);
    }
    return Tensor::from_f32(out_shape, std::move(out));
  }
  // rank-4 broadcast: stride 0 along dims of extent 1
  std::int64_t as[4], bs[4];
  std::int64_t arun = 1, brun = 1;
  for (int i = 3; i >= 0; --i) {
    as[i] = (a.dim(i) == 1) ? 0 : arun;
    bs[i] = (b.dim(i) == 1) ? 0 : brun;
    arun *= a.dim(i);
    brun *= b.dim(i);
  }
  std::size_t o = 0;
  for (std::int64_t i0 = 0; i0 < out_shape[0]; ++i0) {
    for (std::int64_t i1 = 0; i1 < out_shape[1]; ++i1) {
      for (std::int64_t i2 = 0; i2 < out_shape[2]; ++i2) {
        const float* arow = ap + i0 * as[0] + i1 * as[1] + i2 * as[2];
        const float* brow = bp + i0 * bs[0] + i1 * bs[1] + i2 * bs[2];
        for (std::int64_t i3 = 0; i3 < out_shape[3]; ++i3) {
          out[o++] = f(arow[i3 * as[3]], brow[i3 * bs[3]]);
        }
      }
    }
  }
  return Tensor::from_f32(out_shape, std::move(out));
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
  return binary_op(a, b, [](float x, float y) { return x + y; });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  return binary_op(a, b, [](float x, float y) { return x - y; });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  return binary_op(a, b, [](float x, float y) { return x * y; });
}

Tensor mul_scalar(const Tensor& x, float s) {
  require_f32(x, "mul_scalar input");
  const float* xp = x.f32().data();
  std::vector<float> out(static_cast<std::size_t>(x.numel()));
  for (std::int64_t i = 0; i < x.numel(); ++i) {
    out[static_cast<std::size_t>(i)] = xp[i] * s;
  }
  return Tensor::from_f32(x.shape(), std::move(out));
}

Tensor square(const Tensor& x) {
  require_f32(x, "square input");
  const float* xp = x.f32().data();
  std::vector<float> out(static_cast<std::size_t>(x.numel()));
  for (std::int64_t i = 0; i < x.numel(); ++i) {
    out[static_cast<std::size_t>(i)] = xp[i] * xp[i];
  }
  return Tensor::from_f32(x.shape(), std::move(out));
}

Tensor rsqrt_eps(const Tensor& v, float eps) {
  require_f32(v, "rsqrt_eps input");
  const float* vp = v.f32().data();
  std::vector<float> out(static_cast<std::size_t>(v.numel()));
  for (std::int64_t i = 0; i < v.numel(); ++i) {
    if (vp[i] < 0.0f) {
      throw NumericError("rsqrt_eps input is negative: " +
                         std::to_string(vp[i]));
    }
    out[static_cast<std::size_t>(i)] = 1.0f / std::sqrt(vp[i] + eps);
  }
  return Tensor::from_f32(v.shape(), std::move(out));
}

}  // namespace convform
