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
//
// Naive reference implementations used only by tests. They are written
// independently of src/: plain index arithmetic, double accumulation, no
// shared helpers, so agreement with the library is meaningful evidence.

#ifndef CONVFORM_TESTS_ORACLES_HPP_
#define CONVFORM_TESTS_ORACLES_HPP_

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <vector>

namespace oracles {

// x: (B, Cin, H, W) flat, w: (Cout, Cin, Kh, Kw) flat, bias: Cout or empty.
inline std::vector<double> conv2d(const std::vector<double>& x,
                                  const std::vector<double>& w,
                                  const std::vector<double>& bias,
                                  std::int64_t B, std::int64_t Cin,
                                  std::int64_t H, std::int64_t W,
                                  std::int64_t Cout, std::int64_t Kh,
                                  std::int64_t Kw, std::int64_t stride) {
  const std::int64_t Ho = (H - Kh) / stride + 1;
  const std::int64_t Wo = (W - Kw) / stride + 1;
  std::vector<double> y(static_cast<std::size_t>(B * Cout * Ho * Wo), 0.0);
  for (std::int64_t b = 0; b < B; ++b)
    for (std::int64_t co = 0; co < Cout; ++co)
      for (std::int64_t oh = 0; oh < Ho; ++oh)
        for (std::int64_t ow = 0; ow < Wo; ++ow) {
          double acc = bias.empty() ? 0.0 : bias[static_cast<std::size_t>(co)];
          for (std::int64_t ci = 0; ci < Cin; ++ci)
            for (std::int64_t kh = 0; kh < Kh; ++kh)
              for (std::int64_t kw = 0; kw < Kw; ++kw) {
                const std::int64_t ih = oh * stride + kh;
                const std::int64_t iw = ow * stride + kw;
                acc += x[static_cast<std::size_t>(
                           ((b * Cin + ci) * H + ih) * W + iw)] *
                       w[static_cast<std::size_t>(
                           ((co * Cin + ci) * Kh + kh) * Kw + kw)];
              }
          y[static_cast<std::size_t>(((b * Cout + co) * Ho + oh) * Wo + ow)] =
              acc;
        }
  return y;
}

// a: (batch, M, K), b: (batch, K, N).
inline std::vector<double> matmul(const std::vector<double>& a,
                                  const std::vector<double>& b,
                                  std::int64_t batch, std::int64_t M,
                                  std::int64_t K, std::int64_t N) {
  std::vector<double> c(static_cast<std::size_t>(batch * M * N), 0.0);
  for (std::int64_t t = 0; t < batch; ++t)
    for (std::int64_t m = 0; m < M; ++m)
      for (std::int64_t n = 0; n < N; ++n) {
        double acc = 0.0;
        for (std::int64_t k = 0; k < K; ++k) {
          acc += a[static_cast<std::size_t>((t * M + m) * K + k)] *
                 b[static_cast<std::size_t>((t * K + k) * N + n)];
        }
        c[static_cast<std::size_t>((t * M + m) * N + n)] = acc;
      }
  return c;
}

// Row-wise softmax over the last axis of a (rows, N) buffer.
inline std::vector<double> softmax(const std::vector<double>& x,
                                   std::int64_t rows, std::int64_t N) {
  std::vector<double> y(x.size());
  for (std::int64_t r = 0; r < rows; ++r) {
    double mx = x[static_cast<std::size_t>(r * N)];
    for (std::int64_t i = 1; i < N; ++i)
      mx = std::max(mx, x[static_cast<std::size_t>(r * N + i)]);
    double sum = 0.0;
    for (std::int64_t i = 0; i < N; ++i) {
      const double e = std::exp(x[static_cast<std::size_t>(r * N + i)] - mx);
      y[static_cast<std::size_t>(r * N + i)] = e;
      sum += e;
    }
    for (std::int64_t i = 0; i < N; ++i)
      y[static_cast<std::size_t>(r * N + i)] /= sum;
  }
  return y;
}

inline double gelu(double v) {
  return 0.5 * v * (1.0 + std::erf(v / std::sqrt(2.0)));
}

// Normalizes rows of a (rows, H) buffer with biased variance.
inline std::vector<double> layernorm(const std::vector<double>& x,
                                     const std::vector<double>& gamma,
                                     const std::vector<double>& beta,
                                     std::int64_t rows, std::int64_t H,
                                     double eps) {
  std::vector<double> y(x.size());
  for (std::int64_t r = 0; r < rows; ++r) {
    double mean = 0.0;
    for (std::int64_t i = 0; i < H; ++i)
      mean += x[static_cast<std::size_t>(r * H + i)];
    mean /= static_cast<double>(H);
    double var = 0.0;
    for (std::int64_t i = 0; i < H; ++i) {
      const double d = x[static_cast<std::size_t>(r * H + i)] - mean;
      var += d * d;
    }
    var /= static_cast<double>(H);
    const double inv = 1.0 / std::sqrt(var + eps);
    for (std::int64_t i = 0; i < H; ++i) {
      y[static_cast<std::size_t>(r * H + i)] =
          (x[static_cast<std::size_t>(r * H + i)] - mean) * inv *
              gamma[static_cast<std::size_t>(i)] +
          beta[static_cast<std::size_t>(i)];
    }
  }
  return y;
}

// Symmetric int8 quantization with round half away from zero, range
// [-127, 127].
inline std::int8_t quantize_value(double x, double scale) {
  const double r = x / scale;
  double q = std::floor(std::abs(r) + 0.5);
  if (r < 0) q = -q;
  q = std::clamp(q, -127.0, 127.0);
  return static_cast<std::int8_t>(q);
}

// Quantized 1x1 conv: int32 accumulation over channels, bias added in i32,
// double requantization multiplier, round half away from zero, clamp.
// xq: (B, Cin, P) flat i8, wq: (Cout, Cin) flat i8, bias: Cout i32.
inline std::vector<std::int8_t> conv1x1_int8(
    const std::vector<std::int8_t>& xq, const std::vector<std::int8_t>& wq,
    const std::vector<std::int32_t>& bias, std::int64_t B, std::int64_t Cin,
    std::int64_t P, std::int64_t Cout, double s_x,
    const std::vector<double>& s_w, double s_y) {
  std::vector<std::int8_t> y(static_cast<std::size_t>(B * Cout * P));
  for (std::int64_t b = 0; b < B; ++b)
    for (std::int64_t co = 0; co < Cout; ++co)
      for (std::int64_t p = 0; p < P; ++p) {
        std::int32_t acc = 0;
        for (std::int64_t ci = 0; ci < Cin; ++ci) {
          acc += static_cast<std::int32_t>(
                     xq[static_cast<std::size_t>((b * Cin + ci) * P + p)]) *
                 static_cast<std::int32_t>(
                     wq[static_cast<std::size_t>(co * Cin + ci)]);
        }
        if (!bias.empty()) acc += bias[static_cast<std::size_t>(co)];
        const double m = s_x * s_w[static_cast<std::size_t>(co)] / s_y;
        const double r = static_cast<double>(acc) * m;
        double q = std::floor(std::abs(r) + 0.5);
        if (r < 0) q = -q;
        q = std::clamp(q, -127.0, 127.0);
        y[static_cast<std::size_t>((b * Cout + co) * P + p)] =
            static_cast<std::int8_t>(q);
      }
  return y;
}

// KL divergence between a clipped histogram and its 128-level quantized
// approximation, for one candidate threshold (bins [0, i)). Mirrors the
// classic post-training calibration scorer. Returns +inf when undefined.
inline double kl_for_threshold(const std::vector<std::uint64_t>& hist,
                               std::int64_t i, std::int64_t levels = 128) {
  const auto n = static_cast<std::int64_t>(hist.size());
  std::vector<double> p(hist.begin(), hist.begin() + i);
  double tail = 0.0;
  for (std::int64_t b = i; b < n; ++b) tail += static_cast<double>(hist[b]);
  p[static_cast<std::size_t>(i - 1)] += tail;

  std::vector<double> sliced(hist.begin(), hist.begin() + i);
  std::vector<double> q(static_cast<std::size_t>(i), 0.0);
  for (std::int64_t g = 0; g < levels; ++g) {
    const std::int64_t start = g * i / levels;
    const std::int64_t stop = (g + 1) * i / levels;
    double sum = 0.0;
    std::int64_t nnz = 0;
    for (std::int64_t b = start; b < stop; ++b) {
      sum += sliced[static_cast<std::size_t>(b)];
      if (sliced[static_cast<std::size_t>(b)] > 0) ++nnz;
    }
    if (nnz == 0) continue;
    for (std::int64_t b = start; b < stop; ++b) {
      if (sliced[static_cast<std::size_t>(b)] > 0) {
        q[static_cast<std::size_t>(b)] = sum / static_cast<double>(nnz);
      }
    }
  }

  // eps-smoothing: normalize, add eps to zero entries and remove the same
  // total mass from nonzero entries, matching the calibration convention.
  auto smooth = [](std::vector<double>& d) {
    const double eps = 1e-4;
    double total = 0.0;
    std::int64_t zeros = 0;
    for (double v : d) {
      total += v;
      if (v == 0.0) ++zeros;
    }
    if (total <= 0.0) return false;
    const auto nz = static_cast<std::int64_t>(d.size()) - zeros;
    if (nz == 0) return false;
    for (double& v : d) v /= total;
    if (zeros == 0) return true;
    const double eps1 =
        eps * static_cast<double>(zeros) / static_cast<double>(nz);
    if (eps1 >= 1.0) return false;
    for (double& v : d) v = (v == 0.0) ? eps : v - eps1;
    for (double v : d) {
      if (v <= 0.0) return false;
    }
    return true;
  };
  if (!smooth(p) || !smooth(q)) {
    return std::numeric_limits<double>::infinity();
  }
  double kl = 0.0;
  for (std::size_t b = 0; b < p.size(); ++b) {
    kl += p[b] * std::log(p[b] / q[b]);
  }
  return kl;
}

}  // namespace oracles

#endif  // CONVFORM_TESTS_ORACLES_HPP_
