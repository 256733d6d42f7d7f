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

#ifndef CONVFORM_KERNELS_HPP_
#define CONVFORM_KERNELS_HPP_

#include <cstdint>
#include <vector>

#include "convform/tensor.hpp"

namespace convform {

// Multiply-accumulate counters. Kernels add to the scope active on the
// current thread; with no active scope counting is off.
struct KernelCounters {
  std::uint64_t conv_macs = 0;
  std::uint64_t matmul_macs = 0;
};

class CounterScope {
 public:
  explicit CounterScope(KernelCounters* counters);
  ~CounterScope();
  CounterScope(const CounterScope&) = delete;
  CounterScope& operator=(const CounterScope&) = delete;

 private:
  KernelCounters* prev_;
};

KernelCounters* active_counters();

// All float kernels accumulate in f32 with the contraction axis ascending,
// accumulator starting at 0.0f and bias added after the loop. Linear on the
// last axis and 1x1 convolution over channels therefore produce bitwise
// identical results for reshaped operands.

// x: (B, Cin, H, W), w: (Cout, Cin, Kh, Kw), bias: (Cout) or null.
// No padding; (H - Kh) and (W - Kw) must be divisible by stride.
Tensor conv2d(const Tensor& x, const Tensor& w, const Tensor* bias,
              std::int64_t stride);

// a: (..., M, K), b: (..., K, N) with identical leading dims.
Tensor matmul_batched(const Tensor& a, const Tensor& b);

// y = x @ w^T + bias over the last axis. x: (..., I), w: (O, I), bias: (O).
Tensor linear_lastdim(const Tensor& x, const Tensor& w, const Tensor* bias);

Tensor softmax_lastdim(const Tensor& x);

// Exact erf form, evaluated in double per element.
Tensor gelu(const Tensor& x);

// Normalizes the last axis with biased variance. gamma/beta: (H).
Tensor layernorm_lastdim(const Tensor& x, const Tensor& gamma,
                         const Tensor& beta, float eps);

Tensor permute(const Tensor& x, const std::vector<std::int64_t>& perm);
Tensor reshape(const Tensor& x, const Shape& new_shape);

// Elementwise binaries accept equal shapes, or a (1, C, 1, 1) operand
// broadcast against (B, C, H, W).
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor mul_scalar(const Tensor& x, float s);
Tensor square(const Tensor& x);

// y = 1 / sqrt(v + eps); negative inputs raise NumericError.
Tensor rsqrt_eps(const Tensor& v, float eps);

}  // namespace convform

#endif  // CONVFORM_KERNELS_HPP_
