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

#include "convform/interpreter.hpp"

#include <cstring>
#include <vector>

#include "convform/error.hpp"
#include "convform/kernels.hpp"
#include "convform/quant.hpp"

namespace convform {

namespace {

const Tensor& fetch_param(const Graph& g, const Checkpoint& params,
                          const std::string& name) {
  const ParamInfo& info = g.param(name);
  const Tensor& t = params.at(name);
  if (t.shape() != info.shape) {
    throw ParamError("param '" + name + "' has shape " +
                     shape_str(t.shape()) + ", graph declares " +
                     shape_str(info.shape));
  }
  if (t.dtype() != info.dtype) {
    throw ParamError("param '" + name + "' is " + dtype_name(t.dtype()) +
                     ", graph declares " + dtype_name(info.dtype));
  }
  return t;
}

Tensor run_token_insert(const Graph& g, const Checkpoint& params,
                        const OpNode& n, const Tensor& x) {
  const std::int64_t B = x.dim(0), P = x.dim(1), C = x.dim(2);
  const auto tcount = static_cast<std::int64_t>(n.param_names.size());
  std::vector<float> out(static_cast<std::size_t>(B * (P + tcount) * C));
  const float* xp = x.f32().data();
  for (std::int64_t b = 0; b < B; ++b) {
    float* orow = out.data() + b * (P + tcount) * C;
    for (std::int64_t t = 0; t < tcount; ++t) {
      const Tensor& tok = fetch_param(g, params, n.param_names[static_cast<std::size_t>(t)]);
      std::memcpy(orow + t * C, tok.f32().data(),
                  static_cast<std::size_t>(C) * sizeof(float));
    }
    std::memcpy(orow + tcount * C, xp + b * P * C,
                static_cast<std::size_t>(P * C) * sizeof(float));
  }
  return Tensor::from_f32({B, P + tcount, C}, std::move(out));
}

Tensor run_add_pos(const Tensor& x, const Tensor& pos) {
  const std::int64_t B = x.dim(0), rest = x.dim(1) * x.dim(2);
  const float* xp = x.f32().data();
  const float* pp = pos.f32().data();
  std::vector<float> out(static_cast<std::size_t>(x.numel()));
  for (std::int64_t b = 0; b < B; ++b) {
    const float* row = xp + b * rest;
    float* orow = out.data() + b * rest;
    for (std::int64_t i = 0; i < rest; ++i) orow[i] = row[i] + pp[i];
  }
  return Tensor::from_f32(x.shape(), std::move(out));
}

Tensor run_slice(const OpNode& n, const Tensor& x) {
  const std::int64_t axis = n.attr_int("axis");
  const std::int64_t start = n.attr_int("start");
  const std::int64_t stop = n.attr_int("stop");
  const auto& shape = x.shape();
  std::int64_t outer = 1, inner = 1;
  for (std::int64_t i = 0; i < axis; ++i) outer *= shape[static_cast<std::size_t>(i)];
  for (std::size_t i = static_cast<std::size_t>(axis) + 1; i < shape.size(); ++i) {
    inner *= shape[i];
  }
  const std::int64_t extent = shape[static_cast<std::size_t>(axis)];
  const std::int64_t len = stop - start;
  const auto esz = static_cast<std::int64_t>(dtype_size(x.dtype()));
  const std::byte* src = x.bytes().data();
  std::vector<std::byte> out(static_cast<std::size_t>(outer * len * inner * esz));
  for (std::int64_t o = 0; o < outer; ++o) {
    std::memcpy(out.data() + o * len * inner * esz,
                src + (o * extent + start) * inner * esz,
                static_cast<std::size_t>(len * inner * esz));
  }
  Shape out_shape = shape;
  out_shape[static_cast<std::size_t>(axis)] = len;
  return Tensor::from_bytes(x.dtype(), std::move(out_shape), std::move(out));
}

Tensor run_concat(const OpNode& n, const std::vector<Tensor>& xs) {
  const std::int64_t axis = n.attr_int("axis");
  const auto& first = xs.front().shape();
  Shape out_shape = first;
  std::int64_t total_axis = 0;
  for (const auto& t : xs) {
    if (t.dtype() != xs.front().dtype()) {
      throw DimError("concat operands must share dtype");
    }
    total_axis += t.shape()[static_cast<std::size_t>(axis)];
  }
  out_shape[static_cast<std::size_t>(axis)] = total_axis;
  std::int64_t outer = 1, inner = 1;
  for (std::int64_t i = 0; i < axis; ++i) outer *= first[static_cast<std::size_t>(i)];
  for (std::size_t i = static_cast<std::size_t>(axis) + 1; i < first.size(); ++i) {
    inner *= first[i];
  }
  const auto esz = static_cast<std::int64_t>(dtype_size(xs.front().dtype()));
  std::vector<std::byte> out(static_cast<std::size_t>(shape_numel(out_shape)) *
                             static_cast<std::size_t>(esz));
  std::int64_t written = 0;
  for (const auto& t : xs) {
    const std::int64_t ax = t.shape()[static_cast<std::size_t>(axis)];
    const std::byte* src = t.bytes().data();
    for (std::int64_t o = 0; o < outer; ++o) {
      std::memcpy(out.data() + (o * total_axis + written) * inner * esz,
                  src + o * ax * inner * esz,
                  static_cast<std::size_t>(ax * inner * esz));
    }
    written += ax;
  }
  return Tensor::from_bytes(xs.front().dtype(), std::move(out_shape),
                            std::move(out));
}

Tensor run_layernorm(const Graph& g, const Checkpoint& params, const OpNode& n,
                     const Tensor& x) {
  const Tensor& gamma = fetch_param(g, params, n.param_names.at(0));
  const Tensor& beta = fetch_param(g, params, n.param_names.at(1));
  const auto eps = static_cast<float>(n.attr_float("eps"));
  if (x.rank() == 4) {
    // channels-first activation: normalize over the channel axis by moving
    // it last; summation order over the axis is unchanged.
    auto moved = permute(x, {0, 2, 3, 1});
    auto normed = layernorm_lastdim(moved, gamma.reshaped({gamma.numel()}),
                                    beta.reshaped({beta.numel()}), eps);
    return permute(normed, {0, 3, 1, 2});
  }
  return layernorm_lastdim(x, gamma, beta, eps);
}

Tensor run_linear(const Graph& g, const Checkpoint& params, const OpNode& n,
                  const Tensor& x) {
  const Tensor& w = fetch_param(g, params, n.param_names.at(0));
  const Tensor* bias = nullptr;
  Tensor bias_storage;
  if (n.param_names.size() == 2) {
    bias_storage = fetch_param(g, params, n.param_names.at(1));
    bias = &bias_storage;
  }
  if (x.rank() == 4) {
    const std::int64_t O = w.dim(0), I = w.dim(1);
    return conv2d(x, w.reshaped({O, I, 1, 1}), bias, 1);
  }
  return linear_lastdim(x, w, bias);
}

Tensor run_conv(const Graph& g, const Checkpoint& params, const OpNode& n,
                const Tensor& x) {
  const std::string& wname = n.param_names.at(0);
  const ParamInfo& winfo = g.param(wname);
  const Tensor& w = fetch_param(g, params, wname);
  const std::int64_t stride = n.attr_int("stride");
  if (winfo.dtype == DType::I8) {
    const Tensor& scales = fetch_param(g, params, wname + ".scale");
    const Tensor* bias = nullptr;
    Tensor bias_storage;
    if (n.param_names.size() == 2) {
      bias_storage = fetch_param(g, params, n.param_names.at(1));
      bias = &bias_storage;
    }
    const auto s_x = static_cast<float>(n.attr_float("s_x"));
    const auto s_y = static_cast<float>(n.attr_float("s_y"));
    return conv2d_1x1_int8(x, w, bias, scales, s_x, s_y, stride);
  }
  const Tensor* bias = nullptr;
  Tensor bias_storage;
  if (n.param_names.size() == 2) {
    bias_storage = fetch_param(g, params, n.param_names.at(1));
    bias = &bias_storage;
  }
  return conv2d(x, w, bias, stride);
}

}  // namespace

Tensor execute(const Graph& g, const Checkpoint& params, const Tensor& input,
               const ExecOptions& opts) {
  if (g.input < 0 || g.output < 0) {
    throw PassError("graph has no input/output set");
  }
  {
    const Edge& in_edge = g.edge(g.input);
    if (input.shape() != in_edge.shape || input.dtype() != in_edge.dtype) {
      throw DimError("graph expects input " + shape_str(in_edge.shape) +
                     " of " + dtype_name(in_edge.dtype) + ", got " +
                     shape_str(input.shape()));
    }
  }

  // Free each intermediate after its last consumer.
  std::vector<std::int64_t> last_use(g.edges.size(), -1);
  for (std::size_t i = 0; i < g.nodes.size(); ++i) {
    for (EdgeId e : g.nodes[i].inputs) {
      last_use[static_cast<std::size_t>(e)] = static_cast<std::int64_t>(i);
    }
  }

  std::vector<Tensor> env(g.edges.size());
  env[static_cast<std::size_t>(g.input)] = input;

  for (std::size_t i = 0; i < g.nodes.size(); ++i) {
    const OpNode& n = g.nodes[i];
    auto in = [&](std::size_t k) -> const Tensor& {
      const Tensor& t = env[static_cast<std::size_t>(n.inputs.at(k))];
      if (t.empty()) {
        throw PassError("node " + std::to_string(n.id) +
                        " reads unproduced edge " +
                        std::to_string(n.inputs.at(k)));
      }
      return t;
    };

    Tensor out;
    {
      switch (n.kind) {
        case OpKind::PatchEmbed: {
          const Tensor& w = fetch_param(g, params, n.param_names.at(0));
          const Tensor& b = fetch_param(g, params, n.param_names.at(1));
          const std::int64_t p = n.attr_int("patch");
          Tensor y = conv2d(in(0), w, &b, p);
          const std::int64_t B = y.dim(0), C = y.dim(1);
          const std::int64_t P = y.dim(2) * y.dim(3);
          out = permute(y.reshaped({B, C, P}), {0, 2, 1});
          break;
        }
        case OpKind::TokenInsert:
          out = run_token_insert(g, params, n, in(0));
          break;
        case OpKind::AddPosEmbed:
          out = run_add_pos(in(0), fetch_param(g, params, n.param_names.at(0)));
          break;
        case OpKind::Linear:
        case OpKind::Head:
          out = run_linear(g, params, n, in(0));
          break;
        case OpKind::LayerNorm:
          out = run_layernorm(g, params, n, in(0));
          break;
        case OpKind::Conv2d:
          out = run_conv(g, params, n, in(0));
          break;
        case OpKind::MatMulQK: {
          const Tensor& kt = in(1);
          std::vector<std::int64_t> perm(static_cast<std::size_t>(kt.rank()));
          for (std::size_t ax = 0; ax < perm.size(); ++ax) {
            perm[ax] = static_cast<std::int64_t>(ax);
          }
          std::swap(perm[perm.size() - 1], perm[perm.size() - 2]);
          out = matmul_batched(in(0), permute(kt, perm));
          break;
        }
        case OpKind::MatMulAV:
          out = matmul_batched(in(0), in(1));
          break;
        case OpKind::Softmax:
          out = softmax_lastdim(in(0));
          break;
        case OpKind::Gelu:
          out = gelu(in(0));
          break;
        case OpKind::Add:
        case OpKind::Sub:
        case OpKind::Mul: {
          std::vector<Tensor> ops;
          for (std::size_t k = 0; k < n.inputs.size(); ++k) ops.push_back(in(k));
          for (const auto& p : n.param_names) {
            ops.push_back(fetch_param(g, params, p));
          }
          if (ops.size() != 2) {
            throw DimError("binary node " + std::to_string(n.id) +
                           " has " + std::to_string(ops.size()) + " operands");
          }
          if (n.kind == OpKind::Add) {
            out = add(ops[0], ops[1]);
          } else if (n.kind == OpKind::Sub) {
            out = sub(ops[0], ops[1]);
          } else {
            out = mul(ops[0], ops[1]);
          }
          break;
        }
        case OpKind::MulScalar:
          out = mul_scalar(in(0), static_cast<float>(n.attr_float("value")));
          break;
        case OpKind::Square:
          out = square(in(0));
          break;
        case OpKind::RsqrtEps:
          out = rsqrt_eps(in(0), static_cast<float>(n.attr_float("eps")));
          break;
        case OpKind::Permute: {
          const auto& perm = n.attr_ints("perm");
          out = permute(in(0), perm);
          break;
        }
        case OpKind::Reshape: {
          const auto& target = n.attr_ints("shape");
          out = reshape(in(0), Shape(target.begin(), target.end()));
          break;
        }
        case OpKind::Concat: {
          std::vector<Tensor> xs;
          for (std::size_t k = 0; k < n.inputs.size(); ++k) xs.push_back(in(k));
          out = run_concat(n, xs);
          break;
        }
        case OpKind::Slice:
          out = run_slice(n, in(0));
          break;
        case OpKind::Quantize:
          out = quantize_tensor(in(0),
                                static_cast<float>(n.attr_float("scale")));
          break;
        case OpKind::Dequantize:
          out = dequantize_tensor(in(0),
                                  static_cast<float>(n.attr_float("scale")));
          break;
      }
    }

    const Edge& oe = g.edge(n.output);
    if (out.shape() != oe.shape || out.dtype() != oe.dtype) {
      throw DimError(std::string(op_kind_name(n.kind)) + " node " +
                     std::to_string(n.id) + " produced " +
                     shape_str(out.shape()) + " " + dtype_name(out.dtype()) +
                     ", edge declares " + shape_str(oe.shape) + " " +
                     dtype_name(oe.dtype));
    }
    env[static_cast<std::size_t>(n.output)] = std::move(out);
    if (opts.observer) {
      opts.observer(n.output, env[static_cast<std::size_t>(n.output)]);
    }
    for (EdgeId e : n.inputs) {
      if (last_use[static_cast<std::size_t>(e)] ==
              static_cast<std::int64_t>(i) &&
          e != g.output) {
        env[static_cast<std::size_t>(e)] = Tensor();
      }
    }
  }

  Tensor result = env[static_cast<std::size_t>(g.output)];
  if (result.empty()) {
    throw PassError("graph output edge was never produced");
  }
  return result;
}

}  // namespace convform
