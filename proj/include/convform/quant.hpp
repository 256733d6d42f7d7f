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

#ifndef CONVFORM_QUANT_HPP_
#define CONVFORM_QUANT_HPP_

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "convform/checkpoint.hpp"
#include "convform/graph.hpp"
#include "convform/tensor.hpp"

namespace convform {

// Quantization is symmetric int8 with zero-point 0: per-tensor scales for
// activations, per-output-channel scales for conv weights. Quantized values
// use [-127, 127]; rounding is half away from zero everywhere.

inline constexpr int kHistogramBins = 2048;
inline constexpr int kQuantTargetBins = 128;

struct EdgeStats {
  float min_val = 0.0f;
  float max_val = 0.0f;
  std::uint64_t count = 0;
  // |x| histogram over [0, hist_max] with kHistogramBins bins.
  float hist_max = 0.0f;
  std::vector<std::uint64_t> hist;
};

struct CalibStats {
  std::int64_t samples = 0;
  std::map<EdgeId, EdgeStats> edges;
};

// Input and output edges of every Conv2d node, deduplicated and sorted.
std::vector<EdgeId> conv_boundary_edges(const Graph& lowered);

// Two forward passes over the samples: min/max first, then the |x|
// histogram sized by the observed range.
CalibStats calibrate(const Graph& lowered, const Checkpoint& params,
                     const std::vector<Tensor>& samples);

std::string calib_to_json_string(const CalibStats& stats);
CalibStats calib_from_json_string(const std::string& text);
void save_calib(const CalibStats& stats, const std::filesystem::path& path);
CalibStats load_calib(const std::filesystem::path& path);

enum class CalibMethod : std::uint8_t { MinMax, KL };
const char* calib_method_name(CalibMethod m);
CalibMethod calib_method_from_name(const std::string& name);

struct ScaleChoice {
  float scale = 1.0f;
  // All-zero data: scale falls back to 1 and is flagged.
  bool degenerate = false;
  // Bin edge chosen by the KL sweep; -1 for min-max.
  std::int64_t kl_bin = -1;
};

// scale = max(|min|, |max|) / 127.
ScaleChoice compute_scale_minmax(const EdgeStats& stats);

// TensorRT-style sweep: candidate thresholds at bin edges i * width for
// i in [kQuantTargetBins, kHistogramBins]; each candidate clips the tail
// into the last kept bin, compresses the kept bins to kQuantTargetBins
// levels (expanded back over nonzero bins), eps-smooths both
// distributions and scores KL(P||Q). Ties keep the smallest threshold.
ScaleChoice compute_scale_kl(const EdgeStats& stats);

// f32 -> i8 at the given scale.
Tensor quantize_tensor(const Tensor& x, float scale);
// i8 -> f32.
Tensor dequantize_tensor(const Tensor& q, float scale);

struct QuantizedWeight {
  Tensor values;  // i8, same shape as the source weight
  Tensor scales;  // f32, (Cout)
};

// Per-output-channel symmetric quantization of a (Cout, Cin, Kh, Kw) weight.
// All-zero channels get scale 1.
QuantizedWeight quantize_conv_weight(const Tensor& w);

// bias_q[c] = round(bias[c] / (s_x * s_w[c])), computed in double,
// saturated to i32.
Tensor quantize_conv_bias(const Tensor& bias, float s_x,
                          const Tensor& w_scales);

// Int8 1x1 convolution: i32 accumulation over channels, bias added in i32,
// requantization by s_x * s_w[c] / s_y in double, round half away from
// zero, clamp to [-127, 127]. Throws CapacityError if Cin * 127^2 could
// overflow the i32 accumulator.
Tensor conv2d_1x1_int8(const Tensor& x, const Tensor& w, const Tensor* bias,
                       const Tensor& w_scales, float s_x, float s_y,
                       std::int64_t stride);

struct QuantizeOptions {
  CalibMethod method = CalibMethod::MinMax;
  // Keep the layernorm-decomposition mean convs in f32.
  bool ln_conv_f32 = false;
};

// A lowered graph with Quantize/Dequantize boundary nodes around its int8
// convs. Conv nodes carry s_x/s_y attrs; per-channel weight scales live in
// qweights as '<w>.scale' entries. fparams keeps the full f32 param set.
struct QuantizedModel {
  Graph graph;
  Checkpoint qweights;
  Checkpoint fparams;
  std::map<EdgeId, ScaleChoice> act_scales;
  CalibMethod method = CalibMethod::MinMax;
  bool ln_conv_f32 = false;
};

QuantizedModel build_quantized(const Graph& lowered,
                               const Checkpoint& inherited,
                               const CalibStats& stats,
                               const QuantizeOptions& opts = {});

Tensor execute_quantized(const QuantizedModel& m, const Tensor& input);

std::string qparams_to_json_string(const QuantizedModel& m);

// Writes <prefix>.graph.json, <prefix>.dckp (f32 params),
// <prefix>.weights.dckp (int8/i32 payloads) and <prefix>.qparams.json.
void save_quantized(const QuantizedModel& m, const std::string& prefix);
QuantizedModel load_quantized(const std::string& prefix);

}  // namespace convform

#endif  // CONVFORM_QUANT_HPP_
