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

#ifndef CONVFORM_HARNESS_HPP_
#define CONVFORM_HARNESS_HPP_

#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "convform/config.hpp"
#include "convform/tensor.hpp"

namespace convform {

// Any runnable model: f32 pipeline or quantized bundle.
using ModelFn = std::function<Tensor(const Tensor&)>;

struct EquivalenceReport {
  double mean_rel = 0.0;  // mean of |a - b| / (|a| + 1e-8)
  double mean_abs = 0.0;
  double max_abs = 0.0;
  double agreement = 0.0;  // argmax agreement rate over samples
  std::int64_t samples = 0;
  double rtol = 0.0;
  double atol = 0.0;
  bool pass = false;  // mean_rel <= rtol && mean_abs <= atol
};

// Runs `n_inputs` seeded N(0,1) inputs through both models and aggregates
// elementwise errors over all outputs. Throws DimError if the outputs
// disagree on shape.
EquivalenceReport verify_equivalence(const ModelFn& a, const ModelFn& b,
                                     const Shape& input_shape,
                                     std::int64_t n_inputs, double rtol,
                                     double atol, std::uint64_t seed);

std::string equivalence_to_json_string(const EquivalenceReport& r);

// Indices of the k largest logits, ties broken by lowest index.
std::vector<std::int64_t> topk_indices(std::span<const float> logits,
                                       std::int64_t k);

// 10*log10(sum(ref^2) / sum((ref-test)^2)); +inf when the error is zero.
double sqnr_db(const Tensor& ref, const Tensor& test);

struct Dataset {
  std::vector<Tensor> images;
  std::vector<std::int64_t> labels;
  std::vector<std::string> class_names;
};

// Five classes with class-dependent pixel statistics, one image per sample,
// deterministic in (config, n, seed).
Dataset make_synthetic_dataset(const ModelConfig& c, std::int64_t n,
                               std::uint64_t seed);

// Writes sample_NNNN.sbt tensors plus manifest.json into `dir`.
void save_dataset(const Dataset& ds, const std::filesystem::path& dir);
Dataset load_dataset(const std::filesystem::path& manifest);

struct PredictionRecord {
  std::int64_t label = -1;
  std::int64_t predicted = -1;
  std::vector<std::int64_t> top5;
};

struct LatencyStats {
  double mean_s = 0.0;
  double p50_s = 0.0;
  double p95_s = 0.0;
};

struct EvalResult {
  double top1 = 0.0;  // percent
  double top5 = 0.0;
  std::vector<PredictionRecord> records;
  LatencyStats latency;
};

// Standard top-k accuracy; `timing` enables per-sample wall-clock stats.
// Throws ConfigError on an empty dataset.
EvalResult eval_topk(const ModelFn& model, const Dataset& ds,
                     bool timing = false);

std::string eval_to_json_string(const EvalResult& r, bool timing);

struct BenchRow {
  std::string name;
  double seconds = 0.0;  // per-inference wall clock
  double speedup = 0.0;  // first row is the baseline
};

std::vector<BenchRow> bench_models(
    const std::vector<std::pair<std::string, ModelFn>>& models,
    const Tensor& input, std::int64_t n_runs, std::int64_t warmup);

// | Model Type | Inference Time (s) | Speedup Factor |
std::string bench_table(const std::vector<BenchRow>& rows);

struct MismatchRow {
  std::int64_t sample = -1;
  std::string annotation;
  std::string pred_a;
  std::string pred_b;
  bool models_differ = false;
};

// Samples where either model disagrees with the label or the models
// disagree with each other.
std::vector<MismatchRow> report_mismatches(const ModelFn& a, const ModelFn& b,
                                           const Dataset& ds);

// | Sample | Incorrect Annotation | DeiT Prediction | Quantized Prediction |
std::string mismatch_table(const std::vector<MismatchRow>& rows);

std::string mismatch_to_json_string(const std::vector<MismatchRow>& rows);

}  // namespace convform

#endif  // CONVFORM_HARNESS_HPP_
