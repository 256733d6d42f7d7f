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

#include "convform/harness.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <numeric>
#include <sstream>

#include "convform/checkpoint.hpp"
#include "convform/error.hpp"
#include "convform/random.hpp"
#include "json.hpp"

namespace convform {

namespace {

constexpr double kRelEps = 1e-8;

Tensor random_input(Rng& rng, const Shape& shape) {
  std::vector<float> v(static_cast<std::size_t>(shape_numel(shape)));
  for (auto& x : v) x = static_cast<float>(rng.normal());
  return Tensor::from_f32(shape, std::move(v));
}

std::int64_t argmax_lowest(std::span<const float> v) {
  std::int64_t best = 0;
  for (std::int64_t i = 1; i < static_cast<std::int64_t>(v.size()); ++i) {
    if (v[static_cast<std::size_t>(i)] > v[static_cast<std::size_t>(best)]) {
      best = i;
    }
  }
  return best;
}

double now_seconds() {
  return std::chrono::duration<double>(
             std::chrono::steady_clock::now().time_since_epoch())
      .count();
}

}  // namespace

EquivalenceReport verify_equivalence(const ModelFn& a, const ModelFn& b,
                                     const Shape& input_shape,
                                     std::int64_t n_inputs, double rtol,
                                     double atol, std::uint64_t seed) {
  if (n_inputs < 1) throw ConfigError("verify needs at least one input");
  Rng rng(seed);
  EquivalenceReport r;
  r.rtol = rtol;
  r.atol = atol;
  double sum_rel = 0.0, sum_abs = 0.0;
  std::int64_t total = 0, agree = 0;
  for (std::int64_t i = 0; i < n_inputs; ++i) {
    const Tensor input = random_input(rng, input_shape);
    const Tensor ya = a(input);
    const Tensor yb = b(input);
    if (ya.shape() != yb.shape()) {
      throw DimError("model outputs disagree: " + shape_str(ya.shape()) +
                     " vs " + shape_str(yb.shape()));
    }
    const auto va = ya.f32();
    const auto vb = yb.f32();
    for (std::size_t j = 0; j < va.size(); ++j) {
      const double da = va[j], db = vb[j];
      const double abs_err = std::abs(da - db);
      sum_abs += abs_err;
      sum_rel += abs_err / (std::abs(da) + kRelEps);
      r.max_abs = std::max(r.max_abs, abs_err);
    }
    total += static_cast<std::int64_t>(va.size());
    if (argmax_lowest(va) == argmax_lowest(vb)) ++agree;
  }
  r.samples = n_inputs;
  r.mean_rel = sum_rel / static_cast<double>(total);
  r.mean_abs = sum_abs / static_cast<double>(total);
  r.agreement = static_cast<double>(agree) / static_cast<double>(n_inputs);
  r.pass = r.mean_rel <= rtol && r.mean_abs <= atol;
  return r;
}

std::string equivalence_to_json_string(const EquivalenceReport& r) {
  nlohmann::json j{{"mean_rel", r.mean_rel},     {"mean_abs", r.mean_abs},
                   {"max_abs", r.max_abs},       {"agreement", r.agreement},
                   {"samples", r.samples},       {"rtol", r.rtol},
                   {"atol", r.atol},             {"pass", r.pass}};
  return j.dump(2) + "\n";
}

std::vector<std::int64_t> topk_indices(std::span<const float> logits,
                                       std::int64_t k) {
  std::vector<std::int64_t> order(logits.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::int64_t l, std::int64_t rix) {
                     return logits[static_cast<std::size_t>(l)] >
                            logits[static_cast<std::size_t>(rix)];
                   });
  const auto take = std::min<std::size_t>(static_cast<std::size_t>(k),
                                          order.size());
  order.resize(take);
  return order;
}

double sqnr_db(const Tensor& ref, const Tensor& test) {
  if (ref.shape() != test.shape()) {
    throw DimError("sqnr operands disagree: " + shape_str(ref.shape()) +
                   " vs " + shape_str(test.shape()));
  }
  const auto vr = ref.f32();
  const auto vt = test.f32();
  double sig = 0.0, err = 0.0;
  for (std::size_t i = 0; i < vr.size(); ++i) {
    const double r = vr[i];
    const double e = r - static_cast<double>(vt[i]);
    sig += r * r;
    err += e * e;
  }
  if (err == 0.0) return std::numeric_limits<double>::infinity();
  return 10.0 * std::log10(sig / err);
}

Dataset make_synthetic_dataset(const ModelConfig& c, std::int64_t n,
                               std::uint64_t seed) {
  if (n < 1) throw ConfigError("dataset needs at least one sample");
  Dataset ds;
  ds.class_names = {"daisy", "dandelion", "roses", "sunflowers", "tulips"};
  const auto classes = static_cast<std::int64_t>(ds.class_names.size());
  const Shape shape{1, 3, c.img_size, c.img_size};
  Rng rng(seed);
  for (std::int64_t i = 0; i < n; ++i) {
    const std::int64_t label = i % classes;
    const double mean = 0.4 * static_cast<double>(label - 2);
    std::vector<float> v(static_cast<std::size_t>(shape_numel(shape)));
    for (auto& x : v) x = static_cast<float>(rng.normal(mean, 1.0));
    ds.images.push_back(Tensor::from_f32(shape, std::move(v)));
    ds.labels.push_back(label);
  }
  return ds;
}

void save_dataset(const Dataset& ds, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  nlohmann::json samples = nlohmann::json::array();
  for (std::size_t i = 0; i < ds.images.size(); ++i) {
    char name[32];
    std::snprintf(name, sizeof(name), "sample_%04zu.sbt", i);
    save_tensor_sbt(ds.images[i], dir / name);
    samples.push_back({{"tensor", name}, {"label", ds.labels[i]}});
  }
  const nlohmann::json manifest{{"classes", ds.class_names},
                                {"samples", std::move(samples)}};
  std::ofstream out(dir / "manifest.json", std::ios::binary);
  if (!out) throw FormatError("cannot write dataset manifest");
  out << manifest.dump(2) << "\n";
}

Dataset load_dataset(const std::filesystem::path& manifest) {
  std::ifstream in(manifest, std::ios::binary);
  if (!in) throw FormatError("cannot open " + manifest.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  Dataset ds;
  try {
    const auto j = nlohmann::json::parse(ss.str());
    ds.class_names = j.at("classes").get<std::vector<std::string>>();
    const auto dir = manifest.parent_path();
    for (const auto& js : j.at("samples")) {
      ds.images.push_back(
          load_tensor_sbt(dir / js.at("tensor").get<std::string>()));
      const auto label = js.at("label").get<std::int64_t>();
      if (label < 0 ||
          label >= static_cast<std::int64_t>(ds.class_names.size())) {
        throw FormatError("label " + std::to_string(label) +
                          " outside class table");
      }
      ds.labels.push_back(label);
    }
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("dataset manifest is malformed: ") +
                      e.what());
  }
  return ds;
}

EvalResult eval_topk(const ModelFn& model, const Dataset& ds, bool timing) {
  if (ds.images.empty()) throw ConfigError("dataset is empty");
  EvalResult r;
  std::vector<double> times;
  std::int64_t hit1 = 0, hit5 = 0;
  for (std::size_t i = 0; i < ds.images.size(); ++i) {
    const double t0 = timing ? now_seconds() : 0.0;
    const Tensor y = model(ds.images[i]);
    if (timing) times.push_back(now_seconds() - t0);
    PredictionRecord rec;
    rec.label = ds.labels[i];
    rec.top5 = topk_indices(y.f32(), 5);
    rec.predicted = rec.top5.at(0);
    if (rec.predicted == rec.label) ++hit1;
    if (std::find(rec.top5.begin(), rec.top5.end(), rec.label) !=
        rec.top5.end()) {
      ++hit5;
    }
    r.records.push_back(std::move(rec));
  }
  const auto n = static_cast<double>(ds.images.size());
  r.top1 = 100.0 * static_cast<double>(hit1) / n;
  r.top5 = 100.0 * static_cast<double>(hit5) / n;
  if (timing && !times.empty()) {
    r.latency.mean_s =
        std::accumulate(times.begin(), times.end(), 0.0) /
        static_cast<double>(times.size());
    std::sort(times.begin(), times.end());
    const auto at = [&](double q) {
      const auto ix = static_cast<std::size_t>(
          q * static_cast<double>(times.size() - 1) + 0.5);
      return times[std::min(ix, times.size() - 1)];
    };
    r.latency.p50_s = at(0.50);
    r.latency.p95_s = at(0.95);
  }
  return r;
}

std::string eval_to_json_string(const EvalResult& r, bool timing) {
  nlohmann::json j;
  j["top1"] = r.top1;
  j["top5"] = r.top5;
  j["samples"] = r.records.size();
  nlohmann::json recs = nlohmann::json::array();
  for (const auto& rec : r.records) {
    recs.push_back({{"label", rec.label},
                    {"predicted", rec.predicted},
                    {"top5", rec.top5}});
  }
  j["records"] = std::move(recs);
  if (timing) {
    j["latency"] = {{"mean_s", r.latency.mean_s},
                    {"p50_s", r.latency.p50_s},
                    {"p95_s", r.latency.p95_s}};
  }
  return j.dump(2) + "\n";
}

std::vector<BenchRow> bench_models(
    const std::vector<std::pair<std::string, ModelFn>>& models,
    const Tensor& input, std::int64_t n_runs, std::int64_t warmup) {
  if (models.empty()) throw ConfigError("bench needs at least one model");
  if (n_runs < 1) throw ConfigError("bench needs n_runs >= 1");
  std::vector<BenchRow> rows;
  for (const auto& [name, fn] : models) {
    for (std::int64_t i = 0; i < warmup; ++i) (void)fn(input);
    const double t0 = now_seconds();
    for (std::int64_t i = 0; i < n_runs; ++i) (void)fn(input);
    const double per_run = (now_seconds() - t0) / static_cast<double>(n_runs);
    rows.push_back({name, per_run, 0.0});
  }
  for (auto& row : rows) {
    row.speedup = rows.front().seconds / row.seconds;
  }
  return rows;
}

std::string bench_table(const std::vector<BenchRow>& rows) {
  std::ostringstream out;
  out << "| Model Type | Inference Time (s) | Speedup Factor |\n";
  out << "|------------|--------------------|----------------|\n";
  char line[128];
  for (const auto& r : rows) {
    std::snprintf(line, sizeof(line), "| %-10s | %18.6f | %14.2f |\n",
                  r.name.c_str(), r.seconds, r.speedup);
    out << line;
  }
  return out.str();
}

std::vector<MismatchRow> report_mismatches(const ModelFn& a, const ModelFn& b,
                                           const Dataset& ds) {
  std::vector<MismatchRow> rows;
  const auto name_of = [&](std::int64_t ix) -> std::string {
    if (ix >= 0 && ix < static_cast<std::int64_t>(ds.class_names.size())) {
      return ds.class_names[static_cast<std::size_t>(ix)];
    }
    return "class_" + std::to_string(ix);
  };
  for (std::size_t i = 0; i < ds.images.size(); ++i) {
    const auto pa = argmax_lowest(a(ds.images[i]).f32());
    const auto pb = argmax_lowest(b(ds.images[i]).f32());
    const auto label = ds.labels[i];
    if (pa == label && pb == label) continue;
    MismatchRow row;
    row.sample = static_cast<std::int64_t>(i);
    row.annotation = name_of(label);
    row.pred_a = name_of(pa);
    row.pred_b = name_of(pb);
    row.models_differ = pa != pb;
    rows.push_back(std::move(row));
  }
  return rows;
}

std::string mismatch_table(const std::vector<MismatchRow>& rows) {
  std::ostringstream out;
  out << "| Sample | Incorrect Annotation | DeiT Prediction | "
         "Quantized Prediction |\n";
  out << "|--------|----------------------|-----------------|"
         "----------------------|\n";
  char line[160];
  for (const auto& r : rows) {
    std::snprintf(line, sizeof(line), "| %6lld | %-20s | %-15s | %-20s |\n",
                  static_cast<long long>(r.sample), r.annotation.c_str(),
                  r.pred_a.c_str(), r.pred_b.c_str());
    out << line;
  }
  return out.str();
}

std::string mismatch_to_json_string(const std::vector<MismatchRow>& rows) {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& r : rows) {
    arr.push_back({{"sample", r.sample},
                   {"annotation", r.annotation},
                   {"deit_prediction", r.pred_a},
                   {"quantized_prediction", r.pred_b},
                   {"models_differ", r.models_differ}});
  }
  return nlohmann::json{{"mismatches", std::move(arr)}}.dump(2) + "\n";
}

}  // namespace convform
