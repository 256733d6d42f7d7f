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

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "convform/builder.hpp"
#include "convform/checkpoint.hpp"
#include "convform/config.hpp"
#include "convform/error.hpp"
#include "convform/harness.hpp"
#include "convform/interpreter.hpp"
#include "convform/kernels.hpp"
#include "convform/quant.hpp"
#include "convform/random.hpp"
#include "convform/rewrite.hpp"
#include "json.hpp"

namespace {

namespace fs = std::filesystem;
using namespace convform;

ModelConfig resolve_config(const std::string& name_or_path) {
  if (fs::exists(name_or_path) && fs::is_regular_file(name_or_path)) {
    std::ifstream in(name_or_path, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return config_from_json_string(ss.str());
  }
  return ModelConfig::preset(name_or_path);
}

// A model prefix names either a quantized bundle (<p>.qparams.json present)
// or an f32 pair <p>.graph.json + <p>.dckp.
struct LoadedModel {
  Graph graph;
  Checkpoint params;
  std::optional<QuantizedModel> quantized;

  ModelFn fn() const {
    if (quantized) {
      const QuantizedModel* qm = &*quantized;
      return [qm](const Tensor& x) { return execute_quantized(*qm, x); };
    }
    const Graph* g = &graph;
    const Checkpoint* p = &params;
    return [g, p](const Tensor& x) { return execute(*g, *p, x); };
  }
  const Shape& input_shape() const {
    const Graph& g = quantized ? quantized->graph : graph;
    return g.edge(g.input).shape;
  }
};

LoadedModel load_model(const std::string& prefix) {
  LoadedModel m;
  if (fs::exists(prefix + ".qparams.json")) {
    m.quantized = load_quantized(prefix);
  } else {
    m.graph = load_graph(prefix + ".graph.json");
    m.params = load_checkpoint(prefix + ".dckp");
  }
  return m;
}

void write_text_file(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError("cannot open " + path.string() + " for write");
  out << text;
  if (!out) throw FormatError("failed writing " + path.string());
}

void emit(const std::string& text, const std::string& out_path) {
  if (out_path.empty()) {
    std::cout << text;
  } else {
    write_text_file(out_path, text);
  }
}

Dataset resolve_dataset(const std::string& manifest, const std::string& config,
                        std::int64_t n, std::uint64_t seed) {
  if (!manifest.empty()) return load_dataset(manifest);
  if (config.empty()) {
    throw ConfigError("need --dataset or --config to build inputs");
  }
  return make_synthetic_dataset(resolve_config(config), n, seed);
}

int run_transform(const std::string& config_name, std::uint64_t seed,
                  const std::string& out_dir) {
  const ModelConfig cfg = resolve_config(config_name);
  const Graph g = build_deit(cfg, 1);
  const CheckpointMeta meta{cfg.variant, cfg.distilled, cfg.num_classes};
  const Checkpoint src = random_checkpoint(g, seed, meta);
  auto [lowered, plan] = lower(g);
  const Checkpoint inherited = inherit_weights(src, lowered);

  fs::create_directories(out_dir);
  const fs::path dir(out_dir);
  save_graph(g, dir / "original.graph.json");
  save_checkpoint(src, dir / "original.dckp");
  save_graph(lowered, dir / "lowered.graph.json");
  save_checkpoint(inherited, dir / "lowered.dckp");
  save_plan(plan, dir / "plan.json");
  std::cout << "transform: " << g.nodes.size() << " nodes -> "
            << lowered.nodes.size() << " nodes, "
            << lowered.count_kind(OpKind::Conv2d) << " convs, params "
            << param_count(cfg) << "\n";
  return 0;
}

int run_calibrate(const std::string& model_prefix, const std::string& config,
                  std::int64_t n, std::uint64_t seed,
                  const std::string& out_path) {
  const LoadedModel m = load_model(model_prefix);
  if (m.quantized) throw ConfigError("calibrate expects an f32 model");
  const Dataset ds = resolve_dataset("", config, n, seed);
  const CalibStats stats = calibrate(m.graph, m.params, ds.images);
  save_calib(stats, out_path);
  std::cout << "calibrate: " << stats.edges.size() << " edges over "
            << stats.samples << " samples\n";
  return 0;
}

int run_quantize(const std::string& model_prefix, const std::string& calib,
                 const std::string& method, bool ln_conv_f32,
                 const std::string& out_prefix) {
  const LoadedModel m = load_model(model_prefix);
  if (m.quantized) throw ConfigError("quantize expects an f32 model");
  const CalibStats stats = load_calib(calib);
  QuantizeOptions opts;
  opts.method = calib_method_from_name(method);
  opts.ln_conv_f32 = ln_conv_f32;
  const QuantizedModel qm = build_quantized(m.graph, m.params, stats, opts);
  const fs::path prefix(out_prefix);
  if (prefix.has_parent_path()) fs::create_directories(prefix.parent_path());
  save_quantized(qm, out_prefix);
  std::int64_t int8_convs = 0;
  for (const auto& n : qm.graph.nodes) {
    if (n.kind == OpKind::Conv2d &&
        qm.graph.param(n.param_names.at(0)).dtype == DType::I8) {
      ++int8_convs;
    }
  }
  std::cout << "quantize: " << int8_convs << " int8 convs, method "
            << calib_method_name(qm.method) << "\n";
  return 0;
}

int run_verify(const std::string& prefix_a, const std::string& prefix_b,
               std::int64_t n, double rtol, double atol, std::uint64_t seed,
               bool json, const std::string& out_path) {
  const LoadedModel a = load_model(prefix_a);
  const LoadedModel b = load_model(prefix_b);
  if (a.input_shape() != b.input_shape()) {
    throw DimError("models disagree on input shape: " +
                   shape_str(a.input_shape()) + " vs " +
                   shape_str(b.input_shape()));
  }
  const EquivalenceReport r =
      verify_equivalence(a.fn(), b.fn(), a.input_shape(), n, rtol, atol, seed);
  std::string text;
  if (json) {
    text = equivalence_to_json_string(r);
  } else {
    std::ostringstream ss;
    ss << "verify: " << (r.pass ? "PASS" : "FAIL") << " mean_rel "
       << r.mean_rel << " (rtol " << r.rtol << "), mean_abs " << r.mean_abs
       << " (atol " << r.atol << "), max_abs " << r.max_abs << ", agreement "
       << r.agreement << " over " << r.samples << " inputs\n";
    text = ss.str();
  }
  emit(text, out_path);
  if (!out_path.empty()) std::cout << (r.pass ? "PASS\n" : "FAIL\n");
  return r.pass ? 0 : 1;
}

int run_eval(const std::string& model_prefix, const std::string& manifest,
             const std::string& config, std::int64_t n, std::uint64_t seed,
             bool timing, bool json, const std::string& out_path) {
  const LoadedModel m = load_model(model_prefix);
  const Dataset ds = resolve_dataset(manifest, config, n, seed);
  const EvalResult r = eval_topk(m.fn(), ds, timing);
  std::string text;
  if (json) {
    text = eval_to_json_string(r, timing);
  } else {
    std::ostringstream ss;
    ss << "eval: top-1 " << r.top1 << "% top-5 " << r.top5 << "% over "
       << r.records.size() << " samples\n";
    if (timing) {
      ss << "latency: mean " << r.latency.mean_s << "s p50 " << r.latency.p50_s
         << "s p95 " << r.latency.p95_s << "s\n";
    }
    text = ss.str();
  }
  emit(text, out_path);
  return 0;
}

int run_bench(const std::string& prefix_a, const std::string& prefix_b,
              std::int64_t runs, std::int64_t warmup, std::uint64_t seed,
              bool json, const std::string& out_path) {
  const LoadedModel a = load_model(prefix_a);
  std::vector<std::pair<std::string, ModelFn>> models;
  models.emplace_back(a.quantized ? "INT8" : "FP32", a.fn());
  LoadedModel b;
  if (!prefix_b.empty()) {
    b = load_model(prefix_b);
    if (a.input_shape() != b.input_shape()) {
      throw DimError("models disagree on input shape");
    }
    models.emplace_back(b.quantized ? "INT8" : "FP32", b.fn());
  }
  Rng rng(seed);
  const Shape& shape = a.input_shape();
  std::vector<float> v(static_cast<std::size_t>(shape_numel(shape)));
  for (auto& x : v) x = static_cast<float>(rng.normal());
  const Tensor input = Tensor::from_f32(shape, std::move(v));

  // conv MAC parity between the paths, measured not assumed
  std::vector<std::uint64_t> macs;
  for (auto& [name, fn] : models) {
    KernelCounters counters;
    {
      CounterScope scope(&counters);
      (void)fn(input);
    }
    macs.push_back(counters.conv_macs);
  }

  const auto rows = bench_models(models, input, runs, warmup);
  std::string text;
  if (json) {
    nlohmann::json jrows = nlohmann::json::array();
    for (std::size_t i = 0; i < rows.size(); ++i) {
      jrows.push_back({{"model", rows[i].name},
                       {"seconds", rows[i].seconds},
                       {"speedup", rows[i].speedup},
                       {"conv_macs", macs[i]}});
    }
    text = nlohmann::json{{"rows", std::move(jrows)}}.dump(2) + "\n";
  } else {
    std::ostringstream ss;
    ss << bench_table(rows);
    for (std::size_t i = 0; i < rows.size(); ++i) {
      ss << rows[i].name << " conv MACs: " << macs[i] << "\n";
    }
    text = ss.str();
  }
  emit(text, out_path);
  return 0;
}

int run_mismatch(const std::string& prefix_a, const std::string& prefix_b,
                 const std::string& manifest, const std::string& config,
                 std::int64_t n, std::uint64_t seed, bool json,
                 const std::string& out_path) {
  const LoadedModel a = load_model(prefix_a);
  const LoadedModel b = load_model(prefix_b);
  const Dataset ds = resolve_dataset(manifest, config, n, seed);
  const auto rows = report_mismatches(a.fn(), b.fn(), ds);
  emit(json ? mismatch_to_json_string(rows) : mismatch_table(rows), out_path);
  return 0;
}

int run_dataset(const std::string& config, std::int64_t n, std::uint64_t seed,
                const std::string& out_dir) {
  const Dataset ds = make_synthetic_dataset(resolve_config(config), n, seed);
  save_dataset(ds, out_dir);
  std::cout << "dataset: " << ds.images.size() << " samples, "
            << ds.class_names.size() << " classes\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"convform: DeiT-to-convolution rewriter and INT8 quantizer"};
  app.require_subcommand(1);

  std::string config, model, model_a, model_b, calib, manifest, method, out;
  std::uint64_t seed = 42;
  std::int64_t n = 100, runs = 10, warmup = 5;
  double rtol = 1e-2, atol = 1e-3;
  bool json = false, timing = false, ln_conv_f32 = false;

  auto* transform = app.add_subcommand("transform",
                                       "Build a DeiT graph, lower it to "
                                       "conv-only form, inherit weights");
  transform->add_option("--config", config, "preset name or config json")
      ->required();
  transform->add_option("--seed", seed, "weight init seed");
  transform->add_option("--out", out, "output directory")->required();

  auto* calibrate = app.add_subcommand(
      "calibrate", "Collect activation ranges over synthetic inputs");
  calibrate->add_option("--model", model, "f32 model prefix")->required();
  calibrate->add_option("--config", config, "input distribution config")
      ->required();
  calibrate->add_option("--n", n, "calibration sample count");
  calibrate->add_option("--seed", seed, "sample seed");
  calibrate->add_option("--out", out, "stats json path")->required();

  auto* quantize =
      app.add_subcommand("quantize", "Emit an int8 bundle from a lowered "
                                     "model and calibration stats");
  quantize->add_option("--model", model, "lowered model prefix")->required();
  quantize->add_option("--calib", calib, "calibration stats json")->required();
  quantize->add_option("--method", method, "minmax|kl")
      ->default_val("minmax");
  quantize->add_flag("--ln-conv-fp32", ln_conv_f32,
                     "keep layernorm mean convs in f32");
  quantize->add_option("--out", out, "output bundle prefix")->required();

  auto* verify = app.add_subcommand(
      "verify", "Compare two models on seeded random inputs");
  verify->add_option("--model-a", model_a, "reference prefix")->required();
  verify->add_option("--model-b", model_b, "candidate prefix")->required();
  verify->add_option("--n", n, "input count")->default_val(32);
  verify->add_option("--rtol", rtol, "mean relative error bound");
  verify->add_option("--atol", atol, "mean absolute error bound");
  verify->add_option("--seed", seed, "input seed");
  verify->add_flag("--json", json, "emit json report");
  verify->add_option("--out", out, "report path (default stdout)");

  auto* eval = app.add_subcommand("eval", "Top-1/top-5 accuracy");
  eval->add_option("--model", model, "model prefix")->required();
  eval->add_option("--dataset", manifest, "dataset manifest json");
  eval->add_option("--config", config, "synthetic dataset config");
  eval->add_option("--n", n, "synthetic sample count");
  eval->add_option("--seed", seed, "synthetic dataset seed");
  eval->add_flag("--timing", timing, "include wall-clock latency");
  eval->add_flag("--json", json, "emit json report");
  eval->add_option("--out", out, "report path (default stdout)");

  auto* bench = app.add_subcommand(
      "bench", "Wall-clock comparison and conv MAC counts");
  bench->add_option("--model-a", model_a, "baseline prefix")->required();
  bench->add_option("--model-b", model_b, "comparison prefix");
  bench->add_option("--runs", runs, "timed runs");
  bench->add_option("--warmup", warmup, "warmup runs");
  bench->add_option("--seed", seed, "input seed");
  bench->add_flag("--json", json, "emit json rows");
  bench->add_option("--out", out, "report path (default stdout)");

  auto* mismatch = app.add_subcommand(
      "mismatch", "Samples where predictions and annotations disagree");
  mismatch->add_option("--model-a", model_a, "fp32 model prefix")->required();
  mismatch->add_option("--model-b", model_b, "quantized model prefix")
      ->required();
  mismatch->add_option("--dataset", manifest, "dataset manifest json");
  mismatch->add_option("--config", config, "synthetic dataset config");
  mismatch->add_option("--n", n, "synthetic sample count");
  mismatch->add_option("--seed", seed, "synthetic dataset seed");
  mismatch->add_flag("--json", json, "emit json rows");
  mismatch->add_option("--out", out, "report path (default stdout)");

  auto* dataset = app.add_subcommand(
      "dataset", "Write a synthetic labeled dataset to disk");
  dataset->add_option("--config", config, "model config for input shape")
      ->required();
  dataset->add_option("--n", n, "sample count");
  dataset->add_option("--seed", seed, "generator seed");
  dataset->add_option("--out", out, "output directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (*transform) return run_transform(config, seed, out);
    if (*calibrate) return run_calibrate(model, config, n, seed, out);
    if (*quantize) return run_quantize(model, calib, method, ln_conv_f32, out);
    if (*verify) {
      return run_verify(model_a, model_b, n, rtol, atol, seed, json, out);
    }
    if (*eval) {
      return run_eval(model, manifest, config, n, seed, timing, json, out);
    }
    if (*bench) return run_bench(model_a, model_b, runs, warmup, seed, json, out);
    if (*mismatch) {
      return run_mismatch(model_a, model_b, manifest, config, n, seed, json,
                          out);
    }
    if (*dataset) return run_dataset(config, n, seed, out);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 2;
}
