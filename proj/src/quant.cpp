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

#include "convform/quant.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>

#include "convform/error.hpp"
#include "convform/interpreter.hpp"
#include "convform/kernels.hpp"
#include "json.hpp"

namespace convform {

namespace {

std::int8_t round_clamp_i8(double r) {
  if (r >= 127.0) return 127;
  if (r <= -127.0) return -127;
  return static_cast<std::int8_t>(std::lround(r));
}

void observe_minmax(EdgeStats& s, const Tensor& t) {
  auto v = t.f32();
  if (s.count == 0 && !v.empty()) {
    s.min_val = v[0];
    s.max_val = v[0];
  }
  for (float x : v) {
    s.min_val = std::min(s.min_val, x);
    s.max_val = std::max(s.max_val, x);
  }
  s.count += v.size();
}

void observe_hist(EdgeStats& s, const Tensor& t) {
  auto v = t.f32();
  const double width = static_cast<double>(s.hist_max) / kHistogramBins;
  for (float x : v) {
    std::int64_t b = 0;
    if (width > 0.0) {
      b = static_cast<std::int64_t>(std::abs(static_cast<double>(x)) / width);
      b = std::min<std::int64_t>(b, kHistogramBins - 1);
    }
    s.hist[static_cast<std::size_t>(b)]++;
  }
}

}  // namespace

std::vector<EdgeId> conv_boundary_edges(const Graph& lowered) {
  std::set<EdgeId> edges;
  for (const auto& n : lowered.nodes) {
    if (n.kind != OpKind::Conv2d) continue;
    edges.insert(n.inputs.at(0));
    edges.insert(n.output);
  }
  return {edges.begin(), edges.end()};
}

CalibStats calibrate(const Graph& lowered, const Checkpoint& params,
                     const std::vector<Tensor>& samples) {
  if (samples.empty()) {
    throw CalibrationError("calibration needs at least one sample");
  }
  const auto watched_vec = conv_boundary_edges(lowered);
  if (watched_vec.empty()) {
    throw CalibrationError("graph has no conv nodes to calibrate");
  }
  const std::set<EdgeId> watched(watched_vec.begin(), watched_vec.end());

  CalibStats stats;
  stats.samples = static_cast<std::int64_t>(samples.size());
  for (EdgeId e : watched_vec) stats.edges.emplace(e, EdgeStats{});

  const bool watch_input = watched.count(lowered.input) != 0;

  for (const auto& sample : samples) {
    if (watch_input) observe_minmax(stats.edges.at(lowered.input), sample);
    ExecOptions opts;
    opts.observer = [&](EdgeId e, const Tensor& t) {
      auto it = stats.edges.find(e);
      if (it != stats.edges.end()) observe_minmax(it->second, t);
    };
    execute(lowered, params, sample, opts);
  }

  for (auto& [e, s] : stats.edges) {
    (void)e;
    s.hist_max = std::max(std::abs(s.min_val), std::abs(s.max_val));
    s.hist.assign(kHistogramBins, 0);
  }

  for (const auto& sample : samples) {
    if (watch_input) observe_hist(stats.edges.at(lowered.input), sample);
    ExecOptions opts;
    opts.observer = [&](EdgeId e, const Tensor& t) {
      auto it = stats.edges.find(e);
      if (it != stats.edges.end()) observe_hist(it->second, t);
    };
    execute(lowered, params, sample, opts);
  }

  for (auto& [e, s] : stats.edges) {
    std::uint64_t total = 0;
    for (auto c : s.hist) total += c;
    if (total != s.count) {
      throw CalibrationError("histogram for edge " + std::to_string(e) +
                             " lost elements (" + std::to_string(total) +
                             " of " + std::to_string(s.count) + ")");
    }
  }
  return stats;
}

const char* calib_method_name(CalibMethod m) {
  return m == CalibMethod::MinMax ? "minmax" : "kl";
}

CalibMethod calib_method_from_name(const std::string& name) {
  if (name == "minmax") return CalibMethod::MinMax;
  if (name == "kl") return CalibMethod::KL;
  throw ConfigError("unknown calibration method '" + name +
                    "' (want minmax|kl)");
}

ScaleChoice compute_scale_minmax(const EdgeStats& stats) {
  const double maxabs = std::max(std::abs(static_cast<double>(stats.min_val)),
                                 std::abs(static_cast<double>(stats.max_val)));
  if (maxabs == 0.0) return {1.0f, true, -1};
  return {static_cast<float>(maxabs / 127.0), false, -1};
}

namespace {

// Normalize, put eps on the zero bins and take the matching mass off the
// nonzero bins. Returns false when the result is not a usable distribution.
bool smooth_distribution(std::vector<double>& d) {
  const double eps = 1e-4;
  double total = 0.0;
  std::size_t zeros = 0;
  for (double v : d) {
    total += v;
    if (v == 0.0) ++zeros;
  }
  const std::size_t nonzeros = d.size() - zeros;
  if (total <= 0.0 || nonzeros == 0) return false;
  for (double& v : d) v /= total;
  if (zeros == 0) return true;
  const double eps1 =
      eps * static_cast<double>(zeros) / static_cast<double>(nonzeros);
  if (eps1 >= 1.0) return false;
  for (double& v : d) v = (v == 0.0) ? eps : v - eps1;
  return std::all_of(d.begin(), d.end(), [](double v) { return v > 0.0; });
}

}  // namespace

ScaleChoice compute_scale_kl(const EdgeStats& stats) {
  if (stats.hist.size() != kHistogramBins) {
    throw CalibrationError("edge stats carry no histogram; run calibrate()");
  }
  std::uint64_t total = 0;
  for (auto c : stats.hist) total += c;
  if (total == 0 || stats.hist_max == 0.0f) return {1.0f, true, -1};

  double best_kl = std::numeric_limits<double>::infinity();
  std::int64_t best_i = -1;

  for (std::int64_t i = kQuantTargetBins; i <= kHistogramBins; ++i) {
    std::vector<double> p(stats.hist.begin(), stats.hist.begin() + i);
    double tail = 0.0;
    for (std::int64_t b = i; b < kHistogramBins; ++b) {
      tail += static_cast<double>(stats.hist[static_cast<std::size_t>(b)]);
    }
    const std::vector<double> sliced = p;
    p[static_cast<std::size_t>(i - 1)] += tail;

    std::vector<double> q(static_cast<std::size_t>(i), 0.0);
    for (std::int64_t grp = 0; grp < kQuantTargetBins; ++grp) {
      const std::int64_t start = grp * i / kQuantTargetBins;
      const std::int64_t stop = (grp + 1) * i / kQuantTargetBins;
      double sum = 0.0;
      std::int64_t nnz = 0;
      for (std::int64_t b = start; b < stop; ++b) {
        const double v = sliced[static_cast<std::size_t>(b)];
        sum += v;
        if (v > 0.0) ++nnz;
      }
      if (nnz == 0) continue;
      const double fill = sum / static_cast<double>(nnz);
      for (std::int64_t b = start; b < stop; ++b) {
        if (sliced[static_cast<std::size_t>(b)] > 0.0) {
          q[static_cast<std::size_t>(b)] = fill;
        }
      }
    }

    if (!smooth_distribution(p) || !smooth_distribution(q)) continue;
    double kl = 0.0;
    for (std::size_t b = 0; b < p.size(); ++b) {
      kl += p[b] * std::log(p[b] / q[b]);
    }
    if (kl < best_kl) {
      best_kl = kl;
      best_i = i;
    }
  }

  if (best_i < 0) {
    // No scoreable candidate; fall back to the full range.
    best_i = kHistogramBins;
  }
  const double width = static_cast<double>(stats.hist_max) / kHistogramBins;
  const double threshold = static_cast<double>(best_i) * width;
  return {static_cast<float>(threshold / 127.0), false, best_i};
}

Tensor quantize_tensor(const Tensor& x, float scale) {
  if (!(scale > 0.0f) || !std::isfinite(scale)) {
    throw NumericError("quantize scale must be positive and finite");
  }
  auto v = x.f32();
  std::vector<std::int8_t> out(v.size());
  const double s = static_cast<double>(scale);
  for (std::size_t i = 0; i < v.size(); ++i) {
    out[i] = round_clamp_i8(static_cast<double>(v[i]) / s);
  }
  return Tensor::from_i8(x.shape(), std::move(out));
}

Tensor dequantize_tensor(const Tensor& q, float scale) {
  auto v = q.i8();
  std::vector<float> out(v.size());
  const double s = static_cast<double>(scale);
  for (std::size_t i = 0; i < v.size(); ++i) {
    out[i] = static_cast<float>(static_cast<double>(v[i]) * s);
  }
  return Tensor::from_f32(q.shape(), std::move(out));
}

QuantizedWeight quantize_conv_weight(const Tensor& w) {
  if (w.rank() != 4) {
    throw DimError("conv weight must be rank 4, got " + shape_str(w.shape()));
  }
  const std::int64_t Cout = w.dim(0);
  const std::int64_t per = w.numel() / Cout;
  auto v = w.f32();
  std::vector<float> scales(static_cast<std::size_t>(Cout));
  std::vector<std::int8_t> q(v.size());
  for (std::int64_t c = 0; c < Cout; ++c) {
    double maxabs = 0.0;
    for (std::int64_t i = 0; i < per; ++i) {
      maxabs = std::max(
          maxabs, std::abs(static_cast<double>(v[static_cast<std::size_t>(
                      c * per + i)])));
    }
    const double s = (maxabs == 0.0) ? 1.0 : maxabs / 127.0;
    scales[static_cast<std::size_t>(c)] = static_cast<float>(s);
    for (std::int64_t i = 0; i < per; ++i) {
      const auto ix = static_cast<std::size_t>(c * per + i);
      q[ix] = round_clamp_i8(static_cast<double>(v[ix]) / s);
    }
  }
  return {Tensor::from_i8(w.shape(), std::move(q)),
          Tensor::from_f32({Cout}, std::move(scales))};
}

Tensor quantize_conv_bias(const Tensor& bias, float s_x,
                          const Tensor& w_scales) {
  if (bias.numel() != w_scales.numel()) {
    throw DimError("bias and weight scales disagree on channel count");
  }
  auto b = bias.f32();
  auto s = w_scales.f32();
  std::vector<std::int32_t> out(b.size());
  for (std::size_t i = 0; i < b.size(); ++i) {
    const double m = static_cast<double>(s_x) * static_cast<double>(s[i]);
    const double r = static_cast<double>(b[i]) / m;
    const double lim = 2147483647.0;
    const double clamped = std::clamp(r, -lim, lim);
    double rounded = std::floor(std::abs(clamped) + 0.5);
    if (clamped < 0) rounded = -rounded;
    out[i] = static_cast<std::int32_t>(std::clamp(rounded, -lim, lim));
  }
  return Tensor::from_i32(bias.shape(), std::move(out));
}

Tensor conv2d_1x1_int8(const Tensor& x, const Tensor& w, const Tensor* bias,
                       const Tensor& w_scales, float s_x, float s_y,
                       std::int64_t stride) {
  if (x.dtype() != DType::I8 || w.dtype() != DType::I8) {
    throw DimError("int8 conv expects i8 input and weight");
  }
  if (x.rank() != 4 || w.rank() != 4 || w.dim(2) != 1 || w.dim(3) != 1) {
    throw DimError("int8 conv supports 1x1 kernels, got weight " +
                   shape_str(w.shape()));
  }
  const std::int64_t B = x.dim(0), Cin = x.dim(1), H = x.dim(2), W = x.dim(3);
  const std::int64_t Cout = w.dim(0);
  if (w.dim(1) != Cin) {
    throw DimError("int8 conv weight expects " + std::to_string(w.dim(1)) +
                   " channels, input has " + std::to_string(Cin));
  }
  if (w_scales.numel() != Cout) {
    throw DimError("weight scales must have one entry per output channel");
  }
  if (stride < 1 || (H - 1) % stride != 0 || (W - 1) % stride != 0) {
    throw GeometryError("int8 conv stride " + std::to_string(stride) +
                        " does not tile " + shape_str({H, W}));
  }
  if (bias) {
    if (bias->dtype() != DType::I32 || bias->numel() != Cout) {
      throw DimError("int8 conv bias must be i32 with " +
                     std::to_string(Cout) + " entries");
    }
  }
  // worst case |acc| <= Cin * 127 * 127 must fit an i32
  if (static_cast<std::uint64_t>(Cin) * 127u * 127u >= (1ull << 31)) {
    throw CapacityError("int8 accumulator could overflow: Cin=" +
                        std::to_string(Cin));
  }
  const std::int64_t Ho = (H - 1) / stride + 1;
  const std::int64_t Wo = (W - 1) / stride + 1;
  const std::int8_t* xp = x.i8().data();
  const std::int8_t* wp = w.i8().data();
  const std::int32_t* bp = bias ? bias->i32().data() : nullptr;
  const float* sp = w_scales.f32().data();

  std::vector<std::int8_t> out(static_cast<std::size_t>(B * Cout * Ho * Wo));
  for (std::int64_t b = 0; b < B; ++b) {
    for (std::int64_t co = 0; co < Cout; ++co) {
      const double m = static_cast<double>(s_x) *
                       static_cast<double>(sp[co]) /
                       static_cast<double>(s_y);
      const std::int8_t* wrow = wp + co * Cin;
      for (std::int64_t oh = 0; oh < Ho; ++oh) {
        for (std::int64_t ow = 0; ow < Wo; ++ow) {
          const std::int64_t ih = oh * stride, iw = ow * stride;
          std::int32_t acc = 0;
          for (std::int64_t ci = 0; ci < Cin; ++ci) {
            acc += static_cast<std::int32_t>(
                       xp[((b * Cin + ci) * H + ih) * W + iw]) *
                   static_cast<std::int32_t>(wrow[ci]);
          }
          if (bp) acc += bp[co];
          out[static_cast<std::size_t>(((b * Cout + co) * Ho + oh) * Wo +
                                       ow)] =
              round_clamp_i8(static_cast<double>(acc) * m);
        }
      }
    }
  }
  if (auto* counters = active_counters()) {
    counters->conv_macs +=
        static_cast<std::uint64_t>(B * Cout * Ho * Wo * Cin);
  }
  return Tensor::from_i8({B, Cout, Ho, Wo}, std::move(out));
}

namespace {

ScaleChoice choose_scale(const EdgeStats& stats, CalibMethod method) {
  return method == CalibMethod::MinMax ? compute_scale_minmax(stats)
                                       : compute_scale_kl(stats);
}

bool is_ln_mean_conv(const OpNode& n) {
  return n.has_attr("origin") && n.attr_str("origin") == "ln_mean";
}

}  // namespace

QuantizedModel build_quantized(const Graph& lowered,
                               const Checkpoint& inherited,
                               const CalibStats& stats,
                               const QuantizeOptions& opts) {
  if (lowered.dialect != Dialect::Lowered) {
    throw PassError("quantization expects a lowered graph");
  }
  QuantizedModel m;
  m.graph = lowered;
  m.fparams = inherited;
  m.method = opts.method;
  m.ln_conv_f32 = opts.ln_conv_f32;
  Graph& g = m.graph;

  std::vector<NodeId> conv_ids;
  for (const auto& n : g.nodes) {
    if (n.kind != OpKind::Conv2d) continue;
    if (opts.ln_conv_f32 && is_ln_mean_conv(n)) continue;
    conv_ids.push_back(n.id);
  }
  if (conv_ids.empty()) {
    throw CalibrationError("lowered graph has no convs to quantize");
  }

  // activation scales for every conv boundary edge
  std::set<EdgeId> boundary;
  for (NodeId id : conv_ids) {
    const OpNode& n = g.node(id);
    boundary.insert(n.inputs.at(0));
    boundary.insert(n.output);
  }
  for (EdgeId e : boundary) {
    auto it = stats.edges.find(e);
    if (it == stats.edges.end() || it->second.count == 0) {
      throw CalibrationError("no calibration stats for edge " +
                             std::to_string(e));
    }
    m.act_scales.emplace(e, choose_scale(it->second, opts.method));
  }

  // weights, biases and conv attrs
  for (NodeId id : conv_ids) {
    OpNode& n = g.node(id);
    const std::string& wname = n.param_names.at(0);
    const Tensor& w = inherited.at(wname);
    const std::int64_t Cin = w.dim(1);
    if (static_cast<std::uint64_t>(Cin) * 127u * 127u >= (1ull << 31)) {
      throw CapacityError("conv '" + wname + "' exceeds i32 accumulator: " +
                          std::to_string(Cin) + " input channels");
    }
    if (w.dim(2) != 1 || w.dim(3) != 1) {
      throw PassError("conv '" + wname +
                      "' is not 1x1; only rewritten convs quantize");
    }
    auto qw = quantize_conv_weight(w);
    const float s_x = m.act_scales.at(n.inputs.at(0)).scale;
    const float s_y = m.act_scales.at(n.output).scale;
    m.qweights.add(wname, qw.values);
    m.qweights.add(wname + ".scale", qw.scales);
    g.params[wname].dtype = DType::I8;
    g.params.emplace(wname + ".scale",
                     ParamInfo{{w.dim(0)}, DType::F32, false, 0.0});
    if (n.param_names.size() == 2) {
      const std::string& bname = n.param_names.at(1);
      m.qweights.add(bname,
                     quantize_conv_bias(inherited.at(bname), s_x, qw.scales));
      g.params[bname].dtype = DType::I32;
    }
    n.attrs["s_x"] = static_cast<double>(s_x);
    n.attrs["s_y"] = static_cast<double>(s_y);
  }

  const std::set<NodeId> int8_convs(conv_ids.begin(), conv_ids.end());

  // flip conv outputs first so convs chained onto i8 edges skip Quantize
  for (NodeId id : conv_ids) {
    g.edge(g.node(id).output).dtype = DType::I8;
  }

  // insert one shared Quantize per edge feeding int8 convs
  std::set<EdgeId> quant_inputs;
  for (NodeId id : conv_ids) {
    quant_inputs.insert(g.node(id).inputs.at(0));
  }
  for (EdgeId e : quant_inputs) {
    if (g.edge(e).dtype != DType::F32) continue;  // conv chained onto i8
    const float scale = m.act_scales.at(e).scale;
    OpNode qn;
    qn.id = g.fresh_node_id();
    qn.kind = OpKind::Quantize;
    qn.attrs["scale"] = static_cast<double>(scale);
    qn.inputs = {e};
    qn.output = g.add_edge(g.edge(e).shape, DType::I8);
    // place before the first int8-conv consumer
    std::size_t first = g.nodes.size();
    for (std::size_t i = 0; i < g.nodes.size(); ++i) {
      if (int8_convs.count(g.nodes[i].id) && g.nodes[i].inputs.at(0) == e) {
        first = std::min(first, i);
      }
    }
    for (std::size_t i = first; i < g.nodes.size(); ++i) {
      if (int8_convs.count(g.nodes[i].id) && g.nodes[i].inputs.at(0) == e) {
        g.nodes[i].inputs[0] = qn.output;
      }
    }
    g.nodes.insert(g.nodes.begin() + static_cast<std::ptrdiff_t>(first),
                   std::move(qn));
  }

  // dequantize conv outputs for their f32 consumers
  for (NodeId id : conv_ids) {
    const EdgeId out_edge = g.node(id).output;
    const float scale = m.act_scales.at(out_edge).scale;

    std::vector<NodeId> f32_consumers;
    for (const auto& n : g.nodes) {
      if (n.id == id) continue;
      if (std::find(n.inputs.begin(), n.inputs.end(), out_edge) !=
          n.inputs.end()) {
        if (!int8_convs.count(n.id)) f32_consumers.push_back(n.id);
      }
    }
    const bool is_output = (g.output == out_edge);
    if (f32_consumers.empty() && !is_output) continue;

    OpNode dq;
    dq.id = g.fresh_node_id();
    dq.kind = OpKind::Dequantize;
    dq.attrs["scale"] = static_cast<double>(scale);
    dq.inputs = {out_edge};
    dq.output = g.add_edge(g.edge(out_edge).shape, DType::F32);
    const EdgeId dq_out = dq.output;
    const auto conv_ix = g.node_index(id).value();
    g.nodes.insert(g.nodes.begin() + static_cast<std::ptrdiff_t>(conv_ix) + 1,
                   std::move(dq));
    for (NodeId cid : f32_consumers) {
      for (EdgeId& e : g.node(cid).inputs) {
        if (e == out_edge) e = dq_out;
      }
    }
    if (is_output) g.output = dq_out;
  }

  infer_shapes(g);
  auto diags = validate(g);
  if (!diags.empty()) {
    throw PassError("quantized graph failed validation: " + diags.front());
  }
  return m;
}

Tensor execute_quantized(const QuantizedModel& m, const Tensor& input) {
  return execute(m.graph, overlay(m.fparams, m.qweights), input);
}

std::string qparams_to_json_string(const QuantizedModel& m) {
  nlohmann::json j;
  j["method"] = calib_method_name(m.method);
  j["ln_conv_f32"] = m.ln_conv_f32;
  nlohmann::json edges = nlohmann::json::array();
  for (const auto& [e, c] : m.act_scales) {
    edges.push_back({{"edge", e},
                     {"scale", c.scale},
                     {"degenerate", c.degenerate},
                     {"kl_bin", c.kl_bin}});
  }
  j["act_scales"] = std::move(edges);
  return j.dump(2) + "\n";
}

namespace {

void qparams_from_json_string(const std::string& text, QuantizedModel& m) {
  try {
    const auto j = nlohmann::json::parse(text);
    m.method = calib_method_from_name(j.at("method").get<std::string>());
    m.ln_conv_f32 = j.at("ln_conv_f32").get<bool>();
    for (const auto& je : j.at("act_scales")) {
      ScaleChoice c;
      c.scale = je.at("scale").get<float>();
      c.degenerate = je.at("degenerate").get<bool>();
      c.kl_bin = je.at("kl_bin").get<std::int64_t>();
      m.act_scales.emplace(je.at("edge").get<EdgeId>(), c);
    }
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("qparams json is malformed: ") + e.what());
  }
}

std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return std::move(ss).str();
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError("cannot open " + path.string() + " for write");
  out << text;
  if (!out) throw FormatError("failed writing " + path.string());
}

}  // namespace

void save_quantized(const QuantizedModel& m, const std::string& prefix) {
  save_graph(m.graph, prefix + ".graph.json");
  save_checkpoint(m.fparams, prefix + ".dckp");
  save_checkpoint(m.qweights, prefix + ".weights.dckp");
  write_text(prefix + ".qparams.json", qparams_to_json_string(m));
}

QuantizedModel load_quantized(const std::string& prefix) {
  QuantizedModel m;
  m.graph = load_graph(prefix + ".graph.json");
  m.fparams = load_checkpoint(prefix + ".dckp");
  m.qweights = load_checkpoint(prefix + ".weights.dckp");
  qparams_from_json_string(read_text(prefix + ".qparams.json"), m);
  return m;
}

std::string calib_to_json_string(const CalibStats& stats) {
  nlohmann::json j;
  j["samples"] = stats.samples;
  nlohmann::json edges = nlohmann::json::array();
  for (const auto& [e, s] : stats.edges) {
    edges.push_back({{"edge", e},
                     {"min", s.min_val},
                     {"max", s.max_val},
                     {"count", s.count},
                     {"hist_max", s.hist_max},
                     {"hist", s.hist}});
  }
  j["edges"] = std::move(edges);
  return j.dump() + "\n";
}

CalibStats calib_from_json_string(const std::string& text) {
  try {
    const auto j = nlohmann::json::parse(text);
    CalibStats stats;
    stats.samples = j.at("samples").get<std::int64_t>();
    for (const auto& je : j.at("edges")) {
      EdgeStats s;
      s.min_val = je.at("min").get<float>();
      s.max_val = je.at("max").get<float>();
      s.count = je.at("count").get<std::uint64_t>();
      s.hist_max = je.at("hist_max").get<float>();
      s.hist = je.at("hist").get<std::vector<std::uint64_t>>();
      if (s.hist.size() != kHistogramBins) {
        throw FormatError("calib histogram has " +
                          std::to_string(s.hist.size()) + " bins");
      }
      stats.edges.emplace(je.at("edge").get<EdgeId>(), std::move(s));
    }
    return stats;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("calib json is malformed: ") + e.what());
  }
}

void save_calib(const CalibStats& stats, const std::filesystem::path& path) {
  write_text(path, calib_to_json_string(stats));
}

CalibStats load_calib(const std::filesystem::path& path) {
  return calib_from_json_string(read_text(path));
}

}  // namespace convform
