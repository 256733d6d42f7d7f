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

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <limits>
#include <vector>

#include "convform/builder.hpp"
#include "convform/checkpoint.hpp"
#include "convform/config.hpp"
#include "convform/error.hpp"
#include "convform/harness.hpp"
#include "convform/interpreter.hpp"
#include "convform/quant.hpp"
#include "convform/random.hpp"
#include "convform/rewrite.hpp"
#include "doctest.h"
#include "test_util.hpp"

using namespace convform;
namespace fs = std::filesystem;

namespace {

// Single 1x1 conv in the lowered dialect, the smallest graph calibrate()
// and build_quantized() accept.
Graph conv_graph(std::int64_t B, std::int64_t Cin, std::int64_t Cout,
                 std::int64_t N) {
  Graph g;
  g.dialect = Dialect::Lowered;
  g.layout = Layout::ChannelsFirst;
  g.input = g.add_edge({B, Cin, 1, N});
  g.params["c.w"] = ParamInfo{{Cout, Cin, 1, 1}, DType::F32, false, 0.0};
  g.params["c.b"] = ParamInfo{{Cout}, DType::F32, false, 0.0};
  g.output = g.add_node(OpKind::Conv2d, {{"stride", std::int64_t{1}}},
                        {g.input}, {"c.w", "c.b"}, {B, Cout, 1, N});
  return g;
}

Checkpoint conv_params(Rng& rng, std::int64_t Cin, std::int64_t Cout) {
  Checkpoint ckpt;
  ckpt.add("c.w", testutil::random_normal(rng, {Cout, Cin, 1, 1}));
  ckpt.add("c.b", testutil::random_normal(rng, {Cout}));
  return ckpt;
}

// EdgeStats for a raw value buffer, using the calibration binning
// convention (|x| histogram, width = hist_max / bins).
EdgeStats stats_for(const std::vector<float>& vals) {
  EdgeStats s;
  s.min_val = *std::min_element(vals.begin(), vals.end());
  s.max_val = *std::max_element(vals.begin(), vals.end());
  s.count = vals.size();
  s.hist_max = std::max(std::abs(s.min_val), std::abs(s.max_val));
  s.hist.assign(kHistogramBins, 0);
  const double width = static_cast<double>(s.hist_max) / kHistogramBins;
  for (float x : vals) {
    std::int64_t b = 0;
    if (width > 0.0) {
      b = static_cast<std::int64_t>(std::abs(static_cast<double>(x)) / width);
      b = std::min<std::int64_t>(b, kHistogramBins - 1);
    }
    s.hist[static_cast<std::size_t>(b)]++;
  }
  return s;
}

// Exhaustive sweep over every threshold using the reference KL scorer.
std::int64_t brute_force_best_bin(const std::vector<std::uint64_t>& hist) {
  double best = std::numeric_limits<double>::infinity();
  std::int64_t best_i = -1;
  for (std::int64_t i = kQuantTargetBins; i <= kHistogramBins; ++i) {
    const double kl = oracles::kl_for_threshold(hist, i, kQuantTargetBins);
    if (kl < best) {
      best = kl;
      best_i = i;
    }
  }
  return best_i < 0 ? kHistogramBins : best_i;
}

}  // namespace

TEST_CASE("quantize_tensor matches the reference rounding, halves included") {
  // Halfway points round away from zero: 2.5 -> 3, -2.5 -> -3.
  const Tensor x = Tensor::from_f32(
      {10}, {0.0f, 0.25f, 0.5f, 0.75f, -0.5f, -0.25f, 1.25f, -1.25f, 63.5f,
             -63.5f});
  const Tensor q = quantize_tensor(x, 0.5f);
  const auto qv = q.i8();
  const std::vector<std::int8_t> want = {0, 1, 1, 2, -1, -1, 3, -3, 127, -127};
  for (std::size_t i = 0; i < want.size(); ++i) CHECK(qv[i] == want[i]);

  Rng rng(3);
  for (int trial = 0; trial < 500; ++trial) {
    const float scale = static_cast<float>(std::exp(rng.normal()) * 0.01);
    const float v = static_cast<float>(rng.normal() * 2.0);
    const Tensor t = Tensor::from_f32({1}, {v});
    CHECK(quantize_tensor(t, scale).i8()[0] ==
          oracles::quantize_value(static_cast<double>(v),
                                  static_cast<double>(scale)));
  }

  CHECK_THROWS_AS(quantize_tensor(x, 0.0f), NumericError);
  CHECK_THROWS_AS(quantize_tensor(x, -1.0f), NumericError);
}

TEST_CASE("quantize round trip stays within half a scale step") {
  Rng rng(5);
  for (int s = 0; s < 10; ++s) {
    const float scale = static_cast<float>(std::exp(rng.normal() - 2.0));
    const float lim = 127.0f * scale;
    std::vector<float> vals(2000);
    for (auto& v : vals)
      v = static_cast<float>(rng.uniform(-1.2 * lim, 1.2 * lim));
    const Tensor x = Tensor::from_f32({2000}, std::move(vals));
    const Tensor back = dequantize_tensor(quantize_tensor(x, scale), scale);
    const auto xv = x.f32();
    const auto bv = back.f32();
    for (std::size_t i = 0; i < bv.size(); ++i) {
      const float v = xv[i];
      if (std::abs(v) <= lim) {
        CHECK(std::abs(v - bv[i]) <= scale / 2.0f + 1e-7f);
      } else {
        // Saturated exactly to the clip limit.
        CHECK(bv[i] == (v > 0 ? lim : -lim));
      }
    }
  }
}

TEST_CASE("per-channel weight quantization") {
  SUBCASE("worked example") {
    // Channel range [-0.5, 0.25]: scale 0.5/127, -0.5 -> -127, 0.25 -> 64.
    const Tensor w = Tensor::from_f32({1, 2, 1, 1}, {-0.5f, 0.25f});
    const QuantizedWeight qw = quantize_conv_weight(w);
    CHECK(qw.scales.f32()[0] == doctest::Approx(0.5 / 127.0).epsilon(1e-9));
    CHECK(qw.values.i8()[0] == -127);
    CHECK(qw.values.i8()[1] == 64);
  }

  SUBCASE("channels are independent and bounded") {
    Rng rng(9);
    const Tensor w = testutil::random_normal(rng, {6, 5, 1, 1});
    const QuantizedWeight qw = quantize_conv_weight(w);
    REQUIRE(qw.scales.shape() == Shape{6});
    REQUIRE(qw.values.shape() == w.shape());
    const auto wv = w.f32();
    const auto qv = qw.values.i8();
    const auto sv = qw.scales.f32();
    for (std::int64_t co = 0; co < 6; ++co) {
      float maxabs = 0.0f;
      for (std::int64_t ci = 0; ci < 5; ++ci)
        maxabs = std::max(maxabs, std::abs(wv[co * 5 + ci]));
      CHECK(sv[co] == static_cast<float>(static_cast<double>(maxabs) / 127.0));
      bool hits_127 = false;
      for (std::int64_t ci = 0; ci < 5; ++ci) {
        const auto q = qv[co * 5 + ci];
        CHECK(q >= -127);
        CHECK(q <= 127);
        if (q == 127 || q == -127) hits_127 = true;
        CHECK(q == oracles::quantize_value(
                       static_cast<double>(wv[co * 5 + ci]),
                       static_cast<double>(sv[co])));
      }
      // The channel extremum always maps to +-127.
      CHECK(hits_127);
    }
  }

  SUBCASE("all-zero channel falls back to scale 1") {
    const Tensor w =
        Tensor::from_f32({2, 2, 1, 1}, {0.0f, 0.0f, 0.3f, -0.6f});
    const QuantizedWeight qw = quantize_conv_weight(w);
    CHECK(qw.scales.f32()[0] == 1.0f);
    CHECK(qw.values.i8()[0] == 0);
    CHECK(qw.values.i8()[1] == 0);
    CHECK(qw.scales.f32()[1] == static_cast<float>(0.6 / 127.0));
  }
}

TEST_CASE("bias quantization rounds in double and saturates to i32") {
  const Tensor scales = Tensor::from_f32({2}, {0.01f, 0.02f});
  const Tensor bias = Tensor::from_f32({2}, {1.0f, -3.0f});
  const Tensor bq = quantize_conv_bias(bias, 0.5f, scales);
  REQUIRE(bq.dtype() == DType::I32);
  CHECK(bq.i32()[0] == 200);   // 1 / (0.5 * 0.01)
  CHECK(bq.i32()[1] == -300);  // -3 / (0.5 * 0.02)

  const Tensor huge = Tensor::from_f32({2}, {1e30f, -1e30f});
  const Tensor hq = quantize_conv_bias(huge, 1e-8f, scales);
  CHECK(hq.i32()[0] == 2147483647);
  CHECK(hq.i32()[1] == -2147483647);
}

TEST_CASE("int8 conv matches the reference implementation bit for bit") {
  Rng rng(1234);
  for (int trial = 0; trial < 1000; ++trial) {
    const std::int64_t B = testutil::rand_int(rng, 1, 2);
    const std::int64_t Cin = testutil::rand_int(rng, 1, 64);
    const std::int64_t Cout = testutil::rand_int(rng, 1, 8);
    const std::int64_t H = testutil::rand_int(rng, 1, 8);
    const std::int64_t W = testutil::rand_int(rng, 1, 8);
    const bool with_bias = trial % 3 != 0;

    std::vector<std::int8_t> xq(static_cast<std::size_t>(B * Cin * H * W));
    for (auto& v : xq)
      v = static_cast<std::int8_t>(testutil::rand_int(rng, -127, 127));
    std::vector<std::int8_t> wq(static_cast<std::size_t>(Cout * Cin));
    for (auto& v : wq)
      v = static_cast<std::int8_t>(testutil::rand_int(rng, -127, 127));
    std::vector<std::int32_t> bq(static_cast<std::size_t>(Cout));
    for (auto& v : bq)
      v = static_cast<std::int32_t>(testutil::rand_int(rng, -100000, 100000));
    if (!with_bias) bq.assign(bq.size(), 0);

    const double s_x = std::exp(rng.normal() - 3.0);
    const double s_y = std::exp(rng.normal() - 3.0);
    std::vector<double> s_w(static_cast<std::size_t>(Cout));
    std::vector<float> s_wf(s_w.size());
    for (std::size_t c = 0; c < s_w.size(); ++c) {
      s_wf[c] = static_cast<float>(std::exp(rng.normal() - 4.0));
      s_w[c] = static_cast<double>(s_wf[c]);
    }

    const Tensor x = Tensor::from_i8({B, Cin, H, W}, xq);
    const Tensor w = Tensor::from_i8({Cout, Cin, 1, 1}, wq);
    const Tensor bias = Tensor::from_i32({Cout}, bq);
    const Tensor ws = Tensor::from_f32({Cout}, s_wf);
    const Tensor y =
        conv2d_1x1_int8(x, w, with_bias ? &bias : nullptr, ws,
                        static_cast<float>(s_x), static_cast<float>(s_y), 1);
    REQUIRE(y.shape() == Shape{B, Cout, H, W});

    // The reference flattens spatial dims; s_x/s_y go through the same
    // f32-typed values the kernel saw.
    const auto want = oracles::conv1x1_int8(
        xq, wq, bq, B, Cin, H * W, Cout,
        static_cast<double>(static_cast<float>(s_x)), s_w,
        static_cast<double>(static_cast<float>(s_y)));
    const auto got = y.i8();
    bool equal = true;
    for (std::size_t i = 0; i < want.size(); ++i)
      if (got[i] != want[i]) equal = false;
    CHECK(equal);
  }
}

TEST_CASE("int8 conv guards its accumulator capacity") {
  // Cin * 127^2 >= 2^31 can overflow i32: 133145 * 16129 = 2147495705.
  const std::int64_t Cin = 133145;
  const Tensor x = Tensor::zeros(DType::I8, {1, Cin, 1, 1});
  const Tensor w = Tensor::zeros(DType::I8, {1, Cin, 1, 1});
  const Tensor ws = Tensor::full_f32({1}, 0.01f);
  CHECK_THROWS_AS(conv2d_1x1_int8(x, w, nullptr, ws, 0.1f, 0.1f, 1),
                  CapacityError);

  // One channel fewer stays below the bound.
  const Tensor x2 = Tensor::zeros(DType::I8, {1, Cin - 1, 1, 1});
  const Tensor w2 = Tensor::zeros(DType::I8, {1, Cin - 1, 1, 1});
  CHECK(conv2d_1x1_int8(x2, w2, nullptr, ws, 0.1f, 0.1f, 1).i8()[0] == 0);

  // Only 1x1 kernels are supported.
  const Tensor x3 = Tensor::zeros(DType::I8, {1, 2, 2, 2});
  const Tensor w3 = Tensor::zeros(DType::I8, {1, 2, 2, 2});
  CHECK_THROWS_AS(conv2d_1x1_int8(x3, w3, nullptr, ws, 0.1f, 0.1f, 1),
                  DimError);
}

TEST_CASE("minmax scale follows the exact formula") {
  EdgeStats s = stats_for({-2.54f, 1.0f, 0.3f});
  const ScaleChoice c = compute_scale_minmax(s);
  CHECK(c.scale == static_cast<float>(2.54 / 127.0));
  CHECK(!c.degenerate);
  CHECK(c.kl_bin == -1);

  EdgeStats pos = stats_for({0.1f, 5.08f});
  CHECK(compute_scale_minmax(pos).scale ==
        static_cast<float>(5.08 / 127.0));

  EdgeStats zero = stats_for({0.0f, 0.0f});
  const ScaleChoice z = compute_scale_minmax(zero);
  CHECK(z.scale == 1.0f);
  CHECK(z.degenerate);
}

TEST_CASE("kl scale matches an exhaustive reference sweep") {
  Rng rng(77);

  SUBCASE("random histograms") {
    for (int trial = 0; trial < 6; ++trial) {
      std::vector<float> vals(20000);
      for (auto& v : vals) {
        // Mixture: bulk gaussian plus occasional wide values.
        const bool wide = rng.uniform() < 0.02;
        v = static_cast<float>(rng.normal() * (wide ? 8.0 : 1.0));
      }
      const EdgeStats s = stats_for(vals);
      const ScaleChoice c = compute_scale_kl(s);
      const std::int64_t want_bin = brute_force_best_bin(s.hist);
      CHECK(c.kl_bin == want_bin);
      const double width =
          static_cast<double>(s.hist_max) / kHistogramBins;
      CHECK(c.scale ==
            static_cast<float>(static_cast<double>(want_bin) * width / 127.0));
    }
  }

  SUBCASE("kl threshold never exceeds the minmax range") {
    for (int trial = 0; trial < 8; ++trial) {
      std::vector<float> vals(8000);
      for (auto& v : vals) v = static_cast<float>(rng.normal());
      const EdgeStats s = stats_for(vals);
      CHECK(compute_scale_kl(s).scale <= compute_scale_minmax(s).scale);
    }
  }

  SUBCASE("outlier-free flat data keeps the full range bitwise") {
    // Uniform magnitudes fill every bin evenly; clipping any tail only
    // loses mass, so the sweep keeps all 2048 bins and the KL scale equals
    // the minmax scale exactly.
    std::vector<float> vals(200000);
    for (auto& v : vals)
      v = static_cast<float>(rng.uniform(-4.0, 4.0));
    EdgeStats s = stats_for(vals);
    const ScaleChoice kl = compute_scale_kl(s);
    CHECK(kl.kl_bin == kHistogramBins);
    CHECK(kl.scale == compute_scale_minmax(s).scale);
  }

  SUBCASE("outliers pull the threshold in strictly") {
    std::vector<float> vals(50000);
    for (std::size_t i = 0; i < vals.size(); ++i) {
      if (i % 1000 == 0) {
        vals[i] = (i % 2000 == 0) ? 20.0f : -20.0f;
      } else {
        vals[i] = static_cast<float>(rng.normal());
      }
    }
    const EdgeStats s = stats_for(vals);
    const ScaleChoice kl = compute_scale_kl(s);
    CHECK(kl.scale < compute_scale_minmax(s).scale);
    CHECK(kl.kl_bin < kHistogramBins);
    CHECK(kl.kl_bin == brute_force_best_bin(s.hist));
  }

  SUBCASE("stats without a histogram are rejected") {
    EdgeStats s;
    s.min_val = -1.0f;
    s.max_val = 1.0f;
    s.count = 10;
    CHECK_THROWS_AS(compute_scale_kl(s), CalibrationError);
  }
}

TEST_CASE("calibrate records conv boundary activations") {
  Rng rng(21);
  const Graph g = conv_graph(1, 4, 3, 5);
  const Checkpoint ckpt = conv_params(rng, 4, 3);

  std::vector<Tensor> samples;
  for (int i = 0; i < 6; ++i)
    samples.push_back(testutil::random_normal(rng, {1, 4, 1, 5}));

  const CalibStats stats = calibrate(g, ckpt, samples);
  CHECK(stats.samples == 6);
  const auto edges = conv_boundary_edges(g);
  REQUIRE(edges == std::vector<EdgeId>{g.input, g.output});
  REQUIRE(stats.edges.size() == 2);

  // Input stats cover exactly the sample values.
  float mn = samples[0].f32()[0], mx = mn;
  for (const auto& s : samples)
    for (float v : s.f32()) {
      mn = std::min(mn, v);
      mx = std::max(mx, v);
    }
  const EdgeStats& in_stats = stats.edges.at(g.input);
  CHECK(in_stats.min_val == mn);
  CHECK(in_stats.max_val == mx);
  CHECK(in_stats.count == 6u * 20u);
  CHECK(in_stats.hist_max == std::max(std::abs(mn), std::abs(mx)));
  std::uint64_t total = 0;
  for (auto c : in_stats.hist) total += c;
  CHECK(total == in_stats.count);

  // Output stats cover the executed activations.
  float omn = 0.0f, omx = 0.0f;
  bool first = true;
  for (const auto& s : samples) {
    const Tensor y = execute(g, ckpt, s);
    for (float v : y.f32()) {
      if (first) {
        omn = omx = v;
        first = false;
      }
      omn = std::min(omn, v);
      omx = std::max(omx, v);
    }
  }
  const EdgeStats& out_stats = stats.edges.at(g.output);
  CHECK(out_stats.min_val == omn);
  CHECK(out_stats.max_val == omx);

  // More samples never shrink the observed range.
  const CalibStats fewer =
      calibrate(g, ckpt, {samples.begin(), samples.begin() + 2});
  CHECK(fewer.edges.at(g.input).min_val >= in_stats.min_val);
  CHECK(fewer.edges.at(g.input).max_val <= in_stats.max_val);

  CHECK_THROWS_AS(calibrate(g, ckpt, {}), CalibrationError);
}

TEST_CASE("calibrate covers every conv boundary of a lowered model") {
  const auto [low, plan] = lower(build_deit(ModelConfig::toy()));
  const Checkpoint ckpt = random_checkpoint(low, 2);
  Rng rng(3);
  std::vector<Tensor> samples;
  for (int i = 0; i < 2; ++i)
    samples.push_back(testutil::random_normal(rng, {1, 3, 8, 8}));
  const CalibStats stats = calibrate(low, ckpt, samples);

  const auto edges = conv_boundary_edges(low);
  CHECK(edges.size() == stats.edges.size());
  for (EdgeId e : edges) {
    const EdgeStats& s = stats.edges.at(e);
    CHECK(s.count > 0);
    std::uint64_t total = 0;
    for (auto c : s.hist) total += c;
    CHECK(total == s.count);
  }

  const std::string text = calib_to_json_string(stats);
  const CalibStats back = calib_from_json_string(text);
  CHECK(calib_to_json_string(back) == text);
  CHECK(back.samples == stats.samples);
  REQUIRE(back.edges.size() == stats.edges.size());
  for (const auto& [e, s] : stats.edges) {
    const EdgeStats& b = back.edges.at(e);
    CHECK(b.min_val == s.min_val);
    CHECK(b.max_val == s.max_val);
    CHECK(b.count == s.count);
    CHECK(b.hist_max == s.hist_max);
    CHECK(b.hist == s.hist);
  }
}

TEST_CASE("build_quantized rewrites convs to int8 with scale bookkeeping") {
  Rng rng(31);
  const auto [low, plan] = lower(build_deit(ModelConfig::toy()));
  const Checkpoint src = random_checkpoint(build_deit(ModelConfig::toy()), 4);
  const Checkpoint inherited = inherit_weights(src, low);
  std::vector<Tensor> samples;
  for (int i = 0; i < 4; ++i)
    samples.push_back(testutil::random_normal(rng, {1, 3, 8, 8}));
  const CalibStats stats = calibrate(low, inherited, samples);

  SUBCASE("all convs quantized") {
    const QuantizedModel m = build_quantized(low, inherited, stats);
    CHECK(validate(m.graph).empty());
    CHECK(m.graph.count_kind(OpKind::Quantize) > 0);
    CHECK(m.graph.count_kind(OpKind::Dequantize) > 0);

    std::int64_t int8_convs = 0;
    for (const auto& n : m.graph.nodes) {
      if (n.kind != OpKind::Conv2d) continue;
      const auto& w = m.graph.params.at(n.param_names.at(0));
      if (w.dtype == DType::I8) {
        ++int8_convs;
        CHECK(n.has_attr("s_x"));
        CHECK(n.has_attr("s_y"));
        CHECK(m.qweights.contains(n.param_names.at(0)));
        CHECK(m.qweights.contains(n.param_names.at(0) + ".scale"));
        CHECK(m.qweights.at(n.param_names.at(0)).dtype() == DType::I8);
      }
    }
    CHECK(int8_convs == 19);

    // Quantized weights agree with direct per-channel quantization.
    const QuantizedWeight direct =
        quantize_conv_weight(inherited.at("blk0.attn.qkv.w"));
    CHECK(testutil::bitwise_equal(m.qweights.at("blk0.attn.qkv.w"),
                                  direct.values));
    CHECK(testutil::bitwise_equal(m.qweights.at("blk0.attn.qkv.w.scale"),
                                  direct.scales));
  }

  SUBCASE("ln mean convs can stay f32") {
    QuantizeOptions opts;
    opts.ln_conv_f32 = true;
    const QuantizedModel m = build_quantized(low, inherited, stats, opts);
    CHECK(validate(m.graph).empty());
    std::int64_t int8_convs = 0, f32_convs = 0;
    for (const auto& n : m.graph.nodes) {
      if (n.kind != OpKind::Conv2d) continue;
      const bool mean_conv =
          n.has_attr("origin") && n.attr_str("origin") == "ln_mean";
      const auto& w = m.graph.params.at(n.param_names.at(0));
      if (mean_conv) {
        CHECK(w.dtype == DType::F32);
        ++f32_convs;
      } else {
        CHECK(w.dtype == DType::I8);
        ++int8_convs;
      }
    }
    CHECK(int8_convs == 9);
    CHECK(f32_convs == 10);
  }

  SUBCASE("missing stats name the edge") {
    CalibStats broken = stats;
    broken.edges.erase(broken.edges.begin());
    CHECK_THROWS_AS(build_quantized(low, inherited, broken),
                    CalibrationError);
  }

  SUBCASE("original-dialect graphs are rejected") {
    const Graph orig = build_deit(ModelConfig::toy());
    CHECK_THROWS_AS(build_quantized(orig, src, stats), PassError);
  }
}

TEST_CASE("quantized execution is deterministic and tracks f32 closely") {
  Rng rng(41);
  const Graph orig = build_deit(ModelConfig::toy());
  const auto [low, plan] = lower(orig);
  const Checkpoint inherited = inherit_weights(random_checkpoint(orig, 6), low);
  std::vector<Tensor> samples;
  for (int i = 0; i < 16; ++i)
    samples.push_back(testutil::random_normal(rng, {1, 3, 8, 8}));
  const CalibStats stats = calibrate(low, inherited, samples);

  for (const CalibMethod method : {CalibMethod::MinMax, CalibMethod::KL}) {
    CAPTURE(calib_method_name(method));
    QuantizeOptions opts;
    opts.method = method;
    const QuantizedModel m = build_quantized(low, inherited, stats, opts);

    const Tensor x = samples[0];
    const Tensor a = execute_quantized(m, x);
    const Tensor b = execute_quantized(m, x);
    CHECK(testutil::bitwise_equal(a, b));

    const Tensor f = execute(low, inherited, x);
    const auto e = testutil::error_stats(f, a);
    // Int8 noise on a toy model: small but not tight; guards regressions
    // like swapped scales, which blow this up by orders of magnitude.
    CHECK(e.mean_abs < 0.1);
    CHECK(sqnr_db(f, a) > 10.0);
  }
}

TEST_CASE("quantized bundle save/load round-trips the execution bitwise") {
  Rng rng(51);
  const Graph orig = build_deit(ModelConfig::toy());
  const auto [low, plan] = lower(orig);
  const Checkpoint inherited = inherit_weights(random_checkpoint(orig, 8), low);
  std::vector<Tensor> samples;
  for (int i = 0; i < 4; ++i)
    samples.push_back(testutil::random_normal(rng, {1, 3, 8, 8}));
  const QuantizedModel m =
      build_quantized(low, inherited, calibrate(low, inherited, samples));

  const fs::path dir = fs::temp_directory_path() / "convform_quant_tests";
  fs::remove_all(dir);
  fs::create_directories(dir);
  const std::string prefix = (dir / "toy_int8").string();
  save_quantized(m, prefix);
  const QuantizedModel back = load_quantized(prefix);

  CHECK(back.method == m.method);
  CHECK(back.ln_conv_f32 == m.ln_conv_f32);
  CHECK(graph_to_json_string(back.graph) == graph_to_json_string(m.graph));
  CHECK(qparams_to_json_string(back) == qparams_to_json_string(m));

  const Tensor x = samples[1];
  CHECK(testutil::bitwise_equal(execute_quantized(back, x),
                                execute_quantized(m, x)));

  // Saving the reloaded model reproduces the original bytes.
  const std::string prefix2 = (dir / "toy_int8_again").string();
  save_quantized(back, prefix2);
  for (const char* suffix :
       {".graph.json", ".dckp", ".weights.dckp", ".qparams.json"}) {
    std::ifstream a(prefix + suffix, std::ios::binary);
    std::ifstream b(prefix2 + suffix, std::ios::binary);
    REQUIRE(a.good());
    REQUIRE(b.good());
    const std::string sa((std::istreambuf_iterator<char>(a)),
                         std::istreambuf_iterator<char>());
    const std::string sb((std::istreambuf_iterator<char>(b)),
                         std::istreambuf_iterator<char>());
    CHECK(sa == sb);
  }
}
