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

#include "convform/builder.hpp"

#include <cmath>
#include <string>

#include "convform/error.hpp"

namespace convform {

namespace {

std::string blk(std::int64_t i, const std::string& rest) {
  return "blk" + std::to_string(i) + "." + rest;
}

}  // namespace

Graph build_deit(const ModelConfig& c, std::int64_t batch) {
  c.check();
  if (batch < 1) throw ConfigError("batch must be positive");

  const std::int64_t B = batch;
  const std::int64_t C = c.embed_dim;
  const std::int64_t h = c.heads;
  const std::int64_t d = c.head_dim();
  const std::int64_t N = c.tokens();
  const std::int64_t P = c.patches();
  const std::int64_t F = c.ffn_dim();
  const std::int64_t K = c.num_classes;
  const double eps = static_cast<double>(c.eps);

  Graph g;
  auto declare = [&](const std::string& name, Shape shape) {
    g.params.emplace(name, ParamInfo{std::move(shape), DType::F32, false, 0.0});
  };

  declare("patch.w", {C, 3, c.patch, c.patch});
  declare("patch.b", {C});
  declare("cls", {1, 1, C});
  if (c.distilled) declare("dist", {1, 1, C});
  declare("pos", {1, N, C});
  for (std::int64_t i = 0; i < c.depth; ++i) {
    declare(blk(i, "ln1.gamma"), {C});
    declare(blk(i, "ln1.beta"), {C});
    declare(blk(i, "attn.qkv.w"), {3 * C, C});
    declare(blk(i, "attn.qkv.b"), {3 * C});
    declare(blk(i, "attn.proj.w"), {C, C});
    declare(blk(i, "attn.proj.b"), {C});
    declare(blk(i, "ln2.gamma"), {C});
    declare(blk(i, "ln2.beta"), {C});
    declare(blk(i, "ffn.fc1.w"), {F, C});
    declare(blk(i, "ffn.fc1.b"), {F});
    declare(blk(i, "ffn.fc2.w"), {C, F});
    declare(blk(i, "ffn.fc2.b"), {C});
  }
  declare("norm.gamma", {C});
  declare("norm.beta", {C});
  declare("head.w", {K, C});
  declare("head.b", {K});
  if (c.distilled) {
    declare("head_dist.w", {K, C});
    declare("head_dist.b", {K});
  }

  g.input = g.add_edge({B, 3, c.img_size, c.img_size});

  EdgeId x = g.add_node(OpKind::PatchEmbed, {{"patch", c.patch}}, {g.input},
                        {"patch.w", "patch.b"}, {B, P, C});
  std::vector<std::string> tokens = {"cls"};
  if (c.distilled) tokens.push_back("dist");
  x = g.add_node(OpKind::TokenInsert, {}, {x}, std::move(tokens), {B, N, C});
  x = g.add_node(OpKind::AddPosEmbed, {}, {x}, {"pos"}, {B, N, C});

  for (std::int64_t i = 0; i < c.depth; ++i) {
    // attention
    EdgeId ln1 = g.add_node(OpKind::LayerNorm, {{"eps", eps}}, {x},
                            {blk(i, "ln1.gamma"), blk(i, "ln1.beta")},
                            {B, N, C});
    EdgeId qkv = g.add_node(OpKind::Linear, {{"out_features", 3 * C}}, {ln1},
                            {blk(i, "attn.qkv.w"), blk(i, "attn.qkv.b")},
                            {B, N, 3 * C});
    EdgeId q = g.add_node(
        OpKind::Slice, {{"axis", std::int64_t{2}}, {"start", std::int64_t{0}},
                        {"stop", C}},
        {qkv}, {}, {B, N, C});
    EdgeId k = g.add_node(
        OpKind::Slice,
        {{"axis", std::int64_t{2}}, {"start", C}, {"stop", 2 * C}}, {qkv}, {},
        {B, N, C});
    EdgeId v = g.add_node(
        OpKind::Slice,
        {{"axis", std::int64_t{2}}, {"start", 2 * C}, {"stop", 3 * C}}, {qkv},
        {}, {B, N, C});
    q = g.add_node(OpKind::MulScalar,
                   {{"value", 1.0 / std::sqrt(static_cast<double>(d))}}, {q},
                   {}, {B, N, C});
    auto split_heads = [&](EdgeId e) {
      e = g.add_node(OpKind::Reshape,
                     {{"shape", std::vector<std::int64_t>{B, N, h, d}}}, {e},
                     {}, {B, N, h, d});
      e = g.add_node(OpKind::Permute,
                     {{"perm", std::vector<std::int64_t>{0, 2, 1, 3}}}, {e},
                     {}, {B, h, N, d});
      return g.add_node(OpKind::Reshape,
                        {{"shape", std::vector<std::int64_t>{B * h, N, d}}},
                        {e}, {}, {B * h, N, d});
    };
    q = split_heads(q);
    k = split_heads(k);
    v = split_heads(v);
    EdgeId scores =
        g.add_node(OpKind::MatMulQK, {}, {q, k}, {}, {B * h, N, N});
    EdgeId att = g.add_node(OpKind::Softmax, {}, {scores}, {}, {B * h, N, N});
    EdgeId ctx = g.add_node(OpKind::MatMulAV, {}, {att, v}, {}, {B * h, N, d});
    ctx = g.add_node(OpKind::Reshape,
                     {{"shape", std::vector<std::int64_t>{B, h, N, d}}}, {ctx},
                     {}, {B, h, N, d});
    ctx = g.add_node(OpKind::Permute,
                     {{"perm", std::vector<std::int64_t>{0, 2, 1, 3}}}, {ctx},
                     {}, {B, N, h, d});
    ctx = g.add_node(OpKind::Reshape,
                     {{"shape", std::vector<std::int64_t>{B, N, C}}}, {ctx},
                     {}, {B, N, C});
    EdgeId proj = g.add_node(OpKind::Linear, {{"out_features", C}}, {ctx},
                             {blk(i, "attn.proj.w"), blk(i, "attn.proj.b")},
                             {B, N, C});
    x = g.add_node(OpKind::Add, {}, {x, proj}, {}, {B, N, C});

    // feed-forward
    EdgeId ln2 = g.add_node(OpKind::LayerNorm, {{"eps", eps}}, {x},
                            {blk(i, "ln2.gamma"), blk(i, "ln2.beta")},
                            {B, N, C});
    EdgeId f1 = g.add_node(OpKind::Linear, {{"out_features", F}}, {ln2},
                           {blk(i, "ffn.fc1.w"), blk(i, "ffn.fc1.b")},
                           {B, N, F});
    EdgeId gl = g.add_node(OpKind::Gelu, {}, {f1}, {}, {B, N, F});
    EdgeId f2 = g.add_node(OpKind::Linear, {{"out_features", C}}, {gl},
                           {blk(i, "ffn.fc2.w"), blk(i, "ffn.fc2.b")},
                           {B, N, C});
    x = g.add_node(OpKind::Add, {}, {x, f2}, {}, {B, N, C});
  }

  x = g.add_node(OpKind::LayerNorm, {{"eps", eps}}, {x},
                 {"norm.gamma", "norm.beta"}, {B, N, C});

  auto head_from_token = [&](std::int64_t token, const std::string& prefix) {
    EdgeId t = g.add_node(
        OpKind::Slice, {{"axis", std::int64_t{1}}, {"start", token},
                        {"stop", token + 1}},
        {x}, {}, {B, 1, C});
    t = g.add_node(OpKind::Reshape,
                   {{"shape", std::vector<std::int64_t>{B, C}}}, {t}, {},
                   {B, C});
    return g.add_node(OpKind::Head, {{"out_features", K}}, {t},
                      {prefix + ".w", prefix + ".b"}, {B, K});
  };

  EdgeId logits = head_from_token(0, "head");
  if (c.distilled) {
    EdgeId dist_logits = head_from_token(1, "head_dist");
    EdgeId sum = g.add_node(OpKind::Add, {}, {logits, dist_logits}, {}, {B, K});
    logits = g.add_node(OpKind::MulScalar, {{"value", 0.5}}, {sum}, {}, {B, K});
  }
  g.output = logits;
  return g;
}

std::int64_t param_count(const ModelConfig& config) {
  const Graph g = build_deit(config, 1);
  std::int64_t total = 0;
  for (const auto& [name, info] : g.params) {
    (void)name;
    total += shape_numel(info.shape);
  }
  return total;
}

}  // namespace convform
